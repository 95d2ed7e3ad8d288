import math

import numpy as np
import pytest

from sublab.classify import (
    Sampler,
    Tolerances,
    analyze_point,
    classify,
    foliation_checks,
    integrability_D1,
    integrability_D2,
    totally_geodesic_map_check,
    totally_geodesic_point,
    umbilical_fiber_report,
    umbilical_point,
    verdict_for,
)
from sublab.expr import parse_map
from sublab.fixtures import builtin_corpus, get_fixture
from sublab.oneill import ProjectorField

from .conftest import AFFINE, radial_point

TWO_ANGLES = """\
domain 8
codomain 4
F1 = x1
F2 = 0.9*x2 + 0.4358898943540674*x3
F3 = x5
F4 = 0.3*x6 + 0.9539392014169456*x7
"""


@pytest.mark.parametrize("fx", builtin_corpus(), ids=lambda f: f.name)
def test_corpus_verdicts(fx):
    rep = classify(fx.map, None, fx.params, Sampler(n=30), regular=fx.regular)
    verdict, theta = fx.expected.verdict(fx.params)
    assert rep.verdict == verdict
    if theta is None:
        assert rep.theta is None
    else:
        assert abs(rep.theta - theta) <= 1e-9


def test_radial_carries_semi_invariant_note():
    fx = get_fixture("radial")
    rep = classify(fx.map, None, {}, Sampler(n=10), regular=fx.regular)
    assert rep.verdict == "v-slant"
    assert any("v-semi-invariant" in n for n in rep.notes)


def test_verdict_table():
    assert verdict_for(None, 2, 0)[0] == "v-invariant"
    assert verdict_for(0.4, 2, 2)[0] == "v-semi-slant"
    assert verdict_for(0.4, 0, 2)[0] == "v-slant"
    assert verdict_for(math.pi / 2, 2, 1)[0] == "v-semi-invariant"
    assert verdict_for(None, 2, 4)[0] == "not-classified"


def test_two_angles_not_classified():
    rep = classify(parse_map(TWO_ANGLES), None, {}, Sampler(n=5))
    assert rep.verdict == "not-classified"
    assert any("several" in n for n in rep.notes)


def test_non_riemannian_not_classified():
    rep = classify(get_fixture("twisted").map, None, {}, Sampler(n=5))
    assert rep.verdict == "not-classified"
    assert not rep.checks["submersion"].passed


def test_rank_deficient_points_are_skipped():
    fm = parse_map("domain 2\ncodomain 1\nF1 = x1*x1\n")
    pts = [np.array([0.0, 1.0]), np.array([1.0, 0.5])]
    rep = classify(fm, None, {}, points=pts)
    assert "rank-deficient" in rep.analyses[0].flags
    assert any("skipped" in n for n in rep.notes)


def test_even_dimension_property_across_corpus():
    for fx in builtin_corpus():
        rep = classify(fx.map, None, fx.params, Sampler(n=10), regular=fx.regular)
        assert rep.checks["parity"].passed
        if rep.theta is not None and rep.theta < math.pi / 2 - 1e-8:
            assert fx.map.codomain_dim % 2 == 0 and rep.dims["D2"] % 2 == 0


def test_permutation_of_points_keeps_theta():
    fx = get_fixture("ex4_7")
    pts = Sampler(n=20).points(8)
    a = classify(fx.map, None, fx.params, points=pts)
    b = classify(fx.map, None, fx.params, points=pts[::-1])
    assert a.theta == b.theta and a.verdict == b.verdict


def test_grid_sampler_is_deterministic_and_regular():
    s = Sampler("grid", n=25)
    pts = s.points(4, lambda x: np.linalg.norm(x) > 0.1)
    assert len(pts) == 25 and all(np.linalg.norm(p) > 0.1 for p in pts)
    assert all((a == b).all() for a, b in zip(pts, s.points(4, lambda x: np.linalg.norm(x) > 0.1)))


def _analysis(name, point=None, **params):
    fx = get_fixture(name)
    p = np.full(fx.map.domain_dim, 0.6) if point is None else point
    pr = dict(fx.params, **params)
    return analyze_point(fx.map, None, pr, p), ProjectorField(fx.map, pr)


@pytest.mark.parametrize("name", AFFINE)
def test_affine_structure_residuals_vanish(name):
    a, fld = _analysis(name)
    for res in (integrability_D1(a, fld), integrability_D2(a, fld)):
        if res["applicable"]:
            assert res["residual"] < 1e-10 and res["direct"] < 1e-10 and res["consistent"]
    for key, res in foliation_checks(a, fld).items():
        if res["applicable"]:
            assert res["residual"] < 1e-10 and res["direct"] < 1e-10, key
    tg = totally_geodesic_point(a, fld)
    assert tg["residual"] < 1e-10 and tg["equivalent"]


@pytest.mark.parametrize("r", (0.5, 1.0, 2.0))
def test_radial_foliations(r):
    a, fld = _analysis("radial", radial_point(r))
    fol = foliation_checks(a, fld)
    # sum over a vertical frame of |T_{e_i} e_j|^2 is 3 / r^2 on the round sphere
    assert fol["vertical"]["residual"] == pytest.approx(math.sqrt(3) / r, abs=1e-6)
    assert fol["vertical"]["direct"] == pytest.approx(math.sqrt(3) / r, abs=1e-6)
    assert fol["horizontal"]["residual"] < 1e-6
    assert fol["D2"]["residual"] < 1e-6


def test_radial_totally_geodesic_equivalence():
    a, fld = _analysis("radial", radial_point(1.0))
    tg = totally_geodesic_point(a, fld)
    assert tg["vertical_pairs"] > 1e-3 and tg["direct"] > 1e-3 and tg["equivalent"]
    assert tg["mixed_pairs"] < 1e-6


def test_twisted_integrability_failure_is_seen_both_ways():
    a, fld = _analysis("twisted", np.zeros(4))
    res = integrability_D2(a, fld)
    assert res["A"] > 1e-3 and res["direct"] > 1e-3 and res["consistent"]


def test_umbilical_reports():
    a, fld = _analysis("radial", radial_point(1.5))
    u = umbilical_point(a, fld)
    assert u["residual"] < 1e-6 and u["H_perp_D2"] < 1e-8 and u["pass"]
    rep = umbilical_fiber_report(get_fixture("radial").map, None, {},
                                 Sampler(n=3), regular=get_fixture("radial").regular)
    assert rep["applicable"] and rep["pass"]
    ell = get_fixture("ellipsoid")
    assert umbilical_fiber_report(ell.map, None, {}, Sampler(n=3), regular=ell.regular)["residual"] > 1e-3


def test_totally_geodesic_map_check():
    fx = get_fixture("ex4_4")
    assert totally_geodesic_map_check(fx.map, None, {}, Sampler(n=2))["residual"] < 1e-10
    fx = get_fixture("radial")
    assert totally_geodesic_map_check(fx.map, None, {}, Sampler(n=2), fx.regular)["residual"] > 1e-3


def test_tolerances_are_plain_config():
    t = Tolerances(angle=1e-6)
    assert t.angle == 1e-6 and t.rank == 1e-8
