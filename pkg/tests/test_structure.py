import math

import numpy as np
import pytest

from sublab import expr
from sublab.fixtures import builtin_corpus, e, get_fixture
from sublab.structure import (
    JHatUndefined,
    StructureError,
    c_square_residual,
    decompose,
    identity_residuals,
    j_hat,
    j_hat_residual,
    omega_surjectivity,
    slant_norm_residual,
    structure_operators,
)
from sublab.subspace import ComplexStructure, Frame, principal_angles


def ops_for(name, point=None, J=None, **params):
    fx = get_fixture(name)
    m = fx.map.domain_dim
    p = np.full(m, 0.7) if point is None else np.asarray(point, float)
    jac = expr.jacobian(fx.map, p, dict(fx.params, **params))
    j = ComplexStructure.standard(m).matrix if J is None else J
    return decompose(jac, j)[0]


def sample_points(fx, n, seed=11):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        p = rng.uniform(-2, 2, fx.map.domain_dim)
        if fx.regular is None or fx.regular(p):
            out.append(p)
    return out


def test_example_operator_values():
    a = 0.7
    ops = ops_for("ex4_3", alpha=a)
    u = e(6, (3, math.sin(a)), (5, -math.cos(a)))
    np.testing.assert_allclose(ops.C @ u, -math.cos(a) * e(6, (6, 1)), atol=1e-14)
    np.testing.assert_allclose(ops.B @ u, math.sin(a) * e(6, (4, 1)), atol=1e-14)
    e6 = e(6, (6, 1))
    np.testing.assert_allclose(ops.C @ e6, math.cos(a) * u, atol=1e-14)
    np.testing.assert_allclose(ops.C @ ops.C @ e6, -math.cos(a) ** 2 * e6, atol=1e-14)


def test_trivial_fibre_has_zero_vertical_operators():
    jac = np.eye(2)
    ops = decompose(jac, ComplexStructure.standard(2))[0]
    for mat in (ops.phi, ops.omega, ops.B):
        assert not mat.any()
    assert max(identity_residuals(ops).values()) < 1e-14


def test_projector_bookkeeping():
    ops = ops_for("ex4_6")
    np.testing.assert_allclose(ops.P + ops.Q, ops.Ph, atol=1e-14)
    assert np.abs(ops.P @ ops.Q).max() < 1e-14
    np.testing.assert_allclose(ops.phi + ops.omega, ops.J @ ops.Pv, atol=1e-14)
    np.testing.assert_allclose(ops.B + ops.C, ops.J @ ops.Ph, atol=1e-14)
    assert np.abs(ops.Ph @ ops.phi).max() < 1e-14 and np.abs(ops.Pv @ ops.C).max() < 1e-14


@pytest.mark.parametrize("fx", builtin_corpus(), ids=lambda f: f.name)
def test_identities_everywhere(fx):
    m = fx.map.domain_dim
    jm = ComplexStructure.standard(m).matrix
    worst = 0.0
    for p in sample_points(fx, 100):
        ops = decompose(expr.jacobian(fx.map, p, fx.params), jm)[0]
        worst = max(worst, *identity_residuals(ops).values())
        # skewness and adjointness of the blocks
        V, H = ops.vertical.basis, ops.horizontal.basis
        if V.shape[1]:
            assert np.abs(V.T @ ops.phi @ V + (V.T @ ops.phi @ V).T).max() < 1e-10
            assert np.abs(H.T @ ops.omega @ V + (V.T @ ops.B @ H).T).max() < 1e-10
        assert slant_norm_residual(ops) < 1e-10
        if ops.mu.dim:
            assert principal_angles(Frame.from_vectors(jm @ ops.mu.basis), ops.mu).min() >= 1 - 1e-10
    assert worst < 1e-10


def test_corrupted_J_is_detected():
    ops = ops_for("ex4_6")
    E = np.random.default_rng(0).normal(size=ops.J.shape)
    bad = structure_operators(ops.vertical, ops.D1, ops.D2, ops.J + 0.1 * E, ops.theta)
    assert max(identity_residuals(bad).values()) > 1e-3


def test_omega_onto_D2_odd_case():
    ops = ops_for("ex4_5")
    assert ops.D2.dim == 1
    assert identity_residuals(ops)["omega(ker)=D2"] < 1e-10
    assert omega_surjectivity(ops) > 0.5


@pytest.mark.parametrize("name, cos2", [("ex4_4", 0.5), ("ex4_5", 0.0), ("ex4_6", 0.5)])
def test_c_square(name, cos2):
    ops = ops_for(name)
    assert math.cos(ops.theta) ** 2 == pytest.approx(cos2, abs=1e-14)
    assert c_square_residual(ops) < 1e-10


def test_c_square_vacuous_and_absent_theta():
    assert c_square_residual(ops_for("trivial_invariant")) == 0.0
    ops = ops_for("ex4_4")
    no_theta = structure_operators(ops.vertical, ops.D1, ops.D2, ops.J, None)
    with pytest.raises(StructureError):
        c_square_residual(no_theta)


def test_j_hat():
    ops = ops_for("ex4_6")
    assert ops.horizontal.dim == 6
    assert j_hat_residual(ops, j_hat(ops)) < 1e-10
    with pytest.raises(JHatUndefined, match="pi/2"):
        j_hat(ops_for("ex4_5"))
    inv = ops_for("trivial_invariant")
    np.testing.assert_allclose(j_hat(inv), inv.J @ inv.P)
    assert j_hat_residual(inv) < 1e-14


def test_structure_operators_rejects_overlapping_frames():
    ops = ops_for("ex4_4")
    with pytest.raises(StructureError):
        structure_operators(ops.vertical, ops.D1, ops.D1, ops.J)
