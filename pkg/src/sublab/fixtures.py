"""Builtin maps: the five worked examples plus two synthetic reference maps.

Every fixture uses the standard complex structure J e_{2i-1} = e_{2i}.
With it the expected angles below follow by direct computation, e.g. for
ex4_7 the unit vectors u = cos a e3 - sin a e5 and v = sin b e4 + cos b e6
span D2 and <Ju, v> = sin(b - a).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .expr import MapDefinition, parse_map

S2 = 1.0 / math.sqrt(2.0)


def e(m: int, *entries) -> np.ndarray:
    """Vector in R^m from (1-based index, coefficient) pairs."""
    v = np.zeros(m)
    for i, c in entries:
        v[i - 1] = c
    return v


def span(*vectors) -> np.ndarray:
    return np.column_stack(vectors) if vectors else None


def verdict_from_theta(theta: float | None, d1: bool, tol: float = 1e-12) -> tuple[str, float | None]:
    if theta is None or theta <= tol:
        return "v-invariant", None
    if abs(theta - math.pi / 2) <= tol:
        return ("v-semi-invariant" if d1 else "v-slant"), math.pi / 2
    return ("v-semi-slant" if d1 else "v-slant"), theta


@dataclass
class Expected:
    theta: Callable  # params -> theta or None
    has_d1: bool = True
    d1: Callable | None = None  # (params, point) -> m x k
    d2: Callable | None = None
    failing: frozenset = frozenset()
    verdict_override: Callable | None = None
    provenance: dict = field(default_factory=dict)

    def verdict(self, params) -> tuple[str, float | None]:
        if self.verdict_override is not None:
            return self.verdict_override(params)
        return verdict_from_theta(self.theta(params), self.has_d1)


@dataclass
class Fixture:
    name: str
    source: str
    params: dict
    expected: Expected
    description: str = ""
    regular: Callable | None = None
    J: object = None  # None means the standard structure

    @property
    def map(self) -> MapDefinition:
        return parse_map(self.source)


EX4_3 = """\
# R^6 -> R^4
domain 6
codomain 4
param alpha
F1 = x1
F2 = sin(alpha)*x3 - cos(alpha)*x5
F3 = x6
F4 = x2
"""

EX4_4 = """\
# R^8 -> R^4
domain 8
codomain 4
F1 = x4
F2 = x3
F3 = (x5 - x8)/sqrt(2)
F4 = x6
"""

EX4_5 = """\
# R^12 -> R^5
domain 12
codomain 5
F1 = x2
F2 = (x5 + x6)/sqrt(2)
F3 = (x7 + x9)/sqrt(2)
F4 = (x8 + x10)/sqrt(2)
F5 = x1
"""

EX4_6 = """\
# R^10 -> R^6
domain 10
codomain 6
F1 = (x3 - x5)/sqrt(2)
F2 = x6
F3 = (x7 + x9)/sqrt(2)
F4 = x8
F5 = x1
F6 = x2
"""

EX4_7 = """\
# R^8 -> R^4
domain 8
codomain 4
param alpha
param beta
F1 = x1
F2 = x3*cos(alpha) - x5*sin(alpha)
F3 = x2
F4 = x4*sin(beta) + x6*cos(beta)
"""

TRIVIAL = """\
# coordinate projection R^4 -> R^2
domain 4
codomain 2
F1 = x1
F2 = x2
"""

RADIAL = """\
# distance from the origin, R^4 minus a ball -> R
domain 4
codomain 1
F1 = sqrt(x1*x1 + x2*x2 + x3*x3 + x4*x4)
"""

TWISTED = """\
# non-integrable horizontal planes (not a Riemannian submersion)
domain 4
codomain 2
F1 = x1
F2 = x3 + x1*x2
"""

ELLIPSOID = """\
# ellipsoidal level sets: fibres are not umbilical
domain 4
codomain 1
F1 = sqrt(x1*x1 + 2*x2*x2 + 3*x3*x3 + 4*x4*x4)
"""


def _radial_regular(x) -> bool:
    return float(np.linalg.norm(x)) > 0.1


def _radial_d2(params, point):
    return (np.asarray(point) / np.linalg.norm(point)).reshape(-1, 1)


def builtin_corpus() -> list[Fixture]:
    m6, m8, m10, m12 = (lambda *a: e(6, *a)), (lambda *a: e(8, *a)), (lambda *a: e(10, *a)), (lambda *a: e(12, *a))
    return [
        Fixture(
            "ex4_3", EX4_3, {"alpha": 0.7},
            Expected(
                theta=lambda p: math.acos(min(1.0, abs(math.cos(p["alpha"])))),
                d1=lambda p, x: span(m6((1, 1)), m6((2, 1))),
                d2=lambda p, x: span(m6((6, 1)), m6((3, math.sin(p["alpha"])), (5, -math.cos(p["alpha"])))),
                provenance={"theta": "stated: theta = alpha for alpha in (0, pi/2)",
                            "spans": "stated: D1 = <d1, d2>, D2 = <d6, sin a d3 - cos a d5>"}),
            "x3 sin(alpha) - x5 cos(alpha) mixes a vertical and a horizontal J-pair"),
        Fixture(
            "ex4_4", EX4_4, {},
            Expected(
                theta=lambda p: math.pi / 4,
                d1=lambda p, x: span(m8((3, 1)), m8((4, 1))),
                d2=lambda p, x: span(m8((6, 1)), m8((5, S2), (8, -S2))),
                provenance={"theta": "stated: theta = pi/4",
                            "spans": "stated: D1 = <d3, d4>, D2 = <d6, d5 - d8>"}),
            "constant linear submersion with slant angle pi/4"),
        Fixture(
            "ex4_5", EX4_5, {},
            Expected(
                theta=lambda p: math.pi / 2,
                d1=lambda p, x: span(m12((1, 1)), m12((2, 1)), m12((7, S2), (9, S2)), m12((8, S2), (10, S2))),
                d2=lambda p, x: span(m12((5, S2), (6, S2))),
                provenance={"theta": "stated: theta = pi/2",
                            "spans": "stated: D1 = <d1, d2, d7 + d9, d8 + d10>, D2 = <d5 + d6>"}),
            "semi-invariant case, odd codomain"),
        Fixture(
            "ex4_6", EX4_6, {},
            Expected(
                theta=lambda p: math.pi / 4,
                d1=lambda p, x: span(m10((1, 1)), m10((2, 1))),
                d2=lambda p, x: span(m10((6, 1)), m10((8, 1)), m10((3, S2), (5, -S2)), m10((7, S2), (9, S2))),
                provenance={"theta": "stated: theta = pi/4",
                            "spans": "stated: D1 = <d1, d2>, D2 = <d6, d8, d3 - d5, d7 + d9>"}),
            "four-dimensional slant distribution"),
        Fixture(
            "ex4_7", EX4_7, {"alpha": 0.9, "beta": 0.2},
            Expected(
                theta=lambda p: math.acos(min(1.0, abs(math.sin(p["alpha"] - p["beta"])))),
                d1=lambda p, x: span(e(8, (1, 1)), e(8, (2, 1))),
                d2=lambda p, x: span(e(8, (3, math.cos(p["alpha"])), (5, -math.sin(p["alpha"]))),
                                     e(8, (4, math.sin(p["beta"])), (6, math.cos(p["beta"])))),
                provenance={"theta": "stated: cos theta = |sin(alpha - beta)|",
                            "spans": "stated: D1 = <d1, d2>, D2 = <cos a d3 - sin a d5, sin b d4 + cos b d6>"}),
            "two-parameter family; alpha = beta gives theta = pi/2"),
        Fixture(
            "trivial_invariant", TRIVIAL, {},
            Expected(theta=lambda p: None,
                     d1=lambda p, x: span(e(4, (1, 1)), e(4, (2, 1))),
                     provenance={"verdict": "trivial: J d1 = d2 keeps the horizontal plane invariant"}),
            "horizontal space is the complex line <e1, e2>"),
        Fixture(
            "radial", RADIAL, {},
            Expected(theta=lambda p: math.pi / 2, has_d1=False, d2=_radial_d2,
                     failing=frozenset({"foliation-vertical", "totally-geodesic-map"}),
                     provenance={"theta": "derived: J x is orthogonal to x",
                                 "T": "derived: |T_X X| = 1/r on the sphere of radius r"}),
            "fibres are round 3-spheres; T is nonzero", regular=_radial_regular),
    ]


def synthetic_fixtures() -> list[Fixture]:
    """Reference maps used as negative controls; not part of the corpus."""
    return [
        Fixture("twisted", TWISTED, {},
                Expected(theta=lambda p: None, has_d1=False,
                         verdict_override=lambda p: ("not-classified", None),
                         provenance={"A": "derived: A_{e1} e3 = e2 at the origin"}),
                "horizontal distribution spanned by e1 and (x2, x1, 1, 0)"),
        Fixture("ellipsoid", ELLIPSOID, {},
                Expected(theta=lambda p: None, has_d1=False,
                         verdict_override=lambda p: ("not-classified", None),
                         provenance={"T": "derived: T = -Hess(F)/|grad F| along the unit normal"}),
                "level sets are ellipsoids", regular=_radial_regular),
    ]


def get_fixture(name: str) -> Fixture:
    for fx in builtin_corpus() + synthetic_fixtures():
        if fx.name == name:
            return fx
    raise KeyError(f"unknown fixture {name!r}")
