"""Per-point analysis, global verdicts, and the residual checkers built on them."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from . import expr
from .oneill import (
    ProjectorField,
    ProjectorFieldError,
    basic_extension,
    curvature_checks,
    d1_extension,
    d2_extension,
    compatibility_residuals,
    mean_curvature,
    second_fundamental_form,
    tensor_A,
    tensor_T,
    umbilical_residual,
    vertical_extension,
)
from .structure import (
    StructureOperators,
    c_square_residual,
    decompose,
    identity_residuals,
    j_hat,
    j_hat_residual,
)
from .subspace import AngleSpectrum, ComplexStructure, RankDeficientError, Split, submersion_residual

VERDICTS = ("v-invariant", "v-slant", "v-semi-invariant", "v-semi-slant", "not-classified")


@dataclass(frozen=True)
class Tolerances:
    rank: float = 1e-8
    cluster: float = 1e-6
    angle: float = 1e-8
    submersion: float = 1e-10
    exact: float = 1e-10  # pure linear algebra
    fd: float = 1e-6  # one finite-difference derivative
    nested: float = 1e-4  # nested differences (curvature)
    containment: float = 1e-8


@dataclass(frozen=True)
class Sampler:
    strategy: str = "random"
    n: int = 100
    seed: int = 42
    low: float = -2.0
    high: float = 2.0
    max_tries: int = 100_000

    def points(self, m: int, regular: Callable | None = None) -> list[np.ndarray]:
        regular = regular or (lambda x: True)
        out: list[np.ndarray] = []
        if self.strategy == "random":
            rng = np.random.default_rng(self.seed)
            for _ in range(self.max_tries):
                if len(out) == self.n:
                    break
                x = rng.uniform(self.low, self.high, size=m)
                if regular(x):
                    out.append(x)
        elif self.strategy == "grid":
            k = max(2, math.ceil(self.n ** (1.0 / m)) + 1)
            axis = np.linspace(self.low, self.high, k)
            total = k**m
            stride = max(1, total // (4 * self.n))
            for idx, combo in enumerate(itertools.product(axis, repeat=m)):
                if len(out) == self.n:
                    break
                if idx % stride:
                    continue
                x = np.array(combo)
                if regular(x):
                    out.append(x)
        else:
            raise ValueError(f"unknown sampling strategy {self.strategy!r}")
        return out


@dataclass
class PointAnalysis:
    point: np.ndarray
    jacobian: np.ndarray | None = None
    ops: StructureOperators | None = None
    spectrum: AngleSpectrum | None = None
    split: Split | None = None
    theta: float | None = None
    submersion_residual: float | None = None
    residuals: dict = field(default_factory=dict)
    flags: tuple = ()

    @property
    def ok(self) -> bool:
        return self.ops is not None

    @property
    def dims(self) -> tuple:
        o = self.ops
        return (o.vertical.dim, o.D1.dim, o.D2.dim) if o else (None, None, None)


@dataclass
class CheckResult:
    name: str
    applicable: bool
    max_residual: float
    tolerance: float
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return (not self.applicable) or (self.max_residual <= self.tolerance
                                         and self.details.get("pass", True))


@dataclass
class ClassificationReport:
    verdict: str
    theta: float | None
    analyses: list
    checks: dict
    sampling: dict
    tolerances: Tolerances
    notes: list = field(default_factory=list)
    dims: dict = field(default_factory=dict)


def _J_matrix(J, m):
    if J is None:
        return ComplexStructure.standard(m).matrix
    return np.asarray(getattr(J, "matrix", J), dtype=float)


def analyze_point(fmap, J, params, point, tols: Tolerances = Tolerances()) -> PointAnalysis:
    point = np.asarray(point, dtype=float)
    out = PointAnalysis(point)
    jm = _J_matrix(J, fmap.domain_dim)
    try:
        jac = expr.jacobian(fmap, point, params)
    except expr.EvaluationError as exc:
        out.flags = ("evaluation-error", str(exc))
        return out
    out.jacobian = jac
    try:
        ops, spectrum, split = decompose(jac, jm, tols.rank, tols.cluster)
    except RankDeficientError:
        out.flags = ("rank-deficient",)
        return out
    out.ops, out.spectrum, out.split, out.theta = ops, spectrum, split, split.theta
    out.submersion_residual = submersion_residual(jac, ops.horizontal)
    flags = list(split.flags)
    if out.submersion_residual > tols.submersion:
        flags.append("not-riemannian")
    out.flags = tuple(flags)

    res = {"submersion": out.submersion_residual}
    res["operator-identities"] = max(identity_residuals(ops).values())
    if ops.D2.dim and ops.theta is not None:
        res["slant-operator"] = c_square_residual(ops)
    if ops.D2.dim == 0 or (ops.theta is not None and abs(ops.theta - np.pi / 2) > tols.angle):
        res["j-hat"] = j_hat_residual(ops, j_hat(ops, tols.angle))
    out.residuals = res
    return out


def verdict_for(theta, d1: int, d2: int, tol_angle: float = 1e-8) -> tuple[str, list]:
    """Label from the dimensions of D1, D2 and the common angle."""
    if d2 == 0:
        return "v-invariant", []
    if theta is None:
        return "not-classified", ["several Kähler angles on D2"]
    right = abs(theta - np.pi / 2) <= tol_angle
    if d1 == 0:
        return "v-slant", (["also v-semi-invariant (theta = pi/2)"] if right else [])
    if right:
        return "v-semi-invariant", []
    return "v-semi-slant", []


def classify(fmap, J=None, params=None, sampler: Sampler = Sampler(),
             tols: Tolerances = Tolerances(), regular: Callable | None = None,
             points: Iterable | None = None) -> ClassificationReport:
    params = dict(params or {})
    pts = list(points) if points is not None else sampler.points(fmap.domain_dim, regular)
    analyses = [analyze_point(fmap, J, params, p, tols) for p in pts]
    good = [a for a in analyses if a.ok]
    notes: list[str] = []
    sampling = {"strategy": sampler.strategy if points is None else "explicit",
                "n": len(pts), "seed": sampler.seed}
    checks = {}
    if not good:
        notes.append("no regular sample point: Jacobian rank-deficient or evaluation failed everywhere")
        return ClassificationReport("not-classified", None, analyses, checks, sampling, tols, notes)

    n_bad = len(analyses) - len(good)
    if n_bad:
        notes.append(f"{n_bad} sampled point(s) skipped (rank-deficient or evaluation error)")
    dims = {a.dims for a in good}
    thetas = [a.theta for a in good]
    v0, d1, d2 = good[0].dims
    dims_report = {"m": fmap.domain_dim, "n": fmap.codomain_dim, "vertical": v0, "D1": d1, "D2": d2}

    verdict, theta_global = None, None
    if any("not-riemannian" in a.flags for a in good):
        verdict = "not-classified"
        notes.append("not a Riemannian submersion at some sampled point")
    elif len(dims) > 1:
        verdict = "not-classified"
        notes.append("dimensions of D1/D2 vary across sampled points")
    elif d2 and any(t is None for t in thetas):
        verdict = "not-classified"
        notes.append("several Kähler angles on D2 at some sampled point")
    elif d2:
        theta_global = float(np.median(thetas))
        spread = max(abs(t - theta_global) for t in thetas)
        if spread > tols.angle:
            verdict = "not-classified"
            notes.append(f"slant angle not constant across points (spread {spread:.3e})")
            theta_global = None
    if verdict is None:
        verdict, extra = verdict_for(theta_global, d1, d2, tols.angle)
        notes.extend(extra)

    # even dimensions whenever theta < pi/2
    parity_bad = 0
    parity_applicable = False
    for a in good:
        if a.theta is not None and a.theta < np.pi / 2 - tols.angle:
            parity_applicable = True
            if fmap.codomain_dim % 2 or a.ops.D2.dim % 2:
                parity_bad += 1
    checks["parity"] = CheckResult("parity", parity_applicable, float(parity_bad), 0.0,
                                   {"codomain_dim": fmap.codomain_dim, "D2_dim": d2})
    if parity_bad:
        notes.append("even-dimension property violated: indicates a numerical defect")

    for name, tol in (("submersion", tols.submersion), ("operator-identities", tols.exact),
                      ("slant-operator", tols.exact), ("j-hat", tols.exact)):
        vals = [a.residuals[name] for a in good if name in a.residuals]
        details = {}
        if name == "j-hat" and any(a.ops.D2.dim and a.theta is not None
                                   and abs(a.theta - np.pi / 2) <= tols.angle for a in good):
            details["undefined"] = "theta = pi/2"
        checks[name] = CheckResult(name, bool(vals), max(vals, default=0.0), tol, details)
    return ClassificationReport(verdict, theta_global, analyses, checks, sampling, tols, notes,
                                dims_report)


# -- residual checkers -------------------------------------------------------


def _fro(vectors) -> float:
    return float(np.sqrt(sum(float(v @ v) for v in vectors)))


def _local_ops(fld: ProjectorField, q):
    """phi, omega, B, C at q from V(q) and J(q) (no spectral split needed)."""
    v = fld.V(q)
    h = np.eye(fld.m) - v
    j = fld.J_at(q)
    return v @ j @ v, h @ j @ v, v @ j @ h, h @ j @ h


def _op_field(fld, which, ytil):
    idx = {"phi": 0, "omega": 1, "B": 2, "C": 3}[which]
    return lambda q: _local_ops(fld, q)[idx] @ ytil(q)


def _pairs(basis):
    cols = list(basis.T)
    return [(x, y) for x in cols for y in cols]


def integrability_D1(analysis: PointAnalysis, fld: ProjectorField, tol: float = 1e-6) -> dict:
    """Conditions A_X Y = 0 and B(nabla_X Y - nabla_Y X) = 0 on D1, beside the direct test."""
    ops = analysis.ops
    if ops is None or ops.D1.dim < 2:
        return {"applicable": False}
    p = analysis.point
    D = lambda w, x: fld.derivative(w, p, x)
    a_terms, b_terms, direct = [], [], []
    for x, y in _pairs(ops.D1.basis):
        xt, yt = d1_extension(fld, x), d1_extension(fld, y)
        bracket = D(yt, x) - D(xt, y)
        a_terms.append(tensor_A(fld, p, x, y))
        b_terms.append(ops.B @ bracket)
        direct.append((np.eye(ops.m) - ops.P) @ bracket)
    a, b, d = _fro(a_terms), _fro(b_terms), _fro(direct)
    cond = max(a, b)
    return {"applicable": True, "A": a, "B_bracket": b, "A_only": a, "direct": d,
            "residual": cond, "consistent": (cond <= tol) == (d <= tol)}


def integrability_D2(analysis: PointAnalysis, fld: ProjectorField, tol: float = 1e-6) -> dict:
    ops = analysis.ops
    if ops is None or ops.D2.dim < 2:
        return {"applicable": False}
    p = analysis.point
    Hp = ops.Ph
    D = lambda w, x: fld.derivative(w, p, x)
    a_terms, pc_terms, kc_terms, direct = [], [], [], []
    for x, y in _pairs(ops.D2.basis):
        xt, yt = d2_extension(fld, x), d2_extension(fld, y)
        bracket = D(yt, x) - D(xt, y)
        a_terms.append(tensor_A(fld, p, x, y))
        pc_terms.append(ops.P @ ops.C @ bracket)
        kc = (tensor_A(fld, p, x, ops.B @ y) - tensor_A(fld, p, y, ops.B @ x)
                 + Hp @ (D(_op_field(fld, "C", yt), x) - D(_op_field(fld, "C", xt), y)))
        kc_terms.append(ops.P @ kc)
        direct.append((np.eye(ops.m) - ops.Q) @ bracket)
    a, pc, lem, d = _fro(a_terms), _fro(pc_terms), _fro(kc_terms), _fro(direct)
    cond = max(a, pc)
    return {"applicable": True, "A": a, "PC_bracket": pc, "kaehler_condition": lem,
            "direct": d, "residual": max(cond, lem),
            "consistent": (cond <= tol) == (d <= tol) == (max(a, lem) <= tol)}


def _vertical_pair_expression(fld, p, ops, x, y):
    """omega(hat-nabla_X phiY + T_X omegaY) + C(T_X phiY + H nabla_X omegaY)."""
    yt = vertical_extension(fld, y)
    Vp, Hp = ops.Pv, ops.Ph
    hat = Vp @ fld.derivative(_op_field(fld, "phi", yt), p, x)
    hnab = Hp @ fld.derivative(_op_field(fld, "omega", yt), p, x)
    return (ops.omega @ (hat + tensor_T(fld, p, x, ops.omega @ y))
            + ops.C @ (tensor_T(fld, p, x, ops.phi @ y) + hnab)), Hp @ fld.derivative(yt, p, x)


def _horizontal_pair_parts(fld, p, ops, x, ytil, y):
    """(V nabla_X BY + A_X CY, A_X BY + H nabla_X CY)."""
    Vp, Hp = ops.Pv, ops.Ph
    vb = Vp @ fld.derivative(_op_field(fld, "B", ytil), p, x)
    hc = Hp @ fld.derivative(_op_field(fld, "C", ytil), p, x)
    return (vb + tensor_A(fld, p, x, ops.C @ y), tensor_A(fld, p, x, ops.B @ y) + hc)


def foliation_checks(analysis: PointAnalysis, fld: ProjectorField) -> dict:
    """Totally-geodesic-foliation conditions for ker, its complement, D1 and D2."""
    ops = analysis.ops
    p = analysis.point
    eye = np.eye(ops.m)
    out = {}

    if ops.vertical.dim:
        cond, direct = [], []
        for x, y in _pairs(ops.vertical.basis):
            c, d = _vertical_pair_expression(fld, p, ops, x, y)
            cond.append(c)
            direct.append(d)
        out["vertical"] = {"applicable": True, "residual": _fro(cond), "direct": _fro(direct)}
    else:
        out["vertical"] = {"applicable": False}

    if ops.horizontal.dim:
        cond, direct = [], []
        for x, y in _pairs(ops.horizontal.basis):
            yt = basic_extension(fld, p, y)
            first, second = _horizontal_pair_parts(fld, p, ops, x, yt, y)
            cond.append(ops.phi @ first + ops.B @ second)
            direct.append(ops.Pv @ fld.derivative(yt, p, x))
        out["horizontal"] = {"applicable": True, "residual": _fro(cond), "direct": _fro(direct)}
    else:
        out["horizontal"] = {"applicable": False}

    if ops.D1.dim:
        c1, c2, direct = [], [], []
        for x, y in _pairs(ops.D1.basis):
            yt = d1_extension(fld, y)
            jy = ops.J @ y
            a = tensor_A(fld, p, x, jy)
            hn = ops.Ph @ fld.derivative(lambda q: fld.J_at(q) @ yt(q), p, x)
            c1.append(ops.phi @ a + ops.B @ hn)
            c2.append(ops.Q @ (ops.omega @ a + ops.C @ hn))
            direct.append((eye - ops.P) @ fld.derivative(yt, p, x))
        out["D1"] = {"applicable": True, "residual": max(_fro(c1), _fro(c2)),
                     "first": _fro(c1), "second": _fro(c2), "direct": _fro(direct)}
    else:
        out["D1"] = {"applicable": False}

    if ops.D2.dim:
        c1, c2, direct = [], [], []
        for x, y in _pairs(ops.D2.basis):
            yt = d2_extension(fld, y)
            first, second = _horizontal_pair_parts(fld, p, ops, x, yt, y)
            c1.append(ops.phi @ first + ops.B @ second)
            c2.append(ops.P @ (ops.omega @ first + ops.C @ second))
            direct.append((eye - ops.Q) @ fld.derivative(yt, p, x))
        out["D2"] = {"applicable": True, "residual": max(_fro(c1), _fro(c2)),
                     "first": _fro(c1), "second": _fro(c2), "direct": _fro(direct)}
    else:
        out["D2"] = {"applicable": False}
    return out


def totally_geodesic_point(analysis: PointAnalysis, fld: ProjectorField, tol: float = 1e-6) -> dict:
    """Both conditions for a totally geodesic map, and (nabla F_*) evaluated directly."""
    ops = analysis.ops
    p = analysis.point
    if ops.vertical.dim == 0:
        hh = _fro(second_fundamental_form(fld, p, x, y) for x, y in _pairs(ops.horizontal.basis))
        return {"applicable": True, "vertical_pairs": 0.0, "mixed_pairs": 0.0,
                "direct": hh, "horizontal_pairs": hh, "residual": hh,
                "equivalent": True}
    vv = []
    for x, y in _pairs(ops.vertical.basis):
        vv.append(_vertical_pair_expression(fld, p, ops, x, y)[0])
    mixed = []
    for x in ops.vertical.basis.T:
        for z in ops.horizontal.basis.T:
            zt = basic_extension(fld, p, z)
            hat = ops.Pv @ fld.derivative(_op_field(fld, "B", zt), p, x)
            hnab = ops.Ph @ fld.derivative(_op_field(fld, "C", zt), p, x)
            mixed.append(ops.omega @ (hat + tensor_T(fld, p, x, ops.C @ z))
                         + ops.C @ (tensor_T(fld, p, x, ops.B @ z) + hnab))
    sff = lambda x, y: second_fundamental_form(fld, p, x, y)
    direct_vv = _fro(sff(x, y) for x, y in _pairs(ops.vertical.basis))
    direct_mixed = _fro(sff(x, z) for x in ops.vertical.basis.T for z in ops.horizontal.basis.T)
    direct_hh = _fro(sff(x, y) for x, y in _pairs(ops.horizontal.basis))
    cond = max(_fro(vv), _fro(mixed))
    direct = max(direct_vv, direct_mixed, direct_hh)
    return {"applicable": True, "vertical_pairs": _fro(vv), "mixed_pairs": _fro(mixed),
            "direct_vertical": direct_vv, "direct_mixed": direct_mixed,
            "horizontal_pairs": direct_hh, "direct": direct,
            "residual": max(cond, direct), "equivalent": (cond <= tol) == (direct <= tol)}


def umbilical_point(analysis: PointAnalysis, fld: ProjectorField, tol: float = 1e-6,
                    tol_containment: float = 1e-8) -> dict:
    ops = analysis.ops
    p = analysis.point
    if ops.vertical.dim == 0:
        return {"applicable": False}
    resid = umbilical_residual(fld, p)
    hm = mean_curvature(fld, p)
    out = {"applicable": True, "residual": resid, "H_norm": float(np.linalg.norm(hm)),
           "umbilical": resid <= tol}
    if resid <= tol:
        perp = float(np.linalg.norm(hm - ops.Q @ hm))
        out["H_perp_D2"] = perp
        out["pass"] = perp <= tol_containment
        if ops.D2.dim == 0:
            out["minimal"] = out["H_norm"] <= tol
            out["pass"] = out["pass"] and out["minimal"]
    return out


def curvature_point(analysis: PointAnalysis, fld: ProjectorField) -> dict:
    out = {}
    for case in ("mu", "d2", "d1"):
        try:
            out[case] = curvature_checks(fld, analysis.point, case)
        except Exception as exc:  # reported in-band; a failed case is a finding
            out[case] = {"case": case, "applicable": True, "error": str(exc),
                         "imbalance": float("inf")}
    return out


def totally_geodesic_map_check(fmap, J, params, sampler: Sampler = Sampler(n=5),
                               regular=None, tols: Tolerances = Tolerances()) -> dict:
    recs = []
    for p in sampler.points(fmap.domain_dim, regular):
        a = analyze_point(fmap, J, params, p, tols)
        if a.ok:
            recs.append(totally_geodesic_point(a, ProjectorField(fmap, params, J), tols.fd))
    return _aggregate(recs)


def umbilical_fiber_report(fmap, J, params, sampler: Sampler = Sampler(n=5),
                           regular=None, tols: Tolerances = Tolerances()) -> dict:
    recs = []
    for p in sampler.points(fmap.domain_dim, regular):
        a = analyze_point(fmap, J, params, p, tols)
        if a.ok:
            recs.append(umbilical_point(a, ProjectorField(fmap, params, J), tols.fd,
                                        tols.containment))
    return _aggregate(recs)


def _aggregate(records: list) -> dict:
    live = [r for r in records if r.get("applicable")]
    if not live:
        return {"applicable": False, "points": len(records)}
    out = {"applicable": True, "points": len(records)}
    for key in live[0]:
        vals = [r[key] for r in live if key in r]
        if all(isinstance(v, bool) for v in vals):
            out[key] = all(vals)
        elif all(isinstance(v, (int, float)) for v in vals):
            out[key] = float(max(vals))
    return out


# -- the full per-point battery used by the CLI -------------------------------

ONEILL_CHECKS = ("kaehler-compat", "integrability-d1", "integrability-d2",
                 "foliation-vertical", "foliation-horizontal", "foliation-d1",
                 "foliation-d2", "totally-geodesic-map", "umbilical", "curvature")
BASIC_CHECKS = ("submersion", "operator-identities", "slant-operator", "j-hat", "parity")
ALL_CHECKS = BASIC_CHECKS + ONEILL_CHECKS


def oneill_battery(analysis: PointAnalysis, fld: ProjectorField, tols: Tolerances,
                   wanted: Iterable[str] = ONEILL_CHECKS) -> dict:
    """Per-point records {check name -> dict with applicable/residual/...}."""
    wanted = set(wanted)
    rec = {}
    try:
        if "kaehler-compat" in wanted:
            six = compatibility_residuals(fld, analysis.point)
            rec["kaehler-compat"] = {"applicable": True, "residual": max(six.values()), **six}
        if "integrability-d1" in wanted:
            rec["integrability-d1"] = integrability_D1(analysis, fld, tols.fd)
        if "integrability-d2" in wanted:
            rec["integrability-d2"] = integrability_D2(analysis, fld, tols.fd)
        if wanted & {"foliation-vertical", "foliation-horizontal", "foliation-d1", "foliation-d2"}:
            fol = foliation_checks(analysis, fld)
            for key, name in (("vertical", "foliation-vertical"), ("horizontal", "foliation-horizontal"),
                              ("D1", "foliation-d1"), ("D2", "foliation-d2")):
                if name in wanted:
                    rec[name] = fol[key]
        if "totally-geodesic-map" in wanted:
            rec["totally-geodesic-map"] = totally_geodesic_point(analysis, fld, tols.fd)
        if "umbilical" in wanted:
            rec["umbilical"] = umbilical_point(analysis, fld, tols.fd, tols.containment)
        if "curvature" in wanted:
            cases = curvature_point(analysis, fld)
            live = [c for c in cases.values() if c.get("applicable")]
            rec["curvature"] = {"applicable": bool(live),
                                "residual": max((c["imbalance"] for c in live), default=0.0),
                                **{f"{k}_imbalance": c["imbalance"] for k, c in cases.items()
                                   if c.get("applicable")},
                                **{f"{k}_applicable": bool(c.get("applicable")) for k, c in cases.items()}}
            if "mu" in cases and cases["mu"].get("applicable") and "TXJX_sq" in cases["mu"]:
                c = cases["mu"]
                rec["curvature"]["mu_imbalance_plus_sign"] = abs(c["rhs"] + 2 * c["TXJX_sq"])
    except ProjectorFieldError as exc:
        for name in wanted - set(rec):
            rec[name] = {"applicable": True, "residual": float("inf"), "error": str(exc)}
    return rec


def check_tolerance(name: str, tols: Tolerances) -> float:
    if name == "curvature":
        return tols.nested
    if name in ONEILL_CHECKS:
        return tols.fd
    return {"submersion": tols.submersion, "parity": 0.0}.get(name, tols.exact)


def merge_point_checks(name: str, records: list, tol: float) -> CheckResult:
    live = [r for r in records if r.get("applicable")]
    if not live:
        return CheckResult(name, False, 0.0, tol)
    details = {}
    for key in ("consistent", "equivalent", "pass"):
        vals = [r[key] for r in live if key in r]
        if vals:
            details[key if key != "pass" else "hypothesis_consequence"] = all(vals)
    for key in live[0]:
        vals = [r[key] for r in live if key in r]
        if key not in ("applicable", "residual") and all(
                isinstance(v, (int, float)) and not isinstance(v, bool) for v in vals):
            details[key] = float(max(vals))
    if "hypothesis_consequence" in details:
        details["pass"] = details["hypothesis_consequence"]
    return CheckResult(name, True, float(max(r["residual"] for r in live)), tol, details)
