"""O'Neill tensors T and A, the fibre connection, and derived checks on flat R^m.

The ambient connection is the coordinate derivative, so every covariant
derivative here is a directional derivative of a vector field q -> R^m.
Those are taken by central differences with one Richardson step; the
projector fields V(q), H(q) come from the Jacobian at q.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import expr
from .structure import StructureOperators, decompose
from .subspace import TOL_CLUSTER, TOL_RANK, ComplexStructure, Frame, RankDeficientError, vertical_space


class ProjectorFieldError(ValueError):
    """Raised when the vertical projector is not smooth across a difference stencil."""


@dataclass
class _Local:
    jac: np.ndarray
    vertical: Frame
    V: np.ndarray
    H: np.ndarray


@dataclass
class ProjectorField:
    """V(q), H(q) and the structure operators of ``fmap`` at any regular point q.

    ``J`` may be a ComplexStructure, a matrix, or a callable q -> matrix (the
    last only for probes of a non-parallel complex structure).
    """

    fmap: expr.MapDefinition
    params: dict = field(default_factory=dict)
    J: object = None
    tol_rank: float = TOL_RANK
    tol_cluster: float = TOL_CLUSTER
    step: float | None = None
    _local: dict = field(default_factory=dict, repr=False)
    _ops: dict = field(default_factory=dict, repr=False)
    _dv: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.J is None:
            self.J = ComplexStructure.standard(self.fmap.domain_dim)
        self.params = dict(self.params or {})

    @property
    def m(self) -> int:
        return self.fmap.domain_dim

    def J_at(self, q) -> np.ndarray:
        if callable(self.J):
            return np.asarray(self.J(np.asarray(q, dtype=float)), dtype=float)
        return np.asarray(getattr(self.J, "matrix", self.J), dtype=float)

    @property
    def parallel_J(self) -> bool:
        return not callable(self.J)

    def local(self, q) -> _Local:
        q = np.asarray(q, dtype=float)
        key = q.tobytes()
        loc = self._local.get(key)
        if loc is None:
            jac = expr.jacobian(self.fmap, q, self.params)
            vert = vertical_space(jac, self.tol_rank)
            v = vert.projector()
            loc = _Local(jac, vert, v, np.eye(self.m) - v)
            self._local[key] = loc
        return loc

    def V(self, q) -> np.ndarray:
        return self.local(q).V

    def H(self, q) -> np.ndarray:
        return self.local(q).H

    def jac(self, q) -> np.ndarray:
        return self.local(q).jac

    def ops(self, q) -> StructureOperators:
        q = np.asarray(q, dtype=float)
        key = q.tobytes()
        o = self._ops.get(key)
        if o is None:
            o, _, _ = decompose(self.jac(q), self.J_at(q), self.tol_rank, self.tol_cluster)
            self._ops[key] = o
        return o

    def h(self, p) -> float:
        if self.step is not None:
            return self.step
        return 1e-4 * max(1.0, float(np.linalg.norm(p)))

    def derivative(self, fn: Callable, p, u, h: float | None = None):
        """Directional derivative of ``fn`` at p along u: central difference + one Richardson step."""
        p = np.asarray(p, dtype=float)
        u = np.asarray(u, dtype=float)
        h = self.h(p) if h is None else h

        def central(s):
            return (np.asarray(fn(p + s * u)) - np.asarray(fn(p - s * u))) / (2.0 * s)

        return (4.0 * central(h / 2.0) - central(h)) / 3.0


def projector_derivative(fld: ProjectorField, point, direction, h: float | None = None) -> np.ndarray:
    """D_u V at the point (m x m)."""
    point = np.asarray(point, dtype=float)
    direction = np.asarray(direction, dtype=float)
    key = (point.tobytes(), direction.tobytes(), h)
    cached = fld._dv.get(key)
    if cached is not None:
        return cached
    step = fld.h(point) if h is None else h
    k = fld.local(point).vertical.dim
    for s in (step, step / 2.0):
        for sign in (1.0, -1.0):
            try:
                kq = fld.local(point + sign * s * direction).vertical.dim
            except (RankDeficientError, expr.EvaluationError) as exc:
                raise ProjectorFieldError(f"projector field not smooth here: {exc}") from None
            if kq != k:
                raise ProjectorFieldError("projector field not smooth here: fibre dimension changes")
    if not np.any(direction):
        dv = np.zeros((fld.m, fld.m))
    else:
        dv = fld.derivative(fld.V, point, direction, step)
    fld._dv[key] = dv
    return dv


def tensor_T(fld: ProjectorField, point, E, F) -> np.ndarray:
    """T_E F = H D_{VE}(V F) + V D_{VE}(H F) with F extended as a constant."""
    loc = fld.local(point)
    e = loc.V @ np.asarray(E, dtype=float)
    dv = projector_derivative(fld, point, e)
    return (loc.H - loc.V) @ (dv @ np.asarray(F, dtype=float))


def tensor_A(fld: ProjectorField, point, E, F) -> np.ndarray:
    """A_E F = H D_{HE}(V F) + V D_{HE}(H F) with F extended as a constant."""
    loc = fld.local(point)
    e = loc.H @ np.asarray(E, dtype=float)
    dv = projector_derivative(fld, point, e)
    return (loc.H - loc.V) @ (dv @ np.asarray(F, dtype=float))


# -- vector-field extensions -------------------------------------------------


def vertical_extension(fld: ProjectorField, y) -> Callable:
    y = np.asarray(y, dtype=float)
    return lambda q: fld.V(q) @ y


def basic_extension(fld: ProjectorField, point, z) -> Callable:
    """Horizontal lift of the constant target vector F_*(z); F-related to a constant field."""
    w = fld.jac(point) @ np.asarray(z, dtype=float)
    return lambda q: np.linalg.pinv(fld.jac(q)) @ w


def d1_extension(fld: ProjectorField, y) -> Callable:
    y = np.asarray(y, dtype=float)
    return lambda q: fld.ops(q).P @ y


def d2_extension(fld: ProjectorField, y) -> Callable:
    y = np.asarray(y, dtype=float)
    return lambda q: fld.ops(q).Q @ y


def mu_extension(fld: ProjectorField, y) -> Callable:
    y = np.asarray(y, dtype=float)
    return lambda q: fld.ops(q).mu.projector() @ y


def _as_field(fld, point, y, kind="vertical"):
    if callable(y):
        return y
    if kind == "vertical":
        return vertical_extension(fld, y)
    return basic_extension(fld, point, y)


def hat_nabla(fld: ProjectorField, point, X, Y) -> np.ndarray:
    """V D_X Y~ where Y~ is a vertical field (a vector means q -> V(q) y)."""
    ytil = _as_field(fld, point, Y)
    return fld.V(point) @ fld.derivative(ytil, point, X)


def tensor_T_projected(fld: ProjectorField, point, E, F) -> np.ndarray:
    """T computed from non-constant extensions; agrees with tensor_T by tensoriality."""
    loc = fld.local(point)
    F = np.asarray(F, dtype=float)
    ftil = _split_extension(fld, point, F)
    e = loc.V @ np.asarray(E, dtype=float)
    return (loc.H @ fld.derivative(lambda q: fld.V(q) @ ftil(q), point, e)
            + loc.V @ fld.derivative(lambda q: fld.H(q) @ ftil(q), point, e))


def tensor_A_projected(fld: ProjectorField, point, E, F) -> np.ndarray:
    loc = fld.local(point)
    F = np.asarray(F, dtype=float)
    ftil = _split_extension(fld, point, F)
    e = loc.H @ np.asarray(E, dtype=float)
    return (loc.H @ fld.derivative(lambda q: fld.V(q) @ ftil(q), point, e)
            + loc.V @ fld.derivative(lambda q: fld.H(q) @ ftil(q), point, e))


def _split_extension(fld, point, F):
    loc = fld.local(point)
    vpart = vertical_extension(fld, loc.V @ F)
    hpart = basic_extension(fld, point, loc.H @ F)
    return lambda q: vpart(q) + hpart(q)


# -- second fundamental form and fibre geometry -------------------------------


def second_fundamental_form(fld: ProjectorField, point, X, Y) -> np.ndarray:
    """(nabla F_*)(X, Y) = D_X[F_*(Y~)] - F_*(D_X Y~); Y~ constant unless a callable is given."""
    if callable(Y):
        first = fld.derivative(lambda q: fld.jac(q) @ Y(q), point, X)
        return first - fld.jac(point) @ fld.derivative(Y, point, X)
    Y = np.asarray(Y, dtype=float)
    return fld.derivative(lambda q: fld.jac(q) @ Y, point, X)


def mean_curvature(fld: ProjectorField, point, frame: np.ndarray | None = None) -> np.ndarray:
    vert = fld.local(point).vertical
    if vert.dim == 0:
        raise ValueError("mean curvature undefined: zero-dimensional fibre")
    basis = vert.basis if frame is None else np.asarray(frame, dtype=float)
    total = sum(tensor_T(fld, point, basis[:, i], basis[:, i]) for i in range(basis.shape[1]))
    return total / basis.shape[1]


def umbilical_residual(fld: ProjectorField, point) -> float:
    """sqrt(sum_ij |T_{e_i} e_j - delta_ij H|^2) over an orthonormal vertical frame."""
    basis = fld.local(point).vertical.basis
    if basis.shape[1] == 0:
        raise ValueError("umbilicity undefined: zero-dimensional fibre")
    hm = mean_curvature(fld, point)
    total = 0.0
    for i in range(basis.shape[1]):
        for j in range(basis.shape[1]):
            d = tensor_T(fld, point, basis[:, i], basis[:, j]) - (hm if i == j else 0.0)
            total += float(d @ d)
    return float(np.sqrt(total))


@dataclass(frozen=True)
class ONeillData:
    point: np.ndarray
    frame: np.ndarray
    T: np.ndarray  # T[i, j] = T_{e_i} e_j
    A: np.ndarray
    H_mean: np.ndarray | None


def oneill_data(fld: ProjectorField, point) -> ONeillData:
    """T and A tabulated on the frame (vertical columns first, then horizontal)."""
    loc = fld.local(point)
    hor = np.eye(fld.m) - loc.V
    u, _, _ = np.linalg.svd(hor)
    basis = np.hstack([loc.vertical.basis, u[:, : fld.m - loc.vertical.dim]])
    m = fld.m
    T = np.zeros((m, m, m))
    A = np.zeros((m, m, m))
    for i in range(m):
        for j in range(m):
            T[i, j] = tensor_T(fld, point, basis[:, i], basis[:, j])
            A[i, j] = tensor_A(fld, point, basis[:, i], basis[:, j])
    hm = mean_curvature(fld, point) if loc.vertical.dim else None
    return ONeillData(np.asarray(point, dtype=float), basis, T, A, hm)


# -- the six Kähler compatibility equations ----------------------------------


def _norm_sum(pairs):
    return float(np.sqrt(sum(float(d @ d) for d in pairs)))


def compatibility_residuals(fld: ProjectorField, point) -> dict:
    """Residuals of the six equations obtained by splitting nabla(J Y) = J nabla Y.

    Each is sqrt(sum |LHS - RHS|^2) over orthonormal frame pairs from the
    relevant spaces; fields are extended vertically (q -> V(q) y) or as
    basic horizontal lifts.
    """
    p = np.asarray(point, dtype=float)
    loc = fld.local(p)
    Vp, Hp = loc.V, loc.H
    Jp = fld.J_at(p)
    phi, omega, B, C = Vp @ Jp @ Vp, Hp @ Jp @ Vp, Vp @ Jp @ Hp, Hp @ Jp @ Hp
    vert = loc.vertical.basis
    u, _, _ = np.linalg.svd(Hp)
    hor = u[:, : fld.m - vert.shape[1]]

    def phi_f(q):
        v = fld.V(q)
        return v @ fld.J_at(q) @ v

    def omega_f(q):
        v = fld.V(q)
        return (np.eye(fld.m) - v) @ fld.J_at(q) @ v

    def b_f(q):
        v = fld.V(q)
        return v @ fld.J_at(q) @ (np.eye(fld.m) - v)

    def c_f(q):
        h = fld.H(q)
        return h @ fld.J_at(q) @ h

    T = lambda e, f: tensor_T(fld, p, e, f)
    A = lambda e, f: tensor_A(fld, p, e, f)
    D = lambda w, x: fld.derivative(w, p, x)

    r = {k: [] for k in ("vv-vertical", "vv-horizontal", "hh-vertical",
                         "hh-horizontal", "vh-vertical", "vh-horizontal")}
    for x in vert.T:
        for y in vert.T:
            yt = vertical_extension(fld, y)
            nab_y = Vp @ D(yt, x)
            t_xy = T(x, y)
            r["vv-vertical"].append(Vp @ D(lambda q: phi_f(q) @ yt(q), x) + T(x, omega @ y)
                                    - phi @ nab_y - B @ t_xy)
            r["vv-horizontal"].append(T(x, phi @ y) + Hp @ D(lambda q: omega_f(q) @ yt(q), x)
                                      - omega @ nab_y - C @ t_xy)
    for z in hor.T:
        for w in hor.T:
            wt = basic_extension(fld, p, w)
            h_nab = Hp @ D(wt, z)
            a_zw = A(z, w)
            r["hh-vertical"].append(Vp @ D(lambda q: b_f(q) @ wt(q), z) + A(z, C @ w)
                                    - phi @ a_zw - B @ h_nab)
            r["hh-horizontal"].append(A(z, B @ w) + Hp @ D(lambda q: c_f(q) @ wt(q), z)
                                      - omega @ a_zw - C @ h_nab)
    for x in vert.T:
        for z in hor.T:
            zt = basic_extension(fld, p, z)
            h_nab = Hp @ D(zt, x)
            t_xz = T(x, z)
            r["vh-vertical"].append(Vp @ D(lambda q: b_f(q) @ zt(q), x) + T(x, C @ z)
                                    - phi @ t_xz - B @ h_nab)
            r["vh-horizontal"].append(T(x, B @ z) + Hp @ D(lambda q: c_f(q) @ zt(q), x)
                                      - omega @ t_xz - C @ h_nab)
    return {k: _norm_sum(v) for k, v in r.items()}


# -- holomorphic sectional curvature balances --------------------------------


class PlaneError(ValueError):
    pass


def _unit(v):
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if n == 0:
        raise PlaneError("zero vector does not span a plane")
    return v / n


def curvature_checks(fld: ProjectorField, point, plane: str, x0=None, tol: float = 1e-8) -> dict:
    """Balance of one of the three holomorphic-sectional-curvature formulas.

    ``plane`` is "mu" (P in mu), "d2" (P = <X, JX>, X in D2) or "d1" (P in D1).
    The ambient and target are flat, so K(P) = K(X^BX) = K(X^CX) = K_*(P) = 0.
    Returns the terms, the imbalance |LHS - RHS|, and ``applicable``.
    """
    p = np.asarray(point, dtype=float)
    ops = fld.ops(p)
    J = fld.J_at(p)
    sub = {"mu": ops.mu, "d2": ops.D2, "d1": ops.D1}[plane]
    if sub.dim == 0 or (plane in ("mu", "d1") and sub.dim < 2):
        return {"case": plane, "applicable": False, "imbalance": 0.0}
    x = _unit(sub.basis[:, 0] if x0 is None else x0)
    if np.linalg.norm(x - sub.projector() @ x) > tol:
        raise PlaneError(f"vector does not lie in {plane}")
    jx = J @ x
    T = lambda e, f: tensor_T(fld, p, e, f)
    A = lambda e, f: tensor_A(fld, p, e, f)

    if plane == "mu":
        if np.linalg.norm(jx - ops.mu.projector() @ jx) > tol:
            raise PlaneError("plane is not J-invariant inside mu")
        xt = mu_extension(fld, x)
        bracket = fld.derivative(xt, p, jx) - fld.derivative(lambda q: fld.J_at(q) @ xt(q), p, x)
        txx, txjx, tjj = T(x, x), T(x, jx), T(jx, jx)
        k_hat = float(txx @ tjj - txjx @ txjx)
        bracket_term = float(txx @ (J @ bracket))
        rhs = k_hat + float(txx @ txx) - float(txjx @ txjx) - bracket_term
        return {"case": plane, "applicable": True, "K": 0.0, "K_hat": k_hat,
                "TXX_sq": float(txx @ txx), "TXJX_sq": float(txjx @ txjx),
                "bracket_term": bracket_term, "rhs": rhs, "imbalance": abs(rhs)}

    if plane == "d2":
        if ops.theta is None:
            raise PlaneError("slant angle absent on D2")
        bx, cx = ops.B @ x, ops.C @ x
        span = np.hstack([ops.D2.basis, ops.B_D2.basis])
        if np.linalg.norm(jx - span @ (span.T @ jx)) > tol:
            raise PlaneError("plane <X, JX> is not inside D2 + B D2")
        nabla_a = fld.derivative(lambda q: tensor_A(fld, q, x, cx), p, x)
        cross = (float(nabla_a @ bx) + float(A(x, cx) @ T(bx, x))
                 - float(A(cx, x) @ T(bx, x)) - float(A(x, x) @ T(bx, cx)))
        s2, c2 = np.sin(ops.theta) ** 2, np.cos(ops.theta) ** 2
        k_xbx = k_xcx = 0.0  # flat ambient
        rhs = float(s2 * k_xbx + 2.0 * cross + c2 * k_xcx)
        return {"case": plane, "applicable": True, "K": 0.0, "cross_term": cross,
                "sin2": float(s2), "cos2": float(c2), "rhs": rhs, "imbalance": abs(rhs)}

    xt = d1_extension(fld, x)
    vjnab = fld.V(p) @ J @ fld.derivative(xt, p, x)
    rhs = 0.0 - 3.0 * float(vjnab @ vjnab)
    a_xjx = A(x, jx)
    return {"case": plane, "applicable": True, "K": 0.0, "K_star": 0.0,
            "VJnabla_sq": float(vjnab @ vjnab), "A_XJX_sq": float(a_xjx @ a_xjx),
            "rhs": rhs, "imbalance": abs(rhs)}
