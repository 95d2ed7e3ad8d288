"""Pointwise matrices of P, Q, phi, omega, B, C, mu and J-hat, plus their identity checks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .subspace import (
    TOL_CLUSTER,
    TOL_RANK,
    Frame,
    Split,
    _matrix_of,
    horizontal_space,
    kaehler_angle_spectrum,
    principal_angles,
    split_D1_D2,
    vertical_space,
)

TOL_ORTHO = 1e-10


class StructureError(ValueError):
    pass


class JHatUndefined(StructureError):
    """J-hat needs 1/cos(theta), which does not exist at theta = pi/2."""


@dataclass(frozen=True)
class StructureOperators:
    J: np.ndarray
    vertical: Frame
    horizontal: Frame
    D1: Frame
    D2: Frame
    P: np.ndarray
    Q: np.ndarray
    phi: np.ndarray
    omega: np.ndarray
    B: np.ndarray
    C: np.ndarray
    mu: Frame
    B_D2: Frame
    theta: float | None

    @property
    def Pv(self) -> np.ndarray:
        return self.vertical.projector()

    @property
    def Ph(self) -> np.ndarray:
        return self.horizontal.projector()

    @property
    def m(self) -> int:
        return self.J.shape[0]


def _complement_within(sub: Frame, inside: Frame) -> Frame:
    """Orthonormal complement of ``sub`` inside the span of ``inside``."""
    m, k = inside.basis.shape
    if sub.dim == 0:
        return inside
    coords = inside.basis.T @ sub.basis  # k x d
    u, _, _ = np.linalg.svd(coords, full_matrices=True)
    return Frame(inside.basis @ u[:, sub.dim:]) if k > sub.dim else Frame.empty(m)


def structure_operators(vertical: Frame, D1: Frame, D2: Frame, J, theta=None,
                        tol: float = TOL_ORTHO) -> StructureOperators:
    j = _matrix_of(J)
    m = j.shape[0]
    blocks = [vertical.basis, D1.basis, D2.basis]
    stacked = np.hstack(blocks)
    if stacked.shape[1] != m:
        raise StructureError(
            f"vertical + D1 + D2 dimensions {stacked.shape[1]} != ambient {m}")
    if np.max(np.abs(stacked.T @ stacked - np.eye(m)), initial=0.0) > tol:
        raise StructureError("frames are not mutually orthogonal")
    horizontal = Frame(np.hstack([D1.basis, D2.basis]))
    pv = vertical.projector()
    ph = horizontal.projector()
    b = pv @ j @ ph
    b_d2 = Frame.from_vectors(b @ D2.basis)
    return StructureOperators(
        J=j, vertical=vertical, horizontal=horizontal, D1=D1, D2=D2,
        P=D1.projector(), Q=D2.projector(),
        phi=pv @ j @ pv, omega=ph @ j @ pv, B=b, C=ph @ j @ ph,
        mu=_complement_within(b_d2, vertical), B_D2=b_d2, theta=theta,
    )


def decompose(jac, J, tol_rank: float = TOL_RANK, tol_cluster: float = TOL_CLUSTER):
    """Jacobian -> (StructureOperators, AngleSpectrum, Split)."""
    vert = vertical_space(jac, tol_rank)
    hor = horizontal_space(vert)
    spectrum = kaehler_angle_spectrum(hor, J)
    split: Split = split_D1_D2(spectrum, tol_cluster)
    ops = structure_operators(vert, split.D1, split.D2, J, split.theta)
    return ops, spectrum, split


def _fro(a) -> float:
    return float(np.linalg.norm(a)) if np.size(a) else 0.0


def _onto_residual(image: np.ndarray, target: Frame) -> float:
    """Zero iff the columns of ``image`` span exactly ``target``."""
    inside = _fro(image - target.projector() @ image)
    if target.dim == 0:
        return inside
    s = np.linalg.svd(target.basis.T @ image, compute_uv=False) if image.shape[1] else np.zeros(0)
    rank_gap = target.dim - int(np.sum(s > 1e-8))
    return inside + float(max(rank_gap, 0))


def identity_residuals(ops: StructureOperators) -> dict:
    """Frobenius residual of each algebraic identity on the subspace where it is claimed."""
    m = ops.m
    eye = np.eye(m)
    V = ops.vertical.basis
    Hb = ops.horizontal.basis
    D1 = ops.D1.basis
    D2 = ops.D2.basis
    phi, omega, B, C = ops.phi, ops.omega, ops.B, ops.C

    res = {
        "phi2+B.omega=-id": _fro((phi @ phi + B @ omega + eye) @ V),
        "C2+omega.B=-id": _fro((C @ C + omega @ B + eye) @ Hb),
        "omega.phi+C.omega=0": _fro((omega @ phi + C @ omega) @ V),
        "B.C+phi.B=0": _fro((B @ C + phi @ B) @ Hb),
        "B.D1=0": _fro(B @ D1),
        "C.D2<D2": _fro((eye - ops.Q) @ C @ D2),
        "omega(ker)=D2": _onto_residual(omega @ V, ops.D2),
    }
    # C maps D1 onto itself isometrically
    cd1 = C @ D1
    if ops.D1.dim:
        s = np.linalg.svd(D1.T @ cd1, compute_uv=False)
        res["C.D1=D1"] = _fro((eye - ops.P) @ cd1) + float(np.max(np.abs(1.0 - s)))
    else:
        res["C.D1=D1"] = 0.0
    # ker = B.D2 (+) mu, with mu J-invariant
    mu = ops.mu
    overlap = principal_angles(mu, ops.B_D2)
    split_gap = abs(mu.dim + ops.B_D2.dim - ops.vertical.dim)
    inside = _fro((eye - ops.Pv) @ np.hstack([mu.basis, ops.B_D2.basis]))
    res["ker=B.D2+mu"] = float(overlap.max(initial=0.0)) + split_gap + inside
    res["J.mu=mu"] = _fro((eye - mu.projector()) @ ops.J @ mu.basis)
    return res


def omega_surjectivity(ops: StructureOperators) -> float:
    """Smallest singular value of omega(ker) seen inside D2 (0 means not onto)."""
    if ops.D2.dim == 0:
        return 1.0
    s = np.linalg.svd(ops.D2.basis.T @ ops.omega @ ops.vertical.basis, compute_uv=False)
    return float(s[ops.D2.dim - 1]) if s.size >= ops.D2.dim else 0.0


def c_square_residual(ops: StructureOperators) -> float:
    """||(C^2 + cos^2(theta) I) restricted to D2||_F."""
    if ops.D2.dim == 0:
        return 0.0
    if ops.theta is None:
        raise StructureError("slant angle absent: D2 carries several Kähler angles")
    c2 = np.cos(ops.theta) ** 2
    return _fro((ops.C @ ops.C + c2 * np.eye(ops.m)) @ ops.D2.basis)


def j_hat(ops: StructureOperators, tol_angle: float = 1e-8) -> np.ndarray:
    """J P + (1/cos theta) C Q on the horizontal space."""
    if ops.D2.dim == 0:
        return ops.J @ ops.P
    if ops.theta is None:
        raise StructureError("slant angle absent")
    if abs(ops.theta - np.pi / 2) <= tol_angle:
        raise JHatUndefined("J-hat undefined at theta = pi/2 (1/cos theta is singular)")
    return ops.J @ ops.P + (ops.C @ ops.Q) / np.cos(ops.theta)


def j_hat_residual(ops: StructureOperators, jh: np.ndarray | None = None) -> float:
    jh = j_hat(ops) if jh is None else jh
    return _fro((jh @ jh + np.eye(ops.m)) @ ops.horizontal.basis)


def slant_norm_residual(ops: StructureOperators) -> float:
    """max over D2 frame vectors of | |C X| - cos(theta) |."""
    if ops.D2.dim == 0 or ops.theta is None:
        return 0.0
    norms = np.linalg.norm(ops.C @ ops.D2.basis, axis=0)
    return float(np.max(np.abs(norms - np.cos(ops.theta))))
