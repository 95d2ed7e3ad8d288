"""Frames, complex structures and the Kähler-angle decomposition of a horizontal space."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

TOL_RANK = 1e-8
TOL_CLUSTER = 1e-6


class RankDeficientError(ValueError):
    """The Jacobian does not have full row rank: not a submersion here."""


@dataclass(frozen=True)
class Frame:
    """k orthonormal columns in R^m (k may be 0)."""

    basis: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.basis, dtype=float)
        if b.ndim != 2:
            raise ValueError("frame basis must be a 2-D array (m x k)")
        gram = b.T @ b
        if b.shape[1] and np.max(np.abs(gram - np.eye(b.shape[1]))) > 1e-12:
            raise ValueError("frame columns are not orthonormal")
        object.__setattr__(self, "basis", b)

    @classmethod
    def empty(cls, m: int) -> "Frame":
        return cls(np.zeros((m, 0)))

    @classmethod
    def from_vectors(cls, vectors, tol: float = 1e-10) -> "Frame":
        """Orthonormal basis for the span of the given columns."""
        a = np.atleast_2d(np.asarray(vectors, dtype=float))
        if a.shape[1] == 0:
            return cls.empty(a.shape[0])
        u, s, _ = np.linalg.svd(a, full_matrices=False)
        r = int(np.sum(s > tol * max(1.0, s[0])))
        return cls(u[:, :r])

    @property
    def ambient_dim(self) -> int:
        return self.basis.shape[0]

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    def projector(self) -> np.ndarray:
        return self.basis @ self.basis.T


@dataclass(frozen=True)
class ComplexStructure:
    """Constant orthogonal J with J^2 = -I."""

    matrix: np.ndarray

    def __post_init__(self):
        j = np.asarray(self.matrix, dtype=float)
        m = j.shape[0]
        if j.shape != (m, m):
            raise ValueError("J must be square")
        if np.max(np.abs(j.T @ j - np.eye(m)), initial=0.0) > 1e-10:
            raise ValueError("J is not orthogonal")
        if np.max(np.abs(j @ j + np.eye(m)), initial=0.0) > 1e-10:
            raise ValueError("J does not square to -I")
        object.__setattr__(self, "matrix", j)

    @classmethod
    def standard(cls, m: int) -> "ComplexStructure":
        """J e_{2i-1} = e_{2i}, J e_{2i} = -e_{2i-1}."""
        if m % 2:
            raise ValueError(f"no complex structure on odd dimension {m}")
        j = np.zeros((m, m))
        for i in range(0, m, 2):
            j[i + 1, i] = 1.0
            j[i, i + 1] = -1.0
        return cls(j)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True)
class AngleSpectrum:
    """sigma_sq descending in [0, 1]; column i of ``frames`` is its eigenvector."""

    sigma_sq: np.ndarray
    sigma: np.ndarray
    frames: np.ndarray


@dataclass(frozen=True)
class Split:
    D1: Frame
    D2: Frame
    theta: float | None
    flags: tuple = field(default=())

    @property
    def multiple_angles(self) -> bool:
        return "multiple-angles" in self.flags


def _matrix_of(J) -> np.ndarray:
    return np.asarray(getattr(J, "matrix", J), dtype=float)


def _row_space_split(jac, tol_rank):
    jac = np.atleast_2d(np.asarray(jac, dtype=float))
    n, m = jac.shape
    _, s, vh = np.linalg.svd(jac, full_matrices=True)
    rank = int(np.sum(s > tol_rank * s[0])) if s.size and s[0] > 0 else 0
    if rank < n:
        raise RankDeficientError(f"Jacobian rank {rank} < {n}: not a submersion at this point")
    return vh[:rank].T, vh[rank:].T


def vertical_space(jac, tol_rank: float = TOL_RANK) -> Frame:
    """Orthonormal basis of ker(jac); tol_rank is relative to the largest singular value."""
    _, kernel = _row_space_split(jac, tol_rank)
    return Frame(kernel)


def horizontal_space(vertical: Frame) -> Frame:
    m, k = vertical.basis.shape
    if k == 0:
        return Frame(np.eye(m))
    u, _, _ = np.linalg.svd(vertical.basis, full_matrices=True)
    return Frame(u[:, k:])


def submersion_residual(jac, horizontal: Frame) -> float:
    """||(J H)^T (J H) - I||_F; zero iff the differential is isometric on horizontals."""
    jh = np.asarray(jac, dtype=float) @ horizontal.basis
    return float(np.linalg.norm(jh.T @ jh - np.eye(horizontal.dim)))


def kaehler_angle_spectrum(horizontal: Frame, J) -> AngleSpectrum:
    """Spectrum of -(H^T J H)^2 on the horizontal space.

    Computed from the singular values of the skew matrix M = H^T J H, which
    are the square roots of the eigenvalues of M^T M = -M^2 but are accurate
    to absolute round-off near zero.
    """
    h = horizontal.basis
    if h.shape[1] == 0:
        return AngleSpectrum(np.zeros(0), np.zeros(0), np.zeros((h.shape[0], 0)))
    mat = h.T @ _matrix_of(J) @ h
    _, s, vh = np.linalg.svd(mat)
    s = np.clip(s, 0.0, 1.0)
    return AngleSpectrum(s**2, s, h @ vh.T)


def split_D1_D2(spectrum: AngleSpectrum, tol_cluster: float = TOL_CLUSTER) -> Split:
    m = spectrum.frames.shape[0]
    in_d1 = np.abs(spectrum.sigma_sq - 1.0) <= tol_cluster
    d1 = Frame.from_vectors(spectrum.frames[:, in_d1]) if in_d1.any() else Frame.empty(m)
    rest = ~in_d1
    if not rest.any():
        return Split(d1, Frame.empty(m), None)
    d2 = Frame.from_vectors(spectrum.frames[:, rest])
    values = spectrum.sigma_sq[rest]
    if values.max() - values.min() > tol_cluster:
        return Split(d1, d2, None, ("multiple-angles",))
    theta = float(np.arccos(np.clip(np.mean(spectrum.sigma[rest]), 0.0, 1.0)))
    return Split(d1, d2, theta)


def principal_angles(a: Frame, b: Frame) -> np.ndarray:
    """Cosines of the principal angles, descending."""
    if a.dim == 0 or b.dim == 0:
        return np.zeros(0)
    s = np.linalg.svd(a.basis.T @ b.basis, compute_uv=False)
    return np.clip(s, 0.0, 1.0)


def same_subspace(a: Frame, b: Frame, tol: float = 1e-10) -> bool:
    if a.dim != b.dim:
        return False
    cos = principal_angles(a, b)
    return bool(cos.size == 0 or cos.min() >= 1.0 - tol)
