"""Dense symmetric-matrix kernel.

Spectral decompositions (cyclic Jacobi), eigenvalue-1 eigenspaces, signed
splitting of quadratic forms, and the determinant-ratio functional used by
the Gaussian correlation experiments.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._kernels import jacobi_eigh
from .errors import ConstraintViolation, InvalidMatrix, InvalidTolerance, SingularForm

__all__ = [
    "SymMatrix",
    "SpectralDecomposition",
    "Subspace",
    "SignedSplit",
    "spectral_decompose",
    "eig1_space",
    "split_signed",
    "det_ratio",
    "equality_structure_check",
]


class SymMatrix:
    """Real symmetric matrix with single-triangle canonical storage.

    Only the upper triangle is kept; the full array is materialized on
    demand, so entries(i, j) == entries(j, i) holds exactly by construction.
    Values are immutable after construction.
    """

    __slots__ = ("n", "_a")

    def __init__(self, entries):
        a = np.asarray(entries, dtype=np.float64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise InvalidMatrix(f"expected a square matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise InvalidMatrix("matrix has non-finite entries")
        # canonicalize through the upper triangle
        upper = np.triu(a)
        full = upper + upper.T - np.diag(np.diag(a))
        full.setflags(write=False)
        object.__setattr__(self, "n", a.shape[0])
        object.__setattr__(self, "_a", full)

    def __setattr__(self, name, value):
        raise AttributeError("SymMatrix is immutable")

    @property
    def array(self) -> np.ndarray:
        return self._a

    @classmethod
    def identity(cls, n: int) -> "SymMatrix":
        return cls(np.eye(n))

    @classmethod
    def diagonal(cls, diag) -> "SymMatrix":
        return cls(np.diag(np.asarray(diag, dtype=np.float64)))

    @classmethod
    def from_symmetrized(cls, a) -> "SymMatrix":
        """Build from an arbitrary square array via (a + a.T)/2."""
        a = np.asarray(a, dtype=np.float64)
        return cls(0.5 * (a + a.T))

    def __getitem__(self, idx):
        return self._a[idx]

    def __repr__(self):
        return f"SymMatrix(n={self.n})"

    def __eq__(self, other):
        return isinstance(other, SymMatrix) and np.array_equal(self._a, other._a)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self._a))) if self.n else 0.0

    def to_json(self) -> dict:
        return {"n": self.n, "entries": self._a.tolist()}

    @classmethod
    def from_json(cls, obj) -> "SymMatrix":
        a = np.asarray(obj["entries"], dtype=np.float64)
        if a.shape != (obj["n"], obj["n"]):
            raise InvalidMatrix("entries shape disagrees with declared n")
        return cls.from_symmetrized(a)


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenvalues sorted descending with matching orthonormal eigenvectors."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns


@dataclass(frozen=True)
class Subspace:
    """Subspace of R^ambient_dim given by an orthonormal column basis."""

    ambient_dim: int
    basis: np.ndarray = field(default=None)

    def __post_init__(self):
        b = self.basis
        if b is None:
            b = np.zeros((self.ambient_dim, 0))
        b = np.asarray(b, dtype=np.float64)
        if b.ndim == 1:
            b = b[:, None]
        if b.shape[0] != self.ambient_dim:
            raise InvalidMatrix("basis rows must match ambient dimension")
        object.__setattr__(self, "basis", b)

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @classmethod
    def zero(cls, ambient_dim: int) -> "Subspace":
        return cls(ambient_dim, np.zeros((ambient_dim, 0)))

    @classmethod
    def full(cls, ambient_dim: int) -> "Subspace":
        return cls(ambient_dim, np.eye(ambient_dim))

    def complement(self) -> "Subspace":
        """Orthogonal complement."""
        n, k = self.ambient_dim, self.dim
        if k == 0:
            return Subspace.full(n)
        if k == n:
            return Subspace.zero(n)
        # complete the basis via QR of [basis | I]
        q, _ = np.linalg.qr(np.hstack([self.basis, np.eye(n)]))
        return Subspace(n, q[:, k:n])

    def project(self, x: np.ndarray) -> np.ndarray:
        return self.basis @ (self.basis.T @ x)

    def contains_subspace(self, other: "Subspace", tol: float) -> bool:
        """True iff span(other) lies within this span up to principal angle.

        Containment is certified when the smallest singular value of
        basis^T other.basis is at least 1 - tol.
        """
        if other.dim == 0:
            return True
        if self.dim < other.dim:
            return False
        s = np.linalg.svd(self.basis.T @ other.basis, compute_uv=False)
        return bool(s.min() >= 1.0 - tol)

    def angle_to(self, other: "Subspace") -> float:
        """Largest principal angle (radians) between equal-dim subspaces."""
        if self.dim != other.dim:
            return float(np.pi / 2)
        if self.dim == 0:
            return 0.0
        s = np.linalg.svd(self.basis.T @ other.basis, compute_uv=False)
        return float(np.arccos(np.clip(s.min(), -1.0, 1.0)))

    def to_json(self) -> dict:
        return {"ambient_dim": self.ambient_dim, "basis": self.basis.tolist()}

    @classmethod
    def from_json(cls, obj) -> "Subspace":
        basis = np.asarray(obj["basis"], dtype=np.float64)
        if basis.size == 0:
            basis = np.zeros((obj["ambient_dim"], 0))
        return cls(obj["ambient_dim"], basis)


@dataclass(frozen=True)
class SignedSplit:
    """Decomposition Q = q_plus - q_minus with the signed eigenspaces."""

    q_plus: SymMatrix
    q_minus: SymMatrix
    e_plus: Subspace
    e_zero: Subspace
    e_minus: Subspace


def spectral_decompose(m: SymMatrix) -> SpectralDecomposition:
    """Full eigendecomposition via cyclic Jacobi rotations.

    Deterministic given m; eigenvectors within a degenerate cluster are only
    span-meaningful, never individually.
    """
    w, v = jacobi_eigh(m.array)
    return SpectralDecomposition(eigenvalues=w, eigenvectors=v)


def eig1_space(m: SymMatrix, tol: float) -> Subspace:
    """Span of eigenvectors whose eigenvalue lies within tol of 1."""
    if not tol > 0:
        raise InvalidTolerance(f"tol must be positive, got {tol}")
    dec = spectral_decompose(m)
    mask = np.abs(dec.eigenvalues - 1.0) <= tol
    if not mask.any():
        return Subspace.zero(m.n)
    basis, _ = np.linalg.qr(dec.eigenvectors[:, mask])
    return Subspace(m.n, basis)


def split_signed(q: SymMatrix) -> SignedSplit:
    """Split a quadratic form into PSD positive and negative parts.

    Eigenvalues within 1e-10 * max(1, ||Q||_max) of zero are assigned to the
    zero eigenspace.
    """
    dec = spectral_decompose(q)
    w, v = dec.eigenvalues, dec.eigenvectors
    zero_band = 1e-10 * max(1.0, q.max_abs())
    pos = w > zero_band
    neg = w < -zero_band
    zer = ~(pos | neg)
    n = q.n

    def _part(mask, vals):
        if not mask.any():
            return SymMatrix(np.zeros((n, n)))
        vm = v[:, mask]
        return SymMatrix.from_symmetrized(vm @ np.diag(vals[mask]) @ vm.T)

    def _space(mask):
        if not mask.any():
            return Subspace.zero(n)
        basis, _ = np.linalg.qr(v[:, mask])
        return Subspace(n, basis)

    return SignedSplit(
        q_plus=_part(pos, w),
        q_minus=_part(neg, -w),
        e_plus=_space(pos),
        e_zero=_space(zer),
        e_minus=_space(neg),
    )


def _chol_pd(a: np.ndarray) -> bool:
    try:
        np.linalg.cholesky(a)
        return True
    except np.linalg.LinAlgError:
        return False


def _inv_spd(m: SymMatrix) -> np.ndarray:
    a = m.array
    if not _chol_pd(a):
        raise SingularForm("matrix is not positive definite")
    inv = np.linalg.inv(a)
    return 0.5 * (inv + inv.T)


def det_ratio(a_list, sigma_list, sigma0: SymMatrix, tol: float = 1e-8) -> float:
    """prod det(A_i) / det(sum_i (A_i - Sigma_i^{-1}) + Sigma_0^{-1}).

    Requires A_i >= Sigma_i^{-1} - tol.  When additionally
    Sigma_0^{-1} >= Sigma_i^{-1} for all i, the value is bounded below by
    prod det(Sigma_i^{-1}) / det(Sigma_0^{-1}).
    """
    if len(a_list) != len(sigma_list) or not a_list:
        raise ConstraintViolation("need matching non-empty A and Sigma lists")
    n = sigma0.n
    denom = _inv_spd(sigma0)
    log_num = 0.0
    for a, sigma in zip(a_list, sigma_list):
        if a.n != n or sigma.n != n:
            raise ConstraintViolation("all matrices must share one dimension")
        sig_inv = _inv_spd(sigma)
        gap = a.array - sig_inv
        scale = max(1.0, a.max_abs(), float(np.max(np.abs(sig_inv))))
        if not _chol_pd(gap + tol * scale * np.eye(n)):
            raise ConstraintViolation("A_i >= Sigma_i^{-1} violated beyond tol")
        sign, logdet = np.linalg.slogdet(a.array)
        if sign <= 0:
            raise SingularForm("A_i must be positive definite")
        log_num += logdet
        denom = denom + gap
    if not _chol_pd(denom):
        raise SingularForm("denominator form is not positive definite")
    _, log_den = np.linalg.slogdet(denom)
    return float(np.exp(log_num - log_den))


def equality_structure_check(a1: SymMatrix, a2: SymMatrix, tol: float = 1e-8) -> bool:
    """True iff the unit eigenspace of a2 contains the orthocomplement of
    the unit eigenspace of a1 (the equality structure of the determinant
    ratio at Sigma = I)."""
    if not tol > 0:
        raise InvalidTolerance(f"tol must be positive, got {tol}")
    n = a1.n
    for a in (a1, a2):
        if not _chol_pd(a.array - (1.0 - tol) * np.eye(n)):
            raise ConstraintViolation("inputs must satisfy A >= I - tol")
    e1_perp = eig1_space(a1, tol).complement()
    return eig1_space(a2, tol).contains_subspace(e1_perp, tol)
