"""Brascamp-Lieb datum model and the constrained Gaussian infimum.

A datum is (B, c, Q): linear maps B_i : R^N -> R^{n_i}, positive weights
c_i, and a quadratic form Q on R^N.  Over Gaussian inputs g_A(y) =
exp(-<y, A y>) the functional has the closed form

    (2 pi)^{(N - sum c_i n_i)/2} det(M)^{-1/2} prod det(A_i)^{c_i/2},
    M = sum c_i B_i^T A_i B_i - 2 Q,

infinite when M is not positive definite.  Two cheap gates classify the
trivial cases (infinite constant via a kernel witness, zero constant via a
rank deficit); otherwise the constrained infimum over A_i inside a band
[G_i, H_i] is found by multi-start projected gradient descent in the
parameterization A_i = G_i + L_i L_i^T.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .errors import (
    ConstraintViolation,
    DimensionError,
    InvalidInput,
    NoConvergence,
    NotPositiveDefinite,
)
from .symmat import SymMatrix, _chol_pd

__all__ = [
    "INFINITE",
    "BLDatum",
    "ConstraintBand",
    "GaussianBLResult",
    "FinitenessResult",
    "SurjectivityResult",
    "GciConstant",
    "finiteness_check",
    "surjectivity_check",
    "gaussian_bl_value",
    "gaussian_bl_infimum",
    "gci_constant",
    "gci_datum",
    "find_finite_scale",
    "zero_family_value",
]


class _Infinite:
    """Explicit +infinity variant for BL values (not a sentinel float)."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "INFINITE"

    def __float__(self):
        return math.inf


INFINITE = _Infinite()


@dataclass(frozen=True)
class BLDatum:
    big_n: int
    maps: List[np.ndarray]
    weights: List[float]
    q: SymMatrix

    def __post_init__(self):
        if not self.maps:
            raise InvalidInput("datum needs at least one map")
        if len(self.maps) != len(self.weights):
            raise InvalidInput("maps and weights must have equal length")
        maps = []
        for b in self.maps:
            b = np.atleast_2d(np.asarray(b, dtype=np.float64))
            if b.shape[1] != self.big_n:
                raise DimensionError("every map needs big_n columns")
            maps.append(b)
        if any(not c > 0 for c in self.weights):
            raise InvalidInput("weights must be positive")
        if self.q.n != self.big_n:
            raise DimensionError("Q must act on the ambient space")
        object.__setattr__(self, "maps", maps)
        object.__setattr__(self, "weights", [float(c) for c in self.weights])

    @property
    def m(self) -> int:
        return len(self.maps)

    @property
    def block_dims(self) -> List[int]:
        return [b.shape[0] for b in self.maps]

    def to_json(self) -> dict:
        return {
            "N": self.big_n,
            "B": [b.tolist() for b in self.maps],
            "c": list(self.weights),
            "Q": self.q.array.tolist(),
        }

    @classmethod
    def from_json(cls, obj) -> "BLDatum":
        return cls(
            int(obj["N"]),
            [np.asarray(b) for b in obj["B"]],
            [float(c) for c in obj["c"]],
            SymMatrix.from_symmetrized(np.asarray(obj["Q"], dtype=np.float64)),
        )


@dataclass(frozen=True)
class ConstraintBand:
    """Bands G_i <= A_i <= H_i; an entry None in h means no upper bound."""

    g: List[SymMatrix]
    h: List[Optional[SymMatrix]]

    def __post_init__(self):
        if len(self.g) != len(self.h):
            raise InvalidInput("lower and upper band lists must align")
        for gi, hi in zip(self.g, self.h):
            if not _chol_pd(gi.array + 1e-12 * np.eye(gi.n)):
                raise ConstraintViolation("lower band entries must be PSD")
            if hi is not None and not _chol_pd(
                hi.array - gi.array + 1e-10 * np.eye(gi.n)
            ):
                raise ConstraintViolation("band needs G_i <= H_i")

    @classmethod
    def lower_only(cls, g: List[SymMatrix]) -> "ConstraintBand":
        return cls(g, [None] * len(g))


@dataclass(frozen=True)
class GaussianBLResult:
    value: object  # float or INFINITE
    argmin: List[SymMatrix]
    stationarity_residual: float
    classification: str  # finite | infinite_constant | zero_constant

    def to_json(self) -> dict:
        return {
            "value": None if self.value is INFINITE else float(self.value),
            "argmin": [a.to_json() for a in self.argmin],
            "stationarity_residual": self.stationarity_residual,
            "classification": self.classification,
        }


@dataclass(frozen=True)
class FinitenessResult:
    status: str  # finite_possible | infinite_constant
    witness: Optional[np.ndarray] = None


@dataclass(frozen=True)
class SurjectivityResult:
    status: str  # ok | zero_constant
    index: Optional[int] = None


def _stacked_kernel(d: BLDatum) -> np.ndarray:
    """Orthonormal basis of the joint kernel of all maps (columns)."""
    stacked = np.vstack(d.maps)
    _, s, vt = np.linalg.svd(stacked)
    cutoff = 1e-10 * (s[0] if s.size else 1.0)
    rank = int(np.sum(s > cutoff))
    return vt[rank:].T


def finiteness_check(d: BLDatum) -> FinitenessResult:
    """Gate: Q restricted to the joint kernel must be negative definite.

    On failure returns a unit witness direction along which the functional
    is infinite.
    """
    v = _stacked_kernel(d)
    if v.shape[1] == 0:
        return FinitenessResult("finite_possible")
    qv = v.T @ d.q.array @ v
    qv = 0.5 * (qv + qv.T)
    w, vec = np.linalg.eigh(qv)
    scale = max(1.0, float(np.max(np.abs(qv))))
    if w[-1] < -1e-10 * scale:
        return FinitenessResult("finite_possible")
    omega = v @ vec[:, -1]
    omega = omega / np.linalg.norm(omega)
    # fix the sign for reproducibility
    lead = np.argmax(np.abs(omega))
    if omega[lead] < 0:
        omega = -omega
    return FinitenessResult("infinite_constant", witness=omega)


def surjectivity_check(d: BLDatum) -> SurjectivityResult:
    """Gate: each map must be surjective onto its target space."""
    for i, b in enumerate(d.maps):
        s = np.linalg.svd(b, compute_uv=False)
        smax = s[0] if s.size else 0.0
        rank = int(np.sum(s > 1e-10 * max(smax, 1e-300)))
        if rank < b.shape[0]:
            return SurjectivityResult("zero_constant", index=i)
    return SurjectivityResult("ok")


def _log_value(d: BLDatum, a_arrays) -> Optional[float]:
    """log of the Gaussian functional, or None when infinite."""
    n_amb = d.big_n
    log_v = 0.5 * (n_amb - sum(c * b.shape[0] for c, b in zip(d.weights, d.maps))) * (
        math.log(2.0 * math.pi)
    )
    m = -2.0 * d.q.array
    for c, b, a in zip(d.weights, d.maps, a_arrays):
        sign, ld = np.linalg.slogdet(a)
        if sign <= 0:
            raise InvalidInput("every A_i must be positive definite")
        log_v += 0.5 * c * ld
        m = m + c * (b.T @ a @ b)
    m = 0.5 * (m + m.T)
    if not _chol_pd(m):
        return None
    _, ldm = np.linalg.slogdet(m)
    return log_v - 0.5 * ldm


def gaussian_bl_value(d: BLDatum, a_list: List[SymMatrix]):
    """Closed-form functional value on Gaussian inputs g_{A_i}."""
    if len(a_list) != d.m:
        raise DimensionError("need one A per map")
    for a, b in zip(a_list, d.maps):
        if a.n != b.shape[0]:
            raise DimensionError("A_i must act on the target of B_i")
        if not _chol_pd(a.array):
            raise InvalidInput("every A_i must be positive definite")
    lv = _log_value(d, [a.array for a in a_list])
    return INFINITE if lv is None else float(math.exp(lv))


def _objective_and_grad(d, band, l_list):
    """Objective log value and gradient with respect to the L factors."""
    a_arrays = [g.array + l @ l.T for g, l in zip(band.g, l_list)]
    lv = _log_value(d, a_arrays)
    if lv is None:
        return None, None, a_arrays
    m = -2.0 * d.q.array
    for c, b, a in zip(d.weights, d.maps, a_arrays):
        m = m + c * (b.T @ a @ b)
    m_inv = np.linalg.inv(0.5 * (m + m.T))
    grads = []
    for c, b, a, l in zip(d.weights, d.maps, a_arrays, l_list):
        ga = 0.5 * c * (np.linalg.inv(a) - b @ m_inv @ b.T)
        ga = 0.5 * (ga + ga.T)
        grads.append(2.0 * ga @ l)
    return lv, grads, a_arrays


def _project_upper(band, l_list):
    """Pull A_i back under a finite upper band by spectral clipping."""
    out = []
    for g, h, l in zip(band.g, band.h, l_list):
        if h is None:
            out.append(l)
            continue
        a = g.array + l @ l.T
        w, v = np.linalg.eigh(a - h.array)
        excess = np.clip(w, 0.0, None)
        a = a - v @ np.diag(excess) @ v.T
        gap = 0.5 * ((a - g.array) + (a - g.array).T)
        w2, v2 = np.linalg.eigh(gap)
        out.append(v2 @ np.diag(np.sqrt(np.clip(w2, 0.0, None))))
    return out


def _descend(d, band, l_list, max_iter, tol_scale):
    step = 1.0
    f, grads, _ = _objective_and_grad(d, band, l_list)
    if f is None:
        return None, l_list, math.inf
    for _ in range(max_iter):
        gnorm = math.sqrt(sum(float(np.sum(g * g)) for g in grads))
        if gnorm <= tol_scale * (1.0 + abs(f)):
            return f, l_list, gnorm
        accepted = False
        for _ in range(60):
            trial = [l - step * g for l, g in zip(l_list, grads)]
            trial = _project_upper(band, trial)
            f_t, g_t, _ = _objective_and_grad(d, band, trial)
            if f_t is not None and f_t <= f - 1e-4 * step * gnorm**2:
                l_list, f, grads = trial, f_t, g_t
                step = min(step * 1.3, 1e6)
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
    gnorm = math.sqrt(sum(float(np.sum(g * g)) for g in grads))
    return f, l_list, gnorm


def gaussian_bl_infimum(
    d: BLDatum,
    band: ConstraintBand,
    seed: int = 0,
    n_starts: int = 8,
    max_iter: int = 2000,
    tol: float = 1e-9,
) -> GaussianBLResult:
    """Constrained infimum over the Gaussian class by multi-start descent.

    Start 0 sits just above the lower band (the band corner is a stationary
    point of the factored parameterization, so a small offset is required);
    the remaining starts are random.  The winner is the lowest converged
    value, ties broken by start index.
    """
    fin = finiteness_check(d)
    if fin.status == "infinite_constant":
        return GaussianBLResult(INFINITE, [], 0.0, "infinite_constant")
    sur = surjectivity_check(d)
    if sur.status == "zero_constant":
        return GaussianBLResult(0.0, [], 0.0, "zero_constant")
    if len(band.g) != d.m:
        raise DimensionError("band length must match the number of maps")

    dims = d.block_dims
    starts = []
    starts.append([1e-4 * np.eye(ni) for ni in dims])
    for s_idx in range(n_starts):
        rng = np.random.default_rng((seed, s_idx))
        starts.append(
            [np.tril(rng.standard_normal((ni, ni))) * 0.7 for ni in dims]
        )

    best = None  # (value, start_index, l_list, residual)
    converged_any = False
    for idx, l0 in enumerate(starts):
        f, l_fin, res = _descend(d, band, l0, max_iter, tol)
        if f is None:
            continue
        ok = res <= tol * (1.0 + abs(f)) * 10.0
        converged_any = converged_any or ok
        if best is None or f < best[0] - 1e-12 * max(1.0, abs(f)):
            best = (f, idx, l_fin, res)
    if best is None:
        raise NoConvergence("no start produced a finite value", best=None)
    f, _, l_fin, res = best
    argmin = [
        SymMatrix.from_symmetrized(g.array + l @ l.T)
        for g, l in zip(band.g, l_fin)
    ]
    result = GaussianBLResult(float(math.exp(f)), argmin, res, "finite")
    if not converged_any:
        raise NoConvergence("optimizer did not reach the residual target", best=result)
    return result


def gci_datum(sigma0: SymMatrix, sigma_list: List[SymMatrix]) -> BLDatum:
    """Datum with identity maps and unit weights encoding a covariance family."""
    n = sigma0.n
    inv0 = np.linalg.inv(sigma0.array)
    q = -0.5 * inv0
    for s in sigma_list:
        q = q + 0.5 * np.linalg.inv(s.array)
    return BLDatum(
        n,
        [np.eye(n)] * len(sigma_list),
        [1.0] * len(sigma_list),
        SymMatrix.from_symmetrized(q),
    )


@dataclass(frozen=True)
class GciConstant:
    value: float
    ordering_ok: bool
    warning: Optional[str] = None

    def __float__(self):
        return self.value


def gci_constant(sigma0: SymMatrix, sigma_list: List[SymMatrix], seed: int = 0) -> GciConstant:
    """Multiplicative constant relating the Gaussian infimum to the
    intersection inequality; equals 1 when Sigma_0^{-1} dominates every
    Sigma_i^{-1}."""
    n = sigma0.n
    if any(s.n != n for s in sigma_list):
        raise DimensionError("all covariances must share one dimension")
    for s in (sigma0, *sigma_list):
        if not _chol_pd(s.array):
            raise NotPositiveDefinite("covariances must be positive definite")
    inv0 = np.linalg.inv(sigma0.array)
    ordering_ok = True
    for s in sigma_list:
        gap = inv0 - np.linalg.inv(s.array)
        if not _chol_pd(0.5 * (gap + gap.T) + 1e-10 * np.eye(n)):
            ordering_ok = False
    d = gci_datum(sigma0, sigma_list)
    band = ConstraintBand.lower_only(
        [SymMatrix.from_symmetrized(np.linalg.inv(s.array)) for s in sigma_list]
    )
    try:
        inf_res = gaussian_bl_infimum(d, band, seed=seed)
    except NoConvergence as exc:
        # a violated ordering can push the infimum to the band boundary at
        # infinity; the best iterate still brackets the constant
        if exc.best is None or ordering_ok:
            raise
        inf_res = exc.best
    log_pref = -0.5 * np.linalg.slogdet(2.0 * math.pi * sigma0.array)[1]
    for s in sigma_list:
        log_pref += 0.5 * np.linalg.slogdet(2.0 * math.pi * s.array)[1]
    value = float(math.exp(log_pref + math.log(inf_res.value)))
    warning = None if ordering_ok else "inverse-covariance ordering violated"
    return GciConstant(value, ordering_ok, warning)


def find_finite_scale(d: BLDatum, cap: float = float(2**60)) -> float:
    """Smallest power-of-two scale lam with value(d, lam * I) finite."""
    lam = 1.0
    while lam <= cap:
        try:
            v = gaussian_bl_value(d, [SymMatrix(lam * np.eye(ni)) for ni in d.block_dims])
        except InvalidInput:
            v = INFINITE
        if v is not INFINITE:
            return lam
        lam *= 2.0
    raise NoConvergence(f"no finite scale below {cap}")


def zero_family_value(d: BLDatum, index: int, eps: float, scale: Optional[float] = None):
    """Functional value along the family that certifies a zero constant.

    For a non-surjective map at the given index, a unit direction omega
    orthogonal to its image is squeezed: A_index = scale * P_{omega-perp}
    + eps * omega omega^T, the remaining A_i = scale * I.  The value decays
    like eps^{c_index / 2}.
    """
    b = d.maps[index]
    u, s, _ = np.linalg.svd(b)
    smax = s[0] if s.size else 0.0
    rank = int(np.sum(s > 1e-10 * max(smax, 1e-300)))
    if rank == b.shape[0]:
        raise InvalidInput("map at the given index is surjective")
    omega = u[:, rank]
    if scale is None:
        # find a scale at which the rest of the family stays finite
        scale = 1.0
        while scale <= float(2**60):
            if _zero_family_log(d, index, omega, 1.0, scale) is not None:
                break
            scale *= 2.0
    lv = _zero_family_log(d, index, omega, eps, scale)
    return INFINITE if lv is None else float(math.exp(lv))


def _zero_family_log(d, index, omega, eps, scale):
    a_arrays = []
    for i, ni in enumerate(d.block_dims):
        if i == index:
            p = np.eye(ni) - np.outer(omega, omega)
            a_arrays.append(scale * p + eps * np.outer(omega, omega))
        else:
            a_arrays.append(scale * np.eye(ni))
    return _log_value(d, a_arrays)
