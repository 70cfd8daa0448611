"""High-level correlation-inequality experiments.

Ties the set, sampling, and matrix layers together: barycenter centering by
damped fixed point, intersection-vs-product verification with error bars,
equality-structure detection, independence-translation search, and the
one-dimensional counterexample to the barycenter-product formulation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
from scipy.special import ndtr

from . import convex as cv
from . import gaussmc as gm
from .errors import DimensionError, MassTooSmall, PreconditionFailed
from .symmat import Subspace, SymMatrix, eig1_space, _chol_pd

__all__ = [
    "CenterResult",
    "GciReport",
    "EqualityStructure",
    "TranslationResult",
    "CounterexampleResult",
    "center_set",
    "verify_gci",
    "detect_equality_structure",
    "find_independent_translations",
    "bary_gci_counterexample",
    "random_centered_polytope",
]


@dataclass(frozen=True)
class CenterResult:
    b0: np.ndarray
    centered: cv.ConvexSet
    iterations: int
    converged: bool
    warning: Optional[str] = None


def _bar_vector(k, spec, budget, seed, method):
    ests = gm.barycenter(k, spec, budget, seed, method=method)
    vec = np.array([e.value for e in ests])
    err = np.array([e.stderr for e in ests])
    return vec, err


def center_set(
    k: cv.ConvexSet,
    spec: gm.GaussianSpec,
    budget: int,
    seed: int,
    tol: float = 1e-6,
    method: str = "monte_carlo",
    max_iter: int = 200,
) -> CenterResult:
    """Translate k so its restricted-Gaussian barycenter vanishes.

    Preconditioned fixed-point iteration: the residual bar(K - b) has
    Jacobian -(I - Cov) in b, so the update solves (I - Cov) db = bar,
    falling back to the plain damped step b <- b + 0.5 * bar when the solve
    is ill-conditioned (Cov near the identity along a recession direction).
    Every evaluation reuses one random-number stream so the iteration is a
    deterministic map.  Hitting the iteration cap is reported through the
    warning field rather than raised, with the best translation found.
    """
    b = np.zeros(k.dim)
    best = (math.inf, b)
    eye = np.eye(k.dim)

    def residual(bb):
        stats = gm.restricted_stats(
            cv.translate(k, -bb), spec, budget, seed, method=method
        )
        bar = np.array([e.value for e in stats.barycenter])
        err = np.array([e.stderr for e in stats.barycenter])
        return bar, err, stats.covariance.array

    for it in range(1, max_iter + 1):
        try:
            bar, err, cov = residual(b)
        except MassTooSmall:
            # overshot into a region without Gaussian mass: retreat halfway
            b = 0.5 * (b + best[1])
            continue
        norm = float(np.linalg.norm(bar))
        if norm < best[0]:
            best = (norm, b.copy())
        band = tol if method == "quadrature" else max(tol, 0.5 * float(np.linalg.norm(err)))
        if norm <= band:
            return CenterResult(b, cv.translate(k, -b), it, True)
        try:
            step = np.linalg.solve(eye - cov + 1e-9 * eye, bar)
        except np.linalg.LinAlgError:
            step = bar
        if not np.all(np.isfinite(step)):
            step = bar
        # backtrack on the residual norm so large near-recession steps
        # cannot diverge
        accepted = False
        for _ in range(8):
            trial = b + step
            try:
                tbar, _, _ = residual(trial)
            except MassTooSmall:
                step = 0.5 * step
                continue
            if float(np.linalg.norm(tbar)) < norm:
                b = trial
                accepted = True
                break
            step = 0.5 * step
        if not accepted:
            b = b + step
    norm, b = best
    return CenterResult(
        b,
        cv.translate(k, -b),
        max_iter,
        False,
        warning=f"iteration cap reached with residual {norm:.3e}",
    )


@dataclass(frozen=True)
class GciReport:
    lhs: gm.Estimate
    rhs_factors: List[gm.Estimate]
    ratio: float
    margin_sigmas: float
    verdict: str  # holds | equality_within_noise | violated
    ordering_warning: Optional[str] = None

    def to_json(self) -> dict:
        return {
            "lhs": self.lhs.to_json(),
            "rhs_factors": [e.to_json() for e in self.rhs_factors],
            "ratio": self.ratio,
            "margin_sigmas": self.margin_sigmas,
            "verdict": self.verdict,
            "ordering_warning": self.ordering_warning,
        }


def verify_gci(
    k_list: List[cv.ConvexSet],
    sigma0: SymMatrix,
    sigma_list: List[SymMatrix],
    budget: int,
    seed: int,
    method: str = "monte_carlo",
) -> GciReport:
    """Compare gamma_{Sigma_0}(intersection) against the product of the
    individual measures, sharing one sample stream across all estimates."""
    if len(k_list) != len(sigma_list) or not k_list:
        raise DimensionError("need matching non-empty set and covariance lists")
    n = sigma0.n
    if any(k.dim != n for k in k_list):
        raise DimensionError("sets and covariances disagree in dimension")

    # centering precondition (or matched barycenters for a pair)
    bars, bands = [], []
    for i, (k, sig) in enumerate(zip(k_list, sigma_list)):
        spec = gm.GaussianSpec(sig, n)
        bar, err = _bar_vector(k, spec, budget, seed, method)
        bars.append(bar)
        bands.append(1e-6 if method == "quadrature" else 3.0 * err)
    centered = [
        bool(np.all(np.abs(b) <= band)) for b, band in zip(bars, bands)
    ]
    if not all(centered):
        matched = False
        if len(k_list) == 2:
            diff = np.abs(bars[0] - bars[1])
            band = (
                2e-6
                if method == "quadrature"
                else np.hypot(bands[0] / 3.0, bands[1] / 3.0) * 3.0
            )
            matched = bool(np.all(diff <= band))
        if not matched:
            bad = centered.index(False)
            raise PreconditionFailed(
                f"set {bad} is not centered: barycenter {bars[bad]}"
            )

    ordering_warning = None
    inv0 = np.linalg.inv(sigma0.array)
    for i, sig in enumerate(sigma_list):
        gap = inv0 - np.linalg.inv(sig.array)
        if not _chol_pd(0.5 * (gap + gap.T) + 1e-10 * np.eye(n)):
            ordering_warning = f"Sigma_0^-1 does not dominate Sigma_{i + 1}^-1"

    inter = k_list[0]
    for k in k_list[1:]:
        inter = cv.intersect(inter, k)
    lhs = gm.measure(inter, gm.GaussianSpec(sigma0, n), budget, seed, method=method)
    rhs = [
        gm.measure(k, gm.GaussianSpec(sig, n), budget, seed, method=method)
        for k, sig in zip(k_list, sigma_list)
    ]
    prod = float(np.prod([e.value for e in rhs]))
    rel = math.sqrt(sum((e.stderr / max(e.value, 1e-300)) ** 2 for e in rhs))
    sigma_d = math.hypot(lhs.stderr, prod * rel)
    margin = (lhs.value - prod) / max(sigma_d, 1e-300)
    ratio = lhs.value / max(prod, 1e-300)
    if margin >= 3.0:
        verdict = "holds"
    elif margin <= -3.0:
        verdict = "violated"
    else:
        verdict = "equality_within_noise"
    return GciReport(lhs, rhs, ratio, margin, verdict, ordering_warning)


@dataclass(frozen=True)
class EqualityStructure:
    e: Subspace
    eig_gap: float
    product_residual: float
    verdict: str  # product | not_product | inconclusive

    def to_json(self) -> dict:
        return {
            "e": self.e.to_json(),
            "eig_gap": self.eig_gap,
            "product_residual": self.product_residual,
            "verdict": self.verdict,
        }


def detect_equality_structure(
    k1: cv.ConvexSet,
    k2: cv.ConvexSet,
    budget: int,
    seed: int,
    tol: float = 1e-3,
    method: str = "monte_carlo",
    probes: int = 4096,
) -> EqualityStructure:
    """Recover the free subspace E from the restricted covariance of K1 and
    confirm the product structure by membership-separability probes."""
    n = k1.dim
    if k2.dim != n:
        raise DimensionError("sets must share an ambient dimension")
    spec = gm.GaussianSpec.standard(n)
    stats = gm.restricted_stats(k1, spec, budget, seed, method=method)
    cov = stats.covariance
    tol_eig = max(1e-6, 3.0 * float(np.max(stats.covariance_stderr.array)))
    e = eig1_space(cov, tol_eig)
    w = np.sort(np.abs(np.linalg.eigvalsh(cov.array) - 1.0))
    outside = w[w > tol_eig]
    eig_gap = float(outside[0]) if outside.size else float("inf")

    if e.dim == 0:
        return EqualityStructure(e, eig_gap, 1.0, "not_product")

    rng = np.random.default_rng(np.random.SeedSequence((seed, 0xE)))
    x = rng.standard_normal((probes, n))
    z1 = rng.standard_normal((probes, e.dim))
    be = e.basis
    bp = e.complement().basis
    # resample the E-component for K1, the E-perp component for K2
    x_e = x - (x @ be) @ be.T + z1 @ be.T
    res1 = float(np.mean(k1.member_batch(x) != k1.member_batch(x_e)))
    if bp.shape[1]:
        z2 = rng.standard_normal((probes, bp.shape[1]))
        x_p = x - (x @ bp) @ bp.T + z2 @ bp.T
        res2 = float(np.mean(k2.member_batch(x) != k2.member_batch(x_p)))
    else:
        res2 = 0.0
    residual = max(res1, res2)
    if residual < tol:
        verdict = "product"
    elif eig_gap <= 3.0 * tol_eig:
        verdict = "inconclusive"
    else:
        verdict = "not_product"
    return EqualityStructure(e, eig_gap, residual, verdict)


@dataclass(frozen=True)
class TranslationResult:
    a1: np.ndarray
    a2: np.ndarray
    phi: float
    stage: int  # 1 = centering sufficed, 2 = line search ran

    def to_json(self) -> dict:
        return {
            "a1": self.a1.tolist(),
            "a2": self.a2.tolist(),
            "phi": self.phi,
            "stage": self.stage,
        }


def _phi_value(k1, k2, spec, budget, seed, method) -> float:
    num = gm.measure(cv.intersect(k1, k2), spec, budget, seed, method=method).value
    d1 = gm.measure(k1, spec, budget, seed, method=method).value
    d2 = gm.measure(k2, spec, budget, seed, method=method).value
    return num / max(d1 * d2, 1e-300)


def find_independent_translations(
    k1: cv.ConvexSet,
    k2: cv.ConvexSet,
    spec: gm.GaussianSpec,
    budget: int,
    seed: int,
    tol: float = 1e-3,
    method: str = "quadrature",
) -> TranslationResult:
    """Translations making the two events independent (Phi = 1).

    Stage 1 recenters both bodies; if that already gives Phi = 1 within tol
    the search stops.  Stage 2 slides the second body along the line through
    the original barycenters (e_1 when they coincide), bisecting Phi = 1
    between the centered position (Phi >= 1) and a far separation (Phi -> 0).
    """
    c1 = center_set(k1, spec, budget, seed, tol=min(tol, 1e-6), method=method)
    c2 = center_set(k2, spec, budget, seed, tol=min(tol, 1e-6), method=method)
    a1, a2 = -c1.b0, -c2.b0
    phi0 = _phi_value(c1.centered, c2.centered, spec, budget, seed, method)
    if abs(phi0 - 1.0) <= tol:
        return TranslationResult(a1, a2, phi0, 1)

    direction = c2.b0 - c1.b0
    nrm = float(np.linalg.norm(direction))
    direction = direction / nrm if nrm > 1e-9 else np.eye(k1.dim)[0]

    def phi_at(s: float) -> float:
        return _phi_value(
            c1.centered, cv.translate(c2.centered, s * direction), spec, budget, seed, method
        )

    if phi0 < 1.0 - tol:
        # already below the independence level: nothing to bracket
        return TranslationResult(a1, a2, phi0, 1)
    s_hi = 1.0
    while phi_at(s_hi) >= 1.0 and s_hi < 2.0**20:
        s_hi *= 2.0
    s_lo = 0.0
    phi = phi0
    for _ in range(100):
        mid = 0.5 * (s_lo + s_hi)
        phi = phi_at(mid)
        if abs(phi - 1.0) <= tol:
            s_lo = s_hi = mid
            break
        if phi > 1.0:
            s_lo = mid
        else:
            s_hi = mid
    s = 0.5 * (s_lo + s_hi)
    phi = phi_at(s)
    return TranslationResult(a1, a2 + s * direction, phi, 2)


@dataclass(frozen=True)
class CounterexampleResult:
    lhs: float
    bound: float
    violated: bool

    def to_json(self) -> dict:
        return {"lhs": self.lhs, "bound": self.bound, "violated": self.violated}


def bary_gci_counterexample(r2: float) -> CounterexampleResult:
    """(1 + bar(h1) bar(h2)) * gamma(A1) for the half-line indicators
    h1 = 1_(0,inf), h2 = 1_(r2,inf); exceeding 1 shows the barycenter-product
    bound fails for indicators."""
    if r2 < 0:
        raise PreconditionFailed("r2 must be nonnegative")
    bar1 = math.sqrt(2.0 / math.pi)
    phi_r = math.exp(-0.5 * r2 * r2) / math.sqrt(2.0 * math.pi)
    tail = float(ndtr(-r2))
    bar2 = phi_r / tail
    lhs = (1.0 + bar1 * bar2) * 0.5
    return CounterexampleResult(lhs, 1.0, lhs > 1.0)


def random_centered_polytope(
    dim: int,
    seed: int,
    budget: int = 200000,
    method: Optional[str] = None,
) -> cv.ConvexSet:
    """Random bounded polytope recentered to a vanishing Gaussian barycenter.

    2*dim + 4 halfspaces with uniformly random unit normals at distance 1,
    intersected with a generous bounding box, then centered by fixed point.
    """
    rng = np.random.default_rng(np.random.SeedSequence((seed, 0xC)))
    count = 2 * dim + 4
    normals = rng.standard_normal((count, dim))
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    body = cv.Polytope(normals, np.ones(count))
    box = cv.Polytope.box([-12.0] * dim, [12.0] * dim)
    k = cv.intersect(body, box)
    if method is None:
        method = "quadrature" if dim <= 2 else "monte_carlo"
    spec = gm.GaussianSpec.standard(dim)
    res = center_set(k, spec, budget, seed, method=method)
    return res.centered
