"""Gaussian measure, barycenter, and covariance estimation over convex sets.

Three estimation methods share one membership-oracle interface:

* ``monte_carlo`` — hit-or-miss sampling with binomial / delta-method error
  bars; deterministic given (inputs, seed) via fixed-order substreams.
* ``qmc`` — scrambled Sobol replicates; stderr from the replicate spread.
* ``quadrature`` (dim <= 2) — whiten the covariance, locate the convex
  section of the set over each outer-axis cell by bisection, and integrate
  the one-dimensional Gaussian moments over the section in closed form.
  The reported stderr is a Richardson-style surrogate: the change under
  halving the outer resolution, plus the tail mass outside the clip radius.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import List

import numpy as np
from scipy.special import ndtr
from scipy.stats import qmc

from .convex import ConvexSet
from .errors import (
    DimensionError,
    InvalidParameter,
    MassTooSmall,
    NotPositiveDefinite,
)
from .symmat import SymMatrix

__all__ = [
    "GaussianSpec",
    "Estimate",
    "RestrictedGaussianStats",
    "sample_gaussian",
    "measure",
    "barycenter",
    "covariance",
    "restricted_stats",
]

_CHUNK = 1 << 16
_CLIP = 8.0  # whitened-space clip radius, in standard deviations
_METHODS = ("monte_carlo", "qmc", "quadrature")


@dataclass(frozen=True)
class GaussianSpec:
    """Centered Gaussian N(0, sigma) on R^dim."""

    sigma: SymMatrix
    dim: int

    def __post_init__(self):
        if self.sigma.n != self.dim:
            raise DimensionError("sigma size disagrees with dim")
        try:
            chol = np.linalg.cholesky(self.sigma.array)
        except np.linalg.LinAlgError:
            raise NotPositiveDefinite("covariance must be positive definite")
        object.__setattr__(self, "_chol", chol)

    @property
    def chol(self) -> np.ndarray:
        return self._chol

    @classmethod
    def standard(cls, dim: int) -> "GaussianSpec":
        return cls(SymMatrix.identity(dim), dim)


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float
    n_samples: int
    method: str

    def to_json(self) -> dict:
        return {
            "value": self.value,
            "stderr": self.stderr,
            "n_samples": self.n_samples,
            "method": self.method,
        }


@dataclass(frozen=True)
class RestrictedGaussianStats:
    """Mass, barycenter, and covariance of the Gaussian restricted to a set."""

    mass: Estimate
    barycenter: List[Estimate]
    covariance: SymMatrix
    covariance_stderr: SymMatrix


def _seed_chunks(seed: int, total: int, dim: int):
    """Yield (rng, count) pairs with a fixed chunk order.

    Each chunk owns an independent child of SeedSequence(seed), so the
    overall stream is identical no matter how chunks are scheduled.
    """
    n_chunks = (total + _CHUNK - 1) // _CHUNK
    children = np.random.SeedSequence(seed).spawn(n_chunks)
    done = 0
    for child in children:
        count = min(_CHUNK, total - done)
        done += count
        yield np.random.default_rng(child), count


def sample_gaussian(spec: GaussianSpec, count: int, seed: int) -> np.ndarray:
    """Deterministic (count, dim) array of N(0, sigma) draws."""
    if count < 1:
        raise InvalidParameter("count must be at least 1")
    out = np.empty((count, spec.dim))
    pos = 0
    for rng, c in _seed_chunks(seed, count, spec.dim):
        z = rng.standard_normal((c, spec.dim))
        out[pos : pos + c] = z @ spec.chol.T
        pos += c
    return out


def _check_inputs(k: ConvexSet, spec: GaussianSpec, budget: int, method: str):
    if k.dim != spec.dim:
        raise DimensionError("set and Gaussian dimensions disagree")
    if budget < 1000:
        raise InvalidParameter("budget must be at least 1000")
    if method not in _METHODS:
        raise InvalidParameter(f"unknown method {method!r}")
    if method == "quadrature" and spec.dim > 2:
        raise InvalidParameter("quadrature is available only for dim <= 2")


def _mc_moments(k, spec, budget, seed):
    """Accumulate hit count, sum x, sum xx^T, and second-moment spread."""
    n = spec.dim
    hits = 0
    s1 = np.zeros(n)
    s2 = np.zeros((n, n))
    s1_sq = np.zeros(n)  # sum of squares of x_j over hits (for stderr)
    s2_sq = np.zeros((n, n))  # sum of squares of (x_i x_j) over hits
    for rng, c in _seed_chunks(seed, budget, n):
        x = rng.standard_normal((c, n)) @ spec.chol.T
        m = k.member_batch(x)
        xh = x[m]
        hits += xh.shape[0]
        if xh.shape[0]:
            s1 += xh.sum(axis=0)
            s1_sq += (xh**2).sum(axis=0)
            outer = np.einsum("ki,kj->ij", xh, xh)
            s2 += outer
            s2_sq += np.einsum("ki,kj->ij", xh**2, xh**2)
    return hits, s1, s2, s1_sq, s2_sq


def _ratio_stderr(num_mean, num_sq_mean, p, n):
    """Delta-method stderr of E[g 1_K]/E[1_K] from raw-moment accumulators.

    num_mean = E[g 1_K], num_sq_mean = E[g^2 1_K], p = E[1_K]; works
    elementwise on arrays.
    """
    r = num_mean / p
    # Var(g1 - r 1_K) = E[g^2 1] - 2r E[g 1] + r^2 p - (E[g1] - r p)^2
    var = num_sq_mean - 2.0 * r * num_mean + (r**2) * p
    var = np.maximum(var, 0.0)
    return np.sqrt(var / n) / p


def _qmc_samples(spec: GaussianSpec, count: int, seed: int) -> np.ndarray:
    eng = qmc.Sobol(d=spec.dim, scramble=True, seed=np.random.default_rng(seed))
    u = eng.random(count)
    # map away exact 0/1 before the normal inverse CDF
    u = np.clip(u, 1e-15, 1.0 - 1e-15)
    from scipy.special import ndtri

    return ndtri(u) @ spec.chol.T


def measure(
    k: ConvexSet,
    spec: GaussianSpec,
    budget: int,
    seed: int,
    method: str = "monte_carlo",
) -> Estimate:
    """Gaussian measure gamma_sigma(K)."""
    _check_inputs(k, spec, budget, method)
    if method == "quadrature":
        val, err, used = _quad_moments(k, spec, budget)[:3]
        return Estimate(float(np.clip(val, 0.0, 1.0)), err, used, "quadrature")
    if method == "qmc":
        reps = 8
        per = max(budget // reps, 1)
        children = np.random.SeedSequence(seed).spawn(reps)
        vals = []
        for child in children:
            x = _qmc_samples(spec, per, child)
            vals.append(float(np.mean(k.member_batch(x))))
        vals = np.asarray(vals)
        return Estimate(
            float(np.clip(vals.mean(), 0.0, 1.0)),
            float(vals.std(ddof=1) / np.sqrt(reps)),
            per * reps,
            "qmc",
        )
    hits = 0
    for rng, c in _seed_chunks(seed, budget, spec.dim):
        x = rng.standard_normal((c, spec.dim)) @ spec.chol.T
        hits += int(np.count_nonzero(k.member_batch(x)))
    p = hits / budget
    stderr = float(np.sqrt(p * (1.0 - p) / budget))
    return Estimate(p, stderr, budget, "monte_carlo")


def barycenter(
    k: ConvexSet,
    spec: GaussianSpec,
    budget: int,
    seed: int,
    method: str = "monte_carlo",
) -> List[Estimate]:
    """Restricted barycenter E[x | x in K], one Estimate per coordinate."""
    return restricted_stats(k, spec, budget, seed, method).barycenter


def covariance(
    k: ConvexSet,
    spec: GaussianSpec,
    budget: int,
    seed: int,
    method: str = "monte_carlo",
) -> RestrictedGaussianStats:
    """Full restricted-Gaussian statistics record."""
    return restricted_stats(k, spec, budget, seed, method)


def restricted_stats(
    k: ConvexSet,
    spec: GaussianSpec,
    budget: int,
    seed: int,
    method: str = "monte_carlo",
) -> RestrictedGaussianStats:
    _check_inputs(k, spec, budget, method)
    n = spec.dim
    if method == "quadrature":
        mass, err, used, m1, m1_err, m2, m2_err = _quad_moments(k, spec, budget)
        if mass <= 0.0:
            raise MassTooSmall("quadrature found no mass inside the set")
        bar = m1 / mass
        cov = m2 / mass - np.outer(bar, bar)
        bar_err = (m1_err + np.abs(bar) * err) / mass
        cov_err = (m2_err + err * np.abs(m2 / mass)) / mass + np.add.outer(
            np.abs(bar) * bar_err, np.abs(bar) * bar_err
        )
        mass_est = Estimate(float(np.clip(mass, 0.0, 1.0)), err, used, "quadrature")
        bar_est = [Estimate(float(bar[i]), float(bar_err[i]), used, "quadrature") for i in range(n)]
        return RestrictedGaussianStats(
            mass=mass_est,
            barycenter=bar_est,
            covariance=SymMatrix.from_symmetrized(cov),
            covariance_stderr=SymMatrix.from_symmetrized(cov_err),
        )
    if method == "qmc":
        return _qmc_stats(k, spec, budget, seed)
    hits, s1, s2, s1_sq, s2_sq = _mc_moments(k, spec, budget, seed)
    if hits < 10:
        raise MassTooSmall(f"only {hits} hits; need at least 10")
    p = hits / budget
    mass_est = Estimate(p, float(np.sqrt(p * (1.0 - p) / budget)), budget, "monte_carlo")
    m1 = s1 / budget
    bar = m1 / p
    bar_err = _ratio_stderr(m1, s1_sq / budget, p, budget)
    m2 = s2 / budget
    sec = m2 / p
    sec_err = _ratio_stderr(m2, s2_sq / budget, p, budget)
    cov = sec - np.outer(bar, bar)
    cov_err = sec_err + np.add.outer(np.abs(bar) * bar_err, np.abs(bar) * bar_err)
    bar_est = [Estimate(float(bar[i]), float(bar_err[i]), budget, "monte_carlo") for i in range(n)]
    return RestrictedGaussianStats(
        mass=mass_est,
        barycenter=bar_est,
        covariance=SymMatrix.from_symmetrized(cov),
        covariance_stderr=SymMatrix.from_symmetrized(cov_err),
    )


def _qmc_stats(k, spec, budget, seed):
    n = spec.dim
    reps = 8
    per = max(budget // reps, 1)
    children = np.random.SeedSequence(seed).spawn(reps)
    masses, bars, covs = [], [], []
    total_hits = 0
    for child in children:
        x = _qmc_samples(spec, per, child)
        m = k.member_batch(x)
        xh = x[m]
        total_hits += xh.shape[0]
        masses.append(np.mean(m))
        if xh.shape[0] >= 2:
            bars.append(xh.mean(axis=0))
            covs.append(np.cov(xh.T, ddof=0).reshape(n, n))
    if total_hits < 10:
        raise MassTooSmall(f"only {total_hits} hits; need at least 10")
    masses = np.asarray(masses)
    bars = np.asarray(bars)
    covs = np.asarray(covs)
    r = len(bars)
    used = per * reps
    mass_est = Estimate(
        float(np.clip(masses.mean(), 0.0, 1.0)),
        float(masses.std(ddof=1) / np.sqrt(reps)),
        used,
        "qmc",
    )
    bar = bars.mean(axis=0)
    bar_err = bars.std(axis=0, ddof=1) / np.sqrt(r) if r > 1 else np.full(n, np.inf)
    cov = covs.mean(axis=0)
    cov_err = covs.std(axis=0, ddof=1) / np.sqrt(r) if r > 1 else np.full((n, n), np.inf)
    bar_est = [Estimate(float(bar[i]), float(bar_err[i]), used, "qmc") for i in range(n)]
    return RestrictedGaussianStats(
        mass=mass_est,
        barycenter=bar_est,
        covariance=SymMatrix.from_symmetrized(cov),
        covariance_stderr=SymMatrix.from_symmetrized(np.abs(cov_err)),
    )


def _phi(t):
    return np.exp(-0.5 * t * t) / np.sqrt(2.0 * np.pi)


def _interval_moments(a, b):
    """(m0, m1, m2): int_a^b {1, y, y^2} dN(0,1), elementwise on arrays."""
    m0 = ndtr(b) - ndtr(a)
    pa, pb = _phi(a), _phi(b)
    m1 = pa - pb
    m2 = m0 + a * pa - b * pb
    return m0, m1, m2


def _section_intervals(oracle, t, scan, iters=52):
    """Per-column convex section endpoints of a 2-D set.

    oracle(T, Y) -> bool mask of membership at points (T, Y); t is the
    (m,) array of column abscissae; scan the (s,) initial scan ordinates.
    Returns (lo, hi, nonempty) arrays of shape (m,).
    """
    m, s = t.shape[0], scan.shape[0]
    tt = np.repeat(t, s)
    yy = np.tile(scan, m)
    inside = oracle(tt, yy).reshape(m, s)
    nonempty = inside.any(axis=1)
    lo = np.zeros(m)
    hi = np.zeros(m)
    if not nonempty.any():
        return lo, hi, nonempty
    idx = np.where(nonempty)[0]
    ins = inside[idx]
    first = np.argmax(ins, axis=1)
    last = s - 1 - np.argmax(ins[:, ::-1], axis=1)
    t_act = t[idx]
    # lower endpoint: bracket [scan[first-1] (outside), scan[first] (inside)]
    out_lo = scan[np.maximum(first - 1, 0)]
    in_lo = scan[first]
    at_edge = first == 0
    out_lo = np.where(at_edge, scan[0], out_lo)
    for _ in range(iters):
        mid = 0.5 * (out_lo + in_lo)
        good = oracle(t_act, mid)
        in_lo = np.where(good, mid, in_lo)
        out_lo = np.where(good, out_lo, mid)
    low = np.where(at_edge & oracle(t_act, np.full_like(t_act, scan[0])), scan[0], in_lo)
    # upper endpoint
    out_hi = scan[np.minimum(last + 1, s - 1)]
    in_hi = scan[last]
    at_edge_hi = last == s - 1
    for _ in range(iters):
        mid = 0.5 * (out_hi + in_hi)
        good = oracle(t_act, mid)
        in_hi = np.where(good, mid, in_hi)
        out_hi = np.where(good, out_hi, mid)
    high = np.where(
        at_edge_hi & oracle(t_act, np.full_like(t_act, scan[-1])), scan[-1], in_hi
    )
    lo[idx] = low
    hi[idx] = high
    return lo, hi, nonempty


def _quad_moments_1d(k, spec):
    chol = spec.chol  # 1x1
    L = float(chol[0, 0])

    def oracle(y):
        return k.member_batch((y * L)[:, None])

    scan = np.linspace(-_CLIP, _CLIP, 4097)
    inside = oracle(scan)
    if not inside.any():
        tail = 2.0 * ndtr(-_CLIP)
        return 0.0, float(tail + 2.0 * _CLIP / 4096), np.zeros(1), np.zeros((1, 1))
    first = int(np.argmax(inside))
    last = int(len(scan) - 1 - np.argmax(inside[::-1]))
    # bisect the two endpoints
    lo = scan[first]
    if first > 0:
        a, b = scan[first - 1], scan[first]
        for _ in range(60):
            mid = 0.5 * (a + b)
            if oracle(np.array([mid]))[0]:
                b = mid
            else:
                a = mid
        lo = b
    hi = scan[last]
    if last < len(scan) - 1:
        a, b = scan[last], scan[last + 1]
        for _ in range(60):
            mid = 0.5 * (a + b)
            if oracle(np.array([mid]))[0]:
                a = mid
            else:
                b = mid
        hi = a
    m0, m1, m2 = _interval_moments(lo, hi)
    tail = 2.0 * ndtr(-_CLIP)
    # map back to x = L y
    return (
        float(m0),
        float(tail),
        np.array([L * m1]),
        np.array([[L * L * m2]]),
    )


def _quad_moments_2d(k, spec, columns):
    chol = spec.chol

    def oracle(tt, yy):
        pts = np.stack([tt, yy], axis=1) @ chol.T
        return k.member_batch(pts)

    scan = np.linspace(-_CLIP, _CLIP, 513)

    def col_nonempty(t_vals):
        lo_, hi_, ok = _section_intervals(oracle, np.atleast_1d(t_vals), scan, iters=0)
        return ok

    # locate the set's extent along the outer axis, so that the only
    # possible discontinuities of the section width sit on grid edges
    t_coarse = np.linspace(-_CLIP, _CLIP, 1025)
    ne = col_nonempty(t_coarse)
    if not ne.any():
        z = np.zeros(2)
        zz = np.zeros((2, 2))
        return 0.0, float(2.0 * _CLIP / 1024), z, z, zz, zz
    first = int(np.argmax(ne))
    last = int(len(t_coarse) - 1 - np.argmax(ne[::-1]))

    def bisect_edge(t_out, t_in):
        for _ in range(52):
            mid = 0.5 * (t_out + t_in)
            if col_nonempty(np.array([mid]))[0]:
                t_in = mid
            else:
                t_out = mid
        return t_in

    t0 = t_coarse[first]
    if first > 0:
        t0 = bisect_edge(t_coarse[first - 1], t_coarse[first])
    t1 = t_coarse[last]
    if last < len(t_coarse) - 1:
        t1 = bisect_edge(t_coarse[last + 1], t_coarse[last])

    def pass_once(m_cols):
        edges = np.linspace(t0, t1, m_cols + 1)
        el, eh = edges[:-1], edges[1:]
        # exact Gaussian cell moments along the outer axis
        w0 = ndtr(eh) - ndtr(el)
        pl, ph = _phi(el), _phi(eh)
        w1 = pl - ph
        w2 = w0 + el * pl - eh * ph
        # evaluate each section at the cell's Gaussian centroid
        t = np.where(w0 > 0, w1 / np.maximum(w0, 1e-300), 0.5 * (el + eh))
        lo, hi, ok = _section_intervals(oracle, t, scan)
        m0, m1, m2 = _interval_moments(lo, hi)
        m0 = np.where(ok, m0, 0.0)
        m1 = np.where(ok, m1, 0.0)
        m2 = np.where(ok, m2, 0.0)
        mass = float(np.sum(w0 * m0))
        mom1 = np.array([np.sum(w1 * m0), np.sum(w0 * m1)])
        mom2 = np.array(
            [
                [np.sum(w2 * m0), np.sum(w1 * m1)],
                [np.sum(w1 * m1), np.sum(w0 * m2)],
            ]
        )
        return mass, mom1, mom2

    mass, mom1, mom2 = pass_once(columns)
    mass_h, mom1_h, mom2_h = pass_once(columns // 2)
    tail = 4.0 * ndtr(-_CLIP)
    err = abs(mass - mass_h) / 3.0 + tail
    m1_err = np.abs(mom1 - mom1_h) / 3.0 + tail
    m2_err = np.abs(mom2 - mom2_h) / 3.0 + tail
    # map y-moments back through x = chol @ y
    L = chol
    mom1_x = L @ mom1
    mom2_x = L @ mom2 @ L.T
    m1_err_x = np.abs(L) @ m1_err
    m2_err_x = np.abs(L) @ m2_err @ np.abs(L).T
    return mass, float(err), mom1_x, m1_err_x, mom2_x, m2_err_x


def _quad_moments(k, spec, budget):
    """(mass, err, used, m1, m1_err, m2, m2_err) in original coordinates."""
    if spec.dim == 1:
        mass, err, m1, m2 = _quad_moments_1d(k, spec)
        return mass, err, 4097, m1, np.full(1, err), m2, np.full((1, 1), err)
    columns = int(min(max(budget // 512, 512), 4096))
    # keep the halved pass meaningful
    columns -= columns % 4
    mass, err, m1, m1_err, m2, m2_err = _quad_moments_2d(k, spec, columns)
    used = columns * 513
    return mass, err, used, m1, m1_err, m2, m2_err
