"""Grid-density engine: curvature checks, self-convolution iteration,
Fokker-Planck flow, truncation, and CLT distances.

A ``GridDensity`` stores nonnegative values on a uniform symmetric grid
with a node at 0.  Values are read as cell heights (the density is
piecewise constant on cells centered at the nodes), so the discrete
convolution ``dx * sum f_j g_{k-j}`` produces *exact* nodal values of the
continuous convolution of the two histograms.  The sqrt(2) rescaling in
the self-convolution step is realized by shrinking the grid spacing by
sqrt(2) rather than by interpolating, which keeps the step exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from ._kernels import convolve_direct
from .blconst import BLDatum
from .errors import (
    EmptyDensity,
    GridTooSmall,
    InvalidInput,
    InvalidParameter,
    NoConvergence,
    NotCentered,
    NotLogConcave,
)

__all__ = [
    "GridDensity",
    "FlowReport",
    "FlowStep",
    "FradeliziResult",
    "grid_from_function",
    "fradelizi_check",
    "logconcavity_check",
    "semilogconvexity_check",
    "ball_step",
    "ball_iterate",
    "discrete_bl_value",
    "fokker_planck_step",
    "truncate_recenter",
    "clt_distance",
    "random_centered_logconcave",
    "Grid2Density",
]

_TAIL_FLOOR = 1e-13  # fraction of the max below which curvature is not checked
_ESCAPE_TOL = 1e-9  # relative mass allowed to leave the window


@dataclass(frozen=True)
class GridDensity:
    """Nonnegative density values on a uniform grid (cell-histogram reading)."""

    xmin: float
    dx: float
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1 or v.size < 3:
            raise InvalidInput("need a 1-D value array with at least 3 points")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise InvalidInput("values must be finite and nonnegative")
        if not self.dx > 0:
            raise InvalidParameter("dx must be positive")
        if float(v.sum()) * self.dx <= 0.0:
            raise EmptyDensity("density carries no mass")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n_points(self) -> int:
        return self.values.size

    @property
    def x(self) -> np.ndarray:
        return self.xmin + self.dx * np.arange(self.n_points)

    @property
    def mass(self) -> float:
        return float(self.values.sum() * self.dx)

    @property
    def barycenter(self) -> float:
        return float((self.x * self.values).sum() * self.dx / self.mass)

    @property
    def variance(self) -> float:
        b = self.barycenter
        return float(((self.x - b) ** 2 * self.values).sum() * self.dx / self.mass)

    @property
    def spread(self) -> float:
        return math.sqrt(max(self.variance, 0.0))

    def normalized(self) -> "GridDensity":
        return GridDensity(self.xmin, self.dx, self.values / self.mass)

    def at(self, z) -> np.ndarray:
        """Linear interpolation of the nodal values (0 outside the grid)."""
        return np.interp(np.asarray(z, dtype=np.float64), self.x, self.values, left=0.0, right=0.0)

    def value_at_zero(self) -> float:
        j = int(round(-self.xmin / self.dx))
        if not 0 <= j < self.n_points or abs(self.xmin + j * self.dx) > 1e-9 * self.dx:
            return float(self.at(0.0))
        return float(self.values[j])

    def cumulative_edges(self):
        """(edge positions, cumulative mass at edges) of the histogram."""
        edges = self.xmin - 0.5 * self.dx + self.dx * np.arange(self.n_points + 1)
        cum = np.concatenate([[0.0], np.cumsum(self.values) * self.dx])
        return edges, cum

    def to_csv(self, path):
        np.savetxt(path, np.column_stack([self.x, self.values]), delimiter=",", header="x,value", comments="")


def grid_from_function(f, half_width: float, points: int) -> GridDensity:
    """Sample a scalar map on a symmetric grid, clipping negatives at 0."""
    if points < 64 or points % 2 == 0:
        raise InvalidParameter("points must be odd and at least 64")
    if not half_width > 0:
        raise InvalidParameter("half_width must be positive")
    x = np.linspace(-half_width, half_width, points)
    vals = np.asarray([float(f(t)) for t in x])
    vals = np.clip(vals, 0.0, None)
    if vals.sum() <= 0.0:
        raise EmptyDensity("sampled map carries no mass")
    return GridDensity(-half_width, x[1] - x[0], vals)


def uniform_density(inner: float = 1.0, k: int = 128, window: float = 8.0) -> GridDensity:
    """Unit-mass uniform on [-inner, inner], exact in cell-histogram form.

    The spacing is chosen so the interval edges fall on cell boundaries:
    dx = 2*inner/(2k+1), and the window is rounded to a whole number of
    cells, keeping a node at 0.
    """
    dx = 2.0 * inner / (2 * k + 1)
    half_cells = int(round(window / dx))
    n = 2 * half_cells + 1
    x = -half_cells * dx + dx * np.arange(n)
    vals = np.where(np.abs(x) < inner, 1.0 / (2.0 * inner), 0.0)
    return GridDensity(float(x[0]), dx, vals)


def gaussian_density(sigma: float = 1.0, half_width: float = 8.0, points: int = 4097) -> GridDensity:
    x = np.linspace(-half_width, half_width, points)
    vals = np.exp(-0.5 * (x / sigma) ** 2) / (sigma * math.sqrt(2.0 * math.pi))
    return GridDensity(-half_width, x[1] - x[0], vals)


def _log_curvature(f: GridDensity, curv: float):
    """Second differences of -log f - curv*x^2/2 at nodes above the tail floor.

    Only the center of each triple is thresholded: a (near-)zero neighbor
    reads as an effectively infinite log-value, which correctly fails the
    semi log-convexity check at indicator corners while leaving
    log-concavity of compactly supported densities intact.
    """
    v = f.values
    mask = v > _TAIL_FLOOR * float(v.max())
    ok3 = mask[1:-1]
    phi = -np.log(np.clip(v, 1e-300, None)) - 0.5 * curv * f.x**2
    d2 = phi[:-2] - 2.0 * phi[1:-1] + phi[2:]
    return d2, ok3, phi


def _curv_tol(f: GridDensity, phi, ok3) -> np.ndarray:
    # rounding slack only: scales with the local log-value, not with dx
    mag = np.abs(phi[1:-1])
    return 1e-9 * (1.0 + mag)


def logconcavity_check(f: GridDensity, g: float, tol: Optional[float] = None) -> bool:
    """True iff f is g-uniformly log-concave on the discrete support."""
    d2, ok3, phi = _log_curvature(f, g)
    band = np.full(d2.shape, tol) if tol is not None else _curv_tol(f, phi, ok3)
    return bool(np.all(d2[ok3] >= -band[ok3]))


def semilogconvexity_check(f: GridDensity, h: float, tol: Optional[float] = None) -> bool:
    """True iff f is h-semi log-convex on the discrete support."""
    d2, ok3, phi = _log_curvature(f, h)
    band = np.full(d2.shape, tol) if tol is not None else _curv_tol(f, phi, ok3)
    return bool(np.all(d2[ok3] <= band[ok3]))


@dataclass(frozen=True)
class FradeliziResult:
    ok: bool
    location: Optional[float] = None  # grid position of the violation


def fradelizi_check(f: GridDensity, n: int = 1) -> FradeliziResult:
    """Checks f(0) <= max f <= e^n f(0) for a centered log-concave density."""
    if abs(f.barycenter) > 1e-6 * max(f.spread, 1e-12):
        raise NotCentered(f"barycenter {f.barycenter:.3e} too far from 0")
    if not logconcavity_check(f, 0.0):
        raise NotLogConcave("density is not log-concave on its support")
    f0 = f.value_at_zero()
    jmax = int(np.argmax(f.values))
    fmax = float(f.values[jmax])
    diffs = np.abs(np.diff(f.values))
    slack = float(diffs.max()) if diffs.size else 0.0
    if f0 > fmax + slack:
        return FradeliziResult(False, location=0.0)
    if fmax > math.exp(n) * f0 + slack:
        return FradeliziResult(False, location=float(f.x[jmax]))
    return FradeliziResult(True)


def _trim_to_window(xmin: float, dx: float, values: np.ndarray, half_width: float):
    """Symmetric trim of nodes beyond the window; returns (density, lost mass)."""
    n = values.size
    x = xmin + dx * np.arange(n)
    keep = np.abs(x) <= half_width + 1e-9 * dx
    idx = np.where(keep)[0]
    lost = float(values[~keep].sum() * dx)
    return GridDensity(float(x[idx[0]]), dx, values[idx]), lost


def ball_step(f: GridDensity) -> GridDensity:
    """One self-convolution step 2^{1/2} (f * f)(sqrt(2) x).

    The convolution is exact on the histogram; the rescale shrinks the
    spacing by sqrt(2) (no interpolation) and trims back to the original
    window.
    """
    conv = convolve_direct(f.values, f.values) * f.dx
    dx_new = f.dx / math.sqrt(2.0)
    xmin_new = 2.0 * f.xmin / math.sqrt(2.0)
    vals = math.sqrt(2.0) * conv
    half_width = max(abs(f.xmin), abs(f.xmin + f.dx * (f.n_points - 1)))
    out, lost = _trim_to_window(xmin_new, dx_new, vals, half_width)
    if lost > _ESCAPE_TOL * max(out.mass, 1e-300):
        raise GridTooSmall(f"{lost:.3e} mass left the window in a convolution step")
    return out


def discrete_bl_value(densities: List[GridDensity], datum: BLDatum) -> float:
    """Discrete BL functional for scalar maps on a shared 1-D grid."""
    if datum.big_n != 1 or any(b.shape != (1, 1) for b in datum.maps):
        raise InvalidInput("discrete functional supports scalar maps only")
    if len(densities) != datum.m:
        raise InvalidInput("need one density per map")
    f0 = densities[0]
    x = f0.x
    q = float(datum.q[0, 0])
    integrand = np.exp(q * x * x)
    log_norm = 0.0
    for f, b, c in zip(densities, datum.maps, datum.weights):
        scale = float(b[0, 0])
        if f.dx != f0.dx or f.xmin != f0.xmin or f.n_points != f0.n_points:
            fx = f.at(scale * x)
        elif scale == 1.0:
            fx = f.values
        else:
            fx = f.at(scale * x)
        integrand = integrand * np.power(np.maximum(fx, 0.0), c)
        log_norm += c * math.log(f.mass)
    return float(integrand.sum() * f0.dx / math.exp(log_norm))


@dataclass(frozen=True)
class FlowStep:
    k: int
    bl_value: float
    l1_to_gaussian: float
    mass: float
    barycenter: float

    def to_json(self) -> dict:
        return {
            "k": self.k,
            "bl_value": self.bl_value,
            "l1_to_gaussian": self.l1_to_gaussian,
            "mass": self.mass,
            "barycenter": self.barycenter,
        }


@dataclass(frozen=True)
class FlowReport:
    steps: List[FlowStep]
    densities: List[List[GridDensity]] = field(repr=False, default=None)

    def to_json(self) -> dict:
        return {"steps": [s.to_json() for s in self.steps]}

    def to_csv(self, path):
        rows = [
            (s.k, s.bl_value, s.l1_to_gaussian, s.mass, s.barycenter)
            for s in self.steps
        ]
        np.savetxt(
            path,
            np.asarray(rows),
            delimiter=",",
            header="k,bl_value,l1_to_gaussian,mass,barycenter",
            comments="",
        )

    def one_step_slacks(self, i_const: float) -> List[float]:
        """BL(k)^2 - i_const * BL(k+1) for consecutive steps."""
        vals = [s.bl_value for s in self.steps]
        return [vals[i] ** 2 - i_const * vals[i + 1] for i in range(len(vals) - 1)]


def ball_iterate(
    f1: GridDensity, f2: GridDensity, steps: int, datum: BLDatum
) -> FlowReport:
    """Iterate the rescaled self-convolution on both densities, recording
    the discrete functional and the L1 gap to the matching Gaussian."""
    if steps < 1:
        raise InvalidParameter("need at least one step")
    pair = [f1, f2]
    rows = []
    kept = []

    def record(k):
        bl = discrete_bl_value(pair, datum)
        l1 = max(clt_distance(p.normalized()) for p in pair)
        rows.append(FlowStep(k, bl, l1, pair[0].mass, pair[0].barycenter))
        kept.append(list(pair))

    record(0)
    for k in range(1, steps + 1):
        pair = [ball_step(p) for p in pair]
        record(k)
    return FlowReport(rows, kept)


def fokker_planck_step(f: GridDensity, beta: float, t: float) -> GridDensity:
    """One evaluation of the flow: Gaussian smoothing of the compressed
    density, f -> gamma_s * (e^t f(e^t .)) with s = beta (1 - e^{-2t})."""
    if not beta > 0:
        raise InvalidParameter("beta must be positive")
    if not t > 0:
        raise InvalidParameter("t must be positive")
    # compression by exact cell averages of the piecewise-linear cumulative
    edges, cum = f.cumulative_edges()
    scale = math.exp(t)
    half_width = max(abs(f.xmin), abs(f.xmin + f.dx * (f.n_points - 1)))
    new_edges = edges * 1.0  # same grid
    upper = np.interp(np.clip(scale * new_edges[1:], edges[0], edges[-1]), edges, cum)
    lower = np.interp(np.clip(scale * new_edges[:-1], edges[0], edges[-1]), edges, cum)
    compressed = (upper - lower) / f.dx
    compressed = np.clip(compressed, 0.0, None)
    s = beta * (1.0 - math.exp(-2.0 * t))
    # a wide kernel keeps the Gaussian-mixture structure (and with it the
    # semi log-convexity of the output) intact well below the tail floor
    radius = max(int(math.ceil(12.0 * math.sqrt(s) / f.dx)), 1)
    off = f.dx * np.arange(-radius, radius + 1)
    kernel = np.exp(-0.5 * off * off / s)
    kernel = kernel / (kernel.sum() * f.dx)
    vals = convolve_direct(compressed, kernel) * f.dx
    xmin_new = f.xmin - radius * f.dx
    out, lost = _trim_to_window(xmin_new, f.dx, vals, half_width)
    if lost > _ESCAPE_TOL * max(out.mass, 1e-300):
        raise GridTooSmall("mass escaped the window under the flow")
    return out


def truncate_recenter(f: GridDensity, radius: float, eps: float) -> GridDensity:
    """Truncate to [-radius, radius], recenter, and dilate by 1/(1+eps).

    Output is h((1+eps) x + xi) with h the truncation and xi chosen so the
    result is centered; a short fixed-point loop absorbs interpolation bias.
    """
    if not radius > 0 or not eps >= 0:
        raise InvalidParameter("radius must be positive and eps nonnegative")
    mask = np.abs(f.x) <= radius + 1e-9 * f.dx
    h_vals = np.where(mask, f.values, 0.0)
    if h_vals.sum() <= 0.0:
        raise EmptyDensity("nothing remains inside the truncation radius")
    h = GridDensity(f.xmin, f.dx, h_vals)
    xi = h.barycenter
    out = None
    for _ in range(8):
        vals = h.at((1.0 + eps) * f.x + xi)
        out = GridDensity(f.xmin, f.dx, np.clip(vals, 0.0, None))
        b = out.barycenter
        if abs(b) <= 1e-9 * max(out.spread, 1e-12):
            break
        xi += (1.0 + eps) * b
    return out


def clt_distance(f: GridDensity) -> float:
    """L1 distance to the Gaussian with f's grid mean and variance."""
    g = f.normalized()
    m, v = g.barycenter, g.variance
    gauss = np.exp(-0.5 * (g.x - m) ** 2 / v) / math.sqrt(2.0 * math.pi * v)
    return float(np.abs(g.values - gauss).sum() * g.dx)


def center_by_shift(fn, half_width: float, points: int, bracket: float = 4.0) -> GridDensity:
    """Sample x -> fn(x + shift) with the shift bisected until the grid
    barycenter vanishes; every trial samples the unshifted map exactly, so
    properties such as log-concavity survive the centering."""
    x = np.linspace(-half_width, half_width, points)
    dx = x[1] - x[0]

    def density(shift):
        return np.clip(np.asarray([float(fn(t + shift)) for t in x]), 0.0, None)

    def bary(shift):
        v = density(shift)
        s = v.sum()
        if s <= 0:
            raise EmptyDensity("candidate shift empties the grid")
        return float((x * v).sum() / s)

    lo, hi = -bracket, bracket
    b_lo, b_hi = bary(lo), bary(hi)
    if not (min(b_lo, b_hi) < 0 < max(b_lo, b_hi)):
        raise NoConvergence("centering bracket does not straddle zero")
    if b_lo > b_hi:
        lo, hi = hi, lo
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if bary(mid) < 0:
            lo = mid
        else:
            hi = mid
    return GridDensity(-half_width, dx, density(0.5 * (lo + hi)))


def random_centered_logconcave(
    rng: np.random.Generator,
    half_width: float = 8.0,
    points: int = 2049,
) -> GridDensity:
    """Random centered log-concave density on a symmetric grid.

    Uses an asymmetric piecewise-quadratic potential (C^1, convex) whose
    shift is tuned by bisection until the grid barycenter vanishes, so the
    sampled values are exactly log-concave at every trial.
    """
    c_plus = rng.uniform(0.5, 4.0)
    c_minus = rng.uniform(0.5, 4.0)
    slope = rng.uniform(0.0, 1.5)
    x = np.linspace(-half_width, half_width, points)
    dx = x[1] - x[0]

    def density(shift):
        z = x + shift
        phi = np.where(z >= 0, c_plus * z * z, c_minus * z * z) + slope * np.abs(z)
        return np.exp(-phi)

    def bary(shift):
        v = density(shift)
        return float((x * v).sum() / v.sum())

    lo, hi = -4.0, 4.0
    b_lo, b_hi = bary(lo), bary(hi)
    if not (b_lo > 0 > b_hi or b_hi > 0 > b_lo):
        raise NoConvergence("centering bracket failed")
    if b_lo > b_hi:
        lo, hi = hi, lo
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if bary(mid) < 0:
            lo = mid
        else:
            hi = mid
    out = GridDensity(-half_width, dx, density(0.5 * (lo + hi)))
    return out.normalized()


@dataclass(frozen=True)
class Grid2Density:
    """Tensor-grid density on a square window (2-D histogram reading)."""

    xmin: float
    dx: float
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise InvalidInput("need a square 2-D value array")
        if v.shape[0] > 513:
            raise InvalidInput("2-D grids are limited to 513 points per axis")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise InvalidInput("values must be finite and nonnegative")
        if float(v.sum()) * self.dx**2 <= 0.0:
            raise EmptyDensity("density carries no mass")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def x(self) -> np.ndarray:
        return self.xmin + self.dx * np.arange(self.values.shape[0])

    @property
    def mass(self) -> float:
        return float(self.values.sum() * self.dx**2)

    @classmethod
    def from_function(cls, f, half_width: float, points: int) -> "Grid2Density":
        x = np.linspace(-half_width, half_width, points)
        xx, yy = np.meshgrid(x, x, indexing="ij")
        vals = np.clip(f(xx, yy), 0.0, None)
        return cls(-half_width, x[1] - x[0], vals)


def discrete_bl_value_2d(densities: List[Grid2Density], datum: BLDatum) -> float:
    """Discrete BL functional for identity maps on a shared 2-D grid."""
    if datum.big_n != 2:
        raise InvalidInput("expected a 2-D datum")
    f0 = densities[0]
    x = f0.x
    xx, yy = np.meshgrid(x, x, indexing="ij")
    q = datum.q.array
    form = q[0, 0] * xx * xx + 2.0 * q[0, 1] * xx * yy + q[1, 1] * yy * yy
    integrand = np.exp(form)
    log_norm = 0.0
    for f, b, c in zip(densities, datum.maps, datum.weights):
        if not np.allclose(b, np.eye(2)):
            raise InvalidInput("2-D functional supports identity maps only")
        integrand = integrand * np.power(f.values, c)
        log_norm += c * math.log(f.mass)
    return float(integrand.sum() * f0.dx**2 / math.exp(log_norm))
