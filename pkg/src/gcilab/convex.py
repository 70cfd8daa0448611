"""Convex-set descriptions with exact membership oracles.

Every set variant answers membership exactly; all downstream estimators
consume only the membership oracle (no vertex or facet enumeration).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List

import numpy as np

from .errors import (
    DimensionError,
    InvalidInput,
    InvalidMatrix,
    InvalidTolerance,
    NotPositiveDefinite,
    OriginNotInterior,
)
from .symmat import Subspace, SymMatrix

__all__ = [
    "ConvexSet",
    "Polytope",
    "Ellipsoid",
    "Slab",
    "Product",
    "Intersection",
    "Translate",
    "FullSpace",
    "contains",
    "contains_batch",
    "minkowski_gauge",
    "translate",
    "intersect",
    "product_set",
    "set_to_json",
    "set_from_json",
]

_GAUGE_CAP = float(2**40)


class ConvexSet:
    """Base class for the tagged set variants."""

    dim: int

    def member_batch(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def member(self, x: np.ndarray) -> bool:
        return bool(self.member_batch(np.asarray(x, dtype=np.float64)[None, :])[0])


def _as_points(x, dim: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != dim:
        raise DimensionError(f"expected points of dimension {dim}, got shape {x.shape}")
    return x


@dataclass(frozen=True)
class Polytope(ConvexSet):
    """{x : <a_j, x> <= b_j for every row j}."""

    normals: np.ndarray
    offsets: np.ndarray

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.normals, dtype=np.float64))
        b = np.atleast_1d(np.asarray(self.offsets, dtype=np.float64))
        if a.shape[0] != b.shape[0]:
            raise InvalidInput("normals and offsets must have equal length")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise InvalidInput("polytope data must be finite")
        object.__setattr__(self, "normals", a)
        object.__setattr__(self, "offsets", b)

    @property
    def dim(self) -> int:
        return self.normals.shape[1]

    def member_batch(self, x: np.ndarray) -> np.ndarray:
        x = _as_points(x, self.dim)
        return np.all(x @ self.normals.T <= self.offsets, axis=1)

    @classmethod
    def box(cls, lo, hi) -> "Polytope":
        """Axis-aligned box prod [lo_i, hi_i]."""
        lo = np.atleast_1d(np.asarray(lo, dtype=np.float64))
        hi = np.atleast_1d(np.asarray(hi, dtype=np.float64))
        n = lo.shape[0]
        eye = np.eye(n)
        return cls(np.vstack([eye, -eye]), np.concatenate([hi, -lo]))


@dataclass(frozen=True)
class Ellipsoid(ConvexSet):
    """{x : <x - c, S^{-1}(x - c)> <= 1} for positive definite shape S."""

    center: np.ndarray
    shape: SymMatrix
    _chol: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.center, dtype=np.float64))
        if c.shape[0] != self.shape.n:
            raise DimensionError("center and shape dimensions disagree")
        try:
            chol = np.linalg.cholesky(self.shape.array)
        except np.linalg.LinAlgError:
            raise NotPositiveDefinite("ellipsoid shape must be positive definite")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "_chol", chol)

    @property
    def dim(self) -> int:
        return self.shape.n

    def member_batch(self, x: np.ndarray) -> np.ndarray:
        x = _as_points(x, self.dim)
        y = np.linalg.solve(self._chol, (x - self.center).T)
        return np.einsum("ij,ij->j", y, y) <= 1.0

    @classmethod
    def ball(cls, dim: int, radius: float = 1.0, center=None) -> "Ellipsoid":
        if center is None:
            center = np.zeros(dim)
        return cls(center, SymMatrix(np.eye(dim) * radius**2))


@dataclass(frozen=True)
class Slab(ConvexSet):
    """{x : lo <= <u, x> <= hi} for a unit vector u."""

    u: np.ndarray
    lo: float
    hi: float

    def __post_init__(self):
        u = np.atleast_1d(np.asarray(self.u, dtype=np.float64))
        if not self.lo < self.hi:
            raise InvalidInput(f"slab needs lo < hi, got [{self.lo}, {self.hi}]")
        if abs(np.linalg.norm(u) - 1.0) > 1e-12:
            raise InvalidInput("slab direction must be a unit vector")
        object.__setattr__(self, "u", u)

    @property
    def dim(self) -> int:
        return self.u.shape[0]

    def member_batch(self, x: np.ndarray) -> np.ndarray:
        x = _as_points(x, self.dim)
        t = x @ self.u
        return (self.lo <= t) & (t <= self.hi)


@dataclass(frozen=True)
class Product(ConvexSet):
    """base x E: base lives on the orthocomplement of the free subspace E."""

    base: ConvexSet
    free: Subspace
    base_basis: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.base.dim + self.free.dim != self.free.ambient_dim:
            raise DimensionError("base dimension + free dimension must equal ambient")
        object.__setattr__(self, "base_basis", self.free.complement().basis)

    @property
    def dim(self) -> int:
        return self.free.ambient_dim

    def member_batch(self, x: np.ndarray) -> np.ndarray:
        x = _as_points(x, self.dim)
        if self.base.dim == 0:
            return np.ones(x.shape[0], dtype=bool)
        return self.base.member_batch(x @ self.base_basis)


@dataclass(frozen=True)
class Intersection(ConvexSet):
    parts: List[ConvexSet]

    def __post_init__(self):
        parts = list(self.parts)
        if not parts:
            raise InvalidInput("intersection needs at least one part")
        dims = {p.dim for p in parts}
        if len(dims) != 1:
            raise DimensionError(f"mixed ambient dimensions {sorted(dims)}")
        object.__setattr__(self, "parts", parts)

    @property
    def dim(self) -> int:
        return self.parts[0].dim

    def member_batch(self, x: np.ndarray) -> np.ndarray:
        x = _as_points(x, self.dim)
        out = self.parts[0].member_batch(x)
        for p in self.parts[1:]:
            if not out.any():
                break
            out = out & p.member_batch(x)
        return out


@dataclass(frozen=True)
class Translate(ConvexSet):
    inner: ConvexSet
    shift: np.ndarray

    def __post_init__(self):
        s = np.atleast_1d(np.asarray(self.shift, dtype=np.float64))
        if s.shape[0] != self.inner.dim:
            raise DimensionError("shift dimension disagrees with the set")
        object.__setattr__(self, "shift", s)

    @property
    def dim(self) -> int:
        return self.inner.dim

    def member_batch(self, x: np.ndarray) -> np.ndarray:
        x = _as_points(x, self.dim)
        return self.inner.member_batch(x - self.shift)


@dataclass(frozen=True)
class FullSpace(ConvexSet):
    dim: int

    def member_batch(self, x: np.ndarray) -> np.ndarray:
        x = _as_points(x, self.dim)
        return np.ones(x.shape[0], dtype=bool)


def contains(k: ConvexSet, x) -> bool:
    """Exact membership predicate."""
    return k.member(x)


def contains_batch(k: ConvexSet, x) -> np.ndarray:
    """Vectorized membership for an (m, dim) array of points."""
    return k.member_batch(np.asarray(x, dtype=np.float64))


def _origin_interior(k: ConvexSet, radius: float = 1e-6) -> bool:
    n = k.dim
    probes = np.vstack([np.zeros((1, n)), radius * np.eye(n), -radius * np.eye(n)])
    return bool(np.all(k.member_batch(probes)))


def minkowski_gauge(k: ConvexSet, x, tol: float = 1e-9) -> float:
    """inf { r > 0 : x in r K }, by bisection on the membership oracle.

    Returns 0 for the origin and for recession directions (x in rK for
    arbitrarily small r never fails up to the bracket floor).
    """
    if not tol > 0:
        raise InvalidTolerance(f"tol must be positive, got {tol}")
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    if x.shape[0] != k.dim:
        raise DimensionError("point dimension disagrees with the set")
    if not _origin_interior(k):
        raise OriginNotInterior("gauge needs the origin in the interior")
    if not np.any(x):
        return 0.0

    def inside(r: float) -> bool:
        return k.member(x / r)

    hi = 1.0
    while not inside(hi):
        hi *= 2.0
        if hi > _GAUGE_CAP:
            raise OriginNotInterior("point not absorbed within the bracket cap")
    lo = hi / 2.0
    while inside(lo):
        hi = lo
        lo /= 2.0
        if hi <= tol:
            return 0.0  # recession direction
    while hi - lo > tol * max(1.0, hi):
        mid = 0.5 * (lo + hi)
        if inside(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def translate(k: ConvexSet, a) -> ConvexSet:
    """Shifted copy: membership at x equals original membership at x - a."""
    a = np.atleast_1d(np.asarray(a, dtype=np.float64))
    if isinstance(k, Translate):
        return Translate(k.inner, k.shift + a)
    return Translate(k, a)


def intersect(k1: ConvexSet, k2: ConvexSet) -> ConvexSet:
    if k1.dim != k2.dim:
        raise DimensionError("cannot intersect sets of different dimension")
    parts = []
    for k in (k1, k2):
        parts.extend(k.parts if isinstance(k, Intersection) else [k])
    return Intersection(parts)


def product_set(base: ConvexSet, e: Subspace) -> ConvexSet:
    """base x E with base living on the orthocomplement of E."""
    return Product(base, e)


def set_to_json(k: ConvexSet) -> dict:
    if isinstance(k, Polytope):
        return {
            "type": "polytope",
            "normals": k.normals.tolist(),
            "offsets": k.offsets.tolist(),
        }
    if isinstance(k, Ellipsoid):
        return {
            "type": "ellipsoid",
            "center": k.center.tolist(),
            "shape": k.shape.to_json(),
        }
    if isinstance(k, Slab):
        return {"type": "slab", "u": k.u.tolist(), "lo": k.lo, "hi": k.hi}
    if isinstance(k, Product):
        return {
            "type": "product",
            "base": set_to_json(k.base),
            "free": k.free.to_json(),
        }
    if isinstance(k, Intersection):
        return {"type": "intersection", "parts": [set_to_json(p) for p in k.parts]}
    if isinstance(k, Translate):
        return {
            "type": "translate",
            "inner": set_to_json(k.inner),
            "shift": k.shift.tolist(),
        }
    if isinstance(k, FullSpace):
        return {"type": "fullspace", "dim": k.dim}
    raise InvalidInput(f"unknown set variant {type(k).__name__}")


def set_from_json(obj: dict) -> ConvexSet:
    kind = obj.get("type")
    if kind == "polytope":
        return Polytope(np.asarray(obj["normals"]), np.asarray(obj["offsets"]))
    if kind == "ellipsoid":
        return Ellipsoid(np.asarray(obj["center"]), SymMatrix.from_json(obj["shape"]))
    if kind == "slab":
        return Slab(np.asarray(obj["u"]), float(obj["lo"]), float(obj["hi"]))
    if kind == "product":
        return Product(set_from_json(obj["base"]), Subspace.from_json(obj["free"]))
    if kind == "intersection":
        return Intersection([set_from_json(p) for p in obj["parts"]])
    if kind == "translate":
        return Translate(set_from_json(obj["inner"]), np.asarray(obj["shift"]))
    if kind == "fullspace":
        return FullSpace(int(obj["dim"]))
    raise InvalidInput(f"unknown set type tag {kind!r}")
