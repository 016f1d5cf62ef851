"""p-stable projection hashing with a sample-size dependent bucket width.

A single hash is ``h(x) = floor((<a, x> + b) / w)`` where ``a`` has iid
entries from a standard stable law (Gaussian for the l2 norm, Cauchy for
l1) and ``b`` is uniform on ``[0, w)``. Concatenating ``m`` of them gives the
bucket key used by the classifier.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import integrate

from .instrument import EvalCounter

BucketKey = tuple[int, ...]

QUAD_ABS_TOL = 1e-9

# Past this point the folded normal density underflows to zero.
_GAUSS_CUTOFF = 40.0


class FamilyKind(enum.Enum):
    """Which stable law the projections are drawn from."""

    GAUSSIAN = 2
    CAUCHY = 1

    @property
    def p(self) -> int:
        return self.value

    @classmethod
    def parse(cls, value: "FamilyKind | str | int") -> "FamilyKind":
        if isinstance(value, cls):
            return value
        if isinstance(value, str):
            try:
                return cls[value.upper()]
            except KeyError:
                raise ValueError(f"unknown stable family {value!r}") from None
        for kind in cls:
            if kind.value == value:
                return kind
        raise ValueError(f"unsupported norm exponent p={value!r}; only 1 and 2")

    def abs_density(self, t):
        """Density of ``|X|`` for a standard stable ``X``."""
        t = np.asarray(t, dtype=float)
        if self is FamilyKind.GAUSSIAN:
            return (2.0 / math.sqrt(2.0 * math.pi)) * np.exp(-0.5 * t * t)
        return (2.0 / math.pi) / (1.0 + t * t)


# The separation factor c. For the Cauchy family c=3 gives p1**2 < p2, so the
# smallest integer that keeps p1**2 > p2 is used instead.
DEFAULT_SEPARATION = {FamilyKind.GAUSSIAN: 3.0, FamilyKind.CAUCHY: 5.0}


@dataclass(frozen=True)
class SensitivityParams:
    radius: float
    separation_factor: float
    p1: float
    p2: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        if not self.separation_factor > 1:
            raise ValueError("separation factor c must exceed 1")
        if not (0 < self.p2 < self.p1 < 1):
            raise ValueError(f"need 0 < p2 < p1 < 1, got p1={self.p1}, p2={self.p2}")

    @property
    def satisfies_s1(self) -> bool:
        return self.p1 * self.p1 > self.p2


def width_schedule(n: int, d: int) -> float:
    """Bucket width for a sample of size ``n`` in dimension ``d``.

    ``w = (1.6 * d**((d+2)/2) / n**((d+1)/(2d+6))) ** (1/(d+1))``. The same
    value is used as the sensitivity radius ``r_n``.
    """
    if int(n) != n or n < 1:
        raise ValueError(f"sample size must be a positive integer, got {n!r}")
    if int(d) != d or d < 1:
        raise ValueError(f"dimension must be a positive integer, got {d!r}")
    n = int(n)
    d = int(d)
    numer = 1.6 * d ** ((d + 2) / 2)
    denom = n ** ((d + 1) / (2 * d + 6))
    return (numer / denom) ** (1.0 / (d + 1))


def _breakpoints(upper: float, kind: FamilyKind) -> list[float]:
    if kind is FamilyKind.GAUSSIAN:
        upper = min(upper, _GAUSS_CUTOFF)
        return [0.0, min(upper, 1.0), upper] if upper > 1.0 else [0.0, upper]
    # Cauchy has a heavy tail: integrate over geometric panels.
    pts = [0.0]
    edge = 1.0
    while edge < upper:
        pts.append(edge)
        edge *= 10.0
    pts.append(upper)
    return pts


def collision_probability(z: float, w: float, kind: FamilyKind | str = FamilyKind.GAUSSIAN) -> float:
    """Probability that two points at ``l_p`` distance ``z`` share one hash.

    Evaluates ``int_0^{w/z} phi(t) (1 - t z / w) dt`` with adaptive
    Gauss-Kronrod quadrature, where ``phi`` is the density of the absolute
    value of the stable law.
    """
    kind = FamilyKind.parse(kind)
    if not z > 0:
        raise ValueError(f"distance must be positive, got {z!r}")
    if not w > 0:
        raise ValueError(f"width must be positive, got {w!r}")
    upper = w / z
    if not math.isfinite(upper):
        return 1.0

    def integrand(t):
        return float(kind.abs_density(t)) * (1.0 - t / upper)

    pts = _breakpoints(upper, kind)
    total = 0.0
    for lo, hi in zip(pts[:-1], pts[1:]):
        if hi <= lo:
            continue
        val, _ = integrate.quad(integrand, lo, hi, epsabs=QUAD_ABS_TOL / len(pts), epsrel=1e-12, limit=200)
        total += val
    return min(1.0, max(0.0, total))


def sensitivity_for(
    n: int,
    d: int,
    kind: FamilyKind | str = FamilyKind.GAUSSIAN,
    c: float | None = None,
) -> SensitivityParams:
    """Sensitivity constants of the family built for ``n`` points in ``d`` dims.

    Raises ``ValueError`` if the resulting family fails ``p1**2 > p2``.
    """
    kind = FamilyKind.parse(kind)
    if c is None:
        c = DEFAULT_SEPARATION[kind]
    r = width_schedule(n, d)
    p1 = collision_probability(r, r, kind)
    p2 = collision_probability(c * r, r, kind)
    params = SensitivityParams(radius=r, separation_factor=float(c), p1=p1, p2=p2)
    if not params.satisfies_s1:
        raise ValueError(
            f"{kind.name.lower()} family with c={c} violates p1^2 > p2 "
            f"(p1^2={p1 * p1:.6f}, p2={p2:.6f}); increase c"
        )
    return params


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


def _project(projections: np.ndarray, X: np.ndarray) -> np.ndarray:
    # Fixed coordinate order so that a point hashes identically whether it is
    # evaluated alone or inside a batch.
    acc = np.zeros((X.shape[0], projections.shape[0]))
    for j in range(X.shape[1]):
        acc += X[:, j : j + 1] * projections[:, j]
    return acc


@dataclass(frozen=True, eq=False)
class StableHashFunction:
    projection: np.ndarray
    offset: float
    width: float

    def __post_init__(self):
        object.__setattr__(self, "projection", _readonly(self.projection))
        if self.projection.ndim != 1 or self.projection.size == 0:
            raise ValueError("projection must be a non-empty vector")
        if not np.all(np.isfinite(self.projection)):
            raise ValueError("projection entries must be finite")
        if not self.width > 0:
            raise ValueError("width must be positive")
        if not 0 <= self.offset < self.width:
            raise ValueError(f"offset {self.offset} outside [0, {self.width})")

    @property
    def d(self) -> int:
        return self.projection.size

    def __call__(self, x) -> int:
        return hash_point(self, x)


def sample_hash(kind: FamilyKind | str, d: int, w: float, rng: np.random.Generator) -> StableHashFunction:
    """Draw one hash function. Deterministic given the generator state."""
    kind = FamilyKind.parse(kind)
    if d < 1:
        raise ValueError("dimension must be >= 1")
    if not w > 0:
        raise ValueError("width must be positive")
    if kind is FamilyKind.GAUSSIAN:
        projection = rng.standard_normal(d)
    else:
        # inverse CDF of the standard Cauchy
        projection = np.tan(math.pi * (rng.random(d) - 0.5))
    offset = rng.random() * w
    if offset >= w:
        offset = math.nextafter(w, 0.0)
    return StableHashFunction(projection=projection, offset=float(offset), width=float(w))


def _as_points(x, d: int) -> np.ndarray:
    X = np.asarray(x, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != d:
        raise ValueError(f"expected points of dimension {d}, got shape {np.shape(x)}")
    return X


def hash_point(h: StableHashFunction, x) -> int:
    X = _as_points(x, h.d)
    if X.shape[0] != 1:
        raise ValueError("hash_point takes a single point")
    acc = _project(h.projection[None, :], X)
    return int(np.floor((acc[0, 0] + h.offset) / h.width))


@dataclass(frozen=True, eq=False)
class CompositeHash:
    """Concatenation of ``m`` stable hashes sharing one width."""

    projections: np.ndarray
    offsets: np.ndarray
    width: float
    kind: FamilyKind = FamilyKind.GAUSSIAN

    def __post_init__(self):
        object.__setattr__(self, "projections", _readonly(self.projections))
        object.__setattr__(self, "offsets", _readonly(self.offsets))
        if self.projections.ndim != 2 or self.projections.shape[0] == 0:
            raise ValueError("need at least one projection row")
        if self.offsets.shape != (self.projections.shape[0],):
            raise ValueError("one offset per projection required")
        if not self.width > 0:
            raise ValueError("width must be positive")
        if np.any(self.offsets < 0) or np.any(self.offsets >= self.width):
            raise ValueError("offsets must lie in [0, width)")

    @classmethod
    def from_functions(cls, functions: Sequence[StableHashFunction], kind: FamilyKind = FamilyKind.GAUSSIAN):
        if not functions:
            raise ValueError("need at least one hash function")
        widths = {h.width for h in functions}
        dims = {h.d for h in functions}
        if len(widths) != 1 or len(dims) != 1:
            raise ValueError("member hashes must share width and dimension")
        return cls(
            projections=np.stack([h.projection for h in functions]),
            offsets=np.array([h.offset for h in functions]),
            width=functions[0].width,
            kind=FamilyKind.parse(kind),
        )

    @property
    def m(self) -> int:
        return self.projections.shape[0]

    @property
    def d(self) -> int:
        return self.projections.shape[1]

    @property
    def functions(self) -> list[StableHashFunction]:
        return [StableHashFunction(a, float(b), self.width) for a, b in zip(self.projections, self.offsets)]

    def codes(self, X, counter: EvalCounter | None = None) -> np.ndarray:
        """Integer codes of shape ``(n, m)`` for a batch of points."""
        X = _as_points(X, self.d)
        acc = _project(self.projections, X)
        codes = np.floor((acc + self.offsets) / self.width)
        if counter is not None:
            counter.hash_evals += X.shape[0] * self.m
            counter.multiply_adds += X.shape[0] * self.m * self.d
        return codes.astype(np.int64)

    def key(self, x, counter: EvalCounter | None = None) -> BucketKey:
        codes = self.codes(x, counter)
        if codes.shape[0] != 1:
            raise ValueError("key takes a single point")
        return tuple(int(v) for v in codes[0])


def sample_composite(
    kind: FamilyKind | str, d: int, w: float, m: int, rng: np.random.Generator
) -> CompositeHash:
    """Draw ``m`` independent hashes and concatenate them."""
    kind = FamilyKind.parse(kind)
    if m < 1:
        raise ValueError("m must be >= 1")
    return CompositeHash.from_functions([sample_hash(kind, d, w, rng) for _ in range(m)], kind)


def composite_hash(g: CompositeHash, x) -> BucketKey:
    return g.key(x)
