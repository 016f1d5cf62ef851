"""k-missing mass of an iid sample from a finite discrete distribution.

For counts ``c_j`` of each atom in ``n`` draws, the k-missing mass is
``U = sum_j p_j * [c_j < k]``. Its expectation is
``sum_j p_j * P(Bin(n, p_j) <= k - 1)``, evaluated here with a binomial CDF
built from saddle-point log-pmf terms (Loader's method), so no incomplete
beta function is needed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

EXPECTATION_CONSTANT = 1.6
CONCENTRATION_CONSTANT = 0.09

_LN_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
_LN_2PI = math.log(2.0 * math.pi)
# stirlerr(k) for k = 0..15 from lgamma; past that the asymptotic series is exact to rounding
_STIRLERR_SMALL = np.array(
    [0.0] + [math.lgamma(k + 1.0) - (k + 0.5) * math.log(k) + k - _LN_SQRT_2PI for k in range(1, 16)]
)


def _stirlerr(k: np.ndarray) -> np.ndarray:
    """``ln k! - ((k + 1/2) ln k - k + ln sqrt(2 pi))`` for integer ``k >= 1``."""
    k = np.asarray(k, dtype=float)
    out = np.empty_like(k)
    small = k <= 15
    out[small] = _STIRLERR_SMALL[k[small].astype(np.int64)]
    kk = k[~small]
    if kk.size:
        nn = kk * kk
        s0, s1, s2, s3, s4 = 1 / 12, 1 / 360, 1 / 1260, 1 / 1680, 1 / 1188
        big = np.where(
            kk > 500,
            (s0 - s1 / nn) / kk,
            np.where(
                kk > 80,
                (s0 - (s1 - s2 / nn) / nn) / kk,
                np.where(
                    kk > 35,
                    (s0 - (s1 - (s2 - s3 / nn) / nn) / nn) / kk,
                    (s0 - (s1 - (s2 - (s3 - s4 / nn) / nn) / nn) / nn) / kk,
                ),
            ),
        )
        out[~small] = big
    return out


def _bd0(x: np.ndarray, np_: np.ndarray) -> np.ndarray:
    """Deviance term ``x ln(x / np) + np - x`` without cancellation."""
    x, np_ = np.broadcast_arrays(np.asarray(x, float), np.asarray(np_, float))
    out = np.empty(x.shape)
    near = np.abs(x - np_) < 0.1 * (x + np_)
    xs, ms = x[near], np_[near]
    if xs.size:
        v = (xs - ms) / (xs + ms)
        s = (xs - ms) * v
        ej = 2 * xs * v
        v2 = v * v
        # |v| < 0.1 so v2**j < 1e-2j; 10 terms reach double precision
        for j in range(1, 11):
            ej = ej * v2
            s = s + ej / (2 * j + 1)
        out[near] = s
    xf, mf = x[~near], np_[~near]
    out[~near] = xf * np.log(xf / mf) + mf - xf
    return out


def binom_logpmf_table(n: int, probs) -> np.ndarray:
    """``L[j, x] = ln P(Bin(n, probs[j]) = x)`` for ``x = 0..n``."""
    p = np.atleast_1d(np.asarray(probs, dtype=float))[:, None]
    q = 1.0 - p
    x = np.arange(n + 1, dtype=float)[None, :]
    out = np.full((p.shape[0], n + 1), -np.inf)
    live = ((p > 0) & (q > 0))[:, 0]
    out[(p == 0)[:, 0], 0] = 0.0
    out[(q == 0)[:, 0], n] = 0.0
    if not np.any(live):
        return out
    pl, ql = p[live], q[live]
    rows = out[live]
    if n > 1:
        xm = x[:, 1:n]
        lc = (
            _stirlerr(np.array([float(n)]))[0]
            - _stirlerr(xm)
            - _stirlerr(n - xm)
            - _bd0(xm, n * pl)
            - _bd0(n - xm, n * ql)
        )
        lf = _LN_2PI + np.log(xm) + np.log1p(-xm / n)
        rows[:, 1:n] = lc - 0.5 * lf
    nn = np.full(pl.shape, float(n))
    rows[:, :1] = np.where(pl < 0.1, -_bd0(nn, n * ql) - n * pl, n * np.log1p(-pl))
    rows[:, n:] = np.where(ql < 0.1, -_bd0(nn, n * pl) - n * ql, n * np.log(pl))
    out[live] = rows
    return out


def binom_logpmf(x, n: int, p: float) -> np.ndarray:
    """Log of ``P(Bin(n, p) = x)`` for integer ``x`` (array) in ``[0, n]``."""
    x = np.atleast_1d(np.asarray(x, dtype=np.int64))
    return binom_logpmf_table(n, [p])[0, x]


def binom_cdf_table(n: int, probs) -> np.ndarray:
    """``F[j, x] = P(Bin(n, probs[j]) <= x)`` for ``x = 0..n``.

    Terms below the mode are accumulated upward from ``x = 0`` and the upper
    tail is accumulated downward from ``x = n``, so each running sum adds the
    smallest terms first.
    """
    probs = np.atleast_1d(np.asarray(probs, dtype=float))
    pmf = np.exp(binom_logpmf_table(n, probs))
    lower = np.cumsum(pmf, axis=1)
    # above[:, x] = P(X > x), accumulated from x = n downward
    above = np.zeros_like(pmf)
    above[:, :-1] = np.cumsum(pmf[:, :0:-1], axis=1)[:, ::-1]
    mode = np.minimum(n, np.floor((n + 1) * probs))[:, None]
    x = np.arange(n + 1)[None, :]
    return np.clip(np.where(x < mode, lower, 1.0 - above), 0.0, 1.0)


def binom_cdf(k: int, n: int, p: float) -> float:
    """``P(Bin(n, p) <= k)``."""
    if k < 0:
        return 0.0
    if k >= n:
        return 1.0
    return float(binom_cdf_table(n, [p])[0, k])


@dataclass(frozen=True, eq=False)
class DiscreteDistribution:
    probs: np.ndarray

    def __post_init__(self):
        p = np.array(self.probs, dtype=float)
        if p.ndim != 1 or p.size == 0:
            raise ValueError("need a non-empty probability vector")
        if np.any(p < 0) or not np.all(np.isfinite(p)):
            raise ValueError("probabilities must be finite and non-negative")
        if abs(p.sum() - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {p.sum()!r}, not 1")
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @classmethod
    def uniform(cls, t: int) -> "DiscreteDistribution":
        return cls(np.full(t, 1.0 / t))

    @classmethod
    def random(cls, t: int, rng: np.random.Generator) -> "DiscreteDistribution":
        """Dirichlet(1) weights over ``t`` atoms, renormalised exactly."""
        w = rng.dirichlet(np.ones(t))
        return cls(w / math.fsum(w))

    @property
    def atoms(self) -> int:
        return self.probs.size

    @property
    def support_size(self) -> int:
        return int(np.count_nonzero(self.probs > 0))


@dataclass(frozen=True, eq=False)
class MissingMassSample:
    counts: np.ndarray
    n: int

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64)
        if np.any(c < 0) or int(c.sum()) != self.n:
            raise ValueError("counts must be non-negative and sum to n")
        object.__setattr__(self, "counts", c)


def draw_sample(dist: DiscreteDistribution, n: int, rng: np.random.Generator) -> MissingMassSample:
    return MissingMassSample(rng.multinomial(n, dist.probs), n)


def _check_k(n: int, k: int) -> None:
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 1 <= k <= n:
        raise ValueError(f"k={k} outside [1, n={n}]")


def realized_missing_mass(dist: DiscreteDistribution, sample: MissingMassSample, k: int) -> float:
    _check_k(sample.n, k)
    if sample.counts.shape != dist.probs.shape:
        raise ValueError("counts and probabilities differ in length")
    return min(1.0, math.fsum(dist.probs[sample.counts < k]))


def expected_missing_mass_all_k(dist: DiscreteDistribution, n: int) -> np.ndarray:
    """``E[U_n^(k)]`` for every ``k = 1..n`` (entry ``k - 1``)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    p = dist.probs[dist.probs > 0]
    cdf = binom_cdf_table(n, p)[:, :n]  # column k-1 -> P(Bin <= k-1)
    return np.clip(p @ cdf, 0.0, 1.0)


def exact_expected_missing_mass(dist: DiscreteDistribution, n: int, k: int) -> float:
    _check_k(n, k)
    p = dist.probs[dist.probs > 0]
    cdf = binom_cdf_table(n, p)[:, k - 1]
    return min(1.0, math.fsum(p * cdf))


@dataclass(frozen=True)
class ExpectationCheck:
    lhs: float
    rhs: float

    @property
    def holds(self) -> bool:
        return self.lhs < self.rhs


def expectation_bound(dist: DiscreteDistribution, n: int, k: int, constant: float = EXPECTATION_CONSTANT) -> float:
    return constant * dist.support_size * k / n


def check_expectation_bound(
    dist: DiscreteDistribution, n: int, k: int, constant: float = EXPECTATION_CONSTANT
) -> ExpectationCheck:
    return ExpectationCheck(exact_expected_missing_mass(dist, n, k), expectation_bound(dist, n, k, constant))


def concentration_bound(n: int, k: int, epsilon: float) -> float:
    """``2 exp(-0.09 n eps^2 / k)``; may exceed 1."""
    return 2.0 * math.exp(-CONCENTRATION_CONSTANT * n * epsilon * epsilon / k)


def concentration_trial(
    dist: DiscreteDistribution,
    n: int,
    k: int,
    epsilon: float,
    trials: int,
    rng: np.random.Generator | int | None,
    chunk: int = 10_000,
) -> float:
    """Fraction of ``trials`` fresh n-samples whose k-missing mass exceeds E + eps.

    Trials run in fixed-size chunks, each on its own spawned generator, so the
    result does not depend on how chunks are scheduled.
    """
    _check_k(n, k)
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng(rng)
    threshold = exact_expected_missing_mass(dist, n, k) + epsilon
    if threshold >= 1.0:
        return 0.0
    sizes = [chunk] * (trials // chunk) + ([trials % chunk] if trials % chunk else [])
    exceed = 0
    for size, sub in zip(sizes, rng.spawn(len(sizes))):
        u = realized_missing_mass_batch(dist, sub.multinomial(n, dist.probs, size=size), k)
        exceed += int(np.count_nonzero(u > threshold))
    return exceed / trials


def realized_missing_mass_batch(dist: DiscreteDistribution, counts: np.ndarray, k: int) -> np.ndarray:
    """Missing mass for each row of a ``(trials, atoms)`` count matrix."""
    return np.minimum((np.asarray(counts) < k) @ dist.probs, 1.0)


def monte_carlo_missing_mass(
    dist: DiscreteDistribution, n: int, k: int, trials: int, rng: np.random.Generator | int | None
) -> tuple[float, float]:
    """Sample mean and standard error of the k-missing mass."""
    _check_k(n, k)
    rng = np.random.default_rng(rng)
    u = realized_missing_mass_batch(dist, rng.multinomial(n, dist.probs, size=trials), k)
    return float(u.mean()), float(u.std(ddof=1) / math.sqrt(trials)) if trials > 1 else math.inf
