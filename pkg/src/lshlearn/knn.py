"""Brute-force k-nearest-neighbour majority classifier (the exact baseline)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .instrument import EvalCounter


def default_k(n: int) -> int:
    """``ceil(sqrt(n))`` bumped to the next odd number, capped at the largest odd k <= n."""
    if n < 1:
        raise ValueError("n must be >= 1")
    k = math.isqrt(n - 1) + 1
    if k % 2 == 0:
        k += 1
    return min(k, n if n % 2 else n - 1)


@dataclass(frozen=True, eq=False)
class KnnModel:
    points: np.ndarray
    labels: np.ndarray
    k: int
    p: int = 2
    require_odd: bool = True

    def __post_init__(self):
        X = np.array(self.points, dtype=float)
        y = np.array(self.labels, dtype=np.int64)
        if X.ndim != 2 or X.shape[0] == 0:
            raise ValueError("need a non-empty 2-D training set")
        if y.shape != (X.shape[0],):
            raise ValueError("one label per point required")
        if not 1 <= self.k <= X.shape[0]:
            raise ValueError(f"k={self.k} outside [1, n={X.shape[0]}]")
        if self.require_odd and self.k % 2 == 0:
            raise ValueError("k must be odd (pass require_odd=False to allow ties)")
        if self.p not in (1, 2):
            raise ValueError("only the l1 and l2 norms are supported")
        X.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "points", X)
        object.__setattr__(self, "labels", y)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def _distances(self, Q: np.ndarray) -> np.ndarray:
        # Squared distances for l2 keep ties exact (no sqrt rounding).
        D = np.zeros((Q.shape[0], self.n))
        for j in range(self.d):
            diff = Q[:, j : j + 1] - self.points[:, j]
            D += diff * diff if self.p == 2 else np.abs(diff)
        return D

    def predict_batch(self, X, counter: EvalCounter | None = None, chunk: int = 512) -> np.ndarray:
        Q = np.asarray(X, dtype=float)
        if Q.ndim == 1:
            Q = Q[None, :]
        if Q.ndim != 2 or Q.shape[1] != self.d:
            raise ValueError(f"expected queries of dimension {self.d}")
        out = np.empty(Q.shape[0], dtype=np.int64)
        for start in range(0, Q.shape[0], chunk):
            block = Q[start : start + chunk]
            out[start : start + block.shape[0]] = self._vote(self._distances(block))
        if counter is not None:
            counter.distance_evals += Q.shape[0] * self.n
            counter.multiply_adds += Q.shape[0] * self.n * self.d
        return out

    def _vote(self, D: np.ndarray) -> np.ndarray:
        k = self.k
        kth = np.partition(D, k - 1, axis=1)[:, k - 1 : k]
        less = D < kth
        ties = D == kth
        # fill the remaining slots with the lowest-index points at the k-th distance
        need = k - less.sum(axis=1, keepdims=True)
        take = ties & (np.cumsum(ties, axis=1) <= need)
        ones = ((less | take) * self.labels).sum(axis=1)
        return (2 * ones > k).astype(np.int64)

    def predict(self, x, counter: EvalCounter | None = None) -> int:
        return int(self.predict_batch(np.asarray(x, dtype=float).reshape(1, -1), counter)[0])

    def neighbours(self, x) -> np.ndarray:
        """Indices of the k selected neighbours, ordered by (distance, index)."""
        D = self._distances(np.asarray(x, dtype=float).reshape(1, -1))[0]
        return np.lexsort((np.arange(self.n), D))[: self.k]


def knn_predict(model: KnnModel, x) -> int:
    return model.predict(x)
