"""Synthetic classification tasks with a known regression function.

Points are uniform on ``[0, 1]^d`` and ``P(y = 1 | x) = eta(x)``. Because eta
is known, the Bayes classifier and its risk are available for measuring
excess risk.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy import integrate
from scipy.stats import qmc

TASKS = ("smooth-sine", "holder-power", "constant")


class DatasetError(ValueError):
    """Malformed dataset file. ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class SyntheticTask:
    name: str
    d: int
    alpha: float = 1.0
    value: float = 0.5
    quad_tol: float = field(default=1e-9, repr=False)

    def __post_init__(self):
        if self.name not in TASKS:
            raise ValueError(f"unknown task {self.name!r}; choose from {TASKS}")
        if self.d < 1:
            raise ValueError("dimension must be >= 1")
        if self.name == "holder-power" and not 0 < self.alpha <= 1:
            raise ValueError("holder-power needs alpha in (0, 1]")
        if self.name == "constant" and not 0 <= self.value <= 1:
            raise ValueError("constant eta must lie in [0, 1]")

    @property
    def holder_alpha(self) -> float:
        return self.alpha if self.name == "holder-power" else 1.0

    @property
    def holder_L(self) -> float:
        if self.name == "smooth-sine":
            return math.pi
        if self.name == "holder-power":
            return 1.0
        return 0.0

    def eta(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.d:
            raise ValueError(f"expected points of dimension {self.d}")
        x1 = X[:, 0]
        if self.name == "smooth-sine":
            return 0.5 * (1.0 + np.sin(2.0 * np.pi * x1))
        if self.name == "holder-power":
            u = 2.0 * x1 - 1.0
            return 0.5 + 0.5 * np.sign(u) * np.abs(u) ** self.alpha
        return np.full(X.shape[0], self.value)

    def _kinks(self) -> list[float]:
        return [0.5] if self.name in ("smooth-sine", "holder-power") else []

    def _conditional_risk(self, X) -> np.ndarray:
        e = self.eta(X)
        return np.minimum(e, 1.0 - e)

    @cached_property
    def bayes_risk_estimate(self) -> tuple[float, float]:
        """``(R*, error estimate)``. Quadrature for d <= 2, scrambled Sobol otherwise."""
        if self.name == "constant":
            return min(self.value, 1.0 - self.value), 0.0
        if self.d == 1:
            val, err = integrate.quad(
                lambda t: float(self._conditional_risk([[t]])[0]),
                0.0,
                1.0,
                points=self._kinks(),
                epsabs=self.quad_tol,
                limit=200,
            )
            return val, err
        if self.d == 2:
            val, err = integrate.nquad(
                lambda a, b: float(self._conditional_risk([[a, b]])[0]),
                [[0.0, 1.0], [0.0, 1.0]],
                opts=[{"points": self._kinks(), "epsabs": self.quad_tol}, {"epsabs": self.quad_tol}],
            )
            return val, err
        reps = []
        for r in range(16):
            pts = qmc.Sobol(self.d, scramble=True, seed=r).random_base2(14)
            reps.append(float(self._conditional_risk(pts).mean()))
        return float(np.mean(reps)), float(np.std(reps, ddof=1) / math.sqrt(len(reps)))

    @property
    def bayes_risk(self) -> float:
        return self.bayes_risk_estimate[0]


def make_task(name: str, d: int, alpha: float | None = None, value: float = 0.5) -> SyntheticTask:
    return SyntheticTask(name=name, d=d, alpha=1.0 if alpha is None else alpha, value=value)


def sample_task(task: SyntheticTask, n: int, rng: np.random.Generator | int | None) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``n`` labelled points: x uniform on the cube, y ~ Bernoulli(eta(x))."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(rng)
    X = rng.random((n, task.d))
    y = (rng.random(n) < task.eta(X)).astype(np.int64)
    return X, y


def bayes_risk(task: SyntheticTask) -> float:
    return task.bayes_risk


def bayes_predict(task: SyntheticTask, X) -> np.ndarray:
    """Bayes classifier; points with eta exactly 1/2 get label 0."""
    return (task.eta(X) > 0.5).astype(np.int64)


def conditional_risk(task: SyntheticTask, X, predictions) -> float:
    """Exact risk of ``predictions`` at ``X`` averaged over the label noise."""
    e = task.eta(X)
    pred = np.asarray(predictions)
    return float(np.mean(np.where(pred == 1, 1.0 - e, e)))


def holder_violations(task: SyntheticTask, pairs: int, rng: np.random.Generator | int | None) -> int:
    """Count random pairs breaking ``|eta(x) - eta(x')| <= L ||x - x'||^alpha``."""
    rng = np.random.default_rng(rng)
    A = rng.random((pairs, task.d))
    B = rng.random((pairs, task.d))
    lhs = np.abs(task.eta(A) - task.eta(B))
    rhs = task.holder_L * np.linalg.norm(A - B, axis=1) ** task.holder_alpha
    return int(np.count_nonzero(lhs > rhs * (1 + 1e-12) + 1e-15))


def write_csv(path: str | Path, X, y=None) -> None:
    X = np.asarray(X, dtype=float)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        header = [f"x{j + 1}" for j in range(X.shape[1])]
        if y is not None:
            header.append("label")
        w.writerow(header)
        for i, row in enumerate(X):
            cells = [repr(float(v)) for v in row]
            if y is not None:
                cells.append(str(int(y[i])))
            w.writerow(cells)


def read_csv(path: str | Path, labelled: bool | None = True) -> tuple[np.ndarray, np.ndarray | None]:
    """Read a dataset written by :func:`write_csv`.

    ``labelled=None`` detects a trailing ``label`` column from the header.
    Raises :class:`DatasetError` naming the offending line.
    """
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DatasetError(f"cannot open {path}: {exc.strerror}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or not any(c.strip() for c in header):
            raise DatasetError("empty file: missing header row", 1)
        has_label = header[-1].strip().lower() == "label"
        if labelled is None:
            labelled = has_label
        elif labelled and not has_label:
            raise DatasetError("last header column must be 'label'", 1)
        d = len(header) - 1 if has_label else len(header)
        if d < 1:
            raise DatasetError("no feature columns", 1)
        rows, labels = [], []
        for row in reader:
            line = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DatasetError(f"expected {len(header)} fields, got {len(row)}", line)
            try:
                feats = [float(c) for c in row[:d]]
            except ValueError:
                raise DatasetError("non-numeric feature value", line) from None
            if not all(math.isfinite(v) for v in feats):
                raise DatasetError("non-finite feature value", line)
            rows.append(feats)
            if labelled:
                lab = row[-1].strip()
                if lab not in ("0", "1"):
                    raise DatasetError(f"label must be 0 or 1, got {lab!r}", line)
                labels.append(int(lab))
    if not rows:
        raise DatasetError("no data rows")
    X = np.array(rows, dtype=float)
    return X, (np.array(labels, dtype=np.int64) if labelled else None)
