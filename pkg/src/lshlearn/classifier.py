"""Hash-table nearest-neighbour classifier.

Training hashes every example with a composite key, groups examples into
buckets and keeps one representative per bucket whose label agrees with the
bucket's majority vote. Prediction hashes the query and reads the label
stored under its key, falling back to label 0 for unseen buckets.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .instrument import EvalCounter
from .lsh_family import (
    BucketKey,
    CompositeHash,
    FamilyKind,
    SensitivityParams,
    sample_composite,
    sensitivity_for,
)

DEFAULT_LABEL = 0
MODEL_FORMAT = "lshlearn-model"
MODEL_VERSION = 1


@dataclass(frozen=True)
class LabeledExample:
    point: tuple[float, ...]
    label: int

    def __post_init__(self):
        object.__setattr__(self, "point", tuple(float(v) for v in self.point))
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label!r}")
        if not all(math.isfinite(v) for v in self.point):
            raise ValueError("point coordinates must be finite")


def as_arrays(examples: Sequence[LabeledExample]) -> tuple[np.ndarray, np.ndarray]:
    if not examples:
        raise ValueError("empty sample")
    dims = {len(e.point) for e in examples}
    if len(dims) != 1:
        raise ValueError(f"inconsistent dimensions in sample: {sorted(dims)}")
    X = np.array([e.point for e in examples], dtype=float)
    y = np.array([e.label for e in examples], dtype=np.int64)
    return X, y


def _check_sample(X, y) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if X.ndim != 2 or X.shape[0] == 0:
        raise ValueError("empty sample" if X.size == 0 else f"points must be 2-D, got shape {X.shape}")
    if X.shape[1] == 0:
        raise ValueError("points must have at least one coordinate")
    if y.shape != (X.shape[0],):
        raise ValueError("one label per point required")
    if not np.all(np.isfinite(X)):
        raise ValueError("point coordinates must be finite")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be 0 or 1")
    if np.any(X < 0) or np.any(X > 1):
        warnings.warn("training points outside [0, 1]^d", stacklevel=3)
    return X, y.astype(np.int64)


def hash_count(n: int, p1: float) -> int:
    """Number of concatenated hashes, ``floor(ln n / (2 ln(1/p1)))``, at least 1."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0 < p1 < 1:
        raise ValueError("p1 must lie in (0, 1)")
    return max(1, math.floor(math.log(n) / (2.0 * math.log(1.0 / p1))))


def majority_label(labels: Iterable[int]) -> int:
    """1 only on a strict majority of ones; ties go to 0."""
    labels = list(labels)
    return 1 if 2 * sum(labels) > len(labels) else 0


@dataclass(frozen=True, eq=False)
class BucketTable:
    """Full training table: bucket key -> indices into ``points``/``labels``."""

    points: np.ndarray
    labels: np.ndarray
    buckets: dict[BucketKey, list[int]]

    def examples(self, key: BucketKey) -> list[LabeledExample]:
        return [LabeledExample(self.points[i], int(self.labels[i])) for i in self.buckets.get(key, ())]

    def sizes(self) -> np.ndarray:
        return np.fromiter((len(v) for v in self.buckets.values()), dtype=np.int64, count=len(self.buckets))

    def __len__(self) -> int:
        return len(self.buckets)


@dataclass(frozen=True)
class BucketDiagnostics:
    total: int
    close: int
    far: int

    @property
    def far_fraction(self) -> float:
        return self.far / self.total if self.total else 0.0


@dataclass(frozen=True, eq=False)
class ClassifierModel:
    composite: CompositeHash
    representatives: dict[BucketKey, tuple[np.ndarray, int]]
    params: SensitivityParams
    n: int
    retained_table: BucketTable | None = None
    _labels: dict[BucketKey, int] = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_labels", {k: lab for k, (_, lab) in self.representatives.items()})

    @property
    def m(self) -> int:
        return self.composite.m

    @property
    def d(self) -> int:
        return self.composite.d

    @property
    def kind(self) -> FamilyKind:
        return self.composite.kind

    @property
    def width(self) -> float:
        return self.composite.width

    @property
    def bucket_count(self) -> int:
        return len(self.representatives)

    def label_for_key(self, key: BucketKey) -> int:
        return self._labels.get(key, DEFAULT_LABEL)

    def predict(self, x, counter: EvalCounter | None = None) -> int:
        key = self.composite.key(x, counter)
        if counter is not None:
            counter.lookups += 1
        return self.label_for_key(key)

    def predict_batch(self, X, counter: EvalCounter | None = None) -> np.ndarray:
        codes = self.composite.codes(X, counter)
        if counter is not None:
            counter.lookups += codes.shape[0]
        get = self._labels.get
        return np.fromiter(
            (get(tuple(row), DEFAULT_LABEL) for row in codes.tolist()), dtype=np.int64, count=codes.shape[0]
        )

    def diagnose(self, x) -> BucketDiagnostics:
        if self.retained_table is None:
            raise RuntimeError("diagnostics need a model trained with keep_table=True")
        x = np.asarray(x, dtype=float).reshape(-1)
        idx = self.retained_table.buckets.get(self.composite.key(x), [])
        if not idx:
            return BucketDiagnostics(0, 0, 0)
        diff = self.retained_table.points[idx] - x
        dist = np.linalg.norm(diff, ord=self.kind.p, axis=1)
        threshold = self.params.separation_factor * self.params.radius
        close = int(np.count_nonzero(dist < threshold))
        return BucketDiagnostics(len(idx), close, len(idx) - close)

    def mean_far_fraction(self, X) -> float:
        X = np.asarray(X, dtype=float)
        return float(np.mean([self.diagnose(x).far_fraction for x in X]))


def train(
    X,
    y,
    kind: FamilyKind | str = FamilyKind.GAUSSIAN,
    rng: np.random.Generator | int | None = None,
    keep_table: bool = False,
    c: float | None = None,
    counter: EvalCounter | None = None,
) -> ClassifierModel:
    """Fit the bucket classifier on points ``X`` (n, d) with 0/1 labels ``y``.

    Every example is hashed exactly once by each of the ``m`` member hashes.
    Representatives are the first bucket member (in input order) carrying the
    majority label.
    """
    X, y = _check_sample(X, y)
    n, d = X.shape
    rng = np.random.default_rng(rng)
    params = sensitivity_for(n, d, kind, c)
    m = hash_count(n, params.p1)
    g = sample_composite(kind, d, params.radius, m, rng)

    buckets: dict[BucketKey, list[int]] = {}
    for i, row in enumerate(g.codes(X, counter).tolist()):
        buckets.setdefault(tuple(row), []).append(i)

    reps: dict[BucketKey, tuple[np.ndarray, int]] = {}
    for key, idx in buckets.items():
        lab = y[idx]
        winner = 1 if 2 * int(lab.sum()) > len(idx) else 0
        first = idx[int(np.argmax(lab == winner))]
        reps[key] = (X[first].copy(), winner)

    table = BucketTable(X, y, buckets) if keep_table else None
    return ClassifierModel(composite=g, representatives=reps, params=params, n=n, retained_table=table)


def train_examples(sample: Sequence[LabeledExample], **kwargs) -> ClassifierModel:
    X, y = as_arrays(sample)
    return train(X, y, **kwargs)


def predict(model: ClassifierModel, x) -> int:
    return model.predict(x)


def diagnose(model: ClassifierModel, x) -> BucketDiagnostics:
    return model.diagnose(x)


def risk_estimate(model, X, y) -> float:
    """Fraction of ``(X, y)`` the model mislabels."""
    y = np.asarray(y)
    if y.size == 0:
        raise ValueError("empty test set")
    return float(np.mean(model.predict_batch(X) != y))


def to_dict(model: ClassifierModel) -> dict:
    g = model.composite
    p = model.params
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "kind": g.kind.name.lower(),
        "n": model.n,
        "d": g.d,
        "m": g.m,
        "width": g.width,
        "radius": p.radius,
        "c": p.separation_factor,
        "p1": p.p1,
        "p2": p.p2,
        "projections": g.projections.tolist(),
        "offsets": g.offsets.tolist(),
        "table": [
            {"key": list(key), "point": point.tolist(), "label": label}
            for key, (point, label) in model.representatives.items()
        ],
    }


def from_dict(data: dict) -> ClassifierModel:
    if data.get("format") != MODEL_FORMAT:
        raise ValueError("not a serialized lshlearn model")
    if data.get("version") != MODEL_VERSION:
        raise ValueError(f"unsupported model version {data.get('version')!r}")
    g = CompositeHash(
        projections=np.array(data["projections"], dtype=float),
        offsets=np.array(data["offsets"], dtype=float),
        width=float(data["width"]),
        kind=FamilyKind.parse(data["kind"]),
    )
    if g.m != data["m"] or g.d != data["d"]:
        raise ValueError("model header disagrees with stored projections")
    params = SensitivityParams(data["radius"], data["c"], data["p1"], data["p2"])
    reps = {
        tuple(int(v) for v in entry["key"]): (np.array(entry["point"], dtype=float), int(entry["label"]))
        for entry in data["table"]
    }
    return ClassifierModel(composite=g, representatives=reps, params=params, n=int(data["n"]))


def dumps(model: ClassifierModel) -> str:
    # json writes floats with repr(), which round-trips binary64 exactly
    return json.dumps(to_dict(model), separators=(",", ":")) + "\n"


def loads(text: str) -> ClassifierModel:
    return from_dict(json.loads(text))


def save_model(model: ClassifierModel, path: str | Path) -> None:
    Path(path).write_text(dumps(model))


def load_model(path: str | Path) -> ClassifierModel:
    return loads(Path(path).read_text())
