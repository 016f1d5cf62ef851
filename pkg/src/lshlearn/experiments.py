"""Convergence experiments and exact/Monte Carlo checks of the missing-mass bounds."""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Iterable, Iterator

import numpy as np

from . import missing_mass as mm
from .classifier import train
from .instrument import EvalCounter
from .knn import KnnModel, default_k
from .lsh_family import DEFAULT_SEPARATION, FamilyKind, collision_probability, width_schedule
from .synthetic import conditional_risk, make_task, sample_task

# Stream tags for seed derivation. The hash and test streams ignore n so that
# every sample size of one seed shares its projections and test set.
_SAMPLE, _HASH, _TEST = 1, 2, 3

MIN_TEST_SIZE = 1000


@dataclass
class ExperimentConfig:
    task: str = "smooth-sine"
    d: int = 2
    alpha: float | None = None
    value: float = 0.5
    n_list: list[int] = field(default_factory=lambda: [1000, 10_000, 100_000])
    seeds: list[int] = field(default_factory=lambda: [0, 1, 2, 3, 4])
    family: str = "gaussian"
    c: float | None = None
    baseline: bool = True
    diagnostics: bool = True
    diag_queries: int = 1000
    test_size: int = 20_000
    out: str | None = None

    def __post_init__(self):
        if not self.n_list:
            raise ValueError("need at least one sample size")
        if not self.seeds:
            raise ValueError("need at least one seed")
        if self.test_size < MIN_TEST_SIZE:
            raise ValueError(f"test size must be >= {MIN_TEST_SIZE}")
        if any(n < 1 for n in self.n_list):
            raise ValueError("sample sizes must be positive")
        FamilyKind.parse(self.family)
        make_task(self.task, self.d, self.alpha, self.value)


def _rng(*tags: int) -> np.random.Generator:
    return np.random.default_rng(list(tags))


def _occupancy(sizes: np.ndarray) -> dict:
    qs = np.percentile(sizes, [50, 90, 99])
    return {
        "buckets": int(sizes.size),
        "mean": float(sizes.mean()),
        "median": float(qs[0]),
        "p90": float(qs[1]),
        "p99": float(qs[2]),
        "max": int(sizes.max()),
        "singleton_fraction": float(np.mean(sizes == 1)),
    }


def run_cell(config: ExperimentConfig, n: int, seed: int) -> dict:
    """Train and evaluate both classifiers for one ``(n, seed)`` pair."""
    task = make_task(config.task, config.d, config.alpha, config.value)
    kind = FamilyKind.parse(config.family)
    r_star = task.bayes_risk
    X, y = sample_task(task, n, _rng(seed, _SAMPLE, n))
    Xt, yt = sample_task(task, config.test_size, _rng(seed, _TEST))
    m_test = yt.size

    train_counter = EvalCounter()
    t0 = time.perf_counter()
    model = train(X, y, kind=kind, rng=_rng(seed, _HASH), keep_table=config.diagnostics, c=config.c, counter=train_counter)
    train_time = time.perf_counter() - t0

    query_counter = EvalCounter()
    t0 = time.perf_counter()
    pred = model.predict_batch(Xt, counter=query_counter)
    query_time = time.perf_counter() - t0
    risk = float(np.mean(pred != yt))

    record = {
        "config": {k: v for k, v in asdict(config).items() if k != "out"},
        "n": n,
        "seed": seed,
        "bayes_risk": r_star,
        "m": model.m,
        "w": model.width,
        "p1": model.params.p1,
        "p2": model.params.p2,
        "c": model.params.separation_factor,
        "lsh": {
            "risk": risk,
            "risk_se": math.sqrt(risk * (1 - risk) / m_test),
            "excess_risk": risk - r_star,
            "excess_risk_conditional": conditional_risk(task, Xt, pred) - r_star,
            "train_seconds": train_time,
            "query_seconds": query_time,
            "train_hash_evals": train_counter.hash_evals,
            "query_hash_evals_per_point": query_counter.hash_evals / m_test,
            "occupancy": _occupancy(np.unique(model.composite.codes(X), axis=0, return_counts=True)[1]),
        },
    }

    if config.diagnostics:
        Q = Xt[: config.diag_queries]
        diags = [model.diagnose(q) for q in Q]
        record["lsh"]["mean_far_fraction"] = float(np.mean([g.far_fraction for g in diags]))
        record["lsh"]["mean_bucket_total"] = float(np.mean([g.total for g in diags]))
        record["lsh"]["mean_bucket_close"] = float(np.mean([g.close for g in diags]))
        record["lsh"]["empty_bucket_fraction"] = float(np.mean([g.total == 0 for g in diags]))

    if config.baseline:
        knn = KnnModel(X, y, k=default_k(n), p=kind.p)
        counter = EvalCounter()
        t0 = time.perf_counter()
        kpred = knn.predict_batch(Xt, counter=counter)
        ktime = time.perf_counter() - t0
        krisk = float(np.mean(kpred != yt))
        record["knn"] = {
            "k": knn.k,
            "risk": krisk,
            "risk_se": math.sqrt(krisk * (1 - krisk) / m_test),
            "excess_risk": krisk - r_star,
            "excess_risk_conditional": conditional_risk(task, Xt, kpred) - r_star,
            "query_seconds": ktime,
            "distance_evals_per_query": counter.distance_evals / m_test,
        }
    return record


def _cell(args):
    config, n, seed = args
    return run_cell(config, n, seed)


def run_convergence(
    config: ExperimentConfig, workers: int = 1, sink: Callable[[dict], None] | None = None
) -> list[dict]:
    """Run every ``(n, seed)`` cell. ``sink`` sees each record as it completes."""
    cells = [(config, n, s) for n in config.n_list for s in config.seeds]
    records = []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results: Iterator[dict] = pool.map(_cell, cells)
            for rec in results:
                records.append(rec)
                if sink:
                    sink(rec)
    else:
        for cell in cells:
            rec = _cell(cell)
            records.append(rec)
            if sink:
                sink(rec)
    return records


def summarize(records: list[dict], key: str = "excess_risk", section: str = "lsh") -> dict[int, float]:
    """Mean of ``record[section][key]`` per sample size."""
    by_n: dict[int, list[float]] = {}
    for r in records:
        if section in r and key in r[section]:
            by_n.setdefault(r["n"], []).append(r[section][key])
    return {n: float(np.mean(v)) for n, v in sorted(by_n.items())}


# --- theorem checks -------------------------------------------------------


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: dict

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: {self.detail}"


def check_sensitivity(family: str = "gaussian", c: float | None = None) -> CheckResult:
    kind = FamilyKind.parse(family)
    c = DEFAULT_SEPARATION[kind] if c is None else c
    # both probabilities depend only on z / w, so unit width suffices
    p1 = collision_probability(1.0, 1.0, kind)
    p2 = collision_probability(c, 1.0, kind)
    return CheckResult(
        f"S1 p1^2 > p2 ({kind.name.lower()}, c={c:g})",
        p1 * p1 > p2,
        {"p1": p1, "p2": p2, "p1_squared": p1 * p1},
    )


def check_radius_schedule(dims: Iterable[int] = range(1, 11), exps: Iterable[int] = range(2, 7)) -> list[CheckResult]:
    """S2 (radius shrinks) and S3 (radius * sqrt(n) grows) on a log grid of n."""
    ns = [10**e for e in exps]
    s2_bad, s3_bad = [], []
    for d in dims:
        r = [width_schedule(n, d) for n in ns]
        prod = [ri * math.sqrt(n) for ri, n in zip(r, ns)]
        if any(b >= a for a, b in zip(r, r[1:])):
            s2_bad.append(d)
        if any(b <= a for a, b in zip(prod, prod[1:])):
            s3_bad.append(d)
    return [
        CheckResult("S2 radius decreasing in n", not s2_bad, {"n_grid": ns, "failing_dims": s2_bad}),
        CheckResult("S3 radius*sqrt(n) increasing in n", not s3_bad, {"n_grid": ns, "failing_dims": s3_bad}),
    ]


def expectation_sweep(
    dists: int = 500,
    max_support: int = 50,
    n_max: int = 200,
    seed: int = 0,
    constant: float = mm.EXPECTATION_CONSTANT,
) -> CheckResult:
    """Exact check of ``E[U_n^(k)] < constant * |supp P| * k / n`` over all n, k."""
    rng = np.random.default_rng(seed)
    checked = 0
    worst_ratio = 0.0
    violations = []
    for _ in range(dists):
        dist = mm.DiscreteDistribution.random(int(rng.integers(1, max_support + 1)), rng)
        t = dist.support_size
        for n in range(1, n_max + 1):
            lhs = mm.expected_missing_mass_all_k(dist, n)
            ks = np.arange(1, n + 1)
            rhs = constant * t * ks / n
            checked += n
            worst_ratio = max(worst_ratio, float(np.max(lhs * n / (t * ks))))
            bad = np.flatnonzero(lhs >= rhs)
            for i in bad[: max(0, 5 - len(violations))]:
                violations.append({"n": n, "k": int(ks[i]), "probs": dist.probs.tolist(), "lhs": float(lhs[i]), "rhs": float(rhs[i])})
            if bad.size and len(violations) >= 5:
                break
        if len(violations) >= 5:
            break
    return CheckResult(
        f"expected k-missing mass bound, exact sweep (constant {constant:g})",
        not violations,
        {"checked": checked, "violations": violations, "max_ratio_to_support_k_over_n": worst_ratio},
    )


def concentration_configs(count: int, seed: int = 0, max_support: int = 50, n_max: int = 500) -> list[dict]:
    """Random ``(dist, n, k, eps)`` settings whose tail bound is below 1."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        t = int(rng.integers(1, max_support + 1))
        n = int(rng.integers(10, n_max + 1))
        k = int(rng.integers(1, max(1, n // 20) + 1))
        target = float(rng.uniform(0.05, 0.95))
        eps = math.sqrt(math.log(2.0 / target) * k / (mm.CONCENTRATION_CONSTANT * n))
        if eps >= 1.0:
            continue
        probs = mm.DiscreteDistribution.random(t, rng).probs
        out.append({"probs": probs, "n": n, "k": k, "epsilon": eps})
    return out


def concentration_suite(count: int = 20, trials: int = 100_000, seed: int = 0) -> CheckResult:
    rows = []
    ok = True
    for i, cfg in enumerate(concentration_configs(count, seed)):
        dist = mm.DiscreteDistribution(cfg["probs"])
        bound = mm.concentration_bound(cfg["n"], cfg["k"], cfg["epsilon"])
        freq = mm.concentration_trial(dist, cfg["n"], cfg["k"], cfg["epsilon"], trials, np.random.default_rng([seed, i]))
        b = min(bound, 1.0)
        se = math.sqrt(b * (1 - b) / trials)
        passed = freq <= bound + 4 * se
        ok &= passed
        rows.append(
            {"support": dist.support_size, "n": cfg["n"], "k": cfg["k"], "epsilon": cfg["epsilon"],
             "bound": bound, "frequency": freq, "passed": passed}
        )
    return CheckResult(f"missing mass tail bound, Monte Carlo ({count} configs x {trials} trials)", ok, {"configs": rows})
