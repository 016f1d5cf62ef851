"""Acceptance suite: one PASS/FAIL line per criterion, printed to the terminal.

Runtime budgets are part of the criteria and are measured here with
``time.perf_counter``.
"""

import math
import time

import numpy as np
import pytest

from lshlearn import classifier, experiments
from lshlearn.instrument import EvalCounter
from lshlearn.knn import KnnModel
from lshlearn.lsh_family import FamilyKind, collision_probability, hash_point, sensitivity_for
from lshlearn.missing_mass import CONCENTRATION_CONSTANT
from lshlearn.synthetic import make_task, sample_task

SEEDS = [0, 1, 2, 3, 4]
N_LIST = [1_000, 10_000, 100_000]


@pytest.fixture
def report(capsys, request):
    def emit(number: int, title: str, passed: bool, detail: str) -> None:
        with capsys.disabled():
            print(f"\n[acceptance {number}] {'PASS' if passed else 'FAIL'} {title}: {detail}")
        assert passed, detail

    return emit


def gaussian_oracle(a: float) -> float:
    # closed form of the collision integral at w / z = a
    return math.erf(a / math.sqrt(2)) - (2 / (a * math.sqrt(2 * math.pi))) * (1 - math.exp(-a * a / 2))


@pytest.fixture(scope="module")
def convergence_run():
    config = experiments.ExperimentConfig(
        task="smooth-sine", d=2, n_list=N_LIST, seeds=SEEDS, test_size=20_000, baseline=False, diagnostics=True
    )
    t0 = time.perf_counter()
    records = experiments.run_convergence(config)
    return records, time.perf_counter() - t0


def test_1_sensitivity_constants(report):
    t0 = time.perf_counter()
    p1 = collision_probability(1.0, 1.0)
    p2 = collision_probability(3.0, 1.0)
    elapsed = time.perf_counter() - t0
    oracle = gaussian_oracle(1.0)
    ok = (
        abs(p2 - 0.131758) <= 1e-5
        and abs(p1 - 0.367691) <= 2e-3
        and abs(p1 - oracle) <= 1e-6
        and p1 * p1 > p2
        and elapsed < 1.0
    )
    report(
        1,
        "sensitivity constants",
        ok,
        f"p1={p1:.9f} (oracle {oracle:.9f}, published 0.367691) p2={p2:.9f} (published 0.131758) "
        f"p1^2={p1 * p1:.6f} > p2, {elapsed:.3f}s",
    )


def test_2_expected_missing_mass_sweep(report):
    t0 = time.perf_counter()
    result = experiments.expectation_sweep(dists=500, max_support=50, n_max=200, seed=0)
    elapsed = time.perf_counter() - t0
    d = result.detail
    report(
        2,
        "exact expected k-missing mass bound",
        result.passed and elapsed < 120,
        f"{d['checked']} (dist, n, k) triples, {len(d['violations'])} violations, "
        f"max E[U]/(|supp| k/n) = {d['max_ratio_to_support_k_over_n']:.4f} < 1.6, {elapsed:.1f}s",
    )


def test_3_missing_mass_tail_monte_carlo(report):
    t0 = time.perf_counter()
    result = experiments.concentration_suite(count=20, trials=100_000, seed=0)
    elapsed = time.perf_counter() - t0
    rows = result.detail["configs"]
    non_vacuous = all(r["bound"] < 1 for r in rows) and len(rows) == 20
    for r in rows:
        assert r["bound"] == pytest.approx(2 * math.exp(-CONCENTRATION_CONSTANT * r["n"] * r["epsilon"] ** 2 / r["k"]))
        assert r["n"] <= 500
    worst = max(rows, key=lambda r: r["frequency"] - r["bound"])
    report(
        3,
        "missing mass tail bound",
        result.passed and non_vacuous and elapsed < 300,
        f"20 configs x 1e5 trials, bounds in [{min(r['bound'] for r in rows):.3f}, {max(r['bound'] for r in rows):.3f}], "
        f"max freq {max(r['frequency'] for r in rows):.5f}, tightest freq-bound {worst['frequency'] - worst['bound']:.3f}, "
        f"{elapsed:.1f}s",
    )


def test_4_algorithm_fidelity(report):
    rng = np.random.default_rng(4)
    mismatches = 0
    checked_keys = checked_queries = 0
    for _ in range(200):
        n = int(rng.integers(1, 51))
        d = int(rng.integers(1, 5))
        X = rng.random((n, d))
        # duplicate some rows so conflicting labels share a bucket
        X[rng.integers(0, n, n // 4)] = X[rng.integers(0, n, n // 4)]
        y = rng.integers(0, 2, n)
        kind = FamilyKind.GAUSSIAN if rng.random() < 0.5 else FamilyKind.CAUCHY
        model = classifier.train(X, y, kind=kind, rng=int(rng.integers(2**31)))
        funcs = model.composite.functions

        def key(x):
            return tuple(hash_point(h, x) for h in funcs)

        groups = {}
        for i in range(n):
            groups.setdefault(key(X[i]), []).append(int(y[i]))
        oracle = {k: int(2 * sum(v) > len(v)) for k, v in groups.items()}
        if set(oracle) != set(model.representatives):
            mismatches += 1
        for k, lab in oracle.items():
            checked_keys += 1
            mismatches += model.label_for_key(k) != lab
        queries = np.vstack([X, rng.random((20, d)) * 3 - 1])
        for q in queries:
            checked_queries += 1
            mismatches += model.predict(q) != oracle.get(key(q), 0)
    report(
        4,
        "algorithm fidelity",
        mismatches == 0,
        f"200 instances, {checked_keys} bucket labels and {checked_queries} predictions vs brute force, "
        f"{mismatches} mismatches",
    )


def test_5_consistency_trend(report, convergence_run):
    records, elapsed = convergence_run
    means = experiments.summarize(records, "excess_risk")
    vals = [means[n] for n in N_LIST]
    decreasing = vals[0] > vals[1] > vals[2]
    halved = vals[2] < vals[0] / 2
    report(
        5,
        "consistency trend",
        decreasing and halved and elapsed < 600,
        "mean excess risk " + ", ".join(f"n={n}: {v:.4f}" for n, v in zip(N_LIST, vals))
        + f"; ratio n=1e5/n=1e3 = {vals[2] / vals[0]:.3f}, {elapsed:.1f}s",
    )


def test_6_far_fraction_trend(report, convergence_run):
    records, _ = convergence_run
    far = {(r["n"], r["seed"]): r["lsh"]["mean_far_fraction"] for r in records}
    per_seed = {s: (far[(N_LIST[0], s)], far[(N_LIST[-1], s)]) for s in SEEDS}
    ok = all(hi < lo for lo, hi in per_seed.values())
    cut = {r["n"]: r["c"] * r["w"] for r in records}
    report(
        6,
        "far-fraction trend",
        ok,
        "far_fraction (n=1e3 -> n=1e5) per seed "
        + ", ".join(f"{s}: {lo:.4f}->{hi:.4f}" for s, (lo, hi) in per_seed.items())
        + f"; far cut c*r_n = {cut[N_LIST[0]]:.3f} / {cut[N_LIST[-1]]:.3f} vs cube diameter {math.sqrt(2):.3f}",
    )


def test_7_complexity_counters(report):
    failures = []
    task = make_task("smooth-sine", 3)
    for n in (1, 2, 10, 55, 1000, 20_000, 100_000):
        X, y = sample_task(task, n, n)
        train_counter, query_counter = EvalCounter(), EvalCounter()
        model = classifier.train(X, y, rng=1, counter=train_counter)
        p1 = gaussian_oracle(1.0)
        m_expected = max(1, math.floor(math.log(n) / (2 * math.log(1 / p1))))
        Q = np.random.default_rng(n).random((257, 3))
        model.predict_batch(Q, counter=query_counter)
        single = EvalCounter()
        model.predict(Q[0], counter=single)
        if not (
            model.m == m_expected
            and train_counter.hash_evals == n * m_expected
            and query_counter.hash_evals == 257 * m_expected
            and single.hash_evals == m_expected
        ):
            failures.append(n)
    knn_ok = True
    for n in (1, 7, 500):
        X, y = sample_task(task, n, 0)
        counter = EvalCounter()
        KnnModel(X, y, k=1).predict_batch(np.random.default_rng(0).random((33, 3)), counter=counter)
        knn_ok &= counter.distance_evals == 33 * n
    report(
        7,
        "complexity counters",
        not failures and knn_ok,
        f"train = n*m_n and query = m_n at n in (1, 2, 10, 55, 1e3, 2e4, 1e5), failing n: {failures}; "
        f"k-NN n distance evals per query: {knn_ok}",
    )


def test_8_determinism_and_serialization(report):
    task = make_task("smooth-sine", 4)
    X, y = sample_task(task, 20_000, 11)
    a = classifier.dumps(classifier.train(X, y, rng=123))
    b = classifier.dumps(classifier.train(X, y, rng=123))
    model = classifier.loads(a)
    original = classifier.train(X, y, rng=123)
    Q = np.vstack([sample_task(task, 9_000, 12)[0], X[:1_000]])
    before = original.predict_batch(Q)
    after = model.predict_batch(Q)
    identical = a.encode() == b.encode()
    agree = np.array_equal(before, after)
    reserialized = classifier.dumps(model) == a
    report(
        8,
        "determinism and serialization",
        identical and agree and reserialized,
        f"byte-identical models: {identical} ({len(a)} bytes), round-trip agreement on {Q.shape[0]} queries: {agree}, "
        f"re-serialization stable: {reserialized}",
    )
