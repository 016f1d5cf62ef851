import math

import numpy as np
import pytest

from lshlearn.classifier import train
from lshlearn.synthetic import (
    DatasetError,
    bayes_predict,
    bayes_risk,
    conditional_risk,
    holder_violations,
    make_task,
    read_csv,
    sample_task,
    write_csv,
)

N = 100_000
BAND = 0.007  # 4 sigma of a Bernoulli(1/2) mean over 1e5 draws is 0.0063


def test_eta_zero_gives_all_zero_labels():
    _, y = sample_task(make_task("constant", 3, value=0.0), 5000, 0)
    assert not y.any()


def test_eta_half_label_mean():
    _, y = sample_task(make_task("constant", 2, value=0.5), N, 1)
    assert abs(y.mean() - 0.5) <= BAND


def test_eta_identity_in_one_dimension():
    # holder-power with alpha = 1 reduces to eta(x) = x
    task = make_task("holder-power", 1, alpha=1.0)
    xs = np.linspace(0, 1, 11)[:, None]
    assert task.eta(xs) == pytest.approx(xs[:, 0], abs=1e-15)
    X, y = sample_task(task, N, 2)
    assert abs(y.mean() - 0.5) <= BAND
    assert np.corrcoef(X[:, 0], y)[0, 1] > 0.4


def test_sampling_is_seed_deterministic():
    task = make_task("smooth-sine", 3)
    a = sample_task(task, 100, 7)
    b = sample_task(task, 100, 7)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])
    with pytest.raises(ValueError):
        sample_task(task, 0, 7)


def test_eta_in_unit_interval():
    rng = np.random.default_rng(3)
    for task in (make_task("smooth-sine", 2), make_task("holder-power", 2, alpha=0.3)):
        e = task.eta(rng.random((10_000, 2)))
        assert e.min() >= 0.0 and e.max() <= 1.0


def test_bayes_risk_constants():
    assert bayes_risk(make_task("constant", 2, value=0.0)) == 0.0
    assert bayes_risk(make_task("constant", 2, value=0.5)) == 0.5
    assert bayes_risk(make_task("constant", 4, value=0.8)) == pytest.approx(0.2)


@pytest.mark.parametrize("d", [1, 2])
def test_smooth_sine_bayes_risk_closed_form(d):
    # min(eta, 1-eta) = (1 - |sin 2 pi x|)/2 integrates to 1/2 - 1/pi
    assert bayes_risk(make_task("smooth-sine", d)) == pytest.approx(0.5 - 1 / math.pi, abs=1e-6)
    assert 0.5 - 1 / math.pi == pytest.approx(0.18169, abs=1e-5)


@pytest.mark.parametrize("alpha", [0.25, 0.5, 1.0])
def test_holder_power_bayes_risk_closed_form(alpha):
    # E[min] = 1/2 - E|2x-1|^alpha / 2 = 1/2 - 1/(2(alpha+1))
    expected = 0.5 - 0.5 / (alpha + 1)
    assert bayes_risk(make_task("holder-power", 1, alpha=alpha)) == pytest.approx(expected, abs=1e-6)
    assert bayes_risk(make_task("holder-power", 2, alpha=alpha)) == pytest.approx(expected, abs=1e-6)


def test_high_dimension_uses_quasi_random_estimate():
    task = make_task("smooth-sine", 4)
    val, err = task.bayes_risk_estimate
    assert 0 < err < 1e-3
    assert abs(val - (0.5 - 1 / math.pi)) <= max(4 * err, 1e-4)


def test_bayes_predict_threshold():
    task = make_task("constant", 1, value=0.9)
    assert bayes_predict(task, [[0.3]])[0] == 1
    assert bayes_predict(make_task("constant", 1, value=0.5), [[0.3]])[0] == 0
    sine = make_task("smooth-sine", 1)
    # eta(0) = 1/2 exactly, so the tie rule applies
    assert bayes_predict(sine, [[0.0], [0.25], [0.75]]).tolist() == [0, 1, 0]


@pytest.mark.parametrize("name", ["smooth-sine", "holder-power"])
def test_bayes_classifier_monte_carlo_risk(name):
    task = make_task(name, 2, alpha=0.5 if name == "holder-power" else None)
    X, y = sample_task(task, N, 4)
    risk = np.mean(bayes_predict(task, X) != y)
    assert abs(risk - task.bayes_risk) <= 0.006


@pytest.mark.parametrize("name,alpha", [("smooth-sine", None), ("holder-power", 0.4), ("holder-power", 1.0), ("constant", None)])
@pytest.mark.parametrize("d", [1, 3])
def test_holder_constants_hold(name, alpha, d):
    assert holder_violations(make_task(name, d, alpha=alpha), 10_000, 5) == 0


def test_holder_spot_check_is_sharp_enough_to_fail():
    # the sine slope reaches pi, so L = 1 must be caught on random pairs
    task = make_task("smooth-sine", 1)
    rng = np.random.default_rng(0)
    A, B = rng.random((10_000, 1)), rng.random((10_000, 1))
    assert np.any(np.abs(task.eta(A) - task.eta(B)) > np.abs(A - B)[:, 0])


def test_learned_classifier_never_beats_bayes():
    task = make_task("smooth-sine", 2)
    X, y = sample_task(task, 5000, 6)
    model = train(X, y, rng=6)
    Xt, yt = sample_task(task, N, 7)
    pred = model.predict_batch(Xt)
    risk = np.mean(pred != yt)
    se = math.sqrt(risk * (1 - risk) / N)
    assert risk >= task.bayes_risk - 4 * se
    assert conditional_risk(task, Xt, pred) >= task.bayes_risk - 4 * se


def test_task_validation():
    with pytest.raises(ValueError):
        make_task("nope", 2)
    with pytest.raises(ValueError):
        make_task("smooth-sine", 0)
    with pytest.raises(ValueError):
        make_task("holder-power", 2, alpha=1.5)
    with pytest.raises(ValueError):
        make_task("constant", 2, value=1.2)


# ---- CSV -----------------------------------------------------------------


def test_csv_round_trip_full_precision(tmp_path):
    rng = np.random.default_rng(8)
    X = rng.random((50, 3))
    X[0, 0] = 1 / 3
    y = rng.integers(0, 2, 50)
    path = tmp_path / "data.csv"
    write_csv(path, X, y)
    assert path.read_text().splitlines()[0] == "x1,x2,x3,label"
    X2, y2 = read_csv(path)
    assert np.array_equal(X, X2) and np.array_equal(y, y2)
    Xq, yq = read_csv(path, labelled=None)
    assert np.array_equal(X, Xq) and np.array_equal(y, yq)


def test_csv_unlabelled(tmp_path):
    path = tmp_path / "q.csv"
    write_csv(path, [[0.5, 0.25]])
    X, y = read_csv(path, labelled=None)
    assert y is None and X.tolist() == [[0.5, 0.25]]
    with pytest.raises(DatasetError, match="line 1"):
        read_csv(path, labelled=True)


@pytest.mark.parametrize(
    "body,line",
    [
        ("x1,label\n0.1,1\n0.2,2\n", 3),
        ("x1,label\n0.1,1\nabc,0\n", 3),
        ("x1,x2,label\n0.1,0.2,1\n0.3,0\n", 3),
        ("x1,label\n0.1,1\n\n0.4,1\nnan,0\n", 5),
    ],
)
def test_csv_errors_name_the_line(tmp_path, body, line):
    path = tmp_path / "bad.csv"
    path.write_text(body)
    with pytest.raises(DatasetError) as info:
        read_csv(path)
    assert info.value.line == line
    assert str(info.value).startswith(f"line {line}:")


def test_csv_empty_and_missing(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("")
    with pytest.raises(DatasetError):
        read_csv(empty)
    header_only = tmp_path / "h.csv"
    header_only.write_text("x1,label\n")
    with pytest.raises(DatasetError):
        read_csv(header_only)
    with pytest.raises(DatasetError):
        read_csv(tmp_path / "missing.csv")
