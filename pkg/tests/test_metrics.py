import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from accel_dse.metrics import ape, class_report, error_report, format_error_table, kendall_tau, rmse, tune_loss

from .oracles import error_stats_direct, kendall_tau_b_bruteforce

positive = st.floats(0.1, 1e4, allow_nan=False)


def test_kendall_small_cases():
    assert kendall_tau([1, 2, 3, 4], [1, 2, 3, 4]) == 1.0
    assert kendall_tau([1, 2, 3, 4], [4, 3, 2, 1]) == -1.0
    # one tie in x: C=2, D=0, ties_x=1 -> 2 / sqrt(3 * 2)
    assert kendall_tau([1, 1, 2], [1, 2, 3]) == pytest.approx(2 / math.sqrt(6))


def test_kendall_matches_bruteforce_random():
    rng = np.random.default_rng(7)
    for _ in range(100):
        n = int(rng.integers(2, 51))
        x = rng.integers(0, 8, n).astype(float)  # coarse values force ties
        y = rng.integers(0, 8, n).astype(float)
        if len(set(x)) < 2 or len(set(y)) < 2:
            continue
        assert kendall_tau(x, y) == pytest.approx(kendall_tau_b_bruteforce(x, y), abs=1e-12)


@given(st.lists(st.tuples(st.integers(-5, 5), st.integers(-5, 5)), min_size=2, max_size=30))
def test_kendall_symmetry_and_bounds(pairs):
    x = [p[0] for p in pairs]
    y = [p[1] for p in pairs]
    if len(set(x)) < 2 or len(set(y)) < 2:
        with pytest.raises(ValueError):
            kendall_tau(x, y)
        return
    t = kendall_tau(x, y)
    assert -1 - 1e-12 <= t <= 1 + 1e-12
    assert t == pytest.approx(kendall_tau(y, x))
    assert kendall_tau(x, [-v for v in y]) == pytest.approx(-t)


@given(st.lists(st.tuples(positive, positive), min_size=1, max_size=40))
def test_error_report_matches_direct(pairs):
    a = [p[0] for p in pairs]
    p = [p[1] for p in pairs]
    r = error_report(a, p)
    mean, mx, sd = error_stats_direct(a, p)
    assert r.mu_ape == pytest.approx(mean, rel=1e-9, abs=1e-9)
    assert r.mape == pytest.approx(mx, rel=1e-9, abs=1e-9)
    assert r.std_ape == pytest.approx(sd, rel=1e-7, abs=1e-7)
    assert r.n == len(a)
    assert r.rmse == pytest.approx(math.sqrt(sum((x - y) ** 2 for x, y in zip(a, p)) / len(a)))


def test_error_report_zero_when_exact():
    r = error_report([1.0, 2.0, 5.0], [1.0, 2.0, 5.0])
    assert (r.mu_ape, r.mape, r.std_ape, r.rmse) == (0.0, 0.0, 0.0, 0.0)


def test_ape_guards():
    assert ape([2.0], [3.0]).tolist() == [50.0]
    with pytest.raises(ValueError):
        ape([0.0, 1.0], [1.0, 1.0])
    with pytest.raises(ValueError):
        error_report([1.0, 2.0], [1.0])
    with pytest.raises(ValueError):
        rmse([], [])


def test_tune_loss_weighting():
    r = error_report([1.0, 1.0], [1.1, 1.3])
    assert tune_loss(r) == pytest.approx(r.mu_ape + 0.3 * r.mape)


def test_class_report_counts():
    c = class_report([1, 1, 0, 0, 1], [1, 0, 0, 1, 1])
    assert (c.tp, c.fp, c.tn, c.fn) == (2, 1, 1, 1)
    assert c.accuracy == pytest.approx(0.6)
    assert c.f1 == pytest.approx(2 * 2 / (2 * 2 + 1 + 1))


def test_format_error_table_layout():
    r = error_report([1.0, 2.0], [1.0, 2.0])
    text = format_error_table({"gbdt": {"power_mw": r, "area_um2": r}})
    lines = text.splitlines()
    assert "power_mw" in lines[0] and "area_um2" in lines[0]
    assert lines[-1].startswith("gbdt")
    assert lines[-1].count("0.00") == 6


def test_documented_examples():
    r = error_report([100, 200], [90, 220])
    assert (r.mu_ape, r.mape, r.std_ape) == (pytest.approx(10), pytest.approx(10), pytest.approx(0, abs=1e-12))
    assert r.rmse == pytest.approx(math.sqrt(250))
    r = error_report([100], [130])
    assert (r.mu_ape, r.mape, r.std_ape, r.rmse) == (pytest.approx(30), pytest.approx(30), 0.0, pytest.approx(30))
    assert kendall_tau([1, 2, 3], [1, 3, 2]) == pytest.approx(1 / 3)
    c = class_report([True] * 10 + [False] * 10, [True] * 9 + [False] + [True] + [False] * 9)
    assert (c.accuracy, c.f1) == (pytest.approx(0.9), pytest.approx(0.9))
    c = class_report([True] * 4, [False] * 4)
    assert (c.accuracy, c.f1) == (0.0, 0.0)


@given(st.lists(st.tuples(positive, positive), min_size=1, max_size=30), st.floats(0.01, 100.0))
def test_error_report_scale_invariance(pairs, k):
    a = np.array([p[0] for p in pairs])
    p = np.array([p[1] for p in pairs])
    r, rk = error_report(a, p), error_report(a * k, p * k)
    assert rk.mu_ape == pytest.approx(r.mu_ape, rel=1e-9, abs=1e-9)
    assert rk.mape == pytest.approx(r.mape, rel=1e-9, abs=1e-9)
    assert rk.rmse == pytest.approx(r.rmse * k, rel=1e-9, abs=1e-12)
    assert r.mape >= r.mu_ape - 1e-12


@given(st.lists(st.integers(-20, 20), min_size=3, max_size=25, unique=True), st.lists(st.integers(-5, 5), min_size=25, max_size=25))
def test_kendall_monotone_transform_invariance(x, y):
    y = y[: len(x)]
    if len(set(y)) < 2:
        return
    assert kendall_tau([v**3 + 7 for v in x], y) == pytest.approx(kendall_tau(x, y))
