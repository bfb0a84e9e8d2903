import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from accel_dse.oracle import (
    BackendKnobs,
    BackendResult,
    OracleParams,
    effective_size,
    evaluate,
    evaluate_backend,
    evaluate_system,
    generate_dataset,
    min_period,
    records_from_csv,
    records_to_csv,
)
from accel_dse.param_space import FLOAT, INT, ParameterSpace, ParameterSpec
from accel_dse.roi import roi_label

# one float parameter at its upper bound gives s = 2 with unit weight
ONE = ParameterSpace((ParameterSpec("x", FLOAT, low=0.0, high=1.0),))
S2 = {"x": 1.0}
P = OracleParams()
THREE = ParameterSpace(
    (
        ParameterSpec("a", INT, low=4, high=8),
        ParameterSpec("b", FLOAT, low=0.0, high=2.0),
        ParameterSpec("c", INT, low=1, high=64, log_scale=True),
    )
)
cfg3 = st.fixed_dictionaries(
    {"a": st.integers(4, 8), "b": st.floats(0.0, 2.0), "c": st.integers(1, 64)}
)


def test_positive_slack_example():
    t_min = 0.5 * (1 + 0.3 * math.log(2))
    assert t_min == pytest.approx(0.6040, abs=5e-5)
    r = evaluate_backend(ONE, S2, BackendKnobs(0.5, 0.5), P)
    assert r.f_effective == pytest.approx(1 / 1.95)
    assert r.f_effective == pytest.approx(0.5128, abs=5e-5)
    assert r.f_effective > 0.5
    assert r.worst_slack == pytest.approx(0.05)


def test_saturation_example():
    r = evaluate_backend(ONE, S2, BackendKnobs(2.0, 0.5), P)
    assert r.f_effective == pytest.approx(1 / (0.5 * (1 + 0.3 * math.log(2))))
    assert r.f_effective == pytest.approx(1.6556, abs=2e-4)
    assert r.f_effective < 2.0


def test_area_and_power_examples():
    r = evaluate_backend(ONE, S2, BackendKnobs(0.5, 0.5), P)
    assert r.area_A == pytest.approx(40000.0)
    assert r.power_P == pytest.approx(2 * 2 + 30 * 2 * (1 / 1.95))


def test_runtime_example():
    backend = BackendResult(power_P=10.0, f_effective=1.0, area_A=1.0, worst_slack=0.0)
    sys_ = evaluate_system(ONE, backend, S2, OracleParams(workload_ops=1e6))
    assert sys_.runtime_T == pytest.approx(0.5)
    assert sys_.energy_E == pytest.approx(10.0 * 0.5 * 1e-3)
    doubled = evaluate_system(ONE, BackendResult(10.0, 2.0, 1.0, 0.0), S2, OracleParams(workload_ops=1e6))
    assert doubled.runtime_T == pytest.approx(sys_.runtime_T / 2)


def test_effective_size_examples():
    assert effective_size(THREE, {"a": 4, "b": 0.0, "c": 1}, P) == 1.0
    assert effective_size(THREE, {"a": 6, "b": 0.0, "c": 1}, P) == pytest.approx(1.5)
    w = OracleParams(weights={"a": 2.0, "b": 0.0})
    assert effective_size(THREE, {"a": 8, "b": 2.0, "c": 1}, w) == pytest.approx(3.0)


@given(cfg3, st.sampled_from(["a", "b", "c"]), st.floats(0.0, 1.0))
def test_effective_size_monotone(cfg, name, u):
    spec = THREE[name]
    raised = dict(cfg)
    raised[name] = max(cfg[name], spec.from_unit(u))
    assert effective_size(THREE, raised, P) >= effective_size(THREE, cfg, P)


@given(cfg3, st.floats(0.4, 2.2), st.floats(0.4, 0.99))
def test_backend_invariants(cfg, f, util):
    knobs = BackendKnobs(f, util)
    backend, system = evaluate(THREE, cfg, knobs, P)
    assert backend.power_P > 0 and backend.area_A > 0 and backend.f_effective > 0
    assert system.energy_E == pytest.approx(backend.power_P * system.runtime_T * 1e-3)
    higher = evaluate_backend(THREE, cfg, BackendKnobs(f, min(1.0, util + 0.01)), P)
    assert higher.area_A < backend.area_A
    faster = evaluate_backend(THREE, cfg, BackendKnobs(f * 1.05, util), P)
    assert faster.f_effective >= backend.f_effective
    s = effective_size(THREE, cfg, P)
    t_min = min_period(s, util, P)
    if 1 / f - P.m > t_min * (1 + 1e-9):
        assert backend.f_effective > f
    # between 1/f - m and 1/f the floor still beats the target
    elif t_min > (1 / f) * (1 + 1e-9):
        assert backend.f_effective < f


# the slack-side gap peaks at m / T_min <= m / t0 = 0.1, so the band is one
# interval whenever eps >= m / t0
@given(cfg3, st.floats(0.4, 0.99), st.sampled_from([0.1, 0.15, 0.2]))
def test_roi_band_contiguous(cfg, util, eps):
    fs = np.linspace(0.05, 5.0, 2000)
    labels = [roi_label(f, evaluate_backend(THREE, cfg, BackendKnobs(float(f), util), P).f_effective, eps) for f in fs]
    idx = np.flatnonzero(labels)
    if idx.size:
        assert idx[-1] - idx[0] + 1 == idx.size


def test_roi_band_splits_below_gap_bound():
    fs = np.linspace(0.05, 5.0, 2000)
    cfg = {"a": 4, "b": 0.0, "c": 1}
    labels = [roi_label(f, evaluate_backend(THREE, cfg, BackendKnobs(float(f), 0.5), P).f_effective, 0.05) for f in fs]
    idx = np.flatnonzero(labels)
    assert idx[-1] - idx[0] + 1 > idx.size


def test_noise_is_deterministic_and_bounded():
    noisy = P.with_noise(0.02)
    knobs = BackendKnobs(1.0, 0.6)
    a = evaluate_backend(ONE, S2, knobs, noisy)
    b = evaluate_backend(ONE, S2, knobs, noisy)
    clean = evaluate_backend(ONE, S2, knobs, P)
    assert a == b
    assert a != clean
    assert abs(a.area_A / clean.area_A - 1) <= 0.02 + 1e-12


def test_generate_dataset_counts_and_csv():
    rng = np.random.default_rng(0)
    arch = [{"a": int(rng.integers(4, 9)), "b": float(rng.random() * 2), "c": int(rng.integers(1, 65))} for _ in range(24)]
    knobs = [BackendKnobs(0.4 + 1.8 * rng.random(), 0.4 + 0.5 * rng.random()) for _ in range(30)]
    recs = generate_dataset(THREE, arch, knobs, P, 0.1)
    assert len(recs) == 720
    assert [r.design for r in recs[:31:30]] == ["d0000", "d0001"]
    assert generate_dataset(THREE, arch, [], P, 0.1) == []
    text = records_to_csv(THREE, recs)
    assert text.splitlines()[0] == (
        "design,a,b,c,f_target_ghz,util,power_mw,f_eff_ghz,area_um2,energy_mj,runtime_ms,roi"
    )
    assert records_to_csv(THREE, generate_dataset(THREE, arch, knobs, P, 0.1)) == text
    back = records_from_csv(THREE, text)
    assert [r.metrics() for r in back] == [r.metrics() for r in recs]
    assert [r.roi for r in back] == [r.roi for r in recs]


def test_guards(tmp_path):
    with pytest.raises(ValueError):
        BackendKnobs(0.0, 0.5)
    with pytest.raises(ValueError):
        BackendKnobs(1.0, 1.5)
    with pytest.raises(ValueError):
        OracleParams(a=0.0)
    with pytest.raises(ValueError):
        OracleParams(eta=-1.0)
    path = tmp_path / "o.json"
    path.write_text(json.dumps(P.to_json()))
    assert OracleParams.load(path) == P
