"""Closed-form stand-in for synthesis/place-and-route and system simulation.

Units are fixed throughout: GHz, ns, mW, um^2, mJ, ms.

The backend model reproduces three regimes seen on real flows: at low target
frequency the tool over-delivers (positive slack, f_eff > f_target), at high
target frequency f_eff saturates at the design's intrinsic limit, and pushing
utilization past ``u0`` degrades achievable timing quadratically.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from collections.abc import Mapping, Sequence
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .param_space import (
    CAT,
    Configuration,
    InvalidConfiguration,
    ParameterSpace,
    ParameterSpec,
    decode_unit,
    format_value,
    validate,
)
from .roi import roi_label

F_TARGET = "f_target"
UTIL = "util"


@dataclass(frozen=True)
class BackendKnobs:
    f_target: float  # GHz
    util: float

    def __post_init__(self) -> None:
        if not self.f_target > 0:
            raise ValueError(f"f_target must be > 0, got {self.f_target}")
        if not 0 < self.util <= 1:
            raise ValueError(f"util must be in (0, 1], got {self.util}")

    @property
    def target_period(self) -> float:
        return 1.0 / self.f_target

    def as_config(self) -> dict:
        return {F_TARGET: self.f_target, UTIL: self.util}


@dataclass(frozen=True)
class BackendResult:
    power_P: float  # mW
    f_effective: float  # GHz
    area_A: float  # um^2
    worst_slack: float  # ns


@dataclass(frozen=True)
class SystemResult:
    energy_E: float  # mJ
    runtime_T: float  # ms


@dataclass(frozen=True)
class OracleParams:
    """Oracle constants. ``weights`` maps a range parameter to its size weight,
    or a categorical parameter to a per-choice weight table. Missing range
    parameters weigh 1, missing categoricals contribute nothing."""

    weights: Mapping = field(default_factory=dict)
    A0: float = 10000.0
    t0: float = 0.5
    a: float = 0.3
    b: float = 8.0
    u0: float = 0.7
    m: float = 0.05
    p_leak: float = 2.0
    p_dyn: float = 30.0
    workload_ops: float = 1e6
    eta: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("A0", "t0", "a", "b", "u0", "m", "p_leak", "p_dyn", "workload_ops"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.eta < 0:
            raise ValueError("eta must be >= 0")
        for k, w in self.weights.items():
            vals = w.values() if isinstance(w, Mapping) else [w]
            if any(v < 0 for v in vals):
                raise ValueError(f"negative weight for {k}")

    def to_json(self) -> dict:
        d = asdict(self)
        d["weights"] = {k: (dict(v) if isinstance(v, Mapping) else v) for k, v in self.weights.items()}
        return d

    @classmethod
    def from_json(cls, d: Mapping) -> "OracleParams":
        return cls(**dict(d))

    @classmethod
    def load(cls, path: str | Path) -> "OracleParams":
        return cls.from_json(json.loads(Path(path).read_text()))

    def with_noise(self, eta: float) -> "OracleParams":
        return replace(self, eta=eta)


def effective_size(space: ParameterSpace, cfg: Mapping, params: OracleParams) -> float:
    """s = 1 + sum of weighted normalized range values + categorical choice weights."""
    bad = validate(space, cfg)
    if bad:
        raise InvalidConfiguration(bad)
    s = 1.0
    for spec in space:
        w = params.weights.get(spec.name)
        if spec.kind == CAT:
            if isinstance(w, Mapping):
                s += float(w.get(str(cfg[spec.name]), 0.0))
            continue
        s += (1.0 if w is None else float(w)) * spec.normalize(cfg[spec.name])
    return s


def _hash_unit(params: OracleParams, cfg: Mapping, knobs: BackendKnobs, salt: str) -> float:
    """Deterministic value in [-1, 1] keyed on (seed, cfg, knobs, salt)."""
    key = json.dumps(
        [params.seed, sorted((k, format_value(v)) for k, v in cfg.items()), repr(knobs.f_target), repr(knobs.util), salt]
    )
    h = int.from_bytes(hashlib.blake2b(key.encode(), digest_size=8).digest(), "little")
    return 2.0 * (h / float(2**64 - 1)) - 1.0


def min_period(s: float, util: float, params: OracleParams) -> float:
    """Shortest achievable clock period (ns) for size ``s`` at utilization ``util``."""
    return params.t0 * (1.0 + params.a * math.log(s)) * (1.0 + params.b * max(0.0, util - params.u0) ** 2)


def evaluate_backend(space: ParameterSpace, cfg: Mapping, knobs: BackendKnobs, params: OracleParams) -> BackendResult:
    s = effective_size(space, cfg, params)
    t_target = knobs.target_period
    t_eff = max(min_period(s, knobs.util, params), t_target - params.m)
    f_eff = 1.0 / t_eff
    area = params.A0 * s / knobs.util
    power = params.p_leak * s + params.p_dyn * s * f_eff
    if params.eta > 0:
        f_eff *= 1.0 + params.eta * _hash_unit(params, cfg, knobs, "f")
        area *= 1.0 + params.eta * _hash_unit(params, cfg, knobs, "A")
        power *= 1.0 + params.eta * _hash_unit(params, cfg, knobs, "P")
    return BackendResult(power_P=power, f_effective=f_eff, area_A=area, worst_slack=t_target - 1.0 / f_eff)


def evaluate_system(space: ParameterSpace, backend: BackendResult, cfg: Mapping, params: OracleParams) -> SystemResult:
    parallelism = effective_size(space, cfg, params)
    # ops / (GHz * 1e9 cycles/s * ops/cycle) seconds -> ms
    runtime_ms = params.workload_ops / (backend.f_effective * parallelism * 1e6)
    # mW * ms = uJ -> mJ
    energy_mj = backend.power_P * runtime_ms * 1e-3
    return SystemResult(energy_E=energy_mj, runtime_T=runtime_ms)


METRICS = ("power_mw", "f_eff_ghz", "area_um2", "energy_mj", "runtime_ms")


@dataclass(frozen=True)
class DatasetRecord:
    design: str
    cfg: Configuration
    knobs: BackendKnobs
    backend: BackendResult
    system: SystemResult
    roi: bool

    def metric(self, name: str) -> float:
        return {
            "power_mw": self.backend.power_P,
            "f_eff_ghz": self.backend.f_effective,
            "area_um2": self.backend.area_A,
            "energy_mj": self.system.energy_E,
            "runtime_ms": self.system.runtime_T,
        }[name]

    def metrics(self) -> dict[str, float]:
        return {m: self.metric(m) for m in METRICS}


def evaluate(space: ParameterSpace, cfg: Mapping, knobs: BackendKnobs, params: OracleParams):
    backend = evaluate_backend(space, cfg, knobs, params)
    return backend, evaluate_system(space, backend, cfg, params)


def generate_dataset(
    space: ParameterSpace,
    arch_cfgs: Sequence[Mapping],
    knob_list: Sequence[BackendKnobs],
    params: OracleParams,
    eps: float,
    design_ids: Sequence[str] | None = None,
) -> list[DatasetRecord]:
    """One record per (architecture, knobs) pair, architecture-major."""
    if design_ids is None:
        design_ids = [f"d{i:04d}" for i in range(len(arch_cfgs))]
    if len(design_ids) != len(arch_cfgs):
        raise ValueError("design_ids and arch_cfgs differ in length")
    records = []
    for did, cfg in zip(design_ids, arch_cfgs):
        cfg = Configuration(cfg)
        for knobs in knob_list:
            backend, system = evaluate(space, cfg, knobs, params)
            records.append(
                DatasetRecord(did, cfg, knobs, backend, system, roi_label(knobs.f_target, backend.f_effective, eps))
            )
    return records


def csv_header(space: ParameterSpace) -> list[str]:
    return ["design", *space.names, "f_target_ghz", "util", *METRICS, "roi"]


def records_to_csv(space: ParameterSpace, records: Sequence[DatasetRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(csv_header(space))
    for r in records:
        w.writerow(
            [r.design, *(format_value(r.cfg[n]) for n in space.names), repr(r.knobs.f_target), repr(r.knobs.util)]
            + [repr(float(r.metric(m))) for m in METRICS]
            + [int(r.roi)]
        )
    return buf.getvalue()


def records_from_csv(space: ParameterSpace, text: str) -> list[DatasetRecord]:
    rows = csv.DictReader(io.StringIO(text))
    missing = set(csv_header(space)) - set(rows.fieldnames or [])
    if missing:
        raise ValueError(f"dataset is missing columns {sorted(missing)}")
    out = []
    for r in rows:
        cfg = Configuration({s.name: s.coerce(r[s.name]) for s in space})
        knobs = BackendKnobs(float(r["f_target_ghz"]), float(r["util"]))
        f_eff = float(r["f_eff_ghz"])
        backend = BackendResult(float(r["power_mw"]), f_eff, float(r["area_um2"]), knobs.target_period - 1.0 / f_eff)
        system = SystemResult(float(r["energy_mj"]), float(r["runtime_ms"]))
        out.append(DatasetRecord(r["design"], cfg, knobs, backend, system, r["roi"] in ("1", "True", "true")))
    return out


def backend_space(f_range=(0.4, 2.2), util_range=(0.4, 0.9)) -> ParameterSpace:
    return ParameterSpace(
        (
            ParameterSpec(F_TARGET, "float", low=f_range[0], high=f_range[1]),
            ParameterSpec(UTIL, "float", low=util_range[0], high=util_range[1]),
        )
    )


def knobs_from_unit(space: ParameterSpace, points: np.ndarray) -> list[BackendKnobs]:
    out = []
    for p in np.atleast_2d(points):
        c = decode_unit(space, p)
        out.append(BackendKnobs(float(c[F_TARGET]), float(c[UTIL])))
    return out
