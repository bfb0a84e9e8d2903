"""Typed, bounded parameter spaces and the configurations drawn from them.

Everything downstream (samplers, oracle, surrogate models, DSE) shares the
numeric encoding defined here, so the order of specs in a space is part of
its identity.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import numpy as np

Value = Union[int, float, str]

INT = "int"
FLOAT = "float"
CAT = "cat"
_KINDS = (INT, FLOAT, CAT)


class InvalidConfiguration(ValueError):
    """Raised when an operation requires a valid configuration and gets one that is not."""

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("invalid configuration: " + "; ".join(self.violations))


@dataclass(frozen=True)
class ParameterSpec:
    name: str
    kind: str
    low: float | None = None
    high: float | None = None
    choices: tuple[str, ...] = ()
    log_scale: bool = False

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise ValueError(f"{self.name}: unknown kind {self.kind!r}")
        if self.kind == CAT:
            if not self.choices:
                raise ValueError(f"{self.name}: categorical needs choices")
            object.__setattr__(self, "choices", tuple(str(c) for c in self.choices))
            if len(set(self.choices)) != len(self.choices):
                raise ValueError(f"{self.name}: duplicate choices")
            return
        if self.low is None or self.high is None:
            raise ValueError(f"{self.name}: range needs low and high")
        if not self.low < self.high:
            raise ValueError(f"{self.name}: low ({self.low}) must be < high ({self.high})")
        if self.kind == INT and not (float(self.low).is_integer() and float(self.high).is_integer()):
            raise ValueError(f"{self.name}: integer bounds required")
        if self.log_scale and self.low <= 0:
            raise ValueError(f"{self.name}: log_scale requires positive bounds")

    @property
    def is_range(self) -> bool:
        return self.kind != CAT

    @property
    def width(self) -> int:
        """Number of encoded columns this spec produces."""
        return len(self.choices) if self.kind == CAT else 1

    def check(self, value) -> str | None:
        """Return a violation message for ``value`` or None if it is in-domain."""
        if self.kind == CAT:
            if str(value) not in self.choices:
                return f"{self.name}: {value!r} not in {list(self.choices)}"
            return None
        if isinstance(value, bool) or not isinstance(value, (int, float, np.integer, np.floating)):
            return f"{self.name}: {value!r} is not a number"
        if not math.isfinite(float(value)):
            return f"{self.name}: {value!r} is not finite"
        if self.kind == INT and not float(value).is_integer():
            return f"{self.name}: {value!r} is not an integer"
        if value < self.low or value > self.high:
            return f"{self.name}: {value!r} out of range [{self.low}, {self.high}]"
        return None

    def normalize(self, value) -> float:
        lo, hi, v = float(self.low), float(self.high), float(value)
        if self.log_scale:
            lo, hi, v = math.log(lo), math.log(hi), math.log(v)
        return (v - lo) / (hi - lo)

    def from_unit(self, u: float) -> Value:
        if self.kind == CAT:
            k = len(self.choices)
            return self.choices[min(int(math.floor(u * k)), k - 1)]
        lo, hi = float(self.low), float(self.high)
        if self.log_scale:
            x = math.exp(math.log(lo) + u * (math.log(hi) - math.log(lo)))
        else:
            x = lo + u * (hi - lo)
        if self.kind == INT:
            # half-up rounding, then clamp
            return int(min(max(math.floor(x + 0.5), int(lo)), int(hi)))
        return min(max(x, lo), hi)

    def coerce(self, raw) -> Value:
        """Parse a CSV/JSON cell into this spec's value type."""
        if self.kind == CAT:
            return str(raw)
        if self.kind == INT:
            f = float(raw)
            return int(f) if f.is_integer() else f
        return float(raw)

    def to_json(self) -> dict:
        d: dict = {"name": self.name, "kind": self.kind}
        if self.kind == CAT:
            d["choices"] = list(self.choices)
        else:
            d["low"], d["high"] = self.low, self.high
        d["log_scale"] = self.log_scale
        return d

    @classmethod
    def from_json(cls, d: Mapping) -> "ParameterSpec":
        kind = d["kind"]
        if kind == CAT:
            return cls(d["name"], CAT, choices=tuple(d["choices"]), log_scale=bool(d.get("log_scale", False)))
        low, high = d["low"], d["high"]
        if kind == INT:
            low, high = int(low), int(high)
        return cls(d["name"], kind, low=low, high=high, log_scale=bool(d.get("log_scale", False)))


class Configuration(Mapping):
    """Immutable name -> value mapping."""

    __slots__ = ("_values",)

    def __init__(self, values: Mapping[str, Value] | Iterable[tuple[str, Value]] = ()):
        self._values = dict(values)

    def __getitem__(self, key: str) -> Value:
        return self._values[key]

    def __iter__(self) -> Iterator[str]:
        return iter(self._values)

    def __len__(self) -> int:
        return len(self._values)

    def __hash__(self) -> int:
        return hash(tuple(sorted((k, str(v)) for k, v in self._values.items())))

    def __eq__(self, other) -> bool:
        if isinstance(other, Mapping):
            return dict(self._values) == dict(other)
        return NotImplemented

    def __repr__(self) -> str:
        return f"Configuration({self._values!r})"

    def merged(self, other: Mapping[str, Value]) -> "Configuration":
        return Configuration({**self._values, **dict(other)})

    def subset(self, names: Iterable[str]) -> "Configuration":
        return Configuration({n: self._values[n] for n in names})

    def to_json(self) -> dict:
        return {k: (v.item() if isinstance(v, np.generic) else v) for k, v in self._values.items()}


@dataclass(frozen=True)
class ParameterSpace:
    specs: tuple[ParameterSpec, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        object.__setattr__(self, "specs", tuple(self.specs))
        names = [s.name for s in self.specs]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate parameter names in {names}")

    def __len__(self) -> int:
        return len(self.specs)

    def __iter__(self) -> Iterator[ParameterSpec]:
        return iter(self.specs)

    def __getitem__(self, name: str) -> ParameterSpec:
        for s in self.specs:
            if s.name == name:
                return s
        raise KeyError(name)

    @property
    def names(self) -> list[str]:
        return [s.name for s in self.specs]

    @property
    def encoded_width(self) -> int:
        return sum(s.width for s in self.specs)

    def encoded_columns(self) -> list[str]:
        cols = []
        for s in self.specs:
            if s.kind == CAT:
                cols.extend(f"{s.name}={c}" for c in s.choices)
            else:
                cols.append(s.name)
        return cols

    def __add__(self, other: "ParameterSpace") -> "ParameterSpace":
        return ParameterSpace(self.specs + other.specs)

    def schema_hash(self) -> str:
        blob = json.dumps(self.to_json(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def to_json(self) -> dict:
        return {"specs": [s.to_json() for s in self.specs]}

    @classmethod
    def from_json(cls, d: Mapping) -> "ParameterSpace":
        return cls(tuple(ParameterSpec.from_json(s) for s in d["specs"]))

    @classmethod
    def load(cls, path: str | Path) -> "ParameterSpace":
        return cls.from_json(json.loads(Path(path).read_text()))


def validate(space: ParameterSpace, cfg: Mapping[str, Value]) -> list[str]:
    """Every problem with ``cfg`` against ``space``; an empty list means valid."""
    violations = []
    for spec in space:
        if spec.name not in cfg:
            violations.append(f"{spec.name}: missing parameter")
            continue
        msg = spec.check(cfg[spec.name])
        if msg:
            violations.append(msg)
    known = set(space.names)
    for name in cfg:
        if name not in known:
            violations.append(f"{name}: unknown parameter")
    return violations


def encode(space: ParameterSpace, cfg: Mapping[str, Value]) -> np.ndarray:
    """Positional numeric encoding: ranges min-max scaled to [0, 1], categoricals one-hot."""
    violations = validate(space, cfg)
    if violations:
        raise InvalidConfiguration(violations)
    out = np.zeros(space.encoded_width)
    j = 0
    for spec in space:
        if spec.kind == CAT:
            out[j + spec.choices.index(str(cfg[spec.name]))] = 1.0
        else:
            out[j] = spec.normalize(cfg[spec.name])
        j += spec.width
    return out


def encode_many(space: ParameterSpace, cfgs: Iterable[Mapping[str, Value]]) -> np.ndarray:
    rows = [encode(space, c) for c in cfgs]
    if not rows:
        return np.zeros((0, space.encoded_width))
    return np.vstack(rows)


def decode_unit(space: ParameterSpace, point) -> Configuration:
    """Map a unit-hypercube point (one coordinate per spec) onto a configuration."""
    point = np.asarray(point, dtype=float).ravel()
    if point.size != len(space):
        raise ValueError(f"expected {len(space)} coordinates, got {point.size}")
    if np.any(point < 0.0) or np.any(point > 1.0):
        raise ValueError("unit coordinates must lie in [0, 1]")
    return Configuration({s.name: s.from_unit(float(u)) for s, u in zip(space.specs, point)})


def configs_to_csv(space: ParameterSpace, cfgs: Iterable[Mapping[str, Value]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(space.names)
    for c in cfgs:
        w.writerow([format_value(c[n]) for n in space.names])
    return buf.getvalue()


def configs_from_csv(space: ParameterSpace, text: str) -> list[Configuration]:
    rows = csv.DictReader(io.StringIO(text))
    return [Configuration({s.name: s.coerce(r[s.name]) for s in space}) for r in rows]


def format_value(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)
