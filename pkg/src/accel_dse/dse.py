"""Multi-objective TPE search over (energy, area) with hard constraints.

Trials are split into good and bad sets by nondomination rank (crowding
distance fills the last partial front), each set gets a factorized Parzen
density, and the next configuration is the candidate drawn from the good
density that maximizes the good/bad density ratio.
"""

from __future__ import annotations

import json
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import ndtr, ndtri

from .netlist import LogicalHierarchyGraph
from .oracle import BackendKnobs, OracleParams, evaluate
from .param_space import CAT, INT, Configuration, ParameterSpace, ParameterSpec, decode_unit, validate
from .pipeline import DesignSpace, design_graph, encode_point
from .roi import roi_label
from .sampling import SobolSequence
from .surrogate.ensemble import StackedEnsemble
from .surrogate.gcn import GcnModel
from .surrogate.inputs import ModelInputs
from .surrogate.two_stage import TwoStageModel


class NoFeasibleConfiguration(RuntimeError):
    pass


@dataclass(frozen=True)
class CostSpec:
    alpha: float = 1.0  # 1/mJ
    beta: float = 0.001  # 1/um^2
    p_max: float = math.inf  # mW
    r_max: float = math.inf  # ms

    def __post_init__(self) -> None:
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("cost weights must be >= 0")
        if not (self.p_max > 0 and self.r_max > 0):
            raise ValueError("power and runtime limits must be positive")

    def cost(self, energy: float, area: float) -> float:
        return self.alpha * energy + self.beta * area


@dataclass(frozen=True)
class Prediction:
    """Predictor output for one configuration; ``metrics`` is None when discarded."""

    roi: bool
    metrics: Mapping[str, float] | None = None


@dataclass(frozen=True)
class Trial:
    index: int
    cfg: Configuration
    objectives: tuple[float, float] | None  # (energy_mj, area_um2)
    aux: Mapping[str, float]  # power_mw, runtime_ms, f_eff_ghz
    feasible: bool
    roi: bool
    startup: bool = False

    @property
    def energy(self) -> float:
        return self.objectives[0]

    @property
    def area(self) -> float:
        return self.objectives[1]

    def to_json(self) -> dict:
        return {
            "index": self.index,
            "cfg": self.cfg.to_json(),
            "energy_mj": None if self.objectives is None else self.objectives[0],
            "area_um2": None if self.objectives is None else self.objectives[1],
            **{k: float(v) for k, v in self.aux.items()},
            "roi": self.roi,
            "feasible": self.feasible,
            "startup": self.startup,
        }


# --- dominance ----------------------------------------------------------------

def dominates(a: Sequence[float], b: Sequence[float]) -> bool:
    return a[0] <= b[0] and a[1] <= b[1] and (a[0] < b[0] or a[1] < b[1])


def pareto_front(trials: Sequence[Trial]) -> list[Trial]:
    """Feasible trials not dominated by any other feasible trial, in input order."""
    feas = [t for t in trials if t.feasible]
    objs = np.array([t.objectives for t in feas], dtype=float).reshape(-1, 2)
    keep = []
    for i, t in enumerate(feas):
        o = objs[i]
        dom = np.all(objs <= o, axis=1) & np.any(objs < o, axis=1)
        if not dom.any():
            keep.append(t)
    return keep


def nondomination_fronts(objs: np.ndarray) -> list[list[int]]:
    remaining = list(range(len(objs)))
    fronts = []
    while remaining:
        sub = objs[remaining]
        front = [
            remaining[i]
            for i in range(len(remaining))
            if not np.any(np.all(sub <= sub[i], axis=1) & np.any(sub < sub[i], axis=1))
        ]
        fronts.append(front)
        chosen = set(front)
        remaining = [r for r in remaining if r not in chosen]
    return fronts


def crowding_distance(objs: np.ndarray) -> np.ndarray:
    n = len(objs)
    dist = np.zeros(n)
    if n <= 2:
        return np.full(n, np.inf)
    for k in range(objs.shape[1]):
        order = np.argsort(objs[:, k], kind="stable")
        span = objs[order[-1], k] - objs[order[0], k]
        dist[order[0]] = dist[order[-1]] = np.inf
        if span > 0:
            dist[order[1:-1]] += (objs[order[2:], k] - objs[order[:-2], k]) / span
    return dist


def split_good_bad(trials: Sequence[Trial], gamma: float) -> tuple[list[Trial], list[Trial]]:
    """Good set of size min(ceil(gamma * n), feasible count), n = all trials.

    Feasible trials fill the good set front by front; the front that does not
    fit whole contributes its members in descending crowding distance, ties
    going to lower energy and then to earlier trials. Infeasible trials are
    always bad.
    """
    if not 0 < gamma < 1:
        raise ValueError("gamma must be in (0, 1)")
    feas = [t for t in trials if t.feasible]
    if len(feas) < 2:
        raise ValueError("split needs at least 2 feasible trials")
    n_good = min(math.ceil(gamma * len(trials)), len(feas))
    objs = np.array([t.objectives for t in feas], dtype=float)
    chosen: list[int] = []
    for front in nondomination_fronts(objs):
        if len(chosen) + len(front) <= n_good:
            chosen += front
            continue
        cd = crowding_distance(objs[front])
        order = sorted(range(len(front)), key=lambda i: (-cd[i], objs[front[i], 0], front[i]))
        chosen += [front[i] for i in order[: n_good - len(chosen)]]
        break
    good_ids = {id(feas[i]) for i in chosen}
    good = [t for t in trials if id(t) in good_ids]
    bad = [t for t in trials if id(t) not in good_ids]
    return good, bad


# --- Parzen densities -----------------------------------------------------------

class ParzenDensity:
    """One-dimensional Parzen estimator for a parameter spec.

    Ranges use Gaussian kernels truncated to [low, high] (in the log domain for
    log-scale specs); categoricals use add-one smoothed frequencies.
    """

    def __init__(self, spec: ParameterSpec, values: Sequence):
        if len(values) == 0:
            raise ValueError("Parzen density needs at least one observation")
        self.spec = spec
        n = len(values)
        if spec.kind == CAT:
            k = len(spec.choices)
            counts = np.zeros(k)
            for v in values:
                counts[spec.choices.index(str(v))] += 1
            self.probs = (counts + 1.0) / (n + k)
            return
        self.lo, self.hi = self._t(spec.low), self._t(spec.high)
        rng = self.hi - self.lo
        self.mu = np.array([self._t(v) for v in values], dtype=float)
        self.sigma = max(rng * 1.06 * n ** (-0.2), rng * 0.01)
        self.mass = ndtr((self.hi - self.mu) / self.sigma) - ndtr((self.lo - self.mu) / self.sigma)

    def _t(self, v) -> float:
        return math.log(float(v)) if self.spec.log_scale else float(v)

    def pdf(self, x) -> np.ndarray:
        """Density at ``x`` (in the spec's value domain, or the log domain for log-scale specs)."""
        if self.spec.kind == CAT:
            return np.array([self.probs[self.spec.choices.index(str(v))] for v in np.atleast_1d(x)])
        t = np.atleast_1d(np.asarray(x, dtype=float))
        z = (t[:, None] - self.mu[None, :]) / self.sigma
        k = np.exp(-0.5 * z * z) / (self.sigma * math.sqrt(2 * math.pi) * self.mass[None, :])
        inside = (t >= self.lo) & (t <= self.hi)
        return np.where(inside, k.mean(axis=1), 0.0)

    def log_pdf_values(self, values: Sequence) -> np.ndarray:
        if self.spec.kind == CAT:
            return np.log(self.pdf(values))
        return np.log(np.maximum(self.pdf([self._t(v) for v in values]), 1e-300))

    def sample(self, rng: np.random.Generator, k: int) -> list:
        spec = self.spec
        if spec.kind == CAT:
            idx = rng.choice(len(spec.choices), size=k, p=self.probs)
            return [spec.choices[i] for i in idx]
        comp = rng.integers(0, len(self.mu), k)
        mu = self.mu[comp]
        a = ndtr((self.lo - mu) / self.sigma)
        b = ndtr((self.hi - mu) / self.sigma)
        u = a + rng.random(k) * (b - a)
        t = np.clip(mu + self.sigma * ndtri(np.clip(u, 1e-300, 1 - 1e-16)), self.lo, self.hi)
        x = np.exp(t) if spec.log_scale else t
        if spec.kind == INT:
            return [int(min(max(math.floor(v + 0.5), int(spec.low)), int(spec.high))) for v in x]
        return [float(min(max(v, spec.low), spec.high)) for v in x]


def parzen_density(values: Sequence, spec: ParameterSpec) -> ParzenDensity:
    return ParzenDensity(spec, values)


# --- MOTPE --------------------------------------------------------------------

@dataclass
class MotpeState:
    space: ParameterSpace
    trials: list[Trial] = field(default_factory=list)
    n_startup: int = 20
    gamma: float = 0.25
    candidates_per_step: int = 24
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0 < self.gamma < 1:
            raise ValueError("gamma must be in (0, 1)")
        if self.n_startup < 1 or self.candidates_per_step < 1:
            raise ValueError("n_startup and candidates_per_step must be >= 1")


@lru_cache(maxsize=64)
def _shift(seed: int, dim: int) -> tuple[float, ...]:
    return tuple(np.random.default_rng([seed, 0x5EED]).random(dim))


def startup_point(state: MotpeState, k: int) -> Configuration:
    """k-th Sobol point, randomly shifted modulo 1 by a seed-derived offset."""
    dim = len(state.space)
    pts = SobolSequence(dim).draw(k + 1)
    u = (pts[-1] + np.array(_shift(state.seed, dim))) % 1.0
    return decode_unit(state.space, u)


def motpe_suggest(state: MotpeState) -> tuple[Configuration, bool]:
    """Next configuration and whether it came from the startup path."""
    n = len(state.trials)
    n_feas = sum(t.feasible for t in state.trials)
    if n < state.n_startup or n_feas == 0:
        return startup_point(state, n), True
    if n_feas == 1:
        good = [t for t in state.trials if t.feasible]
        bad = [t for t in state.trials if not t.feasible]
    else:
        good, bad = split_good_bad(state.trials, state.gamma)
    rng = np.random.default_rng([state.seed, n])
    k = state.candidates_per_step
    cols, score = {}, np.zeros(k)
    for spec in state.space:
        l = ParzenDensity(spec, [t.cfg[spec.name] for t in good])
        cols[spec.name] = l.sample(rng, k)
        if bad:
            g = ParzenDensity(spec, [t.cfg[spec.name] for t in bad])
            score += l.log_pdf_values(cols[spec.name]) - g.log_pdf_values(cols[spec.name])
    best = int(np.argmax(score)) if bad else 0
    return Configuration({name: cols[name][best] for name in state.space.names}), False


def motpe_observe(state: MotpeState, cfg: Configuration, pred: Prediction, cost: CostSpec, startup: bool = False) -> Trial:
    bad = validate(state.space, cfg)
    if bad:
        raise ValueError(f"invalid configuration: {bad}")
    if pred.metrics is None:
        trial = Trial(len(state.trials), Configuration(cfg), None, {}, False, pred.roi, startup)
    else:
        m = pred.metrics
        objectives = (float(m["energy_mj"]), float(m["area_um2"]))
        aux = {"power_mw": float(m["power_mw"]), "runtime_ms": float(m["runtime_ms"]), "f_eff_ghz": float(m["f_eff_ghz"])}
        feasible = (
            bool(pred.roi)
            and aux["power_mw"] < cost.p_max
            and aux["runtime_ms"] < cost.r_max
            and all(math.isfinite(v) for v in objectives)
        )
        trial = Trial(len(state.trials), Configuration(cfg), objectives, aux, feasible, pred.roi, startup)
    state.trials.append(trial)
    return trial


def select_best(pareto: Sequence[Trial], cost: CostSpec) -> Trial:
    if not pareto:
        raise NoFeasibleConfiguration("no feasible configuration")
    return min(pareto, key=lambda t: (cost.cost(t.energy, t.area), t.energy, t.area))


def hypervolume_2d(points: Sequence[Sequence[float]], ref: Sequence[float]) -> float:
    """Area dominated by ``points`` (minimization) and bounded by ``ref``."""
    pts = sorted((float(p[0]), float(p[1])) for p in points if p[0] < ref[0] and p[1] < ref[1])
    hv, best_y = 0.0, float(ref[1])
    for i, (x, y) in enumerate(pts):
        best_y = min(best_y, y)
        x_next = pts[i + 1][0] if i + 1 < len(pts) else float(ref[0])
        hv += (x_next - x) * (float(ref[1]) - best_y)
    return hv


def reference_point(*trial_sets: Sequence[Trial], scale: float = 1.1) -> tuple[float, float] | None:
    objs = [t.objectives for ts in trial_sets for t in ts if t.feasible]
    if not objs:
        return None
    a = np.array(objs)
    return (float(a[:, 0].max() * scale), float(a[:, 1].max() * scale))


def hypervolume_trace(trials: Sequence[Trial], ref: Sequence[float] | None) -> list[float]:
    out, front = [], []
    for t in trials:
        if t.feasible:
            front = [p for p in front if not dominates(t.objectives, p)]
            if not any(dominates(p, t.objectives) or p == t.objectives for p in front):
                front.append(t.objectives)
        out.append(0.0 if ref is None else hypervolume_2d(front, ref))
    return out


# --- predictors -----------------------------------------------------------------

class OraclePredictor:
    """Ground truth: oracle metrics, ROI label from the oracle's f_eff."""

    def __init__(self, ref_space: DesignSpace, params: OracleParams, eps: float):
        self.ref, self.params, self.eps = ref_space, params, eps

    def __call__(self, cfg: Mapping) -> Prediction:
        arch, knobs = split_cfg(self.ref, cfg)
        backend, system = evaluate(self.ref.arch, arch, knobs, self.params)
        metrics = {
            "power_mw": backend.power_P,
            "f_eff_ghz": backend.f_effective,
            "area_um2": backend.area_A,
            "energy_mj": system.energy_E,
            "runtime_ms": system.runtime_T,
        }
        return Prediction(roi_label(knobs.f_target, backend.f_effective, self.eps), metrics)


def _needs_graphs(model) -> bool:
    if isinstance(model, GcnModel):
        return True
    if isinstance(model, StackedEnsemble):
        return any(_needs_graphs(b) for b in model.bases)
    if isinstance(model, TwoStageModel):
        return model.classifier_graph_sums or any(_needs_graphs(r) for r in model.regressors.values())
    return bool(getattr(model, "hyperparameters", {}).get("graph_sums", False))


class SurrogatePredictor:
    """Two-stage model as predictor; non-ROI points come back discarded."""

    def __init__(self, ref_space: DesignSpace, model: TwoStageModel):
        self.ref, self.model = ref_space, model
        self.graphs = _needs_graphs(model)
        self._graph_cache: dict = {}

    def _graph(self, arch: Configuration) -> LogicalHierarchyGraph:
        key = tuple(sorted(arch.items()))
        if key not in self._graph_cache:
            self._graph_cache[key] = design_graph(self.ref.arch, arch)
        return self._graph_cache[key]

    def __call__(self, cfg: Mapping) -> Prediction:
        arch, knobs = split_cfg(self.ref, cfg)
        x = encode_point(self.ref, arch, knobs)[None, :]
        data = ModelInputs(x, np.zeros(1, np.int64), [self._graph(arch)]) if self.graphs else ModelInputs(x)
        out = self.model.predict_one(data)
        if not out:
            return Prediction(False, None)
        return Prediction(True, out)


def split_cfg(ref: DesignSpace, cfg: Mapping) -> tuple[Configuration, BackendKnobs]:
    arch = Configuration({n: cfg[n] for n in ref.arch.names})
    bad = validate(ref.arch, arch)
    if bad:
        raise ValueError(f"configuration outside the model's space: {bad}")
    return arch, BackendKnobs(float(cfg["f_target"]), float(cfg["util"]))


# --- runs ---------------------------------------------------------------------

@dataclass
class DseReport:
    trials: list[Trial]
    pareto: list[Trial]
    best: Trial
    hypervolume: list[float]
    ref_point: tuple[float, float] | None

    def to_json(self) -> dict:
        return {
            "trials": [t.to_json() for t in self.trials],
            "pareto": [t.to_json() for t in self.pareto],
            "best": self.best.to_json(),
            "hypervolume": self.hypervolume,
            "ref_point": None if self.ref_point is None else list(self.ref_point),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1, sort_keys=True)

    def top(self, k: int, cost: CostSpec) -> list[Trial]:
        return sorted(self.pareto, key=lambda t: (cost.cost(t.energy, t.area), t.energy, t.area))[:k]


def _report(trials: list[Trial], cost: CostSpec, ref: tuple[float, float] | None = None) -> DseReport:
    pareto = pareto_front(trials)
    best = select_best(pareto, cost)
    ref = ref if ref is not None else reference_point(trials)
    return DseReport(trials, pareto, best, hypervolume_trace(trials, ref), ref)


def run_dse(
    space: ParameterSpace,
    predictor,
    budget: int,
    cost: CostSpec,
    seed: int = 0,
    n_startup: int = 20,
    gamma: float = 0.25,
    candidates_per_step: int = 24,
) -> DseReport:
    if budget < n_startup:
        raise ValueError(f"budget ({budget}) must be >= n_startup ({n_startup})")
    state = MotpeState(space, [], n_startup, gamma, candidates_per_step, seed)
    for _ in range(budget):
        cfg, startup = motpe_suggest(state)
        motpe_observe(state, cfg, predictor(cfg), cost, startup)
    return _report(state.trials, cost)


def random_search(space: ParameterSpace, predictor, budget: int, cost: CostSpec, seed: int = 0) -> DseReport:
    """Baseline: independent uniform draws over the space."""
    rng = np.random.default_rng([seed, 0xBA5E])
    state = MotpeState(space, seed=seed)
    for _ in range(budget):
        cfg = decode_unit(space, rng.random(len(space)))
        motpe_observe(state, cfg, predictor(cfg), cost)
    return _report(state.trials, cost)


def final_hypervolumes(a: Sequence[Trial], b: Sequence[Trial]) -> tuple[float, float]:
    """Final hypervolume of two runs against a shared reference point."""
    ref = reference_point(a, b)
    if ref is None:
        return 0.0, 0.0
    return (
        hypervolume_2d([t.objectives for t in pareto_front(a)], ref),
        hypervolume_2d([t.objectives for t in pareto_front(b)], ref),
    )


def scatter_svg(trials: Sequence[Trial], width: int = 480, height: int = 360) -> str:
    """Runtime vs energy, marker radius by area; infeasible points drawn as red crosses."""
    pts = [t for t in trials if t.objectives is not None and "runtime_ms" in t.aux]
    pad = 40
    if not pts:
        return f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}"></svg>'
    xs = np.array([t.aux["runtime_ms"] for t in pts])
    ys = np.array([t.energy for t in pts])
    areas = np.array([t.area for t in pts])

    def sc(v, lo, hi, a, b):
        return a + (b - a) * ((v - lo) / (hi - lo) if hi > lo else 0.5)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<text x="{width / 2}" y="{height - 8}" text-anchor="middle" font-size="12">runtime (ms)</text>',
        f'<text x="12" y="{height / 2}" font-size="12" transform="rotate(-90 12 {height / 2})" text-anchor="middle">energy (mJ)</text>',
    ]
    for t, x, y, a in zip(pts, xs, ys, areas):
        cx = sc(x, xs.min(), xs.max(), pad, width - pad)
        cy = sc(y, ys.min(), ys.max(), height - pad, pad)
        r = sc(a, areas.min(), areas.max(), 2.0, 7.0)
        if t.feasible:
            out.append(f'<circle cx="{cx:.1f}" cy="{cy:.1f}" r="{r:.1f}" fill="green" fill-opacity="0.5"/>')
        else:
            out.append(
                f'<path d="M{cx - 3:.1f},{cy - 3:.1f} L{cx + 3:.1f},{cy + 3:.1f} M{cx - 3:.1f},{cy + 3:.1f} '
                f'L{cx + 3:.1f},{cy - 3:.1f}" stroke="red"/>'
            )
    out.append("</svg>")
    return "\n".join(out)
