"""Random discrete hyperparameter search.

Tree models are searched in two stages: stage one fixes a large tree count and
samples the other ranges; stage two narrows ``max_depth`` to the stage-one best
plus or minus 3 (and freezes the forest's ``mtries``) and samples again. MLP
and GCN use a single stage. Candidate ``i`` draws its hyperparameters and its
training seed from ``seed ^ i`` so results do not depend on evaluation order.
"""

from __future__ import annotations

import math
from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np

from ..metrics import error_report, rmse, tune_loss
from .gcn import CONV_KINDS, train_gcn
from .inputs import ModelInputs
from .mlp import ACTIVATIONS, train_mlp
from .trees import train_gbdt, train_rf

GBDT, RF, MLP, GCN = "gbdt", "rf", "mlp", "gcn"
KINDS = (GBDT, RF, MLP, GCN)

# (lo, hi) tuples are inclusive integer ranges unless noted; lists are enums.
SEARCH_RANGES = {
    GBDT: {"n_estimators": (20, 500), "max_depth": (2, 20), "learning_rate": [0.05, 0.1, 0.2]},
    RF: {"n_estimators": (50, 1000), "max_depth": (5, 100), "mtries": (1, None)},
    MLP: {"num_layer": (3, 9), "num_node": [8, 16, 32], "activation": list(ACTIVATIONS)},
    GCN: {
        "conv_kind": list(CONV_KINDS),
        "n_conv": (2, 6),
        "num_fc": (2, 9),
        "batch_size": [16, 32, 64],
        "lr": ("log", 1e-5, 1e-2),
    },
}
STAGE1_TREES = {RF: 500, GBDT: 300}


@dataclass(frozen=True)
class HyperparamSearchSpec:
    kind: str
    budget: int
    seed: int = 0
    ranges: Mapping = field(default_factory=dict)  # overrides of SEARCH_RANGES entries
    fixed: Mapping = field(default_factory=dict)  # extra training arguments
    graph_sums: bool = False  # append graph feature sums for flat models

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.budget < 1:
            raise ValueError("search budget must be >= 1")

    def table(self, n_features: int) -> dict:
        t = dict(SEARCH_RANGES[self.kind])
        t.update(self.ranges)
        if "mtries" in t and t["mtries"][1] is None:
            t["mtries"] = (t["mtries"][0], n_features)
        return t


@dataclass
class Candidate:
    index: int
    stage: int
    hp: dict
    loss: float
    model: object = field(repr=False, default=None)

    def to_json(self) -> dict:
        return {"index": self.index, "stage": self.stage, "hp": self.hp, "loss": self.loss}


@dataclass
class SearchResult:
    kind: str
    candidates: list[Candidate]

    @property
    def best(self) -> Candidate:
        return min(self.candidates, key=lambda c: (c.loss, c.index))

    @property
    def model(self):
        return self.best.model

    def ranked(self) -> list[Candidate]:
        return sorted(self.candidates, key=lambda c: (c.loss, c.index))

    def log(self) -> list[dict]:
        return [c.to_json() for c in self.candidates]


def _draw(rng: np.random.Generator, rng_spec):
    if isinstance(rng_spec, list):
        return rng_spec[int(rng.integers(len(rng_spec)))]
    if rng_spec[0] == "log":
        _, lo, hi = rng_spec
        return float(math.exp(rng.uniform(math.log(lo), math.log(hi))))
    lo, hi = rng_spec
    return int(rng.integers(lo, hi + 1))


def sample_hp(table: Mapping, rng: np.random.Generator, fixed: Mapping | None = None) -> dict:
    fixed = dict(fixed or {})
    hp = {}
    for name in sorted(table):
        hp[name] = fixed[name] if name in fixed else _draw(rng, table[name])
    return hp


def stage2_table(kind: str, table: Mapping, best_hp: Mapping) -> dict:
    """Stage-two ranges: max_depth narrowed to best +/- 3 within the original bounds."""
    lo, hi = table["max_depth"]
    d = int(best_hp["max_depth"])
    t = dict(table)
    t["max_depth"] = (max(lo, d - 3), min(hi, d + 3))
    if kind == RF:
        t["mtries"] = [int(best_hp["mtries"])]
    return t


def fit_candidate(kind: str, hp: Mapping, seed: int, train: ModelInputs, y, val: ModelInputs, y_val, fixed: Mapping, graph_sums: bool):
    X, Xv = train.flat(graph_sums), val.flat(graph_sums)
    if kind == GBDT:
        model = train_gbdt(X, y, int(hp["n_estimators"]), int(hp["max_depth"]), float(hp["learning_rate"]), **fixed)
    elif kind == RF:
        model = train_rf(X, y, int(hp["n_estimators"]), int(hp["max_depth"]), int(hp["mtries"]), seed=seed, **fixed)
    elif kind == MLP:
        model = train_mlp(X, y, Xv, y_val, int(hp["num_layer"]), int(hp["num_node"]), hp["activation"], seed=seed, **fixed)
    else:
        return train_gcn(
            train, y, val, y_val, hp["conv_kind"], int(hp["n_conv"]), num_fc=int(hp["num_fc"]),
            batch_size=int(hp["batch_size"]), lr=float(hp["lr"]), seed=seed, **fixed,
        )
    model.hyperparameters["graph_sums"] = graph_sums
    return model


def selection_loss(kind: str, model, val: ModelInputs, y_val) -> float:
    pred = model.predict(val)
    if kind == GCN:
        return tune_loss(error_report(y_val, pred))
    return rmse(y_val, pred)


def hyperparam_search(spec: HyperparamSearchSpec, train: ModelInputs, y, val: ModelInputs, y_val) -> SearchResult:
    y = np.asarray(y, dtype=float)
    y_val = np.asarray(y_val, dtype=float)
    n_feat = train.flat(spec.graph_sums).shape[1]
    table = spec.table(n_feat)
    cands: list[Candidate] = []

    def run(index: int, stage: int, tbl: Mapping, fixed_hp: Mapping | None = None) -> None:
        cseed = spec.seed ^ index
        rng = np.random.default_rng(cseed)
        hp = sample_hp(tbl, rng, fixed_hp)
        model = fit_candidate(spec.kind, hp, cseed, train, y, val, y_val, spec.fixed, spec.graph_sums)
        cands.append(Candidate(index, stage, hp, selection_loss(spec.kind, model, val, y_val), model))

    if spec.kind in STAGE1_TREES:
        n1 = math.ceil(spec.budget / 2)
        for i in range(n1):
            run(i, 1, table, {"n_estimators": STAGE1_TREES[spec.kind]})
        best1 = min(cands, key=lambda c: (c.loss, c.index)).hp
        t2 = stage2_table(spec.kind, table, best1)
        for i in range(n1, spec.budget):
            run(i, 2, t2)
    else:
        for i in range(spec.budget):
            run(i, 1, table)
    return SearchResult(spec.kind, cands)
