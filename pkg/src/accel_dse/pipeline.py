"""Glue between spaces, the oracle, LHG extraction and the surrogate models:
design-space presets, dataset splits, model-input assembly and training."""

from __future__ import annotations

import json
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .netlist import LogicalHierarchyGraph, extract_lhg
from .oracle import (
    METRICS,
    BackendKnobs,
    DatasetRecord,
    OracleParams,
    backend_space,
    generate_dataset,
    knobs_from_unit,
)
from .param_space import Configuration, ParameterSpace, decode_unit, encode, encode_many
from .rtlgen import netlist_for
from .sampling import lhs, make_sequence
from .metrics import class_report, rmse
from .surrogate.ensemble import train_stacked_ensemble
from .surrogate.inputs import ModelInputs
from .surrogate.search import GBDT, GCN, KINDS, MLP, HyperparamSearchSpec, hyperparam_search
from .surrogate.trees import train_boosted_classifier
from .surrogate.two_stage import TwoStageModel, train_two_stage

UNSEEN_BACKEND = "unseen-backend"
UNSEEN_ARCH = "unseen-arch"
PROTOCOLS = (UNSEEN_BACKEND, UNSEEN_ARCH)
SPLITS = ("train", "val", "test")


def preset_path(name: str) -> Path:
    return Path(str(resources.files("accel_dse") / "data" / name))


@dataclass(frozen=True)
class DesignSpace:
    """Architectural parameters plus the two backend knobs."""

    arch: ParameterSpace
    backend: ParameterSpace

    @classmethod
    def from_json(cls, d: Mapping) -> "DesignSpace":
        arch = ParameterSpace.from_json(d)
        be = ParameterSpace.from_json(d["backend"]) if "backend" in d else backend_space()
        if be.names != ["f_target", "util"]:
            raise ValueError(f"backend specs must be [f_target, util], got {be.names}")
        return cls(arch, be)

    def to_json(self) -> dict:
        return {**self.arch.to_json(), "backend": self.backend.to_json()}

    @property
    def full(self) -> ParameterSpace:
        return self.arch + self.backend

    def schema_hash(self) -> str:
        return self.full.schema_hash()


def load_design_space(path: str | Path) -> DesignSpace:
    return DesignSpace.from_json(json.loads(Path(path).read_text()))


def axiline_space() -> DesignSpace:
    return load_design_space(preset_path("axiline.json"))


def axiline_dse_space() -> DesignSpace:
    return load_design_space(preset_path("axiline_dse.json"))


def axiline_oracle() -> OracleParams:
    return OracleParams.load(preset_path("axiline_oracle.json"))


# --- sampling ---------------------------------------------------------------

def sample_blocks(method: str, dim: int, sizes: Sequence[int], seed: int) -> list[np.ndarray]:
    """Disjoint unit-cube point blocks. LHS draws one design per block (seed
    + block index); Sobol and Halton slice consecutive runs of one sequence."""
    if any(n < 1 for n in sizes):
        raise ValueError("block sizes must be positive")
    if method == "lhs":
        return [lhs(dim, n, seed + i) for i, n in enumerate(sizes)]
    pts = make_sequence(method, dim).draw(sum(sizes))
    out, start = [], 0
    for n in sizes:
        out.append(pts[start : start + n])
        start += n
    return out


def configs_from_points(space: ParameterSpace, points: np.ndarray) -> list[Configuration]:
    return [decode_unit(space, p) for p in np.atleast_2d(points)]


def sample_configs(space: ParameterSpace, method: str, n: int, seed: int) -> list[Configuration]:
    return configs_from_points(space, sample_blocks(method, len(space), [n], seed)[0])


# --- datasets ---------------------------------------------------------------

@dataclass
class SplitData:
    """Records for train/val/test plus one LHG per design id."""

    protocol: str
    records: dict[str, list[DatasetRecord]]
    graphs: dict[str, LogicalHierarchyGraph]
    manifest: dict


def design_graph(space: ParameterSpace, cfg: Mapping) -> LogicalHierarchyGraph:
    text, top = netlist_for(space, cfg)
    return extract_lhg(text, top)


def make_splits(
    ds: DesignSpace,
    params: OracleParams,
    protocol: str,
    eps: float,
    seed: int = 0,
    n_arch: Sequence[int] = (24, 10, 10),
    n_knobs: Sequence[int] = (30, 10, 10),
    method: str = "lhs",
    with_graphs: bool = True,
) -> SplitData:
    """Train/val/test splits for the two protocols.

    unseen-backend: ``n_arch[0]`` architectures, each swept over disjoint
    train/val/test knob sets of sizes ``n_knobs``.
    unseen-arch: disjoint architecture sets of sizes ``n_arch``, each swept
    over the same ``n_knobs[0]`` knob settings.
    """
    if protocol not in PROTOCOLS:
        raise ValueError(f"unknown protocol {protocol!r}; expected one of {PROTOCOLS}")
    if protocol == UNSEEN_BACKEND:
        arch_blocks = sample_blocks(method, len(ds.arch), [n_arch[0]], seed)
        archs = configs_from_points(ds.arch, arch_blocks[0])
        knob_blocks = sample_blocks(method, 2, list(n_knobs), seed + 1000)
        knob_sets = [knobs_from_unit(ds.backend, b) for b in knob_blocks]
        seen = [set(k) for k in knob_sets]
        if seen[0] & seen[1] or seen[0] & seen[2] or seen[1] & seen[2]:
            raise ValueError("knob splits overlap")
        ids = [f"d{i:04d}" for i in range(len(archs))]
        recs = {s: generate_dataset(ds.arch, archs, ks, params, eps, ids) for s, ks in zip(SPLITS, knob_sets)}
        design_cfgs = dict(zip(ids, archs))
    else:
        arch_blocks = sample_blocks(method, len(ds.arch), list(n_arch), seed)
        arch_sets = [configs_from_points(ds.arch, b) for b in arch_blocks]
        knobs = knobs_from_unit(ds.backend, sample_blocks(method, 2, [n_knobs[0]], seed + 1000)[0])
        recs, design_cfgs, start = {}, {}, 0
        for s, archs in zip(SPLITS, arch_sets):
            ids = [f"d{start + i:04d}" for i in range(len(archs))]
            start += len(archs)
            recs[s] = generate_dataset(ds.arch, archs, knobs, params, eps, ids)
            design_cfgs.update(zip(ids, archs))
    graphs = {d: design_graph(ds.arch, c) for d, c in design_cfgs.items()} if with_graphs else {}
    manifest = {
        "protocol": protocol,
        "seed": seed,
        "method": method,
        "eps": eps,
        "n_arch": list(n_arch),
        "n_knobs": list(n_knobs),
        "rows": {s: len(r) for s, r in recs.items()},
        "schema_hash": ds.schema_hash(),
    }
    return SplitData(protocol, recs, graphs, manifest)


def encode_records(ds: DesignSpace, records: Sequence[DatasetRecord]) -> np.ndarray:
    """Encoded architecture columns followed by normalized f_target and util."""
    if not records:
        return np.zeros((0, ds.full.encoded_width))
    arch = encode_many(ds.arch, [r.cfg for r in records])
    be = encode_many(ds.backend, [r.knobs.as_config() for r in records])
    return np.hstack([arch, be])


def encode_point(ds: DesignSpace, cfg: Mapping, knobs: BackendKnobs) -> np.ndarray:
    return np.concatenate([encode(ds.arch, cfg), encode(ds.backend, knobs.as_config())])


def model_inputs(
    ds: DesignSpace,
    records: Sequence[DatasetRecord],
    graphs: Mapping[str, LogicalHierarchyGraph] | None = None,
) -> ModelInputs:
    X = encode_records(ds, records)
    if not graphs:
        return ModelInputs(X)
    names = sorted({r.design for r in records})
    index = {d: i for i, d in enumerate(names)}
    return ModelInputs(X, np.array([index[r.design] for r in records], dtype=np.int64), [graphs[d] for d in names])


def metric_targets(records: Sequence[DatasetRecord], metrics: Sequence[str] = METRICS) -> dict[str, np.ndarray]:
    return {m: np.array([r.metric(m) for r in records]) for m in metrics}


def roi_labels(records: Sequence[DatasetRecord]) -> np.ndarray:
    return np.array([r.roi for r in records], dtype=bool)


# --- training -----------------------------------------------------------------

ENSEMBLE = "ensemble"
ENSEMBLE_TOP_K = 7
CLASSIFIER_GRID = tuple(
    dict(max_depth=d, n_estimators=n, learning_rate=lr, min_samples_leaf=1)
    for d in (1, 2, 4)
    for n in (100, 300)
    for lr in (0.1, 0.3)
)


def select_classifier(train: ModelInputs, roi, val: ModelInputs, roi_val, graph_sums: bool = False) -> tuple[dict, float]:
    """Grid over the classifier settings, picked by validation accuracy
    (first grid entry wins ties)."""
    best = None
    for hp in CLASSIFIER_GRID:
        clf = train_boosted_classifier(train.flat(graph_sums), roi, **hp)
        acc = class_report(roi_val, clf.predict(val.flat(graph_sums))).accuracy
        if best is None or acc > best[1]:
            best = (hp, acc)
    return dict(best[0]), best[1]


def fit_families(
    kinds: Sequence[str],
    budget: int,
    seed: int,
    fixed: Mapping[str, Mapping],
    train: ModelInputs,
    y: np.ndarray,
    val: ModelInputs,
    y_val: np.ndarray,
) -> tuple[dict, dict[str, float], dict]:
    """Search every requested family. Returns (kind -> best model, kind ->
    validation RMSE, JSON log). The stacked ensemble is fit on the validation
    rows, so it gets no validation score."""
    models, scores, log = {}, {}, {}
    results = {}
    for k in kinds:
        if k == ENSEMBLE:
            continue
        spec = HyperparamSearchSpec(k, budget, seed, fixed=dict(fixed.get(k, {})))
        results[k] = hyperparam_search(spec, train, y, val, y_val)
        models[k] = results[k].model
        scores[k] = rmse(y_val, models[k].predict(val))
        log[k] = results[k].log()
    if ENSEMBLE in kinds:
        pool = sorted(
            (c for k, r in results.items() if k != GCN for c in r.candidates), key=lambda c: (c.loss, c.index)
        )[:ENSEMBLE_TOP_K]
        if len(pool) < 2:
            raise ValueError("the ensemble needs at least two non-GCN candidates")
        names = [f"{r.kind}#{c.index}" for r in results.values() for c in r.candidates if c in pool]
        ens = train_stacked_ensemble([c.model for c in pool], val, y_val)
        models[ENSEMBLE] = ens
        log[ENSEMBLE] = {"bases": names, "ridge": ens.ridge}
    return models, scores, log


@dataclass
class SurrogateFit:
    model: TwoStageModel
    log: dict
    families: dict[str, dict]  # metric -> kind -> fitted model


def train_surrogate(
    ds: DesignSpace,
    records: Mapping[str, Sequence[DatasetRecord]],
    eps: float,
    graphs: Mapping[str, LogicalHierarchyGraph] | None = None,
    kinds: Sequence[str] = (GBDT, MLP),
    budget: int = 4,
    seed: int = 0,
    epochs: int | None = None,
    final: str = "best",
) -> SurrogateFit:
    """Two-stage model from train/val records. ``final="best"`` keeps the
    family with the lowest validation RMSE per metric; any other value names
    the family to keep. ``epochs`` overrides the MLP/GCN epoch defaults."""
    for k in kinds:
        if k not in KINDS and k != ENSEMBLE:
            raise ValueError(f"unknown model kind {k!r}")
    if final != "best" and final not in kinds:
        raise ValueError(f"final kind {final!r} is not among {list(kinds)}")
    if GCN in kinds and not graphs:
        raise ValueError("gcn needs logical hierarchy graphs")
    if final == ENSEMBLE and ENSEMBLE not in kinds:
        raise ValueError("final ensemble requires 'ensemble' in kinds")
    mi = {s: model_inputs(ds, records[s], graphs) for s in ("train", "val")}
    roi = {s: roi_labels(records[s]) for s in ("train", "val")}
    tg = {s: metric_targets(records[s]) for s in ("train", "val")}
    fixed = {} if epochs is None else {MLP: {"epochs": epochs}, GCN: {"max_epochs": epochs}}
    clf_hp, clf_acc = select_classifier(mi["train"], roi["train"], mi["val"], roi["val"])
    log: dict = {"classifier": {"hp": clf_hp, "val_accuracy": clf_acc}, "metrics": {}, "seed": seed}
    families: dict[str, dict] = {}

    def fit(train, y, val, y_val, metric):
        models, scores, flog = fit_families(kinds, budget, seed, fixed, train, y, val, y_val)
        families[metric] = models
        kind = min(scores, key=lambda k: (scores[k], k)) if final == "best" else final
        log["metrics"][metric] = {"chosen": kind, "val_rmse": scores, "search": flog}
        return models[kind]

    model = train_two_stage(
        mi["train"], roi["train"], tg["train"], mi["val"], roi["val"], tg["val"], eps, fit, classifier_hp=clf_hp
    )
    model.info.update(chosen={m: v["chosen"] for m, v in log["metrics"].items()})
    return SurrogateFit(model, log, families)
