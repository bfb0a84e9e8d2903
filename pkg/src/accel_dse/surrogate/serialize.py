"""Versioned JSON container for trained models."""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .ensemble import StackedEnsemble
from .gcn import GcnModel
from .mlp import MlpModel
from .trees import BoostedClassifier, TreeEnsembleModel
from .two_stage import TwoStageModel

FORMAT = "accel-dse-model"
VERSION = 1


class SchemaMismatch(ValueError):
    pass


def model_to_json(model) -> dict:
    if isinstance(model, BoostedClassifier):
        return {"kind": "classifier", "body": model.to_json()}
    if isinstance(model, TreeEnsembleModel):
        return {"kind": model.kind, "body": model.to_json()}
    if isinstance(model, (MlpModel, GcnModel)):
        return {"kind": model.kind, "body": model.to_json()}
    if isinstance(model, StackedEnsemble):
        return {
            "kind": "ensemble",
            "body": {
                "bases": [model_to_json(b) for b in model.bases],
                "coef": model.coef.tolist(),
                "intercept": model.intercept,
                "ridge": model.ridge,
                "base_names": model.base_names,
            },
        }
    if isinstance(model, TwoStageModel):
        return {
            "kind": "two_stage",
            "body": {
                "classifier": model_to_json(model.classifier),
                "regressors": {m: model_to_json(r) for m, r in model.regressors.items()},
                "eps": model.eps,
                "n_roi_train": model.n_roi_train,
                "classifier_graph_sums": model.classifier_graph_sums,
                "info": model.info,
            },
        }
    raise TypeError(f"cannot serialize {type(model).__name__}")


def model_from_json(d: dict):
    kind, body = d["kind"], d["body"]
    if kind == "classifier":
        return BoostedClassifier.from_json(body)
    if kind in ("gbdt", "rf"):
        return TreeEnsembleModel.from_json(body)
    if kind == "mlp":
        return MlpModel.from_json(body)
    if kind == "gcn":
        return GcnModel.from_json(body)
    if kind == "ensemble":
        return StackedEnsemble(
            [model_from_json(b) for b in body["bases"]],
            np.asarray(body["coef"], dtype=float),
            float(body["intercept"]),
            bool(body["ridge"]),
            list(body["base_names"]),
        )
    if kind == "two_stage":
        return TwoStageModel(
            model_from_json(body["classifier"]),
            {m: model_from_json(r) for m, r in body["regressors"].items()},
            float(body["eps"]),
            int(body["n_roi_train"]),
            bool(body["classifier_graph_sums"]),
            dict(body["info"]),
        )
    raise ValueError(f"unknown model kind {kind!r}")


def dumps_model(model, schema_hash: str, eps: float | None = None) -> str:
    d = {"format": FORMAT, "version": VERSION, "schema_hash": schema_hash, "eps": eps, **model_to_json(model)}
    return json.dumps(d, separators=(",", ":"), sort_keys=True)


def save_model(model, path: str | Path, schema_hash: str, eps: float | None = None) -> None:
    """Write atomically: temp file in the target directory, then rename."""
    path = Path(path)
    text = dumps_model(model, schema_hash, eps)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    with os.fdopen(fd, "w") as f:
        f.write(text)
    os.replace(tmp, path)


def loads_model(text: str, schema_hash: str | None = None):
    d = json.loads(text)
    if d.get("format") != FORMAT:
        raise ValueError("not a model file")
    if d.get("version") != VERSION:
        raise ValueError(f"unsupported model version {d.get('version')}")
    if schema_hash is not None and d["schema_hash"] != schema_hash:
        raise SchemaMismatch(f"model was trained on schema {d['schema_hash']}, data has schema {schema_hash}")
    return model_from_json(d)


def load_model(path: str | Path, schema_hash: str | None = None):
    return loads_model(Path(path).read_text(), schema_hash)


def model_schema_hash(path: str | Path) -> str:
    return json.loads(Path(path).read_text())["schema_hash"]
