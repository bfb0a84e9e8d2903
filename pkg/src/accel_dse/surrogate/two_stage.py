"""ROI classifier in front of per-metric regressors trained on ROI points only."""

from __future__ import annotations

from collections.abc import Callable, Mapping
from dataclasses import dataclass, field

import numpy as np

from .inputs import ModelInputs
from .trees import BoostedClassifier, train_boosted_classifier


class _Discarded:
    """Marker returned for points the classifier places outside the ROI."""

    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self) -> str:
        return "DISCARDED"

    def __bool__(self) -> bool:
        return False


DISCARDED = _Discarded()

# fit(train_inputs, y, val_inputs, y_val, metric) -> model with .predict(inputs)
RegressorFactory = Callable[[ModelInputs, np.ndarray, ModelInputs, np.ndarray, str], object]


@dataclass
class TwoStageModel:
    classifier: BoostedClassifier
    regressors: dict[str, object]
    eps: float
    n_roi_train: int = 0
    classifier_graph_sums: bool = False
    info: dict = field(default_factory=dict)

    kind = "two_stage"

    @property
    def metrics(self) -> list[str]:
        return list(self.regressors)

    def in_roi(self, data: ModelInputs) -> np.ndarray:
        X = data.flat(self.classifier_graph_sums)
        return np.asarray(self.classifier.predict(X), dtype=bool)

    def predict(self, data: ModelInputs) -> tuple[np.ndarray, dict[str, np.ndarray]]:
        """(ROI mask, metric -> values); values are NaN where discarded."""
        mask = self.in_roi(data)
        out = {m: np.full(len(data), np.nan) for m in self.regressors}
        if mask.any():
            kept = data.subset(np.flatnonzero(mask))
            for m, reg in self.regressors.items():
                out[m][mask] = reg.predict(kept)
        return mask, out

    def predict_one(self, data: ModelInputs):
        """Metric dict for a single record, or ``DISCARDED``."""
        if len(data) != 1:
            raise ValueError("predict_one expects exactly one record")
        mask, out = self.predict(data)
        if not mask[0]:
            return DISCARDED
        return {m: float(v[0]) for m, v in out.items()}


def train_two_stage(
    train: ModelInputs,
    roi: np.ndarray,
    targets: Mapping[str, np.ndarray],
    val: ModelInputs,
    roi_val: np.ndarray,
    targets_val: Mapping[str, np.ndarray],
    eps: float,
    fit_regressor: RegressorFactory,
    classifier_hp: Mapping | None = None,
    classifier_graph_sums: bool = False,
) -> TwoStageModel:
    """Train the ROI classifier on every record, then one regressor per metric
    on the ROI-labelled records only (validation rows are filtered the same way)."""
    roi = np.asarray(roi, dtype=bool)
    roi_val = np.asarray(roi_val, dtype=bool)
    if roi.all() or not roi.any():
        raise ValueError("two-stage training needs both ROI and non-ROI records")
    if not roi_val.any():
        raise ValueError("validation set has no ROI records")
    clf = train_boosted_classifier(train.flat(classifier_graph_sums), roi, **dict(classifier_hp or {}))
    keep = np.flatnonzero(roi)
    keep_val = np.flatnonzero(roi_val)
    t_roi, v_roi = train.subset(keep), val.subset(keep_val)
    regs = {}
    for metric, y in targets.items():
        y = np.asarray(y, dtype=float)
        yv = np.asarray(targets_val[metric], dtype=float)
        regs[metric] = fit_regressor(t_roi, y[keep], v_roi, yv[keep_val], metric)
    return TwoStageModel(clf, regs, float(eps), len(keep), classifier_graph_sums)
