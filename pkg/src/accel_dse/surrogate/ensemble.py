"""Stacked ensemble: a least-squares meta learner over base-model predictions."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

RIDGE_LAMBDA = 1e-6


@dataclass
class StackedEnsemble:
    bases: list
    coef: np.ndarray
    intercept: float
    ridge: bool = False  # True when the normal equations were singular
    base_names: list[str] = field(default_factory=list)

    kind = "ensemble"

    def base_predictions(self, data) -> np.ndarray:
        return np.column_stack([m.predict(data) for m in self.bases])

    def predict(self, data) -> np.ndarray:
        return self.intercept + self.base_predictions(data) @ self.coef


def fit_meta(P: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, float, bool]:
    """OLS with intercept of ``y`` on the columns of ``P``.

    When the centered design is rank deficient (e.g. duplicated base models)
    the fit falls back to ridge with ``RIDGE_LAMBDA`` on standardized columns,
    which splits weight evenly across identical columns.
    """
    P = np.asarray(P, dtype=float)
    y = np.asarray(y, dtype=float)
    mu, ym = P.mean(axis=0), float(y.mean())
    Pc, yc = P - mu, y - ym
    sd = Pc.std(axis=0)
    live = sd > 0
    coef = np.zeros(P.shape[1])
    if not live.any():
        return coef, ym, False
    Z = Pc[:, live] / sd[live]
    G = Z.T @ Z
    ridge = np.linalg.matrix_rank(Z) < Z.shape[1]
    if ridge:
        G = G + RIDGE_LAMBDA * np.eye(len(G))
    w = np.linalg.solve(G, Z.T @ yc)
    coef[live] = w / sd[live]
    return coef, ym - float(mu @ coef), bool(ridge)


def train_stacked_ensemble(bases: list, val_data, y_val: np.ndarray, names: list[str] | None = None) -> StackedEnsemble:
    if len(bases) < 2:
        raise ValueError("stacked ensemble needs at least 2 base models")
    P = np.column_stack([m.predict(val_data) for m in bases])
    coef, intercept, ridge = fit_meta(P, y_val)
    return StackedEnsemble(list(bases), coef, intercept, ridge, list(names or []))
