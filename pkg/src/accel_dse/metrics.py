"""Error, rank-correlation and classification metrics."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np


@dataclass(frozen=True)
class ErrorReport:
    mu_ape: float  # %
    mape: float  # % (maximum APE)
    std_ape: float  # % (population std)
    rmse: float
    n: int

    def to_json(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class ClassReport:
    accuracy: float
    f1: float
    tp: int
    fp: int
    tn: int
    fn: int

    def to_json(self) -> dict:
        return asdict(self)


def _pair(actual, predicted) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(actual, dtype=float).ravel()
    p = np.asarray(predicted, dtype=float).ravel()
    if a.shape != p.shape:
        raise ValueError(f"length mismatch: {a.size} actual vs {p.size} predicted")
    return a, p


def ape(actual, predicted) -> np.ndarray:
    a, p = _pair(actual, predicted)
    if np.any(a == 0):
        raise ValueError("APE undefined for a zero actual value")
    return np.abs((a - p) / a) * 100.0


def error_report(actual, predicted) -> ErrorReport:
    a, p = _pair(actual, predicted)
    if a.size == 0:
        raise ValueError("empty input")
    e = ape(a, p)
    return ErrorReport(
        mu_ape=float(e.mean()),
        mape=float(e.max()),
        std_ape=float(e.std()),
        rmse=float(np.sqrt(np.mean((a - p) ** 2))),
        n=int(a.size),
    )


def rmse(actual, predicted) -> float:
    a, p = _pair(actual, predicted)
    if a.size == 0:
        raise ValueError("empty input")
    return float(np.sqrt(np.mean((a - p) ** 2)))


def tune_loss(report: ErrorReport) -> float:
    """Average plus down-weighted worst-case APE."""
    return report.mu_ape + 0.3 * report.mape


def kendall_tau(x, y) -> float:
    """Tie-corrected Kendall tau-b."""
    x, y = _pair(x, y)
    n = x.size
    if n < 2:
        raise ValueError("kendall_tau needs at least 2 observations")
    dx = np.sign(x[:, None] - x[None, :])
    dy = np.sign(y[:, None] - y[None, :])
    iu = np.triu_indices(n, k=1)
    sx, sy = dx[iu], dy[iu]
    s = float(np.sum(sx * sy))
    n_x = float(np.sum(sx != 0))
    n_y = float(np.sum(sy != 0))
    if n_x == 0 or n_y == 0:
        raise ValueError("kendall_tau undefined when one input is entirely tied")
    return s / math.sqrt(n_x * n_y)


def class_report(actual, predicted) -> ClassReport:
    a = np.asarray(actual, dtype=bool).ravel()
    p = np.asarray(predicted, dtype=bool).ravel()
    if a.shape != p.shape:
        raise ValueError("length mismatch")
    if a.size == 0:
        raise ValueError("empty input")
    tp = int(np.sum(a & p))
    fp = int(np.sum(~a & p))
    tn = int(np.sum(~a & ~p))
    fn = int(np.sum(a & ~p))
    denom = 2 * tp + fp + fn
    return ClassReport(
        accuracy=(tp + tn) / a.size,
        f1=(2 * tp / denom) if denom else 1.0,
        tp=tp,
        fp=fp,
        tn=tn,
        fn=fn,
    )


def format_error_table(rows: dict[str, dict[str, ErrorReport]]) -> str:
    """Aligned text table: one row per model, (muAPE, MAPE, STD APE) per metric."""
    metrics = list(dict.fromkeys(m for r in rows.values() for m in r))
    head1 = f"{'model':<10}" + "".join(f"| {m:^26}" for m in metrics)
    head2 = f"{'':<10}" + "".join(f"| {'muAPE':>8}{'MAPE':>9}{'STD':>8} " for _ in metrics)
    lines = [head1, head2, "-" * len(head2)]
    for model, reps in rows.items():
        cells = []
        for m in metrics:
            r = reps.get(m)
            cells.append(f"| {r.mu_ape:8.2f}{r.mape:9.2f}{r.std_ape:8.2f} " if r else f"| {'-':>25} ")
        lines.append(f"{model:<10}" + "".join(cells))
    return "\n".join(lines)
