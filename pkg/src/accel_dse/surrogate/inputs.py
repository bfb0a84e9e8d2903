"""Model input bundle: encoded scalar features plus optional hierarchy graphs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..netlist import LogicalHierarchyGraph


@dataclass
class ModelInputs:
    """Row ``r`` uses scalar features ``X[r]`` and graph ``graphs[graph_ids[r]]``.

    Many records usually share a graph (one architecture swept over backend
    knobs), so graphs are stored once and referenced by index.
    """

    X: np.ndarray
    graph_ids: np.ndarray | None = None
    graphs: list[LogicalHierarchyGraph] | None = None

    def __post_init__(self) -> None:
        self.X = np.atleast_2d(np.asarray(self.X, dtype=float))
        if (self.graph_ids is None) != (self.graphs is None):
            raise ValueError("graph_ids and graphs must be given together")
        if self.graph_ids is not None:
            self.graph_ids = np.asarray(self.graph_ids, dtype=np.int64)
            if self.graph_ids.shape != (len(self.X),):
                raise ValueError(f"{len(self.graph_ids)} graph ids for {len(self.X)} records")
            if len(self.graph_ids) and (self.graph_ids.min() < 0 or self.graph_ids.max() >= len(self.graphs)):
                raise ValueError("graph id out of range")

    def __len__(self) -> int:
        return len(self.X)

    @property
    def has_graphs(self) -> bool:
        return self.graphs is not None

    def subset(self, idx) -> "ModelInputs":
        idx = np.asarray(idx)
        if self.graphs is None:
            return ModelInputs(self.X[idx])
        return ModelInputs(self.X[idx], self.graph_ids[idx], self.graphs)

    def graph_sums(self) -> np.ndarray:
        """Per-record sums of node features (8 columns), for flat models."""
        if self.graphs is None:
            raise ValueError("no graphs attached")
        sums = np.vstack([g.feature_matrix().sum(axis=0) for g in self.graphs])
        return sums[self.graph_ids]

    def flat(self, with_graph_sums: bool = False) -> np.ndarray:
        if not with_graph_sums:
            return self.X
        return np.hstack([self.X, self.graph_sums()])


def as_inputs(data) -> ModelInputs:
    return data if isinstance(data, ModelInputs) else ModelInputs(data)


def flat_features(data, graph_sums: bool = False) -> np.ndarray:
    """Feature matrix for flat (non-graph) models from an array or ModelInputs."""
    if isinstance(data, ModelInputs):
        return data.flat(graph_sums)
    if graph_sums:
        raise ValueError("graph-sum features need ModelInputs with graphs")
    return np.atleast_2d(np.asarray(data, dtype=float))
