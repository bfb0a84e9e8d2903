"""Graph convolutional regressor over logical hierarchy graphs.

Conv layers produce node embeddings, a global mean pool turns each graph into
one vector, the pooled vector is concatenated with the record's scalar
features, and a fully connected head maps the result to one output. The
output is scaled back to target units before the mean-APE loss is taken, so
all gradients below are of that loss.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ..netlist import FeatureScaler, LogicalHierarchyGraph, lhg_to_matrices
from .inputs import ModelInputs
from .mlp import (
    RECTIFIER,
    Adam,
    MinMax,
    Standardizer,
    TrainingDivergence,
    backward,
    forward,
    hidden_layer_config,
    init_params,
)

GRAPHCONV = "graphconv"
GCNCONV = "gcnconv"
CONV_KINDS = (GRAPHCONV, GCNCONV)


@dataclass
class GraphStack:
    """Block-diagonal stack of graphs sharing one node-feature matrix."""

    X: np.ndarray  # total_nodes x f
    A: sp.csr_matrix  # operator applied in the conv layers
    pool: sp.csr_matrix  # n_graphs x total_nodes, rows average a graph's nodes

    @classmethod
    def build(cls, mats: list[tuple[np.ndarray, np.ndarray]], kind: str) -> "GraphStack":
        xs, rows, cols, prow, pcol, pval = [], [], [], [], [], []
        off = 0
        for g, (x, e) in enumerate(mats):
            n = len(x)
            xs.append(x)
            if len(e):
                # hierarchy edges are treated as undirected
                rows += [e[:, 0] + off, e[:, 1] + off]
                cols += [e[:, 1] + off, e[:, 0] + off]
            if kind == GCNCONV:
                rows.append(np.arange(off, off + n))
                cols.append(np.arange(off, off + n))
            prow.append(np.full(n, g))
            pcol.append(np.arange(off, off + n))
            pval.append(np.full(n, 1.0 / n))
            off += n
        r = np.concatenate(rows) if rows else np.zeros(0, np.int64)
        c = np.concatenate(cols) if cols else np.zeros(0, np.int64)
        A = sp.csr_matrix((np.ones(len(r)), (r, c)), shape=(off, off))
        A.sum_duplicates()
        if kind == GCNCONV:
            deg = np.asarray(A.sum(axis=1)).ravel()
            dinv = sp.diags(1.0 / np.sqrt(deg))
            A = (dinv @ A @ dinv).tocsr()
        pool = sp.csr_matrix((np.concatenate(pval), (np.concatenate(prow), np.concatenate(pcol))), shape=(len(mats), off))
        return cls(np.vstack(xs), A, pool)


def conv_param_count(kind: str) -> int:
    return 3 if kind == GRAPHCONV else 2


def init_conv_params(kind: str, n_in: int, width: int, n_conv: int, rng: np.random.Generator) -> list[np.ndarray]:
    params = []
    fan = n_in
    for _ in range(n_conv):
        lim = math.sqrt(6.0 / (fan + width))
        params.append(rng.uniform(-lim, lim, (fan, width)))
        if kind == GRAPHCONV:
            params.append(rng.uniform(-lim, lim, (fan, width)))
        params.append(np.zeros(width))
        fan = width
    return params


def embed(kind: str, conv: list[np.ndarray], stack: GraphStack):
    """Pooled graph embeddings (n_graphs x width) and the per-layer cache."""
    h = stack.X
    cache = []
    step = conv_param_count(kind)
    for k in range(0, len(conv), step):
        if kind == GRAPHCONV:
            ah = stack.A @ h
            z = h @ conv[k] + ah @ conv[k + 1] + conv[k + 2]
        else:
            ah = stack.A @ h
            z = ah @ conv[k] + conv[k + 1]
        cache.append((h, ah, z))
        h = np.maximum(z, 0.0)
    return stack.pool @ h, cache


def embed_backward(kind: str, conv: list[np.ndarray], stack: GraphStack, cache, d_emb: np.ndarray) -> list[np.ndarray]:
    grads = [None] * len(conv)
    step = conv_param_count(kind)
    dh = stack.pool.T @ d_emb
    for layer in range(len(cache) - 1, -1, -1):
        k = layer * step
        h, ah, z = cache[layer]
        dz = dh * (z > 0)
        if kind == GRAPHCONV:
            grads[k] = h.T @ dz
            grads[k + 1] = ah.T @ dz
            grads[k + 2] = dz.sum(axis=0)
            dh = dz @ conv[k].T + stack.A.T @ (dz @ conv[k + 1].T)
        else:
            grads[k] = ah.T @ dz
            grads[k + 1] = dz.sum(axis=0)
            dh = stack.A.T @ (dz @ conv[k].T)
    return grads


def gcn_forward(kind: str, n_conv_params: int, params: list[np.ndarray], stack: GraphStack, graph_ids: np.ndarray, scalars: np.ndarray):
    conv, head = params[:n_conv_params], params[n_conv_params:]
    emb, conv_cache = embed(kind, conv, stack)
    z0 = np.hstack([emb[graph_ids], scalars])
    out, head_cache = forward(head, RECTIFIER, z0)
    return out, (emb, conv_cache, head_cache)


def mu_ape_loss_and_grad(
    kind: str,
    n_conv_params: int,
    params: list[np.ndarray],
    stack: GraphStack,
    graph_ids: np.ndarray,
    scalars: np.ndarray,
    y: np.ndarray,
    y_scaler: MinMax,
):
    """Mean APE (%) of the unscaled prediction, and its gradient."""
    out, (emb, conv_cache, head_cache) = gcn_forward(kind, n_conv_params, params, stack, graph_ids, scalars)
    span = y_scaler.hi - y_scaler.lo
    pred = y_scaler.lo + span * out
    rel = (pred - y) / np.abs(y)
    loss = float(np.mean(np.abs(rel)) * 100.0)
    d_out = (100.0 / len(y)) * np.sign(rel) / np.abs(y) * span
    head = params[n_conv_params:]
    head_grads, dz0 = backward(head, RECTIFIER, head_cache, d_out)
    width = emb.shape[1]
    d_emb = np.zeros_like(emb)
    np.add.at(d_emb, graph_ids, dz0[:, :width])
    conv_grads = embed_backward(kind, params[:n_conv_params], stack, conv_cache, d_emb)
    return loss, conv_grads + head_grads


@dataclass
class GcnModel:
    conv_kind: str
    n_conv: int
    emb_width: int
    fc_widths: list[int]
    params: list[np.ndarray]
    node_scaler: FeatureScaler
    x_scaler: Standardizer
    y_scaler: MinMax
    hyperparameters: dict = field(default_factory=dict)
    history: list[dict] = field(default_factory=list)

    kind = "gcn"

    @property
    def n_conv_params(self) -> int:
        return self.n_conv * conv_param_count(self.conv_kind)

    def stack(self, graphs: list[LogicalHierarchyGraph]) -> GraphStack:
        return GraphStack.build([lhg_to_matrices(g, self.node_scaler) for g in graphs], self.conv_kind)

    def embeddings(self, graphs: list[LogicalHierarchyGraph]) -> np.ndarray:
        return embed(self.conv_kind, self.params[: self.n_conv_params], self.stack(graphs))[0]

    def predict(self, data: ModelInputs) -> np.ndarray:
        if not isinstance(data, ModelInputs) or not data.has_graphs:
            raise ValueError("GCN prediction needs one graph per record")
        used, local = np.unique(data.graph_ids, return_inverse=True)
        stack = self.stack([data.graphs[i] for i in used])
        out, _ = gcn_forward(self.conv_kind, self.n_conv_params, self.params, stack, local, self.x_scaler.transform(data.X))
        return self.y_scaler.inverse(out)

    def to_json(self) -> dict:
        return {
            "conv_kind": self.conv_kind,
            "n_conv": self.n_conv,
            "emb_width": self.emb_width,
            "fc_widths": self.fc_widths,
            "params": [p.tolist() for p in self.params],
            "node_scaler": self.node_scaler.to_json(),
            "x_scaler": self.x_scaler.to_json(),
            "y_scaler": [self.y_scaler.lo, self.y_scaler.hi],
            "hyperparameters": self.hyperparameters,
        }

    @classmethod
    def from_json(cls, d: dict) -> "GcnModel":
        return cls(
            d["conv_kind"],
            int(d["n_conv"]),
            int(d["emb_width"]),
            list(d["fc_widths"]),
            [np.asarray(p, dtype=float) for p in d["params"]],
            FeatureScaler.from_json(d["node_scaler"]),
            Standardizer.from_json(d["x_scaler"]),
            MinMax(*d["y_scaler"]),
            d["hyperparameters"],
        )


def init_gcn(
    conv_kind: str,
    n_conv: int,
    emb_width: int,
    num_fc: int,
    n_node_features: int,
    n_scalars: int,
    rng: np.random.Generator,
) -> tuple[list[np.ndarray], list[int]]:
    """Fresh parameter list (conv layers then head) and the head widths."""
    if conv_kind not in CONV_KINDS:
        raise ValueError(f"unknown conv kind {conv_kind!r}; expected one of {CONV_KINDS}")
    fc = hidden_layer_config(emb_width, num_fc)
    conv = init_conv_params(conv_kind, n_node_features, emb_width, n_conv, rng)
    head = init_params(emb_width + n_scalars, fc, RECTIFIER, rng)
    return conv + head, fc


def train_gcn(
    train: ModelInputs,
    y: np.ndarray,
    val: ModelInputs,
    y_val: np.ndarray,
    conv_kind: str = GRAPHCONV,
    n_conv: int = 2,
    emb_width: int = 32,
    num_fc: int = 3,
    batch_size: int = 32,
    lr: float = 1e-3,
    max_epochs: int = 200,
    decay: float = 0.7,
    decay_patience: int = 5,
    stop_patience: int = 20,
    seed: int = 0,
) -> GcnModel:
    """Adam on the mean-APE loss with plateau learning-rate decay and early
    stopping; returns the weights with the lowest validation mean APE."""
    if not (train.has_graphs and val.has_graphs):
        raise ValueError("GCN training needs one graph per record")
    y = np.asarray(y, dtype=float)
    y_val = np.asarray(y_val, dtype=float)
    if len(y) != len(train) or len(y_val) != len(val):
        raise ValueError("targets and records differ in length")
    if len(y) == 0 or len(y_val) == 0:
        raise ValueError("train and validation sets must be nonempty")
    rng = np.random.default_rng(seed)
    used = np.unique(train.graph_ids)
    node_scaler = FeatureScaler.fit([train.graphs[i] for i in used])
    xs = Standardizer.fit(train.X)
    ys = MinMax.fit(y)
    params, fc = init_gcn(conv_kind, n_conv, emb_width, num_fc, 8, train.X.shape[1], rng)
    hp = dict(
        conv_kind=conv_kind, n_conv=n_conv, emb_width=emb_width, num_fc=num_fc, batch_size=batch_size,
        lr=lr, max_epochs=max_epochs, decay=decay, decay_patience=decay_patience, stop_patience=stop_patience, seed=seed,
    )
    model = GcnModel(conv_kind, n_conv, emb_width, fc, params, node_scaler, xs, ys, hp)
    ncp = model.n_conv_params

    t_used, t_local = np.unique(train.graph_ids, return_inverse=True)
    t_stack = model.stack([train.graphs[i] for i in t_used])
    t_scal = xs.transform(train.X)

    def val_score() -> float:
        pred = model.predict(val)
        return float(np.mean(np.abs((pred - y_val) / y_val)) * 100.0)

    best = val_score()
    best_params = [p.copy() for p in params]
    opt = Adam(params, lr)
    since_decay = since_best = 0
    n = len(y)
    for epoch in range(1, max_epochs + 1):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, batch_size):
            b = order[start : start + batch_size]
            loss, grads = mu_ape_loss_and_grad(conv_kind, ncp, params, t_stack, t_local[b], t_scal[b], y[b], ys)
            if not math.isfinite(loss):
                raise TrainingDivergence(f"non-finite training loss at epoch {epoch}")
            opt.step(params, grads)
            total += loss * len(b)
        score = val_score()
        if not math.isfinite(score):
            raise TrainingDivergence(f"non-finite validation error at epoch {epoch}")
        model.history.append({"epoch": epoch, "train_mu_ape": total / n, "val_mu_ape": score, "lr": opt.lr})
        if score < best:
            best = score
            best_params = [p.copy() for p in params]
            since_decay = since_best = 0
        else:
            since_decay += 1
            since_best += 1
            if since_decay >= decay_patience:
                opt.lr *= decay
                since_decay = 0
            if since_best >= stop_patience:
                break
    model.params = best_params
    return model
