"""Fully connected regressor with hand-derived gradients and Adam updates."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .inputs import flat_features

TANH = "tanh"
RECTIFIER = "rectifier"
MAXOUT = "maxout"
ACTIVATIONS = (TANH, RECTIFIER, MAXOUT)
MAXOUT_PIECES = 2


class TrainingDivergence(RuntimeError):
    pass


def hidden_layer_config(node_count: int, h_layer_count: int, min_p: int = 2, max_p: int = 7) -> list[int]:
    """Hidden widths that grow from the nearest power of two up to a peak,
    optionally hold, then shrink toward ``2**min_p``."""
    if node_count < 2:
        raise ValueError("node_count must be >= 2")
    if h_layer_count < 1:
        raise ValueError("h_layer_count must be >= 1")
    if min_p > max_p:
        raise ValueError(f"min_p ({min_p}) exceeds max_p ({max_p})")
    p = math.ceil(math.log2(node_count))
    exp_max_p = min((h_layer_count + min_p + p) // 2, max_p)
    if exp_max_p <= p:
        exp_max_p = p + 1
    incr_p = exp_max_p - p
    decr_p = min(exp_max_p - min_p + 1, h_layer_count - incr_p)
    same_p = max(0, h_layer_count - incr_p - decr_p)
    layers = []
    for _ in range(incr_p):
        layers.append(2**p)
        p += 1
    for _ in range(same_p):
        layers.append(2**p)
    for _ in range(decr_p):
        layers.append(2**p)
        p -= 1
    return layers


@dataclass
class Standardizer:
    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, X: np.ndarray) -> "Standardizer":
        X = np.asarray(X, dtype=float)
        sd = X.std(axis=0)
        return cls(X.mean(axis=0), np.where(sd > 0, sd, 1.0))

    def transform(self, X: np.ndarray) -> np.ndarray:
        return (np.asarray(X, dtype=float) - self.mean) / self.scale

    def to_json(self) -> dict:
        return {"mean": self.mean.tolist(), "scale": self.scale.tolist()}

    @classmethod
    def from_json(cls, d: dict) -> "Standardizer":
        return cls(np.asarray(d["mean"], dtype=float), np.asarray(d["scale"], dtype=float))


@dataclass
class MinMax:
    lo: float
    hi: float

    @classmethod
    def fit(cls, y: np.ndarray) -> "MinMax":
        y = np.asarray(y, dtype=float)
        lo, hi = float(y.min()), float(y.max())
        return cls(lo, hi if hi > lo else lo + 1.0)

    def forward(self, y):
        return (np.asarray(y, dtype=float) - self.lo) / (self.hi - self.lo)

    def inverse(self, z):
        return self.lo + (self.hi - self.lo) * np.asarray(z, dtype=float)


def _act(kind: str, z: np.ndarray) -> np.ndarray:
    if kind == TANH:
        return np.tanh(z)
    if kind == RECTIFIER:
        return np.maximum(z, 0.0)
    zz = z.reshape(z.shape[0], -1, MAXOUT_PIECES)
    return np.maximum(zz[:, :, 0], zz[:, :, 1])


def _act_back(kind: str, z: np.ndarray, h: np.ndarray, dh: np.ndarray) -> np.ndarray:
    if kind == TANH:
        return dh * (1.0 - h * h)
    if kind == RECTIFIER:
        return dh * (z > 0)
    zz = z.reshape(z.shape[0], -1, MAXOUT_PIECES)
    # first maximal piece takes the gradient
    first = zz[:, :, 0] >= zz[:, :, 1]
    out = np.empty_like(zz)
    out[:, :, 0] = dh * first
    out[:, :, 1] = dh * ~first
    return out.reshape(z.shape)


def init_params(n_in: int, widths: list[int], activation: str, rng: np.random.Generator) -> list[np.ndarray]:
    """Glorot-uniform weights, zero biases; flat list [W0, b0, W1, b1, ...]."""
    params = []
    fan_in = n_in
    for w in widths:
        out = w * MAXOUT_PIECES if activation == MAXOUT else w
        lim = math.sqrt(6.0 / (fan_in + w))
        params += [rng.uniform(-lim, lim, (fan_in, out)), np.zeros(out)]
        fan_in = w
    lim = math.sqrt(6.0 / (fan_in + 1))
    params += [rng.uniform(-lim, lim, (fan_in, 1)), np.zeros(1)]
    return params


def _views(flat: np.ndarray, like: list[np.ndarray]) -> list[np.ndarray]:
    out, k = [], 0
    for p in like:
        out.append(flat[k : k + p.size].reshape(p.shape))
        k += p.size
    return out


def forward(params: list[np.ndarray], activation: str, X: np.ndarray):
    """Network output (n,) plus per-layer cache for backprop."""
    h = X
    cache = []
    n_hidden = len(params) // 2 - 1
    for k in range(n_hidden):
        z = h @ params[2 * k] + params[2 * k + 1]
        h_new = _act(activation, z)
        cache.append((h, z, h_new))
        h = h_new
    out = h @ params[-2] + params[-1]
    cache.append((h, None, None))
    return out[:, 0], cache


def backward(params: list[np.ndarray], activation: str, cache, d_out: np.ndarray, out: list[np.ndarray] | None = None):
    """Gradients of a scalar loss given its derivative ``d_out`` (n,) with
    respect to the network output. Returns (parameter grads, input grad).
    When ``out`` is given the parameter grads are written into those arrays."""
    if out is None:
        out = [np.empty_like(p) for p in params]
    d = d_out[:, None]
    np.matmul(cache[-1][0].T, d, out=out[-2])
    np.sum(d, axis=0, out=out[-1])
    dh = d @ params[-2].T
    for k in range(len(cache) - 2, -1, -1):
        h_in, z, h_out = cache[k]
        dz = _act_back(activation, z, h_out, dh)
        np.matmul(h_in.T, dz, out=out[2 * k])
        np.sum(dz, axis=0, out=out[2 * k + 1])
        dh = dz @ params[2 * k].T
    return out, dh


def mse_loss_and_grad(params: list[np.ndarray], activation: str, X: np.ndarray, y: np.ndarray, out: list[np.ndarray] | None = None):
    """Mean squared error and its gradient with respect to every parameter."""
    pred, cache = forward(params, activation, X)
    diff = pred - y
    loss = float(np.mean(diff**2))
    grads, _ = backward(params, activation, cache, (2.0 / len(y)) * diff, out)
    return loss, grads


# reciprocal/contraction flags only: NaN and inf keep IEEE semantics
@njit(cache=True, fastmath={"arcp", "contract"})
def _adam_update(p, g, m, v, lr, beta1, beta2, c1, c2, eps):
    for i in range(p.size):
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i]
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i]
        p[i] -= lr * (m[i] / c1) / (np.sqrt(v[i] / c2) + eps)


class Adam:
    def __init__(self, params: list[np.ndarray], lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            _adam_update(p.reshape(-1), np.ascontiguousarray(g, dtype=float).reshape(-1), m.reshape(-1), v.reshape(-1),
                         self.lr, self.beta1, self.beta2, c1, c2, self.eps)


@dataclass
class MlpModel:
    widths: list[int]
    activation: str
    params: list[np.ndarray]
    x_scaler: Standardizer
    y_scaler: MinMax
    hyperparameters: dict = field(default_factory=dict)
    history: list[dict] = field(default_factory=list)

    kind = "mlp"

    def predict(self, X) -> np.ndarray:
        X = flat_features(X, self.hyperparameters.get("graph_sums", False))
        out, _ = forward(self.params, self.activation, self.x_scaler.transform(X))
        return self.y_scaler.inverse(out)

    def to_json(self) -> dict:
        return {
            "widths": self.widths,
            "activation": self.activation,
            "params": [p.tolist() for p in self.params],
            "x_scaler": self.x_scaler.to_json(),
            "y_scaler": [self.y_scaler.lo, self.y_scaler.hi],
            "hyperparameters": self.hyperparameters,
        }

    @classmethod
    def from_json(cls, d: dict) -> "MlpModel":
        return cls(
            list(d["widths"]),
            d["activation"],
            [np.asarray(p, dtype=float) for p in d["params"]],
            Standardizer.from_json(d["x_scaler"]),
            MinMax(*d["y_scaler"]),
            d["hyperparameters"],
        )


def train_mlp(
    X: np.ndarray,
    y: np.ndarray,
    X_val: np.ndarray,
    y_val: np.ndarray,
    num_layer: int = 3,
    num_node: int = 16,
    activation: str = TANH,
    epochs: int = 2000,
    lr: float = 3e-3,
    batch_size: int = 32,
    seed: int = 0,
) -> MlpModel:
    """Adam on min-max scaled targets; returns the weights with the lowest validation RMSE."""
    if activation not in ACTIVATIONS:
        raise ValueError(f"unknown activation {activation!r}; expected one of {ACTIVATIONS}")
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    X_val = np.asarray(X_val, dtype=float)
    y_val = np.asarray(y_val, dtype=float)
    if len(y) == 0 or len(y_val) == 0:
        raise ValueError("train and validation sets must be nonempty")
    rng = np.random.default_rng(seed)
    widths = hidden_layer_config(num_node, num_layer)
    xs = Standardizer.fit(X)
    ys = MinMax.fit(y)
    Xs, ts = xs.transform(X), ys.forward(y)
    Xv = xs.transform(X_val)
    params = init_params(X.shape[1], widths, activation, rng)
    # parameters live as views into one flat buffer so Adam updates it in a single pass
    flat = np.concatenate([p.ravel() for p in params])
    params = _views(flat, params)
    hp = dict(num_layer=num_layer, num_node=num_node, activation=activation, epochs=epochs, lr=lr, batch_size=batch_size, seed=seed)
    model = MlpModel(widths, activation, params, xs, ys, hp)

    def val_rmse() -> float:
        pred = ys.inverse(forward(params, activation, Xv)[0])
        return float(np.sqrt(np.mean((pred - y_val) ** 2)))

    best = val_rmse()
    best_params = [p.copy() for p in params]
    opt = Adam([flat], lr)
    gflat = np.zeros_like(flat)
    gviews = _views(gflat, params)
    n = len(y)
    for epoch in range(1, epochs + 1):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, batch_size):
            b = order[start : start + batch_size]
            loss, _ = mse_loss_and_grad(params, activation, Xs[b], ts[b], gviews)
            if not math.isfinite(loss):
                raise TrainingDivergence(f"non-finite training loss at epoch {epoch}")
            opt.step([flat], [gflat])
            total += loss * len(b)
        score = val_rmse()
        if not math.isfinite(score):
            raise TrainingDivergence(f"non-finite validation error at epoch {epoch}")
        model.history.append({"epoch": epoch, "train_mse": total / n, "val_rmse": score})
        if score < best:
            best = score
            best_params = [p.copy() for p in params]
    model.params = best_params
    return model
