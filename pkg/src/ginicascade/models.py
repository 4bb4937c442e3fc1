"""The two gradient-trained classifiers.

SoftDecisionTree: a complete binary tree with sigmoid-gated soft branching.
Each inner node i holds a weight vector and bias; the probability of taking
the right branch is sigmoid(T (x.w_i + b_i)) with a learned temperature T
(kept positive through an exponential reparameterization). Leaves hold
learned class distributions (softmax over leaf logits) and the output is the
path-probability-weighted mixture of leaf distributions. A balance penalty
-sum_i lambda_i (0.5 log a_i + 0.5 log(1 - a_i)) pushes each inner node's
batch-average branch probability a_i toward 0.5, with lambda_i halving per
tree level.

Mlp: plain fully-connected ReLU network with a softmax output over the five
classes.

Both models implement closed-form gradients of their full training objective
(verified against central finite differences) and train with mini-batch Adam.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, DivergedLoss, IoError
from .numerics import N_CLASSES, PROB_FLOOR, sigmoid, softmax

_INIT_STREAM = 303
_TRAIN_STREAM = 404

# alpha is clamped into [ALPHA_CLIP, 1 - ALPHA_CLIP] inside the penalty logs
ALPHA_CLIP = 1e-6

OUTPUT_HEADS = ("identity", "softmax", "negated_softmax")


@dataclass(frozen=True)
class ModelConfig:
    """Architecture + training hyperparameters for either model family."""

    kind: str = "ddt"  # "ddt" | "mlp"
    depth: int = 6
    lambda_base: float = 4.0
    hidden: tuple[int, ...] = (128, 64, 32)
    output_head: str = "identity"
    epochs: int | None = None  # None resolves to 500 (ddt) / 1000 (mlp)
    batch_size: int = 128
    learning_rate: float = 1e-3
    one_hot_inputs: bool = False

    def __post_init__(self):
        if self.kind not in ("ddt", "mlp"):
            raise ConfigError(f"unknown model kind {self.kind!r}")
        if self.kind == "ddt" and self.depth < 1:
            raise ConfigError("tree depth must be >= 1")
        if self.output_head not in OUTPUT_HEADS:
            raise ConfigError(f"output_head must be one of {OUTPUT_HEADS}")

    def resolved_epochs(self) -> int:
        if self.epochs is not None:
            return self.epochs
        return 500 if self.kind == "ddt" else 1000


def encode_inputs(X: np.ndarray, one_hot: bool) -> np.ndarray:
    """Bin indices as floats, or expanded to one-hot columns per feature."""
    X = np.asarray(X, dtype=float)
    if not one_hot:
        return X
    n, f = X.shape
    out = np.zeros((n, f * N_CLASSES))
    cols = (np.arange(f) * N_CLASSES)[None, :] + X.astype(int)
    out[np.arange(n)[:, None], cols] = 1.0
    return out


@dataclass
class PathState:
    """Intermediates of one forward pass over a batch: per-node branch and
    path probabilities plus the per-node sums that define the balance terms."""

    gate_probs: np.ndarray  # (n, n_inner) probability of the right branch
    path_probs: np.ndarray  # (n, n_nodes) heap order, root first
    leaf_probs: np.ndarray  # (n, n_leaves)
    gated_path_sum: np.ndarray  # (n_inner,)  sum_x P_i(x) p_i(x)
    path_sum: np.ndarray  # (n_inner,)        sum_x P_i(x)


class SoftDecisionTree:
    """Inner nodes in heap order (children of i are 2i+1, 2i+2); leaf j is
    heap node n_inner + j."""

    kind = "ddt"

    def __init__(self, n_features: int, config: ModelConfig, rng: np.random.Generator):
        self.config = config
        self.n_features = n_features
        self._width = n_features * N_CLASSES if config.one_hot_inputs else n_features
        d = config.depth
        self.n_inner = 2**d - 1
        self.n_leaves = 2**d
        self.W = rng.normal(0.0, 1.0 / math.sqrt(self._width), size=(self.n_inner, self._width))
        self.b = np.zeros(self.n_inner)
        self.leaf_logits = np.zeros((self.n_leaves, N_CLASSES))
        self.log_temperature = 0.0
        # lambda per inner node: lambda_base * 2^(-level), root at level 0
        levels = np.floor(np.log2(np.arange(1, self.n_inner + 1))).astype(int)
        self.node_lambda = config.lambda_base * np.power(2.0, -levels.astype(float))

    # -- parameter vector ---------------------------------------------------

    def params_vector(self) -> np.ndarray:
        return np.concatenate(
            [self.W.ravel(), self.b, self.leaf_logits.ravel(), [self.log_temperature]]
        )

    def set_params_vector(self, v: np.ndarray) -> None:
        v = np.asarray(v, dtype=float)
        nw = self.W.size
        nb = self.b.size
        nl = self.leaf_logits.size
        self.W = v[:nw].reshape(self.W.shape).copy()
        self.b = v[nw : nw + nb].copy()
        self.leaf_logits = v[nw + nb : nw + nb + nl].reshape(self.leaf_logits.shape).copy()
        self.log_temperature = float(v[-1])

    @property
    def temperature(self) -> float:
        return math.exp(self.log_temperature)

    # -- forward ------------------------------------------------------------

    def _levels(self):
        d = self.config.depth
        for lvl in range(d):
            a = 2**lvl - 1
            b = 2 ** (lvl + 1) - 1
            yield a, b

    def path_state(self, X: np.ndarray) -> PathState:
        X = encode_inputs(X, self.config.one_hot_inputs)
        n = X.shape[0]
        Z = X @ self.W.T + self.b
        G = sigmoid(self.temperature * Z)
        n_nodes = self.n_inner + self.n_leaves
        P = np.empty((n, n_nodes))
        P[:, 0] = 1.0
        for a, b in self._levels():
            m = b - a
            children = np.empty((n, m, 2))
            children[:, :, 0] = P[:, a:b] * (1.0 - G[:, a:b])
            children[:, :, 1] = P[:, a:b] * G[:, a:b]
            P[:, 2 * a + 1 : 2 * b + 1] = children.reshape(n, 2 * m)
        leaf = P[:, self.n_inner :]
        return PathState(
            gate_probs=G,
            path_probs=P,
            leaf_probs=leaf,
            gated_path_sum=(P[:, : self.n_inner] * G).sum(axis=0),
            path_sum=P[:, : self.n_inner].sum(axis=0),
        )

    def leaf_distributions(self) -> np.ndarray:
        return softmax(self.leaf_logits)

    def mixture(self, X: np.ndarray) -> tuple[np.ndarray, PathState]:
        """Leaf-weighted class mixture p (already a distribution) + trace."""
        state = self.path_state(X)
        return state.leaf_probs @ self.leaf_distributions(), state

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        p, _ = self.mixture(np.atleast_2d(X))
        head = self.config.output_head
        if head == "softmax":
            return softmax(p)
        if head == "negated_softmax":
            return softmax(p, negate=True)
        return p

    # -- objective ----------------------------------------------------------

    def _alpha(self, state: PathState) -> tuple[np.ndarray, np.ndarray]:
        B = np.maximum(state.path_sum, 1e-30)
        alpha = state.gated_path_sum / B
        return alpha, B

    def penalty(self, state: PathState) -> float:
        alpha, _ = self._alpha(state)
        a = np.clip(alpha, ALPHA_CLIP, 1.0 - ALPHA_CLIP)
        return float(-np.sum(self.node_lambda * (0.5 * np.log(a) + 0.5 * np.log(1.0 - a))))

    def loss(self, X: np.ndarray, y: np.ndarray) -> float:
        p, state = self.mixture(X)
        pt = np.maximum(p[np.arange(len(y)), y], PROB_FLOOR)
        return float(-np.mean(np.log(pt))) + self.penalty(state)

    def loss_and_grads(self, X: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
        Xe = encode_inputs(X, self.config.one_hot_inputs)
        n = Xe.shape[0]
        state = self.path_state(X)
        G, P = state.gate_probs, state.path_probs
        Q = self.leaf_distributions()
        out = state.leaf_probs @ Q

        idx = np.arange(n)
        pt_raw = out[idx, y]
        pt = np.maximum(pt_raw, PROB_FLOOR)
        ce = float(-np.mean(np.log(pt)))

        alpha, B = self._alpha(state)
        a = np.clip(alpha, ALPHA_CLIP, 1.0 - ALPHA_CLIP)
        pen = float(-np.sum(self.node_lambda * (0.5 * np.log(a) + 0.5 * np.log(1.0 - a))))

        # d loss / d mixture output
        dout = np.zeros_like(out)
        live = pt_raw >= PROB_FLOOR
        dout[idx[live], y[live]] = -1.0 / (n * pt[live])

        # leaf parameters (softmax backward per leaf)
        dQ = state.leaf_probs.T @ dout
        s = np.sum(dQ * Q, axis=1, keepdims=True)
        dleaf_logits = Q * (dQ - s)

        # penalty gradient w.r.t. alpha, zero where the clamp is active
        inside = (alpha > ALPHA_CLIP) & (alpha < 1.0 - ALPHA_CLIP)
        dalpha = np.where(
            inside, -self.node_lambda * (0.5 / a - 0.5 / (1.0 - a)), 0.0
        )

        # sweep path probabilities bottom-up
        n_nodes = self.n_inner + self.n_leaves
        dP = np.zeros((n, n_nodes))
        dP[:, self.n_inner :] = dout @ Q.T
        dG = np.zeros_like(G)
        for a_i, b_i in reversed(list(self._levels())):
            m = b_i - a_i
            dchildren = dP[:, 2 * a_i + 1 : 2 * b_i + 1].reshape(n, m, 2)
            dleft, dright = dchildren[:, :, 0], dchildren[:, :, 1]
            gate = G[:, a_i:b_i]
            par = P[:, a_i:b_i]
            coeff = dalpha[a_i:b_i] / B[a_i:b_i]
            dG[:, a_i:b_i] = par * (dright - dleft) + coeff * par
            dP[:, a_i:b_i] += (
                gate * dright
                + (1.0 - gate) * dleft
                + coeff * (gate - alpha[a_i:b_i])
            )

        T = self.temperature
        Z = Xe @ self.W.T + self.b
        dsig = dG * G * (1.0 - G)
        dZ = dsig * T
        dW = dZ.T @ Xe
        db = dZ.sum(axis=0)
        dT = float(np.sum(dsig * Z))
        dlogT = dT * T

        grads = np.concatenate([dW.ravel(), db, dleaf_logits.ravel(), [dlogT]])
        return ce + pen, grads


class Mlp:
    kind = "mlp"

    def __init__(self, n_features: int, config: ModelConfig, rng: np.random.Generator):
        self.config = config
        self.n_features = n_features
        width = n_features * N_CLASSES if config.one_hot_inputs else n_features
        dims = [width, *config.hidden, N_CLASSES]
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(dims[:-1], dims[1:]):
            self.weights.append(rng.normal(0.0, 1.0 / math.sqrt(fan_in), size=(fan_out, fan_in)))
            self.biases.append(np.zeros(fan_out))

    def params_vector(self) -> np.ndarray:
        parts = []
        for W, b in zip(self.weights, self.biases):
            parts.append(W.ravel())
            parts.append(b)
        return np.concatenate(parts)

    def set_params_vector(self, v: np.ndarray) -> None:
        v = np.asarray(v, dtype=float)
        pos = 0
        for k in range(len(self.weights)):
            nw = self.weights[k].size
            self.weights[k] = v[pos : pos + nw].reshape(self.weights[k].shape).copy()
            pos += nw
            nb = self.biases[k].size
            self.biases[k] = v[pos : pos + nb].copy()
            pos += nb

    def _forward(self, X: np.ndarray) -> tuple[list[np.ndarray], np.ndarray]:
        h = encode_inputs(X, self.config.one_hot_inputs)
        activations = [h]
        for W, b in zip(self.weights[:-1], self.biases[:-1]):
            h = np.maximum(h @ W.T + b, 0.0)
            activations.append(h)
        logits = h @ self.weights[-1].T + self.biases[-1]
        return activations, logits

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        _, logits = self._forward(np.atleast_2d(X))
        return softmax(logits)

    def loss(self, X: np.ndarray, y: np.ndarray) -> float:
        q = self.predict_proba(X)
        pt = np.maximum(q[np.arange(len(y)), y], PROB_FLOOR)
        return float(-np.mean(np.log(pt)))

    def loss_and_grads(self, X: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
        activations, logits = self._forward(X)
        q = softmax(logits)
        n = len(y)
        idx = np.arange(n)
        pt = np.maximum(q[idx, y], PROB_FLOOR)
        loss = float(-np.mean(np.log(pt)))

        delta = q.copy()
        delta[idx, y] -= 1.0
        delta /= n

        dWs: list[np.ndarray] = [np.empty(0)] * len(self.weights)
        dbs: list[np.ndarray] = [np.empty(0)] * len(self.biases)
        for k in range(len(self.weights) - 1, -1, -1):
            dWs[k] = delta.T @ activations[k]
            dbs[k] = delta.sum(axis=0)
            if k > 0:
                delta = (delta @ self.weights[k]) * (activations[k] > 0)

        parts = []
        for dW, db in zip(dWs, dbs):
            parts.append(dW.ravel())
            parts.append(db)
        return loss, np.concatenate(parts)


Model = SoftDecisionTree | Mlp


def build_model(config: ModelConfig, n_features: int, seed: int) -> Model:
    rng = np.random.default_rng([_INIT_STREAM, seed])
    if config.kind == "ddt":
        return SoftDecisionTree(n_features, config, rng)
    return Mlp(n_features, config, rng)


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------


class Adam:
    def __init__(self, n_params: int, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m = np.zeros(n_params)
        self.v = np.zeros(n_params)
        self.t = 0

    def step(self, params: np.ndarray, grads: np.ndarray) -> np.ndarray:
        self.t += 1
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grads
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grads**2
        m_hat = self.m / (1.0 - self.beta1**self.t)
        v_hat = self.v / (1.0 - self.beta2**self.t)
        return params - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def train_model(
    model: Model,
    X: np.ndarray,
    y: np.ndarray,
    epochs: int,
    batch_size: int,
    learning_rate: float,
    seed: int,
) -> list[float]:
    """Mini-batch Adam on the model's objective. Returns the per-epoch mean
    batch loss. Deterministic for a fixed seed; raises DivergedLoss if the
    loss stops being finite."""
    X = np.asarray(X)
    y = np.asarray(y, dtype=int)
    n = len(y)
    if n == 0:
        raise ValueError("empty training set")
    rng = np.random.default_rng([_TRAIN_STREAM, seed])
    params = model.params_vector()
    opt = Adam(params.size, lr=learning_rate)
    trace: list[float] = []
    for _ in range(epochs):
        perm = rng.permutation(n)
        losses = []
        for start in range(0, n, batch_size):
            batch = perm[start : start + batch_size]
            loss, grads = model.loss_and_grads(X[batch], y[batch])
            if not math.isfinite(loss):
                raise DivergedLoss(f"loss became {loss}")
            params = opt.step(params, grads)
            model.set_params_vector(params)
            losses.append(loss)
        trace.append(float(np.mean(losses)))
    return trace


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------


def save_model(model: Model, path: str | Path, seed: int | None = None, config_hash: str | None = None) -> None:
    cfg = model.config
    payload = {
        "kind": model.kind,
        "n_features": model.n_features,
        "config": {
            "kind": cfg.kind,
            "depth": cfg.depth,
            "lambda_base": cfg.lambda_base,
            "hidden": list(cfg.hidden),
            "output_head": cfg.output_head,
            "epochs": cfg.epochs,
            "batch_size": cfg.batch_size,
            "learning_rate": cfg.learning_rate,
            "one_hot_inputs": cfg.one_hot_inputs,
        },
        "seed": seed,
        "config_hash": config_hash,
        "params": model.params_vector().tolist(),
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(payload, f)


def load_model(path: str | Path) -> Model:
    try:
        with open(path) as f:
            payload = json.load(f)
    except (OSError, json.JSONDecodeError) as exc:
        raise IoError(f"cannot load model from {path}: {exc}")
    cfg_d = dict(payload["config"])
    cfg_d["hidden"] = tuple(cfg_d["hidden"])
    config = ModelConfig(**cfg_d)
    model = build_model(config, payload["n_features"], seed=0)
    model.set_params_vector(np.asarray(payload["params"], dtype=float))
    return model
