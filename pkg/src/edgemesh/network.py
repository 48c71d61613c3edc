"""The edge-distance regressor: a small MLP pair trained with Adam.

A feature stack is applied to an edge embedding and to its symmetric twin
with shared weights; the element-wise max of the two feature vectors feeds a
regression head with a single linear output. The max fusion makes the
prediction exactly invariant to edge orientation. Everything is float64
numpy, trained full-batch-free with seeded mini-batch SGD semantics so runs
are bit-reproducible.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class Architecture:
    """Layer widths: ``feature`` maps the embedding to pooled features,
    ``head`` maps pooled features to the scalar distance."""

    input_dim: int
    feature_widths: tuple[int, ...] = (256, 256, 256)
    head_widths: tuple[int, ...] = (128, 64)

    def __post_init__(self):
        if self.input_dim < 1:
            raise ValueError("input_dim must be positive")
        if not self.feature_widths:
            raise ValueError("need at least one feature layer")
        if any(w < 1 for w in self.feature_widths + self.head_widths):
            raise ValueError("layer widths must be positive")
        object.__setattr__(self, "feature_widths", tuple(int(w) for w in self.feature_widths))
        object.__setattr__(self, "head_widths", tuple(int(w) for w in self.head_widths))

    @property
    def feature_dims(self) -> list[tuple[int, int]]:
        widths = (self.input_dim,) + self.feature_widths
        return list(zip(widths[:-1], widths[1:]))

    @property
    def head_dims(self) -> list[tuple[int, int]]:
        widths = (self.feature_widths[-1],) + self.head_widths + (1,)
        return list(zip(widths[:-1], widths[1:]))

    def to_dict(self) -> dict:
        return {
            "input_dim": self.input_dim,
            "feature_widths": list(self.feature_widths),
            "head_widths": list(self.head_widths),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Architecture":
        return cls(
            input_dim=int(d["input_dim"]),
            feature_widths=tuple(d["feature_widths"]),
            head_widths=tuple(d["head_widths"]),
        )


@dataclass
class RegressorParams:
    """Weight/bias pairs for the feature stack and the head, plus the layout."""

    arch: Architecture
    feature_layers: list[tuple[np.ndarray, np.ndarray]]
    head_layers: list[tuple[np.ndarray, np.ndarray]]

    def flatten(self) -> list[np.ndarray]:
        out = []
        for w, b in self.feature_layers + self.head_layers:
            out += [w, b]
        return out

    def copy(self) -> "RegressorParams":
        return RegressorParams(
            arch=self.arch,
            feature_layers=[(w.copy(), b.copy()) for w, b in self.feature_layers],
            head_layers=[(w.copy(), b.copy()) for w, b in self.head_layers],
        )


def init_params(arch: Architecture, seed: int) -> RegressorParams:
    """Scaled-uniform weights in (-1/sqrt(fan_in), 1/sqrt(fan_in)), zero biases."""
    rng = np.random.default_rng(seed)

    def layer(fan_in, fan_out):
        bound = 1.0 / np.sqrt(fan_in)
        w = rng.uniform(-bound, bound, size=(fan_in, fan_out))
        return w, np.zeros(fan_out)

    return RegressorParams(
        arch=arch,
        feature_layers=[layer(i, o) for i, o in arch.feature_dims],
        head_layers=[layer(i, o) for i, o in arch.head_dims],
    )


def _check_input(params: RegressorParams, emb: np.ndarray, name: str) -> np.ndarray:
    emb = np.asarray(emb, dtype=np.float64)
    if emb.ndim == 1:
        emb = emb[None, :]
    if emb.ndim != 2 or emb.shape[1] != params.arch.input_dim:
        raise ValueError(
            f"{name} must have shape (batch, {params.arch.input_dim}), got {emb.shape}"
        )
    return emb


def _feature_forward(layers, x):
    """ReLU after every feature layer; returns pre-activations for backprop."""
    pre = []
    h = x
    for w, b in layers:
        z = h @ w + b
        pre.append(z)
        h = np.maximum(z, 0.0)
    return h, pre


def _forward_cached(params: RegressorParams, emb: np.ndarray, emb_sym: np.ndarray):
    f1, pre1 = _feature_forward(params.feature_layers, emb)
    f2, pre2 = _feature_forward(params.feature_layers, emb_sym)
    winner1 = f1 >= f2  # ties route to the first (non-symmetric) branch
    pooled = np.where(winner1, f1, f2)

    h = pooled
    head_pre = []
    head_in = []
    n_head = len(params.head_layers)
    for li, (w, b) in enumerate(params.head_layers):
        head_in.append(h)
        z = h @ w + b
        head_pre.append(z)
        h = z if li == n_head - 1 else np.maximum(z, 0.0)  # linear output layer
    out = h[:, 0]
    cache = (emb, emb_sym, pre1, pre2, winner1, head_in, head_pre)
    return out, cache


def forward(params: RegressorParams, emb, emb_sym) -> np.ndarray:
    """Raw (unclamped) predicted distances for embedding pairs; (batch,)."""
    emb = _check_input(params, emb, "emb")
    emb_sym = _check_input(params, emb_sym, "emb_sym")
    out, _ = _forward_cached(params, emb, emb_sym)
    return out


def predict_batch(params: RegressorParams, emb, emb_sym) -> np.ndarray:
    """Inference path: predictions clamped to be non-negative distances."""
    emb = np.asarray(emb, dtype=np.float64)
    if emb.size == 0:
        return np.zeros(0)
    return np.maximum(forward(params, emb, emb_sym), 0.0)


def squared_error(predicted, target) -> np.ndarray:
    """Per-sample squared error; callers average for a batch loss."""
    predicted = np.asarray(predicted, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    return (predicted - target) ** 2


@dataclass
class Gradients:
    feature_layers: list[tuple[np.ndarray, np.ndarray]]
    head_layers: list[tuple[np.ndarray, np.ndarray]]

    def flatten(self) -> list[np.ndarray]:
        out = []
        for w, b in self.feature_layers + self.head_layers:
            out += [w, b]
        return out


def backward(
    params: RegressorParams, emb, emb_sym, target
) -> tuple[Gradients, float]:
    """Exact gradients of the mean squared error over the batch.

    At max-pool ties the gradient goes to the first branch. Returns the
    gradients and the batch loss.
    """
    emb = _check_input(params, emb, "emb")
    emb_sym = _check_input(params, emb_sym, "emb_sym")
    target = np.asarray(target, dtype=np.float64).reshape(-1)
    if target.shape[0] != emb.shape[0]:
        raise ValueError("target length does not match batch size")

    out, cache = _forward_cached(params, emb, emb_sym)
    emb, emb_sym, pre1, pre2, winner1, head_in, head_pre = cache
    batch = emb.shape[0]
    loss = float(np.mean((out - target) ** 2))

    # d(mean squared error)/d(out)
    delta = (2.0 / batch) * (out - target)

    grad_head = []
    g = delta[:, None]
    n_head = len(params.head_layers)
    for li in range(n_head - 1, -1, -1):
        w, _ = params.head_layers[li]
        if li != n_head - 1:
            g = g * (head_pre[li] > 0)
        grad_w = head_in[li].T @ g
        grad_b = g.sum(axis=0)
        grad_head.append((grad_w, grad_b))
        g = g @ w.T
    grad_head.reverse()

    # split pooled gradient between the two shared-weight branches
    g1 = np.where(winner1, g, 0.0)
    g2 = np.where(winner1, 0.0, g)

    grads_f = [
        (np.zeros_like(w), np.zeros_like(b)) for w, b in params.feature_layers
    ]
    for g_branch, pre, x0 in ((g1, pre1, emb), (g2, pre2, emb_sym)):
        g = g_branch
        for li in range(len(params.feature_layers) - 1, -1, -1):
            w, _ = params.feature_layers[li]
            g = g * (pre[li] > 0)
            h_in = x0 if li == 0 else np.maximum(pre[li - 1], 0.0)
            grads_f[li] = (grads_f[li][0] + h_in.T @ g, grads_f[li][1] + g.sum(axis=0))
            g = g @ w.T

    return Gradients(feature_layers=grads_f, head_layers=grad_head), loss


@dataclass
class AdamState:
    """First/second moment accumulators plus the step counter and current lr."""

    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int
    learning_rate: float
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    eps: float = ADAM_EPS

    @classmethod
    def init(cls, params: RegressorParams, learning_rate: float) -> "AdamState":
        flat = params.flatten()
        return cls(
            m=[np.zeros_like(p) for p in flat],
            v=[np.zeros_like(p) for p in flat],
            step=0,
            learning_rate=learning_rate,
        )


def adam_step(
    params: RegressorParams, state: AdamState, grads: Gradients
) -> tuple[RegressorParams, AdamState]:
    """One bias-corrected Adam update; modifies and returns params/state."""
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    correction = np.sqrt(1.0 - b2**t) / (1.0 - b1**t)
    lr_t = state.learning_rate * correction
    for p, g, m, v in zip(params.flatten(), grads.flatten(), state.m, state.v):
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g * g
        p -= lr_t * m / (np.sqrt(v) + state.eps)
    return params, state


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-5
    lr_decay: float = 0.3
    milestones: tuple[int, ...] | None = None  # defaults to 50% and 75% of epochs
    batch_size: int = 256
    epochs: int = 200
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if not 0 < self.lr_decay <= 1:
            raise ValueError("lr_decay must be in (0, 1]")
        if self.batch_size < 1 or self.epochs < 1:
            raise ValueError("batch_size and epochs must be positive")

    def resolved_milestones(self) -> tuple[int, ...]:
        if self.milestones is not None:
            return tuple(int(m) for m in self.milestones)
        return (self.epochs // 2, (self.epochs * 3) // 4)


def train(
    dataset,
    config: TrainConfig,
    *,
    arch: Architecture | None = None,
    params: RegressorParams | None = None,
) -> tuple[RegressorParams, list[float]]:
    """Train on a :class:`~edgemesh.labels.TrainingSet`; returns params and
    the per-epoch mean batch loss history.

    Mini-batches are reshuffled each epoch from a seeded generator, and the
    learning rate is multiplied by ``lr_decay`` at each milestone epoch, so a
    fixed seed and config reproduce the loss history exactly.
    """
    if len(dataset) == 0:
        raise ValueError("training set is empty")
    if params is None:
        if arch is None:
            arch = Architecture(input_dim=dataset.dim)
        params = init_params(arch, config.seed)
    if params.arch.input_dim != dataset.dim:
        raise ValueError(
            f"architecture expects {params.arch.input_dim}-d embeddings, "
            f"dataset has {dataset.dim}"
        )

    emb = dataset.embeddings
    emb_sym = dataset.embeddings_sym
    labels = dataset.labels
    state = AdamState.init(params, config.learning_rate)
    milestones = set(config.resolved_milestones())
    rng = np.random.default_rng(config.seed)

    history: list[float] = []
    for epoch in range(config.epochs):
        if epoch in milestones:
            state.learning_rate *= config.lr_decay
        order = rng.permutation(len(dataset))
        losses = []
        for start in range(0, len(order), config.batch_size):
            pick = order[start : start + config.batch_size]
            grads, loss = backward(params, emb[pick], emb_sym[pick], labels[pick])
            if not np.isfinite(loss):
                raise RuntimeError(
                    f"training diverged: non-finite loss at epoch {epoch}, "
                    f"batch starting {start}"
                )
            params, state = adam_step(params, state, grads)
            losses.append(loss)
        history.append(float(np.mean(losses)))
    return params, history


# ---------------------------------------------------------------------------
# checkpoints


def save_checkpoint(params: RegressorParams, path, meta: dict | None = None) -> None:
    """Write weights as little-endian float64 arrays in layer order (.npz)
    plus a human-readable JSON sidecar with the architecture."""
    path = Path(path)
    arrays = {}
    for i, (w, b) in enumerate(params.feature_layers):
        arrays[f"feature_w{i}"] = w.astype("<f8")
        arrays[f"feature_b{i}"] = b.astype("<f8")
    for i, (w, b) in enumerate(params.head_layers):
        arrays[f"head_w{i}"] = w.astype("<f8")
        arrays[f"head_b{i}"] = b.astype("<f8")
    header = {"architecture": params.arch.to_dict(), "encoding": "<f8"}
    if meta:
        header.update(meta)
    arrays["header"] = np.frombuffer(json.dumps(header).encode("utf-8"), dtype=np.uint8)
    np.savez(path, **arrays)
    sidecar = path.with_suffix(".json")
    sidecar.write_text(json.dumps(header, indent=2) + "\n", encoding="utf-8")


def load_checkpoint(path) -> tuple[RegressorParams, dict]:
    path = Path(path)
    with np.load(path) as data:
        header = json.loads(bytes(data["header"]).decode("utf-8"))
        arch = Architecture.from_dict(header["architecture"])
        feature_layers = [
            (
                np.ascontiguousarray(data[f"feature_w{i}"], dtype=np.float64),
                np.ascontiguousarray(data[f"feature_b{i}"], dtype=np.float64),
            )
            for i in range(len(arch.feature_dims))
        ]
        head_layers = [
            (
                np.ascontiguousarray(data[f"head_w{i}"], dtype=np.float64),
                np.ascontiguousarray(data[f"head_b{i}"], dtype=np.float64),
            )
            for i in range(len(arch.head_dims))
        ]
    params = RegressorParams(arch=arch, feature_layers=feature_layers, head_layers=head_layers)
    _validate_shapes(params)
    return params, header


def _validate_shapes(params: RegressorParams) -> None:
    for (w, b), (i, o) in zip(params.feature_layers, params.arch.feature_dims):
        if w.shape != (i, o) or b.shape != (o,):
            raise ValueError(f"feature layer shape mismatch: {w.shape} vs {(i, o)}")
    for (w, b), (i, o) in zip(params.head_layers, params.arch.head_dims):
        if w.shape != (i, o) or b.shape != (o,):
            raise ValueError(f"head layer shape mismatch: {w.shape} vs {(i, o)}")
