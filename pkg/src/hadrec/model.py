"""The permutation-equivariant completion model and its training loop.

Architecture: four message-passing layers, each encoding (entry, row
neighbour) and (entry, column neighbour) pairs through one shared dense map
psi(x) = tanh(Wx + b) and summing the messages, followed by an entry-wise
tanh MLP classifier. Feature widths are 8, 16, 32, 64 per layer and the
classifier is 400-200-200-1, so predictions land in (-1, 1) and are decoded
by sign. Weights have no dependence on the matrix order: a checkpoint trained
at one order runs at any other.

Two forward paths exist: the fast tape path used for training and evaluation
(fixed summation order, reproducible bit-for-bit for a given input), and a
reference path using exactly rounded summation whose output is bitwise
invariant to row/column permutations of the summands (used by the tests).
"""

from __future__ import annotations

import hashlib
import math
import os
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .datagen import DatasetConfig, Pool, make_batch
from .matrices import SignMatrix

EMP_DIMS = (8, 16, 32, 64)
CLASSIFIER_DIMS = (400, 200, 200, 1)
CHECKPOINT_VERSION = "hadrec checkpoint v1"


class CheckpointError(ValueError):
    """Version mismatch, checksum failure, or shape inconsistency on load."""


class TrainingError(RuntimeError):
    """Non-finite loss or other unrecoverable training failure."""


@dataclass
class ModelParams:
    """All trainable arrays keyed by name, plus the pair-encoder bias toggle."""

    values: dict[str, np.ndarray]
    pair_bias: bool = True

    def copy(self) -> "ModelParams":
        return ModelParams({k: v.copy() for k, v in self.values.items()}, self.pair_bias)

    def parameter_count(self) -> int:
        return sum(v.size for v in self.values.values())


def parameter_shapes(pair_bias: bool = True) -> dict[str, tuple[int, ...]]:
    shapes: dict[str, tuple[int, ...]] = {}
    d = 1
    for i, dout in enumerate(EMP_DIMS, start=1):
        shapes[f"emp{i}.w"] = (2 * d, dout)
        if pair_bias:
            shapes[f"emp{i}.b"] = (dout,)
        d = dout
    for i, dout in enumerate(CLASSIFIER_DIMS, start=1):
        shapes[f"cls{i}.w"] = (d, dout)
        shapes[f"cls{i}.b"] = (dout,)
        d = dout
    return shapes


def init_params(rng: np.random.Generator, pair_bias: bool = True,
                scale: float = 1.0) -> ModelParams:
    """Uniform init in scale * [-1/sqrt(fan_in), +1/sqrt(fan_in)] per tensor."""
    values = {}
    for name, shape in parameter_shapes(pair_bias).items():
        fan_in = shape[0] if name.endswith(".w") else _fan_in_for_bias(name, pair_bias)
        bound = scale / math.sqrt(fan_in)
        values[name] = rng.uniform(-bound, bound, size=shape)
    return ModelParams(values, pair_bias)


def _fan_in_for_bias(name: str, pair_bias: bool) -> int:
    stem = name[: -len(".b")]
    return parameter_shapes(pair_bias)[stem + ".w"][0]


def zero_params(pair_bias: bool = True) -> ModelParams:
    return ModelParams(
        {k: np.zeros(s) for k, s in parameter_shapes(pair_bias).items()}, pair_bias
    )


# ---------------------------------------------------------------------------
# forward


def _as_batch(x) -> tuple[np.ndarray, bool]:
    if isinstance(x, SignMatrix):
        return x.entries.astype(np.float64)[None, :, :], True
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 2:
        return arr[None, :, :], True
    if arr.ndim == 3:
        return arr, False
    raise ad.ShapeError(f"expected (n,n) or (B,n,n), got {arr.shape}")


def forward_graph(x: np.ndarray, tensors: dict[str, ad.Tensor], pair_bias: bool,
                  collect=None) -> ad.Tensor:
    """Build the tape for a (B, n, n) input batch and return the (B, n, n) output."""
    batch, n, _ = x.shape
    f = ad.constant(x.reshape(batch * n * n, 1))
    d = 1
    for i, dout in enumerate(EMP_DIMS, start=1):
        w = tensors[f"emp{i}.w"]
        center = ad.reshape(ad.matmul(f, ad.slice_rows(w, 0, d)), (batch, n, n, dout))
        neighbour = ad.reshape(ad.matmul(f, ad.slice_rows(w, d, 2 * d)), (batch, n, n, dout))
        bias = tensors[f"emp{i}.b"] if pair_bias else ad.constant(np.zeros(dout))
        grid = ad.pair_message_sum(center, neighbour, bias)
        if collect is not None:
            collect.append(grid.data)
        f = ad.reshape(grid, (batch * n * n, dout))
        d = dout
    for i in range(1, len(CLASSIFIER_DIMS) + 1):
        f = ad.tanh(ad.affine(f, tensors[f"cls{i}.w"], tensors[f"cls{i}.b"]))
    return ad.reshape(f, (batch, n, n))


def _tensors(params: ModelParams) -> dict[str, ad.Tensor]:
    return {k: ad.Tensor(v, name=k) for k, v in params.values.items()}


def forward(params: ModelParams, x) -> np.ndarray:
    """Predictions in (-1, 1) for one matrix (n, n) or a batch (B, n, n)."""
    arr, single = _as_batch(x)
    out = forward_graph(arr, _tensors(params), params.pair_bias).data
    return out[0] if single else out


def feature_grids(params: ModelParams, x) -> list[np.ndarray]:
    """Per-layer feature grids (for receptive-field and equivariance checks)."""
    arr, single = _as_batch(x)
    grids: list[np.ndarray] = []
    forward_graph(arr, _tensors(params), params.pair_bias, collect=grids)
    return [g[0] if single else g for g in grids]


def emp_layer(grid: np.ndarray, weights: np.ndarray, bias: np.ndarray | None = None,
              exact: bool = False) -> np.ndarray:
    """One message-passing layer applied to an (n, n, d_in) feature grid.

    weights is the (2*d_in, d_out) pair encoder; messages are summed over row
    and column neighbours. With exact=True the sum is exactly rounded (fsum),
    making the output bitwise equivariant under row/column permutations; the
    default fast path is vectorised and equivariant to ~1e-12.
    """
    n, n2, d = grid.shape
    if n != n2 or weights.shape[0] != 2 * d:
        raise ad.ShapeError(f"grid {grid.shape} vs weights {weights.shape}")
    dout = weights.shape[1]
    b = np.zeros(dout) if bias is None else np.asarray(bias, dtype=np.float64)
    if not exact:
        flat = grid.reshape(n * n, d)
        center = (flat @ weights[:d]).reshape(1, n, n, dout)
        neighbour = (flat @ weights[d:]).reshape(1, n, n, dout)
        return ad.pair_message_sum(
            ad.constant(center), ad.constant(neighbour), ad.constant(b)
        ).data[0]
    out = np.empty((n, n, dout))
    for i in range(n):
        for j in range(n):
            messages = []
            for w in range(n):
                if w != j:
                    messages.append(np.tanh(np.concatenate([grid[i, j], grid[i, w]]) @ weights + b))
                if w != i:
                    messages.append(np.tanh(np.concatenate([grid[i, j], grid[w, j]]) @ weights + b))
            out[i, j] = [math.fsum(msg[c] for msg in messages) for c in range(dout)]
    return out


def forward_reference(params: ModelParams, m: SignMatrix) -> np.ndarray:
    """Slow single-matrix forward with exactly rounded message summation.

    fsum over the message multiset makes each layer's output bitwise
    independent of neighbour enumeration order, hence bitwise equivariant.
    """
    n = m.order
    f = m.entries.astype(np.float64)[:, :, None]
    d = 1
    for li, dout in enumerate(EMP_DIMS, start=1):
        w = params.values[f"emp{li}.w"]
        b = params.values.get(f"emp{li}.b", np.zeros(dout)) if params.pair_bias else np.zeros(dout)
        out = np.empty((n, n, dout))
        for i in range(n):
            for j in range(n):
                messages = []
                for wdx in range(n):
                    if wdx != j:
                        messages.append(np.tanh(np.concatenate([f[i, j], f[i, wdx]]) @ w + b))
                    if wdx != i:
                        messages.append(np.tanh(np.concatenate([f[i, j], f[wdx, j]]) @ w + b))
                out[i, j] = [math.fsum(msg[c] for msg in messages) for c in range(dout)]
        f = out
        d = dout
    flat = f.reshape(n * n, d)
    for ci in range(1, len(CLASSIFIER_DIMS) + 1):
        flat = np.tanh(flat @ params.values[f"cls{ci}.w"] + params.values[f"cls{ci}.b"])
    return flat.reshape(n, n)


# ---------------------------------------------------------------------------
# losses

BCE_EPS = 1e-7


def loss_graph(pred: ad.Tensor, targets: np.ndarray, kind: str = "mse") -> ad.Tensor:
    """Scalar loss over every entry of the batch (targets are 0 off-mask)."""
    if pred.data.shape != targets.shape:
        raise ad.ShapeError(f"prediction {pred.data.shape} vs target {targets.shape}")
    m = int(np.prod(targets.shape))
    if kind == "mse":
        diff = ad.add(ad.reshape(pred, (1, m)), ad.constant(-targets.reshape(1, m)))
        return ad.scale(ad.matmul(diff, ad.reshape(diff, (m, 1))), 1.0 / m)
    if kind == "bce":
        # rescale both sides to ]0,1[ via x -> (x+1)/2, clamp, then cross-entropy
        p = ad.clamp(
            ad.scale(ad.add(ad.reshape(pred, (m, 1)), ad.constant(np.ones((m, 1)))), 0.5),
            BCE_EPS,
            1.0 - BCE_EPS,
        )
        y = (targets.reshape(1, m) + 1.0) / 2.0
        term_pos = ad.matmul(ad.constant(y), ad.log(p))
        one_minus_p = ad.add(ad.constant(np.ones((m, 1))), ad.scale(p, -1.0))
        term_neg = ad.matmul(ad.constant(1.0 - y), ad.log(one_minus_p))
        return ad.scale(ad.add(term_pos, term_neg), -1.0 / m)
    raise ValueError(f"unknown loss kind {kind!r}")


def loss_value(params: ModelParams, inputs: np.ndarray, targets: np.ndarray,
               kind: str = "mse") -> float:
    pred = forward_graph(inputs, _tensors(params), params.pair_bias)
    return loss_graph(pred, targets, kind).item()


# ---------------------------------------------------------------------------
# optimizers


class SgdMomentum:
    def __init__(self, lr: float, momentum: float = 0.9):
        self.lr = lr
        self.momentum = momentum
        self.velocity: dict[str, np.ndarray] = {}

    def step(self, values: dict[str, np.ndarray], grads: dict[str, np.ndarray]):
        for k, g in grads.items():
            v = self.velocity.get(k)
            v = g if v is None else self.momentum * v + g
            self.velocity[k] = v
            values[k] = values[k] - self.lr * v


class Adam:
    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.t = 0

    def step(self, values: dict[str, np.ndarray], grads: dict[str, np.ndarray]):
        self.t += 1
        correction1 = 1.0 - self.beta1 ** self.t
        correction2 = 1.0 - self.beta2 ** self.t
        for k, g in grads.items():
            m = self.m.get(k, 0.0) * self.beta1 + (1 - self.beta1) * g
            v = self.v.get(k, 0.0) * self.beta2 + (1 - self.beta2) * g * g
            self.m[k], self.v[k] = m, v
            values[k] = values[k] - self.lr * (m / correction1) / (
                np.sqrt(v / correction2) + self.eps
            )


def make_optimizer(name: str, lr: float, momentum: float = 0.9):
    if name == "sgd":
        return SgdMomentum(lr, momentum)
    if name == "adam":
        return Adam(lr)
    raise ValueError(f"unknown optimizer {name!r}")


# ---------------------------------------------------------------------------
# training


@dataclass(frozen=True)
class TrainConfig:
    order: int
    seed: int = 0
    loss: str = "mse"
    batches_per_epoch: int = 50
    batch_size: int = 150
    patience: int = 10
    max_epochs: int = 200
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    momentum: float = 0.9
    k_max: int | None = None
    augment_negations: bool = True
    augment_permutations: bool = False
    pair_bias: bool = True
    val_batches: int = 10
    # halve the learning rate after lr_patience epochs without improvement
    lr_decay: float = 0.5
    lr_patience: int = 5
    min_lr: float = 1e-5
    init_scale: float = 1.0

    def __post_init__(self):
        if self.patience < 1 or self.batches_per_epoch < 1 or self.batch_size < 1:
            raise ValueError("patience and batch parameters must be positive")
        if self.loss not in ("mse", "bce"):
            raise ValueError(f"unknown loss {self.loss!r}")
        if not 0.0 < self.lr_decay <= 1.0 or self.lr_patience < 1:
            raise ValueError("lr_decay must lie in (0, 1] and lr_patience be >= 1")

    def data_config(self) -> DatasetConfig:
        k_max = self.k_max if self.k_max is not None else max(1, self.order * self.order // 4)
        return DatasetConfig(
            order=self.order,
            k_range=(1, k_max),
            augment_permutations=self.augment_permutations,
            augment_negations=self.augment_negations,
            seed=self.seed,
        )


@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    val_loss: float


def _batch_arrays(instances) -> tuple[np.ndarray, np.ndarray]:
    xs = np.stack([inst.input.entries for inst in instances]).astype(np.float64)
    ys = np.stack([inst.target.entries for inst in instances]).astype(np.float64)
    return xs, ys


def train(
    cfg: TrainConfig,
    train_pool: Pool,
    val_pool: Pool | None = None,
    progress=None,
    snapshot_hook=None,
) -> tuple[ModelParams, list[EpochStats]]:
    """Appendix-style schedule: fresh batches every epoch, early stop on patience.

    Deterministic per (cfg, pools): identical configs give bitwise-identical
    parameters. Returns the best-validation parameters and the epoch history.
    """
    if train_pool.order != cfg.order:
        raise ValueError(f"pool order {train_pool.order} != config order {cfg.order}")
    val_pool = val_pool if val_pool is not None else train_pool
    data_cfg = cfg.data_config()
    params = init_params(np.random.default_rng([cfg.seed, 0]), cfg.pair_bias,
                         cfg.init_scale)
    optimizer = make_optimizer(cfg.optimizer, cfg.learning_rate, cfg.momentum)

    val_sets = [
        _batch_arrays(make_batch(val_pool, data_cfg, [cfg.seed, 1, i], cfg.batch_size))
        for i in range(cfg.val_batches)
    ]

    def validation_loss(p: ModelParams) -> float:
        return float(
            np.mean([loss_value(p, xs, ys, cfg.loss) for xs, ys in val_sets])
        )

    best = params.copy()
    best_val = math.inf
    stale = 0
    lr_stale = 0
    history: list[EpochStats] = []
    for epoch in range(1, cfg.max_epochs + 1):
        epoch_losses = []
        for b in range(cfg.batches_per_epoch):
            batch = make_batch(train_pool, data_cfg, [cfg.seed, 2, epoch, b], cfg.batch_size)
            xs, ys = _batch_arrays(batch)
            tensors = _tensors(params)
            try:
                loss = loss_graph(
                    forward_graph(xs, tensors, params.pair_bias), ys, cfg.loss
                )
            except ad.NonFiniteError as exc:
                raise TrainingError(f"non-finite loss at epoch {epoch} batch {b}: {exc}") from exc
            grads = ad.backward(loss, tensors.values())
            optimizer.step(params.values, grads)
            epoch_losses.append(loss.item())
        val = validation_loss(params)
        stats = EpochStats(epoch, float(np.mean(epoch_losses)), val)
        history.append(stats)
        if progress is not None:
            progress(stats)
        if snapshot_hook is not None:
            snapshot_hook(epoch, params)
        if val < best_val:
            best_val = val
            best = params.copy()
            stale = 0
            lr_stale = 0
        else:
            stale += 1
            lr_stale += 1
            if stale >= cfg.patience:
                break
            if lr_stale >= cfg.lr_patience and optimizer.lr > cfg.min_lr:
                optimizer.lr = max(cfg.min_lr, optimizer.lr * cfg.lr_decay)
                lr_stale = 0
    return best, history


# ---------------------------------------------------------------------------
# checkpoints


def save_params(params: ModelParams, path, meta: dict | None = None) -> None:
    """Versioned self-describing text checkpoint with a trailing checksum."""
    lines = [CHECKPOINT_VERSION]
    lines.append(f"pair_bias = {'on' if params.pair_bias else 'off'}")
    lines.append("emp_dims = " + ",".join(str(d) for d in EMP_DIMS))
    lines.append("classifier_dims = " + ",".join(str(d) for d in CLASSIFIER_DIMS))
    for key in sorted((meta or {})):
        lines.append(f"meta.{key} = {(meta or {})[key]}")
    for name in sorted(params.values):
        arr = params.values[name]
        lines.append(f"tensor {name} " + " ".join(str(s) for s in arr.shape))
        flat = arr.reshape(-1)
        cols = arr.shape[-1] if arr.ndim else 1
        for start in range(0, flat.size, cols):
            lines.append(" ".join(repr(float(v)) for v in flat[start : start + cols]))
    body = "\n".join(lines) + "\n"
    digest = hashlib.sha256(body.encode("utf-8")).hexdigest()
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(body)
        fh.write(f"checksum = {digest}\n")
    os.replace(tmp, path)


def load_params(path) -> tuple[ModelParams, dict]:
    with open(path, "r", encoding="utf-8") as fh:
        content = fh.read()
    head, _, last = content.rstrip("\n").rpartition("\n")
    if not last.startswith("checksum = "):
        raise CheckpointError("missing checksum line")
    body = head + "\n"
    if hashlib.sha256(body.encode("utf-8")).hexdigest() != last.split(" = ", 1)[1]:
        raise CheckpointError("checksum failure (file corrupt or truncated)")
    lines = body.rstrip("\n").split("\n")
    if lines[0] != CHECKPOINT_VERSION:
        raise CheckpointError(f"version mismatch: {lines[0]!r}")
    meta: dict[str, str] = {}
    fields: dict[str, str] = {}
    values: dict[str, np.ndarray] = {}
    i = 1
    while i < len(lines):
        line = lines[i]
        if line.startswith("tensor "):
            _, name, *dims = line.split()
            shape = tuple(int(d) for d in dims)
            rows = max(1, int(np.prod(shape[:-1]))) if shape else 1
            data = []
            for r in range(rows):
                i += 1
                data.extend(float(tok) for tok in lines[i].split())
            arr = np.array(data, dtype=np.float64)
            if arr.size != int(np.prod(shape)):
                raise CheckpointError(f"shape inconsistency for {name}")
            values[name] = arr.reshape(shape)
        elif line.startswith("meta."):
            key, _, val = line.partition(" = ")
            meta[key[len("meta.") :]] = val
        else:
            key, _, val = line.partition(" = ")
            fields[key] = val
        i += 1
    pair_bias = fields.get("pair_bias", "on") == "on"
    expected = parameter_shapes(pair_bias)
    if set(values) != set(expected):
        raise CheckpointError("parameter set does not match architecture dims")
    for name, shape in expected.items():
        if values[name].shape != shape:
            raise CheckpointError(f"shape inconsistency for {name}")
    return ModelParams(values, pair_bias), meta
