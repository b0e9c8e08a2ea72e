"""Decoding strategies, the benchmark harness, and confidence intervals.

Success is exact recovery: the filled matrix must be Hadamard AND match the
pre-deletion original everywhere. A looser any-Hadamard count is carried as a
diagnostic alongside every row. Evaluation instances are derived from
per-(k, trial) random streams, so two methods evaluated with the same seed see
identical instances, and results do not depend on worker count or scheduling.
"""

from __future__ import annotations

import enum
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .datagen import (
    DatasetConfig,
    MaskedInstance,
    Pool,
    instance_stream,
    make_instance,
    split_pool,
)
from .kline import KlineConfig, KlineStatus, kline_reconstruct
from .matrices import SignMatrix, is_hadamard
from .model import ModelParams, TrainConfig, forward, train

METHODS = ("kline", "empm-one-shot", "empm-sequential")

# forward memory is ~B*n^3*64 floats per layer; cap the batch accordingly
_FORWARD_CHUNK_BUDGET = 24_000_000


class Status(enum.Enum):
    SUCCESS = "success"
    FAILURE = "failure"


@dataclass
class ReconstructionOutcome:
    status: Status
    matrix: SignMatrix
    fills: list[tuple[tuple[int, int], int]] = field(default_factory=list)


@dataclass(frozen=True)
class EvalRow:
    order: int
    k: int
    method: str
    trials: int
    successes: int
    any_hadamard: int = 0  # diagnostic: completions that are Hadamard but maybe not the original

    @property
    def rate(self) -> float:
        return self.successes / self.trials


@dataclass(frozen=True)
class HcpRow:
    order: int
    k: int
    trials: int
    hcp_correct: int

    @property
    def accuracy(self) -> float:
        return self.hcp_correct / self.trials


def _decode_signs(pred: np.ndarray) -> np.ndarray:
    return np.where(pred >= 0.0, 1, -1).astype(np.int64)  # sign(0) decodes to +1


def _outcome(filled: np.ndarray, original: SignMatrix, fills) -> ReconstructionOutcome:
    matrix = SignMatrix(filled)
    ok = is_hadamard(matrix) and matrix == original
    return ReconstructionOutcome(Status.SUCCESS if ok else Status.FAILURE, matrix, fills)


def one_shot(params: ModelParams, masked: SignMatrix, original: SignMatrix) -> ReconstructionOutcome:
    """Fill every zero with the sign of one forward pass's prediction."""
    if masked.zero_count() < 1:
        raise ValueError("one_shot requires at least one zero entry")
    pred = forward(params, masked)
    signs = _decode_signs(pred)
    filled = masked.entries.astype(np.int64)
    zero = masked.entries == 0
    filled = np.where(zero, signs, filled)
    fills = [((int(i), int(j)), int(signs[i, j])) for i, j in np.argwhere(zero)]
    return _outcome(filled, original, fills)


def hcp(params: ModelParams, masked: SignMatrix) -> tuple[tuple[int, int], int, float]:
    """Highest-confidence prediction among masked positions.

    Returns (position, sign, |prediction|); ties break on lowest (row, col),
    which is the first occurrence in row-major order.
    """
    if masked.zero_count() < 1:
        raise ValueError("hcp requires at least one zero entry")
    pred = forward(params, masked)
    return _hcp_from_pred(pred, masked.entries == 0)


def _hcp_from_pred(pred: np.ndarray, zero_mask: np.ndarray):
    conf = np.where(zero_mask, np.abs(pred), -1.0)
    flat = int(np.argmax(conf))  # first max in row-major order
    i, j = divmod(flat, pred.shape[1])
    sign = 1 if pred[i, j] >= 0 else -1
    return (i, j), sign, float(abs(pred[i, j]))


def sequential(params: ModelParams, masked: SignMatrix, original: SignMatrix) -> ReconstructionOutcome:
    """Repeatedly fill the highest-confidence zero, re-running the model each time."""
    current = masked.entries.astype(np.int64).copy()
    fills: list[tuple[tuple[int, int], int]] = []
    while (current == 0).any():
        pred = forward(params, current.astype(np.float64))
        pos, sign, _ = _hcp_from_pred(pred, current == 0)
        current[pos] = sign
        fills.append((pos, sign))
    return _outcome(current, original, fills)


# ---------------------------------------------------------------------------
# batched evaluation


def evaluation_instances(pool: Pool, k: int, trials: int, seed) -> list[MaskedInstance]:
    """Deterministic per-(k, trial) instances; negation augmentation only."""
    cfg = DatasetConfig(order=pool.order, k=k, augment_negations=True,
                        augment_permutations=False)
    return [
        make_instance(pool, cfg, instance_stream([_entropy(seed), k], i))
        for i in range(trials)
    ]


def _entropy(seed) -> int:
    if isinstance(seed, (int, np.integer)):
        return int(seed)
    return int(np.random.SeedSequence(tuple(seed)).generate_state(1)[0])


def _forward_chunked(params: ModelParams, xs: np.ndarray) -> np.ndarray:
    n = xs.shape[1]
    chunk = max(1, _FORWARD_CHUNK_BUDGET // (n * n * n * 64))
    if xs.shape[0] <= chunk:
        return forward(params, xs)
    return np.concatenate(
        [forward(params, xs[i : i + chunk]) for i in range(0, xs.shape[0], chunk)]
    )


def _count_pair(filled_batch, instances) -> tuple[int, int]:
    exact = 0
    any_h = 0
    for filled, inst in zip(filled_batch, instances):
        m = SignMatrix(filled)
        if is_hadamard(m):
            any_h += 1
            if m == inst.original:
                exact += 1
    return exact, any_h


def _eval_one_shot(params, instances) -> tuple[int, int]:
    xs = np.stack([m.input.entries for m in instances]).astype(np.float64)
    preds = _forward_chunked(params, xs)
    signs = np.where(preds >= 0.0, 1, -1).astype(np.int64)
    inputs = xs.astype(np.int64)
    filled = np.where(inputs == 0, signs, inputs)
    return _count_pair(filled, instances)


def _eval_sequential(params, instances) -> tuple[int, int]:
    states = [m.input.entries.astype(np.int64).copy() for m in instances]
    alive = [i for i, s in enumerate(states) if (s == 0).any()]
    while alive:
        xs = np.stack([states[i] for i in alive]).astype(np.float64)
        preds = _forward_chunked(params, xs)
        still = []
        for row, i in enumerate(alive):
            pos, sign, _ = _hcp_from_pred(preds[row], states[i] == 0)
            states[i][pos] = sign
            if (states[i] == 0).any():
                still.append(i)
        alive = still
    return _count_pair(states, instances)


def _kline_trial_counts(payload) -> tuple[int, int]:
    (entries_list, names, order, k, seed, lo, hi, threshold, max_iters, transpose) = payload
    pool = Pool(tuple((nm, SignMatrix(e)) for nm, e in zip(names, entries_list)))
    cfg = KlineConfig(threshold=threshold, max_iters=max_iters, transpose_correction=transpose)
    data_cfg = DatasetConfig(order=order, k=k, augment_negations=True)
    exact = 0
    any_h = 0
    for i in range(lo, hi):
        inst = make_instance(pool, data_cfg, instance_stream([seed, k], i))
        out = kline_reconstruct(inst.input, cfg)
        if out.status == KlineStatus.SUCCESS:
            any_h += 1
            if out.matrix == inst.original:
                exact += 1
    return exact, any_h


def _eval_kline(pool, k, trials, seed, kline_cfg: KlineConfig, workers: int) -> tuple[int, int]:
    entries_list = [m.entries.astype(np.int64) for _, m in pool.matrices]
    names = pool.names
    mi = kline_cfg.max_iters
    payloads = []
    workers = max(1, min(workers, trials))
    bounds = np.linspace(0, trials, workers + 1, dtype=int)
    for w in range(workers):
        lo, hi = int(bounds[w]), int(bounds[w + 1])
        if lo < hi:
            payloads.append(
                (entries_list, names, pool.order, k, _entropy(seed), lo, hi,
                 kline_cfg.threshold, mi, kline_cfg.transpose_correction)
            )
    if len(payloads) == 1:
        results = [_kline_trial_counts(payloads[0])]
    else:
        with ProcessPoolExecutor(max_workers=len(payloads)) as pool_exec:
            results = list(pool_exec.map(_kline_trial_counts, payloads))
    exact = sum(r[0] for r in results)
    any_h = sum(r[1] for r in results)
    return exact, any_h


def evaluate(
    method: str,
    pool: Pool,
    k_values,
    trials_per_k: int,
    seed,
    params: ModelParams | None = None,
    kline_cfg: KlineConfig | None = None,
    workers: int = 1,
) -> list[EvalRow]:
    """Success counts per k, ascending; identical (pool, seed) => identical instances."""
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    if trials_per_k < 1:
        raise ValueError("trials_per_k must be >= 1")
    if method.startswith("empm") and params is None:
        raise ValueError(f"method {method} requires model parameters")
    rows = []
    for k in sorted(set(int(k) for k in k_values)):
        if method == "kline":
            exact, any_h = _eval_kline(
                pool, k, trials_per_k, seed, kline_cfg or KlineConfig(), workers
            )
        else:
            instances = evaluation_instances(pool, k, trials_per_k, seed)
            if method == "empm-one-shot":
                exact, any_h = _eval_one_shot(params, instances)
            else:
                exact, any_h = _eval_sequential(params, instances)
        rows.append(EvalRow(pool.order, k, method, trials_per_k, exact, any_h))
    return rows


def hcp_curve(params: ModelParams, pool: Pool, k_values, trials_per_k: int, seed) -> list[HcpRow]:
    """Accuracy of the single highest-confidence prediction per instance."""
    rows = []
    for k in sorted(set(int(k) for k in k_values)):
        instances = evaluation_instances(pool, k, trials_per_k, seed)
        xs = np.stack([m.input.entries for m in instances]).astype(np.float64)
        preds = _forward_chunked(params, xs)
        correct = 0
        for inst, pred in zip(instances, preds):
            pos, sign, _ = _hcp_from_pred(pred, inst.input.entries == 0)
            correct += int(sign == int(inst.target.entries[pos]))
        rows.append(HcpRow(pool.order, k, trials_per_k, correct))
    return rows


# ---------------------------------------------------------------------------
# aggregate statistics


def confidence_interval(rates) -> tuple[float, float]:
    """Mean and 1.96 * sample std / sqrt(m) over m >= 2 repeated runs."""
    rates = [float(r) for r in rates]
    if len(rates) < 2:
        raise ValueError("confidence interval requires at least 2 runs")
    mean = float(np.mean(rates))
    sigma = float(np.std(rates, ddof=1))
    return mean, 1.96 * sigma / np.sqrt(len(rates))


@dataclass
class CrossClassRun:
    run: int
    train_names: list[str]
    rows: list[EvalRow]


@dataclass
class CrossClassResult:
    runs: list[CrossClassRun]
    bands: list[tuple[int, float, float]]  # (k, mean rate, ci half-width)


def _derived_seed(*path) -> int:
    return int(np.random.SeedSequence(tuple(int(p) for p in path)).generate_state(1)[0])


def cross_class_experiment(
    pool: Pool,
    train_cfg: TrainConfig,
    k_values,
    trials_per_k: int,
    train_count: int = 24,
    runs: int = 5,
    seed: int = 0,
    progress=None,
    checkpoint_hook=None,
) -> CrossClassResult:
    """Repeated random-split protocol: train on train_count names, evaluate the rest.

    Per run: fresh disjoint split, fresh training, one-shot evaluation on the
    validation names only; bands aggregate the per-run rates at each k.
    """
    if len(pool) < 2 * train_count:
        raise ValueError(
            f"pool of {len(pool)} names cannot support train_count={train_count} "
            "(needs at least twice as many)"
        )
    out_runs = []
    for r in range(runs):
        split = split_pool(pool, train_count, _derived_seed(seed, r, 1))
        cfg_r = replace(train_cfg, seed=_derived_seed(seed, r, 2))
        params, history = train(cfg_r, split.train, split.validation, progress=progress)
        if checkpoint_hook is not None:
            checkpoint_hook(r, params, history, split)
        rows = evaluate(
            "empm-one-shot", split.validation, k_values, trials_per_k,
            _derived_seed(seed, r, 3), params=params,
        )
        out_runs.append(CrossClassRun(r, split.train.names, rows))
    bands = []
    for idx, k in enumerate(sorted(set(int(k) for k in k_values))):
        mean, half = confidence_interval([run.rows[idx].rate for run in out_runs])
        bands.append((k, mean, half))
    return CrossClassResult(out_runs, bands)


def default_workers() -> int:
    return os.cpu_count() or 1
