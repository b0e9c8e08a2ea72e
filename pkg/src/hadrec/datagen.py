"""Dataset pipeline: pools of Hadamard matrices and masked training instances.

An instance is built by selecting a pool matrix, optionally permuting and
negating it (augmentation), then zeroing k distinct positions whose erased
values move to the target matrix. Filling the input with the target always
restores a Hadamard matrix; this is asserted on every instance generated.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .matrices import (
    MatrixFormatError,
    SignMatrix,
    corpus_files,
    is_hadamard,
    read_matrices,
    render_matrix,
)
from .symmetry import negate, random_perm_pair, random_signs, act


class PoolError(ValueError):
    """A pool violates its invariants (non-Hadamard member, mixed orders, ...)."""


@dataclass(frozen=True)
class Pool:
    """Named Hadamard matrices of a single order, in stable name order."""

    matrices: tuple[tuple[str, SignMatrix], ...]

    def __post_init__(self):
        if not self.matrices:
            raise PoolError("pool is empty")
        orders = {m.order for _, m in self.matrices}
        if len(orders) != 1:
            raise PoolError(f"mixed orders in pool: {sorted(orders)}")
        names = [name for name, _ in self.matrices]
        if len(set(names)) != len(names):
            raise PoolError("duplicate matrix names in pool")
        for name, m in self.matrices:
            if not is_hadamard(m):
                zeros = m.mask()
                detail = f" (zero entry at {zeros[0]})" if zeros else ""
                raise PoolError(f"matrix {name!r} is not Hadamard{detail}")

    @property
    def order(self) -> int:
        return self.matrices[0][1].order

    @property
    def names(self) -> list[str]:
        return [name for name, _ in self.matrices]

    def __len__(self):
        return len(self.matrices)


@dataclass(frozen=True)
class PoolSplit:
    train: Pool
    validation: Pool


@dataclass(frozen=True)
class MaskedInstance:
    """(input with k zeros, target holding the erased values) plus provenance."""

    input: SignMatrix
    target: SignMatrix
    source: str
    k: int

    def __post_init__(self):
        inp, tgt = self.input.entries, self.target.entries
        if inp.shape != tgt.shape:
            raise ValueError("input/target order mismatch")
        if not np.array_equal(tgt != 0, inp == 0):
            raise ValueError("target must hold values exactly at the input's zeros")
        if not is_hadamard(self.input.filled_with(self.target)):
            raise ValueError("input filled with target is not Hadamard")

    @property
    def original(self) -> SignMatrix:
        return self.input.filled_with(self.target)


@dataclass(frozen=True)
class DatasetConfig:
    """How instances are drawn: fixed k or uniform k-range, plus augmentation."""

    order: int
    k: int | None = None
    k_range: tuple[int, int] | None = None
    augment_permutations: bool = False
    augment_negations: bool = True
    seed: int = 0

    def __post_init__(self):
        if (self.k is None) == (self.k_range is None):
            raise ValueError("exactly one of k or k_range must be given")
        cap = self.order * self.order
        if self.k is not None and not 0 <= self.k <= cap:
            raise ValueError(f"k={self.k} outside [0, {cap}]")
        if self.k_range is not None:
            lo, hi = self.k_range
            if not (0 <= lo <= hi <= cap):
                raise ValueError(f"k_range {self.k_range} outside [0, {cap}]")

    def sample_k(self, rng: np.random.Generator) -> int:
        if self.k is not None:
            return self.k
        lo, hi = self.k_range
        return int(rng.integers(lo, hi + 1))


def training_config(order: int, seed: int = 0, k_max: int | None = None) -> DatasetConfig:
    """Default training draw: k uniform in [1, n^2/4], negation augmentation on."""
    if k_max is None:
        k_max = max(1, (order * order) // 4)
    return DatasetConfig(order=order, k_range=(1, k_max), seed=seed)


def load_pool(source) -> Pool:
    """Build a pool from matrix files (an iterable of paths, or a corpus directory).

    Multi-matrix files contribute one pool member per matrix, named
    ``<stem>#<index>``. Members are sorted by name.
    """
    if isinstance(source, (str, os.PathLike)):
        paths = corpus_files(source)
        if not paths:
            raise PoolError(f"no matrix files found under {source}")
    else:
        paths = list(source)
    members: list[tuple[str, SignMatrix]] = []
    for path in paths:
        stem = os.path.splitext(os.path.basename(path))[0]
        try:
            matrices = read_matrices(path)
        except MatrixFormatError as exc:
            raise PoolError(f"cannot parse {path}: {exc}") from exc
        if len(matrices) == 1:
            members.append((stem, matrices[0]))
        else:
            members.extend((f"{stem}#{i}", m) for i, m in enumerate(matrices))
    members.sort(key=lambda item: item[0])
    return Pool(tuple(members))


def split_pool(pool: Pool, train_count: int, seed: int) -> PoolSplit:
    """Uniformly random disjoint split, deterministic per seed."""
    if not 1 <= train_count < len(pool):
        raise ValueError(f"train_count {train_count} outside [1, {len(pool) - 1}]")
    rng = np.random.default_rng(seed)
    picked = rng.permutation(len(pool))[:train_count]
    chosen = set(picked.tolist())
    train = tuple(m for i, m in enumerate(pool.matrices) if i in chosen)
    val = tuple(m for i, m in enumerate(pool.matrices) if i not in chosen)
    return PoolSplit(Pool(train), Pool(val))


def make_instance(pool: Pool, cfg: DatasetConfig, rng: np.random.Generator) -> MaskedInstance:
    """select -> (permute) -> (negate) -> delete k distinct positions."""
    if cfg.order != pool.order:
        raise ValueError(f"config order {cfg.order} != pool order {pool.order}")
    n = pool.order
    name, matrix = pool.matrices[int(rng.integers(len(pool)))]
    if cfg.augment_permutations:
        matrix = act(random_perm_pair(rng, n), matrix)
    if cfg.augment_negations:
        matrix = negate(random_signs(rng, n), matrix)
    k = cfg.sample_k(rng)
    if k > n * n:
        raise ValueError(f"k={k} exceeds {n * n} entries")
    flat = rng.choice(n * n, size=k, replace=False)
    rows, cols = np.unravel_index(flat, (n, n))
    inp = matrix.entries.astype(np.int64)
    tgt = np.zeros((n, n), dtype=np.int64)
    tgt[rows, cols] = inp[rows, cols]
    inp = inp.copy()
    inp[rows, cols] = 0
    return MaskedInstance(SignMatrix(inp), SignMatrix(tgt), name, k)


def instance_stream(seed, index: int) -> np.random.Generator:
    """Independent per-instance generator derived from (seed, index).

    seed may be an int or a sequence of ints (a whole derivation path).
    """
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(index,)))


def make_batch(pool: Pool, cfg: DatasetConfig, seed, count: int) -> list[MaskedInstance]:
    """count independent instances from per-index streams; order is index order."""
    if count < 1:
        raise ValueError("count must be >= 1")
    return [make_instance(pool, cfg, instance_stream(seed, i)) for i in range(count)]


# ---------------------------------------------------------------------------
# optional on-disk archive


def write_archive(directory, instances, cfg: DatasetConfig, seed: int) -> list[str]:
    """Write instances as <index>.input.txt / <index>.target.txt plus a manifest."""
    os.makedirs(directory, exist_ok=True)
    written = []
    width = max(5, len(str(len(instances) - 1)))
    lines = [
        f"order = {cfg.order}",
        f"count = {len(instances)}",
        f"seed = {seed}",
    ]
    for i, inst in enumerate(instances):
        tag = str(i).zfill(width)
        for suffix, m in (("input", inst.input), ("target", inst.target)):
            path = os.path.join(directory, f"{tag}.{suffix}.txt")
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(render_matrix(m))
            written.append(path)
        lines.append(f"{tag} k={inst.k} source={inst.source}")
    manifest = os.path.join(directory, "manifest")
    with open(manifest, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    written.append(manifest)
    return written


def read_archive(directory) -> list[MaskedInstance]:
    with open(os.path.join(directory, "manifest"), "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    instances = []
    for ln in lines:
        if "=" in ln.split()[0] or ln.split()[0] in ("order", "count", "seed"):
            continue
        tag, *fields = ln.split()
        meta = dict(f.split("=", 1) for f in fields)
        inp = read_matrices(os.path.join(directory, f"{tag}.input.txt"))[0]
        tgt = read_matrices(os.path.join(directory, f"{tag}.target.txt"))[0]
        instances.append(MaskedInstance(inp, tgt, meta["source"], int(meta["k"])))
    return instances
