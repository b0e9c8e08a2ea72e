"""Minimal dense tensor kernel with reverse-mode differentiation.

Everything is float64. A Tensor records its parents and a local gradient rule
on a tape that is acyclic by construction; backward() walks the tape in
reverse creation order. The op set is small and every op has a
finite-difference test; the one fat op (pair_message_sum) exists because the
message-passing layer would otherwise materialise n^2*(n-1) concatenated pair
vectors, which CPU memory bandwidth cannot afford.

Also home to the exact dense inversion (Gauss-Jordan, partial pivoting) used
by the algebraic completion method.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

_KERNEL_POOL: ThreadPoolExecutor | None = None
_KERNEL_WORKERS = 0


def _kernel_workers() -> int:
    global _KERNEL_WORKERS
    if _KERNEL_WORKERS == 0:
        env = os.environ.get("HADREC_KERNEL_THREADS")
        _KERNEL_WORKERS = int(env) if env else min(2, os.cpu_count() or 1)
    return max(1, _KERNEL_WORKERS)


def _sample_chunks(batch: int) -> list[range]:
    """Split sample indices into one contiguous chunk per kernel worker."""
    workers = min(_kernel_workers(), batch)
    bounds = np.linspace(0, batch, workers + 1, dtype=int)
    return [range(bounds[i], bounds[i + 1]) for i in range(workers) if bounds[i] < bounds[i + 1]]


def _run_chunks(fn, batch: int) -> list:
    """Run fn(chunk) per chunk, threaded when useful; results in chunk order.

    numpy's elementwise kernels release the GIL, so threads help despite
    running pure Python glue. Outputs must go to disjoint slices; per-chunk
    return values are reduced by the caller in chunk order, which keeps every
    result bit-identical to the serial path.
    """
    global _KERNEL_POOL
    chunks = _sample_chunks(batch)
    if len(chunks) == 1:
        return [fn(chunks[0])]
    if _KERNEL_POOL is None:
        _KERNEL_POOL = ThreadPoolExecutor(max_workers=_kernel_workers())
    return list(_KERNEL_POOL.map(fn, chunks))


class ShapeError(ValueError):
    """Operands have incompatible shapes."""


class NonFiniteError(FloatingPointError):
    """An op produced NaN or Inf."""


class SingularMatrixError(ValueError):
    """Pivot below threshold during elimination."""


def _finite_or_raise(arr: np.ndarray, op: str) -> np.ndarray:
    if not np.isfinite(arr).all():
        raise NonFiniteError(f"non-finite result in {op}")
    return arr


class Tensor:
    """A float64 array plus tape bookkeeping. Data is treated as immutable."""

    __slots__ = ("data", "parents", "grad_rule", "name")

    def __init__(self, data, parents=(), grad_rule=None, name=None):
        self.data = np.asarray(data, dtype=np.float64)
        _finite_or_raise(self.data, "tensor construction")
        self.parents = tuple(parents)
        self.grad_rule = grad_rule
        self.name = name

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def __repr__(self):
        tag = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.data.shape}{tag})"


def constant(data) -> Tensor:
    return Tensor(data)


def parameter(name: str, data) -> Tensor:
    return Tensor(data, name=name)


# ---------------------------------------------------------------------------
# ops


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ShapeError(f"matmul shapes {a.data.shape} x {b.data.shape}")
    out = _finite_or_raise(a.data @ b.data, "matmul")

    def rule(g):
        return [(a, g @ b.data.T), (b, a.data.T @ g)]

    return Tensor(out, (a, b), rule)


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ShapeError(f"add shapes {a.data.shape} vs {b.data.shape}")
    out = _finite_or_raise(a.data + b.data, "add")

    def rule(g):
        return [(a, g), (b, g)]

    return Tensor(out, (a, b), rule)


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)
    out = _finite_or_raise(a.data * c, "scale")

    def rule(g):
        return [(a, g * c)]

    return Tensor(out, (a,), rule)


def concat_features(a: Tensor, b: Tensor) -> Tensor:
    """Concatenate along the last axis; all leading axes must agree."""
    if a.data.shape[:-1] != b.data.shape[:-1]:
        raise ShapeError(f"concat shapes {a.data.shape} vs {b.data.shape}")
    out = np.concatenate([a.data, b.data], axis=-1)
    split = a.data.shape[-1]

    def rule(g):
        return [(a, g[..., :split]), (b, g[..., split:])]

    return Tensor(out, (a, b), rule)


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)

    def rule(g):
        return [(a, g * (1.0 - out * out))]

    return Tensor(out, (a,), rule)


def log(a: Tensor) -> Tensor:
    if (a.data <= 0).any():
        raise NonFiniteError("log of non-positive value")
    out = np.log(a.data)

    def rule(g):
        return [(a, g / a.data)]

    return Tensor(out, (a,), rule)


def clamp(a: Tensor, lo: float, hi: float) -> Tensor:
    """Clip to [lo, hi]; gradient passes through only where not clipped."""
    out = np.clip(a.data, lo, hi)
    inside = ((a.data > lo) & (a.data < hi)).astype(np.float64)

    def rule(g):
        return [(a, g * inside)]

    return Tensor(out, (a,), rule)


def reshape(a: Tensor, shape) -> Tensor:
    out = a.data.reshape(shape)

    def rule(g):
        return [(a, g.reshape(a.data.shape))]

    return Tensor(out, (a,), rule)


def sum_over(a: Tensor, axis: int = 0) -> Tensor:
    """Reduce one axis with exactly rounded summation (math.fsum).

    Exact rounding makes the result independent of the order of the summands,
    so any permutation of the reduced axis gives bit-identical output. Meant
    for reference paths and tests; the fused fast path uses fixed-order
    vectorised sums instead.
    """
    moved = np.moveaxis(a.data, axis, 0)
    flat = moved.reshape(moved.shape[0], -1)
    out = np.array([math.fsum(flat[:, c]) for c in range(flat.shape[1])])
    out = out.reshape(moved.shape[1:])

    def rule(g):
        expanded = np.broadcast_to(np.expand_dims(g, 0), moved.shape)
        return [(a, np.moveaxis(expanded, 0, axis).copy())]

    return Tensor(_finite_or_raise(out, "sum_over"), (a,), rule)


def slice_rows(a: Tensor, start: int, stop: int) -> Tensor:
    """Contiguous row slice of a 2-D tensor; gradient scatters back."""
    if a.data.ndim != 2 or not 0 <= start < stop <= a.data.shape[0]:
        raise ShapeError(f"slice_rows [{start}:{stop}] of {a.data.shape}")
    out = a.data[start:stop]

    def rule(g):
        full = np.zeros_like(a.data)
        full[start:stop] = g
        return [(a, full)]

    return Tensor(out, (a,), rule)


def affine(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """x @ w + b with b broadcast over rows: (m, din) x (din, dout) + (dout,)."""
    if x.data.ndim != 2 or w.data.ndim != 2 or b.data.ndim != 1:
        raise ShapeError("affine expects (m,din), (din,dout), (dout,)")
    if x.data.shape[1] != w.data.shape[0] or w.data.shape[1] != b.data.shape[0]:
        raise ShapeError(f"affine shapes {x.data.shape} x {w.data.shape} + {b.data.shape}")
    out = _finite_or_raise(x.data @ w.data + b.data, "affine")

    def rule(g):
        return [(x, g @ w.data.T), (w, x.data.T @ g), (b, g.sum(axis=0))]

    return Tensor(out, (x, w, b), rule)


def pair_message_sum(c: Tensor, n: Tensor, bias: Tensor) -> Tensor:
    """Fused non-self pair aggregation over rows and columns of a feature grid.

    Inputs c and n are (B, n, n, d) pre-mixed center and neighbour halves of
    the pair encoder (c = F W_center, n = F W_neighbour); bias is (d,).
    Output per entry (i, j):

        sum_{w != j} tanh(c[i,j] + n[i,w] + bias)      (row messages)
      + sum_{w != i} tanh(c[i,j] + n[w,j] + bias)      (column messages)

    computed as full sums along the grid axes minus the (i, j) self term,
    in fixed axis order, which keeps every forward bit-reproducible.
    Backward recomputes the tanh grids instead of storing them; the saved
    memory is worth the extra flops on CPU.
    """
    if c.data.ndim != 4 or c.data.shape != n.data.shape:
        raise ShapeError(f"pair_message_sum shapes {c.data.shape} vs {n.data.shape}")
    if c.data.shape[1] != c.data.shape[2]:
        raise ShapeError("feature grid must be square")
    if bias.data.shape != (c.data.shape[3],):
        raise ShapeError(f"bias shape {bias.data.shape} vs feature dim {c.data.shape[3]}")
    cd, nd, bd = c.data, n.data, bias.data
    batch = cd.shape[0]
    out = np.empty_like(cd)

    def fwd_chunk(samples):
        for s in samples:
            cb = cd[s] + bd
            t_row = np.tanh(cb[:, :, None, :] + nd[s][:, None, :, :])
            acc = t_row.sum(axis=2)
            del t_row
            t_col = np.tanh(cb[:, :, None, :] + nd[s].transpose(1, 0, 2)[None, :, :, :])
            acc += t_col.sum(axis=2)
            del t_col
            acc -= 2.0 * np.tanh(cb + nd[s])
            out[s] = acc

    _run_chunks(fwd_chunk, batch)
    _finite_or_raise(out, "pair_message_sum")

    def rule(g):
        dc = np.empty_like(cd)
        dn = np.empty_like(nd)

        def bwd_chunk(samples):
            db_part = np.zeros_like(bd)
            for s in samples:
                cb = cd[s] + bd
                gs = g[s]
                t = np.tanh(cb[:, :, None, :] + nd[s][:, None, :, :])
                np.multiply(t, t, out=t)
                np.subtract(1.0, t, out=t)  # t is now 1 - tanh^2 (row grid)
                dcs = gs * t.sum(axis=2)
                dns = np.einsum("ijd,ijwd->iwd", gs, t)
                del t
                t = np.tanh(cb[:, :, None, :] + nd[s].transpose(1, 0, 2)[None, :, :, :])
                np.multiply(t, t, out=t)
                np.subtract(1.0, t, out=t)  # column grid
                dcs += gs * t.sum(axis=2)
                dns += np.einsum("ijd,ijwd->wjd", gs, t)
                del t
                z = np.tanh(cb + nd[s])
                np.multiply(z, z, out=z)
                np.subtract(1.0, z, out=z)
                z *= gs
                dcs -= 2.0 * z
                dns -= 2.0 * z
                dc[s] = dcs
                dn[s] = dns
                db_part += dcs.sum(axis=(0, 1))
            return db_part

        parts = _run_chunks(bwd_chunk, batch)
        db = parts[0]
        for part in parts[1:]:
            db = db + part
        return [(c, dc), (n, dn), (bias, db)]

    return Tensor(out, (c, n, bias), rule)


# ---------------------------------------------------------------------------
# reverse pass


def _topo_order(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if id(p) not in seen:
                stack.append((p, False))
    return order


def backward(loss: Tensor, params=()) -> dict[str, np.ndarray]:
    """Gradients of a scalar-shaped loss for every named parameter in `params`.

    Parameters not reachable from the loss get zero gradients.
    """
    if loss.data.size != 1:
        raise ShapeError(f"loss must be scalar-shaped, got {loss.data.shape}")
    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(_topo_order(loss)):
        if node.grad_rule is None:
            continue  # leaf: gradient stays for parameter collection below
        g = grads.pop(id(node), None)
        if g is None:
            continue
        for parent, pg in node.grad_rule(g):
            acc = grads.get(id(parent))
            # rules may alias the upstream array across parents, so never add in place
            grads[id(parent)] = pg if acc is None else acc + pg
    out: dict[str, np.ndarray] = {}
    seen_names: set[str] = set()
    for p in params:
        if p.name is None:
            raise ValueError("parameters must be named tensors")
        if p.name in seen_names:
            raise ValueError(f"duplicate parameter name {p.name!r}")
        seen_names.add(p.name)
        out[p.name] = grads.get(id(p), np.zeros_like(p.data))
    return out


# ---------------------------------------------------------------------------
# exact inversion

PIVOT_TOL = 1e-12


def invert(a) -> np.ndarray:
    """Inverse by Gauss-Jordan elimination with partial pivoting.

    Raises SingularMatrixError when the best available pivot is below
    PIVOT_TOL; for sign matrices genuine pivots are O(1), so the threshold
    only triggers on true rank loss.
    """
    a = np.array(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"invert expects a square matrix, got {a.shape}")
    n = a.shape[0]
    aug = np.hstack([a, np.eye(n)])
    for col in range(n):
        pivot_row = col + int(np.argmax(np.abs(aug[col:, col])))
        pivot = aug[pivot_row, col]
        if abs(pivot) < PIVOT_TOL:
            raise SingularMatrixError(f"singular to working precision at column {col}")
        if pivot_row != col:
            aug[[col, pivot_row]] = aug[[pivot_row, col]]
        aug[col] /= aug[col, col]
        factors = aug[:, col].copy()
        factors[col] = 0.0
        aug -= np.outer(factors, aug[col])
    return aug[:, n:]


# ---------------------------------------------------------------------------
# finite-difference oracle


@dataclass
class FiniteDiffEntry:
    param: str
    coord: tuple
    analytic: float
    numeric: float
    rel_err: float


@dataclass
class FiniteDiffReport:
    entries: list[FiniteDiffEntry] = field(default_factory=list)
    rel_tol: float = 1e-4

    @property
    def max_rel_err(self) -> float:
        return max((e.rel_err for e in self.entries), default=0.0)

    @property
    def ok(self) -> bool:
        return self.max_rel_err < self.rel_tol

    def worst(self) -> FiniteDiffEntry | None:
        return max(self.entries, key=lambda e: e.rel_err, default=None)


def finite_diff_check(
    f,
    params: dict[str, np.ndarray],
    h: float = 1e-5,
    rel_tol: float = 1e-4,
    abs_floor: float = 1e-6,
    max_coords_per_param: int | None = None,
    rng: np.random.Generator | None = None,
) -> FiniteDiffReport:
    """Compare backward() gradients of f against central finite differences.

    f maps a dict of named Tensors to a scalar Tensor and is re-evaluated at
    perturbed parameter values; it must rebuild its tape on every call. With
    max_coords_per_param set, that many coordinates per parameter are sampled
    (rng required for reproducibility of the sample).
    """
    tensors = {k: Tensor(v, name=k) for k, v in params.items()}
    analytic = backward(f(tensors), tensors.values())

    def eval_at(values: dict[str, np.ndarray]) -> float:
        return f({k: Tensor(v, name=k) for k, v in values.items()}).item()

    report = FiniteDiffReport(rel_tol=rel_tol)
    base = {k: np.array(v, dtype=np.float64) for k, v in params.items()}
    for name, arr in base.items():
        coords = list(np.ndindex(arr.shape))
        if max_coords_per_param is not None and len(coords) > max_coords_per_param:
            if rng is None:
                raise ValueError("rng required when sampling coordinates")
            picked = rng.choice(len(coords), size=max_coords_per_param, replace=False)
            coords = [coords[i] for i in sorted(picked.tolist())]
        for coord in coords:
            saved = arr[coord]
            arr[coord] = saved + h
            up = eval_at(base)
            arr[coord] = saved - h
            down = eval_at(base)
            arr[coord] = saved
            numeric = (up - down) / (2.0 * h)
            a = float(analytic[name][coord])
            rel = abs(a - numeric) / max(abs(a), abs(numeric), abs_floor)
            report.entries.append(FiniteDiffEntry(name, coord, a, numeric, rel))
    return report
