"""Sign matrices over {-1, 0, +1}, Hadamard checks, classical constructions, text I/O.

A zero entry marks a deletion; a matrix with no zeros and mutually orthogonal
rows (M @ M.T == n*I) is Hadamard.
"""

from __future__ import annotations

import os

import numpy as np

# Largest order the constructions will emit; keeps desk-scale runs desk-scale.
DEFAULT_ORDER_CAP = 64

_CHAR_TO_VALUE = {"+": 1, "-": -1, "0": 0}
_VALUE_TO_CHAR = {1: "+", -1: "-", 0: "0"}


class MatrixFormatError(ValueError):
    """Malformed matrix text or entries outside {-1, 0, +1}."""


class ConstructionError(ValueError):
    """Invalid argument to a matrix construction (bad q, order cap exceeded)."""


class SignMatrix:
    """Immutable square matrix with entries in {-1, 0, +1}.

    Zero is the in-band deletion marker; the mask is always derived from the
    entries, never stored separately.
    """

    __slots__ = ("_entries",)

    def __init__(self, entries):
        arr = np.asarray(entries)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] == 0:
            raise MatrixFormatError(f"expected a non-empty square matrix, got shape {arr.shape}")
        if not np.isin(arr, (-1, 0, 1)).all():
            bad = arr[~np.isin(arr, (-1, 0, 1))].ravel()[0]
            raise MatrixFormatError(f"entries must be -1, 0 or +1, found {bad!r}")
        arr = arr.astype(np.int8)
        arr.setflags(write=False)
        self._entries = arr

    @property
    def order(self) -> int:
        return self._entries.shape[0]

    @property
    def entries(self) -> np.ndarray:
        """Read-only (n, n) int8 array."""
        return self._entries

    def mask(self) -> list[tuple[int, int]]:
        """Positions of zero entries, row-major order."""
        rows, cols = np.nonzero(self._entries == 0)
        return list(zip(rows.tolist(), cols.tolist()))

    def zero_count(self) -> int:
        return int((self._entries == 0).sum())

    def filled_with(self, target: "SignMatrix") -> "SignMatrix":
        """Overlay: entries of `target` replace this matrix's zeros (elementwise sum)."""
        if target.order != self.order:
            raise MatrixFormatError("order mismatch in filled_with")
        return SignMatrix(self._entries.astype(np.int64) + target.entries.astype(np.int64))

    def __eq__(self, other):
        if not isinstance(other, SignMatrix):
            return NotImplemented
        return self.order == other.order and bool(np.array_equal(self._entries, other._entries))

    def __hash__(self):
        return hash((self.order, self._entries.tobytes()))

    def __repr__(self):
        return f"SignMatrix(order={self.order}, zeros={self.zero_count()})"


def is_hadamard(m: SignMatrix) -> bool:
    """True iff m has no zero entries and m @ m.T == n*I (integer arithmetic)."""
    e = m.entries.astype(np.int64)
    if (e == 0).any():
        return False
    n = m.order
    gram = e @ e.T
    return bool(np.array_equal(gram, n * np.eye(n, dtype=np.int64)))


def sylvester(k: int, order_cap: int = DEFAULT_ORDER_CAP) -> SignMatrix:
    """Order 2^k Hadamard matrix by recursive doubling of [[1,1],[1,-1]]."""
    if k < 0:
        raise ConstructionError("k must be non-negative")
    n = 2 ** k
    if n > order_cap:
        raise ConstructionError(f"order {n} exceeds cap {order_cap}")
    h = np.array([[1]], dtype=np.int64)
    for _ in range(k):
        h = np.block([[h, h], [h, -h]])
    return SignMatrix(h)


def _is_prime(q: int) -> bool:
    if q < 2:
        return False
    d = 2
    while d * d <= q:
        if q % d == 0:
            return False
        d += 1
    return True


def paley_i(q: int, order_cap: int = DEFAULT_ORDER_CAP) -> SignMatrix:
    """Order q+1 Hadamard matrix from quadratic residues of GF(q), q prime, q = 3 mod 4.

    Core is the circulant-like Jacobsthal matrix Q[a, b] = chi(b - a); the
    bordered matrix I + [[0, 1s], [-1s, Q]] is Hadamard exactly when q = 3 mod 4.
    """
    if not _is_prime(q):
        raise ConstructionError(f"q={q} is not prime")
    if q % 4 != 3:
        raise ConstructionError(f"q={q} is not congruent to 3 mod 4")
    n = q + 1
    if n > order_cap:
        raise ConstructionError(f"order {n} exceeds cap {order_cap}")
    residues = {(x * x) % q for x in range(1, q)}
    chi = np.zeros(q, dtype=np.int64)
    for d in range(1, q):
        chi[d] = 1 if d in residues else -1
    jac = np.empty((q, q), dtype=np.int64)
    for a in range(q):
        for b in range(q):
            jac[a, b] = chi[(b - a) % q]
    h = np.empty((n, n), dtype=np.int64)
    h[0, 0] = 1
    h[0, 1:] = 1
    h[1:, 0] = -1
    h[1:, 1:] = jac + np.eye(q, dtype=np.int64)
    return SignMatrix(h)


def parse_matrix(text: str) -> SignMatrix:
    """Parse one matrix from its text form: n lines of n characters from {+,-,0}."""
    lines = [ln for ln in text.strip("\n").split("\n")]
    if not lines or lines == [""]:
        raise MatrixFormatError("empty matrix text")
    n = len(lines[0])
    rows = []
    for i, ln in enumerate(lines):
        if len(ln) != n:
            raise MatrixFormatError(f"ragged line {i + 1}: expected {n} characters, got {len(ln)}")
        row = []
        for j, ch in enumerate(ln):
            if ch not in _CHAR_TO_VALUE:
                raise MatrixFormatError(f"illegal character {ch!r} at line {i + 1}, column {j + 1}")
            row.append(_CHAR_TO_VALUE[ch])
        rows.append(row)
    if len(rows) != n:
        raise MatrixFormatError(f"non-square input: {len(rows)} lines of {n} characters")
    return SignMatrix(rows)


def render_matrix(m: SignMatrix) -> str:
    """Inverse of parse_matrix: newline-terminated rows of +/-/0 characters."""
    return "\n".join(
        "".join(_VALUE_TO_CHAR[int(v)] for v in row) for row in m.entries
    ) + "\n"


def parse_matrix_file(text: str) -> list[SignMatrix]:
    """Parse a file that may hold several matrices separated by single blank lines."""
    blocks = [b for b in text.split("\n\n") if b.strip()]
    if not blocks:
        raise MatrixFormatError("no matrices found in text")
    return [parse_matrix(b) for b in blocks]


def read_matrices(path) -> list[SignMatrix]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_matrix_file(fh.read())


def write_matrices(path, matrices) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(render_matrix(m) for m in matrices))


def corpus_files(corpus_dir, order: int | None = None) -> list[str]:
    """All matrix files under a corpus directory (layout corpus/order-<n>/<name>.txt).

    Sorted lexicographically for reproducible pool construction.
    """
    paths = []
    base = os.path.basename(os.path.normpath(corpus_dir))
    if base.startswith("order-"):
        # pointed straight at one order directory
        roots = [corpus_dir] if order is None or base == f"order-{order}" else []
    elif order is not None:
        sub = os.path.join(corpus_dir, f"order-{order}")
        roots = [sub] if os.path.isdir(sub) else []
    else:
        roots = [
            os.path.join(corpus_dir, d)
            for d in sorted(os.listdir(corpus_dir))
            if d.startswith("order-") and os.path.isdir(os.path.join(corpus_dir, d))
        ]
    for root in roots:
        for name in sorted(os.listdir(root)):
            if name.endswith(".txt"):
                paths.append(os.path.join(root, name))
    return paths
