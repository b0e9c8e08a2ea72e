"""Regenerate the bundled corpus.

Base constructions land in corpus/order-<n>/; corpus-crossclass/order-12/
holds 487 distinct named images of the order-12 matrix under random
permutations and negations, giving the repeated-split protocol a pool to
draw from at an order where no second construction is available in-tree.
Deterministic: re-running reproduces every file byte-for-byte.
"""

import os
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from hadrec.matrices import is_hadamard, paley_i, render_matrix, sylvester
from hadrec.symmetry import act, negate, random_perm_pair, random_signs

BASE = {
    4: [("sylvester", sylvester(2)), ("paley-q3", paley_i(3))],
    8: [("sylvester", sylvester(3)), ("paley-q7", paley_i(7))],
    12: [("paley-q11", paley_i(11))],
    16: [("sylvester", sylvester(4))],
    20: [("paley-q19", paley_i(19))],
    24: [("paley-q23", paley_i(23))],
    32: [("sylvester", sylvester(5)), ("paley-q31", paley_i(31))],
}

CROSS_ORDER = 12
CROSS_COUNT = 487
CROSS_SEED = 1789


def write(path, matrix):
    os.makedirs(os.path.dirname(path), exist_ok=True)
    assert is_hadamard(matrix), path
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(render_matrix(matrix))


def main():
    root = os.path.join(os.path.dirname(__file__), "..")
    for order, entries in BASE.items():
        for name, matrix in entries:
            write(os.path.join(root, "corpus", f"order-{order}", f"{name}.txt"), matrix)
    base = paley_i(CROSS_ORDER - 1)
    rng = np.random.default_rng(CROSS_SEED)
    seen = set()
    index = 0
    while index < CROSS_COUNT:
        m = negate(random_signs(rng, CROSS_ORDER),
                   act(random_perm_pair(rng, CROSS_ORDER), base))
        key = m.entries.tobytes()
        if key in seen:
            continue
        seen.add(key)
        write(
            os.path.join(root, "corpus-crossclass", f"order-{CROSS_ORDER}",
                         f"paley-q11-v{index:03d}.txt"),
            m,
        )
        index += 1
    print("corpus written")


if __name__ == "__main__":
    main()
