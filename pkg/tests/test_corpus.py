"""Invariants over the bundled corpus files."""

from pathlib import Path

import pytest

from hadrec.datagen import load_pool
from hadrec.kline import KlineStatus, kline_reconstruct
from hadrec.matrices import corpus_files, is_hadamard, parse_matrix, read_matrices, render_matrix

ROOT = Path(__file__).resolve().parent.parent
ROOTS = [ROOT / "corpus", ROOT / "corpus-crossclass"]


def _all_paths():
    paths = []
    for root in ROOTS:
        if root.is_dir():
            paths.extend(corpus_files(root))
    return paths


def test_corpus_present():
    assert (ROOT / "corpus").is_dir(), "bundled corpus missing"
    assert len(_all_paths()) >= 490


def test_every_corpus_matrix_is_hadamard_and_round_trips():
    for path in _all_paths():
        for m in read_matrices(path):
            assert is_hadamard(m), path
            assert parse_matrix(render_matrix(m)) == m, path


def test_corpus_orders_match_directories():
    for path in _all_paths():
        order = int(Path(path).parent.name.split("-")[1])
        for m in read_matrices(path):
            assert m.order == order, path


def test_kline_zero_deletion_fixed_point_on_corpus():
    for path in _all_paths():
        for m in read_matrices(path):
            out = kline_reconstruct(m)
            assert out.status == KlineStatus.SUCCESS
            assert out.matrix == m and out.fills == []


def test_crossclass_pool_is_487_distinct_names():
    pool = load_pool(ROOT / "corpus-crossclass" / "order-12")
    assert len(pool) == 487
    assert len(set(pool.names)) == 487
    # and distinct as matrices, not just names
    assert len({m.entries.tobytes() for _, m in pool.matrices}) == 487
