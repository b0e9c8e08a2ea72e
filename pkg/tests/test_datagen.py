import os

import numpy as np
import pytest

from hadrec.datagen import (
    DatasetConfig,
    MaskedInstance,
    Pool,
    PoolError,
    instance_stream,
    load_pool,
    make_batch,
    make_instance,
    read_archive,
    split_pool,
    training_config,
    write_archive,
)
from hadrec.matrices import SignMatrix, is_hadamard, paley_i, render_matrix, sylvester

EXAMPLE_INPUT = SignMatrix([[1, 1, 1, 0], [1, -1, 1, -1], [1, 1, -1, -1], [1, 0, -1, 1]])
EXAMPLE_TARGET = SignMatrix([[0, 0, 0, 1], [0, 0, 0, 0], [0, 0, 0, 0], [0, -1, 0, 0]])


@pytest.fixture
def pool8():
    return Pool((("sylvester", sylvester(3)), ("paley-q7", paley_i(7))))


def _write_corpus(tmp_path, matrices_by_file, order=4):
    root = tmp_path / "corpus" / f"order-{order}"
    root.mkdir(parents=True)
    for name, ms in matrices_by_file.items():
        (root / f"{name}.txt").write_text("\n".join(render_matrix(m) for m in ms))
    return tmp_path / "corpus"


def test_golden_example_pair_is_valid_instance():
    inst = MaskedInstance(EXAMPLE_INPUT, EXAMPLE_TARGET, "example", 2)
    assert is_hadamard(inst.original)
    assert inst.input.mask() == [(0, 3), (3, 1)]


def test_instance_rejects_misaligned_target():
    bad_target = SignMatrix([[1, 0, 0, 0], [0, 0, 0, 0], [0, 0, 0, 0], [0, -1, 0, 0]])
    with pytest.raises(ValueError):
        MaskedInstance(EXAMPLE_INPUT, bad_target, "example", 2)


def test_pool_rejects_mixed_orders():
    with pytest.raises(PoolError):
        Pool((("a", sylvester(2)), ("b", sylvester(3))))


def test_pool_rejects_non_hadamard():
    with pytest.raises(PoolError, match="zero entry"):
        Pool((("bad", EXAMPLE_INPUT),))


def test_load_pool_from_directory(tmp_path):
    corpus = _write_corpus(tmp_path, {"s": [sylvester(2)], "p": [paley_i(3)]})
    pool = load_pool(corpus)
    assert pool.names == ["p", "s"]  # lexicographic
    assert pool.order == 4


def test_load_pool_multi_matrix_file(tmp_path):
    corpus = _write_corpus(tmp_path, {"both": [sylvester(2), paley_i(3)]})
    pool = load_pool(corpus)
    assert pool.names == ["both#0", "both#1"]


def test_load_pool_rejects_zero_entry(tmp_path):
    corpus = _write_corpus(tmp_path, {"bad": [EXAMPLE_INPUT]})
    with pytest.raises(PoolError, match=r"zero entry at \(0, 3\)"):
        load_pool(corpus)


def test_load_pool_empty_dir(tmp_path):
    (tmp_path / "corpus").mkdir()
    with pytest.raises(PoolError, match="no matrix files"):
        load_pool(tmp_path / "corpus")


def test_split_pool_counts_and_determinism():
    members = tuple((f"v{i:02d}", sylvester(2)) for i in range(10))
    # same matrix under many names is fine for split mechanics
    pool = Pool(members)
    a = split_pool(pool, 3, seed=42)
    b = split_pool(pool, 3, seed=42)
    assert a.train.names == b.train.names
    assert len(a.train) == 3 and len(a.validation) == 7
    assert set(a.train.names).isdisjoint(a.validation.names)
    assert sorted(a.train.names + a.validation.names) == sorted(pool.names)


def test_split_pool_range_errors():
    pool = Pool((("a", sylvester(2)), ("b", paley_i(3))))
    with pytest.raises(ValueError):
        split_pool(pool, 2, seed=0)
    with pytest.raises(ValueError):
        split_pool(pool, 0, seed=0)


def test_make_instance_k0(pool8):
    cfg = DatasetConfig(order=8, k=0, augment_negations=False)
    inst = make_instance(pool8, cfg, np.random.default_rng(0))
    assert is_hadamard(inst.input)
    assert inst.target.zero_count() == 64


def test_make_instance_invariants(pool8, seeded_rng):
    cfg = training_config(8)
    for _ in range(500):
        inst = make_instance(pool8, cfg, seeded_rng)
        assert inst.input.zero_count() == inst.k
        assert is_hadamard(inst.original)  # also checked inside the constructor


def test_make_instance_pipeline_without_augment_is_pure_deletion(pool8, seeded_rng):
    cfg = DatasetConfig(order=8, k=4, augment_negations=False)
    inst = make_instance(pool8, cfg, seeded_rng)
    source = dict(pool8.matrices)[inst.source]
    assert inst.original == source


def test_config_validation():
    with pytest.raises(ValueError):
        DatasetConfig(order=4, k=17)
    with pytest.raises(ValueError):
        DatasetConfig(order=4)
    with pytest.raises(ValueError):
        DatasetConfig(order=4, k=2, k_range=(1, 2))
    with pytest.raises(ValueError):
        DatasetConfig(order=4, k_range=(3, 2))


def test_deletion_positions_uniform():
    pool = Pool((("s", sylvester(3)),))
    cfg = DatasetConfig(order=8, k=1, augment_negations=False)
    counts = np.zeros(64)
    draws = 100_000
    for i in range(draws):
        inst = make_instance(pool, cfg, instance_stream(99, i))
        (pos,) = inst.input.mask()
        counts[pos[0] * 8 + pos[1]] += 1
    p = 1 / 64
    se = np.sqrt(p * (1 - p) / draws)
    assert np.all(np.abs(counts / draws - p) < 3 * se + 1e-12), (
        f"max deviation {np.max(np.abs(counts / draws - p)):.2e} vs 3*SE {3 * se:.2e}"
    )


def test_make_batch_deterministic(pool8):
    cfg = training_config(8, seed=5)
    a = make_batch(pool8, cfg, seed=5, count=20)
    b = make_batch(pool8, cfg, seed=5, count=20)
    assert all(x.input == y.input and x.target == y.target for x, y in zip(a, b))
    c = make_batch(pool8, cfg, seed=6, count=20)
    assert any(x.input != y.input for x, y in zip(a, c))


def test_make_batch_count(pool8):
    assert len(make_batch(pool8, training_config(8), seed=0, count=150)) == 150
    with pytest.raises(ValueError):
        make_batch(pool8, training_config(8), seed=0, count=0)


def test_singleton_pool_shares_source():
    pool = Pool((("only", paley_i(7)),))
    batch = make_batch(pool, training_config(8), seed=1, count=10)
    assert all(inst.source == "only" for inst in batch)


def test_archive_round_trip(tmp_path, pool8):
    cfg = DatasetConfig(order=8, k=3, seed=11)
    instances = make_batch(pool8, cfg, seed=11, count=7)
    written = write_archive(tmp_path / "data" / "run1", instances, cfg, seed=11)
    assert all(os.path.exists(p) for p in written)
    loaded = read_archive(tmp_path / "data" / "run1")
    assert len(loaded) == 7
    for a, b in zip(instances, loaded):
        assert a.input == b.input and a.target == b.target and a.source == b.source


def test_archive_bytes_deterministic(tmp_path, pool8):
    cfg = DatasetConfig(order=8, k=3, seed=11)
    for run in ("a", "b"):
        instances = make_batch(pool8, cfg, seed=11, count=5)
        write_archive(tmp_path / run, instances, cfg, seed=11)
    for name in sorted(os.listdir(tmp_path / "a")):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
