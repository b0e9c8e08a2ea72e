import os
import shutil

import numpy as np
import pytest

from hadrec import model as md
from hadrec.cli import main, _parse_k_values
from hadrec.cli import UsageError
from hadrec.matrices import paley_i, render_matrix, sylvester
from hadrec.reports import (
    read_heatmap_bundle,
    validate_csv,
    write_heatmap_bundle,
    SchemaError,
)

EXAMPLE_INPUT = [[1, 1, 1, 0], [1, -1, 1, -1], [1, 1, -1, -1], [1, 0, -1, 1]]
EXAMPLE_TARGET = [[0, 0, 0, 1], [0, 0, 0, 0], [0, 0, 0, 0], [0, -1, 0, 0]]


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("corpus")
    for order, name, m in (
        (4, "sylvester", sylvester(2)),
        (4, "paley-q3", paley_i(3)),
        (8, "sylvester", sylvester(3)),
        (12, "paley-q11", paley_i(11)),
    ):
        d = root / f"order-{order}"
        d.mkdir(exist_ok=True)
        (d / f"{name}.txt").write_text(render_matrix(m))
    return str(root)


@pytest.fixture(scope="module")
def checkpoint(tmp_path_factory):
    path = tmp_path_factory.mktemp("ck") / "model.ckpt"
    md.save_params(md.init_params(np.random.default_rng(0)), path, {"order": "8"})
    return str(path)


def _read(path):
    with open(path, "rb") as fh:
        return fh.read()


# ---------------------------------------------------------------------------
# verify


def test_verify_ok(corpus, capsys):
    assert main(["verify", corpus]) == 0
    out = capsys.readouterr().out
    assert "order 4: 2 matrices ok" in out
    assert "order 12: 1 matrices ok" in out


def test_verify_names_corrupt_file(corpus, tmp_path, capsys):
    bad = tmp_path / "corpus"
    shutil.copytree(corpus, bad)
    (bad / "order-4" / "broken.txt").write_text("++\n+\n")
    assert main(["verify", str(bad)]) == 1
    assert "broken.txt" in capsys.readouterr().err


def test_verify_empty(tmp_path, capsys):
    (tmp_path / "corpus").mkdir()
    assert main(["verify", str(tmp_path / "corpus")]) == 1
    assert "no matrices found" in capsys.readouterr().err


def test_verify_env_fallback(corpus, monkeypatch):
    monkeypatch.setenv("HADAMARD_CORPUS", corpus)
    assert main(["verify"]) == 0


# ---------------------------------------------------------------------------
# k parsing and validation errors


def test_parse_k_values():
    assert _parse_k_values("5") == [5]
    assert _parse_k_values("1..4") == [1, 2, 3, 4]
    assert _parse_k_values("1,3,9") == [1, 3, 9]
    with pytest.raises(UsageError):
        _parse_k_values("4..1")
    with pytest.raises(UsageError):
        _parse_k_values("abc")


def test_eval_rejects_bad_method(corpus, checkpoint, tmp_path, capsys):
    code = main([
        "eval", "--corpus", corpus, "--order", "8", "--methods", "quantum",
        "--checkpoint", checkpoint, "--out", str(tmp_path / "r.csv"),
    ])
    assert code == 1
    assert "unknown method" in capsys.readouterr().err


def test_eval_rejects_zero_trials(corpus, checkpoint, tmp_path, capsys):
    code = main([
        "eval", "--corpus", corpus, "--order", "8", "--trials", "0",
        "--checkpoint", checkpoint, "--out", str(tmp_path / "r.csv"),
    ])
    assert code == 1


def test_compare_requires_two_methods(corpus, checkpoint, tmp_path):
    code = main([
        "compare", "--corpus", corpus, "--order", "8", "--methods", "kline",
        "--out", str(tmp_path / "r.csv"),
    ])
    assert code == 1


def test_train_missing_corpus(tmp_path, capsys):
    code = main(["train", "--order", "8", "--corpus", str(tmp_path / "nope"),
                 "--out", str(tmp_path / "run")])
    assert code == 1
    assert "nope" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# eval / compare pipeline


def test_compare_row_count_and_schema(corpus, checkpoint, tmp_path):
    out = str(tmp_path / "results.csv")
    code = main([
        "compare", "--corpus", corpus, "--order", "12",
        "--methods", "kline,empm-one-shot", "--k", "1..12", "--trials", "5",
        "--checkpoint", checkpoint, "--seed", "3", "--out", out,
    ])
    assert code == 0
    rows = validate_csv(out, "results")
    assert len(rows) == 24  # 12 k-values x 2 methods
    diag = validate_csv(os.path.splitext(out)[0] + ".diagnostics.csv", "diagnostics")
    assert len(diag) == 24
    assert os.path.exists(out + ".manifest")


def test_eval_reproducible_from_manifest(corpus, checkpoint, tmp_path):
    out1 = str(tmp_path / "a.csv")
    assert main([
        "eval", "--corpus", corpus, "--order", "8", "--methods", "kline",
        "--k", "1,2", "--trials", "8", "--seed", "5", "--out", out1,
    ]) == 0
    # re-run strictly from the manifest, into a second location
    out2 = str(tmp_path / "b.csv")
    assert main(["eval", "--config", out1 + ".manifest", "--out", out2]) == 0
    assert _read(out1) == _read(out2)


def test_eval_worker_count_does_not_change_bytes(corpus, tmp_path):
    outs = []
    for tag, workers in (("w1", "1"), ("w2", "2")):
        out = str(tmp_path / f"{tag}.csv")
        assert main([
            "eval", "--corpus", corpus, "--order", "8", "--methods", "kline",
            "--k", "1..3", "--trials", "9", "--seed", "2", "--out", out,
            "--workers", workers,
        ]) == 0
        outs.append(_read(out))
    assert outs[0] == outs[1]


def test_eval_dump_heatmap(corpus, checkpoint, tmp_path):
    out = str(tmp_path / "r.csv")
    bundle = str(tmp_path / "bundle.txt")
    assert main([
        "eval", "--corpus", corpus, "--order", "8", "--methods", "empm-one-shot",
        "--k", "3", "--trials", "4", "--checkpoint", checkpoint, "--out", out,
        "--dump-heatmap", bundle,
    ]) == 0
    masked, target, pred = read_heatmap_bundle(bundle)
    assert masked.order == 8 and target.order == 8 and pred.shape == (8, 8)


# ---------------------------------------------------------------------------
# config precedence


def test_config_precedence(corpus, tmp_path):
    cfg = tmp_path / "eval.cfg"
    cfg.write_text("trials = 6\nseed = 9\nmethods = kline\nk = 2\n")
    out = str(tmp_path / "r.csv")
    assert main([
        "eval", "--config", str(cfg), "--corpus", corpus, "--order", "8",
        "--trials", "4", "--out", out,  # flag overrides config's 6
    ]) == 0
    rows = validate_csv(out, "results")
    assert rows[0]["trials"] == 4
    assert rows[0]["k"] == 2  # from config, beats the 1..8 default


def test_config_unknown_key(corpus, tmp_path, capsys):
    cfg = tmp_path / "eval.cfg"
    cfg.write_text("turbo = yes\n")
    code = main(["eval", "--config", str(cfg), "--corpus", corpus, "--order", "8",
                 "--methods", "kline", "--out", str(tmp_path / "r.csv")])
    assert code == 1
    assert "turbo" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# gen-data


def test_gen_data_deterministic(corpus, tmp_path):
    args = ["gen-data", "--corpus", corpus, "--order", "8", "--count", "6",
            "--k", "3", "--seed", "4"]
    assert main(args + ["--out", str(tmp_path / "d1"), "--run-id", "r"]) == 0
    assert main(args + ["--out", str(tmp_path / "d2"), "--run-id", "r"]) == 0
    d1, d2 = tmp_path / "d1" / "r", tmp_path / "d2" / "r"
    names = sorted(os.listdir(d1))
    assert "manifest" in names and "00000.input.txt" in names
    for name in names:
        if name == "run.manifest":
            continue  # carries timestamps
        assert _read(d1 / name) == _read(d2 / name), name


def test_gen_data_requires_k(corpus, tmp_path):
    assert main(["gen-data", "--corpus", corpus, "--order", "8",
                 "--out", str(tmp_path)]) == 1


# ---------------------------------------------------------------------------
# train (toy scale) and hcp-curve


def test_train_writes_artifacts_and_is_deterministic(corpus, tmp_path):
    base = ["train", "--corpus", corpus, "--order", "4", "--seed", "6",
            "--batches-per-epoch", "2", "--batch-size", "6", "--max-epochs", "2",
            "--patience", "3", "--val-batches", "1", "--k-max", "3"]
    assert main(base + ["--out", str(tmp_path / "t1")]) == 0
    assert main(base + ["--out", str(tmp_path / "t2")]) == 0
    h1 = validate_csv(tmp_path / "t1" / "history.csv", "history")
    assert len(h1) == 2
    ck1 = _read(tmp_path / "t1" / "model.ckpt")
    ck2 = _read(tmp_path / "t2" / "model.ckpt")
    assert ck1 == ck2
    params, meta = md.load_params(tmp_path / "t1" / "model.ckpt")
    assert meta["order"] == "4"


def test_hcp_curve_cli(corpus, checkpoint, tmp_path):
    out = str(tmp_path / "hcp.csv")
    assert main([
        "hcp-curve", "--corpus", corpus, "--order", "8", "--checkpoint", checkpoint,
        "--k", "1..3", "--trials", "6", "--seed", "1", "--out", out,
    ]) == 0
    rows = validate_csv(out, "hcp")
    assert [r["k"] for r in rows] == [1, 2, 3]


# ---------------------------------------------------------------------------
# plot


def test_plot_curves_deterministic(corpus, tmp_path):
    out = str(tmp_path / "r.csv")
    assert main([
        "eval", "--corpus", corpus, "--order", "8", "--methods", "kline",
        "--k", "1..4", "--trials", "6", "--seed", "1", "--out", out,
    ]) == 0
    svg1 = str(tmp_path / "p1.svg")
    svg2 = str(tmp_path / "p2.svg")
    assert main(["plot", "--csv", out, "--kind", "curves", "--out", svg1]) == 0
    assert main(["plot", "--csv", out, "--kind", "curves", "--out", svg2]) == 0
    assert _read(svg1) == _read(svg2)
    assert _read(svg1).lstrip().startswith(b"<?xml")


def test_plot_hcp(corpus, checkpoint, tmp_path):
    out = str(tmp_path / "hcp.csv")
    assert main([
        "hcp-curve", "--corpus", corpus, "--order", "8", "--checkpoint", checkpoint,
        "--k", "1..3", "--trials", "5", "--seed", "1", "--out", out,
    ]) == 0
    svg = str(tmp_path / "hcp.svg")
    assert main(["plot", "--csv", out, "--kind", "hcp", "--out", svg]) == 0
    assert os.path.exists(svg)


def test_plot_heatmap_of_golden_tuple(tmp_path):
    from hadrec.matrices import SignMatrix

    bundle = str(tmp_path / "bundle.txt")
    rng = np.random.default_rng(0)
    pred = rng.uniform(-1, 1, size=(4, 4))
    write_heatmap_bundle(bundle, SignMatrix(EXAMPLE_INPUT), SignMatrix(EXAMPLE_TARGET), pred)
    svg = str(tmp_path / "heat.svg")
    assert main(["plot", "--csv", bundle, "--kind", "heatmap", "--out", svg]) == 0
    text = (tmp_path / "heat.svg").read_text()
    assert "<svg" in text
    # bundle round-trips
    masked, target, pred2 = read_heatmap_bundle(bundle)
    assert masked == SignMatrix(EXAMPLE_INPUT)
    assert target == SignMatrix(EXAMPLE_TARGET)
    assert np.array_equal(pred, pred2)


def test_plot_schema_mismatch(corpus, tmp_path, capsys):
    out = str(tmp_path / "r.csv")
    assert main([
        "eval", "--corpus", corpus, "--order", "8", "--methods", "kline",
        "--k", "1", "--trials", "3", "--seed", "1", "--out", out,
    ]) == 0
    code = main(["plot", "--csv", out, "--kind", "hcp", "--out", str(tmp_path / "x.svg")])
    assert code == 1


def test_validate_csv_rejects_bad_header(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("order,k,method\n")
    with pytest.raises(SchemaError):
        validate_csv(p, "results")
