"""Command-line interface: verify, gen-data, train, eval, compare, hcp-curve, plot.

Configuration precedence is flags > config file > defaults; every
artifact-producing run writes a manifest of its fully resolved configuration,
corpus checksums, and artifact checksums. Feeding that manifest back through
--config reproduces the run byte-for-byte (manifest timestamps aside).
Exit codes: 0 success, 1 validation/configuration error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import model as md
from .datagen import DatasetConfig, PoolError, load_pool, make_batch, write_archive
from .kline import KlineConfig
from .manifest import ConfigError, RunManifest, load_config, resolve
from .matrices import MatrixFormatError, corpus_files, is_hadamard, read_matrices
from .reconstruct import (
    METHODS,
    cross_class_experiment,
    default_workers,
    evaluate,
    evaluation_instances,
    hcp_curve,
    _forward_chunked,
)
from .reports import (
    read_heatmap_bundle,
    validate_csv,
    write_ci_csv,
    write_cross_csv,
    write_diagnostics_csv,
    write_heatmap_bundle,
    write_hcp_csv,
    write_history_csv,
    write_results_csv,
)


class UsageError(ValueError):
    """Configuration/validation problem; exits with code 1."""


def _parse_k_values(spec: str) -> list[int]:
    """Accept '5', '1,2,4' or '1..8'."""
    spec = spec.strip()
    try:
        if ".." in spec:
            lo, hi = spec.split("..", 1)
            lo, hi = int(lo), int(hi)
            if lo < 0 or hi < lo:
                raise ValueError
            return list(range(lo, hi + 1))
        return [int(tok) for tok in spec.split(",") if tok]
    except ValueError:
        raise UsageError(f"cannot parse k specification {spec!r}") from None


def _as_int(resolved, key) -> int:
    try:
        return int(resolved[key])
    except (KeyError, ValueError):
        raise UsageError(f"{key} must be an integer, got {resolved.get(key)!r}") from None


def _as_float(resolved, key) -> float:
    try:
        return float(resolved[key])
    except (KeyError, ValueError):
        raise UsageError(f"{key} must be a number, got {resolved.get(key)!r}") from None


def _as_bool(resolved, key) -> bool:
    val = resolved.get(key, "false").lower()
    if val in ("true", "on", "1", "yes"):
        return True
    if val in ("false", "off", "0", "no"):
        return False
    raise UsageError(f"{key} must be on/off, got {resolved.get(key)!r}")


def _corpus_default() -> str:
    return os.environ.get("HADAMARD_CORPUS", "corpus")


def _resolve(args, schema: dict[str, str | None]) -> dict[str, str]:
    config = load_config(args.config) if getattr(args, "config", None) else {}
    flags = {k.replace("_", "-"): v for k, v in vars(args).items()
             if k not in ("config", "func", "subcommand")}
    try:
        return resolve(schema, flags, config)
    except ConfigError as exc:
        raise UsageError(str(exc)) from exc


def _load_order_pool(resolved):
    corpus = resolved["corpus"]
    order = _as_int(resolved, "order")
    paths = corpus_files(corpus, order)
    if not paths:
        raise UsageError(f"no matrices for order {order} under {corpus!r}")
    try:
        pool = load_pool(paths)
    except PoolError as exc:
        raise UsageError(str(exc)) from exc
    return pool, paths


# ---------------------------------------------------------------------------
# verify


def cmd_verify(args) -> int:
    corpus = args.corpus_dir or _corpus_default()
    if not os.path.isdir(corpus):
        print(f"error: corpus directory {corpus!r} does not exist", file=sys.stderr)
        return 1
    paths = corpus_files(corpus)
    counts: dict[int, int] = {}
    failures: list[str] = []
    for path in paths:
        try:
            for idx, m in enumerate(read_matrices(path)):
                if is_hadamard(m):
                    counts[m.order] = counts.get(m.order, 0) + 1
                else:
                    zeros = m.mask()
                    why = f"zero entry at {zeros[0]}" if zeros else "rows not orthogonal"
                    failures.append(f"{path}[{idx}]: {why}")
        except MatrixFormatError as exc:
            failures.append(f"{path}: {exc}")
    for order in sorted(counts):
        print(f"order {order}: {counts[order]} matrices ok")
    for f in failures:
        print(f"FAIL {f}", file=sys.stderr)
    if failures:
        return 1
    if not counts:
        print("no matrices found", file=sys.stderr)
        return 1
    return 0


# ---------------------------------------------------------------------------
# gen-data

GEN_SCHEMA = {
    "order": None,
    "corpus": None,  # filled with env-aware default at runtime
    "count": "150",
    "k": None,
    "k-range": None,
    "seed": "0",
    "out": "data",
    "run-id": None,
    "augment-permutations": "off",
    "augment-negations": "on",
}


def cmd_gen_data(args) -> int:
    schema = dict(GEN_SCHEMA)
    schema["corpus"] = _corpus_default()
    resolved = _resolve(args, schema)
    if "order" not in resolved:
        raise UsageError("--order is required")
    pool, paths = _load_order_pool(resolved)
    seed = _as_int(resolved, "seed")
    count = _as_int(resolved, "count")
    if count < 1:
        raise UsageError("count must be >= 1")
    if ("k" in resolved) == ("k-range" in resolved):
        raise UsageError("exactly one of --k or --k-range is required")
    kwargs = dict(
        order=pool.order,
        augment_permutations=_as_bool(resolved, "augment-permutations"),
        augment_negations=_as_bool(resolved, "augment-negations"),
        seed=seed,
    )
    if "k" in resolved:
        kwargs["k"] = _as_int(resolved, "k")
    else:
        lo, *rest = _parse_k_values(resolved["k-range"])
        kwargs["k_range"] = (lo, rest[-1] if rest else lo)
    try:
        cfg = DatasetConfig(**kwargs)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    run_id = resolved.get("run-id") or f"order{pool.order}-seed{seed}"
    resolved["run-id"] = run_id
    out_dir = os.path.join(resolved["out"], run_id)
    manifest = RunManifest("gen-data", resolved)
    manifest.add_corpus_checksums(paths)
    instances = make_batch(pool, cfg, seed, count)
    written = write_archive(out_dir, instances, cfg, seed)
    for p in written:
        manifest.add_artifact(p)
    manifest.write(os.path.join(out_dir, "run.manifest"))
    print(f"wrote {count} instances to {out_dir}")
    return 0


# ---------------------------------------------------------------------------
# train

TRAIN_SCHEMA = {
    "order": None,
    "corpus": None,
    "seed": "0",
    "loss": "mse",
    "batches-per-epoch": "50",
    "batch-size": "150",
    "patience": "10",
    "max-epochs": "200",
    "learning-rate": "0.001",
    "optimizer": "adam",
    "momentum": "0.9",
    "k-max": None,
    "pair-bias": "on",
    "val-batches": "10",
    "out": "runs/train",
    "cross-class": "off",
    "train-count": "24",
    "runs": "5",
    "eval-k": "1..8",
    "eval-trials": "400",
}


def _train_config(resolved, order: int, seed: int) -> md.TrainConfig:
    try:
        return md.TrainConfig(
            order=order,
            seed=seed,
            loss=resolved["loss"],
            batches_per_epoch=_as_int(resolved, "batches-per-epoch"),
            batch_size=_as_int(resolved, "batch-size"),
            patience=_as_int(resolved, "patience"),
            max_epochs=_as_int(resolved, "max-epochs"),
            learning_rate=_as_float(resolved, "learning-rate"),
            optimizer=resolved["optimizer"],
            momentum=_as_float(resolved, "momentum"),
            k_max=_as_int(resolved, "k-max") if "k-max" in resolved else None,
            pair_bias=_as_bool(resolved, "pair-bias"),
            val_batches=_as_int(resolved, "val-batches"),
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def cmd_train(args) -> int:
    schema = dict(TRAIN_SCHEMA)
    schema["corpus"] = _corpus_default()
    resolved = _resolve(args, schema)
    if "order" not in resolved:
        raise UsageError("--order is required")
    pool, paths = _load_order_pool(resolved)
    seed = _as_int(resolved, "seed")
    cfg = _train_config(resolved, pool.order, seed)
    out_dir = resolved["out"]
    os.makedirs(out_dir, exist_ok=True)
    manifest = RunManifest("train", resolved)
    manifest.add_corpus_checksums(paths)
    meta = {
        "order": str(pool.order),
        "seed": str(seed),
        "optimizer": f"{cfg.optimizer} lr={cfg.learning_rate} momentum={cfg.momentum}",
        "loss": cfg.loss,
    }

    def progress(stats):
        print(f"epoch {stats.epoch}: train {stats.train_loss:.6f} val {stats.val_loss:.6f}",
              flush=True)

    if _as_bool(resolved, "cross-class"):
        train_count = _as_int(resolved, "train-count")
        runs = _as_int(resolved, "runs")
        k_values = _parse_k_values(resolved["eval-k"])
        trials = _as_int(resolved, "eval-trials")

        def hook(run_idx, params, history, split):
            ck = os.path.join(out_dir, f"model-run{run_idx}.ckpt")
            md.save_params(params, ck, {**meta, "run": str(run_idx),
                                        "train_names": "|".join(split.train.names)})
            hist_path = os.path.join(out_dir, f"history-run{run_idx}.csv")
            write_history_csv(hist_path, history)
            manifest.add_artifact(ck)
            manifest.add_artifact(hist_path)

        try:
            result = cross_class_experiment(
                pool, cfg, k_values, trials,
                train_count=train_count, runs=runs, seed=seed,
                progress=progress, checkpoint_hook=hook,
            )
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        cross_path = os.path.join(out_dir, "cross.csv")
        ci_path = os.path.join(out_dir, "ci.csv")
        write_cross_csv(cross_path, result)
        write_ci_csv(ci_path, result, pool.order)
        manifest.add_artifact(cross_path)
        manifest.add_artifact(ci_path)
    else:
        params, history = md.train(cfg, pool, progress=progress)
        ck = os.path.join(out_dir, "model.ckpt")
        md.save_params(params, ck, meta)
        hist_path = os.path.join(out_dir, "history.csv")
        write_history_csv(hist_path, history)
        manifest.add_artifact(ck)
        manifest.add_artifact(hist_path)
    manifest.write(os.path.join(out_dir, "run.manifest"))
    print(f"artifacts in {out_dir}")
    return 0


# ---------------------------------------------------------------------------
# eval / compare

EVAL_SCHEMA = {
    "checkpoint": None,
    "corpus": None,
    "order": None,
    "methods": "empm-one-shot",
    "k": "1..8",
    "trials": "1000",
    "seed": "0",
    "out": "results.csv",
    "kline-threshold": "0.5",
    "kline-max-iters": None,
    "kline-literal-formula": "off",
    "workers": None,
    "dump-heatmap": None,
    "plot": None,
}


def _run_eval(args, subcommand: str) -> int:
    schema = dict(EVAL_SCHEMA)
    schema["corpus"] = _corpus_default()
    schema["workers"] = str(default_workers())
    resolved = _resolve(args, schema)
    if "order" not in resolved:
        raise UsageError("--order is required")
    methods = [m.strip() for m in resolved["methods"].split(",") if m.strip()]
    for m in methods:
        if m not in METHODS:
            raise UsageError(f"unknown method {m!r}; choose from {', '.join(METHODS)}")
    if subcommand == "compare" and len(methods) < 2:
        raise UsageError("compare requires at least two methods")
    trials = _as_int(resolved, "trials")
    if trials < 1:
        raise UsageError("trials must be >= 1")
    k_values = _parse_k_values(resolved["k"])
    pool, paths = _load_order_pool(resolved)
    seed = _as_int(resolved, "seed")
    workers = _as_int(resolved, "workers")
    params = None
    if any(m.startswith("empm") for m in methods):
        if "checkpoint" not in resolved:
            raise UsageError("--checkpoint is required for empm methods")
        try:
            params, _ = md.load_params(resolved["checkpoint"])
        except (OSError, md.CheckpointError) as exc:
            raise UsageError(f"cannot load checkpoint: {exc}") from exc
    kline_cfg = KlineConfig(
        threshold=_as_float(resolved, "kline-threshold"),
        max_iters=_as_int(resolved, "kline-max-iters") if "kline-max-iters" in resolved else None,
        transpose_correction=not _as_bool(resolved, "kline-literal-formula"),
    )
    manifest = RunManifest(subcommand, resolved)
    manifest.add_corpus_checksums(paths)
    rows = []
    for method in methods:
        rows.extend(
            evaluate(method, pool, k_values, trials, seed,
                     params=params, kline_cfg=kline_cfg, workers=workers)
        )
    rows.sort(key=lambda r: (r.k, r.method))
    out = resolved["out"]
    write_results_csv(out, rows)
    manifest.add_artifact(out)
    diag = os.path.splitext(out)[0] + ".diagnostics.csv"
    write_diagnostics_csv(diag, rows)
    manifest.add_artifact(diag)
    if "dump-heatmap" in resolved:
        inst = evaluation_instances(pool, k_values[0], 1, seed)[0]
        pred = _forward_chunked(params, inst.input.entries.astype(float)[None])[0] \
            if params is not None else np.zeros((pool.order, pool.order))
        write_heatmap_bundle(resolved["dump-heatmap"], inst.input, inst.target, pred)
        manifest.add_artifact(resolved["dump-heatmap"])
    if "plot" in resolved:
        from . import plots

        plots.plot_success_curves(validate_csv(out, "results"), resolved["plot"],
                                  title=f"order {pool.order}")
        manifest.add_artifact(resolved["plot"])
    manifest.write(out + ".manifest")
    for r in rows:
        print(f"k={r.k:3d} {r.method:18s} rate={r.rate:.4f} ({r.successes}/{r.trials})")
    return 0


def cmd_eval(args) -> int:
    return _run_eval(args, "eval")


def cmd_compare(args) -> int:
    return _run_eval(args, "compare")


# ---------------------------------------------------------------------------
# hcp-curve

HCP_SCHEMA = {
    "checkpoint": None,
    "corpus": None,
    "order": None,
    "k": None,  # default derived: 1..n^2/8
    "trials": "1000",
    "seed": "0",
    "out": "hcp.csv",
    "plot": None,
}


def cmd_hcp_curve(args) -> int:
    schema = dict(HCP_SCHEMA)
    schema["corpus"] = _corpus_default()
    resolved = _resolve(args, schema)
    if "order" not in resolved or "checkpoint" not in resolved:
        raise UsageError("--order and --checkpoint are required")
    pool, paths = _load_order_pool(resolved)
    k_spec = resolved.get("k") or f"1..{pool.order * pool.order // 8}"
    resolved["k"] = k_spec
    k_values = _parse_k_values(k_spec)
    try:
        params, _ = md.load_params(resolved["checkpoint"])
    except (OSError, md.CheckpointError) as exc:
        raise UsageError(f"cannot load checkpoint: {exc}") from exc
    manifest = RunManifest("hcp-curve", resolved)
    manifest.add_corpus_checksums(paths)
    rows = hcp_curve(params, pool, k_values, _as_int(resolved, "trials"),
                     _as_int(resolved, "seed"))
    out = resolved["out"]
    write_hcp_csv(out, rows)
    manifest.add_artifact(out)
    if "plot" in resolved:
        from . import plots

        plots.plot_hcp_curve(validate_csv(out, "hcp"), resolved["plot"],
                             title=f"order {pool.order}")
        manifest.add_artifact(resolved["plot"])
    manifest.write(out + ".manifest")
    for r in rows:
        print(f"k={r.k:3d} hcp accuracy={r.accuracy:.4f} ({r.hcp_correct}/{r.trials})")
    return 0


# ---------------------------------------------------------------------------
# plot

PLOT_SCHEMA = {
    "csv": None,
    "kind": None,
    "out": None,
    "title": None,
}


def cmd_plot(args) -> int:
    resolved = _resolve(args, PLOT_SCHEMA)
    for key in ("csv", "kind", "out"):
        if key not in resolved:
            raise UsageError(f"--{key} is required")
    kind = resolved["kind"]
    out = resolved["out"]
    title = resolved.get("title")
    from . import plots
    from .reports import SchemaError

    manifest = RunManifest("plot", resolved)
    try:
        if kind == "curves":
            try:
                rows = validate_csv(resolved["csv"], "results")
            except SchemaError:
                rows = validate_csv(resolved["csv"], "cross")
            plots.plot_success_curves(rows, out, title=title)
        elif kind == "hcp":
            plots.plot_hcp_curve(validate_csv(resolved["csv"], "hcp"), out, title=title)
        elif kind == "heatmap":
            masked, target, pred = read_heatmap_bundle(resolved["csv"])
            plots.plot_heatmap(masked, target, pred, out)
        else:
            raise UsageError(f"unknown plot kind {kind!r}")
    except (SchemaError, MatrixFormatError) as exc:
        raise UsageError(str(exc)) from exc
    manifest.add_artifact(out)
    manifest.write(out + ".manifest")
    print(f"wrote {out}")
    return 0


# ---------------------------------------------------------------------------
# wiring


def _add_schema_flags(parser: argparse.ArgumentParser, schema: dict[str, str | None]):
    for key in schema:
        parser.add_argument(f"--{key}", default=None, dest=key.replace("-", "_"))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hadrec",
        description="Hadamard matrix completion: algebraic and learned reconstruction",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("verify", help="parse and verify every corpus matrix")
    p.add_argument("corpus_dir", nargs="?", default=None)
    p.set_defaults(func=cmd_verify)

    for name, schema, func, help_text in (
        ("gen-data", GEN_SCHEMA, cmd_gen_data, "generate a masked-instance archive"),
        ("train", TRAIN_SCHEMA, cmd_train, "train the completion model"),
        ("eval", EVAL_SCHEMA, cmd_eval, "benchmark one or more methods"),
        ("compare", EVAL_SCHEMA, cmd_compare, "paired comparison of >=2 methods"),
        ("hcp-curve", HCP_SCHEMA, cmd_hcp_curve, "highest-confidence accuracy curve"),
        ("plot", PLOT_SCHEMA, cmd_plot, "render figures from result CSVs"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", default=None, help="key = value config file")
        _add_schema_flags(p, schema)
        p.set_defaults(func=func)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # runtime failure
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
