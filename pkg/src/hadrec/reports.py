"""CSV emission and validation for benchmark results; heatmap bundle format.

Headers are part of the external contract and are matched byte-exactly by the
validator. Rates are serialised with repr(), which round-trips float64.
"""

from __future__ import annotations

import os

import numpy as np

from .matrices import MatrixFormatError, SignMatrix, parse_matrix, render_matrix
from .reconstruct import CrossClassResult, EvalRow, HcpRow

RESULTS_HEADER = "order,k,method,trials,successes,rate"
HCP_HEADER = "order,k,trials,hcp_correct,accuracy"
CROSS_HEADER = "order,k,method,trials,successes,rate,run"
CI_HEADER = "order,k,method,runs,mean_rate,ci_half_width"
HISTORY_HEADER = "epoch,train_loss,val_loss"
DIAGNOSTICS_HEADER = "order,k,method,trials,successes,any_hadamard_successes"

_HEADERS = {
    "results": RESULTS_HEADER,
    "hcp": HCP_HEADER,
    "cross": CROSS_HEADER,
    "ci": CI_HEADER,
    "history": HISTORY_HEADER,
    "diagnostics": DIAGNOSTICS_HEADER,
}


class SchemaError(ValueError):
    """CSV does not match its declared bit-exact header or row shape."""


def _write(path, header: str, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(str(c) for c in row) + "\n")


def write_results_csv(path, rows: list[EvalRow]) -> None:
    _write(path, RESULTS_HEADER,
           [(r.order, r.k, r.method, r.trials, r.successes, repr(r.rate)) for r in rows])


def write_diagnostics_csv(path, rows: list[EvalRow]) -> None:
    _write(path, DIAGNOSTICS_HEADER,
           [(r.order, r.k, r.method, r.trials, r.successes, r.any_hadamard) for r in rows])


def write_hcp_csv(path, rows: list[HcpRow]) -> None:
    _write(path, HCP_HEADER,
           [(r.order, r.k, r.trials, r.hcp_correct, repr(r.accuracy)) for r in rows])


def write_cross_csv(path, result: CrossClassResult) -> None:
    rows = []
    for run in result.runs:
        for r in run.rows:
            rows.append((r.order, r.k, r.method, r.trials, r.successes, repr(r.rate), run.run))
    _write(path, CROSS_HEADER, rows)


def write_ci_csv(path, result: CrossClassResult, order: int, method: str = "empm-one-shot") -> None:
    _write(path, CI_HEADER,
           [(order, k, method, len(result.runs), repr(mean), repr(half))
            for k, mean, half in result.bands])


def write_history_csv(path, history) -> None:
    _write(path, HISTORY_HEADER,
           [(s.epoch, repr(s.train_loss), repr(s.val_loss)) for s in history])


def validate_csv(path, kind: str) -> list[dict]:
    """Check the header byte-for-byte and basic row typing; return parsed rows."""
    if kind not in _HEADERS:
        raise ValueError(f"unknown csv kind {kind!r}")
    header = _HEADERS[kind]
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    if lines[0] != header:
        raise SchemaError(f"{path}: header {lines[0]!r} != expected {header!r}")
    cols = header.split(",")
    rows = []
    for ln in lines[1:]:
        if not ln:
            continue
        parts = ln.split(",")
        if len(parts) != len(cols):
            raise SchemaError(f"{path}: row has {len(parts)} fields, expected {len(cols)}")
        row = dict(zip(cols, parts))
        for key, val in row.items():
            if key in ("order", "k", "trials", "successes", "run", "epoch",
                       "hcp_correct", "runs", "any_hadamard_successes"):
                if not val.lstrip("-").isdigit():
                    raise SchemaError(f"{path}: field {key}={val!r} is not an integer")
                row[key] = int(val)
            elif key in ("rate", "accuracy", "mean_rate", "ci_half_width",
                         "train_loss", "val_loss"):
                row[key] = float(val)
        rows.append(row)
    return rows


# ---------------------------------------------------------------------------
# heatmap bundles: input matrix, target matrix, and a real-valued prediction
# grid in one text file, blank-line separated


def write_heatmap_bundle(path, masked: SignMatrix, target: SignMatrix,
                         prediction: np.ndarray) -> None:
    if prediction.shape != (masked.order, masked.order):
        raise ValueError("prediction grid shape mismatch")
    blocks = [
        render_matrix(masked).rstrip("\n"),
        render_matrix(target).rstrip("\n"),
        "\n".join(" ".join(repr(float(v)) for v in row) for row in prediction),
    ]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n\n".join(blocks) + "\n")


def read_heatmap_bundle(path) -> tuple[SignMatrix, SignMatrix, np.ndarray]:
    with open(path, "r", encoding="utf-8") as fh:
        blocks = [b for b in fh.read().split("\n\n") if b.strip()]
    if len(blocks) != 3:
        raise MatrixFormatError(f"heatmap bundle needs 3 blocks, found {len(blocks)}")
    masked = parse_matrix(blocks[0])
    target = parse_matrix(blocks[1])
    pred = np.array(
        [[float(tok) for tok in ln.split()] for ln in blocks[2].strip().split("\n")]
    )
    if pred.shape != (masked.order, masked.order):
        raise MatrixFormatError("prediction grid shape mismatch in heatmap bundle")
    return masked, target, pred


def checksum_file(path) -> str:
    import hashlib

    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def checksum_tree(root) -> list[tuple[str, str]]:
    """(relative path, sha256) for every file under root, sorted."""
    out = []
    for dirpath, _, files in os.walk(root):
        for name in files:
            full = os.path.join(dirpath, name)
            out.append((os.path.relpath(full, root), checksum_file(full)))
    return sorted(out)
