"""Evaluate a cached acceptance model against the reference one-shot table."""

import os
import sys

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, os.path.join(ROOT, "src"))
sys.path.insert(0, os.path.join(ROOT, "tests"))

import test_acceptance as acc  # noqa: E402
from hadrec import reconstruct as rc  # noqa: E402


def main():
    order = int(sys.argv[1]) if len(sys.argv) > 1 else 8
    trials = int(sys.argv[2]) if len(sys.argv) > 2 else 1000
    tag = f"n{order}"
    params = acc.train_or_load(tag, acc.TRAIN_CONFIGS[order], acc.single_class_pool(order))
    pool = acc.single_class_pool(order)
    rows = rc.evaluate("empm-one-shot", pool, list(acc.TABLE1_EMPM[order]), trials,
                       seed=404, params=params)
    print(f"n={order} ({acc.EPOCHS_BY_TAG.get(tag)} epochs)")
    worst = 0.0
    for row in rows:
        want = acc.TABLE1_EMPM[order][row.k]
        delta = abs(row.rate - want)
        worst = max(worst, delta)
        flag = "ok" if delta <= acc.TABLE1_TOL else "MISS"
        print(f"  k={row.k}: {row.rate:.3f}  ref {want:.3f}  delta {delta:+.3f}  {flag}")
    print(f"worst |delta| = {worst:.3f} (tolerance {acc.TABLE1_TOL})")


if __name__ == "__main__":
    main()
