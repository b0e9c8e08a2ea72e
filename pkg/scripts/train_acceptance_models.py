"""Pre-train the acceptance-suite models into .acceptance-cache/.

Usage: python scripts/train_acceptance_models.py {n8|n12|cross}

Uses the exact frozen configs from tests/test_acceptance.py, so a later
pytest run finds the checkpoints in cache and skips training.
"""

import os
import sys

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, os.path.join(ROOT, "src"))
sys.path.insert(0, os.path.join(ROOT, "tests"))

import test_acceptance as acc  # noqa: E402


def main():
    tag = sys.argv[1] if len(sys.argv) > 1 else "n8"
    if tag == "n8":
        acc.train_or_load("n8", acc.TRAIN_CONFIGS[8], acc.single_class_pool(8))
    elif tag == "n12":
        acc.train_or_load("n12", acc.TRAIN_CONFIGS[12], acc.single_class_pool(12))
    elif tag == "cross":
        model12 = acc.train_or_load("n12", acc.TRAIN_CONFIGS[12], acc.single_class_pool(12))
        acc.test_criterion_8_cross_class(model12)
    else:
        raise SystemExit(f"unknown tag {tag}")
    print(f"{tag}: cached")


if __name__ == "__main__":
    main()
