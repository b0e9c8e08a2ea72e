"""Hadamard matrix completion: algebraic recovery, an equivariant model, benchmarks."""

from .matrices import (
    SignMatrix,
    is_hadamard,
    parse_matrix,
    paley_i,
    render_matrix,
    sylvester,
)
from .symmetry import PermPair, SignMaskPair, act, negate, random_perm_pair, random_signs
from .kline import KlineConfig, KlineOutcome, KlineStatus, kline_reconstruct, kline_step
from .oracle import enumerate_completions, unique_completion
from .datagen import (
    DatasetConfig,
    MaskedInstance,
    Pool,
    PoolSplit,
    load_pool,
    make_batch,
    make_instance,
    split_pool,
)
from .model import (
    ModelParams,
    TrainConfig,
    emp_layer,
    forward,
    init_params,
    load_params,
    save_params,
    train,
)
from .reconstruct import (
    EvalRow,
    HcpRow,
    ReconstructionOutcome,
    Status,
    confidence_interval,
    cross_class_experiment,
    evaluate,
    hcp,
    hcp_curve,
    one_shot,
    sequential,
)

__all__ = [
    "SignMatrix", "is_hadamard", "parse_matrix", "render_matrix", "sylvester", "paley_i",
    "PermPair", "SignMaskPair", "act", "negate", "random_perm_pair", "random_signs",
    "KlineConfig", "KlineOutcome", "KlineStatus", "kline_reconstruct", "kline_step",
    "enumerate_completions", "unique_completion",
    "DatasetConfig", "MaskedInstance", "Pool", "PoolSplit",
    "load_pool", "make_batch", "make_instance", "split_pool",
    "ModelParams", "TrainConfig", "emp_layer", "forward", "init_params",
    "load_params", "save_params", "train",
    "EvalRow", "HcpRow", "ReconstructionOutcome", "Status",
    "confidence_interval", "cross_class_experiment", "evaluate",
    "hcp", "hcp_curve", "one_shot", "sequential",
]
