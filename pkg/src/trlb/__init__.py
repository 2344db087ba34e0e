"""Non-negative tensor-ring factorization with linear bias for sparse
dynamic-network weight prediction."""

from .errors import DomainError, FormatError, NumericError, ParseError, TrlbError
from .metrics import MetricsReport, evaluate
from .model import (
    CpModel,
    TrModel,
    init_cp_model,
    init_model,
    load_model,
    save_model,
)
from .synth import (
    SynthSpec,
    generate,
    oracle_bias_element,
    oracle_cp_element,
    oracle_cp_epoch,
    oracle_epoch,
    oracle_tr_element,
)
from .tensor_store import (
    Entry,
    SparseTensor,
    Split,
    from_cells,
    load_entries,
    read_split_manifest,
    slice_entries,
    split,
    write_entries,
    write_split_manifest,
)
from .trainer import (
    EpochStats,
    TrainConfig,
    cp_epoch_update,
    epoch_update,
    objective,
    train,
    train_cp_baseline,
)

__version__ = "0.1.0"

__all__ = [
    "CpModel",
    "DomainError",
    "Entry",
    "EpochStats",
    "FormatError",
    "MetricsReport",
    "NumericError",
    "ParseError",
    "SparseTensor",
    "Split",
    "SynthSpec",
    "TrainConfig",
    "TrlbError",
    "TrModel",
    "cp_epoch_update",
    "epoch_update",
    "evaluate",
    "from_cells",
    "generate",
    "init_cp_model",
    "init_model",
    "load_entries",
    "load_model",
    "objective",
    "oracle_bias_element",
    "oracle_cp_element",
    "oracle_cp_epoch",
    "oracle_epoch",
    "oracle_tr_element",
    "read_split_manifest",
    "save_model",
    "slice_entries",
    "split",
    "train",
    "train_cp_baseline",
    "write_entries",
    "write_split_manifest",
]
