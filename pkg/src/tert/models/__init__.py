from .mlp import MLP, Encoder, GaussianPolicy, ValueHead, linear_init
from .transformer import (
    AttentionTrace,
    CausalTransformer,
    SlidingWindowController,
    TransformerOutput,
    TransformerSpec,
)
from .tcn import TCN, DILATIONS, HISTORY, KERNEL
from .checkpoint import (
    BadMagicError,
    ChecksumError,
    CheckpointError,
    MODEL_KINDS,
    PolicyCheckpoint,
    TruncatedFileError,
    UnknownModelKindError,
    VersionMismatchError,
    load_checkpoint,
    save_checkpoint,
)

__all__ = [
    "MLP",
    "Encoder",
    "GaussianPolicy",
    "ValueHead",
    "linear_init",
    "AttentionTrace",
    "CausalTransformer",
    "SlidingWindowController",
    "TransformerOutput",
    "TransformerSpec",
    "TCN",
    "DILATIONS",
    "HISTORY",
    "KERNEL",
    "BadMagicError",
    "ChecksumError",
    "CheckpointError",
    "MODEL_KINDS",
    "PolicyCheckpoint",
    "TruncatedFileError",
    "UnknownModelKindError",
    "VersionMismatchError",
    "load_checkpoint",
    "save_checkpoint",
]
