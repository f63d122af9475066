from .csvout import export_csv, export_matrix_csv, format_cell
from .trajfile import (
    BadMagicError,
    ChecksumError,
    DimensionMismatchError,
    Trajectory,
    TrajectoryDataset,
    TrajectoryFileError,
    TruncatedFileError,
    VersionMismatchError,
    read_trajectories,
    write_trajectories,
)
from .config import ConfigError, ExperimentConfig, config_from_dict, load_config, save_config
from .manifest import RunManifest, sha256_file, sha256_text

__all__ = [
    "export_csv",
    "export_matrix_csv",
    "format_cell",
    "Trajectory",
    "TrajectoryDataset",
    "TrajectoryFileError",
    "BadMagicError",
    "VersionMismatchError",
    "TruncatedFileError",
    "ChecksumError",
    "DimensionMismatchError",
    "read_trajectories",
    "write_trajectories",
    "ConfigError",
    "ExperimentConfig",
    "config_from_dict",
    "load_config",
    "save_config",
    "RunManifest",
    "sha256_file",
    "sha256_text",
]
