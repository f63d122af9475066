from .terrain import ARENA, KINDS, Heightfield, TerrainSpec, batch_height, generate_terrain, hash01
from .params import EnvParams, RANGES, sample_env_params
from .env import (
    ACT_DIM,
    ACTION_CLIP,
    ACTION_SCALE,
    COMMAND_VX,
    CONTROL_DT,
    EPISODE_CAP,
    HEIGHT_OFFSETS,
    OBS_DIM,
    OBS_SCALE,
    PRIV_DIM,
    PRIV_SCALE,
    REWARD_WEIGHTS,
    StepResult,
    TORQUE_LIMIT,
    TRACKING_SIGMA,
    VecEnv,
    make_env,
    pd_torque,
)

__all__ = [
    "ARENA",
    "KINDS",
    "Heightfield",
    "TerrainSpec",
    "batch_height",
    "generate_terrain",
    "hash01",
    "EnvParams",
    "RANGES",
    "sample_env_params",
    "ACT_DIM",
    "ACTION_CLIP",
    "ACTION_SCALE",
    "COMMAND_VX",
    "CONTROL_DT",
    "EPISODE_CAP",
    "HEIGHT_OFFSETS",
    "OBS_DIM",
    "OBS_SCALE",
    "PRIV_DIM",
    "PRIV_SCALE",
    "REWARD_WEIGHTS",
    "StepResult",
    "TORQUE_LIMIT",
    "TRACKING_SIGMA",
    "VecEnv",
    "make_env",
    "pd_torque",
]
