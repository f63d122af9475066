"""Domain-randomized physical parameters and their training/testing ranges."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# parameter -> (low, high); testing ranges are strictly wider than training
RANGES = {
    "training": {
        "friction": (0.5, 1.25),
        "added_mass": (0.0, 5.0),
        "kp": (45.0, 65.0),
        "kd": (0.7, 0.9),
    },
    "testing": {
        "friction": (0.1, 2.0),
        "added_mass": (0.0, 7.0),
        "kp": (40.0, 70.0),
        "kd": (0.6, 1.0),
    },
}


@dataclass
class EnvParams:
    friction: float
    added_mass: float
    kp: float
    kd: float

    def as_array(self) -> np.ndarray:
        return np.array([self.friction, self.added_mass, self.kp, self.kd], dtype=np.float32)

    @classmethod
    def from_array(cls, arr) -> "EnvParams":
        f, m, kp, kd = (float(v) for v in arr)
        return cls(f, m, kp, kd)


def sample_env_params(range_set: str, rng: np.random.Generator) -> EnvParams:
    if range_set not in RANGES:
        raise ValueError(f"unknown range set {range_set!r}; valid: {sorted(RANGES)}")
    r = RANGES[range_set]
    return EnvParams(
        friction=rng.uniform(*r["friction"]),
        added_mass=rng.uniform(*r["added_mass"]),
        kp=rng.uniform(*r["kp"]),
        kd=rng.uniform(*r["kd"]),
    )
