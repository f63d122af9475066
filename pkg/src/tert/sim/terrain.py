"""Deterministic heightfield terrains.

Five families: smooth slope, rough slope, stairs up, stairs down, discrete
obstacles. Expansion is purely functional: a (kind, difficulty, seed) spec
hashed per grid cell yields the same heightfield every time, with no stored
arrays. x <= 0 is always a flat spawn pad.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

KINDS = ("smooth-slope", "rough-slope", "stairs-up", "stairs-down", "discrete-obstacles")

ARENA = (-1.0, 60.0)
MAX_SLOPE_DEG = 25.0
STAIR_WIDTH = 0.30
STAIR_HEIGHT_MIN = 0.05
STAIR_HEIGHT_GAIN = 0.13
ROUGH_GRID = 0.05
ROUGH_AMP_MIN = 0.02
ROUGH_AMP_GAIN = 0.06
OBSTACLE_CELL = 0.8
OBSTACLE_AMP_MIN = 0.02
OBSTACLE_AMP_GAIN = 0.08


@dataclass(frozen=True)
class TerrainSpec:
    kind: str
    difficulty: float
    seed: int

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown terrain kind {self.kind!r}; valid: {KINDS}")
        if not 0.0 <= self.difficulty <= 1.0:
            raise ValueError(f"difficulty {self.difficulty} outside [0, 1]")


def _splitmix64(z: np.ndarray) -> np.ndarray:
    z = (z + np.uint64(0x9E3779B97F4A7C15)).astype(np.uint64)
    z = ((z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)).astype(np.uint64)
    z = ((z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)).astype(np.uint64)
    return z ^ (z >> np.uint64(31))


def hash01(seed: np.ndarray, index: np.ndarray) -> np.ndarray:
    """Deterministic uniform in [0, 1) from (seed, grid index)."""
    s = np.asarray(seed, dtype=np.uint64)
    i = np.asarray(index, dtype=np.int64).astype(np.uint64)
    mixed = _splitmix64(s ^ (i * np.uint64(0xD1B54A32D192ED03)))
    return (mixed >> np.uint64(11)).astype(np.float64) / float(1 << 53)


def batch_height(kind_idx: np.ndarray, difficulty: np.ndarray, seed: np.ndarray,
                 x: np.ndarray) -> np.ndarray:
    """Vectorized h(x) for per-element (kind, difficulty, seed). Shapes broadcast."""
    kind_idx, difficulty, seed, x = np.broadcast_arrays(
        np.asarray(kind_idx), np.asarray(difficulty, dtype=np.float64),
        np.asarray(seed, dtype=np.uint64), np.asarray(x, dtype=np.float64)
    )
    h = np.zeros(x.shape, dtype=np.float64)
    pos = x > 0.0

    slope = np.tan(np.deg2rad(MAX_SLOPE_DEG) * difficulty)
    step_h = STAIR_HEIGHT_MIN + STAIR_HEIGHT_GAIN * difficulty
    steps = np.floor(x / STAIR_WIDTH)

    m = (kind_idx == 0) & pos  # smooth slope
    h[m] = slope[m] * x[m]

    m = (kind_idx == 1) & pos  # rough slope: slope + value noise on a 5 cm grid
    if m.any():
        amp = ROUGH_AMP_MIN + ROUGH_AMP_GAIN * difficulty[m]
        g = x[m] / ROUGH_GRID
        i0 = np.floor(g).astype(np.int64)
        frac = g - i0
        v0 = 2.0 * hash01(seed[m], i0) - 1.0
        v1 = 2.0 * hash01(seed[m], i0 + 1) - 1.0
        sm = frac * frac * (3.0 - 2.0 * frac)  # smoothstep interpolation
        h[m] = slope[m] * x[m] + amp * (v0 + (v1 - v0) * sm)

    m = (kind_idx == 2) & pos  # stairs up
    h[m] = step_h[m] * steps[m]

    m = (kind_idx == 3) & pos  # stairs down
    h[m] = -step_h[m] * steps[m]

    m = (kind_idx == 4) & pos  # discrete obstacles: piecewise-constant cells
    if m.any():
        amp = OBSTACLE_AMP_MIN + OBSTACLE_AMP_GAIN * difficulty[m]
        cell = np.floor(x[m] / OBSTACLE_CELL).astype(np.int64)
        h[m] = amp * (2.0 * hash01(seed[m], cell) - 1.0)

    return h


class Heightfield:
    """Callable terrain expanded from a spec; h(x) for scalar or array x."""

    def __init__(self, spec: TerrainSpec):
        self.spec = spec
        self.kind_idx = KINDS.index(spec.kind)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        return batch_height(
            np.full(x.shape, self.kind_idx),
            np.full(x.shape, self.spec.difficulty),
            np.full(x.shape, self.spec.seed, dtype=np.uint64),
            x,
        )

    def grid(self, resolution: float = 0.01) -> tuple[np.ndarray, np.ndarray]:
        """(x, h(x)) samples over the arena at the given resolution."""
        xs = np.arange(ARENA[0], ARENA[1] + resolution / 2, resolution)
        return xs, self(xs)


def generate_terrain(spec: TerrainSpec) -> Heightfield:
    return Heightfield(spec)
