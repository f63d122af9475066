"""Bit-exact binary persistence for trajectory datasets.

Layout (little-endian throughout):
  magic "TERT", version u16, flags u16,
  obs_dim u32, act_dim u32, priv_dim u32, traj_count u32,
  then per trajectory:
    length u32, terrain kind u8, difficulty f32, env params 4*f32,
    then `length` records of
      obs f32[obs_dim], executed action f32[act_dim],
      teacher action f32[act_dim], reward f32, done u8
      (+ torques f32[act_dim] when FLAG_TORQUES is set),
  trailing CRC32 over everything before it.

Flags: bit 0 set = student-rollout source (clear = teacher-rollout),
bit 1 set = records carry applied joint torques (needed for energy metrics).
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field

import numpy as np

from ..sim import KINDS

MAGIC = b"TERT"
VERSION = 1
FLAG_STUDENT = 1 << 0
FLAG_TORQUES = 1 << 1

SOURCES = ("teacher-rollout", "student-rollout")


class TrajectoryFileError(Exception):
    """Base class for trajectory file failures."""


class BadMagicError(TrajectoryFileError):
    pass


class VersionMismatchError(TrajectoryFileError):
    pass


class TruncatedFileError(TrajectoryFileError):
    pass


class ChecksumError(TrajectoryFileError):
    pass


class DimensionMismatchError(TrajectoryFileError):
    pass


@dataclass
class Trajectory:
    """One episode (or episode fragment cut at collection end)."""

    kind: str                      # terrain kind name
    difficulty: float
    env_params: np.ndarray         # (4,) friction, added_mass, kp, kd
    obs: np.ndarray                # (L, obs_dim) f32
    actions: np.ndarray            # (L, act_dim) executed actions
    teacher_actions: np.ndarray    # (L, act_dim) teacher mean-action labels
    rewards: np.ndarray            # (L,) f32
    dones: np.ndarray              # (L,) u8; 1 only at the final record
    torques: np.ndarray | None = None  # (L, act_dim) applied torques, optional
    latents: np.ndarray | None = None  # (L, 12) teacher latent labels; in-memory only

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown terrain kind {self.kind!r}")
        n = len(self.obs)
        for name in ("actions", "teacher_actions", "rewards", "dones"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"trajectory field {name} length != {n}")
        if self.dones[:-1].any():
            raise ValueError("done flag set before the final record")

    def __len__(self) -> int:
        return len(self.obs)


@dataclass
class TrajectoryDataset:
    """A set of trajectories from a single source policy."""

    trajectories: list[Trajectory] = field(default_factory=list)
    source: str = "teacher-rollout"
    obs_dim: int = 18
    act_dim: int = 4
    priv_dim: int = 19

    def __post_init__(self):
        if self.source not in SOURCES:
            raise ValueError(f"unknown dataset source {self.source!r}")

    @property
    def num_timesteps(self) -> int:
        return sum(len(t) for t in self.trajectories)

    def validate(self) -> None:
        """Check the source invariant: teacher rollouts execute the teacher's
        own (label) actions exactly."""
        for t in self.trajectories:
            if t.obs.shape[1] != self.obs_dim or t.actions.shape[1] != self.act_dim:
                raise DimensionMismatchError(
                    f"trajectory dims {t.obs.shape[1]}/{t.actions.shape[1]} != "
                    f"dataset dims {self.obs_dim}/{self.act_dim}"
                )
            if self.source == "teacher-rollout" and not np.array_equal(
                t.actions, t.teacher_actions
            ):
                raise ValueError("teacher-rollout trajectory with executed != teacher action")


def _traj_record_bytes(traj: Trajectory, obs_dim: int, act_dim: int,
                       with_torques: bool) -> bytes:
    n = len(traj)
    cols = obs_dim + 2 * act_dim + 1
    if with_torques:
        cols += act_dim
    flat = np.empty((n, cols), dtype=np.float32)
    flat[:, :obs_dim] = traj.obs
    flat[:, obs_dim:obs_dim + act_dim] = traj.actions
    flat[:, obs_dim + act_dim:obs_dim + 2 * act_dim] = traj.teacher_actions
    flat[:, obs_dim + 2 * act_dim] = traj.rewards
    if with_torques:
        if traj.torques is None:
            raise ValueError("dataset flagged with torques but trajectory has none")
        flat[:, obs_dim + 2 * act_dim + 1:] = traj.torques
    payload = bytearray()
    # interleave f32 rows with the trailing done byte per record
    row_bytes = flat.astype("<f4").tobytes()
    row_len = cols * 4
    for i in range(n):
        payload += row_bytes[i * row_len:(i + 1) * row_len]
        payload += bytes([int(traj.dones[i])])
    return bytes(payload)


def write_trajectories(dataset: TrajectoryDataset, path) -> None:
    dataset.validate()
    with_torques = all(t.torques is not None for t in dataset.trajectories) and bool(
        dataset.trajectories
    )
    flags = (FLAG_STUDENT if dataset.source == "student-rollout" else 0) | (
        FLAG_TORQUES if with_torques else 0
    )
    out = bytearray()
    out += MAGIC
    out += struct.pack("<HHIIII", VERSION, flags, dataset.obs_dim, dataset.act_dim,
                       dataset.priv_dim, len(dataset.trajectories))
    for traj in dataset.trajectories:
        out += struct.pack("<IBf", len(traj), KINDS.index(traj.kind), traj.difficulty)
        out += np.asarray(traj.env_params, dtype="<f4").tobytes()
        out += _traj_record_bytes(traj, dataset.obs_dim, dataset.act_dim, with_torques)
    out += struct.pack("<I", zlib.crc32(bytes(out)) & 0xFFFFFFFF)
    with open(path, "wb") as f:
        f.write(bytes(out))


def read_trajectories(path, expect_obs_dim: int | None = None,
                      expect_act_dim: int | None = None) -> TrajectoryDataset:
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < 4 or blob[:4] != MAGIC:
        raise BadMagicError(f"{path}: not a trajectory file (bad magic)")
    if len(blob) < 24:
        raise TruncatedFileError(f"{path}: header truncated")
    version, flags, obs_dim, act_dim, priv_dim, count = struct.unpack_from("<HHIIII", blob, 4)
    if version != VERSION:
        raise VersionMismatchError(f"{path}: version {version}, expected {VERSION}")
    if expect_obs_dim is not None and obs_dim != expect_obs_dim:
        raise DimensionMismatchError(f"{path}: obs_dim {obs_dim} != expected {expect_obs_dim}")
    if expect_act_dim is not None and act_dim != expect_act_dim:
        raise DimensionMismatchError(f"{path}: act_dim {act_dim} != expected {expect_act_dim}")
    with_torques = bool(flags & FLAG_TORQUES)
    cols = obs_dim + 2 * act_dim + 1 + (act_dim if with_torques else 0)
    record_len = cols * 4 + 1

    # walk the declared lengths first so truncation is reported before CRC
    offset = 24
    lengths = []
    for _ in range(count):
        if offset + 4 + 1 + 4 + 16 > len(blob) - 4:
            raise TruncatedFileError(f"{path}: trajectory header past end of file")
        (n,) = struct.unpack_from("<I", blob, offset)
        lengths.append(n)
        offset += 4 + 1 + 4 + 16 + n * record_len
    if offset + 4 != len(blob):
        raise TruncatedFileError(
            f"{path}: expected {offset + 4} bytes from manifest, file has {len(blob)}"
        )
    stored_crc = struct.unpack_from("<I", blob, len(blob) - 4)[0]
    if zlib.crc32(blob[:-4]) & 0xFFFFFFFF != stored_crc:
        raise ChecksumError(f"{path}: CRC mismatch")

    trajectories = []
    offset = 24
    for n in lengths:
        _, kind_idx, difficulty = struct.unpack_from("<IBf", blob, offset)
        offset += 9
        env_params = np.frombuffer(blob, dtype="<f4", count=4, offset=offset).copy()
        offset += 16
        raw = np.frombuffer(blob, dtype=np.uint8, count=n * record_len, offset=offset)
        offset += n * record_len
        rows = raw.reshape(n, record_len)
        flat = rows[:, : cols * 4].copy().view("<f4").reshape(n, cols)
        dones = rows[:, -1].copy()
        trajectories.append(Trajectory(
            kind=KINDS[kind_idx],
            difficulty=float(difficulty),
            env_params=env_params,
            obs=flat[:, :obs_dim].copy(),
            actions=flat[:, obs_dim:obs_dim + act_dim].copy(),
            teacher_actions=flat[:, obs_dim + act_dim:obs_dim + 2 * act_dim].copy(),
            rewards=flat[:, obs_dim + 2 * act_dim].copy(),
            dones=dones,
            torques=flat[:, obs_dim + 2 * act_dim + 1:].copy() if with_torques else None,
        ))
    return TrajectoryDataset(
        trajectories=trajectories,
        source="student-rollout" if flags & FLAG_STUDENT else "teacher-rollout",
        obs_dim=obs_dim, act_dim=act_dim, priv_dim=priv_dim,
    )
