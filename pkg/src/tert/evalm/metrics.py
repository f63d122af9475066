"""Per-trajectory metrics: return, smoothness, energy."""

from __future__ import annotations

import numpy as np

from ..io.trajfile import Trajectory


def traj_return(traj: Trajectory) -> float:
    return float(np.asarray(traj.rewards, dtype=np.float64).sum())


def smoothness(traj: Trajectory) -> float:
    """Mean Euclidean norm of consecutive action differences."""
    actions = np.asarray(traj.actions, dtype=np.float64)
    if len(actions) < 2:
        raise ValueError("smoothness needs a trajectory of length >= 2")
    deltas = np.linalg.norm(np.diff(actions, axis=0), axis=1)
    return float(deltas.mean())


def energy(traj: Trajectory, qd_slice: slice = slice(10, 14)) -> float:
    """Mean over control steps of sum_joints |tau_i * qd_i| (mechanical power
    magnitude, W). Joint velocities are read from the observation layout."""
    if traj.torques is None:
        raise ValueError("energy needs torques recorded in the trajectory")
    tau = np.asarray(traj.torques, dtype=np.float64)
    qd = np.asarray(traj.obs, dtype=np.float64)[:, qd_slice]
    return float(np.abs(tau * qd).sum(axis=1).mean())


def success(traj: Trajectory, episode_cap: int) -> bool:
    """Non-fall completion: the episode ran to the cap or was cut by the
    collector without terminating."""
    fell = bool(traj.dones[-1]) and len(traj) < episode_cap
    return not fell
