"""Generalized advantage estimation."""

from __future__ import annotations

import numpy as np


def compute_gae(rewards: np.ndarray, values: np.ndarray, dones: np.ndarray,
                gamma: float, lam: float) -> tuple[np.ndarray, np.ndarray]:
    """Standard GAE recursion.

    ``rewards``/``dones``: (T, ...), ``values``: (T+1, ...) including the
    bootstrap value for the state after the last step. ``done`` at t cuts
    bootstrapping through t+1. Returns (advantages, value_targets), both
    un-normalized.
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    dones = np.asarray(dones, dtype=bool)
    horizon = rewards.shape[0]
    if values.shape[0] != horizon + 1 or dones.shape != rewards.shape:
        raise ValueError(
            f"compute_gae: rewards {rewards.shape}, values {values.shape}, dones {dones.shape}"
        )
    adv = np.zeros_like(rewards)
    running = np.zeros_like(rewards[0])
    for t in range(horizon - 1, -1, -1):
        alive = ~dones[t]
        delta = rewards[t] + gamma * values[t + 1] * alive - values[t]
        running = delta + gamma * lam * alive * running
        adv[t] = running
    return adv, adv + values[:-1]


def gae_bruteforce(rewards, values, dones, gamma, lam):
    """Independent double-loop oracle for compute_gae (test use)."""
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    dones = np.asarray(dones, dtype=bool)
    horizon = rewards.shape[0]
    adv = np.zeros_like(rewards)
    for t in range(horizon):
        total = np.zeros_like(rewards[0])
        weight = 1.0
        for k in range(t, horizon):
            alive_k = ~dones[k]
            delta = rewards[k] + gamma * values[k + 1] * alive_k - values[k]
            total = total + weight * delta
            weight = weight * gamma * lam
            if np.ndim(alive_k) == 0:
                if not alive_k:
                    break
            else:
                weight = weight * alive_k  # zero continuation past a done
        adv[t] = total
    return adv, adv + values[:-1]


def normalize_advantages(adv: np.ndarray) -> np.ndarray:
    """Batch-normalize to zero mean, unit std."""
    flat = adv.astype(np.float64)
    return ((flat - flat.mean()) / (flat.std() + 1e-8)).astype(np.float32)
