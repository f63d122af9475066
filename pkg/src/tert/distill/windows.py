"""Uniform window sampling over trajectory datasets.

Windows never cross episode boundaries. Short trajectories contribute a single
window of their full length; batches are padded at the tail and masked, which
is loss-neutral for a causal model.
"""

from __future__ import annotations

import numpy as np

from ..io.trajfile import TrajectoryDataset


class WindowSampler:
    def __init__(self, datasets: list[TrajectoryDataset], window: int,
                 label: str = "action"):
        if label not in ("action", "latent"):
            raise ValueError(f"unknown label kind {label!r}")
        self.window = window
        self.label = label
        self.trajectories = []
        for ds in datasets:
            ds.validate()
            self.trajectories.extend(ds.trajectories)
        if not self.trajectories:
            raise ValueError("no trajectories to sample from")
        if label == "latent" and any(t.latents is None for t in self.trajectories):
            raise ValueError("latent labels requested but trajectories carry none")
        # flat index of (trajectory, start) pairs, uniform over all windows
        traj_ids, starts = [], []
        for j, t in enumerate(self.trajectories):
            n_windows = max(1, len(t) - window + 1)
            traj_ids.append(np.full(n_windows, j, dtype=np.int64))
            starts.append(np.arange(n_windows, dtype=np.int64))
        self.traj_ids = np.concatenate(traj_ids)
        self.starts = np.concatenate(starts)
        self.obs_dim = self.trajectories[0].obs.shape[1]
        self.act_dim = self.trajectories[0].actions.shape[1]
        self.label_dim = (self.act_dim if label == "action"
                          else self.trajectories[0].latents.shape[1])
        # contiguous copies with `window` zero rows between trajectories so a
        # whole batch of windows is one fancy-indexed gather
        offsets, pos = [], 0
        for t in self.trajectories:
            offsets.append(pos)
            pos += len(t) + window
        self._offsets = np.asarray(offsets, dtype=np.int64)
        self._lengths = np.asarray([len(t) for t in self.trajectories],
                                   dtype=np.int64)
        self._obs_flat = np.zeros((pos, self.obs_dim), dtype=np.float32)
        self._act_flat = np.zeros((pos, self.act_dim), dtype=np.float32)
        self._label_flat = np.zeros((pos, self.label_dim), dtype=np.float32)
        for off, t in zip(offsets, self.trajectories):
            self._obs_flat[off:off + len(t)] = t.obs
            self._act_flat[off:off + len(t)] = t.actions
            src = t.teacher_actions if label == "action" else t.latents
            self._label_flat[off:off + len(t)] = src

    @property
    def num_windows(self) -> int:
        return len(self.traj_ids)

    def _assemble(self, picks: np.ndarray):
        w = self.window
        tid = self.traj_ids[picks]
        s = self.starts[picks]
        rows = (self._offsets[tid] + s)[:, None] + np.arange(w)
        n = np.minimum(w, self._lengths[tid] - s)
        mask = (np.arange(w) < n[:, None])[..., None].astype(np.float32)
        return (self._obs_flat[rows], self._act_flat[rows],
                self._label_flat[rows], mask)

    def sample(self, rng: np.random.Generator, batch_size: int):
        """Returns (obs (B,T,O), executed actions (B,T,A), labels (B,T,L),
        mask (B,T,1))."""
        picks = rng.integers(0, self.num_windows, size=batch_size)
        return self._assemble(picks)

    def deterministic_batch(self, seed: int, batch_size: int):
        """A fixed batch for held-out evaluation."""
        rng = np.random.default_rng((seed, 11))
        picks = rng.choice(self.num_windows, size=min(batch_size, self.num_windows),
                           replace=False)
        return self._assemble(np.sort(picks))
