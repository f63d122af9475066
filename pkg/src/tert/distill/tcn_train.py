"""TCN students: RMA-style latent estimation and end-to-end action cloning."""

from __future__ import annotations

import numpy as np

from ..core import AdamState, Tape, Tensor, adam_step, backward, clip_grad_norm
from ..core import tensor as T
from ..io.trajfile import TrajectoryDataset
from ..models.tcn import TCN
from ..models.teacher import TeacherBundle
from ..sim.env import OBS_SCALE
from .config import DistillConfig
from .correct import action_gap, rollout_student
from .pretrain import schedule_lr


class TcnHistorySampler:
    """Samples (history, label) pairs: history rows are (obs, action) for the
    last H steps ending at the target step, whose action slot is zero
    (pending). Front-padded with zeros near episode starts."""

    def __init__(self, datasets: list[TrajectoryDataset], history: int,
                 label: str = "latent"):
        if label not in ("action", "latent"):
            raise ValueError(f"unknown label kind {label!r}")
        self.history = history
        self.label = label
        self.trajectories = []
        for ds in datasets:
            ds.validate()
            self.trajectories.extend(ds.trajectories)
        if not self.trajectories:
            raise ValueError("no trajectories to sample from")
        if label == "latent" and any(t.latents is None for t in self.trajectories):
            raise ValueError("latent labels requested but trajectories carry none")
        traj_ids, steps = [], []
        for j, t in enumerate(self.trajectories):
            traj_ids.append(np.full(len(t), j, dtype=np.int64))
            steps.append(np.arange(len(t), dtype=np.int64))
        self.traj_ids = np.concatenate(traj_ids)
        self.steps = np.concatenate(steps)
        self.obs_dim = self.trajectories[0].obs.shape[1]
        self.act_dim = self.trajectories[0].actions.shape[1]
        self.in_dim = self.obs_dim + self.act_dim
        self.label_dim = (self.act_dim if label == "action"
                          else self.trajectories[0].latents.shape[1])

    @property
    def num_samples(self) -> int:
        return len(self.traj_ids)

    def _assemble(self, picks: np.ndarray):
        bsz, hist = len(picks), self.history
        feats = np.zeros((bsz, hist, self.in_dim), dtype=np.float32)
        labels = np.zeros((bsz, self.label_dim), dtype=np.float32)
        for b, p in enumerate(picks):
            traj = self.trajectories[self.traj_ids[p]]
            t = self.steps[p]
            lo = max(0, t - hist + 1)
            n = t - lo + 1
            feats[b, hist - n:, : self.obs_dim] = traj.obs[lo:t + 1]
            if n > 1:  # action slot of the target step stays zero (pending)
                feats[b, hist - n: hist - 1, self.obs_dim:] = traj.actions[lo:t]
            src = traj.teacher_actions if self.label == "action" else traj.latents
            labels[b] = src[t]
        return feats, labels

    def sample(self, rng: np.random.Generator, batch_size: int):
        return self._assemble(rng.integers(0, self.num_samples, size=batch_size))

    def deterministic_batch(self, seed: int, batch_size: int):
        rng = np.random.default_rng((seed, 11))
        picks = rng.choice(self.num_samples, size=min(batch_size, self.num_samples),
                           replace=False)
        return self._assemble(np.sort(picks))


class TcnBatchPolicy:
    """Lockstep rollout wrapper mirroring BatchWindowPolicy for the TCN."""

    def __init__(self, tcn: TCN, num_envs: int, head: str = "latent",
                 body: TeacherBundle | None = None):
        if head not in ("action", "latent"):
            raise ValueError(f"unknown head {head!r}")
        if head == "latent" and body is None:
            raise ValueError("latent head requires the frozen teacher body")
        self.tcn = tcn
        self.head = head
        self.body = body
        self.obs_dim = tcn.in_dim - (body.act_dim if body else 4)
        self.buffer = np.zeros((num_envs, tcn.history, tcn.in_dim), dtype=np.float32)

    def reset_env(self, i: int) -> None:
        self.buffer[i] = 0.0

    def act(self, obs: np.ndarray) -> np.ndarray:
        n = len(obs)
        self.buffer[:, :-1] = self.buffer[:, 1:]
        self.buffer[:, -1] = 0.0
        self.buffer[:, -1, : self.obs_dim] = obs
        pred = self.tcn.forward(self.buffer).data
        if self.head == "latent":
            obs_t = Tensor(obs.astype(np.float32) * OBS_SCALE[: obs.shape[1]])
            mean, _ = self.body.policy.forward(obs_t, Tensor(pred))
            action = mean.data.copy()
        else:
            action = pred.copy()
        self.buffer[np.arange(n), -1, self.obs_dim:] = action
        return action


def tcn_eval_mse(tcn: TCN, sampler: TcnHistorySampler, seed: int,
                 batch_size: int = 512) -> float:
    feats, labels = sampler.deterministic_batch(seed, batch_size)
    total, count = 0.0, 0
    for start in range(0, len(feats), 128):
        sl = slice(start, start + 128)
        pred = tcn.forward(feats[sl]).data
        total += float(((pred - labels[sl]) ** 2).sum())
        count += labels[sl].size
    return total / count


def train_tcn_on_histories(tcn: TCN, sampler: TcnHistorySampler, cfg: DistillConfig,
                           updates: int, seed: int, quiet: bool = True) -> list[dict]:
    adam = AdamState(tcn.params)
    rng = np.random.default_rng((seed, 19))
    curve = []
    for u in range(updates):
        feats, labels = sampler.sample(rng, cfg.batch_size)
        lr = schedule_lr(cfg.lr, u, updates, cfg.warmup_updates)
        with Tape() as tape:
            pred = tcn.forward(feats)
            loss = T.mse(pred, Tensor(labels))
        loss_val = float(loss.data)
        if not np.isfinite(loss_val):
            raise FloatingPointError(f"non-finite TCN loss at update {u}")
        backward(tape, loss)
        grads = {k: p.grad_or_zero() for k, p in tcn.params.items()}
        for p in tcn.params.values():
            p.zero_grad()
        clip_grad_norm(grads, 1.0)
        adam_step(tcn.params, grads, adam, lr)
        curve.append({"update": u, "loss": loss_val, "lr": lr})
        if not quiet and u % cfg.eval_every == 0:
            print(f"tcn update {u:6d} loss={loss_val:.5f}", flush=True)
    return curve


def train_tcn_student(teacher: TeacherBundle, cfg: DistillConfig,
                      kinds=None, range_set: str = "training", seed: int = 0,
                      base_datasets: list[TrajectoryDataset] | None = None,
                      quiet: bool = True):
    """RMA-style adaptation: TCN regresses the privileged latent on on-policy
    rollouts of (frozen teacher body + TCN latent), iterated like DAgger.

    Returns (tcn, info) with per-round held-out latent MSE before/after
    training. The deployment path reads observations and executed actions
    only — never PrivilegedInfo.
    """
    tcn = TCN(teacher.obs_dim + teacher.act_dim, teacher.latent_dim,
              rng=np.random.default_rng((seed, 23)),
              in_scale=tuple(OBS_SCALE) + (1.0,) * teacher.act_dim)
    aggregate: list[TrajectoryDataset] = list(base_datasets or [])
    info = {"latent_mse": [], "curves": [], "gaps": []}
    for rnd in range(cfg.correction_rounds):
        policy = TcnBatchPolicy(tcn, cfg.num_envs, head="latent", body=teacher)
        rollout = rollout_student(
            policy, teacher, cfg.correction_timesteps, kinds=kinds,
            range_set=range_set, seed=seed * 1000 + rnd, num_envs=cfg.num_envs,
            record_latents=True,
        )
        info["gaps"].append(action_gap(rollout))
        aggregate.append(rollout)
        sampler = TcnHistorySampler(aggregate, tcn.history, label="latent")
        info["latent_mse"].append(tcn_eval_mse(tcn, sampler, seed))
        curve = train_tcn_on_histories(tcn, sampler, cfg, cfg.correction_updates,
                                       seed + rnd, quiet=quiet)
        info["curves"].append(curve)
        if not quiet:
            print(f"tcn round {rnd}: pre-train latent mse={info['latent_mse'][-1]:.5f}",
                  flush=True)
    sampler = TcnHistorySampler(aggregate, tcn.history, label="latent")
    info["latent_mse"].append(tcn_eval_mse(tcn, sampler, seed))
    return tcn, info
