"""Online correction: DAgger-style aggregation of student rollouts with
teacher action labels."""

from __future__ import annotations

import numpy as np

from ..io.trajfile import TrajectoryDataset
from ..models.teacher import TeacherBundle
from ..models.transformer import CausalTransformer
from ..core import Tensor
from ..sim.env import OBS_SCALE
from .collect import _EpisodeAccumulator, make_collection_env
from .config import DistillConfig
from .pretrain import WindowSampler, train_on_windows


class BatchWindowPolicy:
    """Lockstep sliding windows for a batch of envs.

    Fixed-shape batches: windows are tail-padded with zeros and each env's
    prediction is read at its own last valid observation position (causality
    makes the padding inert). With ``head="latent"`` the transformer output is
    fed to the frozen teacher policy body instead of being the action itself.
    """

    def __init__(self, model: CausalTransformer, num_envs: int,
                 head: str = "action", body: TeacherBundle | None = None):
        if head not in ("action", "latent"):
            raise ValueError(f"unknown head {head!r}")
        if head == "latent" and body is None:
            raise ValueError("latent head requires the frozen teacher body")
        self.model = model
        self.head = head
        self.body = body
        spec = model.spec
        self.window = spec.context_length
        self.obs_win = np.zeros((num_envs, self.window, spec.obs_dim), dtype=np.float32)
        self.act_win = np.zeros((num_envs, self.window, spec.act_dim), dtype=np.float32)
        self.lengths = np.zeros(num_envs, dtype=np.int64)

    def reset_env(self, i: int) -> None:
        self.lengths[i] = 0
        self.obs_win[i] = 0.0
        self.act_win[i] = 0.0

    def act(self, obs: np.ndarray) -> np.ndarray:
        n = len(obs)
        full = self.lengths >= self.window
        for i in np.flatnonzero(full):  # slide: drop the oldest pair
            self.obs_win[i, :-1] = self.obs_win[i, 1:]
            self.act_win[i, :-1] = self.act_win[i, 1:]
        self.lengths = np.minimum(self.lengths, self.window - 1)
        self.obs_win[np.arange(n), self.lengths] = obs
        self.act_win[np.arange(n), self.lengths] = 0.0  # pending action slot
        out = self.model.forward(self.obs_win, self.act_win, train=False)
        pred = out.actions.data[np.arange(n), self.lengths]
        if self.head == "latent":
            obs_t = Tensor(obs.astype(np.float32) * OBS_SCALE[: obs.shape[1]])
            mean, _ = self.body.policy.forward(obs_t, Tensor(pred))
            action = mean.data.copy()
        else:
            action = pred.copy()
        self.act_win[np.arange(n), self.lengths] = action
        self.lengths += 1
        return action


def rollout_student(policy: BatchWindowPolicy, teacher: TeacherBundle,
                    num_timesteps: int, kinds=None, range_set: str = "training",
                    seed: int = 0, num_envs: int = 64,
                    difficulty_max: float = 1.0,
                    record_latents: bool = False) -> TrajectoryDataset:
    """Student acts; teacher labels every visited state with its mean action."""
    env = make_collection_env(num_envs, kinds, range_set, seed)
    diff_rng = np.random.default_rng((seed, 7))
    env.set_difficulty(diff_rng.uniform(0.0, difficulty_max, size=env.n))
    obs, priv = env.reset()
    for i in range(env.n):
        policy.reset_env(i)
    acc = [_EpisodeAccumulator(env, i) for i in range(env.n)]
    trajectories = []
    banked = 0
    while banked < num_timesteps:
        action = policy.act(obs)
        labels = teacher.mean_action(obs, priv)
        latents = teacher.latent_np(priv) if record_latents else [None] * env.n
        env.set_difficulty(diff_rng.uniform(0.0, difficulty_max, size=env.n),
                           immediate=False)
        try:
            res = env.step(action)
        except FloatingPointError:
            bad = ~(
                np.isfinite(env.z) & np.isfinite(env.vx)
                & np.isfinite(env.q).all(axis=1) & np.isfinite(env.qd).all(axis=1)
            )
            env._reset_envs(bad)
            obs, priv = env.observe(), env.privileged()
            for i in np.flatnonzero(bad):
                acc[i] = _EpisodeAccumulator(env, i)
                policy.reset_env(i)
            continue
        for i in range(env.n):
            acc[i].push(obs[i], action[i], labels[i], res.reward[i],
                        res.torques[i], latents[i])
        banked += env.n
        for i in np.flatnonzero(res.done):
            traj = acc[i].finish(terminated=True)
            if traj is not None:
                trajectories.append(traj)
            acc[i] = _EpisodeAccumulator(env, i)
            policy.reset_env(i)
        obs, priv = res.obs, res.priv
    for a in acc:
        traj = a.finish(terminated=False)
        if traj is not None:
            trajectories.append(traj)
    return TrajectoryDataset(trajectories=trajectories, source="student-rollout",
                             obs_dim=teacher.obs_dim, act_dim=teacher.act_dim,
                             priv_dim=teacher.priv_dim)


def action_gap(dataset: TrajectoryDataset) -> float:
    """Mean Euclidean distance between executed and teacher actions."""
    total, count = 0.0, 0
    for t in dataset.trajectories:
        total += float(np.linalg.norm(t.actions - t.teacher_actions, axis=1).sum())
        count += len(t)
    return total / max(1, count)


def correct_online(model: CausalTransformer, teacher: TeacherBundle,
                   cfg: DistillConfig, kinds=None, range_set: str = "training",
                   seed: int = 0, base_datasets: list[TrajectoryDataset] | None = None,
                   head: str = "action", quiet: bool = True):
    """DAgger loop: per round, roll out the student, label with the teacher,
    aggregate, and train on everything collected so far.

    Returns (model, info) where info carries per-round action gaps (measured on
    the fresh rollout before training on it), curves, and the aggregate size.
    """
    label = "action" if head == "action" else "latent"
    aggregate: list[TrajectoryDataset] = list(base_datasets or [])
    info = {"gaps": [], "curves": [], "dataset_sizes": []}
    for rnd in range(cfg.correction_rounds):
        policy = BatchWindowPolicy(model, cfg.num_envs, head=head, body=teacher)
        rollout = rollout_student(
            policy, teacher, cfg.correction_timesteps, kinds=kinds,
            range_set=range_set, seed=seed * 1000 + rnd, num_envs=cfg.num_envs,
            record_latents=(label == "latent"),
        )
        info["gaps"].append(action_gap(rollout))
        aggregate.append(rollout)
        info["dataset_sizes"].append(sum(ds.num_timesteps for ds in aggregate))
        sampler = WindowSampler(aggregate, cfg.window, label=label)
        curve = train_on_windows(model, sampler, cfg, cfg.correction_updates,
                                 seed, dropout_offset=(rnd + 1) * 1_000_000,
                                 quiet=quiet)
        info["curves"].append(curve)
        if not quiet:
            print(f"round {rnd}: gap={info['gaps'][-1]:.4f} "
                  f"aggregate={info['dataset_sizes'][-1]} steps", flush=True)
    return model, info
