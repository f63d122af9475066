"""Teacher rollout collection over varied terrains."""

from __future__ import annotations

import sys

import numpy as np

from ..io.trajfile import Trajectory, TrajectoryDataset
from ..models.teacher import TeacherBundle
from ..sim import KINDS, TerrainSpec, VecEnv


class _EpisodeAccumulator:
    """Per-env growing record of the episode in progress."""

    def __init__(self, env: VecEnv, i: int):
        self.kind = KINDS[env.kind_idx[i]]
        self.difficulty = float(env.difficulty[i])
        self.env_params = np.array(
            [env.friction[i], env.added_mass[i], env.kp[i], env.kd[i]], dtype=np.float32
        )
        self.obs, self.actions, self.teacher_actions = [], [], []
        self.rewards, self.torques, self.latents = [], [], []

    def push(self, obs, action, teacher_action, reward, torque, latent):
        self.obs.append(obs)
        self.actions.append(action)
        self.teacher_actions.append(teacher_action)
        self.rewards.append(reward)
        self.torques.append(torque)
        if latent is not None:
            self.latents.append(latent)

    def finish(self, terminated: bool) -> Trajectory | None:
        n = len(self.obs)
        if n == 0:
            return None
        dones = np.zeros(n, dtype=np.uint8)
        if terminated:
            dones[-1] = 1
        return Trajectory(
            kind=self.kind,
            difficulty=self.difficulty,
            env_params=self.env_params,
            obs=np.stack(self.obs).astype(np.float32),
            actions=np.stack(self.actions).astype(np.float32),
            teacher_actions=np.stack(self.teacher_actions).astype(np.float32),
            rewards=np.asarray(self.rewards, dtype=np.float32),
            dones=dones,
            torques=np.stack(self.torques).astype(np.float32),
            latents=np.stack(self.latents).astype(np.float32) if self.latents else None,
        )


def make_collection_env(num_envs: int, kinds: list[str] | None, range_set: str,
                        seed: int) -> VecEnv:
    kinds = kinds or list(KINDS)
    specs = [TerrainSpec(kinds[i % len(kinds)], 0.0, 5000 + i) for i in range(num_envs)]
    env = VecEnv(specs, range_set=range_set, seed=seed)
    return env


def collect_teacher_dataset(teacher: TeacherBundle, num_timesteps: int,
                            kinds: list[str] | None = None,
                            range_set: str = "training",
                            seed: int = 0, num_envs: int = 64,
                            difficulty_max: float = 1.0,
                            record_latents: bool = False,
                            quiet: bool = True) -> TrajectoryDataset:
    """Roll out the deterministic (mean-action) teacher until ``num_timesteps``
    steps are banked. Episodes failing with non-finite state are dropped and
    their envs re-seeded; collection continues."""
    env = make_collection_env(num_envs, kinds, range_set, seed)
    diff_rng = np.random.default_rng((seed, 7))
    env.set_difficulty(diff_rng.uniform(0.0, difficulty_max, size=env.n))
    obs, priv = env.reset()
    acc = [_EpisodeAccumulator(env, i) for i in range(env.n)]
    trajectories: list[Trajectory] = []
    banked = 0
    while banked < num_timesteps:
        action = teacher.mean_action(obs, priv)
        latents = teacher.latent_np(priv) if record_latents else [None] * env.n
        env.set_difficulty(diff_rng.uniform(0.0, difficulty_max, size=env.n),
                           immediate=False)
        try:
            res = env.step(action)
        except FloatingPointError as exc:
            if not quiet:
                print(f"collect: dropping diverged episodes ({exc})", file=sys.stderr)
            bad = ~(
                np.isfinite(env.z) & np.isfinite(env.vx)
                & np.isfinite(env.q).all(axis=1) & np.isfinite(env.qd).all(axis=1)
            )
            env._reset_envs(bad)
            obs, priv = env.observe(), env.privileged()
            for i in np.flatnonzero(bad):
                acc[i] = _EpisodeAccumulator(env, i)
            continue
        for i in range(env.n):
            acc[i].push(obs[i], action[i], action[i], res.reward[i],
                        res.torques[i], latents[i])
        banked += env.n
        for i in np.flatnonzero(res.done):
            traj = acc[i].finish(terminated=True)
            if traj is not None:
                trajectories.append(traj)
            acc[i] = _EpisodeAccumulator(env, i)
        obs, priv = res.obs, res.priv
    for a in acc:  # bank unfinished fragments (done stays 0)
        traj = a.finish(terminated=False)
        if traj is not None:
            trajectories.append(traj)
    return TrajectoryDataset(trajectories=trajectories, source="teacher-rollout",
                             obs_dim=teacher.obs_dim, act_dim=teacher.act_dim,
                             priv_dim=teacher.priv_dim)
