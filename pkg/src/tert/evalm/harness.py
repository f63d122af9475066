"""Deterministic evaluation over terrain kinds and difficulty buckets."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..distill.correct import BatchWindowPolicy
from ..distill.tcn_train import TcnBatchPolicy
from ..io.trajfile import Trajectory, TrajectoryDataset
from ..models.checkpoint import PolicyCheckpoint, UnknownModelKindError
from ..models.mlp import GaussianPolicy
from ..models.tcn import TCN
from ..models.teacher import TeacherBundle
from ..models.transformer import CausalTransformer, TransformerSpec
from ..sim import KINDS, TerrainSpec, VecEnv
from ..sim.env import EPISODE_CAP
from .metrics import energy, smoothness, success, traj_return

METRIC_HEADER = ["policy", "terrain", "difficulty", "episodes",
                 "return_mean", "return_std", "smooth_mean", "smooth_std",
                 "energy_mean", "energy_std", "success_rate"]

DEFAULT_DIFFICULTIES = (0.0, 0.25, 0.5, 0.75, 1.0)


@dataclass
class MetricRow:
    policy: str
    terrain: str
    difficulty: float
    episodes: int
    return_mean: float
    return_std: float
    smooth_mean: float
    smooth_std: float
    energy_mean: float
    energy_std: float
    success_rate: float

    def __post_init__(self):
        if self.episodes <= 0:
            raise ValueError("MetricRow.episodes must be > 0")
        for name in ("return_std", "smooth_std", "energy_std"):
            if getattr(self, name) < 0:
                raise ValueError(f"MetricRow.{name} must be >= 0")

    def as_list(self) -> list:
        return [self.policy, self.terrain, self.difficulty, self.episodes,
                self.return_mean, self.return_std, self.smooth_mean,
                self.smooth_std, self.energy_mean, self.energy_std,
                self.success_rate]


class _BodyShim:
    """Minimal stand-in for TeacherBundle when only the policy body exists."""

    def __init__(self, policy: GaussianPolicy, act_dim: int):
        self.policy = policy
        self.act_dim = act_dim


def _body_from_ckpt(ckpt: PolicyCheckpoint) -> _BodyShim:
    body_spec = ckpt.spec["body"]
    policy = GaussianPolicy(body_spec["obs_dim"], body_spec["latent_dim"],
                            body_spec["act_dim"], rng=np.random.default_rng(0))
    for name, p in policy.params.items():
        p.data = ckpt.tensors[name].copy()
    return _BodyShim(policy, body_spec["act_dim"])


class EvalPolicy:
    """Uniform act/reset interface over every checkpointable policy kind."""

    def __init__(self, kind: str, name: str, stepper, uses_priv: bool):
        self.kind = kind
        self.name = name
        self._stepper = stepper
        self.uses_priv = uses_priv

    def reset(self, num_envs: int):
        self._impl = self._stepper(num_envs)

    def reset_env(self, i: int) -> None:
        reset = getattr(self._impl, "reset_env", None)
        if reset is not None:
            reset(i)

    def act(self, obs: np.ndarray, priv: np.ndarray | None) -> np.ndarray:
        if self.uses_priv:
            return self._impl(obs, priv)
        return self._impl.act(obs)


def load_eval_policy(ckpt: PolicyCheckpoint, name: str | None = None) -> EvalPolicy:
    kind = ckpt.kind
    name = name or ckpt.metadata.get("variant", kind)
    if kind == "teacher":
        bundle = TeacherBundle.from_checkpoint(ckpt)
        return EvalPolicy(kind, name, lambda n: lambda obs, priv:
                          bundle.mean_action(obs, priv), uses_priv=True)
    if kind in ("transformer", "latent-transformer"):
        spec_dict = {k: v for k, v in ckpt.spec.items() if k != "body"}
        model = CausalTransformer(TransformerSpec(**spec_dict))
        for pname in model.params:
            model.params[pname].data = ckpt.tensors[pname].copy()
        if kind == "latent-transformer":
            body = _body_from_ckpt(ckpt)
            return EvalPolicy(kind, name,
                              lambda n: BatchWindowPolicy(model, n, head="latent",
                                                          body=body),
                              uses_priv=False)
        return EvalPolicy(kind, name, lambda n: BatchWindowPolicy(model, n),
                          uses_priv=False)
    if kind in ("tcn-latent", "tcn-student"):
        tcn = TCN(ckpt.spec["in_dim"], ckpt.spec["out_dim"],
                  history=ckpt.spec["history"],
                  in_scale=ckpt.spec.get("in_scale"))
        for pname in tcn.params:
            tcn.params[pname].data = ckpt.tensors[pname].copy()
        if kind == "tcn-latent":
            body = _body_from_ckpt(ckpt)
            return EvalPolicy(kind, name,
                              lambda n: TcnBatchPolicy(tcn, n, head="latent",
                                                       body=body),
                              uses_priv=False)
        return EvalPolicy(kind, name, lambda n: TcnBatchPolicy(tcn, n, head="action"),
                          uses_priv=False)
    raise UnknownModelKindError(f"cannot evaluate checkpoint kind {kind!r}")


def run_episodes(policy: EvalPolicy, kind: str, difficulty: float, episodes: int,
                 seed: int, range_set: str = "testing",
                 max_steps: int = EPISODE_CAP) -> list[Trajectory]:
    """One env per episode, frozen on termination; deterministic policy mode."""
    specs = [TerrainSpec(kind, difficulty, 9000 + 13 * i) for i in range(episodes)]
    env = VecEnv(specs, range_set=range_set, seed=seed, auto_reset=False)
    obs, priv = env.reset()
    policy.reset(episodes)
    records = [{"obs": [], "act": [], "rew": [], "tau": []} for _ in range(episodes)]
    meta = [
        {"params": np.array([env.friction[i], env.added_mass[i], env.kp[i], env.kd[i]],
                            dtype=np.float32)}
        for i in range(episodes)
    ]
    alive = np.ones(episodes, dtype=bool)
    fell = np.zeros(episodes, dtype=bool)
    for _ in range(max_steps):
        action = policy.act(obs, priv)
        res = env.step(action)
        for i in np.flatnonzero(alive):
            records[i]["obs"].append(obs[i])
            records[i]["act"].append(action[i])
            records[i]["rew"].append(res.reward[i])
            records[i]["tau"].append(res.torques[i])
        newly_done = alive & res.done
        fell |= newly_done & (env.steps < max_steps)
        alive &= ~res.done
        obs, priv = res.obs, res.priv
        if not alive.any():
            break
    trajs = []
    for i in range(episodes):
        n = len(records[i]["obs"])
        dones = np.zeros(n, dtype=np.uint8)
        dones[-1] = 1  # every evaluation episode runs to termination or the cap
        trajs.append(Trajectory(
            kind=kind, difficulty=difficulty, env_params=meta[i]["params"],
            obs=np.stack(records[i]["obs"]).astype(np.float32),
            actions=np.stack(records[i]["act"]).astype(np.float32),
            teacher_actions=np.stack(records[i]["act"]).astype(np.float32),
            rewards=np.asarray(records[i]["rew"], dtype=np.float32),
            dones=dones,
            torques=np.stack(records[i]["tau"]).astype(np.float32),
        ))
    return trajs


def evaluate(policy: EvalPolicy | PolicyCheckpoint, kinds=None,
             difficulties=DEFAULT_DIFFICULTIES, episodes: int = 20,
             seed: int = 0, range_set: str = "testing",
             max_steps: int = EPISODE_CAP):
    """Returns (MetricRow list, {(kind, difficulty): TrajectoryDataset})."""
    if isinstance(policy, PolicyCheckpoint):
        policy = load_eval_policy(policy)
    kinds = kinds or list(KINDS)
    rows, raw = [], {}
    for kind in kinds:
        for diff in difficulties:
            trajs = run_episodes(policy, kind, float(diff), episodes,
                                 seed, range_set, max_steps)
            rets = np.array([traj_return(t) for t in trajs])
            smooths = np.array([smoothness(t) for t in trajs])
            energies = np.array([energy(t) for t in trajs])
            succ = np.array([success(t, max_steps) for t in trajs])
            rows.append(MetricRow(
                policy=policy.name, terrain=kind, difficulty=float(diff),
                episodes=episodes,
                return_mean=float(rets.mean()), return_std=float(rets.std()),
                smooth_mean=float(smooths.mean()), smooth_std=float(smooths.std()),
                energy_mean=float(energies.mean()), energy_std=float(energies.std()),
                success_rate=float(succ.mean()),
            ))
            raw[(kind, float(diff))] = TrajectoryDataset(
                trajs, source="student-rollout" if not policy.uses_priv
                else "teacher-rollout")
    return rows, raw


def write_metric_rows(rows: list[MetricRow], path) -> None:
    from ..io.csvout import export_csv

    export_csv(METRIC_HEADER, [r.as_list() for r in rows], path)
