"""Joint PPO training of the privileged encoder, teacher policy, and critic."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from ..core import AdamState, Tape, Tensor, adam_step, backward, clip_grad_norm
from ..core import tensor as T
from ..models.teacher import TeacherBundle, gaussian_logp_np
from ..sim import KINDS, TerrainSpec, VecEnv

LOG_2PI_E = float(np.log(2.0 * np.pi * np.e))

# the critic predicts returns at this fixed scale; GAE sees unscaled values
VALUE_SCALE = 0.02


@dataclass
class PpoConfig:
    gamma: float = 0.99
    lam: float = 0.95
    clip: float = 0.2
    epochs: int = 5
    minibatch: int = 3072
    lr: float = 1e-3
    entropy_coef: float = 0.0
    value_coef: float = 1.0
    horizon: int = 24
    num_envs: int = 256
    iterations: int = 1000
    max_kl: float = 0.5
    lr_decay: bool = True
    grad_clip: float = 1.0
    cycles: int = 2
    seed: int = 0

    def __post_init__(self):
        if not (0.0 < self.gamma <= 1.0 and 0.0 < self.lam <= 1.0):
            raise ValueError("gamma and lam must be in (0, 1]")
        if not 0.0 < self.clip < 1.0:
            raise ValueError("clip must be in (0, 1)")
        if self.cycles < 1:
            raise ValueError("cycles must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class RolloutBuffer:
    obs: np.ndarray        # (T, n, obs_dim)
    priv: np.ndarray       # (T, n, priv_dim)
    actions: np.ndarray    # (T, n, act_dim)
    log_probs: np.ndarray  # (T, n)
    values: np.ndarray     # (T+1, n) incl. bootstrap
    rewards: np.ndarray    # (T, n)
    dones: np.ndarray      # (T, n)
    advantages: np.ndarray | None = None
    value_targets: np.ndarray | None = None
    episode_returns: list = field(default_factory=list)   # (kind_idx, return, length)
    mean_tracking: float = 0.0


def collect_rollout(env: VecEnv, bundle: TeacherBundle, horizon: int,
                    rng: np.random.Generator) -> RolloutBuffer:
    n = env.n
    if not hasattr(env, "episode_return"):
        env.episode_return = np.zeros(n, dtype=np.float64)
        env.episode_len = np.zeros(n, dtype=np.int64)
    obs, priv = env.observe(), env.privileged()
    buf = RolloutBuffer(
        obs=np.zeros((horizon, n, bundle.obs_dim), dtype=np.float32),
        priv=np.zeros((horizon, n, bundle.priv_dim), dtype=np.float32),
        actions=np.zeros((horizon, n, bundle.act_dim), dtype=np.float32),
        log_probs=np.zeros((horizon, n), dtype=np.float32),
        values=np.zeros((horizon + 1, n), dtype=np.float32),
        rewards=np.zeros((horizon, n), dtype=np.float32),
        dones=np.zeros((horizon, n), dtype=bool),
    )
    tracking_sum = 0.0
    for t in range(horizon):
        if not np.isfinite(obs).all():
            bad = int(np.flatnonzero(~np.isfinite(obs).all(axis=1))[0])
            raise FloatingPointError(f"non-finite observation in env {bad}")
        action, logp, value = bundle.act(obs, priv, rng)
        value = value / VALUE_SCALE
        res = env.step(action)
        buf.obs[t] = obs
        buf.priv[t] = priv
        buf.actions[t] = action
        buf.log_probs[t] = logp
        buf.values[t] = value
        buf.rewards[t] = res.reward
        buf.dones[t] = res.done
        tracking_sum += float(res.breakdown["tracking"].mean())
        env.episode_return += res.reward
        env.episode_len += 1
        for i in np.flatnonzero(res.done):
            buf.episode_returns.append(
                (int(env.kind_idx[i]), float(env.episode_return[i]), int(env.episode_len[i]))
            )
        env.episode_return[res.done] = 0.0
        env.episode_len[res.done] = 0
        obs, priv = res.obs, res.priv
    buf.values[horizon] = bundle.act(obs, priv, None)[2] / VALUE_SCALE
    buf.mean_tracking = tracking_sum / horizon
    return buf


def ppo_loss(bundle: TeacherBundle, obs, priv, actions, old_logp, adv, targets, cfg: PpoConfig):
    obs_t, priv_t = bundle.scaled(obs, priv)
    mean, log_std, value, _ = bundle.forward(obs_t, priv_t)
    logp = T.gaussian_log_prob(mean, log_std, Tensor(actions))
    ratio = T.exp(T.sub(logp, Tensor(old_logp)))
    adv_t = Tensor(adv)
    surr = T.minimum(T.mul(ratio, adv_t),
                     T.mul(T.clip(ratio, 1.0 - cfg.clip, 1.0 + cfg.clip), adv_t))
    policy_loss = T.neg(T.tmean(surr))
    value_loss = T.mse(T.reshape(value, (value.shape[0],)), Tensor(targets * VALUE_SCALE))
    entropy = T.tsum(T.add(log_std, 0.5 * LOG_2PI_E))
    loss = T.add(T.add(policy_loss, T.mul(value_loss, cfg.value_coef)),
                 T.mul(entropy, -cfg.entropy_coef))
    approx_kl = float(np.mean(old_logp - logp.data))
    return loss, {
        "policy_loss": float(policy_loss.data),
        "value_loss": float(value_loss.data),
        "entropy": float(entropy.data),
        "approx_kl": approx_kl,
    }


def ppo_update(bundle: TeacherBundle, buf: RolloutBuffer, cfg: PpoConfig,
               adam: AdamState, lr: float, rng: np.random.Generator) -> dict:
    from .gae import compute_gae, normalize_advantages

    if buf.advantages is None:
        adv, targets = compute_gae(buf.rewards, buf.values, buf.dones, cfg.gamma, cfg.lam)
        buf.advantages = normalize_advantages(adv)
        buf.value_targets = targets.astype(np.float32)

    total = buf.rewards.size
    obs = buf.obs.reshape(total, -1)
    priv = buf.priv.reshape(total, -1)
    actions = buf.actions.reshape(total, -1)
    old_logp = buf.log_probs.reshape(total)
    adv = buf.advantages.reshape(total)
    targets = buf.value_targets.reshape(total)

    stats = {}
    stop = False
    for _ in range(cfg.epochs):
        order = rng.permutation(total)
        for start in range(0, total, cfg.minibatch):
            idx = order[start:start + cfg.minibatch]
            with Tape() as tape:
                loss, stats = ppo_loss(bundle, obs[idx], priv[idx], actions[idx],
                                       old_logp[idx], adv[idx], targets[idx], cfg)
            if stats["approx_kl"] > cfg.max_kl:
                stop = True
                break
            backward(tape, loss)
            grads = {k: p.grad_or_zero() for k, p in bundle.params.items()}
            for p in bundle.params.values():
                p.zero_grad()
            clip_grad_norm(grads, cfg.grad_clip)
            adam_step(bundle.params, grads, adam, lr)
        if stop:
            break
    return stats


def train_teacher(cfg: PpoConfig, terrain_kinds: list[str] | None = None,
                  range_set: str = "training", curriculum: bool = True,
                  out_dir: str | Path | None = None, log_every: int = 10,
                  quiet: bool = False):
    """Full PPO run; returns (bundle, curve_rows).

    Curve columns: iteration, mean_return, mean_episode_len, mean_tracking,
    then mean return per terrain kind. Writes ``teacher.tckp`` and
    ``teacher_curve.csv`` when ``out_dir`` is given. Aborts on divergence,
    keeping the last finite-return parameters.
    """
    kinds = terrain_kinds or list(KINDS)
    specs = [TerrainSpec(kinds[i % len(kinds)], 0.0, 1000 + i) for i in range(cfg.num_envs)]
    env = VecEnv(specs, range_set=range_set, seed=cfg.seed)
    env.reset()
    bundle = TeacherBundle(seed=cfg.seed)
    adam = AdamState(bundle.params)
    rollout_rng = np.random.default_rng((cfg.seed, 1))
    update_rng = np.random.default_rng((cfg.seed, 2))
    curric_rng = np.random.default_rng((cfg.seed, 3))

    curve = []
    recent: list[tuple[int, float, int]] = []
    best_params = None
    cycle_len = max(1, cfg.iterations // cfg.cycles)
    halfway = max(1, cycle_len // 2)  # difficulty ramps over the first half-cycle
    for it in range(cfg.iterations):
        cycle, pos = divmod(it, cycle_len)
        if pos == 0 and cycle > 0:
            # warm restart: fresh optimizer moments and a halved, re-decaying lr
            adam = AdamState(bundle.params)
        if curriculum:
            cap = min(1.0, it / halfway)
            env.set_difficulty(curric_rng.uniform(0.0, cap, size=env.n) if cap > 0
                               else np.zeros(env.n), immediate=False)
        base_lr = cfg.lr * (0.5 ** min(cycle, cfg.cycles - 1))
        lr = base_lr * (1.0 - pos / cycle_len) if cfg.lr_decay else base_lr
        buf = collect_rollout(env, bundle, cfg.horizon, rollout_rng)
        stats = ppo_update(bundle, buf, cfg, adam, max(lr, 1e-6), update_rng)
        recent.extend(buf.episode_returns)
        recent = recent[-20 * cfg.num_envs:]
        row = _curve_row(it, recent, buf, kinds)
        curve.append(row)
        if recent and not np.isfinite(row["mean_return"]):
            break
        best_params = {k: p.data.copy() for k, p in bundle.params.items()}
        if not quiet and it % log_every == 0:
            per_kind = " ".join(f"{k}={row[f'return_{k}']:.1f}" for k in kinds)
            print(f"iter {it:5d} return={row['mean_return']:8.2f} len={row['mean_episode_len']:6.1f} "
                  f"track={row['mean_tracking']:.3f} kl={stats.get('approx_kl', 0):.3f} {per_kind}",
                  flush=True)
    if best_params is not None:
        for k, p in bundle.params.items():
            p.data = best_params[k]

    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        from ..models.checkpoint import save_checkpoint
        save_checkpoint(
            bundle.checkpoint({"seed": cfg.seed, "stage": "teacher",
                               "iteration": cfg.iterations}),
            out_dir / "teacher.tckp",
        )
        write_curve(curve, out_dir / "teacher_curve.csv", kinds)
    return bundle, curve


def _curve_row(it: int, recent, buf: RolloutBuffer, kinds) -> dict:
    rets = np.array([r for _, r, _ in recent]) if recent else np.array([np.nan])
    lens = np.array([l for _, _, l in recent]) if recent else np.array([np.nan])
    row = {
        "iteration": it,
        "mean_return": float(np.mean(rets)),
        "mean_episode_len": float(np.mean(lens)),
        "mean_tracking": buf.mean_tracking,
    }
    for k in kinds:
        ki = KINDS.index(k)
        kr = [r for kk, r, _ in recent if kk == ki]
        row[f"return_{k}"] = float(np.mean(kr)) if kr else float("nan")
    return row


def write_curve(curve: list[dict], path, kinds) -> None:
    with open(path, "w", newline="") as f:
        cols = ["iteration", "mean_return", "mean_episode_len", "mean_tracking"] + [
            f"return_{k}" for k in kinds
        ]
        writer = csv.DictWriter(f, fieldnames=cols)
        writer.writeheader()
        for row in curve:
            writer.writerow(row)
