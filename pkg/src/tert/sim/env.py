"""Planar 4-joint locomotion surrogate.

A rigid trunk (x, z, pitch) carries four massless legs of fixed length on hip
pivots along the body axis. Joint target positions from the policy are turned
into torques by a PD controller; ground contact is penalty-based with Coulomb
friction. Semi-implicit Euler at 200 Hz, control at 50 Hz. Everything is
vectorized over environments and elementwise per env, so results are
bit-identical regardless of how many envs step together.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .params import EnvParams, RANGES, sample_env_params
from .terrain import KINDS, TerrainSpec, batch_height

# dimensions and layouts
OBS_DIM = 18   # vx, vz, omega, gravity(2), command, q(4), qd(4), prev_action(4)
PRIV_DIM = 19  # 11 height samples, 4 contact flags, friction, added_mass, kp, kd
ACT_DIM = 4
HEIGHT_OFFSETS = np.linspace(-0.5, 0.5, 11)

# fixed per-field input scaling applied by policies (not part of the raw layout)
OBS_SCALE = np.array([2.0, 2.0, 0.25, 1.0, 1.0, 2.0] + [1.0] * 4 + [0.05] * 4 + [1.0] * 4,
                     dtype=np.float32)
PRIV_SCALE = np.array([5.0] * 11 + [1.0] * 4 + [1.0, 0.2, 0.02, 1.0], dtype=np.float32)

# physics constants
DT_SUB = 0.005
SUBSTEPS = 4
CONTROL_DT = DT_SUB * SUBSTEPS  # 0.02 s -> 50 Hz
GRAVITY = 9.81
BASE_MASS = 12.0
BASE_INERTIA = 0.5
LEG_LENGTH = 0.25
HIP_DROP = 0.07
HIP_OFFSETS = np.array([-0.3, -0.1, 0.1, 0.3])
LEG_INERTIA = 0.05
K_NORMAL = 2.0e4
C_NORMAL = 100.0
K_TANGENT = 300.0
TORQUE_LIMIT = 33.5
JOINT_LIMIT = np.pi / 3
ACTION_CLIP = 3.0
ACTION_SCALE = 0.5
STAND_HEIGHT = 0.32
COMMAND_VX = 0.4
EPISODE_CAP = 1000
FALL_HEIGHT = 0.12
FALL_PITCH = 1.0

REWARD_WEIGHTS = {
    "tracking": 1.0,
    "lin_vel_z": -2.0,
    "ang_vel": -0.05,
    "torque": -1.0e-4,
    "joint_acc": -2.5e-7,
    "action_mag": -0.01,
    # at -0.01 even a clean gait pays ~0.6/step in torque jitter, making
    # standing (or falling early) strictly better than walking; -0.001 keeps
    # the smoothness pressure while leaving locomotion net-positive
    "torque_smooth": -1.0e-3,
    "termination": -1.0,
}
TRACKING_SIGMA = 0.25


def pd_torque(q_des, q, qd_des, qd, kp, kd):
    """PD position control torque, clamped to the motor limit."""
    tau = kp * (q_des - q) + kd * (qd_des - qd)
    return np.clip(tau, -TORQUE_LIMIT, TORQUE_LIMIT)


@dataclass
class StepResult:
    obs: np.ndarray           # (n, OBS_DIM) float32
    priv: np.ndarray          # (n, PRIV_DIM) float32
    reward: np.ndarray        # (n,) float32
    done: np.ndarray          # (n,) bool
    torques: np.ndarray       # (n, 4) mean applied torque over the control step
    breakdown: dict           # reward term name -> (n,) array


class VecEnv:
    """Batch of independent planar environments stepping in lockstep."""

    def __init__(self, specs: list[TerrainSpec], range_set: str = "training",
                 seed: int = 0, auto_reset: bool = True):
        if range_set not in RANGES:
            raise ValueError(f"unknown range set {range_set!r}")
        self.n = len(specs)
        self.range_set = range_set
        self.auto_reset = auto_reset
        self.kind_idx = np.array([KINDS.index(s.kind) for s in specs])
        self.difficulty = np.array([s.difficulty for s in specs], dtype=np.float64)
        self.terrain_seed = np.array([s.seed for s in specs], dtype=np.uint64)
        # rng identity depends only on (run seed, terrain seed, kind), never on
        # batch position, so splitting envs across workers cannot change draws
        self.rngs = [
            np.random.default_rng((seed, s.seed, KINDS.index(s.kind))) for s in specs
        ]
        self._alloc()

    def _alloc(self):
        n = self.n
        self.x = np.zeros(n)
        self.z = np.zeros(n)
        self.th = np.zeros(n)
        self.vx = np.zeros(n)
        self.vz = np.zeros(n)
        self.om = np.zeros(n)
        self.q = np.zeros((n, 4))
        self.qd = np.zeros((n, 4))
        self.prev_action = np.zeros((n, 4))
        self.prev_torque = np.zeros((n, 4))
        self.steps = np.zeros(n, dtype=np.int64)
        self.contact = np.zeros((n, 4), dtype=bool)
        self.frozen = np.zeros(n, dtype=bool)
        self.friction = np.zeros(n)
        self.added_mass = np.zeros(n)
        self.kp = np.zeros(n)
        self.kd = np.zeros(n)

    def specs(self) -> list[TerrainSpec]:
        return [
            TerrainSpec(KINDS[k], float(d), int(s))
            for k, d, s in zip(self.kind_idx, self.difficulty, self.terrain_seed)
        ]

    def set_difficulty(self, difficulty, immediate: bool = True) -> None:
        """Change per-env difficulty; with ``immediate=False`` it takes effect
        at each env's next reset (terrain must not shift under a live robot)."""
        d = np.broadcast_to(np.asarray(difficulty, dtype=np.float64), (self.n,)).copy()
        if immediate:
            self.difficulty = d
        else:
            self._pending_difficulty = d

    def terrain_height(self, x) -> np.ndarray:
        """h(x) per env; x may be (n,) or (n, k)."""
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 1:
            return batch_height(self.kind_idx, self.difficulty, self.terrain_seed, x)
        return batch_height(self.kind_idx[:, None], self.difficulty[:, None],
                            self.terrain_seed[:, None], x)

    # -- episode control ---------------------------------------------------
    def _reset_envs(self, mask: np.ndarray) -> None:
        pending = getattr(self, "_pending_difficulty", None)
        if pending is not None:
            self.difficulty = np.where(mask, pending, self.difficulty)
        for i in np.flatnonzero(mask):
            rng = self.rngs[i]
            params = sample_env_params(self.range_set, rng)
            self.friction[i] = params.friction
            self.added_mass[i] = params.added_mass
            self.kp[i] = params.kp
            self.kd[i] = params.kd
            self.x[i] = rng.uniform(-0.5, 0.0)
            self.th[i] = rng.uniform(-0.05, 0.05)
            self.q[i] = rng.uniform(-0.05, 0.05, size=4)
        idx = np.flatnonzero(mask)
        if idx.size:
            self.z[idx] = STAND_HEIGHT + self.terrain_height(self.x)[idx]
            self.vx[idx] = 0.0
            self.vz[idx] = 0.0
            self.om[idx] = 0.0
            self.qd[idx] = 0.0
            self.prev_action[idx] = 0.0
            self.prev_torque[idx] = 0.0
            self.steps[idx] = 0
            self.contact[idx] = False
            self.frozen[idx] = False

    def reset(self) -> tuple[np.ndarray, np.ndarray]:
        self._reset_envs(np.ones(self.n, dtype=bool))
        return self.observe(), self.privileged()

    def env_params(self, i: int) -> EnvParams:
        return EnvParams(float(self.friction[i]), float(self.added_mass[i]),
                         float(self.kp[i]), float(self.kd[i]))

    # -- observation -------------------------------------------------------
    def observe(self) -> np.ndarray:
        obs = np.empty((self.n, OBS_DIM), dtype=np.float32)
        obs[:, 0] = self.vx
        obs[:, 1] = self.vz
        obs[:, 2] = self.om
        obs[:, 3] = -np.sin(self.th)
        obs[:, 4] = -np.cos(self.th)
        obs[:, 5] = COMMAND_VX
        obs[:, 6:10] = self.q
        obs[:, 10:14] = self.qd
        obs[:, 14:18] = self.prev_action
        return obs

    def privileged(self) -> np.ndarray:
        priv = np.empty((self.n, PRIV_DIM), dtype=np.float32)
        sample_x = self.x[:, None] + HEIGHT_OFFSETS[None, :]
        priv[:, :11] = self.terrain_height(sample_x) - self.z[:, None]
        priv[:, 11:15] = self.contact.astype(np.float32)
        priv[:, 15] = self.friction
        priv[:, 16] = self.added_mass
        priv[:, 17] = self.kp
        priv[:, 18] = self.kd
        return priv

    # -- dynamics ----------------------------------------------------------
    def _substep(self, q_des: np.ndarray) -> np.ndarray:
        """One 5 ms physics substep; returns applied joint torques (n, 4)."""
        tau = pd_torque(q_des, self.q, 0.0, self.qd, self.kp[:, None], self.kd[:, None])

        th = self.th[:, None]
        alpha = th + self.q
        sin_t, cos_t = np.sin(th), np.cos(th)
        sin_a, cos_a = np.sin(alpha), np.cos(alpha)
        hip_x = self.x[:, None] + HIP_OFFSETS * cos_t + HIP_DROP * sin_t
        hip_z = self.z[:, None] + HIP_OFFSETS * sin_t - HIP_DROP * cos_t
        foot_x = hip_x + LEG_LENGTH * sin_a
        foot_z = hip_z - LEG_LENGTH * cos_a
        om = self.om[:, None]
        dfoot_x = (self.vx[:, None] + om * (-HIP_OFFSETS * sin_t + HIP_DROP * cos_t)
                   + LEG_LENGTH * cos_a * (om + self.qd))
        dfoot_z = (self.vz[:, None] + om * (HIP_OFFSETS * cos_t + HIP_DROP * sin_t)
                   + LEG_LENGTH * sin_a * (om + self.qd))

        ground = self.terrain_height(foot_x)
        delta = ground - foot_z
        in_contact = delta > 0.0
        normal = np.where(in_contact, np.maximum(0.0, K_NORMAL * delta - C_NORMAL * dfoot_z), 0.0)
        limit = self.friction[:, None] * normal
        tangent = np.clip(-K_TANGENT * dfoot_x, -limit, limit)
        self.contact = in_contact

        mass = BASE_MASS + self.added_mass
        fx = tangent.sum(axis=1)
        fz = normal.sum(axis=1) - mass * GRAVITY
        rx = foot_x - self.x[:, None]
        rz = foot_z - self.z[:, None]
        torque_base = (rx * normal - rz * tangent).sum(axis=1)

        # generalized contact torque on each joint: F . dfoot/dq
        tau_contact = LEG_LENGTH * (tangent * cos_a + normal * sin_a)
        qdd = (tau + tau_contact) / LEG_INERTIA

        self.vx += DT_SUB * fx / mass
        self.vz += DT_SUB * fz / mass
        self.om += DT_SUB * torque_base / BASE_INERTIA
        self.qd += DT_SUB * qdd
        self.x += DT_SUB * self.vx
        self.z += DT_SUB * self.vz
        self.th += DT_SUB * self.om
        self.q += DT_SUB * self.qd
        # hard joint limits: clamp and kill outward velocity
        over = self.q > JOINT_LIMIT
        under = self.q < -JOINT_LIMIT
        self.q = np.clip(self.q, -JOINT_LIMIT, JOINT_LIMIT)
        self.qd = np.where(over & (self.qd > 0), 0.0, self.qd)
        self.qd = np.where(under & (self.qd < 0), 0.0, self.qd)
        return tau

    def step(self, action: np.ndarray) -> StepResult:
        action = np.asarray(action, dtype=np.float64).reshape(self.n, 4)
        if not np.isfinite(action).all():
            bad = int(np.flatnonzero(~np.isfinite(action).all(axis=1))[0])
            raise FloatingPointError(f"non-finite action in env {bad}")
        action = np.clip(action, -ACTION_CLIP, ACTION_CLIP)
        active = ~self.frozen

        frozen_snapshot = None
        if self.frozen.any():
            frozen_snapshot = {
                name: getattr(self, name).copy()
                for name in ("x", "z", "th", "vx", "vz", "om", "q", "qd", "steps", "contact")
            }

        qd_before = self.qd.copy()
        q_des = ACTION_SCALE * action
        tau_sum = np.zeros((self.n, 4))
        for _ in range(SUBSTEPS):
            tau_sum += self._substep(q_des)
        torques = tau_sum / SUBSTEPS
        self.steps += 1

        if frozen_snapshot is not None:
            for name, saved in frozen_snapshot.items():
                arr = getattr(self, name)
                arr[self.frozen] = saved[self.frozen]

        state_bad = active & ~(
            np.isfinite(self.x) & np.isfinite(self.z) & np.isfinite(self.th)
            & np.isfinite(self.vx) & np.isfinite(self.vz) & np.isfinite(self.om)
            & np.isfinite(self.q).all(axis=1) & np.isfinite(self.qd).all(axis=1)
        )
        if state_bad.any():
            bad = int(np.flatnonzero(state_bad)[0])
            raise FloatingPointError(
                f"non-finite state after integration in env {bad} "
                f"(terrain={KINDS[self.kind_idx[bad]]}, step={self.steps[bad]})"
            )

        ground = self.terrain_height(self.x)
        fall = ((self.z - ground) < FALL_HEIGHT) | (np.abs(self.th) > FALL_PITCH)
        timeout = self.steps >= EPISODE_CAP
        done = fall | timeout

        qdd = (self.qd - qd_before) / CONTROL_DT
        breakdown = {
            "tracking": REWARD_WEIGHTS["tracking"]
            * np.exp(-((self.vx - COMMAND_VX) ** 2) / TRACKING_SIGMA**2),
            "lin_vel_z": REWARD_WEIGHTS["lin_vel_z"] * self.vz**2,
            "ang_vel": REWARD_WEIGHTS["ang_vel"] * self.om**2,
            "torque": REWARD_WEIGHTS["torque"] * (torques**2).sum(axis=1),
            "joint_acc": REWARD_WEIGHTS["joint_acc"] * (qdd**2).sum(axis=1),
            "action_mag": REWARD_WEIGHTS["action_mag"] * (action**2).sum(axis=1),
            "torque_smooth": REWARD_WEIGHTS["torque_smooth"]
            * ((torques - self.prev_torque) ** 2).sum(axis=1),
            "termination": REWARD_WEIGHTS["termination"] * fall.astype(np.float64),
        }
        breakdown = {k: v.astype(np.float32) for k, v in breakdown.items()}
        reward = np.zeros(self.n, dtype=np.float32)
        for term in breakdown.values():
            reward += term

        self.prev_action = action.copy()
        self.prev_torque = torques.copy()

        # frozen envs (lockstep mode) report zero reward and stay done
        if (~active).any():
            reward = np.where(active, reward, 0.0)
            done = np.where(active, done, True)
            for term in breakdown:
                breakdown[term] = np.where(active, breakdown[term], 0.0)
            torques = np.where(active[:, None], torques, 0.0)

        if self.auto_reset:
            self._reset_envs(done & active)
        else:
            self.frozen |= done

        return StepResult(
            obs=self.observe(),
            priv=self.privileged(),
            reward=reward.astype(np.float32),
            done=np.asarray(done, dtype=bool),
            torques=torques.astype(np.float32),
            breakdown={k: v.astype(np.float32) for k, v in breakdown.items()},
        )


def make_env(spec: TerrainSpec, range_set: str = "training", seed: int = 0,
             auto_reset: bool = True) -> VecEnv:
    """Single-environment convenience constructor."""
    return VecEnv([spec], range_set=range_set, seed=seed, auto_reset=auto_reset)
