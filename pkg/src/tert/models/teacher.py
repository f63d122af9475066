"""Teacher bundle: privileged encoder + Gaussian policy + privileged critic."""

from __future__ import annotations

import numpy as np

from ..core import Tensor
from ..core import tensor as T
from ..sim.env import ACT_DIM, OBS_DIM, OBS_SCALE, PRIV_DIM, PRIV_SCALE
from .checkpoint import PolicyCheckpoint
from .mlp import Encoder, GaussianPolicy, ValueHead

LATENT_DIM = 12


class TeacherBundle:
    def __init__(self, obs_dim: int = OBS_DIM, priv_dim: int = PRIV_DIM,
                 latent_dim: int = LATENT_DIM, act_dim: int = ACT_DIM, seed: int = 0):
        rng = np.random.default_rng(seed)
        self.obs_dim = obs_dim
        self.priv_dim = priv_dim
        self.latent_dim = latent_dim
        self.act_dim = act_dim
        self.encoder = Encoder(priv_dim, latent_dim, rng=rng)
        self.policy = GaussianPolicy(obs_dim, latent_dim, act_dim, rng=rng)
        self.value = ValueHead(obs_dim, latent_dim, rng=rng)
        self.params: dict[str, Tensor] = {}
        self.params.update(self.encoder.params)
        self.params.update(self.policy.params)
        self.params.update(self.value.params)

    # -- graph-building forward (records on the active tape) ---------------
    def scaled(self, obs: np.ndarray, priv: np.ndarray) -> tuple[Tensor, Tensor]:
        return (Tensor(np.asarray(obs, dtype=np.float32) * OBS_SCALE[: self.obs_dim]),
                Tensor(np.asarray(priv, dtype=np.float32) * PRIV_SCALE[: self.priv_dim]))

    def forward(self, obs_t: Tensor, priv_t: Tensor):
        latent = self.encoder.forward(priv_t)
        mean, log_std = self.policy.forward(obs_t, latent)
        value = self.value.forward(obs_t, latent)
        return mean, log_std, value, latent

    # -- numpy-facing inference -------------------------------------------
    def policy_outputs(self, obs: np.ndarray, priv: np.ndarray):
        obs_t, priv_t = self.scaled(obs, priv)
        mean, log_std, value, latent = self.forward(obs_t, priv_t)
        return mean.data, log_std.data, value.data[:, 0], latent.data

    def act(self, obs: np.ndarray, priv: np.ndarray, rng: np.random.Generator | None = None):
        """Sample (or take the mean of) the action distribution.

        Returns (action, log_prob, value). ``rng=None`` gives the
        deterministic mean action.
        """
        mean, log_std, value, _ = self.policy_outputs(obs, priv)
        std = np.exp(log_std)
        if rng is None:
            action = mean.copy()
        else:
            action = mean + std * rng.standard_normal(mean.shape).astype(np.float32)
        logp = gaussian_logp_np(mean, log_std, action)
        return action, logp, value

    def mean_action(self, obs: np.ndarray, priv: np.ndarray) -> np.ndarray:
        return self.policy_outputs(obs, priv)[0]

    def latent_np(self, priv: np.ndarray) -> np.ndarray:
        priv_t = Tensor(np.asarray(priv, dtype=np.float32) * PRIV_SCALE[: self.priv_dim])
        return self.encoder.forward(priv_t).data

    def hidden_np(self, obs: np.ndarray, priv: np.ndarray) -> np.ndarray:
        obs_t, priv_t = self.scaled(obs, priv)
        latent = self.encoder.forward(priv_t)
        return self.policy.hidden_activations(obs_t, latent).data

    # -- persistence -------------------------------------------------------
    def spec_dict(self) -> dict:
        return {"obs_dim": self.obs_dim, "priv_dim": self.priv_dim,
                "latent_dim": self.latent_dim, "act_dim": self.act_dim}

    def checkpoint(self, metadata: dict | None = None) -> PolicyCheckpoint:
        return PolicyCheckpoint.from_params("teacher", self.spec_dict(), self.params, metadata)

    @classmethod
    def from_checkpoint(cls, ckpt: PolicyCheckpoint) -> "TeacherBundle":
        spec = ckpt.spec
        bundle = cls(spec["obs_dim"], spec["priv_dim"], spec["latent_dim"], spec["act_dim"])
        ckpt.load_into(bundle.params)
        return bundle


def gaussian_logp_np(mean: np.ndarray, log_std: np.ndarray, action: np.ndarray) -> np.ndarray:
    std = np.exp(log_std)
    z = (action - mean) / std
    return (-0.5 * z * z - log_std - 0.5 * np.log(2 * np.pi)).sum(axis=-1)
