"""MLP building blocks: privileged encoder, teacher policy, value head."""

from __future__ import annotations

import numpy as np

from ..core import Tensor, ShapeError
from ..core import tensor as T


def linear_init(rng: np.random.Generator, fan_in: int, fan_out: int, scale: float = 1.0):
    """Orthogonal weight init (gain ``scale``) and zero bias."""
    a = rng.standard_normal((fan_in, fan_out))
    q, r = np.linalg.qr(a if fan_in >= fan_out else a.T)
    q = q * np.sign(np.diag(r))
    if fan_in < fan_out:
        q = q.T
    w = (q[:fan_in, :fan_out] * scale).astype(np.float32)
    return Tensor(w, requires_grad=True), Tensor(np.zeros(fan_out, dtype=np.float32), requires_grad=True)


class MLP:
    """Fully connected ELU network; final layer is linear."""

    def __init__(self, sizes, rng: np.random.Generator, out_scale: float = 1.0, prefix: str = ""):
        self.sizes = list(sizes)
        self.prefix = prefix
        self.params: dict[str, Tensor] = {}
        for i, (n_in, n_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            last = i == len(sizes) - 2
            w, b = linear_init(rng, n_in, n_out, out_scale if last else np.sqrt(2.0))
            self.params[f"{prefix}w{i}"] = w
            self.params[f"{prefix}b{i}"] = b

    def forward(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.sizes[0]:
            raise ShapeError(f"MLP: input dim {x.shape[-1]} != expected {self.sizes[0]}")
        n_layers = len(self.sizes) - 1
        h = x
        for i in range(n_layers):
            h = T.add(T.matmul(h, self.params[f"{self.prefix}w{i}"]), self.params[f"{self.prefix}b{i}"])
            if i < n_layers - 1:
                h = T.elu(h)
        return h

    def hidden_activations(self, x: Tensor) -> Tensor:
        """Activations of the last hidden layer (before the output projection)."""
        n_layers = len(self.sizes) - 1
        h = x
        for i in range(n_layers - 1):
            h = T.elu(T.add(T.matmul(h, self.params[f"{self.prefix}w{i}"]), self.params[f"{self.prefix}b{i}"]))
        return h


class Encoder:
    """Privileged-information encoder: 3 hidden layers of 256 units -> latent."""

    def __init__(self, priv_dim: int = 19, latent_dim: int = 12, hidden: int = 256,
                 rng: np.random.Generator | None = None, prefix: str = "encoder/"):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.priv_dim = priv_dim
        self.latent_dim = latent_dim
        self.net = MLP([priv_dim, hidden, hidden, hidden, latent_dim], rng, prefix=prefix)
        self.params = self.net.params

    def forward(self, e: Tensor) -> Tensor:
        return self.net.forward(e)


class GaussianPolicy:
    """Teacher policy head: (obs, latent) -> diagonal Gaussian over actions.

    Hidden sizes (512, 256, 128); state-independent learned log-std per joint,
    initialized at log(1.0).
    """

    def __init__(self, obs_dim: int = 18, latent_dim: int = 12, act_dim: int = 4,
                 rng: np.random.Generator | None = None, prefix: str = "policy/"):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.obs_dim = obs_dim
        self.latent_dim = latent_dim
        self.act_dim = act_dim
        self.net = MLP([obs_dim + latent_dim, 512, 256, 128, act_dim], rng, out_scale=0.01, prefix=prefix)
        self.params = dict(self.net.params)
        self.params[f"{prefix}log_std"] = Tensor(np.zeros(act_dim, dtype=np.float32), requires_grad=True)
        self.prefix = prefix

    def forward(self, obs: Tensor, latent: Tensor) -> tuple[Tensor, Tensor]:
        if obs.shape[-1] != self.obs_dim or latent.shape[-1] != self.latent_dim:
            raise ShapeError(
                f"GaussianPolicy: got obs dim {obs.shape[-1]}, latent dim {latent.shape[-1]}; "
                f"expected {self.obs_dim}, {self.latent_dim}"
            )
        mean = self.net.forward(T.concat([obs, latent], axis=-1))
        return mean, self.params[f"{self.prefix}log_std"]

    def hidden_activations(self, obs: Tensor, latent: Tensor) -> Tensor:
        return self.net.hidden_activations(T.concat([obs, latent], axis=-1))


class ValueHead:
    """Privileged critic on (obs, latent)."""

    def __init__(self, obs_dim: int = 18, latent_dim: int = 12,
                 rng: np.random.Generator | None = None, prefix: str = "value/"):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.obs_dim = obs_dim
        self.latent_dim = latent_dim
        self.net = MLP([obs_dim + latent_dim, 256, 256, 1], rng, prefix=prefix)
        self.params = self.net.params

    def forward(self, obs: Tensor, latent: Tensor) -> Tensor:
        return self.net.forward(T.concat([obs, latent], axis=-1))
