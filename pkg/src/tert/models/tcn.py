"""Dilated causal temporal convolution network.

Used two ways: as the RMA-style latent estimator over the last 50 steps and as
the TERT-TCN ablation (direct action prediction). Kernel 5 with dilations
(1, 4, 16) gives a receptive field of 85 steps, covering the full history.
"""

from __future__ import annotations

import numpy as np

from ..core import Tensor, ShapeError
from ..core import tensor as T
from .mlp import linear_init

KERNEL = 5
DILATIONS = (1, 4, 16)
CHANNELS = 64
HISTORY = 50


def _shift_back(x: Tensor, shift: int) -> Tensor:
    """x[:, t-shift, :] with zero padding for t-shift < 0."""
    if shift == 0:
        return x
    bsz, tlen, ch = x.shape
    zeros = Tensor(np.zeros((bsz, shift, ch), dtype=np.float32))
    idx = np.arange(tlen)
    return T.take(T.concat([zeros, x], axis=1), idx, axis=1)


class TCN:
    """Causal conv stack -> feature at the final step -> linear output."""

    def __init__(self, in_dim: int, out_dim: int, history: int = HISTORY,
                 rng: np.random.Generator | None = None, prefix: str = "tcn/",
                 in_scale=None):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.history = history
        if in_scale is not None:
            in_scale = tuple(float(v) for v in in_scale)
            if len(in_scale) != in_dim:
                raise ValueError(f"in_scale length {len(in_scale)} != in_dim {in_dim}")
        self.in_scale = in_scale
        self.prefix = prefix
        self.params: dict[str, Tensor] = {}
        ch_in = in_dim
        for layer, dil in enumerate(DILATIONS):
            for tap in range(KERNEL):
                w, _ = linear_init(rng, ch_in, CHANNELS, np.sqrt(2.0 / KERNEL))
                self.params[f"{prefix}conv{layer}_tap{tap}_w"] = w
            self.params[f"{prefix}conv{layer}_b"] = Tensor(
                np.zeros(CHANNELS, dtype=np.float32), requires_grad=True
            )
            ch_in = CHANNELS
        w, b = linear_init(rng, CHANNELS, out_dim)
        self.params[f"{prefix}out_w"] = w
        self.params[f"{prefix}out_b"] = b

    def forward(self, history: Tensor | np.ndarray) -> Tensor:
        """history: (B, H, in_dim) oldest first; returns (B, out_dim)."""
        x = history if isinstance(history, Tensor) else Tensor(np.asarray(history, dtype=np.float32))
        if x.data.ndim != 3 or x.shape[1] != self.history or x.shape[2] != self.in_dim:
            raise ShapeError(
                f"TCN: expected (batch, {self.history}, {self.in_dim}) history, got {x.shape}"
            )
        if self.in_scale is not None:
            scale = np.asarray(self.in_scale, dtype=x.data.dtype)
            x = T.mul(x, Tensor(scale.reshape(1, 1, -1)))
        for layer, dil in enumerate(DILATIONS):
            acc = None
            for tap in range(KERNEL):
                shift = (KERNEL - 1 - tap) * dil
                term = T.matmul(_shift_back(x, shift), self.params[f"{self.prefix}conv{layer}_tap{tap}_w"])
                acc = term if acc is None else T.add(acc, term)
            x = T.elu(T.add(acc, self.params[f"{self.prefix}conv{layer}_b"]))
        last = T.take(x, [self.history - 1], axis=1)  # (B,1,C)
        last = T.reshape(last, (last.shape[0], CHANNELS))
        return T.add(T.matmul(last, self.params[f"{self.prefix}out_w"]), self.params[f"{self.prefix}out_b"])
