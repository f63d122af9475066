"""Central finite-difference gradient checker (64-bit reference mode)."""

from __future__ import annotations

import numpy as np

from .tensor import NonFiniteError, Tape, Tensor, backward


def grad_check(f, x: Tensor, eps: float = 1e-5) -> float:
    """Max relative error between reverse-mode and central-difference gradients.

    ``f`` must be scalar-valued. The check runs in float64: ``x`` is promoted
    and ``f`` is evaluated on perturbed copies. Relative error per coordinate
    is |ad - fd| / max(1, |fd|).
    """
    if not 1e-6 <= eps <= 1e-3:
        raise ValueError(f"grad_check: eps {eps} outside [1e-6, 1e-3]")
    x64 = Tensor(x.data.astype(np.float64), requires_grad=True)
    with Tape() as tape:
        loss = f(x64)
    if not np.isfinite(loss.data).all():
        raise NonFiniteError("grad_check: f(x) is not finite")
    backward(tape, loss)
    auto = x64.grad_or_zero().astype(np.float64)

    flat = x64.data.reshape(-1)
    fd = np.zeros_like(flat)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        hi = float(f(Tensor(x64.data.copy())).data)
        flat[i] = orig - eps
        lo = float(f(Tensor(x64.data.copy())).data)
        flat[i] = orig
        fd[i] = (hi - lo) / (2.0 * eps)
    fd = fd.reshape(x64.data.shape)
    rel = np.abs(auto - fd) / np.maximum(1.0, np.abs(fd))
    return float(rel.max()) if rel.size else 0.0
