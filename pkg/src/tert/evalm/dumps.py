"""Attention heatmaps and hidden-activation dumps."""

from __future__ import annotations

import numpy as np

from ..models.checkpoint import PolicyCheckpoint
from ..models.teacher import TeacherBundle
from ..models.transformer import CausalTransformer
from ..sim import KINDS, TerrainSpec, VecEnv


def _window_attention(model: CausalTransformer, obs_win, act_win, per_layer: bool):
    """Attention of the final observation token's query, folded to window
    timesteps (obs + action token weights summed per timestep)."""
    out = model.forward(obs_win, act_win, train=False, want_trace=True)
    t = out.trace.num_obs
    last_obs_tok = 2 * (t - 1)
    stacked = np.stack([layer[0, :, last_obs_tok, :] for layer in out.trace.layers])
    # (layers, heads, tokens)
    per_layer_rows = stacked.mean(axis=1)  # mean over heads -> (layers, tokens)
    folded = np.zeros((per_layer_rows.shape[0], t), dtype=np.float64)
    for j in range(t):
        folded[:, j] = per_layer_rows[:, 2 * j]
        if 2 * j + 1 <= last_obs_tok:
            folded[:, j] += per_layer_rows[:, 2 * j + 1]
    if per_layer:
        return folded
    return folded.mean(axis=0)


def dump_attention(model: CausalTransformer, spec: TerrainSpec, steps: int = 200,
                   seed: int = 0, range_set: str = "testing",
                   per_layer: bool = False) -> np.ndarray:
    """Roll one episode; row t = final-query attention over the 20 window
    positions (oldest first, zero beyond the available prefix).

    With ``per_layer`` the result is (steps, layers, window)."""
    window = model.spec.context_length
    env = VecEnv([spec], range_set=range_set, seed=seed, auto_reset=True)
    obs, _ = env.reset()
    obs_hist: list[np.ndarray] = []
    act_hist: list[np.ndarray] = []
    layers = model.spec.num_layers
    result = np.zeros((steps, layers, window) if per_layer else (steps, window))
    for t in range(steps):
        obs_hist.append(obs[0].astype(np.float32))
        obs_hist = obs_hist[-window:]
        act_hist = act_hist[-(window - 1):] if window > 1 else []
        obs_win = np.stack(obs_hist)[None]
        act_win = (np.stack(act_hist)[None] if act_hist
                   else np.zeros((1, 0, model.spec.act_dim), dtype=np.float32))
        row = _window_attention(model, obs_win, act_win, per_layer)
        n = len(obs_hist)
        if per_layer:
            result[t, :, :n] = row
        else:
            result[t, :n] = row
        out = model.forward(obs_win, act_win, train=False)
        action = out.actions.data[0, -1].copy()
        act_hist.append(action)
        res = env.step(action[None])
        obs = res.obs
        if res.done[0]:
            obs_hist.clear()
            act_hist.clear()
    return result


def dump_hidden(ckpt_or_model, kinds=None, steps: int = 200, seed: int = 0,
                range_set: str = "testing", difficulty: float = 0.5):
    """One row per timestep: (terrain label, last-hidden-layer activations).

    Transformer students expose the final block output at the current
    observation token; the teacher exposes its policy MLP's last hidden layer.
    Returns (labels list, matrix (rows, width)).
    """
    from .harness import EvalPolicy, load_eval_policy

    kinds = kinds or list(KINDS)
    labels, rows = [], []
    for kind in kinds:
        env = VecEnv([TerrainSpec(kind, difficulty, 9100)], range_set=range_set,
                     seed=seed, auto_reset=True)
        obs, priv = env.reset()
        if isinstance(ckpt_or_model, CausalTransformer):
            model = ckpt_or_model
            window = model.spec.context_length
            obs_hist, act_hist = [], []
            for _ in range(steps):
                obs_hist = (obs_hist + [obs[0].astype(np.float32)])[-window:]
                act_hist = act_hist[-(len(obs_hist) - 1):] if len(obs_hist) > 1 else []
                obs_win = np.stack(obs_hist)[None]
                act_win = (np.stack(act_hist)[None] if act_hist
                           else np.zeros((1, 0, model.spec.act_dim), dtype=np.float32))
                out = model.forward(obs_win, act_win, train=False, want_hidden=True)
                rows.append(out.hidden[0, -1].copy())
                labels.append(kind)
                action = out.actions.data[0, -1].copy()
                act_hist.append(action)
                res = env.step(action[None])
                obs = res.obs
                if res.done[0]:
                    obs_hist, act_hist = [], []
        elif isinstance(ckpt_or_model, TeacherBundle):
            bundle = ckpt_or_model
            for _ in range(steps):
                rows.append(bundle.hidden_np(obs, priv)[0].copy())
                labels.append(kind)
                action = bundle.mean_action(obs, priv)
                res = env.step(action)
                obs, priv = res.obs, res.priv
        else:
            raise TypeError("dump_hidden expects a CausalTransformer or TeacherBundle")
    return labels, np.stack(rows)


def hidden_from_checkpoint(ckpt: PolicyCheckpoint):
    """Materialize the model object dump_hidden needs from a checkpoint."""
    from ..models.transformer import TransformerSpec

    if ckpt.kind == "teacher":
        return TeacherBundle.from_checkpoint(ckpt)
    if ckpt.kind in ("transformer", "latent-transformer"):
        spec_dict = {k: v for k, v in ckpt.spec.items() if k != "body"}
        model = CausalTransformer(TransformerSpec(**spec_dict))
        for name in model.params:
            model.params[name].data = ckpt.tensors[name].copy()
        return model
    raise TypeError(f"no last-hidden-layer dump for checkpoint kind {ckpt.kind!r}")
