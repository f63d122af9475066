"""Causal Transformer student: interleaved observation/action tokens,
GPT-style pre-LN blocks, action predictions read at observation positions."""

from __future__ import annotations

from dataclasses import dataclass, asdict, field

import numpy as np

from ..core import Tensor, ShapeError
from ..core import tensor as T
from .mlp import linear_init

NEG_MASK = -1e9  # additive causal mask; exp underflows to exactly 0 in float32


@dataclass
class TransformerSpec:
    num_layers: int = 3
    embed_dim: int = 256
    num_heads: int = 4
    dropout_rate: float = 0.05
    context_length: int = 20
    obs_dim: int = 18
    act_dim: int = 4
    out_dim: int = 0  # 0 = predict actions; nonzero overrides the head width
    obs_scale: tuple | None = None  # per-feature input scaling, model-owned

    def __post_init__(self):
        if self.out_dim == 0:
            self.out_dim = self.act_dim
        if self.obs_scale is not None:
            self.obs_scale = tuple(float(v) for v in self.obs_scale)
            if len(self.obs_scale) != self.obs_dim:
                raise ValueError(
                    f"obs_scale length {len(self.obs_scale)} != obs_dim {self.obs_dim}")
        if self.embed_dim % self.num_heads != 0:
            raise ValueError(f"embed_dim {self.embed_dim} not divisible by num_heads {self.num_heads}")
        if self.context_length < 1:
            raise ValueError("context_length must be >= 1")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class AttentionTrace:
    """Per-layer attention weights, shape (batch, heads, tokens, tokens).

    Token j at even index is the observation of timestep j//2; odd indices are
    action tokens.
    """

    layers: list = field(default_factory=list)
    num_obs: int = 0


class TransformerOutput:
    def __init__(self, actions: Tensor, trace: AttentionTrace | None, hidden: np.ndarray | None):
        self.actions = actions
        self.trace = trace
        self.hidden = hidden


class CausalTransformer:
    def __init__(self, spec: TransformerSpec, rng: np.random.Generator | None = None,
                 seed: int = 0, prefix: str = "trans/"):
        rng = rng if rng is not None else np.random.default_rng(seed)
        self.spec = spec
        self.seed = seed
        self.prefix = prefix
        d = spec.embed_dim
        p: dict[str, Tensor] = {}

        def lin(name, n_in, n_out, scale=1.0):
            w, b = linear_init(rng, n_in, n_out, scale)
            p[f"{prefix}{name}_w"] = w
            p[f"{prefix}{name}_b"] = b

        lin("obs_embed", spec.obs_dim, d)
        lin("act_embed", spec.act_dim, d)
        p[f"{prefix}pos_embed"] = Tensor(
            (rng.standard_normal((2 * spec.context_length, d)) * 0.02).astype(np.float32),
            requires_grad=True,
        )
        for i in range(spec.num_layers):
            for ln in (f"ln1_{i}", f"ln2_{i}"):
                p[f"{prefix}{ln}_g"] = Tensor(np.ones(d, dtype=np.float32), requires_grad=True)
                p[f"{prefix}{ln}_b"] = Tensor(np.zeros(d, dtype=np.float32), requires_grad=True)
            lin(f"q_{i}", d, d)
            lin(f"k_{i}", d, d)
            lin(f"v_{i}", d, d)
            lin(f"attn_out_{i}", d, d, scale=1.0 / np.sqrt(2 * spec.num_layers))
            lin(f"ff1_{i}", d, 4 * d)
            lin(f"ff2_{i}", 4 * d, d, scale=1.0 / np.sqrt(2 * spec.num_layers))
        p[f"{prefix}lnf_g"] = Tensor(np.ones(d, dtype=np.float32), requires_grad=True)
        p[f"{prefix}lnf_b"] = Tensor(np.zeros(d, dtype=np.float32), requires_grad=True)
        lin("head", d, spec.out_dim, scale=0.01)
        self.params = p

    # -- helpers ----------------------------------------------------------
    def _lin(self, name, x):
        return T.add(T.matmul(x, self.params[f"{self.prefix}{name}_w"]), self.params[f"{self.prefix}{name}_b"])

    def _ln(self, name, x):
        return T.layer_norm(x, self.params[f"{self.prefix}{name}_g"], self.params[f"{self.prefix}{name}_b"])

    def forward(self, obs_seq, act_seq, train: bool = False, want_trace: bool = False,
                want_hidden: bool = False, dropout_step: int = 0) -> TransformerOutput:
        """Predict one action per observation token.

        ``obs_seq``: (B, t, obs_dim); ``act_seq``: (B, t or t-1, act_dim); the
        final token may be a pending observation. Window length is capped at
        the configured context length.
        """
        spec = self.spec
        obs_seq = obs_seq if isinstance(obs_seq, Tensor) else Tensor(np.asarray(obs_seq, dtype=np.float32))
        act_seq = act_seq if isinstance(act_seq, Tensor) else Tensor(np.asarray(act_seq, dtype=np.float32))
        if obs_seq.data.ndim != 3 or act_seq.data.ndim != 3:
            raise ShapeError("transformer_forward: expected (batch, time, dim) inputs")
        bsz, t, od = obs_seq.shape
        ta = act_seq.shape[1]
        if t == 0:
            raise ShapeError("transformer_forward: empty window")
        if t > spec.context_length:
            raise ShapeError(f"transformer_forward: window length {t} exceeds T={spec.context_length}")
        if od != spec.obs_dim or act_seq.shape[-1] != spec.act_dim:
            raise ShapeError(
                f"transformer_forward: obs/act dims ({od},{act_seq.shape[-1]}) != spec "
                f"({spec.obs_dim},{spec.act_dim})"
            )
        if ta not in (t, t - 1):
            raise ShapeError(f"transformer_forward: {ta} action tokens incompatible with {t} observations")
        if spec.obs_scale is not None:
            scale = np.asarray(spec.obs_scale, dtype=obs_seq.data.dtype)
            obs_seq = T.mul(obs_seq, Tensor(scale.reshape(1, 1, -1)))

        n_tok = t + ta
        d, h = spec.embed_dim, spec.num_heads
        hd = d // h

        # interleave o1,a1,o2,a2,...  obs at even token indices
        obs_emb = self._lin("obs_embed", obs_seq)  # (B,t,D)
        act_emb = self._lin("act_embed", act_seq)  # (B,ta,D)
        interleave = np.empty(n_tok, dtype=np.int64)
        interleave[0::2] = np.arange(t)
        interleave[1::2] = t + np.arange(ta)
        x = T.take(T.concat([obs_emb, act_emb], axis=1), interleave, axis=1)  # (B,S,D)
        pos = T.take(self.params[f"{self.prefix}pos_embed"], np.arange(n_tok), axis=0)
        x = T.add(x, T.reshape(pos, (1, n_tok, d)))
        rate, seed = spec.dropout_rate, self.seed
        x = T.dropout(x, rate, (seed, 3 * spec.num_layers, dropout_step), train)

        mask = np.triu(np.full((n_tok, n_tok), NEG_MASK, dtype=np.float32), k=1)
        trace = AttentionTrace(num_obs=t) if want_trace else None

        for i in range(spec.num_layers):
            xn = self._ln(f"ln1_{i}", x)
            q = T.transpose(T.reshape(self._lin(f"q_{i}", xn), (bsz, n_tok, h, hd)), (0, 2, 1, 3))
            k = T.transpose(T.reshape(self._lin(f"k_{i}", xn), (bsz, n_tok, h, hd)), (0, 2, 1, 3))
            v = T.transpose(T.reshape(self._lin(f"v_{i}", xn), (bsz, n_tok, h, hd)), (0, 2, 1, 3))
            scores = T.mul(T.matmul(q, T.transpose(k, (0, 1, 3, 2))), 1.0 / np.sqrt(hd))
            attn = T.softmax(T.add(scores, mask), axis=-1)  # (B,H,S,S)
            if trace is not None:
                trace.layers.append(attn.data.copy())
            attn = T.dropout(attn, rate, (seed, 3 * i, dropout_step), train)
            z = T.matmul(attn, v)  # (B,H,S,hd)
            z = T.reshape(T.transpose(z, (0, 2, 1, 3)), (bsz, n_tok, d))
            z = self._lin(f"attn_out_{i}", z)
            z = T.dropout(z, rate, (seed, 3 * i + 1, dropout_step), train)
            x = T.add(x, z)

            yn = self._ln(f"ln2_{i}", x)
            y = self._lin(f"ff2_{i}", T.elu(self._lin(f"ff1_{i}", yn)))
            y = T.dropout(y, rate, (seed, 3 * i + 2, dropout_step), train)
            x = T.add(x, y)

        x = self._ln("lnf", x)
        obs_positions = np.arange(0, n_tok, 2)[:t]
        h_obs = T.take(x, obs_positions, axis=1)  # (B,t,D)
        actions = self._lin("head", h_obs)
        hidden = h_obs.data.copy() if want_hidden else None
        return TransformerOutput(actions, trace, hidden)


class SlidingWindowController:
    """Stateful per-rollout wrapper: keeps the last T observation-action pairs
    and predicts the next action from the current prefix (no padding)."""

    def __init__(self, model: CausalTransformer):
        self.model = model
        self.obs_hist: list[np.ndarray] = []
        self.act_hist: list[np.ndarray] = []

    def reset(self):
        self.obs_hist.clear()
        self.act_hist.clear()

    def act(self, obs: np.ndarray) -> np.ndarray:
        tlen = self.model.spec.context_length
        self.obs_hist.append(np.asarray(obs, dtype=np.float32))
        obs_win = np.stack(self.obs_hist[-tlen:])[None]
        act_win = (
            np.stack(self.act_hist[-(obs_win.shape[1] - 1):])[None]
            if obs_win.shape[1] > 1
            else np.zeros((1, 0, self.model.spec.act_dim), dtype=np.float32)
        )
        out = self.model.forward(obs_win, act_win, train=False)
        action = out.actions.data[0, -1].copy()
        self.act_hist.append(action)
        return action
