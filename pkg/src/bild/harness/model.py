"""A tiny decoder-only transformer in plain numpy, with manual backprop.

Pre-norm blocks: single-head causal attention and a ReLU MLP, both with
residual connections, then a final layernorm and an untied output head.
Parameters live in a flat name -> array dict so the training loop can apply
SGD uniformly and tests can diff states. Forward/backward use float64
throughout; there is no framework and no hidden global state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["ToyModelConfig", "ToyModel"]

_LN_EPS = 1e-5


@dataclass(frozen=True)
class ToyModelConfig:
    vocab_size: int = 64
    layers: int = 2
    hidden_dim: int = 32
    context_len: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.vocab_size < 4:
            raise ValueError(f"vocab_size must be >= 4, got {self.vocab_size}")
        if self.layers < 1:
            raise ValueError(f"layers must be >= 1, got {self.layers}")
        if self.hidden_dim < 1:
            raise ValueError(f"hidden_dim must be >= 1, got {self.hidden_dim}")
        if self.context_len < 2:
            raise ValueError(f"context_len must be >= 2, got {self.context_len}")


def _ln_forward(x, gain, bias):
    mu = x.mean(-1, keepdims=True)
    xc = x - mu
    inv = 1.0 / np.sqrt((xc * xc).mean(-1, keepdims=True) + _LN_EPS)
    xhat = xc * inv
    return xhat * gain + bias, (xhat, inv, gain)


def _ln_backward(dy, cache):
    xhat, inv, gain = cache
    dgain = (dy * xhat).sum(axis=(0, 1))
    dbias = dy.sum(axis=(0, 1))
    dxhat = dy * gain
    dx = inv * (dxhat - dxhat.mean(-1, keepdims=True)
                - xhat * (dxhat * xhat).mean(-1, keepdims=True))
    return dx, dgain, dbias


def _softmax_last(x):
    e = np.exp(x - x.max(-1, keepdims=True))
    return e / e.sum(-1, keepdims=True)


def _mm_grad(a, db):
    """Weight gradient for y = a @ w given dy, folding batch and time."""
    return a.reshape(-1, a.shape[-1]).T @ db.reshape(-1, db.shape[-1])


class ToyModel:
    """Initialize from a config; weights are a pure function of the seed."""

    def __init__(self, config: ToyModelConfig, params: dict[str, np.ndarray] | None = None):
        self.config = config
        if params is not None:
            self.params = params
            return
        rng = np.random.default_rng(config.seed)
        d = config.hidden_dim
        f = 4 * d
        v = config.vocab_size
        resid_scale = 1.0 / np.sqrt(2 * config.layers)
        p: dict[str, np.ndarray] = {
            "wte": rng.normal(0.0, 1.0, (v, d)),
            "wpe": rng.normal(0.0, 0.5, (config.context_len, d)),
        }
        for l in range(config.layers):
            b = f"b{l}."
            p[b + "ln1.g"] = np.ones(d)
            p[b + "ln1.b"] = np.zeros(d)
            p[b + "wq"] = rng.normal(0.0, d ** -0.5, (d, d))
            p[b + "wk"] = rng.normal(0.0, d ** -0.5, (d, d))
            p[b + "wv"] = rng.normal(0.0, d ** -0.5, (d, d))
            p[b + "wo"] = rng.normal(0.0, resid_scale * d ** -0.5, (d, d))
            p[b + "ln2.g"] = np.ones(d)
            p[b + "ln2.b"] = np.zeros(d)
            p[b + "w1"] = rng.normal(0.0, d ** -0.5, (d, f))
            p[b + "b1"] = np.zeros(f)
            p[b + "w2"] = rng.normal(0.0, resid_scale * f ** -0.5, (f, d))
            p[b + "b2"] = np.zeros(d)
        p["lnf.g"] = np.ones(d)
        p["lnf.b"] = np.zeros(d)
        p["head"] = rng.normal(0.0, d ** -0.5, (d, v))
        self.params = p

    def copy(self) -> "ToyModel":
        return ToyModel(self.config, params={k: v.copy() for k, v in self.params.items()})

    def _check_tokens(self, tokens) -> np.ndarray:
        t = np.asarray(tokens, dtype=np.int64)
        if t.ndim != 2:
            raise ValueError(f"tokens must be [batch, time], got shape {t.shape}")
        if t.shape[1] > self.config.context_len:
            raise ValueError(
                f"sequence length {t.shape[1]} exceeds context_len {self.config.context_len}")
        if t.min() < 0 or t.max() >= self.config.vocab_size:
            raise ValueError("token ids out of vocabulary range")
        return t

    def forward(self, tokens) -> np.ndarray:
        """Logits [batch, time, vocab] for a [batch, time] token matrix."""
        return self._forward(self._check_tokens(tokens), need_cache=False)[0]

    def forward_with_cache(self, tokens):
        """Like :meth:`forward` but also returns the cache :meth:`backward` needs."""
        return self._forward(self._check_tokens(tokens), need_cache=True)

    def _forward(self, tokens, need_cache):
        p = self.params
        time = tokens.shape[1]
        scale = self.config.hidden_dim ** -0.5
        causal = np.zeros((time, time))
        causal[np.triu_indices(time, k=1)] = -np.inf
        h = p["wte"][tokens] + p["wpe"][:time]
        blocks = []
        for l in range(self.config.layers):
            b = f"b{l}."
            a1, c_ln1 = _ln_forward(h, p[b + "ln1.g"], p[b + "ln1.b"])
            q = a1 @ p[b + "wq"]
            k = a1 @ p[b + "wk"]
            vv = a1 @ p[b + "wv"]
            att = _softmax_last(q @ k.transpose(0, 2, 1) * scale + causal)
            o = att @ vv
            h = h + o @ p[b + "wo"]
            a2, c_ln2 = _ln_forward(h, p[b + "ln2.g"], p[b + "ln2.b"])
            f1 = a2 @ p[b + "w1"] + p[b + "b1"]
            r = np.maximum(f1, 0.0)
            h = h + r @ p[b + "w2"] + p[b + "b2"]
            if need_cache:
                blocks.append((c_ln1, a1, q, k, vv, att, o, c_ln2, a2, f1, r))
        hf, c_lnf = _ln_forward(h, p["lnf.g"], p["lnf.b"])
        logits = hf @ p["head"]
        cache = (tokens, blocks, c_lnf, hf) if need_cache else None
        return logits, cache

    def backward(self, cache, dlogits) -> dict[str, np.ndarray]:
        """Parameter gradients given d(loss)/d(logits) from a cached forward."""
        tokens, blocks, c_lnf, hf = cache
        p = self.params
        scale = self.config.hidden_dim ** -0.5
        grads: dict[str, np.ndarray] = {}
        grads["head"] = _mm_grad(hf, dlogits)
        dh, grads["lnf.g"], grads["lnf.b"] = _ln_backward(dlogits @ p["head"].T, c_lnf)
        for l in reversed(range(self.config.layers)):
            b = f"b{l}."
            c_ln1, a1, q, k, vv, att, o, c_ln2, a2, f1, r = blocks[l]
            dr = dh @ p[b + "w2"].T
            grads[b + "w2"] = _mm_grad(r, dh)
            grads[b + "b2"] = dh.sum(axis=(0, 1))
            df1 = dr * (f1 > 0.0)
            grads[b + "w1"] = _mm_grad(a2, df1)
            grads[b + "b1"] = df1.sum(axis=(0, 1))
            dx2, grads[b + "ln2.g"], grads[b + "ln2.b"] = _ln_backward(df1 @ p[b + "w1"].T, c_ln2)
            dh = dh + dx2
            do = dh @ p[b + "wo"].T
            grads[b + "wo"] = _mm_grad(o, dh)
            datt = do @ vv.transpose(0, 2, 1)
            dvv = att.transpose(0, 2, 1) @ do
            ds = att * (datt - (datt * att).sum(-1, keepdims=True))
            dq = ds @ k * scale
            dk = ds.transpose(0, 2, 1) @ q * scale
            grads[b + "wq"] = _mm_grad(a1, dq)
            grads[b + "wk"] = _mm_grad(a1, dk)
            grads[b + "wv"] = _mm_grad(a1, dvv)
            da1 = dq @ p[b + "wq"].T + dk @ p[b + "wk"].T + dvv @ p[b + "wv"].T
            dx1, grads[b + "ln1.g"], grads[b + "ln1.b"] = _ln_backward(da1, c_ln1)
            dh = dh + dx1
        grads["wte"] = np.zeros_like(p["wte"])
        np.add.at(grads["wte"], tokens, dh)
        grads["wpe"] = np.zeros_like(p["wpe"])
        grads["wpe"][:tokens.shape[1]] = dh.sum(axis=0)
        return grads

    def sgd_step(self, grads: dict[str, np.ndarray], learning_rate: float) -> None:
        for name, g in grads.items():
            self.params[name] -= learning_rate * g
