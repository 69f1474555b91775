"""Decomposed attention for a text query over [V, A, T] and the layer built from it.

A text token's causal attention over the multimodal prefix splits into a
cross-attention per media stream plus self-attention over the text prefix.
The adaptive form reweights the two-way [V, T] split with sigmoid weights of
the branch log-partition scores, which reproduces the monolithic softmax
exactly. The fixed form simply sums the branches.

Cross branches never see positional encodings (``debias=True``); rotary
encoding, when enabled, only touches text-to-text scores.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from trkit.dattn.core import (
    AlphaWeights,
    Modality,
    OpCounter,
    ProjectionWeights,
    Rotary,
    TokenSequence,
    alpha_weights,
    branch_backward,
    branch_forward,
    reference_attention,
    softmax,
)
from trkit.errors import DegenerateAttentionError

CROSS = (Modality.VISUAL, Modality.AUDIO)


@dataclass(frozen=True)
class LayerConfig:
    mode: str = "fixed"
    v2v: str = "frame"
    rope: Rotary | None = Rotary()
    debias: bool = True

    def __post_init__(self):
        if self.mode not in ("fixed", "adaptive"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.v2v not in ("frame", "token", "full"):
            raise ValueError(f"unknown v2v block structure {self.v2v!r}")


def _text_prefix(t_index: int, seq: TokenSequence) -> np.ndarray:
    if not 0 <= t_index < len(seq) or seq.modality[t_index] != Modality.TEXT:
        raise ValueError(f"token {t_index} is not a text token")
    text = seq.indices(Modality.TEXT)
    return text[text <= t_index]


def _branch_inputs(t_index, seq, w, rope, debias):
    """Per-branch (query, keys, values, rows, key positions or None) for one text token."""
    x = seq.embeddings
    q = w.score_scale * (x[t_index] @ w.wq)
    p_t = seq.position[t_index]
    out = {}
    for m in CROSS:
        rows = seq.indices(m)
        K, V = x[rows] @ w.wk, x[rows] @ w.wv
        if rope is not None and not debias:
            out[m] = (rope.apply(q, p_t), rope.apply(K, seq.position[rows]), V, rows, True)
        else:
            out[m] = (q, K, V, rows, False)
    rows = _text_prefix(t_index, seq)
    K, V = x[rows] @ w.wk, x[rows] @ w.wv
    if rope is not None:
        out[Modality.TEXT] = (rope.apply(q, p_t), rope.apply(K, seq.position[rows]), V, rows, True)
    else:
        out[Modality.TEXT] = (q, K, V, rows, False)
    return out


def branch_outputs(t_index: int, seq: TokenSequence, w: ProjectionWeights, rope: Rotary | None = None,
                   debias: bool = True, counter: OpCounter | None = None) -> dict:
    """Raw (pre-output-projection) branch outputs and log-partition scores."""
    inputs = _branch_inputs(t_index, seq, w, rope, debias)
    res = {}
    for m, (q, K, V, _, _) in inputs.items():
        o, s, _ = branch_forward(q, K, V, counter)
        res[m] = (o, s)
    return res


def decomposed_adaptive(t_index: int, seq: TokenSequence, w: ProjectionWeights, rope: Rotary | None = None,
                        debias: bool = True, counter: OpCounter | None = None) -> np.ndarray:
    """alpha_V * XA(t, V) + alpha_T * SA(t, T), projected by ``wo``.

    Only the two-way [V, T] split is supported; audio tokens raise.
    """
    if len(seq.indices(Modality.AUDIO)):
        raise ValueError("adaptive weighting is defined for [V, T] sequences only; use decomposed_fixed")
    res = branch_outputs(t_index, seq, w, rope, debias, counter)
    (o_v, s_v), (o_t, s_t) = res[Modality.VISUAL], res[Modality.TEXT]
    a = alpha_weights(s_v, s_t)
    return (a.alpha_v * o_v + a.alpha_t * o_t) @ w.wo


def decomposed_fixed(t_index: int, seq: TokenSequence, w: ProjectionWeights, rope: Rotary | None = None,
                     debias: bool = True, counter: OpCounter | None = None) -> np.ndarray:
    """XA(t, V) + XA(t, A) + SA(t, T) with unit weights; empty streams add zero."""
    res = branch_outputs(t_index, seq, w, rope, debias, counter)
    if all(s == -np.inf for _, s in res.values()):
        raise DegenerateAttentionError("no visual, audio or text tokens to attend")
    o = res[Modality.VISUAL][0] + res[Modality.AUDIO][0] + res[Modality.TEXT][0]
    return o @ w.wo


def alphas_for(t_index: int, seq: TokenSequence, w: ProjectionWeights, mode: str = "adaptive",
               rope: Rotary | None = None) -> AlphaWeights:
    if mode == "fixed":
        return AlphaWeights.unit()
    res = branch_outputs(t_index, seq, w, rope)
    return alpha_weights(res[Modality.VISUAL][1], res[Modality.TEXT][1])


def debiased_cross_attention(t_index: int, seq: TokenSequence, w: ProjectionWeights, rope: Rotary | None = None,
                             debias: bool = True, counter: OpCounter | None = None) -> np.ndarray:
    """Sum of the text-to-visual and text-to-audio branches, projected by ``wo``.

    With ``debias=True`` the result ignores ``seq.position`` of media tokens
    entirely; with ``debias=False`` both sides are rotary-encoded.
    """
    res = branch_outputs(t_index, seq, w, rope, debias, counter)
    return (res[Modality.VISUAL][0] + res[Modality.AUDIO][0]) @ w.wo


def monolithic_causal_row(t_index: int, seq: TokenSequence, w: ProjectionWeights, rope: Rotary | None = None,
                          debias: bool = True, counter: OpCounter | None = None) -> np.ndarray:
    """One softmax over every token up to ``t_index`` (the undecomposed reference).

    Rotary scores ``R(p_t) q . R(p_j) k`` are folded into a single query by
    rotating each text key by the relative offset ``p_j - p_t``.
    """
    x = seq.embeddings
    rows = np.flatnonzero(np.arange(len(seq)) <= t_index)
    q = w.score_scale * (x[t_index] @ w.wq)
    K, V = x[rows] @ w.wk, x[rows] @ w.wv
    if rope is not None:
        rel = seq.position[rows] - seq.position[t_index]
        rotate = seq.modality[rows] == Modality.TEXT
        if not debias:
            rotate[:] = True
        K = K.copy()
        K[rotate] = rope.apply(K[rotate], rel[rotate])
    return reference_attention(q, K, V, counter) @ w.wo


def _block_attention(q: np.ndarray, K: np.ndarray, V: np.ndarray, counter: OpCounter | None,
                     chunk: int = 512) -> np.ndarray:
    out = np.empty((len(q), V.shape[1]))
    for lo in range(0, len(q), chunk):
        out[lo:lo + chunk] = softmax(q[lo:lo + chunk] @ K.T) @ V
    if counter is not None:
        counter.add(len(q) * len(K))
    return out


def block_self_attention(seq: TokenSequence, w: ProjectionWeights, modality: Modality, blocks: str = "frame",
                         counter: OpCounter | None = None) -> np.ndarray:
    """Bidirectional self-attention of one media stream restricted to blocks.

    ``frame``: tokens sharing a ``segment_id`` attend to each other.
    ``token``: each token attends to itself only. ``full``: one block.
    """
    rows = seq.indices(modality)
    x = seq.embeddings[rows]
    q = w.score_scale * (x @ w.wq)
    K, V = x @ w.wk, x @ w.wv
    if blocks == "full":
        return _block_attention(q, K, V, counter) @ w.wo
    if blocks == "token":
        if counter is not None:
            counter.add(len(rows))
        return V @ w.wo
    if blocks != "frame":
        raise ValueError(f"unknown block structure {blocks!r}")
    out = np.empty_like(V)
    seg = seq.segment_id[rows]
    bounds = np.flatnonzero(np.diff(seg)) + 1
    for lo, hi in zip(np.r_[0, bounds], np.r_[bounds, len(rows)]):
        out[lo:hi] = _block_attention(q[lo:hi], K[lo:hi], V[lo:hi], counter)
    return out @ w.wo


def diagonal_v2v(seq: TokenSequence, w: ProjectionWeights, blocks: str = "frame",
                 counter: OpCounter | None = None) -> np.ndarray:
    if not len(seq.indices(Modality.VISUAL)):
        raise ValueError("sequence has no visual tokens")
    return block_self_attention(seq, w, Modality.VISUAL, blocks, counter)


def layer_forward(seq: TokenSequence, w: ProjectionWeights, config: LayerConfig = LayerConfig(),
                  counter: OpCounter | None = None) -> np.ndarray:
    """Attention output for every token, same shape as ``seq.embeddings``."""
    if len(seq) == 0:
        raise ValueError("empty token sequence")
    out = np.zeros_like(seq.embeddings)
    for m in CROSS:
        rows = seq.indices(m)
        if len(rows):
            out[rows] = block_self_attention(seq, w, m, config.v2v, counter)
    kernel = decomposed_adaptive if config.mode == "adaptive" else decomposed_fixed
    for t in seq.indices(Modality.TEXT):
        out[t] = kernel(int(t), seq, w, config.rope, config.debias, counter)
    return out


def causal_self_attention(seq: TokenSequence, w: ProjectionWeights, rope: Rotary | None = None) -> np.ndarray:
    """Plain causal attention over the whole sequence (reference for text-only input)."""
    x = seq.embeddings
    Q = w.score_scale * (x @ w.wq)
    K, V = x @ w.wk, x @ w.wv
    if rope is not None:
        Q, K = rope.apply(Q, seq.position), rope.apply(K, seq.position)
    out = np.empty_like(x)
    for i in range(len(seq)):
        out[i] = reference_attention(Q[i], K[: i + 1], V[: i + 1])
    return out @ w.wo


def text_rows_fixed(seq: TokenSequence, w: ProjectionWeights, rope: Rotary | None = None,
                    debias: bool = True) -> np.ndarray:
    rows = seq.indices(Modality.TEXT)
    return np.stack([decomposed_fixed(int(t), seq, w, rope, debias) for t in rows]) if len(rows) else np.zeros((0, seq.d_model))


def text_rows_fixed_backward(seq: TokenSequence, w: ProjectionWeights, grad_out: np.ndarray,
                             rope: Rotary | None = None, debias: bool = True) -> dict[str, np.ndarray]:
    """Analytic gradient of ``sum(grad_out * text_rows_fixed(...))``.

    Returns gradients for ``wq``, ``wk``, ``wv``, ``wo`` and the embeddings ``x``.
    """
    x = seq.embeddings
    grads = {n: np.zeros_like(a) for n, a in w.params().items()}
    grads["x"] = np.zeros_like(x)
    c = w.score_scale
    for g_y, t in zip(grad_out, seq.indices(Modality.TEXT)):
        t = int(t)
        p_t = seq.position[t]
        inputs = _branch_inputs(t, seq, w, rope, debias)
        o = np.zeros(w.wv.shape[1])
        caches = {}
        for m, (q, K, V, rows, _) in inputs.items():
            o_m, _, cache = branch_forward(q, K, V)
            o += o_m
            caches[m] = cache
        grads["wo"] += np.outer(o, g_y)
        g_o = w.wo @ g_y
        g_q_raw = np.zeros_like(o)
        for m, (_, _, _, rows, rotated) in inputs.items():
            gb = branch_backward(caches[m], g_o)
            if gb is None:
                continue
            g_q, g_K, g_V = gb
            if rotated:
                g_q = rope.apply(g_q, -p_t)
                g_K = rope.apply(g_K, -seq.position[rows])
            g_q_raw += g_q
            grads["wk"] += x[rows].T @ g_K
            grads["wv"] += x[rows].T @ g_V
            grads["x"][rows] += g_K @ w.wk.T + g_V @ w.wv.T
        grads["wq"] += c * np.outer(x[t], g_q_raw)
        grads["x"][t] += c * (w.wq @ g_q_raw)
    return grads
