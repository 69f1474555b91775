"""Token containers and single-query attention primitives (float64 numpy)."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import IntEnum

import numpy as np

from trkit.errors import DegenerateAttentionError


class Modality(IntEnum):
    VISUAL = 0
    AUDIO = 1
    TEXT = 2


class OpCounter:
    """Tallies attention score entries (one q.k dot product each)."""

    def __init__(self):
        self.scores = 0

    def add(self, n: int) -> None:
        self.scores += int(n)


@dataclass(frozen=True, eq=False)
class TokenSequence:
    """The concatenation [V, A, T] of visual, audio and text tokens.

    ``segment_id`` is the frame index for visual tokens and the chunk index for
    audio tokens; it is ignored for text.
    """

    embeddings: np.ndarray
    modality: np.ndarray
    segment_id: np.ndarray
    position: np.ndarray

    def __post_init__(self):
        n = len(self.embeddings)
        if self.embeddings.ndim != 2:
            raise ValueError("embeddings must be [n_tokens, d_model]")
        for name in ("modality", "segment_id", "position"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} length {len(getattr(self, name))} != {n} tokens")
        if np.any(np.diff(self.modality) < 0):
            raise ValueError("tokens must be laid out as all visual, then audio, then text")
        for m in (Modality.VISUAL, Modality.AUDIO):
            if np.any(np.diff(self.segment_id[self.modality == m]) < 0):
                raise ValueError(f"{m.name.lower()} segment ids must be non-decreasing")
        if not np.all(np.isfinite(self.embeddings)):
            raise FloatingPointError("non-finite embedding entries")

    def __len__(self) -> int:
        return len(self.embeddings)

    @property
    def d_model(self) -> int:
        return self.embeddings.shape[1]

    def indices(self, modality: Modality) -> np.ndarray:
        return np.flatnonzero(self.modality == modality)

    def with_positions(self, position: np.ndarray) -> "TokenSequence":
        return replace(self, position=np.asarray(position))

    def with_embeddings(self, embeddings: np.ndarray) -> "TokenSequence":
        return replace(self, embeddings=np.asarray(embeddings, dtype=np.float64))

    @classmethod
    def build(
        cls,
        visual: np.ndarray | None = None,
        audio: np.ndarray | None = None,
        text: np.ndarray | None = None,
        visual_segments: np.ndarray | None = None,
        audio_segments: np.ndarray | None = None,
        d_model: int | None = None,
    ) -> "TokenSequence":
        parts = [p for p in (visual, audio, text) if p is not None]
        d = d_model if d_model is not None else parts[0].shape[1]
        blocks = [np.zeros((0, d)) if p is None else np.asarray(p, dtype=np.float64) for p in (visual, audio, text)]
        counts = [len(b) for b in blocks]
        seg_v = np.zeros(counts[0], int) if visual_segments is None else np.asarray(visual_segments)
        seg_a = np.zeros(counts[1], int) if audio_segments is None else np.asarray(audio_segments)
        return cls(
            embeddings=np.concatenate(blocks, axis=0),
            modality=np.repeat([Modality.VISUAL, Modality.AUDIO, Modality.TEXT], counts),
            segment_id=np.concatenate([seg_v, seg_a, np.zeros(counts[2], int)]),
            position=np.arange(sum(counts)),
        )

    @classmethod
    def random(
        cls,
        rng: np.random.Generator,
        d_model: int,
        n_frames: int = 0,
        tokens_per_frame: int = 1,
        n_text: int = 1,
        n_audio_chunks: int = 0,
        tokens_per_chunk: int = 1,
        scale: float = 1.0,
    ) -> "TokenSequence":
        nv, na = n_frames * tokens_per_frame, n_audio_chunks * tokens_per_chunk
        x = rng.standard_normal((nv + na + n_text, d_model)) * scale
        return cls.build(
            visual=x[:nv],
            audio=x[nv:nv + na],
            text=x[nv + na:],
            visual_segments=np.repeat(np.arange(n_frames), tokens_per_frame),
            audio_segments=np.repeat(np.arange(n_audio_chunks), tokens_per_chunk),
            d_model=d_model,
        )


@dataclass(frozen=True, eq=False)
class ProjectionWeights:
    """One shared single-head Q/K/V/O projection set, row-vector convention (x @ W)."""

    wq: np.ndarray
    wk: np.ndarray
    wv: np.ndarray
    wo: np.ndarray
    scale: float | None = None

    NAMES = ("wq", "wk", "wv", "wo")

    @property
    def d_model(self) -> int:
        return self.wq.shape[0]

    @property
    def score_scale(self) -> float:
        return 1.0 / math.sqrt(self.wq.shape[1]) if self.scale is None else self.scale

    @classmethod
    def random(cls, rng: np.random.Generator, d_model: int, gain: float = 1.0) -> "ProjectionWeights":
        s = gain / math.sqrt(d_model)
        return cls(*(rng.standard_normal((d_model, d_model)) * s for _ in range(4)))

    @classmethod
    def identity(cls, d_model: int, scale: float | None = None) -> "ProjectionWeights":
        eye = np.eye(d_model)
        return cls(eye, eye, eye, eye, scale)

    def params(self) -> dict[str, np.ndarray]:
        return {n: getattr(self, n) for n in self.NAMES}

    def replace(self, **arrays) -> "ProjectionWeights":
        return replace(self, **arrays)


@dataclass(frozen=True)
class Rotary:
    """Rotary positional encoding over (i, i + d/2) coordinate pairs."""

    base: float = 10000.0

    def apply(self, x: np.ndarray, position) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        d = x.shape[-1]
        if d % 2:
            raise ValueError("rotary encoding needs an even model dimension")
        half = d // 2
        inv_freq = self.base ** (-np.arange(half) / half)
        angle = np.multiply.outer(np.asarray(position, dtype=np.float64), inv_freq)
        cos, sin = np.cos(angle), np.sin(angle)
        x1, x2 = x[..., :half], x[..., half:]
        return np.concatenate([x1 * cos - x2 * sin, x2 * cos + x1 * sin], axis=-1)


@dataclass(frozen=True)
class AlphaWeights:
    alpha_v: float
    alpha_t: float
    alpha_a: float | None = None
    fixed: bool = False

    @classmethod
    def unit(cls) -> "AlphaWeights":
        return cls(1.0, 1.0, 1.0, fixed=True)


def _check_finite(*arrays) -> None:
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise FloatingPointError("non-finite attention input")


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - np.max(logits, axis=-1, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=-1, keepdims=True)


def reference_attention(q: np.ndarray, K: np.ndarray, V: np.ndarray, counter: OpCounter | None = None) -> np.ndarray:
    """softmax(q . K^T) . V for a single query, with max-shifted exponentials."""
    q, K, V = (np.asarray(a, dtype=np.float64) for a in (q, K, V))
    if len(K) != len(V):
        raise ValueError(f"key/value row mismatch: {len(K)} vs {len(V)}")
    if len(K) == 0:
        raise DegenerateAttentionError("attention over zero keys")
    _check_finite(q, K, V)
    if counter is not None:
        counter.add(len(K))
    return softmax(K @ q) @ V


def lse_score(q: np.ndarray, K: np.ndarray) -> float:
    """log sum_n exp(q . k_n); ``-inf`` when ``K`` has no rows."""
    q, K = np.asarray(q, dtype=np.float64), np.asarray(K, dtype=np.float64)
    _check_finite(q, K)
    if len(K) == 0:
        return -math.inf
    s = K @ q
    m = float(np.max(s))
    return m + math.log(float(np.sum(np.exp(s - m))))


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def alpha_weights(s_v: float, s_t: float) -> AlphaWeights:
    """Mixing weights from branch log-partition scores: sigmoid(+-(s_v - s_t)).

    Infinite scores saturate exactly: -inf (empty branch) gets weight 0, +inf
    gets weight 1. Equal infinities have no defined split and raise.
    """
    if math.isnan(s_v) or math.isnan(s_t):
        raise FloatingPointError(f"score must not be NaN, got ({s_v}, {s_t})")
    if s_v == -math.inf and s_t == -math.inf:
        raise DegenerateAttentionError("both visual and text branches are empty")
    if s_v == s_t == math.inf:
        raise FloatingPointError("both scores are +inf")
    if s_v == -math.inf or s_t == math.inf:
        return AlphaWeights(0.0, 1.0)
    if s_t == -math.inf or s_v == math.inf:
        return AlphaWeights(1.0, 0.0)
    return AlphaWeights(_sigmoid(s_v - s_t), _sigmoid(s_t - s_v))


@dataclass
class BranchCache:
    """What a softmax branch keeps for its backward pass."""

    q: np.ndarray
    K: np.ndarray
    V: np.ndarray
    p: np.ndarray = field(repr=False)


def branch_forward(q, K, V, counter: OpCounter | None = None):
    """One softmax branch; empty key sets give (zero vector, -inf, None)."""
    if len(K) == 0:
        return np.zeros(V.shape[1] if V.ndim == 2 else len(q)), -math.inf, None
    _check_finite(q, K, V)
    if counter is not None:
        counter.add(len(K))
    s = K @ q
    m = float(np.max(s))
    e = np.exp(s - m)
    z = float(np.sum(e))
    p = e / z
    return p @ V, m + math.log(z), BranchCache(q, K, V, p)


def branch_backward(cache: BranchCache | None, g_out: np.ndarray):
    """Gradients (q, K, V) of ``p @ V`` with ``p = softmax(K @ q)``."""
    if cache is None:
        return None
    g_V = np.outer(cache.p, g_out)
    g_p = cache.V @ g_out
    g_s = cache.p * (g_p - cache.p @ g_p)
    return cache.K.T @ g_s, np.outer(g_s, cache.q), g_V
