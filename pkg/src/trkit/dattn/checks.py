"""Numerical invariant suite for the decomposed-attention kernels.

Every check returns a :class:`CheckResult`; :func:`run_suite` runs them all.
The same functions back the CLI ``dattn-check`` command and the acceptance tests.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from trkit.dattn.core import (
    Modality,
    OpCounter,
    ProjectionWeights,
    Rotary,
    TokenSequence,
    alpha_weights,
    lse_score,
    reference_attention,
)
from trkit.dattn.decomposed import (
    branch_outputs,
    debiased_cross_attention,
    decomposed_adaptive,
    decomposed_fixed,
    diagonal_v2v,
    monolithic_causal_row,
    text_rows_fixed,
    text_rows_fixed_backward,
)
from trkit.dattn.timeline import TokenTimeline, op_count, tokens_for_time


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    tolerance: float | str
    detail: str = ""
    seed: int | None = None
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        seed = f" seed={self.seed}" if self.seed is not None else ""
        return f"[{status}] {self.name:<26} value={self.value:<12.4g} tol={self.tolerance}{seed}  {self.detail}"


def _timed(fn):
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        res = fn(*args, **kwargs)
        res.seconds = time.perf_counter() - t0
        return res

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


def sign_flip_fault(kernel: Callable) -> Callable:
    """Wrap a kernel so its output has the wrong sign (fault-injection harness)."""

    def faulty(*args, **kwargs):
        return -kernel(*args, **kwargs)

    return faulty


def _random_case(seed: int, dims: Sequence[int], audio: bool = False, rope: bool = True):
    rng = np.random.default_rng(seed)
    d = int(dims[seed % len(dims)])
    n_frames = int(rng.integers(0, 9))
    tpf = int(rng.integers(1, 9))
    while n_frames * tpf > 64:
        tpf -= 1
    m = int(rng.integers(1, 33))
    chunks = int(rng.integers(0, 4)) if audio else 0
    seq = TokenSequence.random(rng, d, n_frames, tpf, m, chunks, 2)
    w = ProjectionWeights.random(rng, d, gain=1.5)
    return seq, w, (Rotary() if rope else None)


@_timed
def check_decomposition_identity(seeds: int = 100, dims: Sequence[int] = (8, 16, 32), tol: float = 1e-10,
                                 kernel: Callable = decomposed_adaptive) -> CheckResult:
    """alpha-adaptive decomposition against one causal softmax over [V, T]."""
    worst, worst_seed = 0.0, None
    for seed in range(seeds):
        seq, w, rope = _random_case(seed, dims)
        for t in seq.indices(Modality.TEXT):
            err = float(np.max(np.abs(kernel(int(t), seq, w, rope) - monolithic_causal_row(int(t), seq, w, rope))))
            if err > worst or not math.isfinite(err):
                worst, worst_seed = err, seed
    return CheckResult("decomposition_identity", worst < tol, worst, tol, f"{seeds} seeds, d in {list(dims)}",
                       worst_seed)


@_timed
def check_fixed_sum(seeds: int = 100, dims: Sequence[int] = (8, 16, 32),
                    kernel: Callable = decomposed_fixed) -> CheckResult:
    """Fixed-alpha output equals the sum of three independent softmax attentions."""
    worst, worst_seed = 0.0, None
    for seed in range(seeds):
        seq, w, rope = _random_case(seed, dims, audio=True)
        x = seq.embeddings
        for t in seq.indices(Modality.TEXT):
            t = int(t)
            q = w.score_scale * (x[t] @ w.wq)
            total = np.zeros(seq.d_model)
            for m in (Modality.VISUAL, Modality.AUDIO):
                rows = seq.indices(m)
                if len(rows):
                    total += reference_attention(q, x[rows] @ w.wk, x[rows] @ w.wv)
            rows = seq.indices(Modality.TEXT)
            rows = rows[rows <= t]
            total += reference_attention(
                rope.apply(q, seq.position[t]), rope.apply(x[rows] @ w.wk, seq.position[rows]), x[rows] @ w.wv
            )
            err = float(np.max(np.abs(kernel(t, seq, w, rope) - total @ w.wo)))
            if err > worst or not math.isfinite(err):
                worst, worst_seed = err, seed
    return CheckResult("fixed_branch_sum", worst < 1e-10, worst, 1e-10, f"{seeds} seeds", worst_seed)


@_timed
def check_alpha_complement(n: int = 10_000, seed: int = 0, tol: float = 1e-15) -> CheckResult:
    rng = np.random.default_rng(seed)
    scale = 10.0 ** rng.uniform(-3, 2.5, size=(n, 1))
    pairs = rng.standard_normal((n, 2)) * scale
    worst = 0.0
    for s_v, s_t in pairs:
        a = alpha_weights(float(s_v), float(s_t))
        worst = max(worst, abs(a.alpha_v + a.alpha_t - 1.0))
    sentinels_ok = True
    for s in (0.0, -700.0, 700.0, 1e300, -1e300):
        a, b = alpha_weights(-math.inf, s), alpha_weights(s, -math.inf)
        sentinels_ok &= (a.alpha_v, a.alpha_t, b.alpha_v, b.alpha_t) == (0.0, 1.0, 1.0, 0.0)
        a, b = alpha_weights(math.inf, s), alpha_weights(s, math.inf)
        sentinels_ok &= (a.alpha_v, a.alpha_t, b.alpha_v, b.alpha_t) == (1.0, 0.0, 0.0, 1.0)
    a, b = alpha_weights(math.inf, -math.inf), alpha_weights(-math.inf, math.inf)
    sentinels_ok &= (a.alpha_v, a.alpha_t, b.alpha_v, b.alpha_t) == (1.0, 0.0, 0.0, 1.0)
    return CheckResult("alpha_complement", worst <= tol and sentinels_ok, worst, tol,
                       f"{n} pairs, +-inf sentinels {'exact' if sentinels_ok else 'WRONG'}")


def finite_difference_grads(seq, w, grad_out, rope, h: float = 1e-5) -> dict[str, np.ndarray]:
    out = {}
    for name, P in w.params().items():
        num = np.zeros_like(P)
        for idx in np.ndindex(P.shape):
            plus, minus = P.copy(), P.copy()
            plus[idx] += h
            minus[idx] -= h
            f_plus = np.sum(grad_out * text_rows_fixed(seq, w.replace(**{name: plus}), rope))
            f_minus = np.sum(grad_out * text_rows_fixed(seq, w.replace(**{name: minus}), rope))
            num[idx] = (f_plus - f_minus) / (2 * h)
        out[name] = num
    return out


@_timed
def check_gradients(d: int = 8, seed: int = 0, h: float = 1e-5, tol: float = 1e-6) -> CheckResult:
    """Analytic backward of the fixed-alpha text rows against central differences.

    Relative error per parameter tensor: ||analytic - numeric|| / max(||analytic||, ||numeric||).
    """
    rng = np.random.default_rng(seed)
    seq = TokenSequence.random(rng, d, n_frames=3, tokens_per_frame=2, n_text=5, n_audio_chunks=2, tokens_per_chunk=2)
    w = ProjectionWeights.random(rng, d, gain=1.5)
    rope = Rotary()
    grad_out = rng.standard_normal((5, d))
    analytic = text_rows_fixed_backward(seq, w, grad_out, rope)
    numeric = finite_difference_grads(seq, w, grad_out, rope, h)
    rels, entry = {}, 0.0
    for name in w.NAMES:
        a, nmr = analytic[name], numeric[name]
        rels[name] = float(np.linalg.norm(a - nmr) / max(np.linalg.norm(a), np.linalg.norm(nmr)))
        entry = max(entry, float(np.max(np.abs(a - nmr) / np.maximum(np.maximum(np.abs(a), np.abs(nmr)), 1e-300))))
    worst = max(rels.values())
    detail = ", ".join(f"{k}={v:.1e}" for k, v in rels.items()) + f"; worst entrywise {entry:.1e}"
    return CheckResult("gradient_fd", worst < tol, worst, tol, detail, seed)


@_timed
def check_linear_complexity(frames: Sequence[int] = (512, 1024), tokens_per_frame: int = 2, d: int = 4,
                            tol: float = 0.05) -> CheckResult:
    rng = np.random.default_rng(0)
    w = ProjectionWeights.random(rng, d)
    counts = {}
    for mode in ("frame", "full"):
        for f in frames:
            seq = TokenSequence.random(rng, d, f, tokens_per_frame, n_text=0)
            c = OpCounter()
            diagonal_v2v(seq, w, mode, c)
            counts[mode, f] = c.scores
    r_diag = counts["frame", frames[1]] / counts["frame", frames[0]]
    r_full = counts["full", frames[1]] / counts["full", frames[0]]
    ok = abs(r_diag - 2) <= 2 * tol and abs(r_full - 4) <= 4 * tol
    return CheckResult("linear_complexity", ok, r_diag, f"2+-{tol:.0%} (full 4+-{tol:.0%})",
                       f"diagonal ratio {r_diag:.3f}, full ratio {r_full:.3f}, frames {list(frames)}")


@_timed
def check_token_arithmetic() -> CheckResult:
    tl = TokenTimeline(fps=1.0, visual_tokens_per_frame=400)
    n_tokens = tl.n_visual_tokens(3600)
    vis, _ = tokens_for_time(tl, (0.0, 3600.0))
    full = op_count(tl, 3600, "full")
    ok = n_tokens == 1_440_000 and len(vis) == 1_440_000 and full == 1_440_000**2
    ok &= op_count(tl, 3600, "diagonal") == 3600 * 400**2
    return CheckResult("token_arithmetic", ok, n_tokens, "== 1,440,000",
                       f"visual span {len(vis)}, full ops {full:.3e}, diagonal ops {op_count(tl, 3600):.3e}")


@_timed
def check_debias_invariance(seeds: int = 20, shift: int = 1000, kernel: Callable = debiased_cross_attention) -> CheckResult:
    failures = []
    for seed in range(seeds):
        seq, w, rope = _random_case(seed, (8, 16), audio=True)
        moved = seq.position.copy()
        media = seq.modality != Modality.TEXT
        moved[media] += shift
        shifted = seq.with_positions(moved)
        for t in seq.indices(Modality.TEXT):
            if not np.array_equal(kernel(int(t), seq, w, rope), kernel(int(t), shifted, w, rope)):
                failures.append(seed)
                break
    return CheckResult("debias_invariance", not failures, len(failures), "0 mismatches",
                       f"{seeds} seeds, +{shift} media position shift", failures[0] if failures else None)


@_timed
def check_block_locality(seeds: int = 20) -> CheckResult:
    failures = []
    for seed in range(seeds):
        rng = np.random.default_rng(seed)
        d = 8
        seq = TokenSequence.random(rng, d, n_frames=4, tokens_per_frame=3, n_text=1)
        w = ProjectionWeights.random(rng, d)
        base = diagonal_v2v(seq, w)
        visual = seq.modality == Modality.VISUAL
        others = visual & (seq.segment_id != 1)
        x = seq.embeddings.copy()
        x[others] += rng.standard_normal((int(others.sum()), d))
        moved = diagonal_v2v(seq.with_embeddings(x), w)
        keep = seq.segment_id[visual] == 1
        if not np.array_equal(base[keep], moved[keep]):
            failures.append(seed)
    return CheckResult("block_locality", not failures, len(failures), "0 mismatches", f"{seeds} seeds",
                       failures[0] if failures else None)


@_timed
def check_stability(seeds: int = 20, magnitude: float = 700.0) -> CheckResult:
    bad = []
    for seed in range(seeds):
        rng = np.random.default_rng(seed)
        d, n = 8, 50
        K = rng.standard_normal((n, d))
        q = rng.standard_normal(d)
        q *= magnitude / np.max(np.abs(K @ q))
        outs = [lse_score(q, K), reference_attention(q, K, rng.standard_normal((n, d)))]
        if not all(np.all(np.isfinite(o)) for o in outs):
            bad.append(seed)
    return CheckResult("stability", not bad, len(bad), "finite", f"|logit| up to {magnitude:g}",
                       bad[0] if bad else None)


def alpha_saturation_means(ns: Sequence[int] = (10, 100, 1000), m: int = 16, seeds: int = 200, d: int = 16) -> list[float]:
    """Mean adaptive visual weight over seeds with i.i.d. N(0, 1) logits."""
    q = np.ones(d) / math.sqrt(d)
    means = []
    for n in ns:
        vals = []
        for seed in range(seeds):
            rng = np.random.default_rng([seed, n])
            s_v = lse_score(q, rng.standard_normal((n, d)))
            s_t = lse_score(q, rng.standard_normal((m, d)))
            vals.append(alpha_weights(s_v, s_t).alpha_v)
        means.append(float(np.mean(vals)))
    return means


@_timed
def check_alpha_saturation(ns: Sequence[int] = (10, 100, 1000), m: int = 16, seeds: int = 200) -> CheckResult:
    means = alpha_saturation_means(ns, m, seeds)
    ok = all(a < b for a, b in zip(means, means[1:]))
    return CheckResult("alpha_saturation", ok, means[-1], "strictly increasing",
                       "mean alpha_v " + ", ".join(f"N={n}: {v:.3f}" for n, v in zip(ns, means)))


def run_suite(seeds: int = 100, dims: Sequence[int] = (8, 16, 32), mode: str = "adaptive",
              inject_fault: bool = False) -> list[CheckResult]:
    adaptive = sign_flip_fault(decomposed_adaptive) if inject_fault else decomposed_adaptive
    fixed = sign_flip_fault(decomposed_fixed) if inject_fault else decomposed_fixed
    if mode == "adaptive":
        equivalence = check_decomposition_identity(seeds, dims, kernel=adaptive)
    elif mode == "fixed":
        equivalence = check_fixed_sum(seeds, dims, kernel=fixed)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    return [
        equivalence,
        check_alpha_complement(),
        check_gradients(),
        check_linear_complexity(),
        check_token_arithmetic(),
        check_debias_invariance(),
        check_block_locality(),
        check_stability(),
        check_alpha_saturation(),
    ]


def branch_scores(t_index: int, seq: TokenSequence, w: ProjectionWeights) -> tuple[float, float, float]:
    """(s_v, s_a, s_t) log-partition scores for one text token."""
    res = branch_outputs(t_index, seq, w)
    return res[Modality.VISUAL][1], res[Modality.AUDIO][1], res[Modality.TEXT][1]
