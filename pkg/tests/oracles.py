"""Brute-force reference implementations used only by the test suite."""

from __future__ import annotations

import numpy as np


def bitmap(pairs, horizon_ms: int) -> np.ndarray:
    """Per-millisecond occupancy of integer-ms ranges [s, e)."""
    grid = np.zeros(horizon_ms, dtype=bool)
    for s, e in pairs:
        grid[int(s):int(e)] = True
    return grid


def runs(grid: np.ndarray) -> list[tuple[int, int]]:
    """Maximal runs of True as [start, end) integer pairs."""
    edges = np.flatnonzero(np.diff(np.concatenate(([0], grid.astype(np.int8), [0]))))
    return [(int(a), int(b)) for a, b in zip(edges[::2], edges[1::2])]


def bitmap_scores(pred, gt, horizon_ms: int) -> tuple[float, float, float]:
    p = bitmap(pred, horizon_ms)
    g = bitmap(gt, horizon_ms)
    n_p, n_g = int(p.sum()), int(g.sum())
    inter = float((p & g).sum())
    uni = float((p | g).sum())
    if n_p == 0 and n_g == 0:
        return 1.0, 1.0, 1.0
    if n_p == 0 or n_g == 0:
        return 0.0, 0.0, 0.0
    return inter / n_p, inter / n_g, inter / uni


def sort_and_sweep(pairs, gap):
    """Endpoint-event sweep, written independently of trkit.intervals.normalize."""
    events = sorted((float(s), float(e)) for s, e in pairs)
    out: list[list[float]] = []
    for s, e in events:
        if out and s <= out[-1][1] + gap and s - out[-1][1] <= gap:
            out[-1][1] = max(out[-1][1], e)
        else:
            out.append([s, e])
    return out


def softmax_attention_mp(q, K, V, dps: int = 50):
    """Naive softmax attention in mpmath extended precision."""
    import mpmath

    with mpmath.workdps(dps):
        logits = [mpmath.fsum(mpmath.mpf(float(a)) * mpmath.mpf(float(b)) for a, b in zip(q, k)) for k in K]
        m = max(logits)
        w = [mpmath.exp(x - m) for x in logits]
        z = mpmath.fsum(w)
        return np.array(
            [float(mpmath.fsum(w[i] * mpmath.mpf(float(V[i][j])) for i in range(len(w))) / z) for j in range(len(V[0]))]
        )


def lse_mp(q, K, dps: int = 50) -> float:
    import mpmath

    with mpmath.workdps(dps):
        logits = [mpmath.fsum(mpmath.mpf(float(a)) * mpmath.mpf(float(b)) for a, b in zip(q, k)) for k in K]
        return float(mpmath.log(mpmath.fsum(mpmath.exp(x) for x in logits)))


def random_ms_ranges(rng, n_max: int, horizon_ms: int) -> list[tuple[int, int]]:
    n = int(rng.integers(0, n_max + 1))
    out = []
    for _ in range(n):
        s = int(rng.integers(0, horizon_ms))
        e = int(rng.integers(s, min(horizon_ms, s + horizon_ms // 3) + 1))
        out.append((s, e))
    return out
