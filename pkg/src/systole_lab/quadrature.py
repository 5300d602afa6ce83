"""Small quadrature helpers shared by the metric and averaging modules."""

from __future__ import annotations

import math

import numpy as np

_G7_NODES, _G7_WEIGHTS = np.polynomial.legendre.leggauss(7)


def gauss7(fvec, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """7-point Gauss estimates of ``fvec`` over a batch of intervals."""
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    x = mid[:, None] + half[:, None] * _G7_NODES[None, :]
    vals = fvec(x.ravel()).reshape(x.shape)
    return half * (vals @ _G7_WEIGHTS)


def adaptive_interval(fvec, a: float, b: float, tol: float = 1e-12,
                      max_depth: int = 48, seeds=None) -> float:
    """Adaptive Gauss integration of ``fvec`` (vectorized) over [a, b].

    ``seeds`` are parameter values where extra initial splits are forced
    (used to pre-split at near-singular points).  The error control compares
    each interval's estimate with the sum over its halves and keeps bisecting
    until the discrepancy is below a per-length share of ``tol``.
    """
    if b <= a:
        return 0.0
    cuts = [a, b]
    if seeds is not None:
        cuts.extend(t for t in seeds if a < t < b)
    cuts = sorted(set(cuts))
    lo = np.array(cuts[:-1])
    hi = np.array(cuts[1:])
    total = 0.0
    pieces = []
    depth = 0
    while len(lo):
        whole = gauss7(fvec, lo, hi)
        mid = 0.5 * (lo + hi)
        left = gauss7(fvec, lo, mid)
        right = gauss7(fvec, mid, hi)
        refined = left + right
        err = np.abs(whole - refined)
        budget = tol * (hi - lo) / (b - a)
        done = (err <= budget) | (depth >= max_depth)
        pieces.extend(refined[done].tolist())
        keep = ~done
        lo = np.concatenate([lo[keep], mid[keep]])
        hi = np.concatenate([mid[keep], hi[keep]])
        depth += 1
    total = math.fsum(pieces)
    return total


def trapezoid_closed(values: np.ndarray, t: np.ndarray, period: float) -> np.ndarray:
    """Trapezoid rule on a periodic domain with (possibly) nonuniform nodes.

    ``t`` must be sorted along the last axis within [0, period).  For uniform
    nodes and smooth periodic integrands this is spectrally accurate.
    """
    dt = np.diff(t, axis=-1)
    wrap = period - (t[..., -1] - t[..., 0])
    w = np.empty_like(t)
    w[..., 1:-1] = 0.5 * (dt[..., :-1] + dt[..., 1:])
    w[..., 0] = 0.5 * (dt[..., 0] + wrap)
    w[..., -1] = 0.5 * (dt[..., -1] + wrap)
    return np.sum(values * w, axis=-1)
