"""Synthetic surgery instances: comb-shaped simple loops in the upper
half-plane enclosing chosen subsets of a labeled point set.

Each comb rises from its real-axis basepoint to a spine and sends one tooth
up around every chosen point, so its winding numbers are exactly the subset
indicator.  Distinct combs cross transversally once their spine heights and
tooth widths are jittered.
"""

from __future__ import annotations

import math

import numpy as np

from .surfaces import winding_numbers
from .surgery import PolyLoop


def comb_loop(S, subset, basepoint_x: float, spine_y: float = 0.18,
              tooth_top: float = None, tooth_halfwidth: float = 0.16,
              return_y: float = None, tag: int = -1) -> PolyLoop:
    """Simple loop based at (basepoint_x, 0) winding once around S[j], j in subset."""
    S = [complex(s) for s in S]
    subset = sorted(set(int(j) for j in subset))
    if tooth_top is None:
        tooth_top = (max((s.imag for s in S), default=1.0) + 0.45)
    if return_y is None:
        return_y = 0.55 * spine_y
    xs = sorted((S[j].real, j) for j in subset)
    x_left = min([x for x, _ in xs], default=basepoint_x) - 3 * tooth_halfwidth
    x_right = max([x for x, _ in xs], default=basepoint_x) + 3 * tooth_halfwidth
    x_left = min(x_left, basepoint_x - 2 * tooth_halfwidth)

    pts = [complex(basepoint_x, 0.0), complex(x_left, return_y),
           complex(x_left, spine_y)]
    for x, _ in xs:
        pts.append(complex(x - tooth_halfwidth, spine_y))
        pts.append(complex(x - tooth_halfwidth, tooth_top))
        pts.append(complex(x + tooth_halfwidth, tooth_top))
        pts.append(complex(x + tooth_halfwidth, spine_y))
    pts.append(complex(x_right, spine_y))
    pts.append(complex(x_right, return_y))
    pts.append(complex(basepoint_x + 0.3 * tooth_halfwidth, return_y))
    loop = PolyLoop(np.asarray(pts), 0, np.full(len(pts), tag, dtype=int))
    winds = winding_numbers(loop.vertices, np.asarray(S)) if S else []
    if len(subset) and winds[subset[0]] < 0:
        loop = PolyLoop(np.concatenate([loop.vertices[:1], loop.vertices[1:][::-1]]),
                        0, loop.arc_tags)
    return loop


def default_points(count: int, seed: int = 0) -> list[complex]:
    rng = np.random.default_rng(seed)
    pts = []
    for j in range(count):
        x = 1.1 * j + 0.15 * (rng.random() - 0.5)
        y = 1.0 + 0.2 * (rng.random() - 0.5)
        pts.append(complex(x, y))
    return pts


def random_instance(n_points: int, seed: int, n_loops: int = None,
                    S=None) -> tuple[list[complex], list[PolyLoop]]:
    """Loops with guaranteed coverage of S, simple and pairwise transverse.

    Loop j always contains point j, so every point is covered; extra points
    per loop are drawn at random.
    """
    rng = np.random.default_rng(seed)
    if S is None:
        S = default_points(n_points, seed=seed + 1)
    S = [complex(s) for s in S]
    n_points = len(S)
    if n_loops is None:
        n_loops = n_points
    loops = []
    span = max(s.real for s in S) - min(s.real for s in S) + 1.0
    x0 = min(s.real for s in S)
    for j in range(n_loops):
        subset = {j % n_points}
        for k in range(n_points):
            if k != j % n_points and rng.random() < 0.35:
                subset.add(k)
        loops.append(comb_loop(
            S, subset,
            basepoint_x=x0 - 1.0 + span * (j + 0.5) / n_loops
            + 0.1 * (rng.random() - 0.5),
            spine_y=0.14 + 0.1 * rng.random(),
            tooth_top=(max(s.imag for s in S) + 0.35 + 0.3 * rng.random()),
            tooth_halfwidth=0.12 + 0.1 * rng.random(),
            return_y=0.05 + 0.04 * rng.random(),
            tag=j,
        ))
    return S, loops


def lemma_instance(S=None):
    """The canonical 3-point configuration: b around the first two points,
    c around the last two, both with even odd-sets differing by one point."""
    if S is None:
        S = default_points(3, seed=5)
    top = max(s.imag for s in S)
    b = comb_loop(S, [0, 1], basepoint_x=S[0].real - 0.8, spine_y=0.2,
                  tooth_halfwidth=0.18, tooth_top=top + 0.43, tag=0)
    c = comb_loop(S, [1, 2], basepoint_x=S[2].real + 0.6, spine_y=0.27,
                  tooth_halfwidth=0.13, tooth_top=top + 0.61, return_y=0.08,
                  tag=1)
    return S, b, c
