"""Ovalless real hyperelliptic surfaces w^2 = -P(z).

P must be monic of degree 2g+2 with real coefficients, distinct roots and no
real roots, for even genus g > 0.  The roots then come in conjugate pairs,
g+1 strictly above the real axis and g+1 below.  The sheet structure of the
square root is tracked by analytic continuation; a loop in the z-chart lifts
to a closed loop upstairs exactly when the number of roots it winds oddly
about is even.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .errors import ContinuationError, LoopError, SurfaceError

ROOT_SEPARATION = 1e-8
ROOT_CLEARANCE = 1e-6     # loops must stay this far from every root
RESIDUAL_TOL = 1e-12


@dataclass(frozen=True)
class SheetState:
    """Branch value of w = sqrt(-P(z)) at the current point."""

    z: complex
    branch: complex
    at_infinity: str | None = None

    def same_sheet(self, other: "SheetState") -> bool:
        return (self.branch * other.branch.conjugate()).real > 0.0


@dataclass(frozen=True)
class SquareRootCover:
    """Double cover w^2 = radicand(z), ramified at the radicand's roots."""

    radicand: tuple          # coefficients, highest degree first
    roots: tuple

    @classmethod
    def from_points(cls, points) -> "SquareRootCover":
        pts = [complex(p) for p in points]
        coeffs = np.poly(pts) if pts else np.array([1.0 + 0j])
        return cls(tuple(complex(c) for c in np.atleast_1d(coeffs)),
                   tuple(pts))

    def value(self, z: complex) -> complex:
        return complex(np.polyval(np.asarray(self.radicand), complex(z)))

    def principal_branch(self, z: complex) -> complex:
        """Square root with nonnegative real part, ties broken upward."""
        w = cmath.sqrt(self.value(z))
        if w.real < 0 or (w.real == 0 and w.imag < 0):
            w = -w
        return w

    def min_root_distance(self, a: complex, b: complex) -> float:
        """Distance from the segment [a, b] to the nearest root."""
        return min(self._segment_root_distances(a, b), default=math.inf)

    def _segment_root_distances(self, a: complex, b: complex) -> list[float]:
        d = b - a
        dd = abs(d) ** 2
        out = []
        for r in self.roots:
            if dd == 0.0:
                out.append(abs(a - r))
                continue
            t = ((r - a) * d.conjugate()).real / dd
            t = min(1.0, max(0.0, t))
            out.append(abs(a + t * d - r))
        return out

    def arg_variation_bound(self, a: complex, b: complex) -> float:
        """Upper bound on the argument swing of the radicand along [a, b]:
        len * sum over roots of 1/dist(segment, root)."""
        dists = self._segment_root_distances(a, b)
        return abs(b - a) * sum(1.0 / max(d, 1e-300) for d in dists)


@dataclass(frozen=True)
class HyperellipticSurface:
    """w^2 = -P(z) with the bookkeeping needed by the pipeline."""

    coeffs: tuple                 # real coefficients of P, highest first
    genus: int
    weierstrass_roots: tuple      # roots of P, conjugate-paired
    infinity_sheets: tuple = ("inf+", "inf-")

    def P(self, z):
        return np.polyval(np.asarray(self.coeffs, dtype=float), z)

    @property
    def cover(self) -> SquareRootCover:
        coeffs = tuple(-complex(c) for c in self.coeffs)
        return SquareRootCover(coeffs, tuple(self.weierstrass_roots))

    def upper_ramification_points(self) -> list[complex]:
        return [r for r in self.weierstrass_roots if r.imag > 0]

    def lower_ramification_points(self) -> list[complex]:
        return [r for r in self.weierstrass_roots if r.imag < 0]

    # involutions of the surface, acting on affine points (z, w)

    def J(self, point):
        z, w = point
        return (z, -w)

    def tau(self, point):
        z, w = point
        return (z.conjugate(), w.conjugate())

    def tau0(self, z: complex) -> complex:
        return complex(z).conjugate()

    def tau_infinity(self, sheet: str) -> str:
        a, b = self.infinity_sheets
        return b if sheet == a else a

    def on_surface(self, point, tol: float = 1e-8) -> bool:
        z, w = point
        lhs = w * w
        rhs = -complex(self.P(complex(z)))
        return abs(lhs - rhs) <= tol * max(1.0, abs(rhs))


def _polish_roots(coeffs: np.ndarray, roots: np.ndarray) -> np.ndarray:
    deriv = np.polyder(coeffs)
    for _ in range(50):
        vals = np.polyval(coeffs, roots)
        if np.max(np.abs(vals)) <= RESIDUAL_TOL * max(1.0, np.max(np.abs(coeffs))):
            break
        dv = np.polyval(deriv, roots)
        step = np.where(np.abs(dv) > 1e-300, vals / dv, 0.0)
        roots = roots - step
    return roots


def build_surface(coeffs) -> HyperellipticSurface:
    """Validate P and compute its Weierstrass roots, or reject with the
    specific violated condition."""
    c = np.asarray([float(x) for x in coeffs], dtype=float)
    c = np.trim_zeros(c, "f")
    if len(c) == 0:
        raise SurfaceError("empty polynomial", code="odd-degree")
    if abs(c[0] - 1.0) > 1e-12:
        raise SurfaceError("P must be monic", code="not-monic")
    degree = len(c) - 1
    if degree % 2 == 1:
        raise SurfaceError(f"degree {degree} is odd", code="odd-degree")
    genus = degree // 2 - 1
    if genus < 2 or genus % 2 == 1:
        raise SurfaceError(f"genus {genus} is not even and positive",
                           code="odd-genus")
    roots = np.roots(c)
    roots = _polish_roots(c, roots)
    residual = np.max(np.abs(np.polyval(c, roots)))
    scale = max(1.0, float(np.max(np.abs(c))))
    if residual > 1e-9 * scale:
        raise SurfaceError("root refinement did not converge", code="repeated-root")
    if np.min(np.abs(roots.imag)) < ROOT_SEPARATION:
        raise SurfaceError("P has a real root", code="real-root-found")
    dist = np.abs(roots[:, None] - roots[None, :]) + np.eye(len(roots))
    if np.min(dist) < ROOT_SEPARATION:
        raise SurfaceError("P has repeated roots", code="repeated-root")
    # a root cluster consistent with an exact multiple root: P vanishes at a
    # critical point to working precision
    crit = np.roots(np.polyder(c))
    pvals = np.abs(np.polyval(c, crit))
    local = np.sum(np.abs(c)[None, :] * np.abs(crit[:, None])
                   ** np.arange(len(c) - 1, -1, -1)[None, :], axis=1)
    if np.any(pvals <= 1e-13 * local):
        raise SurfaceError("P has repeated roots", code="repeated-root")
    # canonical order: by real part, then imaginary part
    order = np.lexsort((roots.imag, roots.real))
    roots = roots[order]
    upper = int(np.sum(roots.imag > 0))
    if upper != genus + 1:
        raise SurfaceError("roots are not conjugate-paired", code="real-root-found")
    return HyperellipticSurface(tuple(float(x) for x in c), genus,
                                tuple(complex(r) for r in roots))


def ramification_points(X: HyperellipticSurface) -> list[complex]:
    """Chart positions of the Weierstrass points, g+1 per open half-plane."""
    return list(X.weierstrass_roots)


# ---------------------------------------------------------------------------
# winding numbers and analytic continuation

def winding_numbers(vertices: np.ndarray, points) -> np.ndarray:
    """Integer winding numbers of a closed polyline around each point.

    Uses exact summed signed angles; the accumulated residual must stay
    below 0.01 turns or the configuration is rejected.
    """
    v = np.asarray(vertices, dtype=complex)
    pts = np.asarray(points, dtype=complex)
    if len(v) < 3:
        raise LoopError("winding needs at least 3 vertices")
    a = v[:, None] - pts[None, :]
    b = np.roll(v, -1, axis=0)[:, None] - pts[None, :]
    if np.min(np.abs(a)) < 1e-300:
        raise LoopError("a labeled point lies on a vertex")
    turns = np.sum(np.angle(b / a), axis=0) / (2.0 * math.pi)
    rounded = np.round(turns)
    if np.max(np.abs(turns - rounded)) > 0.01:
        raise LoopError("winding residual too large; point too close to the loop")
    return rounded.astype(int)


def _segment_guard(cover: SquareRootCover, vertices) -> None:
    v = list(vertices)
    for a, b in zip(v, v[1:] + v[:1]):
        if cover.min_root_distance(complex(a), complex(b)) < ROOT_CLEARANCE:
            raise ContinuationError(
                "path passes within 1e-6 of a ramification point")


def _continue_segment(cover: SquareRootCover, a: complex, b: complex,
                      w: complex, depth: int = 0) -> complex:
    """Continue the branch from a to b, bisecting until the radicand's
    argument provably swings by less than pi over the step.

    The bound len * sum 1/dist(segment, root) dominates the integral of
    |P'/P| along the step, so the nearest-value sign rule cannot slip a
    sheet.  Near a close approach only O(log) subsegments are needed.
    """
    if a == b:
        return w
    if cover.arg_variation_bound(a, b) <= 2.5:
        wb = cmath.sqrt(cover.value(b))
        return wb if (wb * w.conjugate()).real > 0 else -wb
    if depth > 80:
        raise ContinuationError("continuation step control failed near a root")
    mid = 0.5 * (a + b)
    w_mid = _continue_segment(cover, a, mid, w, depth + 1)
    return _continue_segment(cover, mid, b, w_mid, depth + 1)


def continue_branch(cover: SquareRootCover, vertices, w0: complex,
                    closed: bool = True) -> complex:
    pts = [complex(z) for z in vertices]
    if closed:
        pts = pts + [pts[0]]
    w = complex(w0)
    for a, b in zip(pts, pts[1:]):
        if a == b:
            continue
        w = _continue_segment(cover, a, b, w)
    return w


def continue_sqrt(X: HyperellipticSurface, loop, start_branch: SheetState) -> SheetState:
    """Analytic continuation of w = sqrt(-P(z)) around a closed polyline loop."""
    vertices = [complex(z) for z in getattr(loop, "vertices", loop)]
    cover = X.cover
    _segment_guard(cover, vertices)
    z0 = vertices[0]
    if abs(start_branch.branch**2 - cover.value(z0)) > 1e-8 * max(1.0, abs(cover.value(z0))):
        raise ValueError("start branch does not satisfy w^2 = -P(z) at the basepoint")
    w = continue_branch(cover, vertices, start_branch.branch, closed=True)
    return SheetState(z=z0, branch=w, at_infinity=start_branch.at_infinity)


def lift_closes(X_or_cover, loop) -> bool:
    """Whether the lift of the loop to the double cover closes up.

    Parity criterion: the count of ramification points with odd winding
    number must be even.
    """
    cover = X_or_cover.cover if isinstance(X_or_cover, HyperellipticSurface) \
        else X_or_cover
    vertices = np.asarray([complex(z) for z in getattr(loop, "vertices", loop)],
                          dtype=complex)
    _segment_guard(cover, vertices)
    winds = winding_numbers(vertices, np.asarray(cover.roots))
    odd = int(np.sum(winds % 2 != 0))
    return odd % 2 == 0
