"""Conformal metrics f^2 g0 on the sphere with admissible singular points.

A ``ConformalFactor`` evaluates the factor f against the round metric at
chart points (vectorized).  Singular points are declared, not discovered:
each is either a zero of f or an inverse-sqrt blowup, the two admissible
types.  Area quadrature refines dyadically toward declared singularities
and excises a small disk around each inverse-sqrt point, bounding the
excised mass in closed form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import (NonIntegrableError, NotIsometryError, SingularHitError)
from .quadrature import adaptive_interval
from .sphere import (ChartCircle, GEOM_TOL, INF, MobiusMap, chart_distance,
                     chart_scale, is_infinity, mobius_apply, project,
                     project_array, reflection_matrix, rotation_matrix,
                     sample_sphere_points, unproject, unproject_array)

ZERO = "zero"
INVERSE_SQRT = "inverse-sqrt"


@dataclass(frozen=True)
class Singularity:
    location: complex
    kind: str

    def sphere_point(self) -> np.ndarray:
        return unproject(self.location)

    def chart_dist(self, z) -> float:
        return chart_distance(self.location, z)

    def chart_dist_array(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        if is_infinity(self.location):
            with np.errstate(divide="ignore"):
                return 1.0 / np.abs(z)
        return np.abs(z - self.location)


@dataclass(frozen=True)
class ConformalFactor:
    """Nonnegative conformal factor relative to the round metric."""

    evaluate: Callable[[np.ndarray], np.ndarray]
    singularities: tuple[Singularity, ...] = ()
    symmetry_tags: tuple = ()
    name: str = ""

    def __call__(self, z):
        if np.isscalar(z) or isinstance(z, complex):
            return float(self.evaluate(np.asarray([complex(z)]))[0])
        return self.evaluate(np.asarray(z, dtype=complex))

    def inverse_sqrt_points(self) -> list[Singularity]:
        return [s for s in self.singularities if s.kind == INVERSE_SQRT]


def constant_factor(c: float) -> ConformalFactor:
    c = float(c)
    if c < 0:
        raise ValueError("conformal factor must be nonnegative")
    return ConformalFactor(lambda z: np.full(np.shape(z), c, dtype=float),
                           name=f"const({c:g})")


@dataclass(frozen=True)
class Curve:
    """Piecewise round-geodesic curve through chart sample points."""

    samples: tuple
    closed: bool = False

    def __post_init__(self):
        pts = tuple(complex(z) for z in self.samples)
        if len(pts) < 2:
            raise ValueError("a curve needs at least 2 samples")
        for a, b in zip(pts, pts[1:]):
            if abs(a - b) < 1e-15:
                raise ValueError("consecutive curve samples must be distinct")
        object.__setattr__(self, "samples", pts)

    def segment_pairs(self):
        pts = self.samples
        pairs = list(zip(pts, pts[1:]))
        if self.closed and abs(pts[-1] - pts[0]) > 1e-15:
            pairs.append((pts[-1], pts[0]))
        return pairs


class SphereInvolution:
    """Involutive self-map of the sphere, usually an isometry.

    Isometric kinds are backed by an orthogonal matrix; inversion in a
    non-great chart circle is conformal but not isometric and is kept in
    chart form so that ``average_metric`` can reject it.
    """

    def __init__(self, kind: str, matrix=None, circle: ChartCircle = None):
        self.kind = kind
        self.matrix = None if matrix is None else np.asarray(matrix, float)
        self.circle = circle
        if self.matrix is None and circle is None:
            raise ValueError("involution needs a matrix or a circle")

    @classmethod
    def conjugation(cls) -> "SphereInvolution":
        return cls("reflection", reflection_matrix([0.0, 1.0, 0.0]))

    @classmethod
    def equatorial_inversion(cls) -> "SphereInvolution":
        # z -> 1/conj(z): reflection through the equatorial plane
        return cls("circle-inversion", reflection_matrix([0.0, 0.0, 1.0]))

    @classmethod
    def reflection(cls, plane_normal) -> "SphereInvolution":
        return cls("reflection", reflection_matrix(plane_normal))

    @classmethod
    def rotation_pi(cls, axis) -> "SphereInvolution":
        return cls("rotation-pi", rotation_matrix(axis, math.pi))

    @classmethod
    def antipodal(cls) -> "SphereInvolution":
        return cls("rotation-pi", -np.eye(3))

    @classmethod
    def circle_inversion(cls, circle: ChartCircle) -> "SphereInvolution":
        if circle.is_great():
            if circle.is_line:
                # reflection fixing the great circle through the line and the poles
                d = circle.direction / abs(circle.direction)
                normal = np.array([-d.imag, d.real, 0.0])
                return cls("circle-inversion", reflection_matrix(normal))
            c = circle.center
            # plane normal of the great circle through the chart circle
            n = np.array([c.real, c.imag, -1.0])
            return cls("circle-inversion", reflection_matrix(n))
        return cls("circle-inversion", circle=circle)

    def apply(self, v: np.ndarray) -> np.ndarray:
        if self.matrix is not None:
            return np.asarray(v, float) @ self.matrix.T
        z = project_array(np.atleast_2d(np.asarray(v, float)))
        w = self.chart_apply_array(z)
        out = unproject_array(w)
        return out[0] if np.asarray(v).ndim == 1 else out

    def chart_apply(self, z) -> complex:
        return complex(self.chart_apply_array(np.asarray([complex(z)]))[0])

    def chart_apply_array(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        if self.matrix is None:
            c, rho = self.circle.center, self.circle.radius
            with np.errstate(divide="ignore", invalid="ignore"):
                return c + rho**2 / np.conj(z - c)
        v = unproject_array(z)
        return project_array(v @ self.matrix.T)

    def is_isometry(self, tol: float = 1e-9, samples: int = 24) -> bool:
        pts = sample_sphere_points(2 * samples, seed=20260207)
        p, q = pts[:samples], pts[samples:]
        fp = np.atleast_2d(self.apply(p))
        fq = np.atleast_2d(self.apply(q))
        before = np.arccos(np.clip(np.sum(p * q, axis=1), -1, 1))
        after = np.arccos(np.clip(np.sum(fp * fq, axis=1), -1, 1))
        return bool(np.max(np.abs(before - after)) <= tol)


# ---------------------------------------------------------------------------
# area quadrature

_TRI_BARY = np.array([
    [1 / 3, 1 / 3, 1 / 3],
    [0.059715871789770, 0.470142064105115, 0.470142064105115],
    [0.470142064105115, 0.059715871789770, 0.470142064105115],
    [0.470142064105115, 0.470142064105115, 0.059715871789770],
    [0.797426985353087, 0.101286507323456, 0.101286507323456],
    [0.101286507323456, 0.797426985353087, 0.101286507323456],
    [0.101286507323456, 0.101286507323456, 0.797426985353087],
])
_TRI_W = np.array([0.225,
                   0.132394152788506, 0.132394152788506, 0.132394152788506,
                   0.125939180544827, 0.125939180544827, 0.125939180544827])


def _base_triangles() -> np.ndarray:
    phi = (1.0 + math.sqrt(5.0)) / 2.0
    verts = []
    for a in (-1.0, 1.0):
        for b in (-phi, phi):
            verts += [(0, a, b), (a, b, 0), (b, 0, a)]
    verts = np.array(verts, float)
    verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    # fixed generic rotation keeps chart poles away from nodes
    rot = rotation_matrix([0.31, 0.52, 0.79], 0.4567)
    verts = verts @ rot.T
    from scipy.spatial import ConvexHull

    hull = ConvexHull(verts)
    tris = verts[hull.simplices]
    # orient consistently outward (irrelevant for integration, tidy anyway)
    return tris


_BASE_TRIS = None


def _initial_triangles() -> np.ndarray:
    global _BASE_TRIS
    if _BASE_TRIS is None:
        _BASE_TRIS = _subdivide(_base_triangles())
    return _BASE_TRIS


def _subdivide(tris: np.ndarray) -> np.ndarray:
    a, b, c = tris[:, 0], tris[:, 1], tris[:, 2]
    ab = a + b
    bc = b + c
    ca = c + a
    for m in (ab, bc, ca):
        m /= np.linalg.norm(m, axis=1, keepdims=True)
    children = np.concatenate([
        np.stack([a, ab, ca], axis=1),
        np.stack([ab, b, bc], axis=1),
        np.stack([ca, bc, c], axis=1),
        np.stack([ab, bc, ca], axis=1),
    ])
    return children


def _triangle_estimates(fsq, tris: np.ndarray) -> np.ndarray:
    """Degree-5 estimates of the integral of ``fsq`` dsigma over sphere triangles."""
    v0, d1, d2 = tris[:, 0], tris[:, 1] - tris[:, 0], tris[:, 2] - tris[:, 0]
    # nodes on the flat triangle, pushed to the sphere
    u = (_TRI_BARY[None, :, 0, None] * tris[:, None, 0]
         + _TRI_BARY[None, :, 1, None] * tris[:, None, 1]
         + _TRI_BARY[None, :, 2, None] * tris[:, None, 2])
    norm = np.linalg.norm(u, axis=2, keepdims=True)
    v = u / norm
    # jacobian of u -> u/|u| applied to the flat parametrization
    def tangent(d):
        dd = np.broadcast_to(d[:, None, :], v.shape)
        return (dd - v * np.sum(v * dd, axis=2, keepdims=True)) / norm
    ta = tangent(d1)
    tb = tangent(d2)
    jac = np.linalg.norm(np.cross(ta, tb), axis=2)
    z = project_array(v.reshape(-1, 3))
    vals = fsq(z).reshape(jac.shape)
    vals = np.nan_to_num(vals, nan=1e300, posinf=1e300, neginf=0.0)
    return 0.5 * np.sum(_TRI_W[None, :] * vals * jac, axis=1)


def _fit_inverse_sqrt_constants(f: ConformalFactor, sing: Singularity,
                                radii=(1e-3, 1e-4, 1e-5), n_angles: int = 24):
    """Sampled bounds c1, c2 with c1/sqrt(r) <= f <= c2/sqrt(r) near ``sing``.

    Also returns the fitted growth exponent of f against the chart radius.
    """
    theta = np.linspace(0.0, 2 * math.pi, n_angles, endpoint=False) + 0.05
    vals = []
    for r in radii:
        if is_infinity(sing.location):
            z = (1.0 / r) * np.exp(1j * theta)
        else:
            z = sing.location + r * np.exp(1j * theta)
        v = f(z)
        vals.append(v * math.sqrt(r))
    vals = np.array(vals)
    meds = np.median(vals, axis=1)
    logs = np.log(np.maximum(meds, 1e-300))
    slopes = np.diff(logs) / np.diff(np.log(radii))
    exponent = -0.5 + float(np.mean(slopes))  # fitted exponent of f itself
    return float(vals.min()), float(vals.max()), exponent


def metric_area(f: ConformalFactor, quadrature_level: int = 6,
                max_passes: int = 40, max_triangles: int = 400_000) -> float:
    """Integral of f^2 against the round area element.

    Raises ``NonIntegrableError`` when refinement diverges (the estimate
    keeps growing without shrinking increments across 3 passes).
    """
    result = metric_area_report(f, quadrature_level, max_passes, max_triangles)
    return result["area"]


def metric_area_report(f: ConformalFactor, quadrature_level: int = 6,
                       max_passes: int = 40, max_triangles: int = 400_000) -> dict:
    tol_rel = 10.0 ** (-quadrature_level)

    def fsq(z):
        v = f(z)
        return v * v

    sing_pts = list(f.singularities)
    excisions = []
    for s in f.inverse_sqrt_points():
        c1, c2, expo = _fit_inverse_sqrt_constants(f, s)
        rho = 2.0 if is_infinity(s.location) else chart_scale(np.array([s.location]))[0]
        excisions.append({"sing": s, "c2": c2, "rho": float(rho), "eps": None})

    leaves = _initial_triangles()
    accepted: list[float] = []
    accepted_err: list[float] = []
    excised_bound = 0.0
    excised_seen = set()
    history = []
    for pass_i in range(max_passes):
        parent_est = _triangle_estimates(fsq, leaves)
        children = _subdivide(leaves)
        child_est = _triangle_estimates(fsq, children)
        child_sum = child_est.reshape(4, -1).sum(axis=0)
        err = np.abs(parent_est - child_sum)
        total_now = math.fsum(accepted) + float(np.sum(child_sum))
        history.append(total_now)
        tol_abs = tol_rel * max(abs(total_now), 1e-30)

        # excision radii sized once so the dropped-mass bound stays below budget
        for ex in excisions:
            if ex["eps"] is None:
                budget = 0.2 * tol_abs / max(len(excisions), 1)
                ex["eps"] = budget / (2 * math.pi * max(ex["c2"], 1e-30) ** 2
                                      * ex["rho"] ** 2 * 5.0)

        drop = np.zeros(len(leaves), dtype=bool)
        for k, ex in enumerate(excisions):
            s = ex["sing"]
            d = np.stack([s.chart_dist_array(project_array(leaves[:, j])) for j in range(3)])
            inside = np.max(d, axis=0) <= 4.0 * ex["eps"]
            if np.any(inside):
                if k not in excised_seen:
                    excised_seen.add(k)
                    excised_bound += 2 * math.pi * ex["c2"] ** 2 * ex["rho"] ** 2 * 5.0 * ex["eps"]
                drop |= inside

        # per-leaf budget: half by count, half by mass share
        mass = np.abs(child_sum)
        mass_total = float(np.sum(mass)) + 1e-300
        budget = 0.5 * tol_abs * (1.0 / max(len(leaves), 1) + mass / mass_total)
        done = (err <= budget) & ~drop

        accepted.extend(child_sum[done].tolist())
        accepted_err.extend(err[done].tolist())
        keep = ~(done | drop)
        if not np.any(keep):
            leaves = np.empty((0, 3, 3))
            break
        leaves = children.reshape(4, -1, 3, 3)[:, keep].reshape(-1, 3, 3)

        if len(leaves) > max_triangles:
            raise NonIntegrableError("refinement exceeded the triangle budget")
        # resolving an integrable peak grows the estimate at first but the
        # increments decay geometrically; sustained non-decaying growth over
        # three successive refinements past the warm-up is divergence
        if pass_i >= 8:
            deltas = np.diff(history[-5:])
            if np.all(deltas > tol_abs) and np.all(deltas[1:] >= 0.8 * deltas[:-1]):
                raise NonIntegrableError("estimate grows without bound under refinement")

    tail = float(np.sum(_triangle_estimates(fsq, leaves))) if len(leaves) else 0.0
    area = math.fsum(accepted) + tail
    err_total = math.fsum(accepted_err) + excised_bound
    if len(leaves):
        raise NonIntegrableError("quadrature failed to converge")
    return {"area": area, "error_bound": err_total, "excised_bound": excised_bound,
            "passes": pass_i + 1, "tolerance": tol_rel * max(abs(area), 1e-30)}


# ---------------------------------------------------------------------------
# curve length and energy

def _slerp_setup(a: complex, b: complex):
    p = unproject(a)
    q = unproject(b)
    dot = float(np.clip(np.dot(p, q), -1.0, 1.0))
    theta = math.acos(dot)
    if theta < 1e-15:
        return None
    u = q - dot * p
    u /= np.linalg.norm(u)
    return p, u, theta


def _segment_integrand(f: ConformalFactor, p: np.ndarray, u: np.ndarray):
    def g(t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, float)
        pts = np.cos(t)[:, None] * p + np.sin(t)[:, None] * u
        return f(project_array(pts))
    return g


def _closest_approach_seeds(f: ConformalFactor, p: np.ndarray, u: np.ndarray,
                            theta: float) -> list[float]:
    seeds = []
    for s in f.singularities:
        v = s.sphere_point()
        t = math.atan2(float(np.dot(u, v)), float(np.dot(p, v)))
        if 0.0 < t < theta:
            seeds.append(t)
    return seeds


def _check_singular_hit(f: ConformalFactor, samples) -> None:
    for s in f.inverse_sqrt_points():
        for z in samples:
            if s.chart_dist(z) < 1e-9:
                raise SingularHitError(
                    f"curve sample {z} coincides with singular point {s.location}")


def curve_length(f: ConformalFactor, curve: Curve, tol: float = 1e-11) -> float:
    """Length of the curve under f^2 g0, adaptively refined near singularities."""
    _check_singular_hit(f, curve.samples)
    pieces = []
    for a, b in curve.segment_pairs():
        setup = _slerp_setup(a, b)
        if setup is None:
            continue
        p, u, theta = setup
        g = _segment_integrand(f, p, u)
        seeds = _closest_approach_seeds(f, p, u, theta)
        pieces.append(adaptive_interval(g, 0.0, theta, tol=tol * max(theta, 1.0),
                                        seeds=seeds))
    return math.fsum(pieces)


def curve_energy(f: ConformalFactor, curve: Curve, tol: float = 1e-11) -> float:
    """Energy with the curve reparametrized to round speed on [0, 2*pi]."""
    if not curve.closed:
        raise ValueError("energy is defined for closed curves")
    _check_singular_hit(f, curve.samples)
    segs = []
    total = 0.0
    for a, b in curve.segment_pairs():
        setup = _slerp_setup(a, b)
        if setup is None:
            continue
        segs.append(setup)
        total += setup[2]
    pieces = []
    for p, u, theta in segs:
        g = _segment_integrand(f, p, u)
        gsq = lambda t, g=g: g(t) ** 2
        seeds = _closest_approach_seeds(f, p, u, theta)
        pieces.append(adaptive_interval(gsq, 0.0, theta, tol=tol * max(theta, 1.0),
                                        seeds=seeds))
    return (2.0 * math.pi / total) * math.fsum(pieces)


def chart_segment_length(f: ConformalFactor, a: complex, b: complex,
                         tol: float = 1e-12) -> float:
    """f^2 g0 length of the straight chart segment from a to b.

    Splitting the segment at an interior point and summing reproduces the
    whole within quadrature tolerance, which the loop surgery relies on.
    """
    a = complex(a)
    b = complex(b)
    d = b - a
    span = abs(d)
    if span == 0.0:
        return 0.0

    def g(t: np.ndarray) -> np.ndarray:
        z = a + np.asarray(t, float) * d
        return f(z) * chart_scale(z) * span

    seeds = []
    for s in f.singularities:
        if is_infinity(s.location):
            continue
        t = ((s.location - a) / d).real
        if 0.0 < t < 1.0:
            seeds.append(t)
    return adaptive_interval(g, 0.0, 1.0, tol=tol * max(span, 1.0), seeds=seeds)


# ---------------------------------------------------------------------------
# averaging (metric symmetrization)

def average_metric(f: ConformalFactor, F: SphereInvolution) -> ConformalFactor:
    """Quadratic-mean average of f^2 g0 with its pullback under the isometry F.

    The result is F-invariant pointwise and has the same area.
    """
    if not F.is_isometry(tol=1e-9):
        raise NotIsometryError("involution does not preserve the round metric")

    def evaluate(z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        fz = f(z)
        fF = f(F.chart_apply_array(z))
        return np.sqrt(0.5 * (fz * fz + fF * fF))

    sings = list(f.singularities)
    for s in f.singularities:
        loc = F.chart_apply(s.location) if not is_infinity(s.location) else \
            project(F.apply(np.array([0.0, 0.0, 1.0])))
        if all(chart_distance(loc, t.location) > 1e-12 for t in sings):
            sings.append(Singularity(loc, s.kind))
    return ConformalFactor(evaluate, tuple(sings),
                           symmetry_tags=f.symmetry_tags + (F,),
                           name=f"avg({f.name})")


def is_invariant_under(f: ConformalFactor, F: SphereInvolution,
                       tol: float = 1e-9, samples: int = 64) -> bool:
    pts = sample_sphere_points(samples, seed=20260214)
    z = project_array(pts)
    for s in f.singularities:
        keep = s.chart_dist_array(z) > 1e-3
        z = z[keep]
    a = f(z)
    b = f(F.chart_apply_array(z))
    scale = np.maximum(np.abs(a), 1.0)
    return bool(np.max(np.abs(a - b) / scale) <= tol)


# ---------------------------------------------------------------------------
# admissibility

def check_admissible(f: ConformalFactor, quadrature_level: int = 4) -> tuple[bool, dict]:
    """Numerical admissibility: integrable f^2 and 1/sqrt(r) behavior at
    declared inverse-sqrt points.  Diagnostics carry the failure reason."""
    diag: dict = {"singularities": []}
    ok = True
    for s in f.inverse_sqrt_points():
        c1, c2, expo = _fit_inverse_sqrt_constants(f, s)
        entry = {"location": s.location, "c1": c1, "c2": c2, "exponent": expo}
        good = c1 > 0 and math.isfinite(c2) and abs(expo + 0.5) <= 0.15
        entry["ok"] = good
        diag["singularities"].append(entry)
        if not good:
            ok = False
            diag["reason"] = "singular exponent is not -1/2"
    pts = sample_sphere_points(256, seed=20260221)
    z = project_array(pts)
    mask = np.ones(len(z), dtype=bool)
    for s in f.singularities:
        mask &= s.chart_dist_array(z) > 1e-3
    vals = f(z[mask])
    diag["min_sample"] = float(np.min(vals)) if len(vals) else float("nan")
    if len(vals) and np.min(vals) <= 0.0:
        ok = False
        diag["reason"] = "factor is not positive away from declared singularities"
    if ok:
        try:
            report = metric_area_report(f, quadrature_level=quadrature_level)
            diag["area"] = report["area"]
            diag["area_error_bound"] = report["error_bound"]
        except NonIntegrableError as exc:
            ok = False
            diag["reason"] = f"non-integrable: {exc}"
    return ok, diag


# ---------------------------------------------------------------------------
# Mobius transport

def mobius_pullback_factor(f: ConformalFactor, m: MobiusMap,
                           name: str = "") -> ConformalFactor:
    """Factor of the pullback metric m^*(f^2 g0), again relative to g0.

    Uses the closed form (1+|z|^2)/(|az+b|^2+|cz+d|^2) for the conformal
    distortion of a determinant-1 Mobius map, which is stable at the poles.
    """
    a, b, c, d = m.a, m.b, m.c, m.d

    def evaluate(z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        num = 1.0 + z.real**2 + z.imag**2
        den = np.abs(a * z + b) ** 2 + np.abs(c * z + d) ** 2
        return f(m.apply_array(z)) * num / den

    minv = m.inverse()
    sings = tuple(Singularity(mobius_apply(minv, s.location), s.kind)
                  for s in f.singularities)
    return ConformalFactor(evaluate, sings, name=name or f"pullback({f.name})")


def mobius_pushforward_factor(f: ConformalFactor, m: MobiusMap,
                              name: str = "") -> ConformalFactor:
    return mobius_pullback_factor(f, m.inverse(), name=name or f"pushforward({f.name})")
