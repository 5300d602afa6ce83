"""Averaging over the space of oriented great circles.

The circle space is identified with the sphere of unit normals and carries
the spherical measure, total 4*pi.  Fubini over the double fibration turns
the mean circle energy into 2*pi times the metric area; picking the sampled
minimum realizes the existential short-circle statements with an explicit
Monte Carlo slack delta = 3 * (standard error) / (estimate).
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import GeodesicError
from .football import FootballGeodesic, cover_factor, figure_eight_geodesic
from .metrics import (ConformalFactor, SphereInvolution, is_invariant_under,
                      metric_area_report)
from .quadrature import adaptive_interval, trapezoid_closed
from .sphere import (GreatCircle, orthonormal_frames, project_array,
                     sample_sphere_points)

_GRADE_OFFSETS = np.pi * 2.0 ** (-np.arange(2, 17, dtype=float))


def _thread_count() -> int:
    try:
        return max(1, int(os.environ.get("SYSTOLE_LAB_THREADS", "1")))
    except ValueError:
        return 1


def _chunked_rows(fn, n_rows: int, chunk: int = 2048):
    """Apply ``fn`` to row ranges and concatenate results in fixed order."""
    spans = [(i, min(i + chunk, n_rows)) for i in range(0, n_rows, chunk)]
    workers = _thread_count()
    if workers > 1 and len(spans) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda ab: fn(*ab), spans))
    else:
        parts = [fn(a, b) for a, b in spans]
    return [np.concatenate([p[k] for p in parts]) for k in range(len(parts[0]))]


def _approach_params(e1: np.ndarray, e2: np.ndarray, targets: np.ndarray) -> np.ndarray:
    """Closest-approach parameter of each circle to each target point."""
    a = e1 @ targets.T
    b = e2 @ targets.T
    return np.arctan2(b, a)


@dataclass(frozen=True)
class CircleBatch:
    """Columnar form of a family of oriented great circles."""

    n: np.ndarray
    e1: np.ndarray
    e2: np.ndarray

    def __len__(self):
        return len(self.n)

    def circle(self, i: int) -> GreatCircle:
        return GreatCircle(self.n[i], self.e1[i], self.e2[i])


def _circle_frames(circles):
    if isinstance(circles, CircleBatch):
        return circles.n, circles.e1, circles.e2
    e1 = np.stack([c.e1 for c in circles])
    e2 = np.stack([c.e2 for c in circles])
    n = np.stack([c.n for c in circles])
    return n, e1, e2


def sample_generic_batch(f: ConformalFactor, count: int, seed: int,
                         avoid_poles: bool = False,
                         clearance: float = 1e-6,
                         pole_clearance: float = None,
                         extra_points=None,
                         extra_clearance: float = 1e-3,
                         max_rounds: int = 64) -> "CircleBatch":
    """Seed-deterministic circles staying ``clearance`` away from the singular
    points of ``f`` (and from the chart poles in football mode).

    ``extra_points`` are sphere points to clear by ``extra_clearance``;
    callers use them for ramification preimages, where the squaring map
    shrinks chart distances quadratically.
    """
    sing = np.stack([s.sphere_point() for s in f.singularities]) \
        if f.singularities else np.zeros((0, 3))
    if pole_clearance is None:
        pole_clearance = clearance
    rng = np.random.default_rng(seed)
    normals = []
    have = 0
    for _ in range(max_rounds):
        draw = rng.normal(size=(max(count - have, 16), 3))
        norm = np.linalg.norm(draw, axis=1)
        draw = draw[norm > 1e-12] / norm[norm > 1e-12, None]
        ok = np.ones(len(draw), dtype=bool)
        if len(sing):
            ok &= np.min(np.abs(np.arcsin(np.clip(draw @ sing.T, -1, 1))), axis=1) >= clearance
        if extra_points is not None and len(extra_points):
            pts = np.asarray(extra_points, float)
            ok &= np.min(np.abs(np.arcsin(np.clip(draw @ pts.T, -1, 1))), axis=1) >= extra_clearance
        if avoid_poles:
            nz = np.abs(draw[:, 2])
            ok &= np.abs(np.arcsin(np.clip(nz, 0, 1))) >= pole_clearance   # through poles
            ok &= np.hypot(draw[:, 0], draw[:, 1]) >= pole_clearance       # deck-invariant
        draw = draw[ok]
        normals.append(draw)
        have += len(draw)
        if have >= count:
            break
    else:
        raise GeodesicError("could not sample a generic circle",
                            code="no-generic-sample")
    normals = np.concatenate(normals)[:count]
    e1, e2 = orthonormal_frames(normals)
    return CircleBatch(normals, e1, e2)


def sample_generic_circles(f: ConformalFactor, count: int, seed: int,
                           **kwargs) -> list[GreatCircle]:
    batch = sample_generic_batch(f, count, seed, **kwargs)
    return [batch.circle(i) for i in range(len(batch))]


def _node_template(f, e1, e2, base: int, lo: float, hi: float,
                   extra_targets: np.ndarray | None = None) -> np.ndarray:
    """Per-circle sorted parameter nodes on [lo, hi]: uniform plus dyadic
    grading toward closest approaches to singular points."""
    n = len(e1)
    cols = [np.broadcast_to(np.linspace(lo, hi, base), (n, base))]
    targets = [s.sphere_point() for s in f.singularities]
    if extra_targets is not None:
        targets.extend(extra_targets)
    if targets:
        tstar = _approach_params(e1, e2, np.stack(targets))  # (n, k)
        for j in range(tstar.shape[1]):
            t0 = tstar[:, j:j + 1]
            for sgn in (-1.0, 1.0):
                pts = t0 + sgn * _GRADE_OFFSETS[None, :]
                cols.append(np.mod(pts - lo, hi - lo) + lo)
        cols.append(np.clip(np.mod(tstar - lo, hi - lo) + lo, lo, hi))
    nodes = np.concatenate(cols, axis=1)
    nodes.sort(axis=1)
    return nodes


def circle_stats(f: ConformalFactor, circles, base_nodes: int = 128):
    """Lengths and energies of whole circles under f^2 g0."""
    n_mat, e1, e2 = _circle_frames(circles)

    def run(a, b):
        nodes = _node_template(f, e1[a:b], e2[a:b], base_nodes,
                               0.0, 2.0 * math.pi)
        pts = (np.cos(nodes)[..., None] * e1[a:b, None, :]
               + np.sin(nodes)[..., None] * e2[a:b, None, :])
        vals = f(project_array(pts.reshape(-1, 3))).reshape(nodes.shape)
        L = trapezoid_closed(vals, nodes, 2.0 * math.pi)
        E = trapezoid_closed(vals * vals, nodes, 2.0 * math.pi)
        return L, E

    return _chunked_rows(run, len(circles))


def _equator_crossing(n_mat: np.ndarray, e1: np.ndarray, e2: np.ndarray) -> np.ndarray:
    """Parameter where each circle crosses the equator entering the south."""
    q = np.cross(n_mat, np.broadcast_to([0.0, 0.0, 1.0], n_mat.shape))
    q /= np.linalg.norm(q, axis=1, keepdims=True)
    t_q = np.arctan2(np.sum(q * e2, axis=1), np.sum(q * e1, axis=1))
    mid = (np.cos(t_q + 0.5 * math.pi)[:, None] * e1
           + np.sin(t_q + 0.5 * math.pi)[:, None] * e2)
    return np.where(mid[:, 2] <= 0, t_q, t_q + math.pi)


def hoop_stats(f_cover: ConformalFactor, circles, base_nodes: int = 96):
    """Per-circle south/north hoop lengths and energies on the cover.

    The south arc (chart |w| < 1) maps to the hoop inside the unit disk.
    Returns (l_south, l_north, e_south, e_north, t_q).
    """
    n_mat, e1, e2 = _circle_frames(circles)
    t_q = _equator_crossing(n_mat, e1, e2)
    poles = np.array([[0.0, 0.0, -1.0], [0.0, 0.0, 1.0]])

    def run(a, b):
        m = b - a
        # nodes in arc coordinates u = t - t_q, with the split at u = pi pinned
        ends = np.broadcast_to([0.0, math.pi, 2.0 * math.pi], (m, 3))
        uniform = np.broadcast_to(np.linspace(0.0, 2.0 * math.pi, base_nodes,
                                              endpoint=False), (m, base_nodes))
        targets = [s.sphere_point() for s in f_cover.singularities] + list(poles)
        tstar = _approach_params(e1[a:b], e2[a:b], np.stack(targets)) - t_q[a:b, None]
        cols = [uniform, ends, np.mod(tstar, 2.0 * math.pi)]
        for j in range(tstar.shape[1]):
            t0 = np.mod(tstar[:, j:j + 1], 2.0 * math.pi)
            for sgn in (-1.0, 1.0):
                cols.append(np.mod(t0 + sgn * _GRADE_OFFSETS[None, :], 2.0 * math.pi))
        u = np.concatenate(cols, axis=1)
        u.sort(axis=1)
        t = t_q[a:b, None] + u
        pts = (np.cos(t)[..., None] * e1[a:b, None, :]
               + np.sin(t)[..., None] * e2[a:b, None, :])
        vals = f_cover(project_array(pts.reshape(-1, 3))).reshape(u.shape)
        du = np.diff(u, axis=1)
        fmid = 0.5 * (vals[:, 1:] + vals[:, :-1])
        emid = 0.5 * (vals[:, 1:] ** 2 + vals[:, :-1] ** 2)
        south = (0.5 * (u[:, 1:] + u[:, :-1])) < math.pi
        ls = np.sum(np.where(south, fmid * du, 0.0), axis=1)
        ln = np.sum(np.where(~south, fmid * du, 0.0), axis=1)
        es = np.sum(np.where(south, emid * du, 0.0), axis=1)
        en = np.sum(np.where(~south, emid * du, 0.0), axis=1)
        return ls, ln, es, en

    ls, ln, es, en = _chunked_rows(run, len(circles))
    return ls, ln, es, en, t_q


def arc_length_precise(f_cover: ConformalFactor, circle: GreatCircle,
                       t0: float, t1: float, tol: float = 1e-11) -> float:
    """Adaptive f-length of the arc of a circle between parameters t0 < t1."""
    def g(t):
        pts = (np.cos(t)[:, None] * circle.e1 + np.sin(t)[:, None] * circle.e2)
        return f_cover(project_array(pts))

    seeds = []
    targets = [s.sphere_point() for s in f_cover.singularities]
    targets += [np.array([0.0, 0.0, -1.0]), np.array([0.0, 0.0, 1.0])]
    for v in targets:
        t = math.atan2(float(np.dot(circle.e2, v)), float(np.dot(circle.e1, v)))
        for shift in (-2.0 * math.pi, 0.0, 2.0 * math.pi):
            if t0 < t + shift < t1:
                seeds.append(t + shift)
    return adaptive_interval(g, t0, t1, tol=tol, seeds=seeds)


@dataclass
class AveragingReport:
    sample_count: int
    mean_energy: float
    area_term: float          # 2*pi*area(g)
    best_circle: GreatCircle
    best_length: float
    standard_error: float
    slack: float
    agrees: bool
    area: float
    area_error_bound: float

    def circle_integral(self) -> float:
        """Monte Carlo estimate of the total circle-space energy integral."""
        return 4.0 * math.pi * self.mean_energy

    def to_json(self) -> dict:
        return {
            "sample_count": self.sample_count,
            "mean_energy": self.mean_energy,
            "circle_space_integral": self.circle_integral(),
            "area_term": self.area_term,
            "standard_error": self.standard_error,
            "agrees_within_3_sigma": self.agrees,
            "best_circle_normal": [float(x) for x in self.best_circle.n],
            "best_length": self.best_length,
            "slack": self.slack,
            "area": self.area,
            "area_error_bound": self.area_error_bound,
        }


def _circle_survey(f: ConformalFactor, samples: int, seed: int,
                   quadrature_level: int):
    circles = sample_generic_batch(f, samples, seed)
    L, E = circle_stats(f, circles)
    area_report = metric_area_report(f, quadrature_level=quadrature_level)
    return circles, L, E, area_report


def fubini_check(f: ConformalFactor, samples: int, seed: int,
                 quadrature_level: int = 6) -> AveragingReport:
    """Compare the circle-space energy integral against 2*pi*area(g)."""
    circles, L, E, report = _circle_survey(f, samples, seed, quadrature_level)
    area = report["area"]
    mean_e = float(np.mean(E))
    se = float(np.std(E, ddof=1) / math.sqrt(len(E))) if len(E) > 1 else 0.0
    lhs = 4.0 * math.pi * mean_e
    rhs = 2.0 * math.pi * area
    tol = 3.0 * 4.0 * math.pi * se + 2.0 * math.pi * report["error_bound"] \
        + 1e-9 * max(abs(rhs), 1.0)
    best = int(np.argmin(L))
    best_circle = circles.circle(best)
    best_len = arc_length_precise(f, best_circle, 0.0, 2.0 * math.pi)
    slack = 3.0 * se / max(mean_e, 1e-300)
    return AveragingReport(
        sample_count=samples, mean_energy=mean_e, area_term=rhs,
        best_circle=best_circle, best_length=min(best_len, float(L[best])),
        standard_error=se, slack=slack, agrees=bool(abs(lhs - rhs) <= tol),
        area=area, area_error_bound=report["error_bound"])


@dataclass
class ShortCircleResult:
    circle: GreatCircle
    length: float
    bound: float        # pi * area, the right side of the circle inequality
    slack: float
    mean_length: float
    area: float
    standard_error: float

    def satisfies_bound(self) -> bool:
        return self.length**2 <= self.bound * (1.0 + self.slack) + 1e-9


def find_short_great_circle(f: ConformalFactor, samples: int, seed: int,
                            quadrature_level: int = 6) -> ShortCircleResult:
    """Sampled circle of least f-length; its square is at most pi * area(f^2 g0)
    up to the reported Monte Carlo slack."""
    circles, L, E, report = _circle_survey(f, samples, seed, quadrature_level)
    best = int(np.argmin(L))
    best_circle = circles.circle(best)
    best_len = min(float(L[best]), arc_length_precise(f, best_circle, 0.0, 2 * math.pi))
    mean_e = float(np.mean(E))
    se = float(np.std(E, ddof=1) / math.sqrt(len(E))) if len(E) > 1 else 0.0
    bound = math.pi * report["area"]
    slack = 3.0 * se / max(mean_e, 1e-300) \
        + report["error_bound"] / max(report["area"], 1e-300) + 1e-6
    return ShortCircleResult(circle=best_circle, length=best_len, bound=bound,
                             slack=slack, mean_length=float(np.mean(L)),
                             area=report["area"], standard_error=se)


@dataclass
class FootballSearchResult:
    geodesic: FootballGeodesic
    hoop_lengths: tuple[float, float]    # (inside unit disk, outside)
    figure_length: float
    area_af: float
    slack: float
    symmetric: bool
    equator_crossing: float

    def hoop_bound(self) -> float:
        return math.sqrt(0.5 * math.pi * self.area_af) * (1.0 + self.slack)

    def figure_bound(self) -> float:
        return math.sqrt(2.0 * math.pi * self.area_af) * (1.0 + self.slack)


def find_short_football_geodesic(f_on_af: ConformalFactor, samples: int, seed: int,
                                 quadrature_level: int = 6) -> FootballSearchResult:
    """Shortest sampled figure-eight geodesic under f^2 g_AF.

    For inversion-symmetric f the two hoops of every figure eight exchange
    under the inversion, so both hoop lengths match and obey the hoop bound.
    """
    fc = cover_factor(f_on_af)
    circles = sample_generic_batch(fc, samples, seed, avoid_poles=True)
    ls, ln, es, en, t_q = hoop_stats(fc, circles)
    fig = ls + ln
    best = int(np.argmin(fig))
    best_circle = circles.circle(best)
    t0 = float(t_q[best])
    l_in = arc_length_precise(fc, best_circle, t0, t0 + math.pi)
    l_out = arc_length_precise(fc, best_circle, t0 + math.pi, t0 + 2.0 * math.pi)
    cover_area = metric_area_report(fc, quadrature_level=quadrature_level)
    area_af = 0.5 * cover_area["area"]
    e_mean = float(np.mean(es + en))
    se = float(np.std(es + en, ddof=1) / math.sqrt(len(es))) if len(es) > 1 else 0.0
    slack = 3.0 * se / max(e_mean, 1e-300) \
        + cover_area["error_bound"] / max(cover_area["area"], 1e-300) + 1e-6
    symmetric = is_invariant_under(f_on_af, SphereInvolution.equatorial_inversion(),
                                   tol=1e-8)
    geod = figure_eight_geodesic(best_circle)
    return FootballSearchResult(
        geodesic=geod, hoop_lengths=(l_in, l_out), figure_length=l_in + l_out,
        area_af=area_af, slack=slack, symmetric=symmetric, equator_crossing=t0)


@dataclass
class HoopSearchResult:
    circle: GreatCircle
    t_start: float          # south arc runs on [t_start, t_start + pi]
    length: float           # precise f-length of the south arc
    mean_arc_energy: float
    slack: float


def find_short_south_hoop(f_cover: ConformalFactor, samples: int, seed: int,
                          pole_clearance: float = 1e-2,
                          extra_points=None) -> HoopSearchResult:
    """Best hoop through the unit disk for an inversion-symmetric cover factor.

    The mean south-arc energy over circles equals half the cover area when
    the factor is symmetric, which yields the hoop bound sample-wise.  The
    pole clearance is generous because chart distances shrink quadratically
    under the double cover near the cone points.
    """
    circles = sample_generic_batch(f_cover, samples, seed, avoid_poles=True,
                                    pole_clearance=pole_clearance,
                                    extra_points=extra_points)
    ls, ln, es, en, t_q = hoop_stats(f_cover, circles)
    best = int(np.argmin(ls))
    best_circle = circles.circle(best)
    t0 = float(t_q[best])
    length = arc_length_precise(f_cover, best_circle, t0, t0 + math.pi)
    e_mean = float(np.mean(es))
    se = float(np.std(es, ddof=1) / math.sqrt(len(es))) if len(es) > 1 else 0.0
    slack = 3.0 * se / max(e_mean, 1e-300)
    return HoopSearchResult(circle=best_circle, t_start=t0,
                            length=min(length, float(ls[best])),
                            mean_arc_energy=e_mean, slack=slack)
