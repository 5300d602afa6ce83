"""The constant-curvature football orbifold with two angle-pi cone points.

In the chart the orbifold metric is g0 / mu(|z|) with
mu(t) = 4 t (1+t)^2 / (1+t^2)^2, equivalently (dx^2+dy^2)/(r (1+r)^2)
against the flat chart metric.  The round sphere double covers it through
w -> w^2, a local isometry away from the cone points at 0 and infinity;
generic great circles descend to figure-eight geodesics whose two hoops
meet on the unit circle and wind once around a cone point each.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import GeodesicError, SingularPointError
from .metrics import (INVERSE_SQRT, ConformalFactor, Singularity,
                      SphereInvolution, mobius_pullback_factor)
from .sphere import (ChartCircle, GreatCircle, INF, MobiusMap, is_infinity,
                     mobius_normalize, project_array)


def af_factor_values(z: np.ndarray) -> np.ndarray:
    """Conformal factor of the football metric against g0: (1+r^2)/(2 sqrt(r) (1+r))."""
    z = np.asarray(z, dtype=complex)
    r = np.abs(z)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (1.0 + r * r) / (2.0 * np.sqrt(r) * (1.0 + r))
    return np.where(np.isinf(r), np.inf, out)


def af_factor(z) -> float:
    """Scalar form; rejects the cone points at 0 and infinity."""
    if is_infinity(z) or abs(complex(z)) == 0.0:
        raise SingularPointError("the football factor is singular at the cone points")
    return float(af_factor_values(np.asarray([complex(z)]))[0])


def football_factor() -> ConformalFactor:
    return ConformalFactor(
        af_factor_values,
        singularities=(Singularity(0.0, INVERSE_SQRT), Singularity(INF, INVERSE_SQRT)),
        symmetry_tags=(SphereInvolution.equatorial_inversion(),),
        name="football",
    )


def double_cover_map(w):
    """The ramified double cover in chart coordinates: z = w^2."""
    if is_infinity(w):
        return INF
    return complex(w) ** 2


def cover_factor(f_on_af: ConformalFactor) -> ConformalFactor:
    """Pull a factor on the football back to the covering round sphere.

    The cover is a local isometry for g_AF, so the factor relative to g0
    upstairs is just f composed with w -> w^2.
    """
    def evaluate(w: np.ndarray) -> np.ndarray:
        w = np.asarray(w, dtype=complex)
        return f_on_af(w * w)

    sings = []
    for s in f_on_af.singularities:
        if is_infinity(s.location):
            sings.append(Singularity(INF, s.kind))
        elif s.location == 0.0:
            sings.append(Singularity(0.0, s.kind))
        else:
            root = np.sqrt(complex(s.location))
            sings.append(Singularity(complex(root), s.kind))
            sings.append(Singularity(-complex(root), s.kind))
    return ConformalFactor(evaluate, tuple(sings), name=f"cover({f_on_af.name})")


@dataclass(frozen=True)
class FootballGeodesic:
    """Image of a great circle under the double cover."""

    source: GreatCircle
    image_samples: np.ndarray          # closed chart polyline, first point repeated last
    self_intersection: complex | None  # on the unit circle for generic sources
    hoop_inner: np.ndarray | None      # closed hoop inside |z| <= 1, winding +1 about 0
    hoop_outer: np.ndarray | None
    degenerate: bool = False

    def to_record(self) -> dict:
        rec = {
            "normal": [float(x) for x in self.source.n],
            "degenerate": self.degenerate,
            "polyline": [[z.real, z.imag] for z in self.image_samples],
        }
        if self.self_intersection is not None:
            rec["self_intersection"] = [self.self_intersection.real,
                                        self.self_intersection.imag]
        return rec


def _polyline_winding_about_zero(samples: np.ndarray) -> int:
    ratios = samples[1:] / samples[:-1]
    return int(round(float(np.sum(np.angle(ratios))) / (2.0 * math.pi)))


def figure_eight_geodesic(source: GreatCircle, samples_per_hoop: int = 256) -> FootballGeodesic:
    """Descend a great circle to the football.

    The circle meets its deck-rotated copy at an antipodal pair on the
    equator; the two half-circles map to the two hoops.  Sources through the
    cone points are rejected, deck-invariant sources are flagged degenerate.
    """
    n = source.n
    if abs(math.asin(max(-1.0, min(1.0, float(n[2]))))) < 1e-9:
        raise GeodesicError("source circle passes through a cone point")
    if math.hypot(float(n[0]), float(n[1])) < 1e-9:
        # the cover equator: the image runs along the unit circle twice
        t = np.linspace(0.0, 2.0 * math.pi, 2 * samples_per_hoop + 1)
        w = source.chart(t)
        return FootballGeodesic(source, w * w, None, None, None, degenerate=True)

    q = np.cross(n, [0.0, 0.0, 1.0])
    q /= np.linalg.norm(q)
    t_q = math.atan2(float(np.dot(q, source.e2)), float(np.dot(q, source.e1)))
    mid = source.point(t_q + 0.5 * math.pi)
    if mid[2] > 0:
        t_q += math.pi  # start the first hoop on the southern arc

    t1 = t_q + np.linspace(0.0, math.pi, samples_per_hoop + 1)
    t2 = t_q + np.linspace(math.pi, 2.0 * math.pi, samples_per_hoop + 1)
    w1 = source.chart(t1)
    w2 = source.chart(t2)
    inner = w1 * w1
    outer = w2 * w2
    x = complex(inner[0])
    if _polyline_winding_about_zero(inner) < 0:
        inner = inner[::-1]
        outer = outer[::-1]
    full = np.concatenate([inner, outer[1:]])
    return FootballGeodesic(source, full, x, inner, outer)


def af_pullback(C: ChartCircle, w: complex) -> ConformalFactor:
    """Comparison factor AF(C, w): the football transported so that its
    equator is C and its cone points are w and its inversion partner."""
    m = mobius_normalize(C, w)
    factor = mobius_pullback_factor(football_factor(), m, name=f"AF(C,{w})")
    return ConformalFactor(factor.evaluate, factor.singularities,
                           symmetry_tags=(SphereInvolution.circle_inversion(C),),
                           name=factor.name)
