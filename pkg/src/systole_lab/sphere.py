"""Round-sphere geometry: stereographic chart, great circles, Mobius maps.

Chart convention used throughout the package: the south pole (0,0,-1) maps
to 0, the north pole (0,0,1) to infinity, and the equator to the unit
circle.  The round metric of curvature +1 then reads
``4/(1+|z|^2)^2 (dx^2+dy^2)`` in the chart.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ChartError, DegenerateCircleError

INF = complex(math.inf, 0.0)

GEOM_TOL = 1e-12  # tolerance for geometric predicates
EVAL_TOL = 1e-9   # tolerance for verified-by-evaluation postconditions


def is_infinity(z) -> bool:
    z = complex(z)
    return math.isinf(z.real) or math.isinf(z.imag)


def project(v) -> complex:
    """Stereographic chart coordinate of a unit 3-vector."""
    v = np.asarray(v, dtype=float)
    if abs(1.0 - v[2]) < 1e-15:
        return INF
    return complex(v[0], v[1]) / (1.0 - v[2])


def unproject(z) -> np.ndarray:
    """Unit 3-vector of a chart point (infinity maps to the north pole)."""
    if is_infinity(z):
        return np.array([0.0, 0.0, 1.0])
    z = complex(z)
    d = 1.0 + z.real * z.real + z.imag * z.imag
    return np.array([2.0 * z.real / d, 2.0 * z.imag / d, (d - 2.0) / d])


def project_array(v: np.ndarray) -> np.ndarray:
    """Vectorized chart projection; rows of ``v`` are unit 3-vectors."""
    denom = 1.0 - v[..., 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        z = (v[..., 0] + 1j * v[..., 1]) / denom
    return np.where(denom == 0.0, INF, z)


def unproject_array(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    d = 1.0 + z.real**2 + z.imag**2
    out = np.stack([2.0 * z.real / d, 2.0 * z.imag / d, (d - 2.0) / d], axis=-1)
    return out


def round_metric_factor(z) -> float:
    """Conformal factor of the round metric against the chart metric, 4/(1+|z|^2)^2."""
    if is_infinity(z):
        raise ChartError("round metric factor is unbounded at infinity")
    z = complex(z)
    return 4.0 / (1.0 + z.real * z.real + z.imag * z.imag) ** 2


def chart_scale(z: np.ndarray) -> np.ndarray:
    """sqrt of the round factor, 2/(1+|z|^2), vectorized."""
    z = np.asarray(z, dtype=complex)
    return 2.0 / (1.0 + z.real**2 + z.imag**2)


def sphere_distance(p, q) -> float:
    p = np.asarray(p, float)
    q = np.asarray(q, float)
    return math.atan2(np.linalg.norm(np.cross(p, q)), float(np.dot(p, q)))


def chart_distance(a: complex, b: complex) -> float:
    """Distance in chart units; ``1/|z|`` plays the role of distance to infinity."""
    ainf, binf = is_infinity(a), is_infinity(b)
    if ainf and binf:
        return 0.0
    if ainf:
        return 1.0 / max(abs(b), 1e-300)
    if binf:
        return 1.0 / max(abs(a), 1e-300)
    return abs(a - b)


def orthonormal_frames(normals: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic right-handed frames (e1, e2, n) for rows of unit normals."""
    n = np.atleast_2d(np.asarray(normals, float))
    axis = np.eye(3)[np.argmin(np.abs(n), axis=1)]
    e1 = np.cross(n, axis)
    e1 /= np.linalg.norm(e1, axis=1, keepdims=True)
    e2 = np.cross(n, e1)
    return e1, e2


def _orthonormal_frame(n: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    e1, e2 = orthonormal_frames(n[None, :])
    return e1[0], e2[0]


@dataclass(frozen=True)
class GreatCircle:
    """Oriented great circle with unit normal ``n`` and frame ``(e1, e2, n)``."""

    n: np.ndarray
    e1: np.ndarray = field(default=None)
    e2: np.ndarray = field(default=None)

    def __post_init__(self):
        n = np.asarray(self.n, dtype=float)
        n = n / np.linalg.norm(n)
        object.__setattr__(self, "n", n)
        if self.e1 is None or self.e2 is None:
            e1, e2 = _orthonormal_frame(n)
            object.__setattr__(self, "e1", e1)
            object.__setattr__(self, "e2", e2)
        else:
            object.__setattr__(self, "e1", np.asarray(self.e1, dtype=float))
            object.__setattr__(self, "e2", np.asarray(self.e2, dtype=float))

    def point(self, t):
        """Unit-speed parametrization, period 2*pi.  Accepts arrays."""
        t = np.asarray(t, dtype=float)
        return (np.cos(t)[..., None] * self.e1 + np.sin(t)[..., None] * self.e2)

    def chart(self, t) -> np.ndarray:
        return project_array(self.point(t))

    def pole_distance(self) -> float:
        """Spherical distance from the chart poles (0,0,+-1) to the circle."""
        return abs(math.asin(max(-1.0, min(1.0, float(self.n[2])))))


def sample_great_circles(count: int, seed: int) -> list[GreatCircle]:
    """Uniform oriented great circles: normals are uniform on the sphere.

    Deterministic per seed (PCG64 Gaussian triples, normalized).  The
    circle-space measure is the spherical area of normals, total 4*pi, so a
    Monte Carlo sum over ``count`` samples carries weight ``4*pi/count``.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    normals = sample_sphere_points(count, seed)
    e1, e2 = orthonormal_frames(normals)
    return [GreatCircle(n, a, b) for n, a, b in zip(normals, e1, e2)]


def sample_sphere_points(count: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    pts = np.empty((count, 3))
    filled = 0
    while filled < count:
        draw = rng.normal(size=(count - filled, 3))
        norms = np.linalg.norm(draw, axis=1)
        good = norms > 1e-12
        kept = draw[good] / norms[good, None]
        pts[filled:filled + len(kept)] = kept
        filled += len(kept)
    return pts


@dataclass(frozen=True)
class MobiusMap:
    """Fractional-linear map z -> (az+b)/(cz+d), stored with ad-bc = 1."""

    a: complex
    b: complex
    c: complex
    d: complex

    def __post_init__(self):
        det = self.a * self.d - self.b * self.c
        if abs(det) < GEOM_TOL:
            raise DegenerateCircleError("mobius map is singular", code="degenerate-map")
        s = np.sqrt(complex(det))
        for name in "abcd":
            object.__setattr__(self, name, complex(getattr(self, name)) / s)

    @classmethod
    def identity(cls) -> "MobiusMap":
        return cls(1.0, 0.0, 0.0, 1.0)

    def inverse(self) -> "MobiusMap":
        return MobiusMap(self.d, -self.b, -self.c, self.a)

    def compose(self, other: "MobiusMap") -> "MobiusMap":
        return MobiusMap(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )

    def __call__(self, z):
        return mobius_apply(self, z)

    def apply_array(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        num = self.a * z + self.b
        den = self.c * z + self.d
        inf_in = np.isinf(z.real) | np.isinf(z.imag)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = num / den
        if np.any(inf_in):
            at_inf = INF if self.c == 0 else self.a / self.c
            out = np.where(inf_in, at_inf, out)
        pole = (~inf_in) & (np.abs(den) == 0.0)
        if np.any(pole):
            out = np.where(pole, INF, out)
        return out


def mobius_apply(m: MobiusMap, z) -> complex:
    """Apply with the standard conventions at infinity and at the pole."""
    if is_infinity(z):
        return INF if m.c == 0 else m.a / m.c
    z = complex(z)
    den = m.c * z + m.d
    if abs(den) == 0.0:
        return INF
    return (m.a * z + m.b) / den


@dataclass(frozen=True)
class ChartCircle:
    """Circle in the chart, or a line (a circle through infinity).

    A line is stored as a point on it plus a unit direction.
    """

    center: complex = 0.0
    radius: float = 1.0
    is_line: bool = False
    direction: complex = 1.0

    @classmethod
    def unit(cls) -> "ChartCircle":
        return cls(0.0, 1.0)

    @classmethod
    def real_axis(cls) -> "ChartCircle":
        return cls(is_line=True, center=0.0, direction=1.0)

    def invert(self, z: complex) -> complex:
        """Inversion in the circle (reflection for a line)."""
        if self.is_line:
            u = (complex(z) - self.center) / self.direction
            return self.center + self.direction * u.conjugate()
        if is_infinity(z):
            return self.center
        w = complex(z) - self.center
        if abs(w) == 0.0:
            return INF
        return self.center + self.radius**2 / w.conjugate()

    def point(self, t: float) -> complex:
        if self.is_line:
            return self.center + self.direction * math.tan(t / 2.0)
        return self.center + self.radius * complex(math.cos(t), math.sin(t))

    def is_great(self, tol: float = 1e-9) -> bool:
        """Whether the chart circle is a great circle of the sphere."""
        if self.is_line:
            # lines through 0 correspond to great circles through both poles
            u = (0.0 - self.center) / self.direction
            return abs(u.imag) <= tol
        return abs(self.radius**2 - (1.0 + abs(self.center) ** 2)) <= tol * (1.0 + self.radius**2)


def mobius_normalize(fixed_circle: ChartCircle, w: complex) -> MobiusMap:
    """Mobius map sending ``fixed_circle`` to the unit circle and ``w`` to 0.

    The inversion partner of ``w`` across the circle goes to infinity, so the
    returned map intertwines inversion in ``fixed_circle`` with inversion in
    the unit circle z -> 1/conj(z).
    """
    if not fixed_circle.is_line and fixed_circle.radius < GEOM_TOL:
        raise DegenerateCircleError("fixed circle has radius below 1e-12")
    wstar = fixed_circle.invert(w)
    if chart_distance(complex(w) if not is_infinity(w) else w, wstar) < GEOM_TOL:
        raise DegenerateCircleError("point lies on the fixed circle", code="degenerate-circle")
    if is_infinity(wstar):
        # w is the circle's center: plain rescaling
        return MobiusMap(1.0, -complex(w), 0.0, fixed_circle.radius)
    if is_infinity(w):
        m = MobiusMap(0.0, 1.0, 1.0, -wstar)
    else:
        m = MobiusMap(1.0, -complex(w), 1.0, -wstar)
    z0 = fixed_circle.point(0.789)  # arbitrary point on the circle
    k = abs(mobius_apply(m, z0))
    return MobiusMap(m.a / k, m.b / k, m.c, m.d)


def rotation_matrix(axis, angle: float) -> np.ndarray:
    axis = np.asarray(axis, float)
    axis = axis / np.linalg.norm(axis)
    x, y, z = axis
    c, s = math.cos(angle), math.sin(angle)
    C = 1.0 - c
    return np.array([
        [c + x * x * C, x * y * C - z * s, x * z * C + y * s],
        [y * x * C + z * s, c + y * y * C, y * z * C - x * s],
        [z * x * C - y * s, z * y * C + x * s, c + z * z * C],
    ])


def reflection_matrix(normal) -> np.ndarray:
    n = np.asarray(normal, float)
    n = n / np.linalg.norm(n)
    return np.eye(3) - 2.0 * np.outer(n, n)


ANTIPODAL_MATRIX = -np.eye(3)
DECK_ROTATION_MATRIX = np.diag([-1.0, -1.0, 1.0])   # rotation by pi about the z-axis
EQUATOR_REFLECTION_MATRIX = np.diag([1.0, 1.0, -1.0])  # fixes the unit circle in the chart
