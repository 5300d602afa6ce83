"""The football orbifold: exact factor, double cover, figure eights."""

import math

import numpy as np
import pytest

from conftest import bump_factor
from systole_lab import (ChartCircle, GreatCircle, af_factor, af_pullback,
                         check_admissible, constant_factor, curve_length,
                         double_cover_map, figure_eight_geodesic,
                         football_factor, metric_area, sample_great_circles)
from systole_lab.errors import GeodesicError, SingularPointError
from systole_lab.football import cover_factor
from systole_lab.metrics import Curve
from systole_lab.sphere import sample_sphere_points, project_array
from systole_lab.surfaces import winding_numbers


def test_af_factor_values():
    # factor^2 against g0 at r=1 is 1/4
    assert af_factor(1.0) == pytest.approx(0.5, abs=1e-12)
    assert af_factor(1.0) ** 2 == pytest.approx(0.25, abs=1e-12)


def test_af_factor_exact_formula():
    rng = np.random.default_rng(4)
    r = np.exp(rng.uniform(np.log(1e-3), np.log(1e3), size=1000))
    z = r * np.exp(1j * rng.uniform(0, 2 * math.pi, size=1000))
    vals = football_factor()(z)
    expect2 = (1 + r**2) ** 2 / (4 * r * (1 + r) ** 2)
    assert np.max(np.abs(vals**2 - expect2) / expect2) < 1e-12


def test_af_factor_asymptotics():
    # factor^2 ~ 1/(4r) as r -> 0
    for r in (1e-2, 1e-3, 1e-4):
        ratio = af_factor(r) ** 2 / (1.0 / (4 * r))
        assert abs(ratio - 1) < 3 * r  # 1 + O(r)
    assert abs(af_factor(1e-4) ** 2 / (1.0 / (4e-4)) - 1) < 0.01


def test_af_factor_pole_symmetry():
    for r in (2.0, 5.0):
        assert af_factor(r) == pytest.approx(af_factor(1.0 / r), rel=1e-14)


def test_af_factor_singular_points():
    with pytest.raises(SingularPointError):
        af_factor(0.0)
    with pytest.raises(SingularPointError):
        af_factor(complex(math.inf))


def test_double_cover_map_values():
    assert double_cover_map(1j) == pytest.approx(-1.0)
    assert double_cover_map(1.0) == pytest.approx(1.0)


def test_double_cover_local_isometry():
    # a short round arc near w=1 has equal g_AF-length downstairs
    t = np.linspace(0.0, 0.02, 40)
    w = np.exp(1j * t) * (1.0 + 0.1 * t)  # short arc near w = 1
    w = w / np.abs(w) * (1.0 + 0.05 * np.sin(t * 50))  # wiggle off the circle
    upstairs = Curve(tuple(w), closed=False)
    downstairs = Curve(tuple(w * w), closed=False)
    lu = curve_length(constant_factor(1.0), upstairs)
    ld = curve_length(football_factor(), downstairs)
    assert ld == pytest.approx(lu, abs=1e-6)


def test_metric_area_football():
    assert metric_area(football_factor(), 5) == pytest.approx(2 * math.pi, abs=1e-4)


def test_figure_eight_geodesic_shape():
    g = figure_eight_geodesic(GreatCircle([0.4, 0.2, 0.7]))
    assert abs(abs(g.self_intersection) - 1.0) < 1e-9
    assert not g.degenerate
    # hoops close up and the inner one winds once around the cone point
    assert abs(g.hoop_inner[0] - g.hoop_inner[-1]) < 1e-9
    winds = winding_numbers(g.hoop_inner[:-1], [0.0])
    assert winds[0] == 1
    assert np.all(np.abs(g.hoop_inner[1:-1]) < 1.0)
    assert np.all(np.abs(g.hoop_outer[1:-1]) > 1.0)


def test_figure_eight_lengths():
    fc = cover_factor(constant_factor(1.0))
    from systole_lab.averaging import hoop_stats

    circles = sample_great_circles(20, seed=12)
    circles = [c for c in circles if abs(c.n[2]) > 1e-3 and
               math.hypot(c.n[0], c.n[1]) > 1e-3]
    ls, ln, _, _, _ = hoop_stats(fc, circles)
    assert np.max(np.abs(ls - math.pi)) < 1e-6
    assert np.max(np.abs(ln - math.pi)) < 1e-6


def test_figure_eight_degenerate_equator():
    g = figure_eight_geodesic(GreatCircle([0.0, 0.0, 1.0]))
    assert g.degenerate
    assert g.self_intersection is None
    assert np.max(np.abs(np.abs(g.image_samples) - 1.0)) < 1e-9


def test_figure_eight_through_poles_rejected():
    with pytest.raises(GeodesicError):
        figure_eight_geodesic(GreatCircle([1.0, 0.0, 0.0]))


def test_sharpness_equality():
    # hoop length pi and area 2 pi give L^2 = (pi/2) A exactly
    L = math.pi
    assert L**2 == pytest.approx(0.5 * math.pi * (2 * math.pi), abs=1e-6)
    area = metric_area(football_factor(), 5)
    assert L**2 == pytest.approx(0.5 * math.pi * area, abs=1e-3)


def test_pullback_isometry_random_arcs():
    fb = football_factor()
    rng = np.random.default_rng(6)
    pts = sample_sphere_points(50, seed=61)
    for v in pts:
        if abs(v[2]) > 0.95:
            continue
        w0 = complex(project_array(np.asarray([v]))[0])
        direction = np.exp(1j * rng.uniform(0, 2 * math.pi))
        w = w0 + direction * np.linspace(0, 0.01, 12)
        lu = curve_length(constant_factor(1.0), Curve(tuple(w), closed=False))
        ld = curve_length(fb, Curve(tuple(w * w), closed=False))
        assert ld == pytest.approx(lu, abs=1e-6)


def test_af_pullback_identity_case():
    f = af_pullback(ChartCircle.unit(), 0.0)
    z = np.array([0.3 + 0.1j, 1.5 - 2j, 0.01 + 0.02j])
    assert np.max(np.abs(f(z) - football_factor()(z))) < 1e-12


def test_af_pullback_singularities():
    f = af_pullback(ChartCircle.unit(), 0.5)
    locs = sorted((complex(s.location) for s in f.singularities
                   if s.kind == "inverse-sqrt"), key=lambda z: z.real)
    assert abs(locs[0] - 0.5) < 1e-12
    assert abs(locs[1] - 2.0) < 1e-12


def test_af_pullback_admissible_randomized():
    rng = np.random.default_rng(77)
    for _ in range(10):
        center = complex(rng.normal(), rng.normal()) * 0.6
        radius = 0.5 + rng.random()
        C = ChartCircle(center, radius)
        w = center + radius * (0.2 + 0.5 * rng.random()) \
            * np.exp(1j * rng.uniform(0, 2 * math.pi))
        f = af_pullback(C, complex(w))
        ok, diag = check_admissible(f, quadrature_level=3)
        assert ok, diag
