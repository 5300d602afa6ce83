"""Monte Carlo averaging over the circle space."""

import math

import numpy as np
import pytest

from conftest import bump_factor, inversion_symmetric_factor
from systole_lab import (constant_factor, find_short_football_geodesic,
                         find_short_great_circle, fubini_check,
                         sample_great_circles)
from systole_lab.averaging import circle_stats, sample_generic_circles
from systole_lab.football import football_factor


def test_fubini_constant():
    rep = fubini_check(constant_factor(1.0), 2000, seed=3)
    assert rep.agrees
    assert rep.circle_integral() == pytest.approx(8 * math.pi**2, rel=1e-9)
    assert rep.area_term == pytest.approx(8 * math.pi**2, rel=1e-6)


def test_fubini_scaling():
    rep = fubini_check(constant_factor(2.0), 1000, seed=3)
    assert rep.agrees
    assert rep.circle_integral() == pytest.approx(32 * math.pi**2, rel=1e-9)


def test_fubini_bump_agreement():
    # f = 1 + (third coordinate)/2 in chart terms
    def evaluate(z):
        z = np.asarray(z, dtype=complex)
        r2 = z.real**2 + z.imag**2
        with np.errstate(invalid="ignore"):
            third = np.where(np.isfinite(r2), (r2 - 1) / (r2 + 1), 1.0)
        return 1.0 + 0.5 * third

    from systole_lab import ConformalFactor

    rep = fubini_check(ConformalFactor(evaluate), 20000, seed=11)
    assert rep.agrees
    assert abs(rep.circle_integral() - rep.area_term) \
        <= 3 * 4 * math.pi * rep.standard_error + 1e-6 * rep.area_term


def test_short_circle_constant_equality():
    res = find_short_great_circle(constant_factor(1.0), 500, seed=2)
    assert res.length == pytest.approx(2 * math.pi, rel=1e-9)
    assert res.length**2 == pytest.approx(math.pi * res.area, rel=1e-6)
    res3 = find_short_great_circle(constant_factor(3.0), 200, seed=2)
    assert res3.length == pytest.approx(6 * math.pi, rel=1e-9)


def test_short_circle_bump_bound():
    f = bump_factor(0.0 + 0.0j, 0.6, 0.8)  # northern bump in chart terms
    res = find_short_great_circle(f, 3000, seed=9)
    assert res.length < res.mean_length
    assert res.satisfies_bound()


def test_min_leq_mean_always():
    f = bump_factor(0.5 + 0.5j, 0.7, 1.1)
    res = find_short_great_circle(f, 1000, seed=13)
    assert res.length <= res.mean_length + 1e-12


def test_averaging_chain_monte_carlo():
    # (mean L)^2 <= mean(L^2), the circle-space Cauchy-Schwarz step
    f = bump_factor()
    circles = sample_great_circles(2000, seed=21)
    L, E = circle_stats(f, circles)
    assert float(np.mean(L)) ** 2 <= float(np.mean(L * L)) + 1e-12
    # lengths against energies, circle by circle
    assert np.all(L * L <= 2 * math.pi * E + 1e-9)


def test_standard_error_scaling():
    f = bump_factor(0.3 + 0.4j, 0.8, 0.9)
    ratios = []
    for trial in range(10):
        r1 = fubini_check(f, 800, seed=100 + trial)
        r2 = fubini_check(f, 1600, seed=500 + trial)
        ratios.append(r2.standard_error / r1.standard_error)
    mean_ratio = float(np.mean(ratios))
    assert abs(mean_ratio - 1 / math.sqrt(2)) <= 0.2 * (1 / math.sqrt(2))


def test_football_search_constant():
    res = find_short_football_geodesic(constant_factor(1.0), 1500, seed=5)
    assert res.hoop_lengths[0] == pytest.approx(math.pi, abs=1e-9)
    assert res.hoop_lengths[1] == pytest.approx(math.pi, abs=1e-9)
    assert res.area_af == pytest.approx(2 * math.pi, rel=1e-5)
    # sharp: L^2 = (pi/2) area
    assert res.hoop_lengths[0] ** 2 \
        == pytest.approx(0.5 * math.pi * res.area_af, rel=1e-5)
    assert res.symmetric


def test_football_search_scaling():
    res = find_short_football_geodesic(constant_factor(2.0), 800, seed=5)
    assert res.figure_length == pytest.approx(4 * math.pi, rel=1e-9)
    assert res.area_af == pytest.approx(8 * math.pi, rel=1e-5)


def test_football_search_symmetric_bump_strict():
    f = inversion_symmetric_factor(0.35)
    res = find_short_football_geodesic(f, 3000, seed=8)
    assert res.symmetric
    # the two hoops of any figure eight exchange under the inversion
    assert res.hoop_lengths[0] == pytest.approx(res.hoop_lengths[1], rel=1e-6)
    assert max(res.hoop_lengths) <= res.hoop_bound()
    assert res.figure_length**2 <= 2 * math.pi * res.area_af * (1 + res.slack)
    # strict inequality for a non-constant factor
    assert max(res.hoop_lengths) ** 2 < 0.5 * math.pi * res.area_af


def test_factor_two_cover_area_bookkeeping():
    # the pullback of f^2 g_AF to the cover has twice the football area
    from systole_lab.football import cover_factor
    from systole_lab import metric_area

    f = inversion_symmetric_factor(0.25)
    fc = cover_factor(f)
    cover_area = metric_area(fc, 5)
    res = find_short_football_geodesic(f, 200, seed=3)
    assert cover_area == pytest.approx(2 * res.area_af, rel=1e-5)


def test_generic_sampling_respects_clearance():
    fb = football_factor()
    circles = sample_generic_circles(fb, 500, seed=7, avoid_poles=True,
                                     pole_clearance=1e-2)
    normals = np.stack([c.n for c in circles])
    assert np.min(np.abs(np.arcsin(np.abs(normals[:, 2])))) >= 1e-2
    assert np.min(np.hypot(normals[:, 0], normals[:, 1])) >= 1e-2
