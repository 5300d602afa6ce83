"""Expression grammar and grid-based factors."""

import math

import numpy as np
import pytest

from systole_lab import factor_from_expression, factor_from_grid, metric_area
from systole_lab.errors import ConfigError


def test_constant_expression():
    f = factor_from_expression("1")
    assert np.allclose(f(np.array([0.3 + 1j, 5.0])), 1.0)
    assert metric_area(f, 5) == pytest.approx(4 * math.pi, abs=1e-5)


def test_arithmetic_expression():
    f = factor_from_expression("2 + 3*0.5 - 1/4")
    assert f(0.7 + 0.1j) == pytest.approx(3.25)


def test_expression_with_z():
    f = factor_from_expression("1 + 0.5*(abs(z)^2 - 1)/(abs(z)^2 + 1)")
    assert f(0.0) == pytest.approx(0.5)     # south pole: third coordinate -1
    assert f(1.0) == pytest.approx(1.0)     # equator
    assert f(1e8) == pytest.approx(1.5, abs=1e-6)


def test_expression_bars_and_functions():
    f = factor_from_expression("exp(-|z|^2) + re(z)*0 + im(z)*0 + 1")
    assert f(0.0) == pytest.approx(2.0)
    assert f(2.0) == pytest.approx(1.0 + math.exp(-4.0))


def test_expression_pi_and_power():
    f = factor_from_expression("pi^2 / pi")
    assert f(1j) == pytest.approx(math.pi)


def test_expression_rejects_unknown_name():
    with pytest.raises(ConfigError):
        factor_from_expression("foo(z)")


def test_expression_rejects_trailing_garbage():
    with pytest.raises(ConfigError):
        factor_from_expression("1 + 2 )")


def test_expression_rejects_complex_result():
    with pytest.raises(ConfigError):
        factor_from_expression("z")(np.array([1j]))


def test_expression_rejects_negative():
    with pytest.raises(ConfigError):
        factor_from_expression("0 - 1")


def test_grid_factor(tmp_path):
    nx, ny = 9, 7
    xs = np.linspace(-2, 2, nx)
    ys = np.linspace(-2, 2, ny)
    vals = 2.0 + 0.25 * xs[None, :] + 0.5 * ys[:, None]
    path = tmp_path / "grid.csv"
    with open(path, "w") as fh:
        fh.write(f"{nx},{ny},-2,2,-2,2\n")
        for row in vals:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
    f = factor_from_grid(str(path))
    # bilinear reproduction of an affine field inside the box
    for z in (0.0, 0.31 - 0.62j, 1.9 + 1.9j):
        z = complex(z)
        assert f(z) == pytest.approx(2.0 + 0.25 * z.real + 0.5 * z.imag, abs=1e-12)
    # clamped outside
    assert f(10 + 10j) == pytest.approx(2.0 + 0.25 * 2 + 0.5 * 2)
    # the point at infinity clamps through its (inf, 0) chart parts
    assert f(complex(math.inf)) == pytest.approx(2.0 + 0.25 * 2)


def test_grid_shape_mismatch(tmp_path):
    path = tmp_path / "bad.csv"
    with open(path, "w") as fh:
        fh.write("3,2,-1,1,-1,1\n1,2,3\n")
    with pytest.raises(ConfigError):
        factor_from_grid(str(path))
