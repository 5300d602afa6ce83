"""Shared factor builders and instance helpers for the test suite."""

import numpy as np
import pytest

from systole_lab import ConformalFactor, SphereInvolution


def bump(center: complex, amplitude: float, width: float):
    c = complex(center)

    def term(z):
        z = np.asarray(z, dtype=complex)
        d2 = (z.real - c.real) ** 2 + (z.imag - c.imag) ** 2
        with np.errstate(over="ignore"):
            return amplitude * np.exp(-d2 / width**2)

    return term


def bump_factor(center=0.7 + 0.4j, amplitude=0.4, width=0.8) -> ConformalFactor:
    term = bump(center, amplitude, width)
    return ConformalFactor(lambda z: 1.0 + term(z), name="bump")


def conj_symmetric_factor(center=0.6 + 0.8j, amplitude=0.35,
                          width=0.9) -> ConformalFactor:
    t1 = bump(center, amplitude, width)
    t2 = bump(np.conj(center), amplitude, width)
    return ConformalFactor(lambda z: 1.0 + t1(z) + t2(z), name="conj-bumps")


def antipodal_factor(center=0.5 + 0.3j, amplitude=0.3, width=0.7) -> ConformalFactor:
    anti = -1.0 / np.conj(complex(center))
    t1 = bump(center, amplitude, width)
    t2 = bump(anti, amplitude, width * abs(anti) / abs(complex(center)))

    def evaluate(z):
        z = np.asarray(z, dtype=complex)
        # symmetrize exactly: average the bump field with its antipodal pull
        with np.errstate(divide="ignore", invalid="ignore"):
            za = np.where(np.abs(z) > 1e-150, -1.0 / np.conj(z), np.inf)
        return 1.0 + 0.5 * (t1(z) + t1(za))

    return ConformalFactor(evaluate, name="antipodal-bump")


def inversion_symmetric_factor(amplitude=0.3) -> ConformalFactor:
    # radial profile through 2r/(1+r^2), which is invariant under r -> 1/r
    def radial(z):
        z = np.asarray(z, dtype=complex)
        r = np.abs(z)
        with np.errstate(divide="ignore", invalid="ignore"):
            u = np.where(np.isfinite(r), 2.0 * r / (1.0 + r * r), 0.0)
        return 1.0 + amplitude * u * u

    return ConformalFactor(radial, name="inversion-symmetric",
                           symmetry_tags=(SphereInvolution.equatorial_inversion(),))


@pytest.fixture(scope="session")
def surface_z6():
    from systole_lab import build_surface

    return build_surface([1, 0, 0, 0, 0, 0, 1])
