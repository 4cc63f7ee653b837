"""Seeded synthetic fields used by the energy, flux and envelope checks."""

from __future__ import annotations

import math

import numpy as np

from .grid import DomainMask, Field, GridSpec, square_mask


def _bumps(Z: np.ndarray, rng: np.random.Generator, count: int, spread: float, widths, complex_amp: bool):
    out = np.zeros(Z.shape, dtype=complex if complex_amp else float)
    for _ in range(count):
        c = complex(*rng.uniform(-spread, spread, size=2))
        w = rng.uniform(*widths)
        amp = complex(*rng.normal(size=2)) if complex_amp else rng.normal()
        out += amp * np.exp(-np.abs(Z - c) ** 2 / w ** 2)
    return out


def random_ymh_fields(
    grid: GridSpec,
    rng: np.random.Generator,
    bumps: int = 4,
    spread: float = 2.0,
    widths: tuple[float, float] = (0.5, 1.0),
) -> tuple[Field, Field, Field]:
    """Connection and Higgs field built from Gaussian bumps centered in
    ``[-spread, spread]^2``; numerically zero at the edge of a wide grid."""
    mask = square_mask(grid)
    Z = grid.Z
    A0 = _bumps(Z, rng, bumps, spread, widths, False)
    A1 = _bumps(Z, rng, bumps, spread, widths, False)
    phi = _bumps(Z, rng, bumps, spread, widths, True)
    return Field(mask, A0), Field(mask, A1), Field(mask, phi)


def unit_flux_connection(mask: DomainMask, width: float = 0.5) -> tuple[Field, Field]:
    """Rotationally symmetric connection whose curvature integrates to
    ``2 pi (1 - exp(-R^2 / width^2))`` over the disk of radius ``R``."""
    Z = mask.grid.Z
    r2 = np.abs(Z) ** 2
    with np.errstate(invalid="ignore", divide="ignore"):
        f = np.where(r2 > 0, -np.expm1(-r2 / width ** 2) / r2, 1.0 / width ** 2)
    return Field(mask, -Z.imag * f), Field(mask, Z.real * f)


def planted_envelope_pair(
    mask: DomainMask, M1: float, M2: float, N1: float, N2: float, rate: float = 1.0
) -> tuple[Field, Field]:
    """Real nonnegative ``psi_j = sqrt(M_j - N_j exp(-rate |z|))``."""
    rr = np.abs(mask.grid.Z)
    p1 = np.sqrt(np.maximum(M1 - N1 * np.exp(-rate * rr), 0.0)) + 0j
    p2 = np.sqrt(np.maximum(M2 - N2 * np.exp(-rate * rr), 0.0)) + 0j
    return Field(mask, p1), Field(mask, p2)


def gauge_phase(grid: GridSpec) -> Field:
    """``sin(x0) cos(x1)``; periodic on grids whose period is a multiple of 2 pi."""
    return Field.sample(square_mask(grid), lambda z: np.sin(z.real) * np.cos(z.imag))


def random_field(rng: np.random.Generator, n: int, complex_valued: bool, nan_fraction: float = 0.1) -> np.ndarray:
    """Random array with a random NaN pattern (for I/O round trips)."""
    data = rng.normal(size=(n, n))
    if complex_valued:
        data = data + 1j * rng.normal(size=(n, n))
    data[rng.random((n, n)) < nan_fraction] = math.nan
    return data
