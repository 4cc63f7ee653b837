"""Closed-form vortex configurations and the zero-set (divisor) map.

Conventions: the connection is ``A = i A0 dx0 + i A1 dx1`` and we store the
real functions ``A0``, ``A1``. The phase factor shared by all families is
``exp(i c2 (z + zbar)) = exp(2 i c2 x0)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigurationError, GeometryError
from .grid import DomainMask, Field, VortexDivisor, count_zeros_winding, wirtinger


@dataclass(frozen=True, eq=False)
class SolutionFields:
    """Gauge potential, spinor pair and optional Higgs field on one mask.

    ``connection_real`` is False when the stored ``A0``/``A1`` carry complex
    values (for instance a complex ``c2`` or the literal Higgs-family
    connection); residuals are then evaluated with those complex values.
    """

    A0: Field
    A1: Field
    psi1: Field
    psi2: Field
    higgs: Field | None = None
    connection_real: bool = True
    notes: tuple[str, ...] = field(default=())

    def __post_init__(self):
        fields = [self.A0, self.A1, self.psi1, self.psi2] + ([self.higgs] if self.higgs is not None else [])
        for f in fields[1:]:
            if f.mask is not self.A0.mask and not f.mask.same_as(self.A0.mask):
                raise ValueError("all solution fields must share one mask")

    @property
    def mask(self) -> DomainMask:
        return self.A0.mask

    def replace(self, **changes) -> "SolutionFields":
        return replace(self, **changes)


@dataclass(frozen=True)
class FamilyParams:
    c1: complex
    c2: complex
    theta: float = 0.0
    divisor: VortexDivisor = VortexDivisor()

    def __post_init__(self):
        if complex(self.c1) == 0:
            raise ConfigurationError("c1 must be nonzero")


def _phase(c2: complex, z: np.ndarray) -> np.ndarray:
    return np.exp(1j * c2 * (z + np.conj(z)))


def _connection(mask: DomainMask, value: complex) -> tuple[Field, bool]:
    value = complex(value)
    if value.imag == 0:
        return Field.constant(mask, value.real), True
    return Field.constant(mask, value), False


def generate_plane_wave(mask: DomainMask, c1: complex, c2: complex, sign: int = 1) -> SolutionFields:
    """Flat-connection plane wave with ``|psi1| = |psi2|`` and no zeros."""
    if complex(c1) == 0:
        raise ConfigurationError("c1 must be nonzero")
    if sign not in (1, -1):
        raise ConfigurationError(f"sign must be +1 or -1, got {sign}")
    A0, real = _connection(mask, -2 * complex(c2))
    psi2 = Field.sample(mask, lambda z: c1 * _phase(c2, z))
    psi1 = Field.sample(mask, lambda z: sign * c1 * _phase(c2, z))
    notes = () if real else ("c2 is not real: A0 = -2*c2 stored as a complex constant",)
    return SolutionFields(A0, Field.constant(mask, 0.0), psi1, psi2, connection_real=real, notes=notes)


def _poly(divisor: VortexDivisor, z: np.ndarray) -> np.ndarray:
    out = np.ones_like(z, dtype=complex)
    for p, m in divisor.entries:
        out = out * (z - p) ** m
    return out


def generate_divisor_solution(mask: DomainMask, params: FamilyParams) -> SolutionFields:
    """Plane wave times a polynomial with the prescribed zeros.

    ``psi2`` is holomorphic with zeros at the divisor points and ``psi1`` is
    its reflection, rotated by ``exp(i theta)``.
    """
    c1, c2, div = complex(params.c1), complex(params.c2), params.divisor
    A0, real = _connection(mask, -2 * c2)
    rot = np.exp(1j * params.theta)
    psi2 = Field.sample(mask, lambda z: c1 * _poly(div, z) * _phase(c2, z))
    psi1 = Field.sample(mask, lambda z: c1 * rot * np.conj(_poly(div, z)) * _phase(c2, z))
    notes = () if real else ("c2 is not real: A0 = -2*c2 stored as a complex constant",)
    return SolutionFields(A0, Field.constant(mask, 0.0), psi1, psi2, connection_real=real, notes=notes)


HIGGS_CONSTRAINT = "|c_1| = sqrt(2) c_2"


def generate_higgs_solution(
    mask: DomainMask, c1: complex, c2: float, connection: str = "literal"
) -> SolutionFields:
    """Plane-wave family with a nonvanishing Higgs field.

    The connection one-form of this family is ``(-i c2 / 2) dz``. Writing
    ``A = (i/2)(A0 - i A1) dz + (i/2)(A0 + i A1) dzbar`` and matching gives
    ``A0 = -c2/2`` and ``A1 = -i c2/2``, which is not real. ``connection =
    "literal"`` stores exactly that (flagged as non-real). ``connection =
    "real"`` stores ``A0 = -c2, A1 = 0`` instead, the real connection under
    which every equation of the Higgs system holds.
    """
    c1 = complex(c1)
    if not (isinstance(c2, (int, float)) and c2 > 0):
        raise ConfigurationError(f"c2 must be real and positive, got {c2!r}")
    if abs(abs(c1) - math.sqrt(2) * c2) > 1e-12 * max(abs(c1), math.sqrt(2) * c2):
        raise ConfigurationError(f"constraint {HIGGS_CONSTRAINT} violated: |c1| = {abs(c1)!r}, c2 = {c2!r}")
    psi1 = Field.sample(mask, lambda z: np.full(z.shape, c1))
    psi2 = Field.sample(mask, lambda z: c1 * _phase(c2, z))
    higgs = Field.sample(mask, lambda z: -1j * c2 * np.exp(-1j * c2 * (z + np.conj(z))))
    if connection == "literal":
        A0 = Field.constant(mask, complex(-c2 / 2, 0.0))
        A1 = Field.constant(mask, complex(0.0, -c2 / 2))
        notes = ("connection (-i c2/2) dz read literally: A1 = -i c2/2 is imaginary",)
        return SolutionFields(A0, A1, psi1, psi2, higgs, connection_real=False, notes=notes)
    if connection == "real":
        A0 = Field.constant(mask, -float(c2))
        return SolutionFields(A0, Field.constant(mask, 0.0), psi1, psi2, higgs)
    raise ConfigurationError(f"connection must be 'literal' or 'real', got {connection!r}")


@dataclass(frozen=True)
class PairCompatReport:
    cr_h2: float  # sup |d h2 / d zbar|
    cr_h1: float  # sup |d h1 / d z|
    modulus_mismatch: float
    tol: float

    @property
    def passed(self) -> bool:
        return max(self.cr_h2, self.cr_h1, self.modulus_mismatch) <= self.tol


def check_pair_compat(h1: Field, h2: Field, tol: float = 1e-8) -> PairCompatReport:
    """Check that ``h2`` is holomorphic, ``h1`` antiholomorphic and ``|h1| = |h2|``."""
    if not h1.mask.same_as(h2.mask):
        raise ValueError("h1 and h2 must share a mask")
    interior = h1.mask.interior
    scale = max(1.0, h1.sup(interior), h2.sup(interior))
    return PairCompatReport(
        cr_h2=wirtinger(h2, "zbar").sup(interior) / scale,
        cr_h1=wirtinger(h1, "z").sup(interior) / scale,
        modulus_mismatch=float(np.nanmax(np.abs(np.abs(h1.data) - np.abs(h2.data)))) / scale,
        tol=tol,
    )


def divisor_of(s: SolutionFields, tau_rel: float = 1e-8) -> VortexDivisor:
    """Zeros of ``psi2`` with multiplicities, by plaquette winding."""
    wc = count_zeros_winding(s.psi2, s.mask, tau_rel=tau_rel)
    entries = []
    for z, m in wc.zeros:
        if m < 0:
            raise GeometryError(f"psi2 has negative winding {m} near {z}; not a holomorphic-type zero")
        entries.append((z, m))
    return VortexDivisor(tuple(entries))
