"""Residuals, energies, flux and gauge transformations.

Conventions used throughout:

* the connection is ``A = i A0 dx0 + i A1 dx1`` with curvature density
  ``F = d0 A1 - d1 A0``; flux is the area integral of ``F``;
* the covariant derivative is ``nabla_j phi = d_j phi + i A_j phi``;
* ``dz ^ dzbar = -2i dx0 ^ dx1``;
* a gauge transformation by ``exp(i chi)`` maps ``A_j -> A_j - d_j chi`` and
  every matter field ``psi -> exp(i chi) psi``.

Derivatives are centered differences by default. Energy routines also accept
``stencil="spectral"``: periodic FFT derivatives on a grid built with
:meth:`GridSpec.periodic`. The spectral option exists because the product
rule, and hence gauge invariance and the completed-square energy identity,
hold only to ``O(h^2)`` with centered differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.optimize import least_squares

from .errors import ConfigurationError, GeometryError
from .explicit import SolutionFields
from .grid import DomainMask, Field, area_integral, partial, wirtinger


# ------------------------------------------------------------ derivatives


def spectral_partial(f: Field, axis: int) -> Field:
    """Periodic Fourier derivative along ``axis`` (Nyquist mode dropped)."""
    d = f.data
    if not np.all(np.isfinite(d)):
        raise GeometryError("spectral derivatives need data at every grid node")
    n = d.shape[axis]
    k = 2 * np.pi * np.fft.fftfreq(n, d=f.grid.h)
    if n % 2 == 0:
        k[n // 2] = 0.0
    shape = [1, 1]
    shape[axis] = n
    out = np.fft.ifft(1j * k.reshape(shape) * np.fft.fft(d, axis=axis), axis=axis)
    return f.with_data(out if np.iscomplexobj(d) else out.real)


def derivative(f: Field, axis: int, stencil: str = "centered") -> Field:
    if stencil == "centered":
        return partial(f, axis)
    if stencil == "spectral":
        return spectral_partial(f, axis)
    raise ValueError(f"unknown stencil {stencil!r}")


def curvature(A0: Field, A1: Field, stencil: str = "centered") -> Field:
    return derivative(A1, 0, stencil) - derivative(A0, 1, stencil)


# ------------------------------------------------------------ reconstruction


@dataclass(frozen=True)
class ReconstructionParams:
    M1: float
    M2: float
    gauge: str = "psi2_real"
    zero_floor_rel: float = 1e-8

    def __post_init__(self):
        for name in ("M1", "M2"):
            val = getattr(self, name)
            if not (0 < val < 1):
                raise ConfigurationError(f"{name} must lie in (0,1), got {val}")
        if self.gauge != "psi2_real":
            raise ConfigurationError(
                f"unsupported gauge {self.gauge!r}; reconstruct with psi2_real and apply gauge_transform"
            )

    @property
    def C(self) -> float:
        return math.log(math.sqrt(self.M1 * self.M2))

    @property
    def M(self) -> float:
        return math.sqrt(self.M1 * self.M2)

    @property
    def Mprime(self) -> float:
        return math.log(math.sqrt(self.M1 / self.M2))


def reconstruct_fields(u: Field, params: ReconstructionParams) -> SolutionFields:
    """Spinor pair and connection from a solution ``u`` of the reduced equation.

    ``lambda = exp(u)``, ``|psi2|^2 = exp(C)/lambda`` with ``psi2`` real and
    nonnegative, ``psi1 = lambda psi2``. The connection comes from
    ``alpha = (A0 - i A1)/2`` with ``i conj(alpha) = -d/dzbar log psi2``,
    differentiated only where ``|psi2|`` exceeds the zero floor.
    """
    if not np.any(np.isfinite(u.data)):
        raise GeometryError("u has no data")
    C = params.C
    with np.errstate(over="ignore"):
        log_psi2 = u.apply(lambda d: 0.5 * (C - d))
        psi2 = log_psi2.apply(np.exp)
        psi1 = psi2 * u.apply(np.exp)
    floor = params.zero_floor_rel * psi2.sup()
    dlog = wirtinger(log_psi2, "zbar")
    if not np.any(np.isfinite(dlog.data[u.mask.interior])):
        raise GeometryError("support too small to differentiate u")
    alpha = (dlog.conj() * -1j).apply(lambda d: np.where(np.abs(psi2.data) > floor, d, np.nan))
    A0 = alpha.apply(lambda d: 2 * d.real)
    A1 = alpha.apply(lambda d: -2 * d.imag)
    return SolutionFields(
        A0=A0,
        A1=A1,
        psi1=psi1.apply(lambda d: d + 0j),
        psi2=psi2.apply(lambda d: d + 0j),
        notes=(f"gauge: psi2 real >= 0; zero floor {floor:.3e}",),
    )


# ------------------------------------------------------------ residuals


class MainResiduals(NamedTuple):
    r1: float
    r2: float
    r3: float


def _sup(x: np.ndarray, where: np.ndarray) -> float:
    v = np.abs(x[where])
    v = v[np.isfinite(v)]
    return float(v.max()) if v.size else 0.0


def residual_maineq(s: SolutionFields, where: np.ndarray | None = None) -> MainResiduals:
    """Sup-norms of the three equations over interior nodes (or ``where``)."""
    sel = s.mask.interior if where is None else (where & s.mask.interior)
    A0, A1, p1, p2 = s.A0.data, s.A1.data, s.psi1.data, s.psi2.data
    e1 = 2 * wirtinger(s.psi2, "zbar").data + 1j * (A0 + 1j * A1) * p2
    e2 = 2 * wirtinger(s.psi1, "z").data + 1j * (A0 - 1j * A1) * p1
    e3 = curvature(s.A0, s.A1).data - 0.5 * (np.abs(p1) ** 2 - np.abs(p2) ** 2)
    return MainResiduals(_sup(e1, sel), _sup(e2, sel), _sup(e3, sel))


class HiggsResiduals(NamedTuple):
    r1: float
    r2: float
    r3: float
    r4: float


def residual_higgs(s: SolutionFields, where: np.ndarray | None = None) -> HiggsResiduals:
    if s.higgs is None:
        raise ConfigurationError("residual_higgs needs a Higgs field")
    sel = s.mask.interior if where is None else (where & s.mask.interior)
    A0, A1, p1, p2, ph = s.A0.data, s.A1.data, s.psi1.data, s.psi2.data, s.higgs.data
    e1 = wirtinger(s.higgs, "zbar").data + 0.5 * p1 * np.conj(p2)
    e2 = curvature(s.A0, s.A1).data - 0.5 * (np.abs(p1) ** 2 - np.abs(p2) ** 2)
    e3 = 2 * wirtinger(s.psi2, "zbar").data + 1j * (A0 + 1j * A1) * p2 - np.conj(ph) * p1
    e4 = 2 * wirtinger(s.psi1, "z").data + 1j * (A0 - 1j * A1) * p1 - ph * p2
    return HiggsResiduals(_sup(e1, sel), _sup(e2, sel), _sup(e3, sel), _sup(e4, sel))


def residual_taubes(A0: Field, A1: Field, phi: Field) -> tuple[float, float]:
    """Vortex equations of the abelian Higgs model.

    ``r1 = sup|d phi/dzbar - (i/2)(A0 + i A1) phi|`` and, reading the
    curvature equation as coefficients of ``dx0 ^ dx1``,
    ``r2 = sup|-F/2 + 2i (1 - |phi|^2)|``.
    """
    sel = phi.mask.interior
    e1 = wirtinger(phi, "zbar").data - 0.5j * (A0.data + 1j * A1.data) * phi.data
    e2 = -0.5 * curvature(A0, A1).data + 2j * (1 - np.abs(phi.data) ** 2)
    return _sup(e1, sel), _sup(e2, sel)


# ------------------------------------------------------------ energy


def _covariant(A0: Field, A1: Field, phi: Field, stencil: str):
    n0 = derivative(phi, 0, stencil) + 1j * A0 * phi
    n1 = derivative(phi, 1, stencil) + 1j * A1 * phi
    return n0, n1


def ymh_functional(
    A0: Field, A1: Field, phi: Field, mask: DomainMask | None = None, stencil: str = "centered"
) -> float:
    """``(1/2) * integral of (F^2/4 + |nabla phi|^2 + (|phi|^2 - 1)^2)``."""
    mask = phi.mask if mask is None else mask
    F = curvature(A0, A1, stencil)
    n0, n1 = _covariant(A0, A1, phi, stencil)
    dens = 0.25 * np.abs(F.data) ** 2 + np.abs(n0.data) ** 2 + np.abs(n1.data) ** 2
    dens = dens + (np.abs(phi.data) ** 2 - 1) ** 2
    return 0.5 * float(area_integral(phi.with_data(dens), mask))


@dataclass(frozen=True)
class EnergyReport:
    ymh_direct: float
    ymh_bogomolny: float
    parts: dict = field(default_factory=dict)
    flux: float = 0.0
    flux_over_2pi: float = 0.0

    @property
    def defect(self) -> float:
        return abs(self.ymh_direct - self.ymh_bogomolny)

    @property
    def algebraic_defect(self) -> float:
        return abs(self.ymh_direct - self.ymh_bogomolny - self.parts.get("boundary", 0.0))


def bogomolny_split(
    A0: Field, A1: Field, phi: Field, mask: DomainMask | None = None, stencil: str = "centered"
) -> EnergyReport:
    """Completed-square form of the energy.

    With ``nabla_0 phi = a + i b`` and ``nabla_1 phi = c + i d`` the parts are
    ``(1/2)∫(a+d)^2``, ``(1/2)∫(b-c)^2``, ``(1/2)∫(F/2 + |phi|^2 - 1)^2`` and
    the flux term ``(1/2)∫F``; their sum is ``ymh_bogomolny``. The remaining
    divergence ``∫[-det(d phi) - d0(A1|phi|^2)/2 + d1(A0|phi|^2)/2]`` is
    reported as ``boundary`` and vanishes for compactly supported data.
    """
    mask = phi.mask if mask is None else mask
    F = curvature(A0, A1, stencil)
    n0, n1 = _covariant(A0, A1, phi, stencil)
    a, b, c, d = n0.data.real, n0.data.imag, n1.data.real, n1.data.imag
    mod2 = phi.apply(lambda x: np.abs(x) ** 2)

    def integ(x):
        return float(np.real(area_integral(phi.with_data(x), mask)))

    re, im = phi.real, phi.imag
    det = derivative(re, 0, stencil).data * derivative(im, 1, stencil).data
    det = det - derivative(re, 1, stencil).data * derivative(im, 0, stencil).data
    div = -det - 0.5 * derivative(A1 * mod2, 0, stencil).data + 0.5 * derivative(A0 * mod2, 1, stencil).data
    Fd = np.real(F.data)
    parts = {
        "square_0": 0.5 * integ((a + d) ** 2),
        "square_1": 0.5 * integ((b - c) ** 2),
        "potential": 0.5 * integ((Fd / 2 + mod2.data - 1) ** 2),
        "flux_term": 0.5 * integ(Fd),
        "boundary": integ(np.real(div)),
    }
    total = parts["square_0"] + parts["square_1"] + parts["potential"] + parts["flux_term"]
    fl = integ(Fd)
    return EnergyReport(
        ymh_direct=ymh_functional(A0, A1, phi, mask, stencil),
        ymh_bogomolny=total,
        parts=parts,
        flux=fl,
        flux_over_2pi=fl / (2 * math.pi),
    )


class FluxResult(NamedTuple):
    flux: float
    over2pi: float
    integer_distance: float


def flux(A0: Field, A1: Field, mask: DomainMask | None = None, stencil: str = "centered") -> FluxResult:
    """Area integral of ``d0 A1 - d1 A0`` over the interior of ``mask``."""
    mask = A0.mask if mask is None else mask
    val = area_integral(curvature(A0, A1, stencil), mask)
    val = float(np.real(val))
    q = val / (2 * math.pi)
    return FluxResult(val, q, abs(q - round(q)))


# ------------------------------------------------------------ gauge


def gauge_transform(s: SolutionFields, chi: Field, stencil: str = "centered") -> SolutionFields:
    """Apply ``exp(i chi)``: ``A_j -> A_j - d_j chi``, ``psi_k -> exp(i chi) psi_k``.

    The Higgs field pairs with ``psi1 conj(psi2)`` and is therefore left as is.
    """
    phase = chi.apply(lambda d: np.exp(1j * d))
    return s.replace(
        A0=s.A0 - derivative(chi, 0, stencil),
        A1=s.A1 - derivative(chi, 1, stencil),
        psi1=s.psi1 * phase,
        psi2=s.psi2 * phase,
    )


def gauge_transform_pair(A0: Field, A1: Field, phi: Field, chi: Field, stencil: str = "centered"):
    """Same transformation for a single matter field ``phi``."""
    return (
        A0 - derivative(chi, 0, stencil),
        A1 - derivative(chi, 1, stencil),
        phi * chi.apply(lambda d: np.exp(1j * d)),
    )


def curl_of_gradient_defect(chi: Field, stencil: str = "centered") -> float:
    """``sup|d0 d1 chi - d1 d0 chi|`` (zero up to rounding for both stencils)."""
    d = derivative(derivative(chi, 1, stencil), 0, stencil) - derivative(derivative(chi, 0, stencil), 1, stencil)
    return d.sup()


# ------------------------------------------------------------ decay envelopes


@dataclass(frozen=True)
class EnvelopeFit:
    M: float
    N: float
    rate: float
    rms: float


@dataclass(frozen=True)
class PropertyEFit:
    M1: float
    M2: float
    N1: float
    N2: float
    rate1: float
    rate2: float
    verdict: str
    reasons: tuple[str, ...] = ()
    phase_mismatch: float = 0.0


def _fit_envelope(r: np.ndarray, q: np.ndarray, outer: np.ndarray, fit: np.ndarray, floor: float) -> EnvelopeFit:
    M0 = float(q[outer].max())
    y = np.log(np.maximum(M0 - q[fit], 0.0) + floor)
    slope, icept = np.polyfit(-r[fit], y, 1)
    x0 = [M0, max(math.exp(icept), floor), max(slope, 1e-3)]

    def resid(p):
        return p[0] - p[1] * np.exp(-p[2] * r) - q

    sol = least_squares(resid, x0, x_scale="jac", method="lm")
    M, N, k = (float(x) for x in sol.x)
    rms = float(np.sqrt(np.mean(sol.fun ** 2)) / max(abs(M), 1e-300))
    return EnvelopeFit(M, N, k, rms)


def property_E_fit(
    psi1: Field,
    psi2: Field,
    outer_fraction: float = 0.1,
    inner_radius: float = 1.0,
    rate_tol: float = 0.05,
    fit_tol: float = 1e-2,
    phase_tol: float = 1e-6,
    floor: float = 1e-14,
) -> PropertyEFit:
    """Fit ``|psi_j|^2 ~ M_j - N_j exp(-rate_j |z|)`` on the largest centered disk.

    ``M_j`` is first taken as the max of ``|psi_j|^2`` on the outer annulus,
    then a log-linear fit of ``M_j - |psi_j|^2`` against ``-|z|`` seeds a
    nonlinear least-squares refinement of all three constants. Verdicts:
    ``degenerate`` when ``|psi|^2`` is constant, ``consistent`` when both
    envelopes hold with rate at least ``1 - rate_tol``, ``0 < M_j < 1`` and
    ``psi1`` a nonnegative multiple of ``psi2``; otherwise ``inconsistent``.
    """
    mask = psi1.mask
    radius = mask.R if mask.R is not None else mask.grid.extent
    if radius < 4:
        raise GeometryError(f"envelope fit needs a disk of radius >= 4, got {radius}")
    Z = mask.grid.Z
    rr = np.abs(Z)
    sel = mask.interior & (rr <= radius) & np.isfinite(psi1.data) & np.isfinite(psi2.data)
    outer = sel & (rr >= (1 - outer_fraction) * radius)
    fitm = sel & (rr >= inner_radius)
    if not outer.any() or fitm.sum() < 10:
        raise GeometryError("annulus for the envelope fit is empty")
    r = rr[fitm]
    q1 = np.abs(psi1.data[fitm]) ** 2
    q2 = np.abs(psi2.data[fitm]) ** 2
    outer_in_fit = outer[fitm]
    allq = np.concatenate([np.abs(psi1.data[sel]) ** 2, np.abs(psi2.data[sel]) ** 2])
    if np.ptp(allq) <= 1e-12 * max(1.0, float(np.abs(allq).max())):
        m1 = float(q1.max())
        m2 = float(q2.max())
        return PropertyEFit(m1, m2, 0.0, 0.0, float("nan"), float("nan"), "degenerate", ("|psi|^2 is constant",))
    fits = [_fit_envelope(r, q, outer_in_fit, np.ones_like(r, dtype=bool), floor) for q in (q1, q2)]

    reasons = []
    for j, (fit, q) in enumerate(zip(fits, (q1, q2)), start=1):
        if not (0 < fit.M < 1):
            reasons.append(f"M{j} = {fit.M:.4g} outside (0,1)")
        if fit.rate < 1 - rate_tol:
            reasons.append(f"rate{j} = {fit.rate:.4g} below 1")
        if fit.rms > fit_tol:
            reasons.append(f"envelope misfit {fit.rms:.3g} for psi{j}")
        if np.min(fit.M - q) < -fit_tol * abs(fit.M):
            reasons.append(f"|psi{j}|^2 exceeds M{j}")
    p1, p2 = psi1.data[sel], psi2.data[sel]
    big = (np.abs(p1) > 1e-8) & (np.abs(p2) > 1e-8)
    mismatch = float(np.abs(np.angle(p1[big] * np.conj(p2[big]))).max()) if big.any() else 0.0
    if mismatch > phase_tol:
        reasons.append(f"psi1 is not a nonnegative multiple of psi2 (phase gap {mismatch:.3g})")
    return PropertyEFit(
        M1=fits[0].M, M2=fits[1].M, N1=fits[0].N, N2=fits[1].N,
        rate1=fits[0].rate, rate2=fits[1].rate,
        verdict="inconsistent" if reasons else "consistent",
        reasons=tuple(reasons), phase_mismatch=mismatch,
    )
