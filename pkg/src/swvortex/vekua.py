"""Cauchy-transform tools for generalized analytic functions.

The area operator here is ``T f(z) = -(1/pi) * integral_D f(zeta) / (zeta - z)``,
discretized by the node-cell midpoint rule over the interior nodes of the
mask. The cell that contains ``z`` is skipped: the kernel is odd about the
cell center, so its principal value there vanishes. The rule is first order
in ``h``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy.signal import fftconvolve

from .errors import ConfigurationError, GeometryError
from .grid import Field, wirtinger


def _cell_index(grid, z: complex) -> tuple[int, int]:
    # nearest node = cell containing z
    return grid.nearest_node(z)


def t_operator(f: Field, eval_points) -> np.ndarray:
    """Evaluate the area operator of ``f`` at arbitrary points of the domain."""
    mask = f.mask
    pts = np.atleast_1d(np.asarray(eval_points, dtype=complex))
    inside = mask.contains(pts)
    if not np.all(inside):
        bad = pts[~inside][0]
        raise GeometryError(f"evaluation point {bad} lies outside the mask domain")
    grid = f.grid
    sel = mask.interior
    vals = f.data[sel]
    if not np.all(np.isfinite(vals)):
        raise GeometryError("integrand is undefined at some interior nodes")
    nodes = grid.Z[sel]
    idx = np.argwhere(sel)
    out = np.empty(pts.shape, dtype=complex)
    for k, z in enumerate(pts):
        ci, cj = _cell_index(grid, z)
        diff = nodes - z
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = vals / diff
        terms[(idx[:, 0] == ci) & (idx[:, 1] == cj)] = 0.0
        out[k] = -(grid.h ** 2 / math.pi) * terms.sum()
    return out


def _kernel(n: int, h: float) -> np.ndarray:
    off = np.arange(-(n - 1), n) * h
    D = off[:, None] + 1j * off[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        K = 1.0 / D
    K[n - 1, n - 1] = 0.0
    return K


def t_operator_grid(f: Field) -> Field:
    """Area operator evaluated at every non-excluded node of ``f.mask``.

    Same quadrature as :func:`t_operator` at nodes, computed as one FFT
    convolution with the lattice kernel ``1/(z_i - zeta_j)``.
    """
    mask = f.mask
    grid = f.grid
    sel = mask.interior
    src = np.where(sel, f.data, 0.0).astype(complex)
    if not np.all(np.isfinite(src)):
        raise GeometryError("integrand is undefined at some interior nodes")
    n = grid.n
    full = fftconvolve(src, _kernel(n, grid.h), mode="full")
    out = (grid.h ** 2 / math.pi) * full[n - 1 : 2 * n - 1, n - 1 : 2 * n - 1]
    return Field(mask, np.where(mask.support, out, np.nan))


@dataclass(frozen=True, eq=False)
class VekuaCoeffs:
    """Coefficients of ``dw/dzbar = A w + B conj(w) + f``."""

    A: Field
    B: Field
    f: Field | None = None


@dataclass(frozen=True, eq=False)
class Factorization:
    phi: Field
    holo: Field
    cr_residual: float
    flagged_nodes: int = 0
    degenerate: bool = False
    min_exp_phi: float = float("nan")
    inhomogeneity_ratio: float | None = None


def _cr_residual(holo: Field) -> float:
    return wirtinger(holo, "zbar").sup(holo.mask.interior)


def similarity_factor(w: Field, coeffs: VekuaCoeffs, floor_rel: float = 1e-8) -> Factorization:
    """Split ``w = holo * exp(phi)`` with ``phi = T(A + B conj(w)/w)``.

    Where ``|w|`` falls below ``floor_rel * sup|w|`` the quotient is replaced
    by 1, i.e. the integrand becomes ``A + B``. With an inhomogeneous term
    the integrand gains ``f/w``; its sup over non-flagged nodes is reported
    rather than checked against any integrability requirement.
    """
    sel = w.mask.interior
    sup_w = w.sup(sel)
    if sup_w == 0.0:
        zero = Field(w.mask, np.where(w.mask.support, 0.0 + 0.0j, np.nan))
        return Factorization(zero, zero, 0.0, int(sel.sum()), degenerate=True)
    low = np.abs(w.data) < floor_rel * sup_w
    with np.errstate(divide="ignore", invalid="ignore"):
        quot = np.where(low, 1.0, np.conj(w.data) / w.data)
        integrand = coeffs.A.data + coeffs.B.data * quot
        ratio = None
        if coeffs.f is not None:
            fw = np.where(low, 0.0, coeffs.f.data / w.data)
            integrand = integrand + fw
            ratio = float(np.nanmax(np.abs(fw[sel])))
    phi = t_operator_grid(Field(w.mask, integrand))
    holo = w * phi.apply(lambda d: np.exp(-d))
    return Factorization(
        phi=phi,
        holo=holo,
        cr_residual=_cr_residual(holo),
        flagged_nodes=int((low & sel).sum()),
        min_exp_phi=float(np.nanmin(np.abs(np.exp(phi.data[sel])))),
        inhomogeneity_ratio=ratio,
    )


def system_factor(w1: Field, w2: Field, A: Field) -> tuple[Factorization, Factorization]:
    """Factor a solution of ``dw1/dz + i A w1 = 0``, ``dw2/dzbar + i conj(A) w2 = 0``.

    ``conj(w1)`` is antiholomorphic up to the factor ``exp(T(i conj A))`` and
    ``w2`` up to ``exp(T(-i conj A))``.
    """
    out = []
    for w, coef in ((w1.conj(), 1j * A.conj()), (w2, -1j * A.conj())):
        phi = t_operator_grid(coef)
        holo = w * phi.apply(lambda d: np.exp(-d))
        sel = w.mask.interior
        out.append(
            Factorization(
                phi=phi,
                holo=holo,
                cr_residual=_cr_residual(holo),
                min_exp_phi=float(np.nanmin(np.abs(np.exp(phi.data[sel])))),
            )
        )
    return out[0], out[1]


def t_operator_baseline(mask) -> float:
    """``sup |d/dzbar T(1) - 1|`` over interior nodes: the discretization floor
    of the operator pipeline on the constant field 1."""
    one = Field.constant(mask, 1.0 + 0.0j)
    d = wirtinger(t_operator_grid(one), "zbar") - 1.0
    return d.sup(mask.interior)


# ------------------------------------------------------------ weighted norms


class LpNuResult(NamedTuple):
    norm_inner: float
    norm_inverted: float
    member: bool


def _disk_lp(fn: Callable[[np.ndarray], np.ndarray], p: float, r_min: float, n_theta: int, panels: int) -> float:
    """``(integral over r_min < |z| < 1 of |fn|^p)^(1/p)`` by Gauss-Legendre on
    log-spaced radial panels and the trapezoid rule in angle."""
    xg, wg = np.polynomial.legendre.leggauss(16)
    if r_min > 0:
        edges = np.geomspace(r_min, 1.0, panels + 1)
    else:
        edges = np.concatenate([[0.0], np.geomspace(1e-8, 1.0, panels)])
    theta = 2 * np.pi * np.arange(n_theta) / n_theta
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        r = 0.5 * (b - a) * xg + 0.5 * (a + b)
        wr = 0.5 * (b - a) * wg
        z = r[:, None] * np.exp(1j * theta[None, :])
        vals = np.abs(fn(z)) ** p
        total += np.sum(wr * r * vals.mean(axis=1)) * 2 * np.pi
    return float(total ** (1.0 / p))


def lpnu_norms(
    fn: Callable[[np.ndarray], np.ndarray],
    p: float,
    nu: float,
    excisions: tuple[float, float] = (1e-2, 1e-4),
    growth_threshold: float = 1.5,
    n_theta: int = 64,
    panels: int = 40,
) -> LpNuResult:
    """L^p norm of ``fn`` on the unit disk and of its inversion ``|z|^-nu fn(1/z)``.

    The inverted norm is computed outside two shrinking excision disks around
    the origin; if it grows by more than ``growth_threshold`` between them it
    is declared divergent. A numerical heuristic, not a proof.
    """
    if p < 1:
        raise ConfigurationError(f"p must be >= 1, got {p}")
    inner = _disk_lp(fn, p, 0.0, n_theta, panels)

    def inverted(z):
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            return np.abs(z) ** (-nu) * fn(1.0 / z)

    big, small = sorted(excisions, reverse=True)
    n_big = _disk_lp(inverted, p, big, n_theta, panels)
    n_small = _disk_lp(inverted, p, small, n_theta, panels)
    if n_small == 0.0 and n_big == 0.0:
        divergent = False
    else:
        divergent = (not math.isfinite(n_small)) or n_big == 0.0 or n_small / n_big > growth_threshold
    member = math.isfinite(inner) and not divergent
    return LpNuResult(inner, n_small, member)


class ZeroRadius(NamedTuple):
    radius: float
    zeros_possible: bool


def decay_zero_radius(M: float, N: float) -> ZeroRadius:
    """Radius of the disk that must contain every zero of a field obeying
    ``0 <= M - |f|^2 <= N exp(-|z|)``. When ``M > N`` zeros are impossible."""
    if not (M > 0 and N > 0):
        raise ConfigurationError(f"M and N must be positive, got M={M}, N={N}")
    return ZeroRadius(max(0.0, math.log(N / M)), M <= N)
