"""Singular sinh-Gordon boundary value problem on a punctured disk.

With vortex points ``z_k`` of multiplicity ``a_k >= 2`` we write the unknown
as ``u = v + G + M'`` where

    G(z) = sum_k -log(1 + |z - z_k|^(-a_k))
    r(z) = sum_k -a_k^2 |z - z_k|^(a_k - 2) / (1 + |z - z_k|^a_k)^2

so that ``v`` is smooth and solves ``lap v = f(z, v)`` with
``f(z, v) = -2 M sinh(v + G + M') - r`` on ``D(0,R)`` minus the puncture
disks, ``v = 0`` on the outer circle and ``v = -G`` on every inner circle.

The discrete problem replaces the Laplacian by the five-point stencil and
imposes Dirichlet data on the one-node boundary bands of the mask.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.interpolate import RegularGridInterpolator
from scipy.optimize import brentq

from .errors import BarrierError, ConfigurationError, GeometryError, NewtonStagnationError, SolverError
from .grid import DomainMask, Field, GridSpec, VortexDivisor, build_mask, contour_normal_flux, laplacian

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SinhGordonProblem:
    """Parameters of one discrete solve.

    ``M = 0`` is accepted as the linear limit. ``eps_floor`` is the minimum
    puncture radius in units of ``h`` (2 by default).
    """

    divisor: VortexDivisor
    M: float
    Mprime: float
    R: float
    eps: float
    grid: GridSpec
    tol_newton: float = 1e-8
    tol_linear: float = 1e-10
    continuation_steps: int = 8
    eps_floor: float = 2.0
    max_newton_iters: int = 60

    def __post_init__(self):
        if not (0 <= self.M < 1):
            raise ConfigurationError(f"M must lie in (0,1) (M = 0 allowed as linear limit), got {self.M}")
        if not (self.Mprime >= 0 and math.isfinite(self.Mprime)):
            raise ConfigurationError(f"Mprime must be >= 0, got {self.Mprime}")
        for p, m in self.divisor.entries:
            if m < 2:
                raise ConfigurationError(f"vortex at {p}: multiplicity {m} < 2 makes r singular")
        if self.continuation_steps < 1:
            raise ConfigurationError("continuation_steps must be >= 1")
        if not (self.tol_newton > 0 and self.tol_linear > 0):
            raise ConfigurationError("tolerances must be positive")
        self.mask  # validates geometry eagerly

    @cached_property
    def mask(self) -> DomainMask:
        punct = [(p, self.eps) for p in self.divisor.points]
        return build_mask(self.grid, self.R, punct, eps_floor=self.eps_floor)


# ------------------------------------------------------------ closed forms


def _sample_away_from_points(mask: DomainMask, divisor: VortexDivisor, fn) -> Field:
    h = mask.grid.h
    Z = mask.grid.Z
    sup = mask.support.copy()
    for p in divisor.points:
        sup &= np.abs(Z - p) >= 1e-9 * h
    data = np.full(Z.shape, np.nan)
    data[sup] = fn(Z[sup])
    return Field(mask, data)


def build_G(divisor: VortexDivisor, mask: DomainMask) -> Field:
    """``sum_k -log(1 + |z - z_k|^-a_k)``; nodes at a vortex point carry no value."""

    def G(z):
        out = np.zeros(z.shape)
        for p, a in divisor.entries:
            out -= np.log1p(np.abs(z - p) ** (-float(a)))
        return out

    return _sample_away_from_points(mask, divisor, G)


def build_r(divisor: VortexDivisor, mask: DomainMask) -> Field:
    """Smooth source term; equals the Laplacian of ``G`` away from the points."""
    for p, m in divisor.entries:
        if m < 2:
            raise ConfigurationError(f"vortex at {p}: multiplicity {m} < 2 makes r singular")

    def r(z):
        out = np.zeros(z.shape)
        for p, a in divisor.entries:
            d = np.abs(z - p)
            out -= a * a * d ** (a - 2) / (1 + d ** a) ** 2
        return out

    return Field.sample(mask, r)


@dataclass(frozen=True, eq=False)
class BoundaryData:
    """Dirichlet values on the boundary bands (NaN elsewhere)."""

    values: Field

    @property
    def outer(self) -> np.ndarray:
        return self.values.data[self.values.mask.outer_band]

    @property
    def inner(self) -> np.ndarray:
        return self.values.data[self.values.mask.puncture_band]


def boundary_data(mask: DomainMask, G: Field) -> BoundaryData:
    """0 on the outer band and ``-G`` (all vortices summed) on puncture bands."""
    data = np.full(mask.labels.shape, np.nan)
    data[mask.outer_band] = 0.0
    inner = mask.puncture_band
    if not np.all(np.isfinite(G.data[inner])):
        raise GeometryError("G is undefined on a puncture band node")
    data[inner] = -G.data[inner]
    return BoundaryData(Field(mask, data))


# ------------------------------------------------------------ linear algebra


class DirichletSystem:
    """Five-point Laplacian restricted to interior nodes, with band coupling.

    For a full-grid array ``v`` whose band entries hold the Dirichlet data,
    ``lap_h v`` at interior nodes equals ``L @ v_I + B @ v_band``.
    """

    def __init__(self, mask: DomainMask):
        self.mask = mask
        grid = mask.grid
        n = grid.n
        inv_h2 = 1.0 / grid.h ** 2
        interior = mask.interior
        self.I, self.J = np.nonzero(interior)
        N = self.I.size
        self.N = N
        idx = -np.ones((n, n), dtype=np.int64)
        idx[interior] = np.arange(N)
        self.idx = idx
        rows, cols, vals = [np.arange(N)], [np.arange(N)], [np.full(N, -4.0 * inv_h2)]
        brows, bcols = [], []
        band = mask.band
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            ni, nj = self.I + di, self.J + dj
            if np.any((ni < 0) | (ni >= n) | (nj < 0) | (nj >= n)):
                raise GeometryError("interior node on the grid frame")
            nb = idx[ni, nj]
            inner = nb >= 0
            rows.append(np.arange(N)[inner])
            cols.append(nb[inner])
            vals.append(np.full(inner.sum(), inv_h2))
            outer = ~inner
            if not np.all(band[ni[outer], nj[outer]]):
                raise GeometryError("interior node adjacent to an excluded node")
            brows.append(np.arange(N)[outer])
            bcols.append(ni[outer] * n + nj[outer])
        self.L = sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(N, N)
        )
        br = np.concatenate(brows)
        self.B = sp.csr_matrix((np.full(br.size, inv_h2), (br, np.concatenate(bcols))), shape=(N, n * n))

    def band_rhs(self, g: Field) -> np.ndarray:
        data = np.where(self.mask.band, g.data, 0.0)
        return self.B @ data.ravel()

    def scatter(self, x: np.ndarray, g: Field) -> Field:
        out = np.where(self.mask.band, g.data, np.nan)
        out[self.I, self.J] = x
        return Field(self.mask, out)

    def gather(self, f: Field) -> np.ndarray:
        return f.data[self.I, self.J]


def harmonic_extension(g: BoundaryData | Field, mask: DomainMask, tol: float = 1e-10) -> Field:
    """Discrete harmonic function with the given band values (CG on ``-L``)."""
    gf = g.values if isinstance(g, BoundaryData) else g
    if not np.all(np.isfinite(gf.data[mask.band])):
        raise GeometryError("boundary data missing on some band nodes")
    sys_ = DirichletSystem(mask)
    b = sys_.band_rhs(gf)
    if not np.any(b):
        return sys_.scatter(np.zeros(sys_.N), gf)
    A = -sys_.L
    diag = A.diagonal()
    precond = spla.LinearOperator(A.shape, matvec=lambda x: x / diag)
    x, info = spla.cg(A, b, rtol=tol, atol=0.0, maxiter=20 * sys_.N, M=precond)
    res = np.linalg.norm(A @ x - b) / np.linalg.norm(b)
    if info != 0 or res > 10 * tol:
        raise SolverError(f"harmonic extension: CG stopped with relative residual {res:.3e} (info={info})")
    return sys_.scatter(x, gf)


def _factor(A):
    # symmetric sparsity: minimum degree on A^T + A is markedly faster than COLAMD
    return spla.splu(A.tocsc(), permc_spec="MMD_AT_PLUS_A", options={"SymmetricMode": True})


# ------------------------------------------------------------ barriers


def rhs_f(v, G, r, M: float, Mprime: float):
    """``f(z, v) = -2 M sinh(v + G + M') - r`` (nodewise arrays)."""
    return -2.0 * M * np.sinh(v + G + Mprime) - r


@dataclass(frozen=True, eq=False)
class BarrierReport:
    b: float
    ell: float
    bprime: float
    ellprime: float
    sigma: float
    eta: float
    t2_paper: float | None
    t2_sigma: float | None
    t2prime_eta: float | None
    C_plus: float | None
    C_minus: float | None
    ordered_pair: bool
    recipe_C: float | None
    recipe_C_valid: bool | None
    recipe_Cprime: float | None
    recipe_Cprime_valid: bool | None
    certificate_plus: Field | None = field(default=None, repr=False)
    certificate_minus: Field | None = field(default=None, repr=False)

    def to_dict(self) -> dict:
        out = {}
        for k in (
            "b", "ell", "bprime", "ellprime", "sigma", "eta", "t2_paper", "t2_sigma", "t2prime_eta",
            "C_plus", "C_minus", "ordered_pair", "recipe_C", "recipe_C_valid", "recipe_Cprime",
            "recipe_Cprime_valid",
        ):
            out[k] = getattr(self, k)
        for name in ("certificate_plus", "certificate_minus"):
            cert = getattr(self, name)
            if cert is None:
                out[name] = None
            else:
                vals = cert.values
                out[name] = {
                    "positive": int((vals > 0).sum()),
                    "zero": int((vals == 0).sum()),
                    "negative": int((vals < 0).sum()),
                }
        return out


def _scalar_threshold(fun, want_upper: bool, limit: float = 1e3) -> float | None:
    """Root of a strictly decreasing scalar function of ``C``.

    ``want_upper`` returns the largest C with fun(C) >= 0, otherwise the
    smallest C with fun(C) <= 0. None when no sign change inside +-limit.
    """
    lo, hi = -1.0, 1.0
    while fun(lo) < 0 and lo > -limit:
        lo *= 2
    while fun(hi) > 0 and hi < limit:
        hi *= 2
    flo, fhi = fun(lo), fun(hi)
    if flo < 0 or fhi > 0:
        return None
    if flo == 0 and fhi == 0:
        return None
    C = brentq(fun, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    # nudge onto the admissible side so the certificate holds exactly
    step = max(abs(C) * 1e-15, 1e-300)
    for _ in range(200):
        val = fun(C)
        if (want_upper and val >= 0) or (not want_upper and val <= 0):
            return float(C)
        C = C - step if want_upper else C + step
        step *= 2
    return None


def barrier_search(problem: SinhGordonProblem, h: Field, G: Field, r: Field) -> BarrierReport:
    """Bounds of ``r`` and ``h + G``, the closed-form root candidates, and the
    extreme constants for the two pointwise sign conditions found by scalar
    root search over ``C``."""
    sel = problem.mask.interior
    hv, Gv, rv = h.data[sel], G.data[sel], r.data[sel]
    M, Mp = problem.M, problem.Mprime
    b, ell = float(rv.max()), float(rv.min())
    hg = hv + Gv
    bprime, ellprime = float(hg.max()), float(hg.min())
    sigma, eta = math.exp(bprime + Mp), math.exp(ellprime + Mp)
    if M > 0:
        t2_paper = (-b + math.sqrt(b * b + 4 * M)) / (2 * M)
        t2_sigma = (-b + math.sqrt(b * b + 4 * M * M)) / (2 * M * sigma)
        t2prime = (-ell + math.sqrt(ell * ell + 4 * M * M)) / (2 * M * eta)
    else:
        t2_paper = t2_sigma = t2prime = None

    def fmin(C):
        return float(np.min(rhs_f(hv + C, Gv, rv, M, Mp)))

    def fmax(C):
        return float(np.max(rhs_f(hv + C, Gv, rv, M, Mp)))

    C_plus = _scalar_threshold(fmin, want_upper=True) if M > 0 else None
    C_minus = _scalar_threshold(fmax, want_upper=False) if M > 0 else None
    ordered = C_plus is not None and C_minus is not None and C_minus <= C_plus

    recipe_C = recipe_C_valid = recipe_Cp = recipe_Cp_valid = None
    if t2_paper is not None and t2_paper > 1:
        recipe_C = math.log(0.5 * (1 + t2_paper))
        recipe_C_valid = fmin(recipe_C) >= 0
    if t2prime is not None:
        recipe_Cp = math.log(1.01 * max(1.0, t2prime))
        recipe_Cp_valid = fmax(recipe_Cp) <= 0

    def certificate(C):
        if C is None:
            return None
        data = np.full(sel.shape, np.nan)
        data[sel] = np.sign(rhs_f(hv + C, Gv, rv, M, Mp))
        return Field(problem.mask, data)

    return BarrierReport(
        b=b, ell=ell, bprime=bprime, ellprime=ellprime, sigma=sigma, eta=eta,
        t2_paper=t2_paper, t2_sigma=t2_sigma, t2prime_eta=t2prime,
        C_plus=C_plus, C_minus=C_minus, ordered_pair=ordered,
        recipe_C=recipe_C, recipe_C_valid=recipe_C_valid,
        recipe_Cprime=recipe_Cp, recipe_Cprime_valid=recipe_Cp_valid,
        certificate_plus=certificate(C_plus), certificate_minus=certificate(C_minus),
    )


# ------------------------------------------------------------ solver


@dataclass(frozen=True, eq=False)
class SolveResult:
    problem: SinhGordonProblem
    v: Field
    u: Field
    G: Field
    r: Field
    h: Field
    g: BoundaryData
    residual_sup: float
    newton_iters: int
    barrier: BarrierReport
    farfield_residual: float
    farfield_forcing: float
    mode: str = "newton"
    monotone_ok: bool | None = None
    history: tuple = ()
    wall_time: float = 0.0


def discrete_residual(v: Field, G: Field, r: Field, M: float, Mprime: float) -> Field:
    """``lap_h v + 2 M sinh(v + G + M') + r`` on interior nodes."""
    F = laplacian(v).data + 2.0 * M * np.sinh(v.data + G.data + Mprime) + r.data
    return v.with_data(np.where(v.mask.interior, F, np.nan))


def _newton(sys_, x, bg, GI, rI, M, Mp, tol, max_iter, history):
    def F(y):
        # trial steps may overflow; the line search rejects them
        with np.errstate(over="ignore", invalid="ignore"):
            return sys_.L @ y + bg + 2.0 * M * np.sinh(y + GI + Mp) + rI

    Fx = F(x)
    norm = np.abs(Fx).max()
    iters = 0
    stalled = 0
    while norm > tol:
        if iters >= max_iter:
            raise NewtonStagnationError(
                f"Newton hit {max_iter} iterations at M={M} with residual {norm:.3e}", iterate=x, history=history
            )
        J = sys_.L + sp.diags(2.0 * M * np.cosh(x + GI + Mp))
        dx = _factor(J).solve(-Fx)
        step = 1.0
        while True:
            xt = x + step * dx
            Ft = F(xt)
            nt = np.abs(Ft).max()
            if nt <= (1 - 1e-4 * step) * norm or step <= 2.0 ** -20:
                break
            step *= 0.5
        iters += 1
        history.append({"M": M, "iter": iters, "step": step, "residual": float(nt)})
        if nt >= norm:
            stalled += 1
            if stalled >= 10:
                raise NewtonStagnationError(
                    f"Newton stagnated at M={M}: residual {norm:.3e} after 10 non-decreasing steps",
                    iterate=x,
                    history=history,
                )
        else:
            stalled = 0
        x, Fx, norm = xt, Ft, nt
    return x, iters


def _monotone(sys_, x, bg, GI, rI, M, Mp, K, tol, max_sweeps, history):
    lu = _factor(sys_.L - K * sp.identity(sys_.N))
    ok = True
    for sweep in range(1, max_sweeps + 1):
        fx = -2.0 * M * np.sinh(x + GI + Mp) - rI
        xn = lu.solve(fx - K * x - bg)
        if np.any(xn > x + 1e-12 * (1 + np.abs(x))):
            ok = False
        x = xn
        res = np.abs(sys_.L @ x + bg + 2.0 * M * np.sinh(x + GI + Mp) + rI).max()
        history.append({"sweep": sweep, "residual": float(res)})
        if res <= tol:
            return x, sweep, ok
    raise SolverError(f"monotone sweep did not reach {tol:.1e} in {max_sweeps} sweeps (residual {res:.3e})")


def solve_bvp(problem: SinhGordonProblem, mode: str = "newton", max_sweeps: int = 2000) -> SolveResult:
    """Solve the discrete problem ``F(v) = 0``.

    ``mode="newton"``: damped Newton with Armijo halving, ramping ``M`` from
    0 in ``continuation_steps`` equal increments starting from the linear
    (``M = 0``) solution. ``mode="monotone"``: the shifted fixed-point sweep
    started from the upper barrier, available only when the barrier search
    finds an ordered pair of constants.
    """
    t0 = time.perf_counter()
    mask = problem.mask
    G = build_G(problem.divisor, mask)
    r = build_r(problem.divisor, mask)
    g = boundary_data(mask, G)
    hfield = harmonic_extension(g, mask, tol=problem.tol_linear)
    barrier = barrier_search(problem, hfield, G, r)

    sys_ = DirichletSystem(mask)
    bg = sys_.band_rhs(g.values)
    GI, rI = sys_.gather(G), sys_.gather(r)
    M, Mp = problem.M, problem.Mprime
    history: list = []
    monotone_ok = None
    if mode == "newton":
        x = _factor(-sys_.L).solve(bg + rI)
        iters = 0
        for k in range(1, problem.continuation_steps + 1):
            Mk = M * k / problem.continuation_steps
            x, it = _newton(sys_, x, bg, GI, rI, Mk, Mp, problem.tol_newton, problem.max_newton_iters, history)
            iters += it
    elif mode == "monotone":
        if not barrier.ordered_pair:
            raise BarrierError(
                "monotone mode needs an ordered pair of constant barriers (an upper constant C with "
                "f(z, h+C) >= 0 lying above a lower constant C' with f(z, h+C') <= 0); "
                f"the search found C_plus={barrier.C_plus}, C_minus={barrier.C_minus}"
            )
        lo = float(np.min(sys_.gather(hfield) + barrier.C_minus + GI + Mp))
        hi = float(np.max(sys_.gather(hfield) + barrier.C_plus + GI + Mp))
        K = 2.0 * M * max(math.cosh(lo), math.cosh(hi))
        x0 = sys_.gather(hfield) + barrier.C_plus
        x, iters, monotone_ok = _monotone(sys_, x0, bg, GI, rI, M, Mp, K, problem.tol_newton, max_sweeps, history)
    else:
        raise ConfigurationError(f"unknown solver mode {mode!r}")

    v = sys_.scatter(x, g.values)
    u = v + G + Mp
    F = discrete_residual(v, G, r, M, Mp)
    interior = mask.interior
    far = interior & (np.abs(mask.grid.Z) >= 0.9 * problem.R)
    forcing = np.abs(2.0 * M * np.sinh(u.data) + r.data)
    return SolveResult(
        problem=problem, v=v, u=u, G=G, r=r, h=hfield, g=g,
        residual_sup=F.sup(interior),
        newton_iters=iters,
        barrier=barrier,
        farfield_residual=F.sup(far) if far.any() else 0.0,
        farfield_forcing=float(forcing[far].max()) if far.any() else 0.0,
        mode=mode,
        monotone_ok=monotone_ok,
        history=tuple(history),
        wall_time=time.perf_counter() - t0,
    )


# ------------------------------------------------------------ charges


def distributional_charge(u: Field, divisor: VortexDivisor, eps: float) -> list[float]:
    """Normal-derivative flux of ``u`` around each vortex divided by ``2 pi``,
    on circles of radius ``max(4h, 2 eps)``."""
    rho = max(4 * u.grid.h, 2 * eps)
    return [contour_normal_flux(u, p, rho) / (2 * math.pi) for p in divisor.points]


# ------------------------------------------------------------ refinement


@dataclass(frozen=True)
class Window:
    """Annulus ``r_inner < |z - center| < r_outer`` used to compare solutions."""

    r_outer: float
    r_inner: float = 0.0
    center: complex = 0j

    def contains(self, z) -> np.ndarray:
        d = np.abs(np.asarray(z) - self.center)
        return (d < self.r_outer) & (d > self.r_inner)


@dataclass(frozen=True)
class ConvergenceReport:
    schedule: tuple[tuple[float, float, int], ...]  # (eps, R, n)
    differences: tuple[float, ...]
    non_increasing: bool
    residuals: tuple[float, ...]
    complete: bool = True
    error: str | None = None


def _refined_problem(base: SinhGordonProblem, eps: float, R: float) -> SinhGordonProblem:
    h0 = base.grid.h
    level = 0
    while eps < base.eps_floor * h0 / 2 ** level * (1 - 1e-12):
        level += 1
    h = h0 / 2 ** level
    margin = base.grid.extent - base.R
    cells = math.ceil(round(2 * (R + margin) / h, 9))
    grid = GridSpec(extent=cells * h / 2, n=cells + 1)
    return replace(base, eps=eps, R=R, grid=grid)


def nested_refinement(
    problem: SinhGordonProblem,
    eps_schedule,
    R_schedule,
    window: Window,
) -> ConvergenceReport:
    """Solve along a schedule of (eps, R) pairs and compare consecutive
    solutions ``v`` on the window.

    The two schedules are zipped after broadcasting a length-1 schedule.
    Grid spacing is halved from the base grid as needed to keep every
    puncture radius above the floor, so grids are nested. Differences are
    measured at the nodes of the coarsest grid that fall in the window.
    """
    eps_s = list(eps_schedule)
    R_s = list(R_schedule)
    if len(eps_s) == 1:
        eps_s = eps_s * len(R_s)
    if len(R_s) == 1:
        R_s = R_s * len(eps_s)
    if len(eps_s) != len(R_s):
        raise ConfigurationError("eps and R schedules must have equal length (or length 1)")
    if any(b > a for a, b in zip(eps_s, eps_s[1:])) or any(b < a for a, b in zip(R_s, R_s[1:])):
        raise ConfigurationError("eps schedule must be non-increasing and R schedule non-decreasing")
    for p in problem.divisor.points:
        d = abs(p - window.center)
        if window.r_inner - max(eps_s) <= d <= window.r_outer + max(eps_s):
            raise GeometryError(f"window touches the puncture around {p}")
    if window.r_outer + abs(window.center) >= min(R_s):
        raise GeometryError("window is not inside every domain")

    problems = [_refined_problem(problem, e, R) for e, R in zip(eps_s, R_s)]
    coarse = min(problems, key=lambda q: q.grid.n / q.grid.extent).grid
    probe = coarse.Z[window.contains(coarse.Z)]
    pts = np.column_stack([probe.real, probe.imag])
    samples, residuals, sched = [], [], []
    error = None
    for q in problems:
        try:
            res = solve_bvp(q)
        except SolverError as exc:
            error = f"solve at eps={q.eps}, R={q.R} failed: {exc}"
            break
        interp = RegularGridInterpolator((q.grid.x, q.grid.x), np.nan_to_num(res.v.data, nan=0.0))
        samples.append(interp(pts))
        residuals.append(res.residual_sup)
        sched.append((q.eps, q.R, q.grid.n))
    diffs = tuple(float(np.abs(a - b).max()) for a, b in zip(samples, samples[1:]))
    non_inc = all(b <= a * (1 + 1e-9) + 1e-14 for a, b in zip(diffs, diffs[1:]))
    return ConvergenceReport(
        schedule=tuple(sched), differences=diffs, non_increasing=non_inc,
        residuals=tuple(residuals), complete=error is None, error=error,
    )
