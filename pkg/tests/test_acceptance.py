"""Acceptance criteria 1-14, each run at its stated tolerance.

Every test records one PASS/FAIL line; the lines are printed as they are
produced and again in the terminal summary. A failing criterion fails its
test: nothing here is loosened to make a line turn green.
"""

import math
import time

import numpy as np
import pytest

from oracles import barrier_oracle, independent_poisson, t_of_one_oracle

from swvortex.config import parse_config
from swvortex.explicit import FamilyParams, divisor_of, generate_divisor_solution, generate_plane_wave
from swvortex.fieldio import decode_field, encode_field
from swvortex.gauge import (
    ReconstructionParams,
    bogomolny_split,
    flux,
    gauge_transform,
    gauge_transform_pair,
    property_E_fit,
    reconstruct_fields,
    residual_maineq,
    ymh_functional,
)
from swvortex.grid import Field, GridSpec, VortexDivisor, build_mask, square_mask
from swvortex.pipeline import run_pipeline, strip_timing
from swvortex.sinh_gordon import (
    SinhGordonProblem,
    Window,
    barrier_search,
    build_G,
    build_r,
    distributional_charge,
    nested_refinement,
    solve_bvp,
)
from swvortex.synthetic import gauge_phase, planted_envelope_pair, random_field, random_ymh_fields, unit_flux_connection
from swvortex.vekua import (
    VekuaCoeffs,
    similarity_factor,
    system_factor,
    t_operator,
    t_operator_baseline,
)

RESULTS: list[str] = []


def record(number: int, title: str, ok: bool, detail: str) -> None:
    line = f"CRITERION {number:2d} {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    RESULTS.append(line)
    print(line)
    assert ok, line


# ------------------------------------------------------------ shared setups

FAMILY = FamilyParams(c1=1, c2=0.5, theta=math.pi / 3, divisor=VortexDivisor.of((0, 1), (1, 2)))


def _family(n):
    return generate_divisor_solution(square_mask(GridSpec(extent=4.0, n=n)), FAMILY)


def _one_vortex_problem():
    # eps = 0.1 sits just above h = 0.097; the floor is relaxed to 1*h
    return SinhGordonProblem(
        divisor=VortexDivisor.of((0, 2)), M=0.25, Mprime=0.0, R=6.0, eps=0.1,
        grid=GridSpec(extent=6.2, n=129), eps_floor=1.0,
    )


_CACHE = {}


def _one_vortex_solution():
    if "c6" not in _CACHE:
        p = _one_vortex_problem()
        t0 = time.perf_counter()
        res = solve_bvp(p)
        _CACHE["c6"] = (p, res, time.perf_counter() - t0)
    return _CACHE["c6"]


def _disk(n):
    return build_mask(GridSpec(extent=1.02, n=n), 1.0)


# ------------------------------------------------------------ criteria


def test_criterion_01_explicit_family_exactness():
    r129 = max(residual_maineq(_family(129)))
    r257 = max(residual_maineq(_family(257)))
    ratio = r129 / r257
    ok = 3.2 <= ratio <= 4.8 and r257 <= 1e-2
    record(1, "explicit-family residual", ok, f"ratio={ratio:.3f} in [3.2,4.8], sup residual at 257^2={r257:.3e} <= 1e-2")


def test_criterion_02_divisor_map():
    s = _family(257)
    h = s.mask.grid.h
    got = divisor_of(s)
    degree_ok = got.degree == FAMILY.divisor.degree
    dists = []
    for p, m in FAMILY.divisor.entries:
        near = [(abs(q - p), k) for q, k in got.entries if abs(q - p) <= 2 * h]
        dists.append(min(near)[0] if near and min(near)[1] == m else math.inf)
    ok = degree_ok and max(dists) <= 2 * h
    record(2, "divisor map", ok, f"degree {got.degree} (expected {FAMILY.divisor.degree}), max location error {max(dists):.4f} <= 2h={2 * h:.4f}")


def test_criterion_03_t_operator_oracle():
    m = _disk(257)
    rng = np.random.default_rng(3)
    pts = np.sqrt(rng.uniform(0, 0.9 ** 2, 10)) * np.exp(2j * np.pi * rng.uniform(size=10))
    vals = t_operator(Field.constant(m, 1 + 0j), pts)
    oracle = np.array([t_of_one_oracle(p) for p in pts])
    oracle_gap = np.abs(oracle - np.conj(pts)).max()
    err = np.abs(vals - oracle).max()
    ok = err <= 5e-3 and oracle_gap <= 1e-12
    record(3, "T(1) against fine quadrature", ok, f"max |T(1)-zbar| = {err:.3e} <= 5e-3 over 10 points (oracle vs zbar {oracle_gap:.1e})")


def test_criterion_04_similarity_principle():
    m = _disk(129)
    one = Field.constant(m, 1 + 0j)
    zero = Field.constant(m, 0j)
    w = Field.sample(m, lambda z: np.exp(np.conj(z)))
    fac = similarity_factor(w, VekuaCoeffs(one, zero))
    base = t_operator_baseline(m)
    pw = generate_plane_wave(m, 1, 1)
    f1, f2 = system_factor(pw.psi1, pw.psi2, (pw.A0 - 1j * pw.A1) * 0.5)
    bound = 10 * base
    ok = fac.cr_residual <= bound and f1.cr_residual <= bound and f2.cr_residual <= bound
    record(
        4, "similarity factorizations", ok,
        f"single {fac.cr_residual:.3e}, system ({f1.cr_residual:.3e}, {f2.cr_residual:.3e}) <= 10 x baseline {base:.3e}",
    )


def test_criterion_05_trivial_solves():
    grid = GridSpec(extent=6.2, n=129)
    trivial = solve_bvp(SinhGordonProblem(VortexDivisor(), 0.25, 0.0, 6.0, 0.2, grid))
    vmax = trivial.v.sup()
    p = SinhGordonProblem(VortexDivisor.of((0, 2)), 0.0, 0.0, 6.0, 0.2, GridSpec(extent=6.2, n=65), eps_floor=1.0)
    lin = solve_bvp(p)
    m = p.mask
    G, r = build_G(p.divisor, m), build_r(p.divisor, m)
    band = np.where(m.outer_band, 0.0, np.where(m.puncture_band, -G.data, np.nan))
    oracle = independent_poisson(m, -r.data, band)
    gap = float(np.nanmax(np.abs(lin.v.data[m.interior] - oracle[m.interior])))
    ok = vmax <= 1e-12 and gap <= 1e-10
    record(5, "degenerate limits", ok, f"|v| with no vortices {vmax:.1e} <= 1e-12; M=0 vs independent Poisson {gap:.1e} <= 1e-10")


def test_criterion_06_nonlinear_solve():
    p, res, wall = _one_vortex_solution()
    ok = res.residual_sup <= 1e-8 and wall <= 60
    record(6, "Newton with continuation", ok, f"residual_sup={res.residual_sup:.2e} <= 1e-8 in {wall:.1f}s <= 60s ({res.newton_iters} iterations)")


def test_criterion_07_distributional_charge():
    p, res, _ = _one_vortex_solution()
    (q1,) = distributional_charge(res.u, p.divisor, p.eps)
    two = SinhGordonProblem(
        divisor=VortexDivisor.of((-1, 2), (1, 3)), M=0.25, Mprime=0.0, R=6.0, eps=0.1,
        grid=GridSpec(extent=6.2, n=129), eps_floor=1.0,
    )
    res2 = solve_bvp(two)
    qa, qb = distributional_charge(res2.u, two.divisor, two.eps)
    ok = abs(q1 - 2) <= 0.04 and abs(qa - 2) <= 0.04 and abs(qb - 3) <= 0.06
    record(7, "distributional charge", ok, f"one vortex {q1:.4f} (2 +- 2%); two vortices ({qa:.4f}, {qb:.4f}) vs (2, 3) +- 2%")


def test_criterion_08_barrier_ledger():
    p, res, _ = _one_vortex_solution()
    a = barrier_search(p, res.h, res.G, res.r)
    b = barrier_search(p, res.h, res.G, res.r)
    da, db = a.to_dict(), b.to_dict()
    deterministic = da == db and np.array_equal(a.certificate_plus.data, b.certificate_plus.data, equal_nan=True)
    sel = p.mask.interior
    consistent = True
    for C, cert in ((a.C_plus, a.certificate_plus), (a.C_minus, a.certificate_minus)):
        f = -2 * p.M * np.sinh(res.h.data[sel] + C + res.G.data[sel] + p.Mprime) - res.r.data[sel]
        consistent &= bool(np.array_equal(cert.data[sel], np.sign(f)))
    c_min, c_max = barrier_oracle(p, res.h, res.G, res.r)
    oracle_ok = abs(a.C_plus - c_min) <= 1e-10 and abs(a.C_minus - c_max) <= 1e-10
    fields_present = all(k in da for k in ("t2_paper", "t2_sigma", "C_plus", "C_minus", "ordered_pair"))
    ok = deterministic and consistent and oracle_ok and fields_present and a.t2_paper is not None
    record(
        8, "barrier ledger", ok,
        f"t2_paper={a.t2_paper:.4f}, t2_sigma={a.t2_sigma:.4f}, C_plus={a.C_plus:.4f}, C_minus={a.C_minus:.4f}, "
        f"ordered_pair={a.ordered_pair}, deterministic={deterministic}, certificates consistent={consistent}",
    )


def test_criterion_09_bogomolny_identity():
    grid = GridSpec.periodic(24.0, 192)
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(5):
        A0, A1, phi = random_ymh_fields(grid, rng)
        rep = bogomolny_split(A0, A1, phi, stencil="spectral")
        worst = max(worst, rep.defect / max(1.0, rep.ymh_direct))
    record(9, "Bogomolny identity", worst <= 1e-6, f"max relative defect over 5 seeded fields {worst:.2e} <= 1e-6")


def test_criterion_10_flux():
    s = _family(129)
    f0 = flux(s.A0, s.A1).flux
    m = build_mask(GridSpec(extent=8.0, n=257), 7.5)
    A0, A1 = unit_flux_connection(m)
    q = flux(A0, A1).over2pi
    ok = abs(f0) <= 1e-8 and abs(q - 1) <= 1e-3
    record(10, "flux", ok, f"explicit family flux {f0:.1e} (0 +- 1e-8); unit connection flux/2pi {q:.6f} (1 +- 1e-3)")


def test_criterion_11_gauge_invariance():
    grid = GridSpec.periodic(4 * math.pi, 128)
    m = square_mask(grid)
    s = generate_divisor_solution(m, FamilyParams(1, 0.5, 0.3, VortexDivisor.of((0.5, 1), (-1 + 1j, 2))))
    chi = gauge_phase(grid)
    t = gauge_transform(s, chi)
    mod_dev = max(
        float(np.nanmax(np.abs(np.abs(t.psi1.data) - np.abs(s.psi1.data)) / np.maximum(np.abs(s.psi1.data), 1e-300))),
        float(np.nanmax(np.abs(np.abs(t.psi2.data) - np.abs(s.psi2.data)) / np.maximum(np.abs(s.psi2.data), 1e-300))),
    )
    flux_dev = abs(flux(t.A0, t.A1).flux - flux(s.A0, s.A1).flux)
    counts_equal = divisor_of(t).entries == divisor_of(s).entries
    A0, A1, phi = random_ymh_fields(grid, np.random.default_rng(11), spread=1.5, widths=(0.6, 0.9))
    before = ymh_functional(A0, A1, phi, stencil="spectral")
    after = ymh_functional(*gauge_transform_pair(A0, A1, phi, chi, "spectral"), stencil="spectral")
    ymh_rel = abs(after - before) / max(1.0, abs(before))
    ok = mod_dev <= 4 * np.finfo(float).eps and flux_dev <= 1e-12 and counts_equal and ymh_rel <= 1e-6
    record(
        11, "gauge invariance", ok,
        f"|psi| rel change {mod_dev:.1e} (rounding), flux change {flux_dev:.1e}, divisor equal={counts_equal}, YMH rel change {ymh_rel:.1e} <= 1e-6",
    )


def test_criterion_12_property_E_tooling():
    m = build_mask(GridSpec(extent=8.2, n=257), 8.0)
    p1, p2 = planted_envelope_pair(m, 0.6, 0.4, 0.5, 0.3)
    planted = property_E_fit(p1, p2)
    poly_mask = build_mask(GridSpec(extent=6.2, n=129), 6.0)
    s = generate_divisor_solution(poly_mask, FAMILY)
    poly = property_E_fit(s.psi1, s.psi2)
    p, res, _ = _one_vortex_solution()
    rec = reconstruct_fields(res.u, ReconstructionParams(0.25, 0.25))
    solver_verdict = property_E_fit(rec.psi1, rec.psi2).verdict  # reported only
    ok = (
        planted.verdict == "consistent"
        and abs(planted.rate1 - 1) <= 0.05
        and abs(planted.rate2 - 1) <= 0.05
        and poly.verdict == "inconsistent"
    )
    record(
        12, "property (E) tooling", ok,
        f"planted rates ({planted.rate1:.4f}, {planted.rate2:.4f}) verdict {planted.verdict}; polynomial family {poly.verdict}; solver output (reported) {solver_verdict}",
    )


def test_criterion_13_refinement_study():
    base = SinhGordonProblem(VortexDivisor.of((0, 2)), 0.25, 0.0, 6.0, 0.2, GridSpec(extent=6.2, n=129))
    rep = nested_refinement(base, [0.2, 0.1, 0.05], [6.0], Window(3.0, 0.5))
    ok = rep.complete and rep.non_increasing and len(rep.differences) == 2
    diffs = ", ".join(f"{d:.3e}" for d in rep.differences)
    grids = ", ".join(str(n) for _, _, n in rep.schedule)
    record(13, "nested refinement", ok, f"sup differences on K: {diffs} (non-increasing={rep.non_increasing}); grids {grids}")


def test_criterion_14_io(tmp_path):
    rng = np.random.default_rng(14)
    mismatches = 0
    for k in range(100):
        n = int(rng.integers(3, 65))
        grid = GridSpec(extent=float(rng.uniform(0.5, 8.0)), n=n)
        f = Field(square_mask(grid), random_field(rng, n, complex_valued=bool(k % 2)))
        g = decode_field(encode_field(f))
        view = np.uint64
        if not np.array_equal(f.data.view(view), g.data.view(view)):
            mismatches += 1
    cfg = parse_config("[grid]\nn = 65\nextent = 3.2\n[solve]\nM = 0.25\nR = 3.0\neps = 0.2\nvortex = 0+0i : 2\n")
    a = run_pipeline(cfg, "solve", tmp_path / "a").report_path.read_text()
    b = run_pipeline(cfg, "solve", tmp_path / "b").report_path.read_text()
    same = strip_timing(a) == strip_timing(b)
    ok = mismatches == 0 and same
    record(14, "field I/O and report determinism", ok, f"{100 - mismatches}/100 bitwise round trips; reports equal modulo timing={same}")
