import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import barrier_oracle, independent_poisson

from swvortex.errors import BarrierError, ConfigurationError, GeometryError, NewtonStagnationError
from swvortex.grid import Field, GridSpec, VortexDivisor, build_mask, laplacian
from swvortex.sinh_gordon import (
    SinhGordonProblem,
    Window,
    barrier_search,
    boundary_data,
    build_G,
    build_r,
    discrete_residual,
    distributional_charge,
    harmonic_extension,
    nested_refinement,
    solve_bvp,
)


def _problem(divisor=((0, 2),), M=0.25, Mprime=0.0, n=65, extent=3.2, R=3.0, eps=0.2, **kw):
    return SinhGordonProblem(
        divisor=VortexDivisor(tuple(divisor)), M=M, Mprime=Mprime, R=R, eps=eps,
        grid=GridSpec(extent=extent, n=n), **kw,
    )


def test_G_closed_form_values():
    g = GridSpec(extent=12.0, n=49)
    m = build_mask(g, None)
    G = build_G(VortexDivisor.of((0, 2)), m)
    i1, j1 = g.nearest_node(1.0)
    i10, j10 = g.nearest_node(10.0)
    assert G.data[i1, j1] == pytest.approx(-math.log(2))
    assert G.data[i10, j10] == pytest.approx(-math.log(1.01))
    assert np.nanmax(G.data) <= 0
    i0, j0 = g.nearest_node(0j)
    assert np.isnan(G.data[i0, j0])


def test_laplacian_of_G_matches_r_second_order():
    div = VortexDivisor.of((0, 2), (1.0 + 0.5j, 3))
    errs = []
    for n in (81, 161):
        g = GridSpec(extent=4.0, n=n)
        m = build_mask(g, None)
        G, r = build_G(div, m), build_r(div, m)
        far = m.interior.copy()
        for p in div.points:
            far &= np.abs(g.Z - p) >= 5 * 0.1  # 5h of the coarse grid
        errs.append((laplacian(G) - r).sup(far))
    assert 3.2 <= errs[0] / errs[1] <= 4.8


def test_r_requires_multiplicity_two():
    m = build_mask(GridSpec(extent=1.0, n=9), None)
    with pytest.raises(ConfigurationError):
        build_r(VortexDivisor.of((0, 1)), m)


@pytest.mark.parametrize(
    "kw",
    [
        {"M": 1.0},
        {"M": -0.1},
        {"Mprime": -1.0},
        {"divisor": ((0, 1),)},
        {"eps": 0.05},
        {"continuation_steps": 0},
    ],
)
def test_problem_validation(kw):
    with pytest.raises(ConfigurationError):
        _problem(**kw)


def test_boundary_data_values():
    p = _problem()
    G = build_G(p.divisor, p.mask)
    g = boundary_data(p.mask, G)
    assert np.all(g.outer == 0)
    np.testing.assert_allclose(g.inner, -G.data[p.mask.puncture_band])


def test_harmonic_extension_of_constant():
    m = build_mask(GridSpec(extent=1.2, n=49), 1.0, [(0.2j, 0.2)])
    g = Field(m, np.where(m.band, 0.7, np.nan))
    h = harmonic_extension(g, m)
    np.testing.assert_allclose(h.data[m.interior], 0.7, atol=1e-8)


def test_trivial_solve_is_exactly_zero():
    res = solve_bvp(_problem(divisor=(), M=0.4))
    assert res.v.sup() <= 1e-12
    assert res.residual_sup <= 1e-12


def test_linear_limit_matchesindependent_poisson():
    p = _problem(M=0.0, n=65)
    res = solve_bvp(p)
    m = p.mask
    G = build_G(p.divisor, m)
    r = build_r(p.divisor, m)
    band = np.where(m.outer_band, 0.0, np.where(m.puncture_band, -G.data, np.nan))
    oracle = independent_poisson(m, -r.data, band)
    assert np.nanmax(np.abs(res.v.data[m.interior] - oracle[m.interior])) <= 1e-10


def test_solve_result_invariants():
    p = _problem(n=65)
    res = solve_bvp(p)
    assert res.residual_sup <= p.tol_newton
    sel = p.mask.interior
    np.testing.assert_allclose(res.u.data[sel], (res.v + res.G + p.Mprime).data[sel])
    F = discrete_residual(res.v, res.G, res.r, p.M, p.Mprime)
    assert F.sup(sel) == res.residual_sup


def test_newton_iteration_cap_raises_with_iterate():
    p = _problem(max_newton_iters=1, continuation_steps=1, tol_newton=1e-14)
    with pytest.raises(NewtonStagnationError) as info:
        solve_bvp(p)
    assert info.value.iterate is not None


def test_barrier_constants_match_closed_form():
    p = _problem(n=65)
    res = solve_bvp(p)
    rep = res.barrier
    c_min, c_max = barrier_oracle(p, res.h, res.G, res.r)
    assert rep.C_plus == pytest.approx(c_min, abs=1e-10)
    assert rep.C_minus == pytest.approx(c_max, abs=1e-10)
    assert rep.ordered_pair == (rep.C_minus <= rep.C_plus)
    assert rep.ell <= rep.b <= 0
    assert rep.sigma > 0 and rep.eta > 0


def test_barrier_certificates_are_consistent():
    p = _problem(n=65)
    res = solve_bvp(p)
    rep = barrier_search(p, res.h, res.G, res.r)
    sel = p.mask.interior
    for C, cert in ((rep.C_plus, rep.certificate_plus), (rep.C_minus, rep.certificate_minus)):
        f = -2 * p.M * np.sinh(res.h.data[sel] + C + res.G.data[sel] + p.Mprime) - res.r.data[sel]
        assert np.array_equal(cert.data[sel], np.sign(f))
    assert np.all(rep.certificate_plus.data[sel] >= 0)
    assert np.all(rep.certificate_minus.data[sel] <= 0)
    d = rep.to_dict()
    assert d["certificate_plus"]["negative"] == 0


def test_barrier_search_is_deterministic():
    p = _problem(n=65)
    a, b = solve_bvp(p).barrier.to_dict(), solve_bvp(p).barrier.to_dict()
    assert a == b


def test_monotone_mode_needs_ordered_pair():
    p = _problem(n=65)
    with pytest.raises(BarrierError, match="ordered pair"):
        solve_bvp(p, mode="monotone")


def test_monotone_mode_on_vortex_free_problem():
    # small disk: the shifted sweep contracts
    p = _problem(divisor=(), M=0.3, Mprime=0.2, n=65, extent=1.2, R=1.0)
    res = solve_bvp(p, mode="monotone")
    assert res.barrier.ordered_pair
    assert isinstance(res.monotone_ok, bool)
    assert res.residual_sup <= p.tol_newton
    newton = solve_bvp(p)
    np.testing.assert_allclose(res.v.data[p.mask.interior], newton.v.data[p.mask.interior], atol=1e-7)


def test_distributional_charge_of_log_profile():
    # oracle: u = 2 log|z| + smooth has charge exactly 2
    g = GridSpec(extent=3.2, n=257)
    m = build_mask(g, 3.0, [(0j, 0.2)])
    u = Field.sample(m, lambda z: 2 * np.log(np.abs(z)) + np.cos(z.real) * z.imag)
    (q,) = distributional_charge(u, VortexDivisor.of((0, 2)), 0.2)
    assert q == pytest.approx(2.0, rel=5e-3)


def test_nested_refinement_validation():
    p = _problem()
    with pytest.raises(ConfigurationError):
        nested_refinement(p, [0.2, 0.1], [3.0, 3.0, 3.0], Window(2.0, 0.5))
    with pytest.raises(GeometryError):
        nested_refinement(p, [0.4, 0.2], [3.0], Window(2.0, 0.3))
    with pytest.raises(GeometryError):
        nested_refinement(p, [0.4, 0.2], [3.0], Window(3.5, 0.8))


def test_nested_refinement_small_schedule():
    rep = nested_refinement(_problem(n=33, eps=0.4), [0.4, 0.2], [3.0], Window(2.0, 0.8))
    assert rep.complete
    assert [s[2] for s in rep.schedule] == [33, 65]
    assert len(rep.differences) == 1


@given(st.floats(0.01, 0.3), st.floats(0.0, 0.5))
def test_newton_converges_across_parameters(M, Mprime):
    p = _problem(M=M, Mprime=Mprime, n=33, eps=0.4)
    res = solve_bvp(p)
    assert res.residual_sup <= p.tol_newton
    assert np.nanmax(res.G.data) <= 0 and np.nanmax(res.r.data) <= 0
