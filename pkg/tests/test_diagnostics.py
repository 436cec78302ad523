import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from granflow.core import DiagnosticRecord, GasParams, Grid1D, PrimitiveField
from granflow.diagnostics import (FULL_DOMAIN, InequalityReport, InsufficientSeries, Region,
                                  check_identities, check_inequalities, estimate_blowup,
                                  evaluate_run, functionals, identity_residuals,
                                  interpolation_constant, k_plus, internal_energy_constant,
                                  moment_interpolation_check, momentum_hypothesis,
                                  track_support, uniform_prefix)
from granflow.exact import automodel_eval, haff_temperature
from granflow.scenario import Homogeneous, OutputConfig, Scenario, TimeConfig
from granflow.solver import run

G = GasParams(5.0 / 3.0, 1.0)
fields_st = st.lists(st.tuples(st.floats(1e-3, 10.0), st.floats(-5.0, 5.0),
                               st.floats(1e-3, 10.0)), min_size=2, max_size=40)


def _pf(cells):
    return PrimitiveField(*(np.array(c) for c in zip(*cells)))


def test_functionals_of_simple_field():
    grid = Grid1D(-1.0, 1.0, 2000)
    x = grid.centers
    pf = PrimitiveField(np.ones_like(x), x, np.full_like(x, 2.0))
    r = functionals(pf, grid, G)
    assert r.M == pytest.approx(2.0)
    assert r.P == pytest.approx(0.0, abs=1e-12)
    assert r.G == pytest.approx(1.0 / 3.0, rel=1e-6)
    assert r.F == pytest.approx(2.0 / 3.0, rel=1e-6)
    assert r.Ek == pytest.approx(1.0 / 3.0, rel=1e-6)
    assert r.Ei == pytest.approx(4.0 / (G.gamma - 1.0))
    assert r.S == pytest.approx(4.0)
    assert r.dudx_max == pytest.approx(1.0)


@settings(max_examples=100, deadline=None)
@given(fields_st, st.floats(0.1, 10.0))
def test_functionals_linear_in_density(cells, scale):
    pf = _pf(cells)
    grid = Grid1D(-1.0, 1.0, len(pf))
    a = functionals(pf, grid, G)
    b = functionals(PrimitiveField(pf.rho * scale, pf.u, pf.T * pf.rho * scale), grid, G)
    # P and F may cancel; measure their error against the sum of magnitudes
    mag = np.sum(pf.rho * np.abs(pf.u) * (1.0 + np.abs(grid.centers))) * grid.dx
    for name in ("M", "P", "Ek", "G", "F", "Ei"):
        assert getattr(b, name) == pytest.approx(scale * getattr(a, name), rel=1e-12,
                                                 abs=1e-14 * scale * mag)


@settings(max_examples=200, deadline=None)
@given(fields_st)
def test_cauchy_schwarz_and_q(cells):
    pf = _pf(cells)
    grid = Grid1D(-2.0, 3.0, len(pf))
    r = functionals(pf, grid, G)
    assert r.F**2 <= 4.0 * r.G * r.Ek * (1 + 1e-12) + 1e-300
    reps = {x.name: x for x in check_inequalities(r, r, G, k_plus(pf, G))}
    assert reps["Q_positive"].satisfied and reps["internal_by_Q"].satisfied
    assert reps["kinetic_lower"].satisfied


def test_region_restriction():
    grid = Grid1D(-2.0, 2.0, 40)
    x = grid.centers
    pf = PrimitiveField(np.ones_like(x), np.zeros_like(x), np.ones_like(x))
    full = functionals(pf, grid, G, FULL_DOMAIN)
    part = functionals(pf, grid, G, Region("tracked_support", 1e-6, 1.0))
    assert part.M == pytest.approx(full.M / 2)
    empty = functionals(pf, grid, G, Region("tracked_support", 1e-6, 0.01))
    assert empty.M == 0


def test_boundary_fluxes_of_uniform_flow():
    grid = Grid1D(0.0, 1.0, 10)
    n = 10
    pf = PrimitiveField(np.full(n, 2.0), np.full(n, 0.5), np.full(n, 1.0))
    r = functionals(pf, grid, G)
    # equal inflow and outflow of mass, momentum and energy
    assert r.flux_E == pytest.approx(0.0, abs=1e-14)
    # G flux: rho u (x_r^2 - x_l^2) / 2
    assert r.flux_G == pytest.approx(2.0 * 0.5 * 0.5)


def test_identity_residuals_second_order_on_exact_series(gas, traveling):
    grid = Grid1D(0.0, 2.0, 4000)
    xg = np.array([grid.x_min - 0.5 * grid.dx, grid.x_max + 0.5 * grid.dx])

    def series(h):
        out = []
        for t in np.arange(0.0, 1.0 + 1e-9, h):
            pf = PrimitiveField(*automodel_eval(grid.centers, t, traveling, gas))
            gr, gu, gp = automodel_eval(xg, t, traveling, gas)
            out.append(functionals(pf, grid, gas, t=t,
                                   ghosts=((gr[0], gu[0], gp[0]), (gr[1], gu[1], gp[1]))))
        return out

    coarse = identity_residuals(series(0.1), gas)
    fine = identity_residuals(series(0.05), gas)
    for name in coarse:
        ratio = np.max(coarse[name]["residual"]) / np.max(fine[name]["residual"])
        assert ratio > 3.0, name


def test_identity_checks_on_haff_run(gas):
    sc = Scenario(gas, Grid1D(-1.0, 1.0, 20), Homogeneous(1.0, 0.0, 1.0), "periodic",
                  TimeConfig(2.0), OutputConfig(0.01))
    recs = run(sc).records
    reps = check_identities(recs, gas, tolerance=1e-3)
    assert all(r.satisfied for r in reps)
    tab = identity_residuals(recs, gas)
    # energy decay rate equals the Haff rate
    Ei = np.array([r.Ei for r in recs])
    assert np.allclose(Ei * (gas.gamma - 1) / 2.0,
                       haff_temperature(np.array([r.t for r in recs]), 1.0, 1.0, 1.0),
                       rtol=1e-10)
    assert np.max(tab["energy"]["residual"]) < 1e-3


def test_identity_series_errors(gas):
    rec = DiagnosticRecord(0, 1, 0, 1, 0, 1, 1, 0, 1, 1, 1, 0)
    with pytest.raises(InsufficientSeries):
        identity_residuals([rec, rec], gas)
    recs = [DiagnosticRecord(t, 1, 0, 1, 0, 1, 1, 0, 1, 1, 1, 0) for t in (0, 1, 3)]
    with pytest.raises(InsufficientSeries):
        identity_residuals(recs, gas)
    assert len(uniform_prefix(recs)) == 2


def test_inequalities_at_time_zero(gas):
    grid = Grid1D(-1.0, 1.0, 50)
    x = grid.centers
    pf = PrimitiveField(1 + 0.5 * np.cos(np.pi * x), 0.3 * x, np.ones_like(x))
    r = functionals(pf, grid, gas)
    reps = {x.name: x for x in check_inequalities(r, r, gas, k_plus(pf, gas))}
    assert reps["G_lower"].margin == pytest.approx(0.0, abs=1e-15)
    assert reps["G_upper"].margin == pytest.approx(0.0, abs=1e-15)
    assert not any(x.failed for x in reps.values())
    assert reps["dissipation_bound"].satisfied
    # at the anchor (e) reduces to (d)
    assert reps["internal_decay"].rhs == pytest.approx(reps["internal_by_Q"].rhs, rel=1e-13)
    with pytest.raises(ValueError):
        check_inequalities(DiagnosticRecord(0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0), r, gas, 1.0)


def test_gamma_outside_virial_range_marks_not_applicable():
    g = GasParams(3.5, 1.0)
    grid = Grid1D(-1.0, 1.0, 10)
    x = grid.centers
    pf = PrimitiveField(np.ones_like(x), x, np.ones_like(x))
    r = functionals(pf, grid, g)
    reps = {x.name: x for x in check_inequalities(r, r, g, k_plus(pf, g))}
    assert not reps["G_lower"].applicable and not reps["G_lower"].failed


def test_dissipation_bound_on_homogeneous_cooling(gas):
    # exact homogeneous cooling: the bound must hold, with K_plus = K(0)
    M, T0, lam = 2.0, 1.0, 1.0
    ts = np.linspace(0.0, 20.0, 41)
    init = None
    for t in ts:
        T = haff_temperature(t, 1.0, T0, lam)
        Ei = M * T / (gas.gamma - 1)
        rec = DiagnosticRecord(t, M, 0.0, Ei, 0.0, Ei, 1.0 / 3.0, 0.0, M * T, T, 1.0, 0.0)
        init = init or rec
        reps = {x.name: x for x in check_inequalities(rec, init, gas, K_plus=T0)}
        assert reps["dissipation_bound"].satisfied, t


def test_internal_energy_constant_value(gas):
    gm = gas.gamma
    expected = 2.0 ** (-1 / (gm - 1)) * (gm - 1) ** ((3 * gm - 1) / (2 * (gm - 1))) \
        * 3.0 ** (-(gm + 1) / (2 * (gm - 1)))
    assert internal_energy_constant(2.0, 3.0, gas) == pytest.approx(expected)


def test_interpolation_zero_and_bump(gas):
    grid = Grid1D(-2.0, 2.0, 400)
    x = grid.centers
    zero = PrimitiveField(np.ones_like(x), np.zeros_like(x), np.zeros_like(x))
    rep = moment_interpolation_check(zero, grid, gas)
    assert rep.lhs == 0 and rep.rhs == 0 and rep.satisfied
    rho = np.where(np.abs(x - 1.0) < 0.05, 1.0, 1e-12)
    bump = PrimitiveField(rho, np.zeros_like(x), rho.copy())
    rep = moment_interpolation_check(bump, grid, gas)
    assert rep.satisfied and rep.margin > 0


def test_interpolation_homogeneous_of_degree_one(gas, rng):
    grid = Grid1D(-3.0, 3.0, 200)
    rho = rng.uniform(0.1, 2.0, 200)
    p = rng.uniform(0.1, 2.0, 200)
    a = moment_interpolation_check(PrimitiveField(rho, 0 * rho, p), grid, gas)
    # K rho = p rho^(1 - gamma); scaling p scales f
    b = moment_interpolation_check(PrimitiveField(rho, 0 * rho, 7.0 * p), grid, gas)
    assert b.lhs == pytest.approx(7.0 * a.lhs) and b.rhs == pytest.approx(7.0 * a.rhs)
    assert interpolation_constant(gas.gamma) > 0


def test_track_support(gas):
    grid = Grid1D(-5.0, 5.0, 100)
    x = grid.centers
    bg = PrimitiveField(np.ones_like(x), np.zeros_like(x), np.ones_like(x))
    reg = track_support(bg, grid, bg, 1e-6, fallback_radius=2.0)
    assert reg.empty and reg.radius == 2.0
    bump = np.where(np.abs(x) < 1.0, (1 - x**2) ** 2, 0.0)
    pf = PrimitiveField(bg.rho + bump, bg.u, bg.p)
    reg = track_support(pf, grid, bg, 1e-6)
    assert abs(reg.radius - 1.0) <= grid.dx
    reg = track_support(bg, grid, bg, 1e-6, core_radius=0.5)
    assert reg.radius == pytest.approx(0.45)


def test_momentum_hypothesis(gas):
    grid = Grid1D(-5.0, 5.0, 100)
    x = grid.centers
    pf = PrimitiveField(np.ones_like(x), np.where(np.abs(x) < 1, 10.0, 0.0), np.ones_like(x))
    out = momentum_hypothesis(pf, grid, gas, 1.0, 1.0, 1.0)
    assert out["M_tilde"] == pytest.approx(2.0)
    assert out["P_tilde"] == pytest.approx(20.0)
    assert out["holds"]


def _series(ts, rates):
    return [DiagnosticRecord(t, 1, 0, 1, 0, 1, 1, 0, 1, 1, 1, r) for t, r in zip(ts, rates)]


def test_estimate_blowup_on_pole():
    ts = np.linspace(0.0, 0.9, 19)
    est = estimate_blowup(_series(ts, np.abs(1.0 / (ts - 1.0))))
    assert est is not None and est[0] <= 1.0 <= est[1]
    assert estimate_blowup(_series(ts, np.ones_like(ts))) is None
    assert estimate_blowup(_series(ts, np.zeros_like(ts))) is None
    with pytest.raises(InsufficientSeries):
        estimate_blowup(_series(ts[:3], ts[:3]))


def test_report_json_round_values():
    rep = InequalityReport.compare("x", 1.0, math.inf)
    d = rep.to_json()
    assert d["rhs"] is None and d["satisfied"]
    bad = InequalityReport.compare("y", 2.0, 1.0, gating=False)
    assert not bad.satisfied and not bad.failed


def test_evaluate_haff_run(gas):
    sc = Scenario(gas, Grid1D(-1.0, 1.0, 20), Homogeneous(1.0, 0.0, 1.0), "periodic",
                  TimeConfig(2.0), OutputConfig(0.1))
    res = run(sc)
    ev = evaluate_run(res.records, gas, K_plus=k_plus(res.initial, gas), boundary="periodic",
                      dx=sc.grid.dx)
    assert ev.ok, [r.name for r in ev.failures]
    names = {r.name for r in ev.extra}
    assert {"energy_monotone", "entropy_monotone", "kmax_monotone"} <= names
    assert ev.blowup_estimate is None
    d = ev.to_json()
    assert d["ok"] and len(d["identities"]) == 4


def test_evaluate_flags_energy_increase(gas):
    sc = Scenario(gas, Grid1D(-1.0, 1.0, 20), Homogeneous(1.0, 0.0, 1.0), "periodic",
                  TimeConfig(1.0), OutputConfig(0.1))
    recs = run(sc).records
    bumped = list(recs)
    r = bumped[5]
    bumped[5] = DiagnosticRecord(**{**r.as_dict(), "E": r.E * 1.01, "Ei": r.Ei * 1.01})
    ev = evaluate_run(bumped, gas, K_plus=1.0, boundary="periodic", dx=0.1)
    assert not ev.ok
