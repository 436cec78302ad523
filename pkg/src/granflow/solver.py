"""Planar finite-volume solver for ideal granular gas dynamics.

The homogeneous Euler part is advanced with a first-order Godunov update and
the Rusanov flux; the inelastic cooling source is applied in two exact half
steps around it (Strang splitting).
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .core import (BlowupReport, ConservedField, GasParams, PrimitiveField, conserved_to_primitive,
                   primitive_to_conserved, sound_speed)
from .exact import automodel_eval, profile_dz_dxi, steady_state_eval
from .diagnostics import functionals, track_support
from .scenario import (Automodel, BumpSpec, Homogeneous, Scenario, SteadyPerturbed, Table,
                       record_times)

log = logging.getLogger(__name__)

__all__ = [
    "BlowupReport", "RunResult", "background_field", "cooling_substep", "ghost_states",
    "initial_field", "max_wave_speed", "numerical_flux", "physical_flux", "run", "step",
    "unperturbed", "velocity_gradient_max",
]


def physical_flux(rho, u, p, g: GasParams):
    en = p / (g.gamma - 1.0) + 0.5 * rho * u * u
    return np.stack([rho * u, rho * u * u + p, u * (en + p)])


def numerical_flux(left, right, g: GasParams):
    """Rusanov (local Lax-Friedrichs) flux between primitive states ``(rho, u, p)``."""
    rl, ul, pl = (np.asarray(v, dtype=float) for v in left)
    rr, ur, pr = (np.asarray(v, dtype=float) for v in right)
    smax = np.maximum(np.abs(ul) + sound_speed(rl, pl, g.gamma),
                      np.abs(ur) + sound_speed(rr, pr, g.gamma))
    fl = physical_flux(rl, ul, pl, g)
    fr = physical_flux(rr, ur, pr, g)
    g1 = g.gamma - 1.0
    ql = np.stack([rl, rl * ul, pl / g1 + 0.5 * rl * ul * ul])
    qr = np.stack([rr, rr * ur, pr / g1 + 0.5 * rr * ur * ur])
    return 0.5 * (fl + fr) - 0.5 * smax * (qr - ql)


def cooling_substep(pf: PrimitiveField, dt: float, g: GasParams) -> PrimitiveField:
    """Exact solution of ``dp/dt = -lam rho^(1/2) p^(3/2)`` with rho and u frozen."""
    if dt < 0:
        raise ValueError("dt must be non-negative")
    p = pf.p
    if g.lam * dt == 0:
        return pf
    pos = p > 0
    p_new = np.zeros_like(p)
    p_new[pos] = (p[pos] ** -0.5 + 0.5 * g.lam * np.sqrt(pf.rho[pos]) * dt) ** -2.0
    return PrimitiveField(pf.rho, pf.u, p_new)


def _cool_conserved(cf: ConservedField, dt: float, sc: Scenario) -> tuple[ConservedField, int]:
    g = sc.gas
    pf, ev = conserved_to_primitive(cf, g, sc.floors)
    cooled = cooling_substep(pf, dt, g)
    # only the internal energy changes; density and momentum are untouched
    en = cf.en - (pf.p - cooled.p) / (g.gamma - 1.0)
    return ConservedField(cf.rho, cf.mom, en), ev


def background_field(x, sc: Scenario, t: float = 0.0):
    """Unperturbed background ``(rho, u, p)`` of a steady or automodel scenario.

    Inside the core ``|x| <= x_plus`` of a finally steady state the profile is
    continued by an even quadratic (density, pressure) and an odd cubic
    (velocity) matching value and slope at ``x_plus``.
    """
    x = np.asarray(x, dtype=float)
    ini = sc.initial
    if isinstance(ini, Automodel):
        return automodel_eval(x, t, ini.steady, sc.gas)
    if not isinstance(ini, SteadyPerturbed):
        raise ValueError("scenario has no background profile")
    sp, g = ini.steady, sc.gas
    xp = sp.x_plus
    rho = np.empty_like(x)
    u = np.empty_like(x)
    p = np.empty_like(x)
    out = np.abs(x) > xp
    if np.any(out):
        rho[out], u[out], p[out] = steady_state_eval(x[out], sp, g)
    inner = ~out
    if np.any(inner):
        k, c2 = sp.c1, sp.c2
        z0 = sp.start_value(g)
        r0 = (z0 + k * k) / c2
        dr0 = float(profile_dz_dxi(z0, sp, g)) / c2
        p0 = z0 / r0
        dp0 = k * k * dr0 / r0**2
        u0 = k / r0
        du0 = -k * dr0 / r0**2
        xi = x[inner]
        rho[inner] = r0 - 0.5 * dr0 * xp + 0.5 * dr0 / xp * xi**2
        p[inner] = p0 - 0.5 * dp0 * xp + 0.5 * dp0 / xp * xi**2
        b = (3.0 * u0 - du0 * xp) / (2.0 * xp)
        c = (du0 * xp - u0) / (2.0 * xp**3)
        u[inner] = b * xi + c * xi**3
    return rho, u, p


def _read_table(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return (np.array([float(r["x"]) for r in rows]),
            np.array([float(r["rho"]) for r in rows]),
            np.array([float(r["u"]) for r in rows]),
            np.array([float(r["p"]) for r in rows]))


def initial_field(sc: Scenario) -> PrimitiveField:
    x = sc.grid.centers
    ini = sc.initial
    if isinstance(ini, Homogeneous):
        ones = np.ones_like(x)
        return PrimitiveField(ini.rho0 * ones, ini.u0 * ones, ini.rho0 * ini.T0 * ones)
    if isinstance(ini, SteadyPerturbed):
        rho, u, p = background_field(x, sc)
        phi = ini.bump.shape(x)
        return PrimitiveField(rho + ini.bump.amp_rho * phi, u + ini.bump.amp_u * phi,
                              p + ini.bump.amp_p * phi)
    if isinstance(ini, Automodel):
        return PrimitiveField(*background_field(x, sc, 0.0))
    if isinstance(ini, Table):
        tx, rho, u, p = _read_table(ini.path)
        if tx.shape != x.shape or not np.allclose(tx, x, rtol=0, atol=1e-9 * sc.grid.dx):
            raise ValueError("table rows must match the grid cell centers")
        return PrimitiveField(rho, u, p)
    raise TypeError(f"unsupported initial data {ini!r}")


def ghost_states(pf: PrimitiveField, sc: Scenario, t: float):
    """Primitive states of the single ghost cell on each side."""
    if sc.boundary == "periodic":
        return ((pf.rho[-1], pf.u[-1], pf.p[-1]), (pf.rho[0], pf.u[0], pf.p[0]))
    if sc.boundary == "outflow":
        return ((pf.rho[0], pf.u[0], pf.p[0]), (pf.rho[-1], pf.u[-1], pf.p[-1]))
    dx = sc.grid.dx
    xg = np.array([sc.grid.x_min - 0.5 * dx, sc.grid.x_max + 0.5 * dx])
    rho, u, p = background_field(xg, sc, t)
    return ((rho[0], u[0], p[0]), (rho[1], u[1], p[1]))


def _hyperbolic(cf: ConservedField, dt: float, sc: Scenario, t: float):
    g = sc.gas
    pf, ev = conserved_to_primitive(cf, g, sc.floors)
    (rl, ul, pl), (rr, ur, pr) = ghost_states(pf, sc, t)
    rho = np.concatenate([[rl], pf.rho, [rr]])
    u = np.concatenate([[ul], pf.u, [ur]])
    p = np.concatenate([[pl], pf.p, [pr]])
    flux = numerical_flux((rho[:-1], u[:-1], p[:-1]), (rho[1:], u[1:], p[1:]), g)
    q = cf.as_array() - (dt / sc.grid.dx) * (flux[:, 1:] - flux[:, :-1])
    return ConservedField.from_array(q), ev


def step(cf: ConservedField, dt: float, sc: Scenario, t: float = 0.0) -> tuple[ConservedField, int]:
    """One Strang step: half cooling, Godunov transport, half cooling.

    Returns the new state and the number of floor activations.  ``t`` is the
    time at the start of the step; it only matters for time-dependent
    boundary data.
    """
    if dt == 0:
        return cf, 0
    half = 0.5 * dt
    cf, e1 = _cool_conserved(cf, half, sc)
    cf, e2 = _hyperbolic(cf, dt, sc, t + half)
    cf, e3 = _cool_conserved(cf, half, sc)
    return cf, e1 + e2 + e3


def max_wave_speed(pf: PrimitiveField, g: GasParams) -> float:
    return float(np.max(np.abs(pf.u) + sound_speed(pf.rho, pf.p, g.gamma)))


def velocity_gradient_max(pf: PrimitiveField, dx: float) -> float:
    if len(pf) < 2:
        return 0.0
    return float(np.max(np.abs(np.gradient(pf.u, dx))))


@dataclass
class RunResult:
    scenario: Scenario
    records: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)
    blowup: BlowupReport = field(default_factory=BlowupReport)
    floor_events: int = 0
    support: list = field(default_factory=list)
    # functionals restricted to the tracked perturbation support
    tilde_records: list = field(default_factory=list)
    steps: int = 0
    initial: PrimitiveField | None = None
    final: PrimitiveField | None = None


def unperturbed(sc: Scenario) -> Scenario:
    """The same scenario with the bump amplitudes set to zero."""
    b = sc.initial.bump
    return replace(sc, initial=SteadyPerturbed(sc.initial.steady, BumpSpec(b.radius, b.center)))


def run(sc: Scenario) -> RunResult:
    """Advance a scenario to ``t_end`` or until a blow-up trigger fires.

    For a perturbed steady state the unperturbed background is advanced in
    lockstep with the same time steps, so the perturbation support is
    measured against the discrete background rather than the continuous
    profile (which the scheme only preserves up to truncation error).
    """
    g, grid = sc.gas, sc.grid
    dx = grid.dx
    pf0 = initial_field(sc)
    cf = primitive_to_conserved(pf0, g)
    res = RunResult(sc, initial=pf0)
    rho_cap = sc.blowup.density_factor * float(np.max(pf0.rho))
    grad_cap = sc.gradient_cap
    if sc.blowup.gradient_factor is not None:
        grad_cap = min(grad_cap, sc.blowup.gradient_factor * velocity_gradient_max(pf0, dx))
    targets = record_times(sc.time.t_end, sc.output.record_interval)
    snaps = sorted(t for t in sc.output.snapshot_times if 0 <= t <= sc.time.t_end)
    bg_sc = None
    cf_bg = None
    core = 0.0
    if isinstance(sc.initial, SteadyPerturbed):
        bg_sc = unperturbed(sc)
        cf_bg = primitive_to_conserved(initial_field(bg_sc), g)
        core = sc.initial.steady.x_plus
    face_flux = lambda a, b: numerical_flux(a, b, g)  # noqa: E731

    def observe(pf, t, dt):
        rec = functionals(pf, grid, g, t=t, dt=dt, ghosts=ghost_states(pf, sc, t),
                          face_flux=face_flux)
        res.records.append(rec)
        if bg_sc is not None:
            background, _ = conserved_to_primitive(cf_bg, g, sc.floors)
            reg = track_support(pf, grid, background, sc.checks.support_epsilon, core_radius=core)
            res.support.append((t, reg.radius))
            res.tilde_records.append(functionals(pf, grid, g, reg, t=t, dt=dt,
                                                 ghosts=ghost_states(pf, sc, t),
                                                 face_flux=face_flux))

    t = 0.0
    t_prev = 0.0
    dt = math.nan
    ri = 0
    si = 0
    pf = pf0
    while True:
        while si < len(snaps) and snaps[si] <= t:
            res.snapshots.append((t, pf))
            si += 1
        if ri < len(targets) and t >= targets[ri]:
            observe(pf, t, dt)
            ri += 1
        if t >= sc.time.t_end:
            break
        speed = max_wave_speed(pf, g)
        dt_cfl = sc.time.cfl * dx / speed if speed > 0 else math.inf
        if not dt_cfl >= sc.time.dt_floor:
            res.blowup = BlowupReport(True, "dt_underflow", t, t_prev, t)
            break
        t_next = targets[ri] if ri < len(targets) else sc.time.t_end
        if si < len(snaps):
            t_next = min(t_next, snaps[si])
        dt = min(dt_cfl, t_next - t)
        cf, ev = step(cf, dt, sc, t)
        if cf_bg is not None:
            cf_bg, _ = step(cf_bg, dt, bg_sc, t)
        res.floor_events += ev
        res.steps += 1
        t_prev = t
        t = t_next if dt == t_next - t else t + dt
        pf, ev = conserved_to_primitive(cf, g, sc.floors)
        trigger = None
        if not np.all(np.isfinite(cf.as_array())):
            trigger = "dt_underflow"
        elif float(np.max(pf.rho)) > rho_cap:
            trigger = "density_cap"
        elif velocity_gradient_max(pf, dx) > grad_cap:
            trigger = "gradient_cap"
        if trigger is not None:
            if trigger != "dt_underflow":
                observe(pf, t, dt)
            res.blowup = BlowupReport(True, trigger, t, t_prev, t)
            break
    if res.floor_events:
        log.info("%d floor activations during run", res.floor_events)
    res.final = pf
    return res

