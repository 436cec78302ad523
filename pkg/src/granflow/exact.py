"""Exact solution families: homogeneous cooling, traveling/steady profiles and
the separable singular solution ``u = alpha x, rho = beta0/|x|, p = s |x|``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .core import BlowupReport, DomainError, GasParams


class BracketError(ValueError):
    """Requested position lies outside the range covered by the profile branch."""


# ---------------------------------------------------------------------------
# homogeneous cooling state


def haff_temperature(t, rho0, T0, lam):
    """Temperature of the homogeneous cooling state at time ``t``.

    Solves ``dT/dt = -lam * rho0 * T**1.5`` exactly.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise DomainError("time must be non-negative")
    out = (0.5 * lam * rho0 * t + T0 ** -0.5) ** -2.0
    return out[()] if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# traveling / steady profiles


@dataclass(frozen=True)
class SteadyParams:
    """Constants of a traveling profile ``xi = x - a t``.

    ``c1`` is the relative mass flux ``rho (u - a)``, ``c2`` the constant
    ``c1 u + p``, ``c3`` the integration constant of the position formula and
    ``x_plus`` the start of the branch (the matching point for steady states).
    """

    c1: float
    c2: float
    a: float = 0.0
    c3: float = 0.0
    x_plus: float = 0.0

    def __post_init__(self):
        if self.c1 == 0:
            raise ValueError("mass-flux constant c1 must be nonzero")
        if not self.c2 - self.a * self.c1 > 0:
            raise ValueError(
                f"positivity of rho*p requires c2 - a*c1 > 0, got {self.c2 - self.a * self.c1}")

    @property
    def D(self) -> float:
        return self.c2 - self.a * self.c1

    def z_star(self, g: GasParams) -> float:
        return self.c1**2 / g.gamma

    @classmethod
    def through(cls, c1, c2, g: GasParams, xi0, z0, a=0.0) -> "SteadyParams":
        """Parameters of the branch passing through ``z(xi0) = z0``, starting at ``xi0``."""
        probe = cls(c1, c2, a, 0.0, xi0)
        c3 = xi0 - float(profile_xi_of_z(z0, probe, g))
        return cls(c1, c2, a, c3, xi0)

    def start_value(self, g: GasParams) -> float:
        """Profile value at the branch start ``x_plus``."""
        return float(profile_z_of_xi(self.x_plus, self, g))


def _xi_scalar(z, c1, D, lam, gamma, c3):
    sz = math.sqrt(z)
    return D / (c1 * lam) * ((gamma + 3.0) * math.atan(sz / c1) / c1
                             + (gamma + 1.0) * sz / (z + c1 * c1) + 2.0 / sz) + c3


def _check_z(z, sp: SteadyParams, g: GasParams):
    zs = sp.z_star(g)
    if np.any(~(z > 0)) or np.any(z > zs):
        raise DomainError(f"profile variable must lie in (0, {zs}]")


def profile_xi_of_z(z, sp: SteadyParams, g: GasParams):
    """Position at which the profile takes value ``z = rho * p``."""
    z = np.asarray(z, dtype=float)
    _check_z(z, sp, g)
    c1, lam, gm = sp.c1, g.lam, g.gamma
    sz = np.sqrt(z)
    xi = sp.D / (c1 * lam) * ((gm + 3.0) * np.arctan(sz / c1) / c1
                              + (gm + 1.0) * sz / (z + c1 * c1) + 2.0 / sz) + sp.c3
    return xi[()] if xi.ndim == 0 else xi


def profile_dxi_dz(z, sp: SteadyParams, g: GasParams):
    z = np.asarray(z, dtype=float)
    _check_z(z, sp, g)
    c1 = sp.c1
    out = -sp.D * c1 * (c1 * c1 - g.gamma * z) / (g.lam * z**1.5 * (z + c1 * c1) ** 2)
    return out[()] if out.ndim == 0 else out


def profile_dz_dxi(z, sp: SteadyParams, g: GasParams):
    """Right-hand side of the profile ODE ``z'(xi)``."""
    z = np.asarray(z, dtype=float)
    _check_z(z, sp, g)
    c1 = sp.c1
    out = -g.lam / (c1 * sp.D) * z**1.5 * (z + c1 * c1) ** 2 / (c1 * c1 - g.gamma * z)
    return out[()] if out.ndim == 0 else out


def _solve_one(xi, sp, g, w_hi, xi_hi):
    c1, D, lam, gm, c3 = sp.c1, sp.D, g.lam, g.gamma, sp.c3
    sign = 1.0 if c1 > 0 else -1.0
    # sign * (xi(w^2) - xi) is positive for small w and <= 0 at w_hi
    h = lambda w: sign * (_xi_scalar(w * w, c1, D, lam, gm, c3) - xi)
    if sign * (xi_hi - xi) > 0:
        raise BracketError(f"xi={xi} lies outside the branch (starts at {xi_hi})")
    if h(w_hi) == 0.0:
        return w_hi * w_hi
    w_lo = 0.5 * w_hi
    while h(w_lo) <= 0.0:
        w_lo *= 0.5
        if w_lo < 1e-150:
            raise BracketError(f"no bracket found for xi={xi}")
    w = brentq(h, w_lo, w_hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=500)
    return w * w


def profile_z_of_xi(xi, sp: SteadyParams, g: GasParams, z_anchor=None):
    """Invert the position formula on the monotone branch ``0 < z <= z_anchor``.

    ``z_anchor`` defaults to the branch endpoint ``c1**2 / gamma``.  The branch
    covers ``xi >= xi(z_anchor)`` for ``c1 > 0`` and ``xi <= xi(z_anchor)``
    otherwise.
    """
    zs = sp.z_star(g)
    z_anchor = zs if z_anchor is None else float(z_anchor)
    if not 0 < z_anchor <= zs:
        raise DomainError(f"anchor value must lie in (0, {zs}]")
    xi_hi = float(profile_xi_of_z(z_anchor, sp, g))
    w_hi = math.sqrt(z_anchor)
    xi = np.asarray(xi, dtype=float)
    if xi.ndim == 0:
        return _solve_one(float(xi), sp, g, w_hi, xi_hi)
    out = np.empty_like(xi)
    for idx, v in np.ndenumerate(xi):
        out[idx] = _solve_one(float(v), sp, g, w_hi, xi_hi)
    return out


def tail_coefficient(sp: SteadyParams, g: GasParams) -> float:
    """Limit of ``z(xi) * xi**2`` as ``xi -> inf`` on a ``c1 > 0`` branch."""
    return 4.0 * sp.D**2 / (sp.c1**2 * g.lam**2)


def steady_state_eval(x, sp: SteadyParams, g: GasParams):
    """Finally steady state: right branch for ``x >= x_plus``, mirrored for ``x <= -x_plus``."""
    if sp.a != 0 or sp.c1 <= 0:
        raise DomainError("steady state requires a = 0 and c1 = k > 0")
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    if np.any(ax < sp.x_plus) or np.any(ax == 0):
        raise DomainError(f"steady state is defined only for |x| >= {sp.x_plus} > 0")
    k, c2 = sp.c1, sp.c2
    z = np.asarray(profile_z_of_xi(ax, sp, g))
    rho = (z + k * k) / c2
    # p = c2 - k^2/rho, written without the cancellation in the tail
    p = z / rho
    u = k * np.sign(x) / rho
    if x.ndim == 0:
        return float(rho), float(u), float(p)
    return rho, u, p


def _check_automodel(xi, sp):
    bad = xi < sp.x_plus if sp.c1 > 0 else xi > sp.x_plus
    if np.any(bad):
        raise BracketError(f"automodel variable outside the branch starting at {sp.x_plus}")


def automodel_eval(x, t, sp: SteadyParams, g: GasParams):
    """Traveling profile at ``(x, t)``; returns ``(rho, u, p)``."""
    xi = np.asarray(x, dtype=float) - sp.a * t
    _check_automodel(xi, sp)
    z = np.asarray(profile_z_of_xi(xi, sp, g))
    rho = (z + sp.c1**2) / sp.D
    u = sp.c1 / rho + sp.a
    # p = c2 - c1 u, written without the cancellation in the tail
    p = z / rho
    if xi.ndim == 0:
        return float(rho), float(u), float(p)
    return rho, u, p


def automodel_gradients(x, t, sp: SteadyParams, g: GasParams):
    """Analytic ``d/dx`` of ``(rho, u, p)``; time derivatives are ``-a`` times these."""
    xi = np.asarray(x, dtype=float) - sp.a * t
    _check_automodel(xi, sp)
    z = np.asarray(profile_z_of_xi(xi, sp, g))
    rho = (z + sp.c1**2) / sp.D
    drho = profile_dz_dxi(z, sp, g) / sp.D
    du = -sp.c1 * drho / rho**2
    dp = -sp.c1 * du
    return drho, du, dp


def export_profile_csv(path, x, rho, u, p):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "rho", "u", "p"])
        for row in zip(x, rho, u, p):
            w.writerow([repr(float(v)) for v in row])


# ---------------------------------------------------------------------------
# separable singular solution


@dataclass(frozen=True)
class SingularState:
    alpha: float
    s: float
    beta0: float

    def __post_init__(self):
        if self.s < 0:
            raise DomainError("pressure slope s must be non-negative")
        if self.beta0 < 0:
            raise DomainError("density amplitude beta0 must be non-negative")


def singular_rhs(st: SingularState, g: GasParams):
    if st.s < 0:
        raise DomainError("pressure slope s must be non-negative")
    if st.beta0 <= 0:
        raise DomainError("beta0 must be positive")
    dalpha = -st.alpha**2 - st.s / st.beta0
    ds = -(g.gamma + 1.0) * g.dim * st.s * st.alpha - g.lam * math.sqrt(st.beta0) * st.s**1.5
    return dalpha, ds


def singular_field_residual(st: SingularState, dst, sample_xs, g: GasParams) -> float:
    """Residual of the planar momentum and pressure equations for the separable ansatz.

    Each equation's residual is divided by ``max(1, scale)`` where ``scale`` is
    the sum of magnitudes of its spatial and source terms, so the value stays
    meaningful while ``alpha`` and ``s`` diverge.  The time-derivative slot is
    excluded from the scale, keeping the residual linear in it.
    """
    xs = np.asarray(sample_xs, dtype=float)
    if np.any(xs == 0):
        raise DomainError("the singular solution is not defined at x = 0")
    dalpha, ds = dst
    a, s, b0 = st.alpha, st.s, st.beta0
    ax = np.abs(xs)
    rho = b0 / ax
    # continuity: rho_t = 0 and rho*u = b0*a*sign(x) is piecewise constant
    r_mass = np.zeros_like(xs)
    # momentum: rho (u_t + u u_x) + p_x
    m_terms = (rho * a * a * xs, s * np.sign(xs))
    r_mom = rho * dalpha * xs + m_terms[0] + m_terms[1]
    m_scale = np.abs(m_terms[0]) + np.abs(m_terms[1])
    # pressure: p_t + u p_x + gamma p u_x + lam rho^(1/2) p^(3/2)
    p_terms = (a * xs * s * np.sign(xs), g.gamma * s * ax * a,
               g.lam * np.sqrt(rho) * (s * ax) ** 1.5)
    r_p = ds * ax + p_terms[0] + p_terms[1] + p_terms[2]
    p_scale = sum(np.abs(v) for v in p_terms)
    res = np.concatenate([np.abs(r_mass),
                          np.abs(r_mom) / np.maximum(1.0, m_scale),
                          np.abs(r_p) / np.maximum(1.0, p_scale)])
    return float(res.max())


@dataclass(frozen=True)
class SingularTrajectory:
    t: np.ndarray
    alpha: np.ndarray
    s: np.ndarray
    beta0: float
    report: BlowupReport

    def state(self, i) -> SingularState:
        return SingularState(float(self.alpha[i]), float(self.s[i]), self.beta0)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "alpha", "s"])
            for row in zip(self.t, self.alpha, self.s):
                w.writerow([repr(float(v)) for v in row])


# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])


def _dp45_step(f, t, y, h, k1):
    k = [k1]
    for i in range(1, 7):
        yi = y + h * sum(a * kj for a, kj in zip(_A[i], k))
        k.append(f(t + _C[i] * h, yi))
    y5 = y + h * sum(b * kj for b, kj in zip(_B5, k))
    err = h * sum((b5 - b4) * kj for b5, b4, kj in zip(_B5, _B4, k))
    return y5, err, k[6]


def _extrapolate_zero(ts, ys):
    """Zero crossings of linear extrapolations through consecutive points."""
    out = []
    for i in range(len(ts) - 1):
        dy = ys[i + 1] - ys[i]
        if dy < 0:
            out.append(ts[i + 1] - ys[i + 1] * (ts[i + 1] - ts[i]) / dy)
    if len(out) == 2:
        # Richardson-style correction assuming the extrapolation error shrinks geometrically
        out.append(2.0 * out[1] - out[0])
    return out


def integrate_singular(st0: SingularState, g: GasParams, t_end: float,
                       blowup_threshold: float = 1e6, rtol: float = 1e-10,
                       atol: float = 1e-12, max_steps: int = 1_000_000) -> SingularTrajectory:
    """Integrate the (alpha, s) system with an adaptive Dormand-Prince pair.

    Integration stops at ``t_end`` or once the velocity rate ``|alpha|`` or the
    pressure rate ``sqrt(s / beta0)`` exceeds ``blowup_threshold``.  A step
    size collapsing below rounding level is also reported as blow-up.
    """
    if st0.beta0 <= 0:
        raise DomainError("beta0 must be positive")
    b0 = st0.beta0
    gm, n, lam = g.gamma, g.dim, g.lam
    sqb = math.sqrt(b0)

    def f(_t, y):
        a, s = y[0], max(y[1], 0.0)
        return np.array([-a * a - s / b0, -(gm + 1.0) * n * s * a - lam * sqb * s**1.5])

    def rate(y):
        return max(abs(y[0]), math.sqrt(max(y[1], 0.0) / b0))

    t = 0.0
    y = np.array([st0.alpha, st0.s], dtype=float)
    ts, ys = [t], [y.copy()]
    k1 = f(t, y)
    scale0 = atol + rtol * np.abs(y)
    d0 = np.sqrt(np.mean((y / scale0) ** 2))
    d1 = np.sqrt(np.mean((k1 / scale0) ** 2))
    h = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h = min(h, t_end)
    trigger = None
    for _ in range(max_steps):
        if t >= t_end or rate(y) > blowup_threshold:
            break
        h = min(h, t_end - t)
        if h <= 16 * np.finfo(float).eps * max(1.0, abs(t)):
            trigger = "dt_underflow"
            break
        y_new, err, k7 = _dp45_step(f, t, y, h, k1)
        sc = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        en = float(np.sqrt(np.mean((err / sc) ** 2)))
        if not np.all(np.isfinite(y_new)):
            en = math.inf
        if en <= 1.0:
            t = t + h if h < t_end - t else t_end
            y = y_new
            y[1] = max(y[1], 0.0)
            k1 = k7 if np.all(np.isfinite(k7)) else f(t, y)
            ts.append(t)
            ys.append(y.copy())
            fac = 5.0 if en == 0 else min(5.0, max(0.2, 0.9 * en ** -0.2))
        else:
            fac = 0.2 if not math.isfinite(en) else max(0.2, 0.9 * en ** -0.2)
        h *= fac
    ya = np.array(ys)
    ta = np.array(ts)
    if trigger is None and rate(y) > blowup_threshold:
        trigger = "threshold"
    if trigger is None:
        report = BlowupReport()
    else:
        tail = slice(-3, None)
        inv = [1.0 / rate(v) for v in ya[tail]]
        cands = [c for c in _extrapolate_zero(list(ta[tail]), inv) if math.isfinite(c)]
        t_hi = max([t] + cands)
        report = BlowupReport(True, trigger, float(t), float(t), float(t_hi))
    return SingularTrajectory(ta, ya[:, 0], ya[:, 1], b0, report)
