"""Scenario description and JSON parsing.

A scenario file is one JSON document::

    {
      "name": "haff",
      "gas": {"gamma": 1.6666666666666667, "lambda": 1.0, "dim": 1},
      "grid": {"x_min": -1.0, "x_max": 1.0, "num_cells": 100},
      "initial": {"type": "homogeneous", "rho0": 1.0, "u0": 0.0, "T0": 1.0},
      "boundary": "periodic",
      "time": {"t_end": 10.0, "cfl": 0.45, "dt_floor": 1e-12},
      "output": {"record_interval": 0.1, "snapshot_times": [5.0]}
    }

Optional sections and their defaults:

``floors``
    ``rho`` (1e-12), ``p`` (0.0).
``blowup``
    ``density_factor`` (1e6, times the initial maximum density),
    ``gradient_cap`` (``1e6 / dx``), ``gradient_factor`` (unset; when given
    the cap becomes this factor times the initial maximum of ``|du/dx|``,
    a level a shock-capturing scheme can actually reach), ``expected``
    (false; an unexpected blow-up makes ``run`` exit with status 3).
``checks``
    ``identity_tolerance`` (0.05, relative residual of the balance laws),
    ``inequality_rtol`` (1e-9), ``support_epsilon`` (1e-6, relative deviation
    marking perturbed cells), ``entropy_floor`` (0.0, lower bound for S in
    momentum-carrying runs), ``allow_gamma_outside`` (false).

Initial data types:

``homogeneous``
    ``rho0``, ``u0`` (0), ``T0``.
``steady_perturbed``
    ``k``, ``c2``, ``x_plus`` (> 0) and either ``z_plus`` (profile value at
    ``x_plus``) or ``c3``; ``bump`` with ``radius``, ``center`` (0),
    ``amp_rho``, ``amp_u``, ``amp_p`` (all 0).
``automodel``
    ``c1``, ``c2``, ``a``, ``xi0`` (branch start) and either ``z0`` or ``c3``.
``table``
    ``path`` to a CSV file with header ``x,rho,u,p`` (relative paths resolve
    against the scenario file), one row per cell.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import Floors, GasParams, Grid1D
from .exact import SteadyParams, profile_xi_of_z

log = logging.getLogger(__name__)

BOUNDARIES = ("periodic", "outflow", "exact_background")


class ScenarioError(ValueError):
    """Scenario file failed to parse or validate."""


@dataclass(frozen=True)
class Homogeneous:
    rho0: float
    u0: float
    T0: float


@dataclass(frozen=True)
class BumpSpec:
    radius: float
    center: float = 0.0
    amp_rho: float = 0.0
    amp_u: float = 0.0
    amp_p: float = 0.0

    def shape(self, x):
        """C1 polynomial bump ``(1 - r^2)^2`` supported on ``|r| < 1``."""
        r = (np.asarray(x, dtype=float) - self.center) / self.radius
        return np.where(np.abs(r) < 1.0, (1.0 - r * r) ** 2, 0.0)


@dataclass(frozen=True)
class SteadyPerturbed:
    steady: SteadyParams
    bump: BumpSpec


@dataclass(frozen=True)
class Automodel:
    steady: SteadyParams


@dataclass(frozen=True)
class Table:
    path: str


@dataclass(frozen=True)
class TimeConfig:
    t_end: float
    cfl: float = 0.45
    dt_floor: float = 1e-12


@dataclass(frozen=True)
class OutputConfig:
    record_interval: float
    snapshot_times: tuple = ()
    directory: str | None = None


@dataclass(frozen=True)
class BlowupConfig:
    density_factor: float = 1e6
    gradient_cap: float | None = None
    expected: bool = False
    gradient_factor: float | None = None


@dataclass(frozen=True)
class CheckConfig:
    identity_tolerance: float = 0.05
    inequality_rtol: float = 1e-9
    support_epsilon: float = 1e-6
    entropy_floor: float = 0.0
    allow_gamma_outside: bool = False


@dataclass(frozen=True)
class Scenario:
    gas: GasParams
    grid: Grid1D
    initial: object
    boundary: str
    time: TimeConfig
    output: OutputConfig
    floors: Floors = field(default_factory=Floors)
    blowup: BlowupConfig = field(default_factory=BlowupConfig)
    checks: CheckConfig = field(default_factory=CheckConfig)
    name: str = "scenario"

    def __post_init__(self):
        if self.boundary not in BOUNDARIES:
            raise ValueError(f"boundary must be one of {BOUNDARIES}")
        if not 0 < self.time.cfl < 1:
            raise ValueError("cfl number must lie in (0, 1)")
        if not self.time.t_end > 0:
            raise ValueError("t_end must be positive")
        if not self.time.dt_floor > 0:
            raise ValueError("dt_floor must be positive")
        if not self.output.record_interval > 0:
            raise ValueError("record_interval must be positive")
        if self.gas.dim != 1:
            raise ValueError("the finite-volume solver is planar; dim must be 1")
        if not self.blowup.density_factor > 0:
            raise ValueError("density_factor must be positive")
        for key in ("gradient_cap", "gradient_factor"):
            v = getattr(self.blowup, key)
            if v is not None and not v > 0:
                raise ValueError(f"{key} must be positive")
        if isinstance(self.initial, SteadyPerturbed):
            sp, b = self.initial.steady, self.initial.bump
            if sp.a != 0:
                raise ValueError("steady_perturbed requires a = 0")
            if not sp.x_plus > 0:
                raise ValueError("steady_perturbed requires x_plus > 0")
            if not b.radius > 0:
                raise ValueError("bump radius must be positive")
            lo, hi = b.center - b.radius, b.center + b.radius
            if not (self.grid.x_min < lo and hi < self.grid.x_max):
                raise ValueError("bump support must lie strictly inside the domain")
            if not (lo <= -sp.x_plus and sp.x_plus <= hi):
                raise ValueError("bump support must cover the core [-x_plus, x_plus]")
        if self.boundary == "exact_background" and not isinstance(
                self.initial, (SteadyPerturbed, Automodel)):
            raise ValueError("exact_background boundaries need a steady or automodel background")

    @property
    def gradient_cap(self) -> float:
        """Absolute velocity-gradient cap; ``gradient_factor`` is applied by the solver."""
        if self.blowup.gradient_cap is not None:
            return self.blowup.gradient_cap
        return 1e6 / self.grid.dx


def _line_of(text: str, key: str) -> int | None:
    needle = f'"{key}"'
    for i, line in enumerate(text.splitlines(), 1):
        if needle in line:
            return i
    return None


def _num(d, key, default=None, *, required=False):
    if key not in d:
        if required:
            raise KeyError(key)
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise TypeError(key)
    return float(v)


def _steady_from(d, g, *, flux_key, start_key, value_key, a):
    c1 = _num(d, flux_key, required=True)
    c2 = _num(d, "c2", required=True)
    if not c2 - a * c1 > 0:
        raise ValueError(f"c2 - a*c1 must be positive (positivity of rho*p), "
                         f"got c2 - a*c1 = {c2 - a * c1}")
    start = _num(d, start_key, required=True)
    if value_key in d:
        return SteadyParams.through(c1, c2, g, start, _num(d, value_key), a=a)
    sp = SteadyParams(c1, c2, a, _num(d, "c3", 0.0), start)
    # the branch must already exist at its start point
    if c1 > 0 and start < profile_xi_of_z(sp.z_star(g), sp, g):
        raise ValueError(f"{start_key}={start} precedes the start of the monotone branch")
    return sp


def _initial_from(d, g, base: Path):
    kind = d.get("type")
    if kind == "homogeneous":
        return Homogeneous(_num(d, "rho0", required=True), _num(d, "u0", 0.0),
                           _num(d, "T0", required=True))
    if kind == "steady_perturbed":
        a = _num(d, "a", 0.0)
        sp = _steady_from(d, g, flux_key="k", start_key="x_plus", value_key="z_plus", a=a)
        b = d.get("bump", {})
        bump = BumpSpec(_num(b, "radius", required=True), _num(b, "center", 0.0),
                        _num(b, "amp_rho", 0.0), _num(b, "amp_u", 0.0), _num(b, "amp_p", 0.0))
        return SteadyPerturbed(sp, bump)
    if kind == "automodel":
        a = _num(d, "a", required=True)
        if a == 0:
            raise ValueError("automodel requires a nonzero wave speed a")
        return Automodel(_steady_from(d, g, flux_key="c1", start_key="xi0", value_key="z0", a=a))
    if kind == "table":
        path = Path(d["path"])
        if not path.is_absolute():
            path = base / path
        return Table(str(path))
    raise ValueError(f"unknown initial type {kind!r}")


def scenario_from_dict(cfg: dict, base: Path = Path("."), text: str = "") -> Scenario:
    """Build and validate a scenario; errors carry the offending key's line when known."""
    current = "gas"
    try:
        gd = cfg["gas"]
        gamma, lam = _num(gd, "gamma", required=True), _num(gd, "lambda", required=True)
        current = "gamma" if not gamma > 1 else "lambda" if not lam >= 0 else "dim"
        g = GasParams(gamma, lam, int(gd.get("dim", 1)))
        chk = cfg.get("checks", {})
        checks = CheckConfig(
            identity_tolerance=_num(chk, "identity_tolerance", 0.05),
            inequality_rtol=_num(chk, "inequality_rtol", 1e-9),
            support_epsilon=_num(chk, "support_epsilon", 1e-6),
            entropy_floor=_num(chk, "entropy_floor", 0.0),
            allow_gamma_outside=bool(chk.get("allow_gamma_outside", False)),
        )
        if not g.virial_range:
            msg = (f"gamma={g.gamma} lies outside (1, {g.gamma_max}] where the "
                   f"virial inequality checks apply")
            if not checks.allow_gamma_outside:
                current = "gamma"
                raise ValueError(msg + "; set checks.allow_gamma_outside to override")
            log.warning(msg)
        current = "grid"
        gr = cfg["grid"]
        grid = Grid1D(_num(gr, "x_min", required=True), _num(gr, "x_max", required=True),
                      int(gr["num_cells"]))
        current = "initial"
        initial = _initial_from(cfg["initial"], g, base)
        current = "time"
        tm = cfg["time"]
        time = TimeConfig(_num(tm, "t_end", required=True), _num(tm, "cfl", 0.45),
                          _num(tm, "dt_floor", 1e-12))
        current = "output"
        out = cfg.get("output", {})
        output = OutputConfig(_num(out, "record_interval", time.t_end / 100.0),
                              tuple(float(v) for v in out.get("snapshot_times", ())),
                              out.get("directory"))
        current = "floors"
        fl = cfg.get("floors", {})
        floors = Floors(_num(fl, "rho", 1e-12), _num(fl, "p", 0.0))
        current = "blowup"
        bl = cfg.get("blowup", {})
        blowup = BlowupConfig(_num(bl, "density_factor", 1e6), _num(bl, "gradient_cap"),
                              bool(bl.get("expected", False)), _num(bl, "gradient_factor"))
        current = "boundary"
        return Scenario(g, grid, initial, cfg.get("boundary", "outflow"), time, output,
                        floors, blowup, checks, str(cfg.get("name", "scenario")))
    except KeyError as exc:
        key = exc.args[0]
        raise ScenarioError(_where(text, key) + f"missing required key {key!r}") from None
    except TypeError as exc:
        key = exc.args[0]
        raise ScenarioError(_where(text, key) + f"key {key!r} must be a number") from None
    except ValueError as exc:
        raise ScenarioError(_where(text, current) + str(exc)) from None


def _where(text, key):
    line = _line_of(text, key) if text else None
    return f"line {line}: " if line else ""


def parse_scenario(path) -> Scenario:
    path = Path(path)
    text = path.read_text()
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: line {exc.lineno} col {exc.colno}: {exc.msg}") from None
    if not isinstance(cfg, dict):
        raise ScenarioError(f"{path}: top level must be a JSON object")
    try:
        return scenario_from_dict(cfg, path.parent, text)
    except ScenarioError as exc:
        raise ScenarioError(f"{path}: {exc}") from None


def scenario_hash(path) -> str:
    """SHA-256 of the canonicalized scenario document."""
    cfg = json.loads(Path(path).read_text())
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def record_times(t_end: float, interval: float) -> list[float]:
    n = t_end / interval
    k = round(n)
    if math.isclose(n, k, rel_tol=1e-9, abs_tol=1e-12):
        return [i * interval for i in range(k)] + [t_end]
    return [i * interval for i in range(int(math.floor(n)) + 1)] + [t_end]
