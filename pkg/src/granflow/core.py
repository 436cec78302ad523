"""Domain types and equation-of-state relations for 1-D granular gas dynamics.

The state law is ``p = rho * T`` with total energy density
``en = p / (gamma - 1) + rho * u**2 / 2``.  Temperature is never stored; it is
derived as ``p / rho`` whenever it is needed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields

import numpy as np

RHO_FLOOR = 1e-12
P_FLOOR = 0.0


class DomainError(ValueError):
    """Argument lies outside the domain on which an operation is defined."""


@dataclass(frozen=True)
class GasParams:
    gamma: float
    lam: float
    dim: int = 1

    def __post_init__(self):
        if not self.gamma > 1.0:
            raise ValueError(f"gamma must exceed 1, got {self.gamma}")
        if not self.lam >= 0.0:
            raise ValueError(f"cooling coefficient must be non-negative, got {self.lam}")
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError(f"dim must be a positive integer, got {self.dim}")

    @property
    def gamma_max(self) -> float:
        """Largest adiabatic index for which the virial inequalities apply."""
        return 1.0 + 2.0 / self.dim

    @property
    def virial_range(self) -> bool:
        return self.gamma <= self.gamma_max


@dataclass(frozen=True)
class Floors:
    rho: float = RHO_FLOOR
    p: float = P_FLOOR

    def __post_init__(self):
        if not self.rho > 0.0:
            raise ValueError("density floor must be positive")
        if self.p < 0.0:
            raise ValueError("pressure floor must be non-negative")


DEFAULT_FLOORS = Floors()


@dataclass(frozen=True)
class Grid1D:
    x_min: float
    x_max: float
    num_cells: int

    def __post_init__(self):
        if not self.x_min < self.x_max:
            raise ValueError("grid requires x_min < x_max")
        if int(self.num_cells) != self.num_cells or self.num_cells < 1:
            raise ValueError("num_cells must be a positive integer")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / self.num_cells

    @property
    def centers(self) -> np.ndarray:
        return self.x_min + (np.arange(self.num_cells) + 0.5) * self.dx

    @property
    def faces(self) -> np.ndarray:
        return self.x_min + np.arange(self.num_cells + 1) * self.dx


@dataclass(frozen=True)
class PrimitiveField:
    rho: np.ndarray
    u: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        for f in fields(self):
            arr = np.array(getattr(self, f.name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, f.name, arr)
        if not (self.rho.shape == self.u.shape == self.p.shape):
            raise ValueError("rho, u, p must have identical shapes")

    @property
    def T(self) -> np.ndarray:
        return self.p / self.rho

    def K(self, gamma: float) -> np.ndarray:
        return self.p * self.rho ** (-gamma)

    def __len__(self):
        return self.rho.shape[0]


@dataclass(frozen=True)
class ConservedField:
    rho: np.ndarray
    mom: np.ndarray
    en: np.ndarray

    def __post_init__(self):
        for f in fields(self):
            arr = np.array(getattr(self, f.name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, f.name, arr)
        if not (self.rho.shape == self.mom.shape == self.en.shape):
            raise ValueError("rho, mom, en must have identical shapes")

    def as_array(self) -> np.ndarray:
        return np.stack([self.rho, self.mom, self.en])

    @classmethod
    def from_array(cls, q: np.ndarray) -> "ConservedField":
        return cls(q[0], q[1], q[2])

    def __len__(self):
        return self.rho.shape[0]


@dataclass(frozen=True)
class DiagnosticRecord:
    """One time slice of the integral functionals.

    Beyond the functionals themselves the record carries the two source
    integrals and the net outward boundary fluxes of G, F, E and S, so the
    balance laws can be checked on bounded, open domains.
    """

    t: float
    M: float
    P: float
    E: float
    Ek: float
    Ei: float
    G: float
    F: float
    S: float
    Kmax: float
    rho_max: float
    dudx_max: float
    dt: float = math.nan
    # int rho^(1/2) p^(3/2) dx and int K^(3/2) rho^((gamma+3)/2) dx
    D_E: float = 0.0
    D_S: float = 0.0
    flux_G: float = 0.0
    flux_F: float = 0.0
    flux_E: float = 0.0
    flux_S: float = 0.0

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class BlowupReport:
    detected: bool = False
    trigger: str | None = None
    t_detect: float = math.nan
    t_lo: float = math.nan
    t_hi: float = math.nan

    TRIGGERS = ("dt_underflow", "density_cap", "gradient_cap", "threshold")

    def __post_init__(self):
        if self.detected:
            if self.trigger not in self.TRIGGERS:
                raise ValueError(f"unknown blow-up trigger {self.trigger!r}")
            if not self.t_lo <= self.t_hi:
                raise ValueError("blow-up interval requires t_lo <= t_hi")
            if not self.t_detect <= self.t_hi:
                raise ValueError("blow-up interval must end at or after detection")

    def to_json(self) -> dict:
        def num(v):
            return None if v is None or (isinstance(v, float) and math.isnan(v)) else v

        return {
            "detected": bool(self.detected),
            "trigger": self.trigger,
            "t_detect": num(self.t_detect),
            "t_lo": num(self.t_lo),
            "t_hi": num(self.t_hi),
        }

    @classmethod
    def from_json(cls, d: dict) -> "BlowupReport":
        def num(v):
            return math.nan if v is None else float(v)

        return cls(bool(d["detected"]), d.get("trigger"), num(d.get("t_detect")),
                   num(d.get("t_lo")), num(d.get("t_hi")))


def primitive_to_conserved(pf: PrimitiveField, g: GasParams) -> ConservedField:
    mom = pf.rho * pf.u
    en = pf.p / (g.gamma - 1.0) + 0.5 * pf.rho * pf.u**2
    return ConservedField(pf.rho, mom, en)


def conserved_to_primitive(cf: ConservedField, g: GasParams,
                           floors: Floors = DEFAULT_FLOORS) -> tuple[PrimitiveField, int]:
    """Recover primitives, clamping density and pressure at their floors.

    Returns the field together with the number of floor activations.
    """
    rho_raw = cf.rho
    rho = np.maximum(rho_raw, floors.rho)
    u = cf.mom / rho
    p_raw = (g.gamma - 1.0) * (cf.en - cf.mom**2 / (2.0 * rho))
    p = np.maximum(p_raw, floors.p)
    events = int(np.count_nonzero(rho_raw < floors.rho) + np.count_nonzero(p_raw < floors.p))
    return PrimitiveField(rho, u, p), events


def entropy_K(pf: PrimitiveField, g: GasParams) -> np.ndarray:
    return pf.p * pf.rho ** (-g.gamma)


def sound_speed(rho, p, gamma: float):
    return np.sqrt(gamma * np.maximum(p, 0.0) / rho)
