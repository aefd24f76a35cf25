"""Fluid property models: relative permeability, capillarity, phase systems.

Conventions used throughout the package:

* Phases are kept in a fixed list whose LAST entry is the pressure reference
  phase.  Primary saturation unknowns cover every phase except the reference
  one, whose saturation is implied by the unit-sum constraint.
* Each phase has a wettability rank (0 = most wetting).  The reference phase
  is the least wetting one in two-phase systems and the intermediate one in
  three-phase systems.
* Capillarity is expressed per phase against the reference pressure,
  p_cap(S) = p_ref_phase - p_phase evaluated on the phase's own saturation.
  A phase more wetting than the reference uses +scale*table(S); a phase less
  wetting uses -scale*table(1 - S).

The built-in capillary table ``appendixB`` is interpolated with a natural
cubic spline that continues linearly outside the tabulated range, keeping
the curve twice continuously differentiable everywhere.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from . import ad
from .ad import Dual

__all__ = [
    "RelPermModel",
    "relperm_eval",
    "gamma_coefficient",
    "CapillarySpline",
    "build_capillary_spline",
    "capillary_generator",
    "load_capillary_table",
    "BUILTIN_CAPILLARY_TABLES",
    "PhaseSpec",
    "FluidSystem",
    "interface_density",
    "gravity_reference",
]

GRAVITY = 9.81  # m/s^2, default

# Built-in wetting-saturation -> capillary-pressure table used by the
# tilted-box and barrier cases.  Values in Pa at unit scale.
_APPENDIX_B = np.array(
    [
        (0.05, 1.057e5),
        (0.15, 8.034e4),
        (0.25, 7.071e4),
        (0.35, 6.500e4),
        (0.45, 6.104e4),
        (0.55, 5.806e4),
        (0.65, 5.568e4),
        (0.75, 5.372e4),
        (0.85, 5.207e4),
        (0.95, 5.064e4),
    ]
)

BUILTIN_CAPILLARY_TABLES = {"appendixB": _APPENDIX_B}


# ---------------------------------------------------------------------------
# relative permeability
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class RelPermModel:
    """Monomial relative permeability k_r(S) = kr0 * S**n."""

    kr0: float
    n: float

    def __post_init__(self):
        if not 0.0 < self.kr0 <= 1.0:
            raise ValueError("endpoint kr0 must lie in (0, 1]")
        if self.n < 1.0:
            raise ValueError("exponent must be >= 1")

    def __call__(self, s):
        """Evaluate on floats, arrays or duals (saturation in [0, 1])."""
        return self.kr0 * s**self.n if isinstance(s, Dual) else self.kr0 * np.asarray(s) ** self.n


def relperm_eval(model: RelPermModel, s) -> tuple[np.ndarray, np.ndarray]:
    """Return (k_r, dk_r/dS); raises if saturation leaves [0, 1]."""
    s = np.asarray(s, dtype=float)
    if np.any((s < 0.0) | (s > 1.0)):
        raise ValueError("saturation outside [0, 1]")
    kr = model.kr0 * s**model.n
    dkr = model.kr0 * model.n * s ** (model.n - 1.0)
    return kr, dkr


def gamma_coefficient(model: RelPermModel, alpha: float = 1.0) -> float:
    """Sharpness coefficient (alpha / kr0) * max |k_r''| for the weighting.

    For monomials with n >= 2 the curvature peaks at S = 1 with value
    kr0*n*(n-1); for n == 1 the curvature vanishes.  Exponents strictly
    between 1 and 2 have unbounded curvature near S = 0 and are rejected.
    """
    if alpha < 0.0:
        raise ValueError("alpha must be non-negative")
    if model.n == 1.0:
        return 0.0
    if model.n < 2.0:
        raise ValueError("curvature is unbounded for exponents in (1, 2)")
    return alpha * model.n * (model.n - 1.0)


# ---------------------------------------------------------------------------
# capillary pressure
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class CapillarySpline:
    """Natural cubic spline over (S_wet, p_cap) knots, linear outside.

    Natural boundary conditions leave zero curvature at the end knots, so
    continuing linearly with the end slopes keeps the curve twice
    continuously differentiable on the whole axis -- saturations at the
    bounds never sit on a derivative jump.  ``scale`` multiplies the
    tabulated pressures.
    """

    knots_s: np.ndarray
    knots_p: np.ndarray
    coeffs: np.ndarray  # (4, n-1), highest power first, per interval
    scale: float
    end_slopes: tuple[float, float] = (0.0, 0.0)

    def __call__(self, s):
        if isinstance(s, Dual):
            return self._eval_dual(s)
        s = np.atleast_1d(np.asarray(s, dtype=float))
        out = self._eval_dual(ad.constant(s, 0))
        return out.val

    def _eval_dual(self, s: Dual) -> Dual:
        x = self.knots_s
        idx = np.clip(np.searchsorted(x, s.val, side="right") - 1, 0, len(x) - 2)
        t = s - x[idx]
        c = self.coeffs
        val = ad.constant(c[0, idx], s.ndir)
        for k in range(1, 4):
            val = val * t + c[k, idx]
        below = s.val < x[0]
        above = s.val > x[-1]
        val = ad.where(below, self.knots_p[0] + self.end_slopes[0] * (s - x[0]), val)
        val = ad.where(above, self.knots_p[-1] + self.end_slopes[1] * (s - x[-1]), val)
        return val


def build_capillary_spline(table: np.ndarray, scale: float = 1.0) -> CapillarySpline:
    """Fit a natural cubic spline through scale-multiplied table rows."""
    table = np.asarray(table, dtype=float)
    if table.ndim != 2 or table.shape[1] != 2 or table.shape[0] < 3:
        raise ValueError("capillary table must be (n>=3, 2) shaped")
    s = table[:, 0]
    if np.any(np.diff(s) <= 0):
        raise ValueError("capillary table saturations must increase strictly")
    p = scale * table[:, 1]
    if scale == 0.0:
        return CapillarySpline(s, p, np.zeros((4, len(s) - 1)), scale)
    fit = CubicSpline(s, p, bc_type="natural")
    dfit = fit.derivative()
    slopes = (float(dfit(s[0])), float(dfit(s[-1])))
    return CapillarySpline(s, p, fit.c, scale, slopes)


def capillary_generator(s_wet, p_entry: float = 5.0e4, exponent: float = 4.0):
    """Closed-form capillary curve p_entry * (1/S_wet)**exponent.

    Provided for generating illustrative tables; the shipped ``appendixB``
    table is interpolated as printed and is not reproduced by this function.
    """
    s_wet = np.asarray(s_wet, dtype=float)
    if np.any(s_wet <= 0.0):
        raise ValueError("wetting saturation must be positive")
    return p_entry * (1.0 / s_wet) ** exponent


def load_capillary_table(path: str) -> np.ndarray:
    """Read a two-column (S_wet, p_cap) text table."""
    table = np.loadtxt(path)
    if table.ndim != 2 or table.shape[1] != 2:
        raise ValueError("expected two columns: S_wet p_cap")
    return table


# ---------------------------------------------------------------------------
# phase systems
# ---------------------------------------------------------------------------
@dataclass(frozen=True)
class PhaseSpec:
    """One fluid phase: viscosity, density model and relperm curve."""

    name: str
    viscosity: float
    density: float  # reference density, kg/m^3
    relperm: RelPermModel
    wettability_rank: int  # 0 = most wetting
    surface_density: float | None = None
    compressibility: float = 0.0  # 1/Pa, affine density model
    ref_pressure: float = 0.0

    def __post_init__(self):
        if self.viscosity <= 0 or self.density <= 0:
            raise ValueError("viscosity and density must be positive")

    def rho(self, p):
        """Density at pressure p (floats or duals)."""
        if self.compressibility == 0.0:
            if isinstance(p, Dual):
                return ad.constant(np.full(p.val.shape, self.density), p.ndir)
            return np.full(np.shape(np.atleast_1d(p)), self.density)
        return self.density * (1.0 + self.compressibility * (p - self.ref_pressure))

    @property
    def rho_surface(self) -> float:
        return self.density if self.surface_density is None else self.surface_density


@dataclass(frozen=True)
class FluidSystem:
    """Ordered phase set with the reference phase last.

    ``capillary`` maps a non-reference phase index to its spline; the sign
    convention (see module docstring) is applied in :meth:`pcap`.
    """

    phases: tuple[PhaseSpec, ...]
    capillary: dict[int, CapillarySpline] = field(default_factory=dict)
    alpha: float = 1.0

    def __post_init__(self):
        n = len(self.phases)
        if n not in (2, 3):
            raise ValueError("two or three phases supported")
        ranks = sorted(p.wettability_rank for p in self.phases)
        if ranks != list(range(n)):
            raise ValueError("wettability ranks must be a permutation of 0..n-1")
        ref_rank = self.phases[-1].wettability_rank
        want = n - 1 if n == 2 else 1
        if ref_rank != want:
            raise ValueError("reference (last) phase has the wrong wettability rank")
        if len(self.phases) - 1 in self.capillary:
            raise ValueError("reference phase cannot carry a capillary curve")

    @property
    def n_phases(self) -> int:
        return len(self.phases)

    @property
    def reference_index(self) -> int:
        return len(self.phases) - 1

    def pcap(self, ell: int, s):
        """p - p_ell on the phase's own saturation; zero for the reference."""
        spline = self.capillary.get(ell)
        if spline is None:
            if isinstance(s, Dual):
                return ad.constant(np.zeros(s.val.shape), s.ndir)
            return np.zeros(np.shape(np.atleast_1d(s)))
        ref_rank = self.phases[-1].wettability_rank
        if self.phases[ell].wettability_rank < ref_rank:
            return spline(s)
        return -spline(1.0 - s)

    def capillary_reference(self, ell: int) -> float:
        """Weighting normalizer c_ref = p_cap(0.8) - p_cap(0.2) for phase ell."""
        if ell not in self.capillary:
            return 0.0
        hi = self.pcap(ell, np.array([0.8]))
        lo = self.pcap(ell, np.array([0.2]))
        return float(hi[0] - lo[0])

    def gammas(self) -> np.ndarray:
        return np.array([gamma_coefficient(p.relperm, self.alpha) for p in self.phases])

    def c_refs(self) -> np.ndarray:
        return np.array([self.capillary_reference(ell) for ell in range(self.n_phases)])

    def max_surface_density(self) -> float:
        return max(p.rho_surface for p in self.phases)

    def mobility(self, ell: int, s):
        return self.phases[ell].relperm(s) / self.phases[ell].viscosity


def interface_density(s_i, s_j, rho_i, rho_j, eps: float = 1e-10):
    """Saturation-weighted density at an interface.

    Regularized so that both saturations at zero degenerate to the
    arithmetic mean; works on floats, arrays and duals alike.
    """
    num = s_i * rho_i + s_j * rho_j + eps * (rho_i + rho_j)
    den = s_i + s_j + 2.0 * eps
    return num / den


def gravity_reference(max_surface_density: float, gravity: float, delta_z) -> np.ndarray:
    """Per-connection gravity normalizer rho_s,max * g * delta_z."""
    return max_surface_density * gravity * np.asarray(delta_z, dtype=float)
