"""Interface fluxes for two- and three-phase immiscible flow.

Four scheme families are provided through :class:`SchemeConfig`:

* ``ppu``      - standard formulation, phase-potential upwinding throughout.
* ``ppu-hu``   - total-velocity formulation, PPU flow mobilities, hybrid
                 transport upwinding (viscous / gravity / capillary split).
* ``wahu-tv``  - total-velocity formulation, smooth arctan-weighted flow
                 mobilities, hybrid transport upwinding.
* ``wahu-tm``  - same as wahu-tv but built on mass mobilities rho*lambda and
                 a total mass flux.

Sign conventions: differences are taken as (side i) - (side j), a positive
flux runs from i to j, and every tie of the form "difference >= 0" resolves
to side i.  All quantities are batched over faces and carried as duals so
flux derivative blocks are exact.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import ad
from .ad import Dual
from .fluid import interface_density

__all__ = [
    "SchemeConfig",
    "FaceState",
    "FaceFlux",
    "SCHEME_LABELS",
    "wa_weights",
    "wa_monotonicity_term",
    "gravity_upwind_sign",
    "capillary_upwind_sign",
    "compute_face_flux",
]

SCHEME_LABELS = ("ppu", "ppu-hu", "wahu-tv", "wahu-tm")


@dataclass(frozen=True)
class SchemeConfig:
    """Discretization choice for the interface flux."""

    formulation: str  # standard | total_velocity | total_mass
    flow: str  # ppu | wa
    transport: str  # ppu | hu
    alpha: float = 1.0
    eps_s: float = 1e-10  # interface-density regularization
    eps_mob: float = 1e-12  # total-(mass-)mobility denominator guard
    beta_floor: float = 1.0  # Pa, weighting normalizer floor
    label: str = ""

    def __post_init__(self):
        if self.formulation not in ("standard", "total_velocity", "total_mass"):
            raise ValueError(f"unknown formulation {self.formulation!r}")
        if self.flow not in ("ppu", "wa") or self.transport not in ("ppu", "hu"):
            raise ValueError("flow must be ppu|wa and transport ppu|hu")
        if self.formulation == "standard" and (self.flow != "ppu" or self.transport != "ppu"):
            raise ValueError("the standard formulation implies PPU flow and transport")
        if self.flow == "wa" and self.formulation == "standard":
            raise ValueError("smooth weighting requires a fractional-flow formulation")
        if not self.label:
            object.__setattr__(self, "label", f"{self.formulation}/{self.flow}/{self.transport}")

    @classmethod
    def from_label(cls, label: str, alpha: float = 1.0) -> "SchemeConfig":
        table = {
            "ppu": ("standard", "ppu", "ppu"),
            "ppu-hu": ("total_velocity", "ppu", "hu"),
            "wahu-tv": ("total_velocity", "wa", "hu"),
            "wahu-tm": ("total_mass", "wa", "hu"),
        }
        if label not in table:
            raise ValueError(f"unknown scheme {label!r}; valid labels: {', '.join(SCHEME_LABELS)}")
        f, fl, tr = table[label]
        return cls(f, fl, tr, alpha=alpha, label=label)


@dataclass
class FaceState:
    """Per-side fluid state over a batch of faces.

    Side lists are indexed [phase]; every entry is a Dual batched over the
    faces.  ``g_ref`` is the signed per-face gravity normalizer and ``c_ref``
    the per-phase capillary normalizer used by the smooth weighting.
    """

    p_i: Dual
    p_j: Dual
    sat_i: list[Dual]
    sat_j: list[Dual]
    rho_i: list[Dual]
    rho_j: list[Dual]
    mob_i: list[Dual]
    mob_j: list[Dual]
    pc_i: list[Dual]
    pc_j: list[Dual]
    trans: np.ndarray
    delta_z: np.ndarray
    gravity: float
    g_ref: np.ndarray
    c_ref: np.ndarray
    gammas: np.ndarray

    @property
    def n_phases(self) -> int:
        return len(self.sat_i)

    def swapped(self) -> "FaceState":
        """The same faces seen from the other side (for antisymmetry tests)."""
        return FaceState(
            self.p_j, self.p_i, self.sat_j, self.sat_i, self.rho_j, self.rho_i,
            self.mob_j, self.mob_i, self.pc_j, self.pc_i,
            self.trans, -self.delta_z, self.gravity, -self.g_ref,
            self.c_ref, self.gammas,
        )


@dataclass
class FaceFlux:
    """Flux result per face: phase fluxes, total, and component mass fluxes.

    ``phase`` holds volumetric phase fluxes for the standard and
    total-velocity formulations and mass fluxes for the total-mass one;
    ``total`` is the matching u_t or f_t.  ``component`` is always the
    per-component mass flux entering the balance equations.
    """

    formulation: str
    phase: list[Dual]
    total: Dual
    component: list[Dual]
    dphi: list[Dual]
    beta: list[Dual] | None = None
    omega_g: list[np.ndarray] | None = None
    omega_c: list[np.ndarray] | None = None
    terms: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# building blocks
# ---------------------------------------------------------------------------
def potential_pieces(face: FaceState):
    """Interface densities, gravity terms, capillary jumps and potentials."""
    rho_bar = [
        interface_density(face.sat_i[l], face.sat_j[l], face.rho_i[l], face.rho_j[l])
        for l in range(face.n_phases)
    ]
    g_l = [r * (face.gravity * face.delta_z) for r in rho_bar]
    dpc = [face.pc_i[l] - face.pc_j[l] for l in range(face.n_phases)]
    dp = face.p_i - face.p_j
    dphi = [dp - dpc[l] - g_l[l] for l in range(face.n_phases)]
    return rho_bar, g_l, dpc, dphi


def _pick(mask, a_i, a_j):
    return ad.where(mask, a_i, a_j)


def wa_weights(dphi: Dual, gamma: float, g_ref, c_ref: float, floor: float):
    """Arctan side weights (w_i, w_j); w_i + w_j == 1 by construction.

    The potential difference is normalized by |g_ref| + |c_ref| with a floor
    for faces where both references vanish.  gamma == 0 yields the arithmetic
    average; gamma -> infinity approaches the single-point pick.
    """
    denom = np.maximum(np.abs(np.asarray(g_ref, dtype=float)) + abs(c_ref), floor)
    t = ad.arctan(dphi * (gamma / denom)) * (1.0 / np.pi)
    return 0.5 + t, 0.5 - t


def wa_monotonicity_term(dphi, gamma: float, g_ref, c_ref: float, floor: float = 1.0):
    """P = beta + (d beta / d dp) * dphi, the bracketed monotonicity factor.

    The total velocity is non-decreasing in each phase-pressure difference
    exactly when this term stays inside [0, 1], which holds for gamma >= 0.
    """
    denom = np.maximum(np.abs(np.asarray(g_ref, dtype=float)) + abs(c_ref), floor)
    x = (gamma / denom) * np.asarray(dphi, dtype=float)
    with np.errstate(over="ignore"):  # x*x -> inf is benign: x/inf -> 0
        return 0.5 + np.arctan(x) / np.pi + x / (np.pi * (1.0 + x * x))


def gravity_upwind_sign(mob_i, mob_j, g_vals):
    """Per-phase gravity upwinding balance; >= 0 selects side i.

    Competing-phase mobilities are taken from side i where the competitor is
    heavier (pulls phase ell up out of cell j... seen from the difference
    convention) and from side j where it is lighter.
    """
    n = len(g_vals)
    out = []
    for l in range(n):
        w = np.zeros_like(g_vals[l])
        for m in range(n):
            if m == l:
                continue
            lam = np.where(g_vals[m] < g_vals[l], mob_i[m].val, mob_j[m].val)
            w = w + lam * (g_vals[m] - g_vals[l])
        out.append(w)
    return out


def capillary_upwind_sign(mob_i, mob_j, dpc_vals):
    """Same balance as gravity upwinding with capillary jumps as the force."""
    return gravity_upwind_sign(mob_i, mob_j, dpc_vals)


def _flow_weighted(face: FaceState, scheme: SchemeConfig, base_i, base_j, dphi):
    """Flow mobilities: PPU pick or smooth blend, plus optional weights."""
    n = face.n_phases
    if scheme.flow == "ppu":
        return [_pick(dphi[l].val >= 0.0, base_i[l], base_j[l]) for l in range(n)], None
    flow = []
    betas = []
    for l in range(n):
        w_i, w_j = wa_weights(
            dphi[l], face.gammas[l], face.g_ref, face.c_ref[l], scheme.beta_floor
        )
        flow.append(w_i * base_i[l] + w_j * base_j[l])
        betas.append(w_i)
    return flow, betas


def _fractional_terms(face, scheme, base_i, base_j, dphi, g_vals, dpc_vals, total):
    """Viscous/gravity/capillary split of the per-phase flux.

    Returns (V, G, C) term lists such that phase flux = V + G + C and the
    terms sum to the total (V) plus exactly antisymmetric exchanges (G, C).
    """
    n = face.n_phases
    T = face.trans
    if scheme.transport == "ppu":
        up = [dphi[l].val >= 0.0 for l in range(n)]
        mob_v = mob_g = mob_c = [_pick(up[l], base_i[l], base_j[l]) for l in range(n)]
        omega_g = omega_c = None
    else:
        co = total.val >= 0.0
        mob_v = [_pick(co, base_i[l], base_j[l]) for l in range(n)]
        omega_g = gravity_upwind_sign(base_i, base_j, [g.val for g in g_vals])
        mob_g = [_pick(omega_g[l] >= 0.0, base_i[l], base_j[l]) for l in range(n)]
        omega_c = capillary_upwind_sign(base_i, base_j, [d.val for d in dpc_vals])
        mob_c = [_pick(omega_c[l] >= 0.0, base_i[l], base_j[l]) for l in range(n)]

    def totaled(mobs):
        tot = mobs[0]
        for m in mobs[1:]:
            tot = tot + m
        return tot + scheme.eps_mob

    tot_v, tot_g, tot_c = totaled(mob_v), totaled(mob_g), totaled(mob_c)
    V = [(mob_v[l] / tot_v) * total for l in range(n)]
    G = []
    C = []
    for l in range(n):
        g_sum = ad.constant(np.zeros_like(face.trans), total.ndir)
        c_sum = ad.constant(np.zeros_like(face.trans), total.ndir)
        for m in range(n):
            if m == l:
                continue
            g_sum = g_sum + (mob_g[l] * mob_g[m] / tot_g) * (g_vals[m] - g_vals[l])
            c_sum = c_sum + (mob_c[l] * mob_c[m] / tot_c) * (dpc_vals[m] - dpc_vals[l])
        G.append(g_sum * T)
        C.append(c_sum * T)
    return V, G, C, omega_g, omega_c


# ---------------------------------------------------------------------------
# full flux kernels
# ---------------------------------------------------------------------------
def compute_face_flux(face: FaceState, scheme: SchemeConfig) -> FaceFlux:
    """Evaluate the interface flux of the chosen scheme on a face batch."""
    n = face.n_phases
    T = face.trans
    rho_bar, g_vals, dpc_vals, dphi = potential_pieces(face)

    if scheme.formulation == "standard":
        up = [dphi[l].val >= 0.0 for l in range(n)]
        mob = [_pick(up[l], face.mob_i[l], face.mob_j[l]) for l in range(n)]
        rho = [_pick(up[l], face.rho_i[l], face.rho_j[l]) for l in range(n)]
        phase = [mob[l] * dphi[l] * T for l in range(n)]
        comp = [rho[l] * phase[l] for l in range(n)]
        total = phase[0]
        for u in phase[1:]:
            total = total + u
        return FaceFlux("standard", phase, total, comp, dphi)

    mass_based = scheme.formulation == "total_mass"
    if mass_based:
        base_i = [face.rho_i[l] * face.mob_i[l] for l in range(n)]
        base_j = [face.rho_j[l] * face.mob_j[l] for l in range(n)]
    else:
        base_i, base_j = face.mob_i, face.mob_j

    flow, betas = _flow_weighted(face, scheme, base_i, base_j, dphi)
    total = flow[0] * dphi[0]
    for l in range(1, n):
        total = total + flow[l] * dphi[l]
    total = total * T

    V, G, C, omega_g, omega_c = _fractional_terms(
        face, scheme, base_i, base_j, dphi, g_vals, dpc_vals, total
    )
    phase = [V[l] + G[l] + C[l] for l in range(n)]

    if mass_based:
        comp = list(phase)  # single-phase components carry their own mass
    elif scheme.transport == "ppu":
        rho = [_pick(dphi[l].val >= 0.0, face.rho_i[l], face.rho_j[l]) for l in range(n)]
        comp = [rho[l] * phase[l] for l in range(n)]
    else:
        # density follows each term's own direction, so it switches only
        # where that term vanishes and the component flux stays continuous
        comp = []
        for l in range(n):
            r_v = _pick(V[l].val >= 0.0, face.rho_i[l], face.rho_j[l])
            r_g = _pick(G[l].val >= 0.0, face.rho_i[l], face.rho_j[l])
            r_c = _pick(C[l].val >= 0.0, face.rho_i[l], face.rho_j[l])
            comp.append(r_v * V[l] + r_g * G[l] + r_c * C[l])

    return FaceFlux(
        scheme.formulation, phase, total, comp, dphi,
        beta=betas, omega_g=omega_g, omega_c=omega_c,
        terms={"V": V, "G": G, "C": C},
    )
