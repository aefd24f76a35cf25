"""Randomized structural checks on the interface-flux schemes.

These checks pin down properties that hold by construction and must survive
refactoring:

* exact antisymmetry -- evaluating a face from the other side negates every
  flux bit-for-bit (ties sit on measure-zero sets and are excluded by
  sampling continuous states);
* redistribution -- fractional-formulation phase fluxes sum back to the
  total flux, and total-mass components sum to the total mass flux;
* equivalence -- the standard scheme and the total-velocity formulation with
  single-point flow and transport picks produce the same phase fluxes up to
  the total-mobility guard;
* weight sanity -- blend weights stay strictly inside (0, 1) and the
  monotonicity factor of the smoothed total flux stays inside [0, 1];
* flux monotonicity -- the total (mass) flux is non-decreasing in every
  phase-pressure difference, probed by central differences;
* capillary spline -- tabulated knots are reproduced and the curve stays
  finite and smooth across the tabulated range.

The module is used by the ``huflow validate`` command and by the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import ad
from .flux import FaceState, SchemeConfig, compute_face_flux, wa_monotonicity_term
from .fluid import (
    BUILTIN_CAPILLARY_TABLES,
    FluidSystem,
    PhaseSpec,
    RelPermModel,
    build_capillary_spline,
    gravity_reference,
)

CHECK_NAMES = (
    "antisymmetry",
    "redistribution",
    "ppu_equivalence",
    "weight_bounds",
    "monotone_factor",
    "flux_monotonicity",
    "capillary_spline",
)


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    worst: float
    threshold: float
    detail: str = ""

    def line(self) -> str:
        status = "pass" if self.passed else "FAIL"
        return (f"{status}  {self.name:<20s} worst={self.worst:.3e} "
                f"threshold={self.threshold:.3e}  {self.detail}")


def sample_fluids(n_phases: int = 2, capillary: bool = True) -> FluidSystem:
    """A representative fluid system for randomized checks."""
    if n_phases == 2:
        phases = (
            PhaseSpec("water", 1.0e-3, 1000.0, RelPermModel(1.0, 2.5), 0),
            PhaseSpec("gas", 1.0e-3, 100.0, RelPermModel(0.6, 3.0), 1),
        )
        cap = {0: build_capillary_spline(BUILTIN_CAPILLARY_TABLES["appendixB"], 1.0)}
    else:
        phases = (
            PhaseSpec("water", 1.0e-3, 1500.0, RelPermModel(1.0, 2.0), 0),
            PhaseSpec("gas", 1.0e-3, 500.0, RelPermModel(1.0, 2.0), 2),
            PhaseSpec("oil", 1.0e-3, 1000.0, RelPermModel(1.0, 2.0), 1),
        )
        cap = {
            0: build_capillary_spline(BUILTIN_CAPILLARY_TABLES["appendixB"], 0.4),
            1: build_capillary_spline(BUILTIN_CAPILLARY_TABLES["appendixB"], 0.4),
        }
    return FluidSystem(phases=phases, capillary=cap if capillary else {})


def _random_saturations(rng: np.random.Generator, n: int, n_phases: int) -> np.ndarray:
    raw = rng.exponential(size=(n, n_phases))
    sats = raw / raw.sum(axis=1, keepdims=True)
    onehot = rng.random(n) < 0.05  # include fully drained / flooded cells
    which = rng.integers(0, n_phases, size=n)
    sats[onehot] = 0.0
    sats[onehot, which[onehot]] = 1.0
    return sats


def sample_face_states(rng: np.random.Generator, n: int, n_phases: int = 2,
                       capillary: bool = True, gravity: float = 9.81,
                       ) -> tuple[FaceState, FluidSystem]:
    """Random batched face states with physical magnitudes.

    A twentieth of the faces are exactly horizontal and some cells carry
    exact one-phase saturations, exercising the guard terms.
    """
    fluids = sample_fluids(n_phases, capillary)
    p_i = 1.0e7 + rng.uniform(-2e5, 2e5, n)
    p_j = 1.0e7 + rng.uniform(-2e5, 2e5, n)
    s_i = _random_saturations(rng, n, n_phases)
    s_j = _random_saturations(rng, n, n_phases)
    delta_z = rng.uniform(-3.0, 3.0, n)
    delta_z[rng.random(n) < 0.05] = 0.0
    trans = 10.0 ** rng.uniform(-14.0, -11.0, n)

    def side(p, s):
        sats, rhos, mobs, pcs = [], [], [], []
        for ell in range(n_phases):
            sats.append(ad.constant(s[:, ell], 0))
            rhos.append(fluids.phases[ell].rho(ad.constant(p, 0)))
            mobs.append(ad.constant(fluids.mobility(ell, s[:, ell]), 0))
            pcs.append(ad.constant(np.asarray(fluids.pcap(ell, s[:, ell])), 0))
        return sats, rhos, mobs, pcs

    sat_i, rho_i, mob_i, pc_i = side(p_i, s_i)
    sat_j, rho_j, mob_j, pc_j = side(p_j, s_j)
    face = FaceState(
        p_i=ad.constant(p_i, 0), p_j=ad.constant(p_j, 0),
        sat_i=sat_i, sat_j=sat_j, rho_i=rho_i, rho_j=rho_j,
        mob_i=mob_i, mob_j=mob_j, pc_i=pc_i, pc_j=pc_j,
        trans=trans, delta_z=delta_z, gravity=gravity,
        g_ref=gravity_reference(fluids.max_surface_density(), gravity, delta_z),
        c_ref=fluids.c_refs(), gammas=fluids.gammas(),
    )
    return face, fluids


def shifted_face(face: FaceState, ell: int, delta: float) -> FaceState:
    """The same faces with the phase-``ell`` potential difference raised by
    ``delta`` (applied through the capillary offset, leaving states fixed)."""
    pc_i = list(face.pc_i)
    pc_i[ell] = pc_i[ell] - delta
    return replace(face, pc_i=pc_i)


def _flux_arrays(face: FaceState, scheme: SchemeConfig):
    fx = compute_face_flux(face, scheme)
    return ([u.val for u in fx.phase], fx.total.val, [c.val for c in fx.component])


def check_antisymmetry(face: FaceState, label: str) -> Check:
    scheme = SchemeConfig.from_label(label)
    ph, tot, comp = _flux_arrays(face, scheme)
    ph_s, tot_s, comp_s = _flux_arrays(face.swapped(), scheme)
    worst = max(
        max(np.max(np.abs(a + b)) for a, b in zip(ph, ph_s)),
        float(np.max(np.abs(tot + tot_s))),
        max(np.max(np.abs(a + b)) for a, b in zip(comp, comp_s)),
    )
    return Check(f"antisymmetry[{label}]", worst == 0.0, worst, 0.0,
                 "sum of mirrored fluxes, exact")


def check_redistribution(face: FaceState, label: str, tol: float = 1e-14) -> Check:
    scheme = SchemeConfig.from_label(label)
    fx = compute_face_flux(face, scheme)
    total = fx.total.val
    phase_sum = sum(u.val for u in fx.phase)
    scale = np.maximum(sum(np.abs(u.val) for u in fx.phase) + np.abs(total), 1e-300)
    worst = float(np.max(np.abs(phase_sum - total) / scale))
    if scheme.formulation == "total_mass":
        comp_sum = sum(c.val for c in fx.component)
        worst = max(worst, float(np.max(np.abs(comp_sum - total) / scale)))
    return Check(f"redistribution[{label}]", worst <= tol, worst, tol,
                 "phase fluxes resum to the total")


def check_ppu_equivalence(face: FaceState, tol: float = 1e-12) -> Check:
    # the fractional split telescopes back to the standard scheme only when
    # the transport terms also use single-point picks
    std = compute_face_flux(face, SchemeConfig.from_label("ppu"))
    tv = compute_face_flux(face, SchemeConfig("total_velocity", "ppu", "ppu"))
    worst = 0.0
    for a, b in zip(std.phase + std.component, tv.phase + tv.component):
        scale = np.maximum(np.abs(a.val) + np.abs(std.total.val), 1e-300)
        worst = max(worst, float(np.max(np.abs(a.val - b.val) / scale)))
    return Check("ppu_equivalence", worst <= tol, worst, tol,
                 "single-point fractional flux matches the standard scheme")


def check_weight_bounds(face: FaceState) -> Check:
    fx = compute_face_flux(face, SchemeConfig.from_label("wahu-tv"))
    lo = min(float(np.min(b.val)) for b in fx.beta)
    hi = max(float(np.max(b.val)) for b in fx.beta)
    worst = max(0.0 - lo, hi - 1.0)
    return Check("weight_bounds", lo > 0.0 and hi < 1.0, worst, 0.0,
                 f"beta in ({lo:.3e}, {hi:.3e})")


def check_monotone_factor(gammas=(0.0, 2.0, 3.75, 6.0, 50.0),
                          tol: float = 1e-12) -> Check:
    # tol covers last-ulp rounding of the three-term sum near its suprema
    x = np.concatenate([
        np.linspace(-1e6, 1e6, 20001),
        [-1e300, -1e12, 1e12, 1e300],
    ])
    worst = 0.0
    for gamma in gammas:
        p = wa_monotonicity_term(x, gamma, g_ref=1.0, c_ref=0.0, floor=1.0)
        worst = max(worst, float(np.max(0.0 - p)), float(np.max(p - 1.0)))
    return Check("monotone_factor", worst <= tol, worst, tol,
                 "blend monotonicity factor within [0, 1]")


def check_flux_monotonicity(face: FaceState, label: str, delta: float = 10.0,
                            tol: float = 1e-12) -> Check:
    """Central-difference slope of the total flux in each phase potential."""
    scheme = SchemeConfig.from_label(label)
    mass = scheme.formulation == "total_mass"
    scale = np.zeros_like(face.trans)
    for ell in range(face.n_phases):
        m = face.mob_i[ell].val + face.mob_j[ell].val
        if mass:
            m = m * np.maximum(face.rho_i[ell].val, face.rho_j[ell].val)
        scale = scale + m
    scale = face.trans * scale
    worst = np.inf
    for ell in range(face.n_phases):
        up = compute_face_flux(shifted_face(face, ell, +delta), scheme).total.val
        dn = compute_face_flux(shifted_face(face, ell, -delta), scheme).total.val
        slope = (up - dn) / (2.0 * delta)
        worst = min(worst, float(np.min(slope / np.maximum(scale, 1e-300))))
    return Check(f"flux_monotonicity[{label}]", worst >= -tol, worst, -tol,
                 "scaled min slope of total flux in each phase potential")


def check_capillary_spline(tol: float = 1e-9) -> Check:
    table = BUILTIN_CAPILLARY_TABLES["appendixB"]
    spline = build_capillary_spline(table, scale=1.0)
    knots = np.abs(spline(table[:, 0]) - table[:, 1]) / np.abs(table[:, 1])
    s = np.linspace(table[0, 0], table[-1, 0], 2001)
    vals = spline(s)
    finite = np.all(np.isfinite(vals))
    # second-order one-sided derivative mismatch across each interior knot;
    # the curvature term cancels, so a C1 spline scores ~h^2 * f''' while a
    # genuine slope jump scores O(1)
    h = 2e-6
    interior = table[1:-1, 0]
    mid = spline(interior)
    left = (3.0 * mid - 4.0 * spline(interior - h) + spline(interior - 2 * h)) / (2 * h)
    right = (4.0 * spline(interior + h) - spline(interior + 2 * h) - 3.0 * mid) / (2 * h)
    kink = np.max(np.abs(right - left) / np.maximum(np.abs(left), 1.0))
    worst = max(float(np.max(knots)), float(kink))
    return Check("capillary_spline", finite and worst <= tol, worst, tol,
                 "knot reproduction and first-derivative continuity")


def run_invariant_checks(seed: int = 0, n: int = 2000) -> list[Check]:
    """The full randomized structural suite over two- and three-phase states."""
    rng = np.random.default_rng(seed)
    checks: list[Check] = []
    for n_phases in (2, 3):
        face, _ = sample_face_states(rng, n, n_phases=n_phases, capillary=True)
        tag = f"{n_phases}ph"
        for label in ("ppu", "ppu-hu", "wahu-tv", "wahu-tm"):
            c = check_antisymmetry(face, label)
            checks.append(replace(c, name=f"{c.name}[{tag}]"))
        for label in ("ppu-hu", "wahu-tv", "wahu-tm"):
            c = check_redistribution(face, label)
            checks.append(replace(c, name=f"{c.name}[{tag}]"))
        c = check_ppu_equivalence(face)
        checks.append(replace(c, name=f"{c.name}[{tag}]"))
        c = check_weight_bounds(face)
        checks.append(replace(c, name=f"{c.name}[{tag}]"))
        for label in ("ppu", "wahu-tv", "wahu-tm"):
            c = check_flux_monotonicity(face, label)
            checks.append(replace(c, name=f"{c.name}[{tag}]"))
    checks.append(check_monotone_factor())
    checks.append(check_capillary_spline())
    return checks


def all_passed(checks: list[Check]) -> bool:
    return all(c.passed for c in checks)
