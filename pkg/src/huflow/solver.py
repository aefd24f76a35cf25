"""Fully implicit pressure-saturation solver.

Backward-Euler mass balances per cell and component are assembled together
with an exact Jacobian (propagated dual numbers), solved by Newton with a
sparse direct factorization, and advanced in time with recursive halving of
steps that fail to converge.

Unknown layout: cell-major blocks [p, S_0 .. S_{np-2}]; the last phase's
saturation is eliminated through the sum-to-one constraint.  For closed
incompressible problems the pressure field is only defined up to a constant,
so one pressure unknown is grounded and one (provably redundant) mass row is
dropped from the linear system; the full residual still converges because
the dropped row is a fixed linear combination of the kept ones.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import ad
from .fluid import FluidSystem, gravity_reference
from .flux import FaceState, SchemeConfig, compute_face_flux
from .mesh import Grid

__all__ = [
    "State",
    "SourceSpec",
    "SolverSettings",
    "Problem",
    "NewtonReport",
    "StepRecord",
    "RunReport",
    "total_mass",
    "build_face_state",
    "assemble",
    "residual_norm",
    "newton_solve",
    "run_schedule",
]


@dataclass
class State:
    """Per-cell pressure (Pa) and saturations of every phase (sum to one).

    Only the first n_phases-1 saturation columns are Newton unknowns; the
    stored last column is kept consistent by the update logic.
    """

    pressure: np.ndarray  # (N,)
    saturations: np.ndarray  # (N, n_phases)

    def copy(self) -> "State":
        return State(self.pressure.copy(), self.saturations.copy())

    def validate(self):
        if self.pressure.shape[0] != self.saturations.shape[0]:
            raise ValueError("pressure / saturation cell counts differ")
        if np.any(self.saturations < -1e-12) or np.any(self.saturations > 1 + 1e-12):
            raise ValueError("saturations outside [0, 1]")
        if np.any(np.abs(self.saturations.sum(axis=1) - 1.0) > 1e-10):
            raise ValueError("saturations do not sum to one")


@dataclass
class SourceSpec:
    """Fixed-state cells and constant component mass rates (kg/s, per cell)."""

    dirichlet: dict = field(default_factory=dict)  # cell -> (p, saturations)
    rates: dict = field(default_factory=dict)  # cell -> per-component kg/s

    def __post_init__(self):
        overlap = set(self.dirichlet) & set(self.rates)
        if overlap:
            raise ValueError(f"cells {sorted(overlap)} are both pinned and rate-sourced")


@dataclass(frozen=True)
class SolverSettings:
    max_iterations: int = 15
    residual_tol: float = 1e-6
    chop: str = "vanilla"  # vanilla | appleyard
    max_saturation_update: float = 0.2  # appleyard limit
    update_tests: bool = False  # also require small last update
    saturation_update_tol: float = 0.01
    pressure_update_tol: float = 1e-3
    max_cut_depth: int = 6
    scale_floor: float = 1e-12  # kg/s, residual normalization floor

    def __post_init__(self):
        if self.chop not in ("vanilla", "appleyard"):
            raise ValueError("chop must be 'vanilla' or 'appleyard'")
        if self.max_iterations < 1 or self.max_cut_depth < 0:
            raise ValueError("nonsensical iteration/cut limits")


@dataclass
class Problem:
    """Grid, fluids, scheme and run controls bundled for the solver."""

    grid: Grid
    fluids: FluidSystem
    scheme: SchemeConfig
    settings: SolverSettings = SolverSettings()
    sources: SourceSpec = field(default_factory=SourceSpec)
    gravity: float = 9.81
    label: str = ""


@dataclass
class NewtonReport:
    converged: bool
    iterations: int
    residual_history: list
    chops: int


@dataclass
class StepRecord:
    time_start: float
    dt: float
    depth: int
    accepted: bool
    report: NewtonReport


@dataclass
class RunReport:
    """Outcome of a full schedule: accepted steps, failed attempts, audits."""

    label: str
    scheme: str
    steps: list
    iterations: int  # Newton iterations of accepted steps
    wasted: int  # iterations spent in attempts that were cut
    cuts: int
    aborted: bool
    final_time: float
    final_state: State
    mass_initial: np.ndarray
    mass_final: np.ndarray
    mass_history: list  # (time, per-component mass)
    conservation_defect: np.ndarray  # mass change minus time-integrated residual+sources

    @property
    def total_iterations(self) -> int:
        return self.iterations + self.wasted


class _AbortRun(Exception):
    """Internal: maximum cut depth exceeded."""


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------
def total_mass(grid: Grid, fluids: FluidSystem, state: State) -> np.ndarray:
    """Per-component fluid mass in place, Sum_i V_i phi_i rho_c S_c."""
    pv = grid.volumes * grid.porosities
    return np.array(
        [
            float(np.sum(pv * fluids.phases[c].rho(state.pressure) * state.saturations[:, c]))
            for c in range(fluids.n_phases)
        ]
    )


def _side_duals(fluids, pressure, saturations, offset, ndir):
    """Pressure/saturation duals for one side; last saturation is 1 - sum."""
    npph = fluids.n_phases
    p = ad.variable(pressure, offset, ndir)
    s = [ad.variable(saturations[:, l], offset + 1 + l, ndir) for l in range(npph - 1)]
    s_ref = ad.constant(np.ones_like(pressure), ndir)
    for sl in s:
        s_ref = s_ref - sl
    return p, s + [s_ref]


def build_face_state(grid: Grid, fluids: FluidSystem, state: State, gravity: float) -> FaceState:
    """FaceState duals over every grid connection, i-side directions first."""
    ci, cj, trans, dz = grid.connection_arrays()
    npph = fluids.n_phases
    ndir = 2 * npph
    p_i, s_i = _side_duals(fluids, state.pressure[ci], state.saturations[ci], 0, ndir)
    p_j, s_j = _side_duals(fluids, state.pressure[cj], state.saturations[cj], npph, ndir)
    rho_i = [fluids.phases[l].rho(p_i) for l in range(npph)]
    rho_j = [fluids.phases[l].rho(p_j) for l in range(npph)]
    mob_i = [fluids.mobility(l, s_i[l]) for l in range(npph)]
    mob_j = [fluids.mobility(l, s_j[l]) for l in range(npph)]
    pc_i = [fluids.pcap(l, s_i[l]) for l in range(npph)]
    pc_j = [fluids.pcap(l, s_j[l]) for l in range(npph)]
    g_ref = gravity_reference(fluids.max_surface_density(), gravity, dz)
    return FaceState(
        p_i, p_j, s_i, s_j, rho_i, rho_j, mob_i, mob_j, pc_i, pc_j,
        trans, dz, gravity, g_ref, fluids.c_refs(), fluids.gammas(),
    )


def _grounding(problem: Problem):
    """(dropped mass row, grounded pressure column) for closed incompressible runs."""
    if problem.sources.dirichlet:
        return None
    if any(ph.compressibility != 0.0 for ph in problem.fluids.phases):
        return None
    return (0, 0)  # component-0 balance of cell 0; pressure of cell 0


def assemble(problem: Problem, state: State, prev_state: State, dt: float):
    """Residual vector, exact sparse Jacobian, and per-cell mass scale.

    Rows/columns are cell-major: row i*np+c is component c of cell i, column
    i*np+d is its pressure (d=0) or saturation d-1.  The scale is the cell's
    previous total mass per unit time, floored.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    grid, fluids = problem.grid, problem.fluids
    npph = fluids.n_phases
    N = grid.cell_count
    n = N * npph
    if state.pressure.shape[0] != N:
        raise ValueError("state does not match grid")
    rows, cols, data = [], [], []
    R = np.zeros(n)
    cells = np.arange(N)

    # accumulation
    vdt = grid.volumes * grid.porosities / dt
    p, sats = _side_duals(fluids, state.pressure, state.saturations, 0, npph)
    prev_mass = np.stack(
        [
            fluids.phases[c].rho(prev_state.pressure) * prev_state.saturations[:, c]
            for c in range(npph)
        ],
        axis=1,
    )
    scale = np.maximum(vdt * prev_mass.sum(axis=1), problem.settings.scale_floor)
    for c in range(npph):
        acc = (fluids.phases[c].rho(p) * sats[c] - prev_mass[:, c]) * vdt
        R[cells * npph + c] += acc.val
        for d in range(npph):
            rows.append(cells * npph + c)
            cols.append(cells * npph + d)
            data.append(acc.der[:, d])

    # interface fluxes, scattered antisymmetrically
    ci, cj, _, _ = grid.connection_arrays()
    face = build_face_state(grid, fluids, state, problem.gravity)
    fx = compute_face_flux(face, problem.scheme)
    for c in range(npph):
        F = fx.component[c]
        np.add.at(R, ci * npph + c, F.val)
        np.add.at(R, cj * npph + c, -F.val)
        for d in range(2 * npph):
            col = (ci if d < npph else cj) * npph + (d % npph)
            rows.append(ci * npph + c)
            cols.append(col)
            data.append(F.der[:, d])
            rows.append(cj * npph + c)
            cols.append(col)
            data.append(-F.der[:, d])

    for cell, q in problem.sources.rates.items():
        for c in range(npph):
            R[cell * npph + c] -= q[c]

    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    data = np.concatenate(data)

    if problem.sources.dirichlet:
        pinned = np.zeros(n, dtype=bool)
        for cell, (p_fix, s_fix) in problem.sources.dirichlet.items():
            block = cell * npph + np.arange(npph)
            pinned[block] = True
            R[block[0]] = state.pressure[cell] - p_fix
            s_fix = np.asarray(s_fix, dtype=float)
            for l in range(npph - 1):
                R[block[1 + l]] = state.saturations[cell, l] - s_fix[l]
        keep = ~pinned[rows]
        rows, cols, data = rows[keep], cols[keep], data[keep]
        eye = np.flatnonzero(pinned)
        rows = np.concatenate([rows, eye])
        cols = np.concatenate([cols, eye])
        data = np.concatenate([data, np.ones(eye.size)])

    J = sp.coo_matrix((data, (rows, cols)), shape=(n, n)).tocsc()
    return R, J, scale


def residual_norm(R: np.ndarray, scale: np.ndarray, n_phases: int) -> float:
    """l2 norm of the residual normalized by each cell's mass-per-time scale."""
    return float(np.linalg.norm(R / np.repeat(scale, n_phases)))


def _solve_linear(J, R, drop):
    """delta = -J^{-1} R, with optional row/column grounding."""
    if drop is None:
        return spla.splu(J).solve(-R)
    r0, c0 = drop
    n = R.shape[0]
    keep_r = np.ones(n, dtype=bool)
    keep_c = np.ones(n, dtype=bool)
    keep_r[r0] = False
    keep_c[c0] = False
    J_red = J[keep_r][:, keep_c].tocsc()
    d_red = spla.splu(J_red).solve(-R[keep_r])
    delta = np.zeros(n)
    delta[keep_c] = d_red
    return delta


def _apply_update(state: State, delta: np.ndarray, settings: SolverSettings, npph: int):
    """Chopped Newton update; returns new state, chop flag, and update sizes.

    Vanilla chopping clamps saturations into [0,1]; Appleyard additionally
    limits each saturation change to max_saturation_update first.  Pressure
    is never damped.  The eliminated saturation absorbs the sum-to-one
    correction; if that drives it negative the others are rescaled onto the
    simplex.
    """
    N = state.pressure.shape[0]
    d = delta.reshape(N, npph)
    p_new = state.pressure + d[:, 0]
    ds = d[:, 1:]
    chopped = False
    if settings.chop == "appleyard":
        lim = settings.max_saturation_update
        clipped = np.clip(ds, -lim, lim)
        chopped = bool(np.any(clipped != ds))
        ds = clipped
    s_new = state.saturations[:, : npph - 1] + ds
    s_clamped = np.clip(s_new, 0.0, 1.0)
    chopped = chopped or bool(np.any(s_clamped != s_new))
    s_ref = 1.0 - s_clamped.sum(axis=1)
    neg = s_ref < 0.0
    if np.any(neg):
        chopped = True
        s_clamped[neg] /= s_clamped[neg].sum(axis=1, keepdims=True)
        s_ref[neg] = 0.0
    sats = np.column_stack([s_clamped, s_ref])
    max_ds = float(np.max(np.abs(sats - state.saturations))) if N else 0.0
    rel_dp = float(np.max(np.abs(p_new - state.pressure) / np.maximum(np.abs(p_new), 1e-300)))
    return State(p_new, sats), chopped, max_ds, rel_dp


def newton_solve(problem: Problem, prev_state: State, dt: float):
    """One implicit step: Newton from the previous state.

    Convergence requires the normalized residual below tolerance and, when
    update tests are enabled and at least one update has been taken, a small
    last saturation change and relative pressure change in every cell.
    Returns (report, state, residual_at_final_state).
    """
    settings = problem.settings
    npph = problem.fluids.n_phases
    state = prev_state.copy()
    for cell, (p_fix, s_fix) in problem.sources.dirichlet.items():
        state.pressure[cell] = p_fix
        state.saturations[cell] = np.asarray(s_fix, dtype=float)
    drop = _grounding(problem)
    history = []
    chops = 0
    update_ok = True
    for it in range(settings.max_iterations + 1):
        R, J, scale = assemble(problem, state, prev_state, dt)
        rnorm = residual_norm(R, scale, npph)
        history.append(rnorm)
        if not np.isfinite(rnorm):
            break
        if rnorm < settings.residual_tol and update_ok:
            return NewtonReport(True, it, history, chops), state, R
        if it == settings.max_iterations:
            break
        try:
            delta = _solve_linear(J, R, drop)
        except RuntimeError:
            break
        if not np.all(np.isfinite(delta)):
            break
        state, did_chop, max_ds, rel_dp = _apply_update(state, delta, settings, npph)
        chops += int(did_chop)
        update_ok = (not settings.update_tests) or (
            max_ds < settings.saturation_update_tol and rel_dp < settings.pressure_update_tol
        )
    return NewtonReport(False, len(history) - 1, history, chops), state, None


# ---------------------------------------------------------------------------
# time stepping
# ---------------------------------------------------------------------------
def run_schedule(problem: Problem, state0: State, dts, label: str = "") -> RunReport:
    """Advance through the requested steps, halving on failure.

    A failed attempt books its iterations as wasted and is retried as two
    half steps (recursively, to the configured depth); exceeding the depth
    aborts the run, which is reported rather than raised.

    The report's conservation_defect is mass change minus the time integral
    of accepted residual sums and source rates.  For closed problems it
    audits discrete conservation; with pressure-held cells it instead
    reflects the net boundary exchange those cells absorb.
    """
    grid, fluids = problem.grid, problem.fluids
    npph = fluids.n_phases
    state0.validate()
    steps: list[StepRecord] = []
    counters = {"iterations": 0, "wasted": 0, "cuts": 0}
    mass0 = total_mass(grid, fluids, state0)
    mass_history = [(0.0, mass0)]
    balance = np.zeros(npph)  # integral of (sum_i R_ci + rates) dt
    rate_totals = np.zeros(npph)
    for q in problem.sources.rates.values():
        rate_totals += np.asarray(q, dtype=float)

    def advance(state: State, t: float, dt: float, depth: int) -> State:
        report, new_state, R = newton_solve(problem, state, dt)
        if report.converged:
            steps.append(StepRecord(t, dt, depth, True, report))
            counters["iterations"] += report.iterations
            res_sums = np.array([R[c::npph].sum() for c in range(npph)])
            balance[:] += dt * (res_sums + rate_totals)
            mass_history.append((t + dt, total_mass(grid, fluids, new_state)))
            return new_state
        steps.append(StepRecord(t, dt, depth, False, report))
        counters["wasted"] += report.iterations
        counters["cuts"] += 1
        if depth >= problem.settings.max_cut_depth:
            raise _AbortRun
        half = dt / 2.0
        mid = advance(state, t, half, depth + 1)
        return advance(mid, t + half, half, depth + 1)

    state = state0.copy()
    t = 0.0
    aborted = False
    for dt in dts:
        try:
            state = advance(state, t, float(dt), 0)
        except _AbortRun:
            aborted = True
            break
        t += float(dt)

    mass_final = total_mass(grid, fluids, state)
    defect = mass_final - mass0 - balance
    return RunReport(
        label=label or problem.label,
        scheme=problem.scheme.label,
        steps=steps,
        iterations=counters["iterations"],
        wasted=counters["wasted"],
        cuts=counters["cuts"],
        aborted=aborted,
        final_time=t,
        final_state=state,
        mass_initial=mass0,
        mass_final=mass_final,
        mass_history=mass_history,
        conservation_defect=defect,
    )
