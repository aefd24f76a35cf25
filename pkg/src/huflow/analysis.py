"""One-cell residual-space study for scheme comparison.

A single unknown cell (left, L) exchanges water and gas with a fixed
boundary cell (right, R) across one interface.  Everything is dimensionless
and the per-side densities are prescribed directly, which exposes the kinks
introduced by direction-dependent property choices.  The module samples the
total-flux surface and residual norm over (p_L, S_wL), locates the
upwind-flip loci, finds the problem solution, and traces continuous Newton
paths (many small fractional Newton steps).

Residual convention: the standard and total-velocity schemes balance phase
volumes (their converged state therefore sits on u_t = 0 in this buoyancy
problem), while the total-mass scheme balances component masses with the
cell's own densities, so its converged total mass flux is generally nonzero.
Outputs are plain arrays; rendering/serialization lives elsewhere.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import ad
from .flux import FaceState, SchemeConfig, compute_face_flux
from .fluid import BUILTIN_CAPILLARY_TABLES, build_capillary_spline

__all__ = [
    "OneCellProblem",
    "FieldSample",
    "OneCellSolution",
    "NewtonPath",
    "one_cell_residuals",
    "residual_and_jacobian",
    "locus_fields",
    "velocity_surface",
    "residual_surface",
    "solve_one_cell",
    "newton_path",
    "kink_jumps",
    "bend_measure",
    "CORNER_STARTS",
]

CORNER_STARTS = ((206.0, 0.05), (206.0, 0.95), (214.0, 0.05), (214.0, 0.95))


@dataclass
class OneCellProblem:
    """Two-phase single-cell exchange problem with a pinned right neighbor."""

    p_right: float = 210.0
    s_w_right: float = 0.2
    rho_w: tuple = (6.18, 6.0)  # (left, right)
    rho_g: tuple = (2.06, 2.0)
    exponent_w: float = 2.0  # water mobility S^2
    exponent_g: float = 3.0  # gas mobility S^3
    trans: float = 1.0
    g_dz: float = -1.0  # gravity times depth difference, left minus right
    volume: float = 1.0
    porosity: float = 0.3
    s_w_prev: float = 0.4
    dt: float = 0.1
    capillary_scale: float = 5e-5
    p_range: tuple = (205.0, 215.0)
    s_range: tuple = (0.001, 0.999)
    _spline: object = field(default=None, repr=False, compare=False)

    def spline(self):
        if self._spline is None:
            table = BUILTIN_CAPILLARY_TABLES["appendixB"]
            object.__setattr__(
                self, "_spline", build_capillary_spline(table, self.capillary_scale)
            )
        return self._spline

    def gammas(self, alpha: float) -> np.ndarray:
        gw = alpha * self.exponent_w * (self.exponent_w - 1.0)
        gg = alpha * self.exponent_g * (self.exponent_g - 1.0)
        return np.array([gw, gg])

    def pc_w(self, s_w):
        return self.spline()(s_w)

    def pc_g(self, s_g):
        return -self.spline()(1.0 - s_g)


def _face(problem: OneCellProblem, p_l, s_w_l, alpha: float) -> FaceState:
    """FaceState batched over flat arrays of left-cell states (2 seed dirs)."""
    p_l = np.atleast_1d(np.asarray(p_l, dtype=float))
    s_w_l = np.atleast_1d(np.asarray(s_w_l, dtype=float))
    n = p_l.shape[0]
    ndir = 2
    p_i = ad.variable(p_l, 0, ndir)
    sw_i = ad.variable(s_w_l, 1, ndir)
    sg_i = 1.0 - sw_i
    p_j = ad.constant(np.full(n, problem.p_right), ndir)
    sw_j = ad.constant(np.full(n, problem.s_w_right), ndir)
    sg_j = 1.0 - sw_j

    def const(v):
        return ad.constant(np.full(n, v), ndir)

    rho_i = [const(problem.rho_w[0]), const(problem.rho_g[0])]
    rho_j = [const(problem.rho_w[1]), const(problem.rho_g[1])]
    mob_i = [sw_i**problem.exponent_w, sg_i**problem.exponent_g]
    mob_j = [sw_j**problem.exponent_w, sg_j**problem.exponent_g]
    pc_i = [problem.pc_w(sw_i), problem.pc_g(sg_i)]
    pc_j = [problem.pc_w(sw_j), problem.pc_g(sg_j)]
    g_ref = np.full(n, max(problem.rho_w[0], problem.rho_w[1]) * problem.g_dz)
    c_w = np.asarray(problem.pc_w(0.8) - problem.pc_w(0.2)).item()
    c_g = np.asarray(problem.pc_g(0.8) - problem.pc_g(0.2)).item()
    return FaceState(
        p_i, p_j, [sw_i, sg_i], [sw_j, sg_j], rho_i, rho_j, mob_i, mob_j,
        pc_i, pc_j, np.full(n, problem.trans), np.full(n, problem.g_dz),
        1.0, g_ref, np.array([c_w, c_g]), problem.gammas(alpha),
    )


def one_cell_residuals(problem: OneCellProblem, scheme: SchemeConfig, p_l, s_w_l):
    """Left-cell residual duals [water, gas] plus the face flux bundle."""
    face = _face(problem, p_l, s_w_l, scheme.alpha)
    fx = compute_face_flux(face, scheme)
    vdt = problem.volume * problem.porosity / problem.dt
    sw = face.sat_i[0]
    sg = face.sat_i[1]
    if scheme.formulation == "total_mass":
        acc_w = (sw - problem.s_w_prev) * (vdt * problem.rho_w[0])
        acc_g = (sg - (1.0 - problem.s_w_prev)) * (vdt * problem.rho_g[0])
    else:
        acc_w = (sw - problem.s_w_prev) * vdt
        acc_g = (sg - (1.0 - problem.s_w_prev)) * vdt
    return [acc_w + fx.phase[0], acc_g + fx.phase[1]], fx


def residual_and_jacobian(problem, scheme, p_l: float, s_w_l: float):
    """Pointwise residual vector (2,) and exact Jacobian (2, 2)."""
    res, _ = one_cell_residuals(problem, scheme, [p_l], [s_w_l])
    R = np.array([res[0].val[0], res[1].val[0]])
    J = np.vstack([res[0].der[0], res[1].der[0]])
    return R, J


def locus_fields(problem, scheme, p_l, s_w_l) -> dict:
    """Kink indicator values: phase-potential, total-flux, capillary flips."""
    res, fx = one_cell_residuals(problem, scheme, p_l, s_w_l)
    return {
        "phase_w": fx.dphi[0].val,
        "phase_g": fx.dphi[1].val,
        "total": fx.total.val,
        "capillary": (problem.pc_w(np.atleast_1d(s_w_l)) - problem.pc_w(problem.s_w_right))
        - (
            problem.pc_g(1.0 - np.atleast_1d(s_w_l))
            - problem.pc_g(1.0 - problem.s_w_right)
        ),
    }


@dataclass
class FieldSample:
    """Lattice scalar field with overlay loci (point sets per kink family)."""

    p_axis: np.ndarray
    s_axis: np.ndarray
    values: np.ndarray  # (len(s_axis), len(p_axis))
    loci: dict  # name -> (k, 2) array of (p, s) points
    kind: str = ""


def _locus_points(fn, p_axis, s_axis, values) -> np.ndarray:
    """Zero crossings of a lattice field, bisection-refined along grid edges."""
    pts = []

    def bisect(x_lo, x_hi, f_lo, eval_fn):
        for _ in range(40):
            x_mid = 0.5 * (x_lo + x_hi)
            f_mid = eval_fn(x_mid)
            if f_mid == 0.0:
                return x_mid
            if (f_lo < 0) == (f_mid < 0):
                x_lo, f_lo = x_mid, f_mid
            else:
                x_hi = x_mid
        return 0.5 * (x_lo + x_hi)

    sgn = np.sign(values)
    flips_h = np.nonzero(sgn[:, :-1] * sgn[:, 1:] < 0)
    for r, c in zip(*flips_h):
        s0 = s_axis[r]
        p = bisect(p_axis[c], p_axis[c + 1], values[r, c], lambda x: fn([x], [s0])[0])
        pts.append((p, s0))
    flips_v = np.nonzero(sgn[:-1, :] * sgn[1:, :] < 0)
    for r, c in zip(*flips_v):
        p0 = p_axis[c]
        s = bisect(s_axis[r], s_axis[r + 1], values[r, c], lambda x: fn([p0], [x])[0])
        pts.append((p0, s))
    return np.array(pts) if pts else np.empty((0, 2))


def _lattice(problem, resolution):
    if resolution < 32:
        raise ValueError("resolution must be at least 32 per axis")
    p_axis = np.linspace(*problem.p_range, resolution)
    s_axis = np.linspace(*problem.s_range, resolution)
    P, S = np.meshgrid(p_axis, s_axis)
    return p_axis, s_axis, P.ravel(), S.ravel()


def _surface(problem, scheme, resolution, value_fn, kind) -> FieldSample:
    p_axis, s_axis, P, S = _lattice(problem, resolution)
    values = value_fn(P, S).reshape(resolution, resolution)
    names = ("phase_w", "phase_g", "total", "capillary")
    loci = {}
    fields = locus_fields(problem, scheme, P, S)
    for name in names:
        grid_vals = np.asarray(fields[name]).reshape(resolution, resolution)

        def point_fn(p, s, _name=name):
            return locus_fields(problem, scheme, p, s)[_name]

        loci[name] = _locus_points(point_fn, p_axis, s_axis, grid_vals)
    return FieldSample(p_axis, s_axis, values, loci, kind=kind)


def velocity_surface(problem, scheme, resolution: int = 64) -> FieldSample:
    """Total volumetric (or mass, for the TM scheme) flux over the lattice."""

    def value(p, s):
        _, fx = one_cell_residuals(problem, scheme, p, s)
        return fx.total.val

    return _surface(problem, scheme, resolution, value, kind="velocity")


def residual_surface(problem, scheme, resolution: int = 64) -> FieldSample:
    """l2 norm of the two-equation residual over the lattice."""

    def value(p, s):
        res, _ = one_cell_residuals(problem, scheme, p, s)
        return np.hypot(res[0].val, res[1].val)

    return _surface(problem, scheme, resolution, value, kind="residual")


@dataclass
class OneCellSolution:
    pressure: float
    s_w: float
    residual_norm: float
    total_flux: float


def _damped_newton(problem, scheme, start, max_iter=400):
    p, s = start
    lo, hi = problem.s_range
    for _ in range(max_iter):
        R, J = residual_and_jacobian(problem, scheme, p, s)
        if not np.all(np.isfinite(R)):
            break
        try:
            step = np.linalg.solve(J, -R)
        except np.linalg.LinAlgError:
            step, *_ = np.linalg.lstsq(J, -R, rcond=None)
        step[0] = np.clip(step[0], -2.0, 2.0)
        step[1] = np.clip(step[1], -0.1, 0.1)
        p += step[0]
        s = float(np.clip(s + step[1], lo, hi))
        if np.hypot(*R) < 1e-13:
            break
    R, _ = residual_and_jacobian(problem, scheme, p, s)
    return p, s, float(np.hypot(*R))


def solve_one_cell(problem: OneCellProblem, scheme: SchemeConfig) -> OneCellSolution:
    """Locate the converged left-cell state.

    Volume-balance schemes are polished on the u_t = 0 manifold: for a given
    saturation the pressure with zero total flux is bracketed (u_t is
    monotone in p), and the remaining water-volume balance is solved along
    that curve.  The mass scheme's solution is smooth and plain damped
    Newton from multiple starts suffices.
    """
    starts = list(CORNER_STARTS) + [(problem.p_right, problem.s_w_prev)]
    best = min((_damped_newton(problem, scheme, s0) for s0 in starts), key=lambda r: r[2])
    p, s, rnorm = best

    if scheme.formulation != "total_mass":
        p_lo, p_hi = problem.p_range[0] - 30.0, problem.p_range[1] + 30.0

        def u_t(pv, sv):
            _, fx = one_cell_residuals(problem, scheme, [pv], [sv])
            return float(fx.total.val[0])

        def p_on_manifold(sv):
            return brentq(lambda x: u_t(x, sv), p_lo, p_hi, xtol=1e-13, rtol=1e-15)

        def water_balance(sv):
            res, _ = one_cell_residuals(problem, scheme, [p_on_manifold(sv)], [sv])
            return float(res[0].val[0])

        s_lo, s_hi = problem.s_range
        try:
            s_star = brentq(water_balance, s_lo, s_hi, xtol=1e-14, rtol=1e-15)
            p_star = p_on_manifold(s_star)
            R, _ = residual_and_jacobian(problem, scheme, p_star, s_star)
            if np.hypot(*R) <= max(rnorm, 1e-9):
                p, s, rnorm = p_star, s_star, float(np.hypot(*R))
        except ValueError:
            pass  # no bracket: keep the Newton result

    _, fx = one_cell_residuals(problem, scheme, [p], [s])
    return OneCellSolution(p, s, rnorm, float(fx.total.val[0]))


@dataclass
class NewtonPath:
    points: np.ndarray  # (k, 2) of (p, s)
    converged: bool
    crossings: dict  # locus name -> sign-flip count along the path


def newton_path(
    problem,
    scheme,
    start,
    step_scale: float = 0.02,
    tol: float = 1e-10,
    max_steps: int = 100_000,
) -> NewtonPath:
    """Trace the continuous Newton path with small fractional steps."""
    if not 0.0 < step_scale <= 0.1:
        raise ValueError("step_scale must lie in (0, 0.1]")
    p, s = float(start[0]), float(start[1])
    lo, hi = problem.s_range
    pts = [(p, s)]
    names = ("phase_w", "phase_g", "total", "capillary")
    sgn = {
        k: np.sign(v[0]) for k, v in locus_fields(problem, scheme, [p], [s]).items()
    }
    crossings = {k: 0 for k in names}
    converged = False
    for _ in range(max_steps):
        R, J = residual_and_jacobian(problem, scheme, p, s)
        if np.hypot(*R) < tol:
            converged = True
            break
        try:
            step = np.linalg.solve(J, -R)
        except np.linalg.LinAlgError:
            step, *_ = np.linalg.lstsq(J, -R, rcond=None)
        p += step_scale * step[0]
        s = float(np.clip(s + step_scale * step[1], lo, hi))
        pts.append((p, s))
        here = locus_fields(problem, scheme, [p], [s])
        for k in names:
            sg = np.sign(here[k][0])
            if sg != 0 and sgn[k] != 0 and sg != sgn[k]:
                crossings[k] += 1
            sgn[k] = sg if sg != 0 else sgn[k]
    return NewtonPath(np.array(pts), converged, crossings)


def _normal_direction(problem, scheme, locus: str, p: float, s: float) -> np.ndarray:
    """Unit normal of a locus from exact kink-field derivatives."""
    res, fx = one_cell_residuals(problem, scheme, [p], [s])
    if locus == "phase_w":
        grad = fx.dphi[0].der[0]
    elif locus == "phase_g":
        grad = fx.dphi[1].der[0]
    elif locus == "total":
        grad = fx.total.der[0]
    else:
        raise ValueError(f"no analytic normal for locus {locus!r}")
    norm = np.linalg.norm(grad)
    if norm == 0.0:
        raise ValueError("degenerate locus normal")
    return grad / norm


def kink_jumps(problem, scheme, points, locus: str, h: float = 1e-3) -> np.ndarray:
    """One-sided slope mismatch of the total flux across a locus.

    At each locus point the flux is sampled at +-h and +-2h along the locus
    normal; the jump is the difference between the two one-sided first
    differences.  Smooth surfaces give O(h) values, true kinks give O(1).
    """

    def total(p, s):
        _, fx = one_cell_residuals(problem, scheme, p, s)
        return fx.total.val

    out = []
    for p0, s0 in points:
        n = _normal_direction(problem, scheme, locus, p0, s0)
        offs = np.array([-2.0, -1.0, 1.0, 2.0]) * h
        ps = p0 + offs * n[0]
        ss = np.clip(s0 + offs * n[1], *problem.s_range)
        u = total(ps, ss)
        slope_minus = (u[1] - u[0]) / h
        slope_plus = (u[3] - u[2]) / h
        out.append(abs(slope_plus - slope_minus))
    return np.array(out)


def bend_measure(problem, scheme, p_fixed: float, resolution: int = 201) -> float:
    """Largest second difference of the flux along the saturation axis."""
    s = np.linspace(problem.s_range[0], problem.s_range[1], resolution)
    _, fx = one_cell_residuals(problem, scheme, np.full(resolution, p_fixed), s)
    u = fx.total.val
    h = s[1] - s[0]
    return float(np.max(np.abs(np.diff(u, 2)))) / h**2
