"""Tests for the single-cell residual-space analysis toolkit.

Covers the pointwise residual/Jacobian evaluations, the per-scheme converged
states, kink-sharpness measurements across flux-switch loci, the smooth-limit
behaviors of the weighted scheme (gamma -> 0 and gamma -> infinity), and the
micro-step Newton path tracer.  Numeric reference values are frozen from
hand derivations on the default exchange problem.
"""

import numpy as np
import pytest
from scipy.optimize import brentq

from huflow.analysis import (
    CORNER_STARTS,
    OneCellProblem,
    bend_measure,
    kink_jumps,
    locus_fields,
    newton_path,
    one_cell_residuals,
    residual_and_jacobian,
    residual_surface,
    solve_one_cell,
    velocity_surface,
)
from huflow.flux import SchemeConfig

PROB = OneCellProblem()
PPU = SchemeConfig.from_label("ppu")
WA = SchemeConfig.from_label("wahu-tv")
ALL_LABELS = ("ppu", "ppu-hu", "wahu-tv", "wahu-tm")

# converged left-cell states (pressure, water saturation) per scheme
SOLUTIONS = {
    "ppu": (207.6051430001, 0.2888570345),
    "ppu-hu": (207.6051430001, 0.2888570345),
    "wahu-tv": (207.6170947828, 0.2888570345),
    "wahu-tm": (207.7832933849, 0.2852261456),
}
TM_TOTAL_FLUX = 1.4186048405


def test_residual_matches_hand_values():
    # accumulation (-0.6, 0.6) plus upwound fluxes (0.2436, 1.03936)
    R, J = residual_and_jacobian(PROB, PPU, 210.0, 0.2)
    np.testing.assert_allclose(R, [-0.3564, 1.63936], rtol=1e-10)
    want_J = np.array([[0.04, 5.61718224], [0.512, -9.11113262]])
    np.testing.assert_allclose(J, want_J, rtol=1e-6)


def test_volume_residuals_sum_to_total_flux():
    # phase-volume accumulations cancel, so R_w + R_g telescopes to u_t;
    # the fractional schemes keep a tiny mobility-sum guard in the split,
    # visible at the 1e-12 level for these order-one mobilities
    for label in ("ppu", "ppu-hu", "wahu-tv"):
        scheme = SchemeConfig.from_label(label)
        res, fx = one_cell_residuals(PROB, scheme, [211.0, 208.5], [0.45, 0.7])
        np.testing.assert_allclose(
            res[0].val + res[1].val, fx.total.val, rtol=1e-9
        )


def test_mass_residual_matches_hand_values():
    # accumulation scaled by own-side densities plus the mass components
    R, _ = residual_and_jacobian(
        PROB, SchemeConfig.from_label("wahu-tm"), 210.0, 0.2
    )
    np.testing.assert_allclose(R, [-2.2106002651055, 3.3669962492094], rtol=1e-9)


@pytest.mark.parametrize("label", ALL_LABELS)
def test_jacobian_matches_finite_differences(label):
    scheme = SchemeConfig.from_label(label)
    for p0, s0 in ((212.0, 0.55), (208.0, 0.7), (206.5, 0.6)):
        _, J = residual_and_jacobian(PROB, scheme, p0, s0)
        hp, hs = 1e-4, 1e-7
        Rp1, _ = residual_and_jacobian(PROB, scheme, p0 + hp, s0)
        Rp0, _ = residual_and_jacobian(PROB, scheme, p0 - hp, s0)
        Rs1, _ = residual_and_jacobian(PROB, scheme, p0, s0 + hs)
        Rs0, _ = residual_and_jacobian(PROB, scheme, p0, s0 - hs)
        J_fd = np.column_stack([(Rp1 - Rp0) / (2 * hp), (Rs1 - Rs0) / (2 * hs)])
        assert np.max(np.abs(J - J_fd)) / np.max(np.abs(J)) < 1e-6


def test_converged_states_per_scheme():
    sols = {label: solve_one_cell(PROB, SchemeConfig.from_label(label))
            for label in ALL_LABELS}
    for label, sol in sols.items():
        assert sol.residual_norm <= 1e-9
        want_p, want_s = SOLUTIONS[label]
        assert abs(sol.pressure - want_p) < 1e-6
        assert abs(sol.s_w - want_s) < 1e-6
    # both single-point pick variants agree exactly; the weighted volume
    # scheme shares the saturation (same water balance on u_t = 0) but
    # roots the pressure through the blended total flux
    assert abs(sols["ppu"].pressure - sols["ppu-hu"].pressure) < 1e-9
    assert abs(sols["wahu-tv"].s_w - sols["ppu"].s_w) < 1e-7
    assert abs(sols["wahu-tv"].pressure - sols["ppu"].pressure) > 1e-3


def test_total_flux_at_solution_by_formulation():
    # volume formulations rest on the u_t = 0 manifold; the mass
    # formulation balances accumulation against a nonzero mass flux
    for label in ("ppu", "ppu-hu", "wahu-tv"):
        sol = solve_one_cell(PROB, SchemeConfig.from_label(label))
        assert abs(sol.total_flux) <= 1e-10
    tm = solve_one_cell(PROB, SchemeConfig.from_label("wahu-tm"))
    assert abs(tm.total_flux) > 0.1
    np.testing.assert_allclose(abs(tm.total_flux), TM_TOTAL_FLUX, rtol=1e-6)


def test_velocity_surface_layout(one_cell_surface):
    surface = one_cell_surface
    assert surface.kind == "velocity"
    assert surface.values.shape == (96, 96)
    assert np.all(np.isfinite(surface.values))
    assert set(surface.loci) == {"phase_w", "phase_g", "total", "capillary"}
    for name in ("phase_g", "total", "capillary"):
        assert len(surface.loci[name]) > 0


def test_surface_is_resolution_consistent():
    # pure-function sampling: the coarse lattice is a subset of the
    # double-density lattice, with bit-identical values at shared points
    coarse = velocity_surface(PROB, WA, resolution=32)
    fine = velocity_surface(PROB, WA, resolution=63)
    assert np.array_equal(fine.p_axis[::2], coarse.p_axis)
    assert np.array_equal(fine.s_axis[::2], coarse.s_axis)
    assert np.array_equal(fine.values[::2, ::2], coarse.values)


def test_refined_total_locus_zeroes_the_flux(one_cell_surface):
    for p, s in one_cell_surface.loci["total"][:5]:
        _, fx = one_cell_residuals(PROB, PPU, [p], [s])
        assert abs(float(fx.total.val[0])) <= 1e-10


def test_capillary_locus_sits_at_matched_saturation(one_cell_surface):
    # the capillary-difference indicator telescopes to the wetting curve,
    # so its zero set is the horizontal line s = s_right
    pts = np.asarray(one_cell_surface.loci["capillary"])
    assert len(pts) >= 90
    np.testing.assert_allclose(pts[:, 1], PROB.s_w_right, atol=1e-6)


def test_residual_surface_minimum_sits_at_the_solution():
    surf = residual_surface(PROB, PPU, resolution=48)
    assert surf.kind == "residual"
    assert np.all(surf.values >= 0.0)
    assert np.all(np.isfinite(surf.values))
    row, col = np.unravel_index(np.argmin(surf.values), surf.values.shape)
    sol = solve_one_cell(PROB, PPU)
    assert abs(surf.p_axis[col] - sol.pressure) <= surf.p_axis[1] - surf.p_axis[0]
    assert abs(surf.s_axis[row] - sol.s_w) <= surf.s_axis[1] - surf.s_axis[0]


def test_lattice_resolution_guard():
    with pytest.raises(ValueError, match="at least 32"):
        velocity_surface(PROB, PPU, resolution=31)


def test_pick_kinks_dwarf_weighted_kinks(phase_g_points):
    # slope jumps across the gas-potential locus: order one for the pick
    # scheme, order h for the arctan-weighted scheme
    kp = kink_jumps(PROB, PPU, phase_g_points, "phase_g", h=1e-4)
    kw = kink_jumps(PROB, WA, phase_g_points, "phase_g", h=1e-4)
    assert np.min(kp) > 0.1
    assert np.max(kw) < 0.05
    assert np.min(kp / kw) >= 10.0


def test_weighted_kink_scales_linearly_with_h(phase_g_points):
    kw3 = kink_jumps(PROB, WA, phase_g_points, "phase_g", h=1e-3)
    kw4 = kink_jumps(PROB, WA, phase_g_points, "phase_g", h=1e-4)
    kp3 = kink_jumps(PROB, PPU, phase_g_points, "phase_g", h=1e-3)
    kp4 = kink_jumps(PROB, PPU, phase_g_points, "phase_g", h=1e-4)
    assert 8.0 < np.max(kw3) / np.max(kw4) < 12.0  # O(h): shrinks with h
    assert 0.7 < np.max(kp3) / np.max(kp4) < 1.4  # O(1): h-independent


def test_zero_sharpness_keeps_flow_smooth(phase_g_points):
    # gamma = 0 blends both sides evenly; the measured jump across the
    # locus is pure curvature noise and shrinks linearly with h
    wa0 = SchemeConfig.from_label("wahu-tv", alpha=0.0)
    k3 = kink_jumps(PROB, wa0, phase_g_points, "phase_g", h=1e-3)
    k4 = kink_jumps(PROB, wa0, phase_g_points, "phase_g", h=1e-4)
    assert np.max(k4) < 0.05
    assert 8.0 < np.max(k3) / np.max(k4) < 12.0


def test_infinite_sharpness_recovers_the_pick_total():
    wa_inf = SchemeConfig.from_label("wahu-tv", alpha=1e6)
    for p0, s0 in ((212.0, 0.55), (208.0, 0.7), (213.0, 0.35), (206.5, 0.6)):
        _, fx_w = one_cell_residuals(PROB, wa_inf, [p0], [s0])
        _, fx_p = one_cell_residuals(PROB, PPU, [p0], [s0])
        a, b = float(fx_w.total.val[0]), float(fx_p.total.val[0])
        assert abs(a - b) / abs(b) < 1e-2


def test_zero_sharpness_trades_kinks_for_curvature():
    # below the pick scheme's switch pressures its downwind mobilities are
    # frozen, while the even blend keeps both saturations active: the blend
    # curves harder along s wherever the pick scheme coasts
    wa0 = SchemeConfig.from_label("wahu-tv", alpha=0.0)
    for p_fixed in (202.0, 203.0, 204.0):
        bend_pick = bend_measure(PROB, PPU, p_fixed=p_fixed)
        bend_blend = bend_measure(PROB, wa0, p_fixed=p_fixed)
        assert bend_blend > bend_pick
    # without the shared capillary curvature the contrast is an order of
    # magnitude, isolating the downwind-dependence mechanism
    flat = OneCellProblem(capillary_scale=0.0)
    assert bend_measure(flat, wa0, 203.0) > 10.0 * bend_measure(flat, PPU, 203.0)


def test_linear_problem_is_kink_and_curvature_free():
    prob = OneCellProblem(
        rho_w=(6.0, 6.0),
        rho_g=(2.0, 2.0),
        exponent_w=1.0,
        exponent_g=1.0,
        capillary_scale=0.0,
    )
    for scheme in (PPU, WA):
        assert bend_measure(prob, scheme, p_fixed=207.0) < 1e-8
    # on the gas locus at the matched saturation both sides carry the same
    # mobility, so even the pick scheme has no jump at all
    jumps = kink_jumps(prob, PPU, [(208.0, 0.2)], "phase_g", h=1e-3)
    assert np.max(np.abs(jumps)) <= 1e-12


def test_kink_jumps_reject_locus_without_normal():
    with pytest.raises(ValueError, match="no analytic normal"):
        kink_jumps(PROB, PPU, [(210.0, 0.3)], "capillary")


def test_newton_path_guards():
    with pytest.raises(ValueError, match="step_scale"):
        newton_path(PROB, PPU, (210.0, 0.4), step_scale=0.0)
    with pytest.raises(ValueError, match="step_scale"):
        newton_path(PROB, PPU, (210.0, 0.4), step_scale=0.2)
    trace = newton_path(PROB, PPU, (206.0, 0.05), max_steps=5)
    assert not trace.converged
    assert len(trace.points) == 6


def test_newton_path_from_the_solution_has_length_zero():
    sol = solve_one_cell(PROB, WA)
    trace = newton_path(PROB, WA, (sol.pressure, sol.s_w))
    assert trace.converged
    assert len(trace.points) == 1


def test_newton_path_reaches_the_converged_state():
    for label, start in (("ppu", CORNER_STARTS[0]), ("wahu-tm", CORNER_STARTS[3])):
        scheme = SchemeConfig.from_label(label)
        trace = newton_path(PROB, scheme, start, step_scale=0.05)
        assert trace.converged
        p_end, s_end = trace.points[-1]
        want_p, want_s = SOLUTIONS[label]
        assert abs(p_end - want_p) < 1e-4
        assert abs(s_end - want_s) < 1e-4
        assert set(trace.crossings) == {"phase_w", "phase_g", "total", "capillary"}


def test_weighted_paths_cross_fewer_of_their_own_kinks():
    # each scheme only kinks where its own picks switch: the pick scheme at
    # phase-potential sign changes, the weighted fractional scheme at total
    # flux and capillary-ordering sign changes.  Along micro-step Newton
    # paths from shared starts the weighted scheme crosses fewer of them.
    starts = ((209.0, 0.35), (211.5, 0.65), (213.5, 0.9), (209.0, 0.1))
    own_pick = 0
    own_weighted = 0
    for start in starts:
        a = newton_path(PROB, PPU, start, step_scale=0.05)
        b = newton_path(PROB, WA, start, step_scale=0.05)
        assert a.converged and b.converged
        own_pick += a.crossings["phase_w"] + a.crossings["phase_g"]
        own_weighted += b.crossings["total"] + b.crossings["capillary"]
    assert own_pick == 4
    assert own_weighted == 1
    assert own_weighted < own_pick


def test_zero_total_flux_at_potential_intersection():
    # where both phase potentials vanish the total flux vanishes for every
    # scheme, but the fractional split keeps a counter-current exchange:
    # gravity and capillary picks disagree there, so the phase fluxes are
    # equal and opposite instead of zero
    def potential_gap(s):
        fields = locus_fields(PROB, PPU, 210.0, s)
        return float(fields["phase_w"][0] - fields["phase_g"][0])

    s_star = brentq(potential_gap, 0.001, 0.3, xtol=1e-14)

    def water_potential(p):
        return float(locus_fields(PROB, PPU, p, s_star)["phase_w"][0])

    p_star = brentq(water_potential, *PROB.p_range, xtol=1e-13)
    assert abs(p_star - 205.9746059) < 1e-6
    assert abs(s_star - 0.0219258859) < 1e-9

    for label in ALL_LABELS:
        scheme = SchemeConfig.from_label(label)
        _, fx = one_cell_residuals(PROB, scheme, [p_star], [s_star])
        u_w = float(fx.phase[0].val[0])
        u_g = float(fx.phase[1].val[0])
        assert abs(float(fx.total.val[0])) <= 1e-11
        assert abs(u_w + u_g) <= 1e-11
        if label == "ppu":
            assert abs(u_w) <= 1e-12
        if label in ("wahu-tv", "wahu-tm"):
            assert abs(u_w) > 0.1
