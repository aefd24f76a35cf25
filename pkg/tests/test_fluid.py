"""Fluid property models: relperm, capillary spline, phase system wiring."""

import numpy as np
import pytest

from huflow.ad import constant, variable
from huflow.fluid import (
    BUILTIN_CAPILLARY_TABLES,
    CapillarySpline,
    FluidSystem,
    PhaseSpec,
    RelPermModel,
    build_capillary_spline,
    capillary_generator,
    gamma_coefficient,
    gravity_reference,
    interface_density,
    relperm_eval,
)


def natural_spline_oracle(x, y, q):
    """Evaluate the natural cubic spline by solving the second-derivative
    tridiagonal system directly; linear continuation outside the knots."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    n = len(x)
    h = np.diff(x)
    A = np.zeros((n, n))
    rhs = np.zeros(n)
    A[0, 0] = A[-1, -1] = 1.0
    for k in range(1, n - 1):
        A[k, k - 1] = h[k - 1]
        A[k, k] = 2.0 * (h[k - 1] + h[k])
        A[k, k + 1] = h[k]
        rhs[k] = 6.0 * ((y[k + 1] - y[k]) / h[k] - (y[k] - y[k - 1]) / h[k - 1])
    m = np.linalg.solve(A, rhs)  # second derivatives at knots

    def eval_one(t):
        if t < x[0]:
            slope = (y[1] - y[0]) / h[0] - h[0] * (2 * m[0] + m[1]) / 6.0
            return y[0] + slope * (t - x[0])
        if t > x[-1]:
            slope = (y[-1] - y[-2]) / h[-1] + h[-1] * (m[-2] + 2 * m[-1]) / 6.0
            return y[-1] + slope * (t - x[-1])
        k = min(np.searchsorted(x, t, side="right") - 1, n - 2)
        k = max(k, 0)
        a, b = x[k], x[k + 1]
        u, v = y[k], y[k + 1]
        return (
            m[k] * (b - t) ** 3 / (6 * h[k])
            + m[k + 1] * (t - a) ** 3 / (6 * h[k])
            + (u / h[k] - m[k] * h[k] / 6) * (b - t)
            + (v / h[k] - m[k + 1] * h[k] / 6) * (t - a)
        )

    return np.array([eval_one(t) for t in np.atleast_1d(q)])


def test_relperm_monomial_and_derivative():
    model = RelPermModel(0.5, 2.5)
    kr, dkr = relperm_eval(model, np.array([0.0, 0.25, 1.0]))
    assert np.allclose(kr, [0.0, 0.5 * 0.25**2.5, 0.5])
    assert np.allclose(dkr, [0.0, 0.5 * 2.5 * 0.25**1.5, 1.25])
    assert model(0.25) == pytest.approx(0.5 * 0.25**2.5)
    with pytest.raises(ValueError):
        relperm_eval(model, np.array([1.2]))
    with pytest.raises(ValueError):
        RelPermModel(0.5, 0.5)
    with pytest.raises(ValueError):
        RelPermModel(0.0, 2.0)


def test_relperm_on_duals_keeps_derivative():
    model = RelPermModel(1.0, 2.0)
    s = variable(np.array([0.3]), 0, 1)
    kr = model(s)
    assert kr.val[0] == pytest.approx(0.09)
    assert kr.der[0, 0] == pytest.approx(0.6)


def test_gamma_coefficient_from_curvature():
    assert gamma_coefficient(RelPermModel(1.0, 2.0)) == pytest.approx(2.0)
    assert gamma_coefficient(RelPermModel(1.0, 3.0)) == pytest.approx(6.0)
    assert gamma_coefficient(RelPermModel(1.0, 2.5)) == pytest.approx(3.75)
    assert gamma_coefficient(RelPermModel(1.0, 1.0)) == 0.0
    assert gamma_coefficient(RelPermModel(1.0, 2.0), alpha=2.0) == pytest.approx(4.0)
    with pytest.raises(ValueError):
        gamma_coefficient(RelPermModel(1.0, 1.5))
    with pytest.raises(ValueError):
        gamma_coefficient(RelPermModel(1.0, 2.0), alpha=-1.0)


def test_spline_matches_tridiagonal_oracle_inside_and_outside():
    table = BUILTIN_CAPILLARY_TABLES["appendixB"]
    sp = build_capillary_spline(table)
    q = np.array([0.0, 0.02, 0.05, 0.11, 0.3, 0.5, 0.777, 0.95, 0.97, 1.0])
    want = natural_spline_oracle(table[:, 0], table[:, 1], q)
    assert np.allclose(sp(q), want, rtol=1e-12, atol=1e-6)


def test_spline_hits_knots_exactly():
    table = BUILTIN_CAPILLARY_TABLES["appendixB"]
    sp = build_capillary_spline(table, scale=0.4)
    assert np.allclose(sp(table[:, 0]), 0.4 * table[:, 1], rtol=1e-12)


def test_spline_is_c2_at_boundary_knots():
    sp = build_capillary_spline(BUILTIN_CAPILLARY_TABLES["appendixB"])
    h = 1e-6
    for s0 in (0.05, 0.95):
        left = (sp(s0) - sp(s0 - h)) / h
        right = (sp(s0 + h) - sp(s0)) / h
        assert left[0] == pytest.approx(right[0], rel=1e-6)


def test_spline_derivative_via_duals():
    sp = build_capillary_spline(BUILTIN_CAPILLARY_TABLES["appendixB"])
    s = variable(np.array([0.4, 0.02, 0.99]), 0, 1)
    out = sp(s)
    h = 1e-7
    fd = (sp(s.val + h) - sp(s.val - h)) / (2 * h)
    assert np.allclose(out.der[:, 0], fd, rtol=1e-5)
    assert out.der[1, 0] == pytest.approx(sp.end_slopes[0])
    assert out.der[2, 0] == pytest.approx(sp.end_slopes[1])


def test_zero_scale_spline_is_identically_zero():
    sp = build_capillary_spline(BUILTIN_CAPILLARY_TABLES["appendixB"], scale=0.0)
    assert not sp(np.linspace(-1, 2, 7)).any()


def test_build_spline_rejects_bad_tables():
    with pytest.raises(ValueError):
        build_capillary_spline(np.array([[0.1, 1.0], [0.1, 2.0], [0.3, 1.0]]))
    with pytest.raises(ValueError):
        build_capillary_spline(np.array([[0.1, 1.0], [0.2, 2.0]]))


def test_capillary_generator_matches_table_source():
    # the shipped table holds rounded fourth-root samples of this curve
    s = BUILTIN_CAPILLARY_TABLES["appendixB"][:, 0]
    p = capillary_generator(s, p_entry=5.0e4, exponent=0.25)
    assert np.allclose(p, BUILTIN_CAPILLARY_TABLES["appendixB"][:, 1], rtol=5e-4)
    with pytest.raises(ValueError):
        capillary_generator(np.array([0.0]))


def two_phase_system(scale=1.0):
    phases = (
        PhaseSpec("water", 1e-3, 1000.0, RelPermModel(1.0, 2.5), wettability_rank=0),
        PhaseSpec("gas", 1e-3, 100.0, RelPermModel(0.6, 3.0), wettability_rank=1),
    )
    cap = {0: build_capillary_spline(BUILTIN_CAPILLARY_TABLES["appendixB"], scale)}
    return FluidSystem(phases=phases, capillary=cap)


def test_system_sign_convention_wetting_vs_nonwetting():
    fs = two_phase_system()
    sp = fs.capillary[0]
    s = np.array([0.3])
    # wetting phase: potential reduced by the (positive, decreasing) curve
    assert fs.pcap(0, s)[0] == pytest.approx(sp(0.3)[0])
    # a hypothetical less-wetting phase mirrors through s -> 1 - s
    phases3 = (
        PhaseSpec("water", 1e-3, 1500.0, RelPermModel(1.0, 2.0), 0),
        PhaseSpec("gas", 1e-3, 500.0, RelPermModel(1.0, 2.0), 2),
        PhaseSpec("oil", 1e-3, 1000.0, RelPermModel(1.0, 2.0), 1),
    )
    fs3 = FluidSystem(phases=phases3, capillary={0: sp, 1: sp})
    assert fs3.pcap(1, s)[0] == pytest.approx(-sp(0.7)[0])
    assert fs3.pcap(2, s)[0] == 0.0


def test_system_reference_normalizers():
    fs = two_phase_system()
    sp = fs.capillary[0]
    assert fs.capillary_reference(0) == pytest.approx(sp(0.8)[0] - sp(0.2)[0])
    assert fs.capillary_reference(0) < 0.0  # decreasing curve
    assert fs.capillary_reference(1) == 0.0
    assert np.allclose(fs.gammas(), [3.75, 6.0])
    assert fs.max_surface_density() == 1000.0
    assert fs.reference_index == 1


def test_system_validation():
    w = PhaseSpec("water", 1e-3, 1000.0, RelPermModel(1.0, 2.0), 0)
    g = PhaseSpec("gas", 1e-3, 100.0, RelPermModel(1.0, 2.0), 1)
    with pytest.raises(ValueError):
        FluidSystem(phases=(g, w))  # reference must be least wetting
    with pytest.raises(ValueError):
        FluidSystem(phases=(w,))
    sp = build_capillary_spline(BUILTIN_CAPILLARY_TABLES["appendixB"])
    with pytest.raises(ValueError):
        FluidSystem(phases=(w, g), capillary={1: sp})
    with pytest.raises(ValueError):
        PhaseSpec("bad", 0.0, 1000.0, RelPermModel(1.0, 2.0), 0)


def test_interface_density_weighting():
    assert interface_density(0.5, 0.25, 1000.0, 100.0) == pytest.approx(
        (0.5 * 1000 + 0.25 * 100) / 0.75, rel=1e-9
    )
    # both saturations zero: regularization gives the arithmetic mean
    assert interface_density(0.0, 0.0, 1000.0, 100.0) == pytest.approx(550.0)
    s = variable(np.array([0.5]), 0, 1)
    rho = interface_density(s, constant(0.25, 1), 1000.0, 100.0)
    h = 1e-7
    fd = (
        interface_density(0.5 + h, 0.25, 1000.0, 100.0)
        - interface_density(0.5 - h, 0.25, 1000.0, 100.0)
    ) / (2 * h)
    assert rho.der[0, 0] == pytest.approx(fd, rel=1e-6)


def test_gravity_reference_uses_max_surface_density():
    out = gravity_reference(1000.0, 9.81, np.array([-2.0, 0.0, 2.0]))
    assert np.allclose(out, [-19620.0, 0.0, 19620.0])


def test_compressible_density_model():
    p = PhaseSpec("water", 1e-3, 1000.0, RelPermModel(1.0, 2.0), 0,
                  compressibility=1e-9, ref_pressure=1e7)
    assert p.rho(1e7 + 1e6) == pytest.approx(1000.0 * (1 + 1e-3))
    incompressible = PhaseSpec("w", 1e-3, 1000.0, RelPermModel(1.0, 2.0), 0)
    assert incompressible.rho(5e6)[0] == 1000.0
