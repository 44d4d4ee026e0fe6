import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad, solve_ivp

from edes_lifespan import kernels as kn
from edes_lifespan import special as sp
from edes_lifespan import verification as vf

P23 = kn.SpacetimeParams(2.0 / 3.0, 3)


def ode_oracle(t, s, lam, k, y_s, dy_s):
    """Integrate y'' = lam^2 tau^{-2k} y from tau = s with DOP853."""
    sol = solve_ivp(lambda x, y: [y[1], lam * lam * x ** (-2 * k) * y[0]], (s, t), [y_s, dy_s],
                    method="DOP853", rtol=1e-12, atol=1e-14)
    return sol.y[0, -1]


# ---- geometry ------------------------------------------------------------------


def test_phi_k_values():
    assert kn.phi_k(1.0, P23) == pytest.approx(3.0)
    assert kn.phi_k(1.0, kn.SpacetimeParams(0.0)) == 1.0
    assert kn.phi_k(8.0, P23) == pytest.approx(6.0)
    assert kn.phi_k(0.0, P23) == 0.0


def test_light_cone_values():
    assert kn.light_cone_A(1.0, kn.SpacetimeParams(0.3)) == 0.0
    assert kn.light_cone_A(8.0, P23) == pytest.approx(3.0)
    assert kn.light_cone_A(5.0, kn.SpacetimeParams(0.0)) == pytest.approx(4.0)


@pytest.mark.parametrize("k", [0.0, 0.25, 0.5, 2 / 3, 0.9])
def test_light_cone_is_integral_of_speed(k):
    params = kn.SpacetimeParams(k)
    val, _ = quad(lambda x: x ** (-k), 1.0, 7.0, epsrel=1e-13)
    assert kn.light_cone_A(7.0, params) == pytest.approx(val, rel=1e-12)


def test_angle_bracket():
    assert kn.angle(0.0) == 3.0
    assert kn.angle(-2.0) == kn.angle(2.0) == 5.0


def test_params_derived():
    p = kn.SpacetimeParams(2 / 3)
    assert p.nu == pytest.approx(1.5)
    assert p.c_k == pytest.approx((1 / 3) ** 2)
    assert p.gamma_k == pytest.approx(1 / 3)
    assert kn.SpacetimeParams(0.8).gamma_k == pytest.approx(0.2)
    with pytest.raises(sp.DomainError):
        kn.SpacetimeParams(1.0)


# ---- kernel values ----------------------------------------------------------------


def test_y0_initial_condition():
    assert kn.kernel_y0(2.0, 2.0, 1.3, kn.SpacetimeParams(0.4)).value == pytest.approx(1.0, abs=1e-10)


def test_y1_initial_condition():
    assert abs(kn.kernel_y1(5.0, 5.0, 2.0, kn.SpacetimeParams(0.5)).value) < 1e-10


def test_y0_two_thirds_elementary_value():
    d = 3 * (4 ** (1 / 3) - 1)
    expect = 4 ** (1 / 3) * math.cosh(d) - math.sinh(d) / 3
    assert kn.kernel_y0_elementary(4.0, 1.0, 1.0) == pytest.approx(expect, rel=1e-14)
    assert kn.kernel_y0(4.0, 1.0, 1.0, P23).value == pytest.approx(expect, rel=1e-9)
    assert ode_oracle(4.0, 1.0, 1.0, 2 / 3, 1.0, 0.0) == pytest.approx(expect, rel=1e-10)


def test_y1_two_thirds_value_against_ode():
    # the ODE solution fixes the value; the cosh/sinh roles in the closed form
    # are such that y1(8, 1) = (2 - 1/9) sinh 3 + (1/3) cosh 3
    oracle = ode_oracle(8.0, 1.0, 1.0, 2 / 3, 0.0, 1.0)
    closed = (2 - 1 / 9) * math.sinh(3) + math.cosh(3) / 3
    assert closed == pytest.approx(22.27853997258907, rel=1e-14)
    assert oracle == pytest.approx(closed, rel=1e-10)
    for rep in ("bessel", "elementary_2_3", "hypergeometric_2_3"):
        assert kn.kernel_y1(8.0, 1.0, 1.0, P23, representation=rep).value == \
            pytest.approx(closed, rel=1e-12)


def test_y0_general_k_against_ode():
    params = kn.SpacetimeParams(0.3)
    oracle = ode_oracle(3.0, 1.5, 0.7, 0.3, 1.0, 0.0)
    assert kn.kernel_y0(3.0, 1.5, 0.7, params).value == pytest.approx(oracle, rel=1e-10)


def test_y1_general_k_against_ode():
    params = kn.SpacetimeParams(0.2)
    oracle = ode_oracle(2.0, 1.0, 0.5, 0.2, 0.0, 1.0)
    assert kn.kernel_y1(2.0, 1.0, 0.5, params).value == pytest.approx(oracle, rel=1e-10)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.0, 0.9), st.floats(1.0, 6.0), st.floats(0.0, 6.0), st.floats(0.1, 3.0))
def test_kernels_match_ode_oracle(k, s, dt, lam):
    t = s + dt
    params = kn.SpacetimeParams(k)
    y0 = kn.kernel_y0(t, s, lam, params).value
    y1 = kn.kernel_y1(t, s, lam, params).value
    assert y0 == pytest.approx(ode_oracle(t, s, lam, k, 1.0, 0.0), rel=1e-8)
    assert y1 == pytest.approx(ode_oracle(t, s, lam, k, 0.0, 1.0), rel=1e-8, abs=1e-12)


def test_y1_positive_after_s():
    params = kn.SpacetimeParams(0.45)
    for t in np.linspace(1.01, 30, 40):
        assert kn.kernel_y1(t, 1.0, 0.8, params).value > 0


def test_large_argument_no_overflow():
    params = kn.SpacetimeParams(0.5)
    val = kn.kernel_y0(400.0, 399.0, 5.0, params).value
    assert math.isfinite(val) and val > 1


def test_with_residual_reports_small_residual():
    ev = kn.kernel_y1(6.0, 2.0, 1.1, kn.SpacetimeParams(0.35), with_residual=True)
    assert ev.representation == "bessel"
    assert ev.ode_residual < 1e-5 * max(1.0, abs(ev.value))


def test_t_before_s_rejected():
    with pytest.raises(sp.DomainError):
        kn.kernel_y0(1.0, 2.0, 1.0, P23)


# ---- k = 2/3 hypergeometric route --------------------------------------------------


def test_hypergeometric_initial_data():
    y0, y1 = kn.kernel_pair_2_3_hypergeometric(1.0, 1.0, 1.0)
    assert y0 == pytest.approx(1.0, abs=1e-14)
    assert abs(y1) < 1e-14


def test_appendix_wronskian_spot():
    assert kn.vtilde_wronskian(2.0, 1.5) == pytest.approx(60.75, rel=1e-13)


def test_hypergeometric_matches_elementary():
    y0, y1 = kn.kernel_pair_2_3_hypergeometric(8.0, 1.0, 1.0)
    assert y0 == pytest.approx(kn.kernel_y0_elementary(8.0, 1.0, 1.0), rel=1e-13)
    assert y1 == pytest.approx(kn.kernel_y1_elementary(8.0, 1.0, 1.0), rel=1e-13)


def test_two_thirds_forms_reject_other_k():
    with pytest.raises(sp.DomainError):
        kn.kernel_pair_2_3_hypergeometric(2.0, 1.0, 1.0, kn.SpacetimeParams(0.5))
    with pytest.raises(sp.DomainError):
        kn.kernel_y0(2.0, 1.0, 1.0, kn.SpacetimeParams(0.5), representation="elementary_2_3")


def test_triple_representation_full():
    res = vf.check_triple_representation("full")
    assert res.passed, res.worst
    assert len(res.table) > 100


def test_appendix_checks():
    for res in vf.check_appendix_wronskian("full"):
        assert res.passed, res


# ---- identities on the random grid --------------------------------------------------


def test_identity_suite():
    for res in vf.check_kernel_identities("full"):
        assert res.passed, (res.name, res.worst)


# ---- auxiliary functions ------------------------------------------------------------


def riemann(f, a, b, panels=1_000_000):
    h = (b - a) / panels
    x = a + h * (np.arange(panels) + 0.5)
    return float(np.sum(f(x)) * h)


def test_xi_trivial_value():
    cfg = kn.AuxFnConfig(q=0.0, lambda0=1.0, R=1.0)
    for k in (0.0, 0.4, 2 / 3):
        val = kn.xi_q(1.0, 1.0, 0.0, kn.SpacetimeParams(k, 1), cfg)
        assert val == pytest.approx(1 - math.exp(-1), rel=1e-12)


def test_xi_dense_oracle():
    params = kn.SpacetimeParams(0.5, 2)
    cfg = kn.AuxFnConfig(q=1.0, lambda0=2.0, R=0.5)
    A = float(kn.light_cone_A(3.0, params))
    oracle = riemann(lambda lam: np.exp(-lam * (A + 0.5)) * sp.yz_phi(2, 0.0 * lam) * lam, 0, 2)
    assert kn.xi_q(3.0, 3.0, 0.0, params, cfg) == pytest.approx(oracle, rel=1e-8)


def test_xi_singular_weight():
    # q in (-1, 0): compare with an algebraic-weight adaptive quadrature
    params = kn.SpacetimeParams(0.3, 3)
    cfg = kn.AuxFnConfig(q=-0.6, lambda0=1.0, R=1.0)
    t, s, r = 2.5, 1.5, 0.7
    A = float(kn.light_cone_A(t, params))
    dphi = float(kn.phi_k(t, params) - kn.phi_k(s, params))
    f = lambda lam: math.exp(-lam * (A + 1)) * math.cosh(lam * dphi) * sp.yz_phi(3, lam * r)  # noqa
    oracle, _ = quad(f, 0, 1, weight="alg", wvar=(-0.6, 0), epsabs=0, epsrel=1e-12)
    assert kn.xi_q(t, s, r, params, cfg) == pytest.approx(oracle, rel=1e-9)


def test_eta_equals_scaled_xi_on_diagonal():
    params = kn.SpacetimeParams(0.6, 3)
    cfg = kn.AuxFnConfig(q=0.5)
    for t in (1.0, 2.0, 9.0):
        r = np.array([0.0, 0.5, 2.0])
        np.testing.assert_allclose(kn.eta_q(t, t, r, params, cfg),
                                   t ** 0.6 * kn.xi_q(t, t, r, params, cfg), rtol=1e-12)


def test_eta_dense_oracle():
    params = kn.SpacetimeParams(0.0, 1)
    cfg = kn.AuxFnConfig(q=0.0)
    oracle = riemann(lambda lam: np.exp(-lam * 4.0) * np.sinh(3 * lam) / (3 * lam), 0, 1)
    assert kn.eta_q(4.0, 1.0, 0.0, params, cfg) == pytest.approx(oracle, rel=1e-8)


def test_xi_example_positive():
    val = kn.xi_q(2.0, 1.0, 0.5, P23, kn.AuxFnConfig(q=0.5))
    assert val > 0


def test_fast_table_agrees():
    cfg = kn.AuxFnConfig(q=0.5, rtol=1e-10)
    r = np.linspace(0.0, 12.0, 50)
    exact = kn.xi_q(20.0, 3.0, r, P23, cfg)
    fast = kn.xi_q(20.0, 3.0, r, P23, cfg, fast=True)
    np.testing.assert_allclose(fast, exact, rtol=1e-7)


def test_aux_config_validation():
    with pytest.raises(sp.DomainError):
        kn.AuxFnConfig(q=-1.0)


def test_bound_constants():
    b0, b1 = kn.fit_lower_bound_constants(P23, kn.AuxFnConfig(q=0.5))
    b2 = kn.fit_upper_bound_constant(P23, kn.AuxFnConfig(q=0.5))
    assert min(b0.value, b1.value, b2.value) > 0
    assert b0.grid["t_points"] == 9
    with pytest.raises(sp.DomainError):
        kn.fit_upper_bound_constant(kn.SpacetimeParams(0.5, 5), kn.AuxFnConfig(q=0.5))


# ---- CSV export ---------------------------------------------------------------------


def test_kernel_csv(tmp_path):
    rows = kn.kernel_sweep(P23, [(2.0, 1.0, 0.5), (10.0, 3.0, 2.0)])
    assert rows[0]["rep_disagreement"] < 1e-12
    path = tmp_path / "k.csv"
    kn.write_kernel_csv(rows, path)
    lines = path.read_text().splitlines()
    assert lines[0].split(",") == list(kn.CSV_COLUMNS)
    assert len(lines) == 3
