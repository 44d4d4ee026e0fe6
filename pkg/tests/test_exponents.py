import math

import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from edes_lifespan import exponents as ex
from edes_lifespan import verification as vf
from edes_lifespan.special import DomainError

dims = st.floats(1.0, 12.0)
ks = st.floats(0.0, 0.95)
powers = st.floats(1.01, 6.0)


def test_p0_examples():
    assert ex.critical_exponent_p0(3, 2 / 3) == pytest.approx((8 + math.sqrt(76)) / 6, rel=1e-14)
    assert ex.critical_exponent_p0(3, 2 / 3) == pytest.approx(2.786300, abs=1e-6)
    assert ex.critical_exponent_p0(4, 2 / 3) == pytest.approx((17 + math.sqrt(345)) / 14, rel=1e-14)


def test_p0_at_k0_is_shifted_strauss():
    # at k = 0 the weight t^{1-p} shifts the Strauss exponent by two dimensions
    for n in range(1, 9):
        assert ex.critical_exponent_p0(n, 0.0) == pytest.approx(ex.p_strauss(n + 2), rel=1e-14)


def test_strauss_n3():
    assert ex.p_strauss(3) == pytest.approx(1 + math.sqrt(2), abs=1e-12)
    assert ex.p_strauss(1) == math.inf


def test_larger_root_no_cancellation():
    # x^2 + 1e8 x - 1 has the small positive root ~1e-8
    root = ex.larger_root(1.0, 1e8, -1.0)
    assert root == pytest.approx(1e-8, rel=1e-12)
    with pytest.raises(DomainError):
        ex.larger_root(1.0, 0.0, 1.0)


def test_identity_example():
    assert abs(ex.p0_identity_residual(5, 0.3)) < 1e-10


def test_thresholds_values():
    N, Nt, Nh = ex.thresholds(0.0)
    assert N == pytest.approx(2.0)
    assert (Nt, Nh) == (pytest.approx(1.0), pytest.approx(3.0))
    N, Nt, Nh = ex.thresholds(2 / 3)
    assert N == pytest.approx((math.sqrt(73) - 1) / 2, rel=1e-14)
    assert (Nt, Nh) == (pytest.approx(3.0), pytest.approx(5.0))


def test_printed_threshold_variant():
    assert ex.threshold_N_as_printed(2 / 3) == pytest.approx(3.5)
    assert ex.threshold_N_as_printed(0.0) == pytest.approx((1 + math.sqrt(8)) / 2)
    # only the corrected threshold makes p0 and p1 coincide
    Np = ex.threshold_N_as_printed(2 / 3)
    assert abs(ex.critical_exponent_p0(Np, 2 / 3) - ex.critical_exponent_p1(Np, 2 / 3)) > 1e-2


@settings(max_examples=300, deadline=None)
@given(ks)
def test_threshold_is_where_p0_meets_p1(k):
    N = ex.threshold_N(k)
    assert abs(ex.critical_exponent_p0(N, k) - ex.critical_exponent_p1(N, k)) <= 1e-9
    _, Nt, Nh = ex.thresholds(k)
    assert Nt < N < Nh


def test_p3_special_cases():
    assert ex.exponent_p3(1, 0.0) == math.inf
    assert ex.exponent_p3(2, 0.0) == pytest.approx(2.0)


def test_kato_examples():
    kq = ex.kato_quantities(3, 2 / 3, 2.0)
    assert kq["M1"] == pytest.approx(1.0)
    assert kq["theta"] == pytest.approx(5 / 3)
    assert kq["M2"] == pytest.approx(5 / 6)


@settings(max_examples=300, deadline=None)
@given(dims, ks, powers)
def test_m2_is_half_theta(n, k, p):
    kq = ex.kato_quantities(n, k, p)
    assert kq["M2"] == pytest.approx(kq["theta"] / 2, abs=1e-12 * max(1, abs(kq["theta"])))


@settings(max_examples=300, deadline=None)
@given(dims, ks)
def test_m1_vanishes_at_p1(n, k):
    assert abs(ex.kato_quantities(n, k, ex.critical_exponent_p1(n, k))["M1"]) < 1e-10


@settings(max_examples=500, deadline=None)
@given(dims, ks, powers)
def test_sign_equivalences(n, k, p):
    p0, p1 = ex.critical_exponent_p0(n, k), ex.critical_exponent_p1(n, k)
    assume(min(abs(p - p0), abs(p - p1)) > 1e-9)
    kq = ex.kato_quantities(n, k, p)
    assert (kq["M1"] > 0) == (p < p1)
    assert (kq["M2"] > 0) == (p < p0)
    assert (kq["a1"] >= kq["a2"]) == (((1 - k) * n - 1) * p <= 2 * (1 - k))
    if kq["M"] > 0:
        assert kq["a"] > 1


def test_per_branch_m2_does_not_force_a2():
    # M2 > 0 with a2 <= 1 happens (here n < N(k)); the implication holds
    # for the maximizing branch only
    kq = ex.kato_quantities(5.6, 0.914, 3.3)
    assert 5.6 < ex.threshold_N(0.914)
    assert kq["M2"] > 0 and kq["a2"] <= 1
    assert kq["M"] > 0 and kq["a"] > 1


@settings(max_examples=300, deadline=None)
@given(dims, ks)
def test_p3_range(n, k):
    _, Nt, Nh = ex.thresholds(k)
    assume(min(abs(n - Nt), abs(n - Nh)) > 1e-9)
    p3 = ex.exponent_p3(n, k)
    assert (math.isfinite(p3) and p3 > 1) == (Nt < n < Nh)


def test_classify_examples():
    law = ex.classify_lifespan(3, 2 / 3, 2.0)
    assert (law.kind, law.regime) == ("power", "sub_p1")
    assert law.exponent == pytest.approx(1.0)

    law = ex.classify_lifespan(3, 2 / 3, 3.0)
    assert (law.kind, law.regime) == ("exponential", "crit_p1")
    assert law.exponent == pytest.approx(2.0)

    p0 = ex.critical_exponent_p0(4, 2 / 3)
    law = ex.classify_lifespan(4, 2 / 3, p0)
    assert (law.kind, law.regime) == ("exponential", "crit_p0")
    assert law.exponent == pytest.approx(p0 * (p0 - 1))
    assert law.exponent == pytest.approx(3.916, abs=1e-3)

    law = ex.classify_lifespan(1, 0.0, 2.0)
    assert law.regime == "sub_p1" and law.exponent == pytest.approx(1.0)


def test_classify_subcases():
    # n >= N^: theta law
    law = ex.classify_lifespan(6, 2 / 3, 2.0)
    assert law.regime == "sub_p0"
    assert law.exponent == pytest.approx(2.0 / ex.theta(2.0, 6, 2 / 3))
    # N < n < N^: split at p3
    n, k = 4, 2 / 3
    p3 = ex.exponent_p3(n, k)
    left = ex.classify_lifespan(n, k, 0.5 * (1 + p3))
    right = ex.classify_lifespan(n, k, 0.5 * (p3 + ex.critical_exponent_p0(n, k)))
    assert left.regime == "sub_p0_via_p3_left"
    assert left.exponent == pytest.approx(1 / (2 / (0.5 * (1 + p3) - 1) - (1 - k) * n))
    assert right.regime == "sub_p0_via_p3_right"


def test_classify_empty_interval_falls_through():
    # n = 2, k = 0: p3 = p0 = 2, so (p3, p0) is empty; but n = N(0) = 2 and
    # the p1 branch applies
    assert ex.classify_lifespan(2, 0.0, 1.5).regime == "sub_p1"
    # n = 2.5, k = 0: N < n < N^ and p3 = 4/3 < p0
    assert ex.classify_lifespan(2.5, 0.0, 1.2).regime == "sub_p0_via_p3_left"


def test_supercritical_unknown():
    law = ex.classify_lifespan(3, 2 / 3, 4.0)
    assert law.regime == "supercritical_unknown" and math.isnan(law.exponent)
    assert ex.classify_lifespan(6, 0.0, 3.0).regime == "supercritical_unknown"


def test_subcritical_exponents_positive():
    for n in range(1, 10):
        for k in (0.0, 0.3, 2 / 3, 0.9):
            pc = max(ex.critical_exponent_p0(n, k), ex.critical_exponent_p1(n, k))
            for frac in (0.2, 0.5, 0.9):
                p = 1 + frac * (pc - 1)
                law = ex.classify_lifespan(n, k, p)
                assert law.kind == "power" and law.exponent > 0


def test_report_fields():
    rep = ex.exponent_report(3, 2 / 3, 2.0).as_dict()
    for key in ("p_strauss", "p0", "p1", "p2", "p3", "N_k", "N_tilde", "N_hat", "regime",
                "theta", "M1", "M2", "a1", "a2"):
        assert key in rep
    assert ex.exponent_report(3, 0.5).regime is None


def test_domain_errors():
    with pytest.raises(DomainError):
        ex.critical_exponent_p0(3, 1.0)
    with pytest.raises(DomainError):
        ex.classify_lifespan(3, 0.5, 1.0)


def test_exponent_suite():
    for res in vf.check_exponent_calculus("full"):
        assert res.passed, (res.name, res.worst, res.detail)
