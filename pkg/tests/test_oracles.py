import numpy as np
import pytest
from scipy import integrate

from qimlab.errors import DomainError
from qimlab.losses import QimModel
from qimlab.oracles import (asymptotic_series_g, erfc_bounds_check, erfcx,
                            erfcx_quadrature, g_tail, mc_expectation_2d,
                            pochhammer_half, qim2_expected_coeffs,
                            qim2_expected_f, run_oracle_suite)

SQRT_PI = np.sqrt(np.pi)


# ---------------------------------------------------------------------------
# erfcx
# ---------------------------------------------------------------------------

def test_erfcx_basics():
    assert erfcx(0.0) == 1.0
    # frozen value computed with the quadrature oracle (and cross-checked
    # against scipy.special.erfcx)
    assert erfcx(1.0) == pytest.approx(0.4275835761558070, rel=1e-13)
    with pytest.raises(DomainError):
        erfcx(-0.5)


def test_erfcx_vs_quadrature_grid():
    for x in np.logspace(-3, np.log10(50.0), 30):
        ref = erfcx_quadrature(float(x))
        assert abs(erfcx(float(x)) - ref) <= 1e-12 * ref


def test_erfcx_cross_check_scipy():
    from scipy import special
    xs = np.concatenate([np.logspace(-3, 2, 50), [0.0, 1.999, 2.0, 2.001, 1e4]])
    ours = erfcx(xs)
    theirs = special.erfcx(xs)
    assert np.max(np.abs(ours - theirs) / theirs) <= 1e-12


def test_erfcx_monotone_decreasing():
    xs = np.linspace(0.0, 40.0, 2000)
    vals = erfcx(xs)
    assert np.all(np.diff(vals) < 0)


def test_erfcx_leading_asymptotic():
    x = 1e3
    assert abs(x * SQRT_PI * erfcx(x) - 1.0) <= 1e-5


# ---------------------------------------------------------------------------
# bounds on g(x)
# ---------------------------------------------------------------------------

def test_bounds_at_one():
    (chk,) = erfc_bounds_check([1.0])
    assert chk.lower_refined == pytest.approx(7.0 / 19.0, rel=1e-15)
    assert chk.upper_refined == pytest.approx(0.4, rel=1e-15)
    # frozen from the quadrature oracle: g(1) = (sqrt(pi)/2) erfcx(1)
    assert chk.value == pytest.approx(0.3789360780706562, rel=1e-12)
    assert chk.value == pytest.approx((SQRT_PI / 2.0) * erfcx_quadrature(1.0), rel=1e-12)
    assert chk.ok and chk.lower_refined < chk.value < chk.upper_refined


def test_bounds_full_grid():
    grid = np.logspace(-3, np.log10(50.0), 500)
    checks = erfc_bounds_check(grid)
    assert all(c.ok for c in checks)
    assert min(c.margin for c in checks) > 0


def test_bounds_reject_nonpositive():
    with pytest.raises(DomainError):
        erfc_bounds_check([0.0])


# ---------------------------------------------------------------------------
# asymptotic series
# ---------------------------------------------------------------------------

def test_series_leading_term_upper_bound():
    for x in (0.5, 1.0, 2.0, 5.0):
        enc = asymptotic_series_g(x, 0)
        assert enc.value == pytest.approx(1.0 / (2.0 * x), rel=1e-15)
        assert enc.is_upper_bound
        assert enc.value > float(g_tail(x))


def test_series_brackets_g_at_three():
    ref = (SQRT_PI / 2.0) * erfcx_quadrature(3.0)
    upper = asymptotic_series_g(3.0, 4)
    lower = asymptotic_series_g(3.0, 5)
    assert lower.value < ref < upper.value


def test_series_remainder_bound():
    x, order = 2.0, 3
    ref = (SQRT_PI / 2.0) * erfcx_quadrature(x)
    enc = asymptotic_series_g(x, order)
    assert abs(ref - enc.value) <= enc.remainder_bound
    assert enc.remainder_bound == pytest.approx(
        x ** (-(2 * order + 3)) * 0.5 * pochhammer_half(order + 1), rel=1e-15)


def test_series_enclosure_property():
    for x in (0.5, 1.0, 2.0, 3.0, 5.0):
        ref = (SQRT_PI / 2.0) * erfcx_quadrature(x)
        for order in range(0, 9):
            enc = asymptotic_series_g(x, order)
            if enc.is_upper_bound:
                assert enc.value > ref
            else:
                assert enc.value < ref
            assert abs(ref - enc.value) <= enc.remainder_bound


def test_series_domain():
    with pytest.raises(DomainError):
        asymptotic_series_g(0.0, 2)
    with pytest.raises(DomainError):
        asymptotic_series_g(1.0, -1)


# ---------------------------------------------------------------------------
# qim2 expected coefficients
# ---------------------------------------------------------------------------

def _c1_defining_integral(beta, R):
    f = lambda t: (3 - 6 * t ** 2 + t ** 4) * np.exp(-t ** 2 / 2) / (beta * R + t ** 2)
    v, _ = integrate.quad(f, 0, np.inf, epsabs=1e-13, epsrel=1e-12)
    return R * v


def _c2_defining_integral(beta, R):
    f = lambda t: (3 * R - t ** 2) * (-1 + t ** 2) * np.exp(-t ** 2 / 2) / (beta * R + t ** 2)
    v, _ = integrate.quad(f, 0, np.inf, epsabs=1e-13, epsrel=1e-12)
    return v


@pytest.mark.parametrize("beta", [0.1, 1.0, 10.0])
@pytest.mark.parametrize("R", [0.25, 1.0, 4.0])
def test_coeffs_match_defining_integrals(beta, R):
    co = qim2_expected_coeffs(beta, R)
    assert co.c1 == pytest.approx(_c1_defining_integral(beta, R), rel=1e-8)
    assert co.c2 == pytest.approx(_c2_defining_integral(beta, R), rel=1e-8)


def test_coeffs_sign_grid():
    for beta in (0.1, 0.5, 1.0, 2.0, 10.0):
        for R in (0.25, 0.5, 1.0, 2.0, 4.0):
            co = qim2_expected_coeffs(beta, R)
            assert co.c1 > 0
            assert co.c2 < 0
            assert co.c1 + co.c2 < 0


def test_coeffs_expectation_vanishes_at_truth():
    # E f = 0 at u = x, i.e. c1 + 2 c2 + c3 = 0 at R = 1, s = 1
    for beta in (0.1, 1.0, 10.0):
        co = qim2_expected_coeffs(beta, 1.0)
        assert abs(co.c1 + 2 * co.c2 + co.c3) <= 1e-9
        assert abs(qim2_expected_f(beta, 1.0, 0.0, co)) <= 1e-8


def test_coeffs_domain():
    with pytest.raises(DomainError):
        qim2_expected_coeffs(0.0, 1.0)
    with pytest.raises(DomainError):
        qim2_expected_coeffs(1.0, -1.0)


# ---------------------------------------------------------------------------
# Monte-Carlo expectations
# ---------------------------------------------------------------------------

def test_mc_pointwise_zero_at_truth():
    est = mc_expectation_2d(QimModel.qim2(1.0), 1.0, 0.0, 10_000, seed=3)
    assert est.f == (0.0, 0.0)
    assert est.dtheta == (0.0, 0.0)


def test_mc_matches_closed_form():
    est = mc_expectation_2d(QimModel.qim2(1.0), 1.0, np.pi / 4, 200_000, seed=4)
    cf = qim2_expected_f(1.0, 1.0, np.pi / 4)
    assert abs(est.f[0] - cf) <= 3.0 * est.f[1]


def test_mc_qim3_dtheta_signs():
    m3 = QimModel.qim3()
    plus = mc_expectation_2d(m3, 1.0, np.pi / 4, 100_000, seed=5)
    minus = mc_expectation_2d(m3, 1.0, 3 * np.pi / 4, 100_000, seed=5)
    assert plus.dtheta[0] >= 3.0 * plus.dtheta[1]
    assert minus.dtheta[0] <= -3.0 * minus.dtheta[1]


def test_mc_quadratic_in_s():
    # E f is quadratic in s = cos^2(theta): a least-squares quadratic fit
    # through 5 levels leaves residuals inside the MC noise
    beta, R, N = 1.0, 1.0, 200_000
    svals = np.array([0.0, 0.25, 0.5, 0.75, 1.0])
    means, ses = [], []
    for s in svals:
        theta = float(np.arccos(np.sqrt(s)))
        est = mc_expectation_2d(QimModel.qim2(beta), R, theta, N, seed=6)
        means.append(est.f[0])
        ses.append(est.f[1])
    V = np.vstack([svals ** 2, svals, np.ones_like(svals)]).T
    coef, *_ = np.linalg.lstsq(V, np.array(means), rcond=None)
    resid = V @ coef - np.array(means)
    assert np.all(np.abs(resid) <= 3.0 * np.maximum(np.array(ses), 1e-12))


def test_mc_determinism_and_antithetic():
    m3 = QimModel.qim3()
    a = mc_expectation_2d(m3, 0.5, 1.0, 50_000, seed=7)
    b = mc_expectation_2d(m3, 0.5, 1.0, 50_000, seed=7)
    assert a == b
    c = mc_expectation_2d(m3, 0.5, 1.0, 50_000, seed=7, antithetic=False)
    assert c.f != a.f   # different estimator, same stream
    assert abs(c.f[0] - a.f[0]) <= 4.0 * (a.f[1] + c.f[1])


def test_mc_validation():
    with pytest.raises(ValueError):
        mc_expectation_2d(QimModel.qim2(), 1.0, 0.5, 10)
    with pytest.raises(DomainError):
        mc_expectation_2d(QimModel.qim1(), 1.0, 0.5, 10_000)
    with pytest.raises(DomainError):
        mc_expectation_2d(QimModel.qim2(), -1.0, 0.5, 10_000)


# ---------------------------------------------------------------------------
# suite
# ---------------------------------------------------------------------------

def test_oracle_suite_small_samples():
    report = run_oracle_suite(mc_samples=20_000, seed=2, bounds_points=100)
    assert report.all_pass, [c.name for c in report.checks if not c.ok]
    names = {c.name for c in report.checks}
    assert {"erfcx_vs_quadrature", "erfc_refined_bounds",
            "asymptotic_series_enclosure", "qim2_coefficient_signs",
            "qim2_closed_form_vs_mc", "qim3_dtheta_sign",
            "dtheta_null_at_axes"} <= names
    # deterministic report bytes
    again = run_oracle_suite(mc_samples=20_000, seed=2, bounds_points=100)
    assert again.to_json() == report.to_json()


def test_oracle_suite_rejects_bad_beta():
    with pytest.raises(DomainError):
        run_oracle_suite(mc_samples=2000, beta=-1.0)
