import math

import numpy as np
import pytest
from scipy import integrate
from scipy.signal import fftconvolve

from mg1retrial import asymptotics as asy
from mg1retrial.dist import Burr, HallWeiss, SlowlyVarying, StudentT
from mg1retrial.errors import DomainError, InvalidParameter, SecondOrderUnavailable
from mg1retrial.transforms import QueueModel, _poisson_mixture, pmf_L_infinity, pmf_L_mu, tail_from_pmf


def test_constants(canonical):
    assert asy.constants(canonical) == pytest.approx((0.5, 1.0, 1.0))
    rho, psi, _ = asy.constants(QueueModel(0.5, math.inf, Burr(2, 3, 1)))
    assert psi == 0.0


def test_regime_is_exact_in_h():
    assert asy.RegimeTag.from_h(1) is asy.RegimeTag.HEquals1
    assert asy.RegimeTag.from_h(1.0 - 1e-15) is asy.RegimeTag.HLess1
    assert asy.RegimeTag.from_h(1.0 + 1e-15) is asy.RegimeTag.HGreater1


def test_expansion_canonical_standard(canonical):
    e = asy.theorem1_expansion(canonical)
    assert (e.c1, e.e1, e.e2) == (pytest.approx(1.0), -2.0, -3.0)
    # bracket -8 + 8 + 16/3 + 32 - 16 = 64/3, times lam^3 = 1/8
    assert e.c2 == pytest.approx(8 / 3, rel=1e-14)
    assert not e.l0_in_second


def test_expansion_canonical_corrected(canonical):
    # (a-2) r1/(2(1-rho)) = 8 replaces -8, and (beta1 + psi) lam r1/(1-rho) = 16 is added
    e = asy.theorem1_expansion(canonical, corrected=True)
    assert e.c2 == pytest.approx(160 / 3 / 8, rel=1e-14)
    assert e.c1 == pytest.approx(1.0)


def test_expansion_h_less_than_one():
    d = HallWeiss(3.0, -0.5)  # a = 3, h = 0.5, r2 = 0.5
    lam = 0.5 / d.mean  # rho = 0.5
    m = QueueModel(lam, 1.0, d)
    e = asy.theorem1_expansion(m)
    assert e.c2 == pytest.approx(lam**3.5 * 0.5 / (2.5 * 0.5), rel=1e-14)
    assert e.e2 == -2.5 and e.l0_in_second
    assert asy.theorem1_expansion(m, corrected=True) == e


def test_expansion_h_greater_than_one_drops_r2():
    d = Burr(2.0, 1.5, 2.0)  # a = 3, h = 2
    m = QueueModel(0.2, 1.0, d)
    p = d.tail_params()
    one = 1 - m.rho
    bracket = (p.a - 4) * p.r1 / (2 * one) + p.r1 + m.lam * p.r1 / (p.a * one**2) + m.lam**2 * m.beta2 * p.r1 / one**2
    assert asy.theorem1_expansion(m).c2 == pytest.approx(bracket * m.lam**p.a, rel=1e-13)


def test_no_retrials_drops_retrial_term(canonical):
    inf = QueueModel(0.5, math.inf, Burr(2, 3, 1))
    diff = asy.theorem1_expansion(canonical).c2 - asy.theorem1_expansion(inf).c2
    # lam r1 / (a mu (1-rho)^2) * lam^a = 16/3 / 8
    assert diff == pytest.approx(2 / 3, rel=1e-13)
    assert asy.theorem1_expansion(inf).c2 == pytest.approx(2.0)


def test_second_order_needs_finite_variance():
    m = QueueModel(0.1, 1.0, Burr(1.0, 1.5, 1.5))  # a = 2.25 is fine
    asy.theorem1_expansion(m)
    from mg1retrial.dist import TailExpansionParams

    class Heavy(Burr):
        def tail_params(self):
            return TailExpansionParams(a=1.8, h=1.0, r1=1.0, r2=-1.0)

    bad = QueueModel(0.1, 1.0, Heavy(1.0, 1.5, 1.5))
    with pytest.raises(SecondOrderUnavailable):
        asy.theorem1_expansion(bad)
    with pytest.raises(SecondOrderUnavailable):
        asy.tail_Tkappa_2nd(bad, 10.0)


def test_tail_Lmu_asym_examples(canonical):
    assert asy.tail_Lmu_asym(canonical, 100, 1).value == pytest.approx(1e-4, rel=1e-14)
    assert asy.tail_Lmu_asym(canonical, 100, 2).value == pytest.approx(1e-4 + 8 / 3 * 1e-6, rel=1e-14)
    assert asy.tail_Lmu_asym(canonical, 1, 1).value == pytest.approx(1.0)
    assert asy.tail_Lmu_asym(canonical, 100, 2).provenance == "asymptotic-2"
    with pytest.raises(DomainError):
        asy.tail_Lmu_asym(canonical, 0)
    with pytest.raises(InvalidParameter):
        asy.tail_Lmu_asym(canonical, 10, 3)


@pytest.mark.parametrize("j", [10, 123, 5000])
def test_order_two_minus_order_one_is_the_second_term(canonical, j):
    e = asy.theorem1_expansion(canonical)
    d = asy.tail_Lmu_asym(canonical, j, 2).value - asy.tail_Lmu_asym(canonical, j, 1).value
    assert d == pytest.approx(e.c2 * j**e.e2, rel=1e-9)


def test_two_term_expansion_with_log_factor():
    l0 = SlowlyVarying("logpow", 1.0)
    e = asy.TwoTermExpansion(2.0, -2.0, 1.0, -3.0, c2_l0=3.0, l0=l0)
    x = math.e**2
    assert e(x) == pytest.approx(2 * x**-2 + (1 + 3 * 2) * x**-3)
    f = asy.TwoTermExpansion(2.0, -2.0, 1.5, -2.5, l0_in_second=True, l0=l0)
    assert f.second(x) == pytest.approx(1.5 * 2 * x**-2.5)


def test_Ttau_leading_term(canonical):
    for t in (10.0, 1e3):
        p = canonical.service.tail_params()
        assert asy.tail_Ttau_asym(canonical, t).value == pytest.approx(2 / 3 * float(p.tail(t)))
    # (16/3) t^-3 once the r2 part is negligible
    assert asy.tail_Ttau_asym(canonical, 1e6).value * 1e18 == pytest.approx(16 / 3, rel=1e-5)
    assert asy.tail_Ttau_asym(QueueModel(0.5, math.inf, Burr(2, 3, 1)), 5.0).value == 0.0


def test_Tkappa_example(canonical):
    t = 100.0
    first = (8 * t**-2 / 2 - 48 * t**-3 / 3) / 0.5
    second = 0.5 * 4 / 0.25 * float(canonical.service.tail(t))
    assert asy.tail_Tkappa_2nd(canonical, t).value == pytest.approx(first + second, rel=1e-14)


def test_Ttheta_is_rho_times_Tkappa_to_leading_order(canonical):
    # the leading terms agree; the t^-3 coefficients differ
    for t in (1e2, 1e3, 1e4):
        diff = asy.tail_Ttheta_2nd(canonical, t).value - 0.5 * asy.tail_Tkappa_2nd(canonical, t).value
        assert abs(diff) * t**2 < 5 / t


def test_Ttheta_leading_value(canonical):
    t = 100.0
    expected = 4e-4 + (0.25 * 4 * 8 / 0.25 + 0.5 * -48 / (3 * 0.5)) * t**-3
    assert asy.tail_Ttheta_2nd(canonical, t).value == pytest.approx(expected, rel=1e-14)


def test_Ttheta_h_greater_than_one_has_no_r2_term():
    d = Burr(2.0, 1.5, 2.0)
    m = QueueModel(0.2, 1.0, d)
    p = d.tail_params()
    t = 50.0
    one = 1 - m.rho
    expected = m.lam * p.r1 / ((p.a - 1) * one) * t ** (1 - p.a) + m.lam**2 * m.beta2 * p.r1 / one**2 * t**-p.a
    assert asy.tail_Ttheta_2nd(m, t).value == pytest.approx(expected, rel=1e-14)


def test_Tsum_example_and_bracket_identity(canonical):
    assert asy.tail_Tsum_2nd(canonical, 100.0).value == pytest.approx(4e-4 + 88 / 3 * 1e-6, rel=1e-13)
    p = canonical.service.tail_params()
    for corrected, k in ((False, 4), (True, 2)):
        bracket = asy.delta_T(canonical, 1.0, corrected)
        thm = asy.theorem1_expansion(canonical, corrected).c2 / canonical.lam**p.a
        assert thm == pytest.approx(bracket + (p.a - k) * p.r1 / (2 * (1 - canonical.rho)), rel=1e-13)


def test_Tsum_without_retrials_loses_retrial_term():
    a = asy.delta_T(QueueModel(0.5, 1.0, Burr(2, 3, 1)), 1.0)
    b = asy.delta_T(QueueModel(0.5, math.inf, Burr(2, 3, 1)), 1.0)
    assert a - b == pytest.approx(16 / 3)


@pytest.mark.parametrize(
    "model",
    [
        QueueModel(0.5, 1.0, Burr(2, 3, 1)),
        QueueModel(0.3, 2.0, HallWeiss(3.5, -1.0)),
        QueueModel(0.3, 1.0, StudentT(4.0)),
    ],
    ids=["burr", "hallweiss", "studentt"],
)
def test_expansions_positive_and_decreasing(model):
    t = np.geomspace(10, 1e5, 40)
    for f in (asy.tail_Ttau_asym, asy.tail_Ttheta_2nd, asy.tail_Tsum_2nd):
        v = np.array([f(model, x).value for x in t])
        assert np.all(v > 0) and np.all(np.diff(v) < 0)


def _Tkappa_renewal_tail(h=0.01, T=1000.0):
    """P{T_kappa > t} for the canonical model from the renewal equation
    G(t) = Fe_bar(t) + rho int_0^t G(t - x) dFe(x), solved by Neumann series."""
    rho = 0.5
    n = int(T / h) + 1
    t = np.arange(n) * h
    fe_bar = lambda x: 4 / (2 + x) ** 2
    edges = np.concatenate([[0.0], (np.arange(n) + 0.5) * h])
    mass = fe_bar(edges[:-1]) - fe_bar(edges[1:])
    G = fe_bar(t)
    term = G.copy()
    for _ in range(400):
        term = rho * fftconvolve(term, mass)[:n]
        G += term
        if term.max() < 1e-17:
            break
    return lambda x: G[int(round(x / h))]


def test_Tkappa_expansion_against_renewal_oracle(canonical):
    oracle = _Tkappa_renewal_tail()
    rel = [abs(asy.tail_Tkappa_2nd(canonical, t).value / oracle(t) - 1) for t in (50, 100, 200, 400, 800)]
    # the remainder is o(tail(t)) relative to the second term, so relative error decreases
    assert all(b < a for a, b in zip(rel[:-1], rel[1:]))
    assert rel[-2] < 5e-3 and rel[-1] < 1e-3
    # at t = 50 the two-term value is still about 5% below the exact tail
    assert 0.03 < rel[0] < 0.07


def test_gamma_ratio_examples():
    assert asy.gamma_ratio(5, 1) == pytest.approx(0.25, rel=1e-14)
    assert asy.gamma_ratio(5, 1, "asym2") == pytest.approx(0.24, rel=1e-14)
    with pytest.raises(DomainError):
        asy.gamma_ratio(1.0, 1.0)
    with pytest.raises(DomainError):
        asy.gamma_ratio(5.0, 0.0)
    with pytest.raises(InvalidParameter):
        asy.gamma_ratio(5.0, 1.0, "other")


def test_gamma_ratio_remainder_is_third_order():
    err = lambda x: abs(asy.gamma_ratio(x, 1.0, "asym2") - asy.gamma_ratio(x, 1.0))
    assert err(100.0) / err(200.0) == pytest.approx(8.0, rel=0.05)


@pytest.mark.parametrize("d", [0.25, 1.0, 2.0, 3.0])
@pytest.mark.parametrize("x", [50.0, 80.0, 150.0, 400.0])
def test_gamma_ratio_envelope(d, x):
    exact = asy.gamma_ratio(x, d)
    assert abs(asy.gamma_ratio(x, d, "asym2") - exact) / exact <= 2 * (d + 1) * (d + 2) / x**2


def test_mixed_poisson_power_tail_examples():
    assert asy.mixed_poisson_power_tail(1.0, 1.0, 9) == pytest.approx(0.1, rel=1e-14)
    # lam^d (j^-d + d(d-3)/2 j^(-d-1)) at j = 9, d = 1
    assert asy.mixed_poisson_power_tail(1.0, 1.0, 9, "asym2") == pytest.approx(1 / 9 - 1 / 81, rel=1e-14)
    with pytest.raises(DomainError):
        asy.mixed_poisson_power_tail(1.0, 3.0, 0)


@pytest.mark.parametrize("lam", [0.5, 2.0])
@pytest.mark.parametrize("d", [0.5, 2.5])
@pytest.mark.parametrize("j", [3, 40])
def test_mixed_poisson_power_tail_against_quadrature(lam, d, j):
    def f(t):
        return lam * math.exp(-lam * t + (j + 1) * math.log(lam * t) - math.lgamma(j + 2)) * t**-d

    quad = integrate.quad(f, 0, np.inf, epsabs=0, epsrel=1e-12, limit=400, points=None)[0]
    assert asy.mixed_poisson_power_tail(lam, d, j) == pytest.approx(quad, rel=1e-8)


def test_poisson_count_tail_second_order_factor():
    # the count tail P{N_T > j} = int lam Pois(j; lam t) t^-d dt equals
    # lam^d Gamma(j+1-d)/Gamma(j+1), whose second-order factor is d(d-1)/2
    lam, d = 1.0, 2.0
    for j in (200, 400):
        exact = lam**d * asy.gamma_ratio(j + 1.0, d)
        two_term = lam**d * (j**-d + d * (d - 1) / 2 * j ** (-d - 1))
        assert abs(exact - two_term) / exact < 5 / j**2


def test_slowly_varying_mixture_tail_examples():
    assert asy.slowly_varying_mixture_tail(1.0, 2.0, "const:1", 50) == pytest.approx(50**-2.0)
    assert asy.slowly_varying_mixture_tail(1.0, 2.0, "logpow:1", math.e**2) == pytest.approx(2 * math.e**-4)
    with pytest.raises(DomainError):
        asy.slowly_varying_mixture_tail(1.0, 2.0, "const:1", 0)


def test_slowly_varying_mixture_tail_trend():
    lam, d = 1.0, 2.0

    def logweight(t):
        if t <= 1.0:
            return -math.inf
        return math.log(lam) - d * math.log(t) + math.log(math.log(t))

    ratios = []
    for j in (100, 1000, 10000):
        quad = _poisson_mixture(lam, j, logweight, (1.0,))
        ratios.append(quad / asy.slowly_varying_mixture_tail(lam, d, "logpow:1", j))
    dev = [abs(r - 1) for r in ratios]
    assert dev[0] > dev[1] > dev[2]
    assert dev[2] < 0.02


def test_corrected_constant_matches_exact_series(canonical):
    """Third-order residual check: (exact - c1 j^-2) j^3 -> corrected c2."""
    series = pmf_L_mu(canonical, 4096)
    corrected = asy.theorem1_expansion(canonical, corrected=True)
    standard = asy.theorem1_expansion(canonical)
    e_corr = []
    for j in (1000, 2000):
        exact = tail_from_pmf(series, j).value
        resid = (exact - corrected.first(j)) * j**3
        assert resid == pytest.approx(corrected.c2, rel=0.03)
        assert abs(resid - standard.c2) > 1.0
        e_corr.append(abs(exact - corrected(j)) / exact)
    # with the right constant the relative error falls faster than 1/j
    assert e_corr[1] / e_corr[0] < 0.35


def test_corrected_constant_without_retrials():
    m = QueueModel(0.5, math.inf, Burr(2, 3, 1))
    series = pmf_L_infinity(m, 4096)
    c = asy.theorem1_expansion(m, corrected=True)
    assert c.c2 == pytest.approx(5.0)
    resid = (tail_from_pmf(series, 2000).value - c.first(2000)) * 2000**3
    assert resid == pytest.approx(5.0, rel=0.03)
