import math

import numpy as np
import pytest
from scipy import integrate, stats

from mg1retrial.dist import Burr, Exponential, HallWeiss, StudentT
from mg1retrial.errors import IndexBeyondTruncation, InvalidParameter, UnstableModel
from mg1retrial.transforms import (
    QueueModel,
    TailEstimate,
    lst_beta,
    lst_equilibrium,
    lst_kappa,
    lst_tau,
    lst_theta,
    mixed_poisson_coeffs,
    mixed_poisson_tail,
    pmf_L_infinity,
    pmf_L_mu,
    pmf_R_mu,
    rmu_constant,
    rmu_integrand,
    tail_from_pmf,
)


def test_stability_condition_enforced():
    with pytest.raises(UnstableModel, match="stable if and only if rho < 1"):
        QueueModel(1.0, 1.0, Burr(2, 3, 1))
    with pytest.raises(InvalidParameter):
        QueueModel(0.0, 1.0, Burr(2, 3, 1))
    with pytest.raises(InvalidParameter):
        QueueModel(0.5, -1.0, Burr(2, 3, 1))


def test_model_constants(canonical):
    assert canonical.rho == pytest.approx(0.5)
    assert canonical.psi == pytest.approx(1.0)
    assert canonical.c_kappa == pytest.approx(1.0)
    assert QueueModel(0.5, math.inf, Burr(2, 3, 1)).psi == 0.0
    assert canonical.describe()["mu"] == 1.0


def test_exponential_transforms_closed_form():
    nu, lam, mu = 1.0, 0.5, 0.5
    m = QueueModel(lam, mu, Exponential(nu))
    rho = m.rho
    for s in (1e-6, 0.1, 1.0, 4.0):
        assert lst_beta(m, s) == pytest.approx(nu / (nu + s), rel=1e-12)
        assert lst_equilibrium(m, s) == pytest.approx(nu / (nu + s), rel=1e-12)
        kappa = (1 - rho) * nu / (nu * (1 - rho) + s)
        assert lst_kappa(m, s) == pytest.approx(kappa, rel=1e-12)
        assert lst_theta(m, s) == pytest.approx(1 - rho + rho * kappa, rel=1e-12)
        tau = (1 + s / (nu * (1 - rho))) ** (-m.psi * nu * (1 - rho))
        assert lst_tau(m, s) == pytest.approx(tau, rel=1e-10)
    assert lst_tau(m, 0.0) == 1.0


def test_lst_of_lomax_against_direct_quadrature(canonical):
    d = canonical.service
    for s in (0.05, 1.0):
        direct = integrate.quad(lambda t: math.exp(-s * t) * d.pdf(t), 0, np.inf, limit=200)[0]
        assert lst_beta(canonical, s) == pytest.approx(direct, rel=1e-9)


def test_tau_without_retrials_is_one():
    assert lst_tau(QueueModel(0.5, math.inf, Burr(2, 3, 1)), 2.0) == 1.0


def test_mixed_poisson_exponential_is_geometric():
    lam, nu = 0.5, 1.0
    c = mixed_poisson_coeffs(lam, Exponential(nu), 40).coeffs
    q = lam / (lam + nu)
    n = np.arange(41)
    assert np.allclose(c, (1 - q) * q**n, rtol=1e-12, atol=1e-17)
    assert np.allclose(mixed_poisson_tail(lam, Exponential(nu), 40), q ** (n + 1), rtol=1e-11)


@pytest.mark.parametrize("d", [Burr(2, 3, 1), HallWeiss(3.5, -1.0), StudentT(4.0)], ids=str)
def test_mixed_poisson_tail_consistent_with_pmf(d):
    lam = 0.3
    pmf = mixed_poisson_coeffs(lam, d, 200).coeffs
    tail = mixed_poisson_tail(lam, d, 200)
    assert np.allclose(1 - np.cumsum(pmf), tail, rtol=0, atol=5e-13)
    # mean of N_T is lam * E T
    n = np.arange(201)
    assert np.sum(tail) == pytest.approx(lam * d.mean, rel=1e-3)


def test_mixed_poisson_negative_order():
    with pytest.raises(InvalidParameter):
        mixed_poisson_coeffs(0.5, Burr(2, 3, 1), -1)


def test_mm1_retrial_closed_forms():
    lam = 0.5
    for mu in (0.25, 0.5, 2.0):
        m = QueueModel(lam, mu, Exponential(1.0))
        rho = m.rho
        n = np.arange(51)
        assert np.max(np.abs(pmf_L_infinity(m, 60).coeffs[:51] - (1 - rho) * rho**n)) < 1e-12
        negbin = stats.nbinom.pmf(n, lam / mu, 1 - rho)
        assert np.max(np.abs(pmf_R_mu(m, 60).coeffs[:51] - negbin)) < 1e-12
        lmu = stats.nbinom.pmf(n, 1 + lam / mu, 1 - rho)
        assert np.max(np.abs(pmf_L_mu(m, 60).coeffs[:51] - lmu)) < 1e-12


def test_rmu_constant_exponential_closed_form():
    lam, nu = 0.5, 1.0
    m = QueueModel(lam, 0.5, Exponential(nu))
    rho = m.rho
    exact = rho * nu / lam * math.log((nu * (1 - rho) + lam) / (nu * (1 - rho)))
    assert rmu_constant(m) == pytest.approx(exact, rel=1e-12)


def test_rmu_integrand_removable_singularity(canonical):
    assert rmu_integrand(canonical, 1.0) == pytest.approx(1.0)  # rho / (1 - rho)
    assert rmu_integrand(canonical, 1 - 1e-9) == pytest.approx(1.0, rel=1e-6)


def test_idle_probability_of_ordinary_queue(canonical):
    # P{L_inf = 0} = 1 - rho for every M/G/1 queue
    assert pmf_L_infinity(canonical, 16)[0] == pytest.approx(0.5, abs=1e-14)
    hw = QueueModel(0.4, 1.0, HallWeiss(3.5, -1.0))
    assert pmf_L_infinity(hw, 16)[0] == pytest.approx(1 - hw.rho, abs=1e-13)


def test_series_are_proper_pmfs(canonical):
    for f in (pmf_L_infinity, pmf_R_mu, pmf_L_mu):
        s = f(canonical, 1024)
        assert s.is_pmf()
        mass, alpha = s.tail_mass_estimate()
        # the missing mass beyond N is accounted for by the fitted power tail
        # up to the fit's own O(1/N) bias
        assert abs(1 - s.cdf()[-1] - mass) < 0.01 * mass
        assert 2.5 < alpha < 3.5 or f is pmf_R_mu


def test_rmu_normalisation_at_large_order(canonical):
    s = pmf_R_mu(canonical, 4096)
    mass, alpha = s.tail_mass_estimate()
    assert abs(1 - s.cdf()[-1] - mass) < 1e-10
    assert alpha == pytest.approx(4.0, rel=0.05)  # tail j^-3, pmf j^-4


def test_mean_number_in_ordinary_queue():
    # Pollaczek-Khinchine: E L = rho + lam^2 beta2 / (2 (1 - rho)); light tail so the series sum is exact
    m = QueueModel(0.5, math.inf, HallWeiss(5.0, -1.0))
    s = pmf_L_infinity(m, 400)
    mean = np.sum(np.arange(401) * s.coeffs)
    pk = m.rho + m.lam**2 * m.beta2 / (2 * (1 - m.rho))
    assert mean == pytest.approx(pk, rel=1e-6)


def test_no_retrials_reduces_to_ordinary_queue():
    m = QueueModel(0.5, math.inf, Burr(2, 3, 1))
    assert np.array_equal(pmf_R_mu(m, 30).coeffs, np.eye(1, 31)[0])
    assert np.allclose(pmf_L_mu(m, 30).coeffs, pmf_L_infinity(m, 30).coeffs)


def test_large_retrial_rate_approaches_ordinary_queue(canonical):
    fast = QueueModel(0.5, 1e6, Burr(2, 3, 1))
    assert np.max(np.abs(pmf_L_mu(fast, 64).coeffs - pmf_L_infinity(fast, 64).coeffs)) < 1e-5


def test_tail_from_pmf(canonical):
    s = pmf_L_mu(canonical, 1024)
    est = tail_from_pmf(s, 100)
    assert isinstance(est, TailEstimate)
    assert est.provenance == "exact-series"
    assert float(est) == pytest.approx(1 - s.cdf()[100], abs=1e-16)
    assert 0 < est.uncertainty < 1e-4 * est.value
    with pytest.raises(IndexBeyondTruncation):
        tail_from_pmf(s, 1024)
