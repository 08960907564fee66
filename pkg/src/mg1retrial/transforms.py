"""Transforms of the M/G/1 retrial queue and exact PGF coefficient extraction.

Notation follows the usual retrial-queue conventions: ``beta`` is the
service LST, ``beta_e`` the LST of its equilibrium law, ``kappa`` the LST of
the geometric compound T_kappa, ``theta = 1 - rho + rho*kappa`` and
``tau(s) = exp(-psi * int_0^s kappa)``.

The stationary number in system satisfies L_mu = L_inf + R_mu in law, with

    E z^L_inf = (1-rho)(1-z) B(z) / (B(z) - z),
    E z^R_mu  = exp{(lam/mu) int_1^z (1 - B(u)) / (B(u) - u) du},

where B(z) = beta(lam - lam z) is the PGF of Poisson arrivals during one
service.  Writing Bbar(z) = sum_n P{N_beta > n} z^n we have
(1 - B)/(1 - z) = Bbar and (B - z)/(1 - z) = 1 - Bbar, which removes the
common root at z = 1 from both expressions.  All series below are built from
those cancelled forms, so no coefficient is obtained by subtracting nearly
equal numbers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import integrate
from scipy.special import gammaln

from .dist import ServiceModel
from .errors import UnstableModel, InvalidParameter
from .series import CoefficientSeries, check_index

QUAD_OPTS = dict(epsabs=0.0, epsrel=1e-13, limit=400)


@dataclass(frozen=True)
class QueueModel:
    """Arrival rate ``lam``, retrial rate ``mu`` (``math.inf`` for no retrials)
    and the service law.  Construction fails unless rho = lam * beta1 < 1."""

    lam: float
    mu: float
    service: ServiceModel

    def __post_init__(self):
        if not self.lam > 0:
            raise InvalidParameter("arrival rate must be positive")
        if not self.mu > 0:
            raise InvalidParameter("retrial rate must be positive (or inf)")
        if not self.rho < 1:
            raise UnstableModel(
                f"rho = lam*beta1 = {self.rho:.6g} >= 1; the retrial queue is "
                "stable if and only if rho < 1"
            )

    @property
    def beta1(self) -> float:
        return float(self.service.moments()[0])

    @property
    def beta2(self) -> float:
        return float(self.service.moments()[1])

    @property
    def rho(self) -> float:
        return self.lam * self.beta1

    @property
    def retrials(self) -> bool:
        return math.isfinite(self.mu)

    @property
    def psi(self) -> float:
        if not self.retrials:
            return 0.0
        return self.rho / (self.mu * (1.0 - self.rho))

    @property
    def c_kappa(self) -> float:
        a = self.service.tail_params().a
        return 1.0 / ((1.0 - self.rho) * (a - 1.0) * self.beta1)

    def describe(self) -> dict:
        return {
            "service": self.service.spec_string(),
            "lambda": self.lam,
            "mu": "inf" if not self.retrials else self.mu,
        }


@dataclass(frozen=True)
class TailEstimate:
    """A tail probability together with where it came from.

    ``provenance`` is one of ``asymptotic-1``, ``asymptotic-2``,
    ``exact-series`` or ``simulated``.  ``half_width`` is the 95% confidence
    half-width of simulated values; ``uncertainty`` is the estimated
    numerical error of series values.
    """

    value: float
    provenance: str
    half_width: float | None = None
    uncertainty: float | None = None
    truncation_mass: float | None = None

    def __float__(self):
        return float(self.value)


# ---------------------------------------------------------------------------
# Laplace-Stieltjes transforms


def lst_equilibrium(model: QueueModel, s: float) -> float:
    if s == 0:
        return 1.0
    return model.service.laplace_tail(s) / model.beta1


def lst_beta(model: QueueModel, s: float) -> float:
    """beta(s) = 1 - s * int exp(-st) tail(t) dt."""
    if s == 0:
        return 1.0
    return 1.0 - s * model.service.laplace_tail(s)


def lst_kappa(model: QueueModel, s: float) -> float:
    """LST of the geometric compound of equilibrium service times."""
    rho = model.rho
    be = lst_equilibrium(model, s)
    return (1.0 - rho) * be / (1.0 - rho * be)


def lst_theta(model: QueueModel, s: float) -> float:
    return 1.0 - model.rho + model.rho * lst_kappa(model, s)


def integrated_kappa(model: QueueModel, s: float) -> float:
    if s == 0:
        return 0.0
    return integrate.quad(lambda u: lst_kappa(model, u), 0.0, s, **QUAD_OPTS)[0]


def lst_tau(model: QueueModel, s: float) -> float:
    if s == 0 or not model.retrials:
        return 1.0
    return math.exp(-model.psi * integrated_kappa(model, s))


# ---------------------------------------------------------------------------
# mixed Poisson coefficients


def _poisson_mixture(lam: float, n: int, logweight, breakpoints=()) -> float:
    """int_0^inf Pois(n; lam t) * exp(logweight(t)) dt, kernel in log space."""
    lg = gammaln(n + 1)
    lnlam = math.log(lam)

    def f(t):
        if t <= 0.0:
            return math.exp(logweight(0.0)) if n == 0 else 0.0
        x = n * (lnlam + math.log(t)) - lam * t - lg + logweight(t)
        return math.exp(x) if x > -745.0 else 0.0

    mode = max(n, 1) / lam
    sd = math.sqrt(max(n, 1)) / lam
    pts = sorted({0.0, max(0.0, mode - 12 * sd), mode, mode + 12 * sd, *breakpoints})
    total = 0.0
    for lo, hi in zip(pts[:-1], pts[1:]):
        total += integrate.quad(f, lo, hi, **QUAD_OPTS)[0]
    total += integrate.quad(f, pts[-1], np.inf, **QUAD_OPTS)[0]
    return total


_COUNT_CACHE: dict = {}


def _count_arrays(lam: float, dist, order: int) -> tuple[np.ndarray, np.ndarray]:
    """pmf and tail of N_T for n = 0..order, cached per (dist, lam)."""
    key = (dist, lam)
    pmf, tail = _COUNT_CACHE.get(key, (np.empty(0), np.empty(0)))
    if len(pmf) <= order:
        bps = tuple(getattr(dist, "breakpoints", ()))
        scalar_pdf = getattr(dist, "scalar_logpdf", None)
        scalar_sf = getattr(dist, "scalar_logsf", None)
        logpdf = scalar_pdf or (lambda t: float(dist.logpdf(t)))
        base_sf = scalar_sf or (lambda t: float(dist.logsf(t)))
        lnlam = math.log(lam)
        logsf = lambda t: base_sf(t) + lnlam
        start = len(pmf)
        new_pmf = [_poisson_mixture(lam, n, logpdf, bps) for n in range(start, order + 1)]
        new_tail = [_poisson_mixture(lam, n, logsf, bps) for n in range(start, order + 1)]
        pmf = np.concatenate([pmf, new_pmf])
        tail = np.concatenate([tail, new_tail])
        try:
            _COUNT_CACHE[key] = (pmf, tail)
        except TypeError:  # unhashable duck-typed distribution
            pass
    return pmf[: order + 1], tail[: order + 1]


def mixed_poisson_coeffs(lam: float, dist, order: int) -> CoefficientSeries:
    """pmf of N_T, the rate-``lam`` Poisson count over an independent time T.

    ``dist`` needs ``logpdf`` and ``logsf`` (any :class:`ServiceModel` does).
    """
    if order < 0:
        raise InvalidParameter("order must be nonnegative")
    return CoefficientSeries(_count_arrays(lam, dist, order)[0])


def mixed_poisson_tail(lam: float, dist, order: int) -> np.ndarray:
    """P{N_T > j} for j = 0..order via the tail integral

        P{N_T > j} = int_0^inf lam exp(-lam t) (lam t)^j / j! * P{T > t} dt.
    """
    return _count_arrays(lam, dist, order)[1].copy()


# ---------------------------------------------------------------------------
# stationary PGF series


def _service_series(model: QueueModel, order: int):
    B, Bbar = _count_arrays(model.lam, model.service, order)
    return CoefficientSeries(B), CoefficientSeries(Bbar)


def pmf_L_infinity(model: QueueModel, order: int) -> CoefficientSeries:
    """Number in the ordinary (non-retrial) M/G/1 system.

    (1-rho)(1-z)B / (B - z) evaluated as (1-rho) B / (1 - Bbar).
    """
    B, Bbar = _service_series(model, order)
    return (1.0 - model.rho) * B / (1.0 - Bbar)


def rmu_integrand(model: QueueModel, u: float) -> float:
    """(1 - B(u)) / (B(u) - u) on [0, 1], evaluated without cancellation.

    Dividing numerator and denominator by 1 - u gives
    rho*beta_e(s) / (1 - rho*beta_e(s)) with s = lam (1 - u); the value at
    u = 1 is the removable-singularity limit rho / (1 - rho).
    """
    x = model.rho * lst_equilibrium(model, model.lam * (1.0 - u))
    return x / (1.0 - x)


def rmu_constant(model: QueueModel) -> float:
    """G(1) = int_0^1 of :func:`rmu_integrand`."""
    return integrate.quad(lambda u: rmu_integrand(model, u), 0.0, 1.0, **QUAD_OPTS)[0]


def pmf_R_mu(model: QueueModel, order: int) -> CoefficientSeries:
    """Orbit size seen while the server is idle."""
    if not model.retrials:
        return CoefficientSeries(np.eye(1, order + 1)[0])
    _, Bbar = _service_series(model, order)
    g = Bbar / (1.0 - Bbar)
    exponent = g.integrate(constant=-rmu_constant(model)) * (model.lam / model.mu)
    return exponent.exp()


def pmf_L_mu(model: QueueModel, order: int) -> CoefficientSeries:
    """Total number in the retrial system, the convolution L_inf * R_mu."""
    linf = pmf_L_infinity(model, order)
    if not model.retrials:
        return linf
    return linf * pmf_R_mu(model, order)


def tail_from_pmf(series: CoefficientSeries, j: int) -> TailEstimate:
    """P{X > j} from a truncated pmf series.

    ``truncation_mass`` is the fitted power-tail mass beyond the truncation
    order; ``uncertainty`` is the normalisation defect
    |1 - sum_{n<=N} c_n - truncation_mass|, which bounds the error that
    coefficient inaccuracies leave in 1 - sum_{n<=j} c_n.
    """
    check_index(series, j)
    cdf = series.cdf()
    mass, _ = series.tail_mass_estimate()
    defect = abs(1.0 - cdf[-1] - mass) if math.isfinite(mass) else math.inf
    value = min(1.0, max(0.0, 1.0 - float(cdf[j])))
    return TailEstimate(
        value=value,
        provenance="exact-series",
        uncertainty=float(max(defect, 1e-16 * len(series))),
        truncation_mass=float(mass),
    )
