"""The acceptance suite: nine numbered checks, each with a runtime budget.

Every check returns a :class:`CriterionResult`; :func:`run_criteria` runs a
selection and :func:`format_result` renders the one-line report used by both
``mg1retrial validate`` and the test suite.  Tolerances are fixed here and
are not configurable.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, stats
from scipy.special import gammaln

from . import asymptotics as asy
from .dist import Burr, Exponential
from .series import CoefficientSeries
from .simulator import run_retrial_simulation, sample_T_kappa
from .transforms import (
    QueueModel,
    pmf_L_infinity,
    pmf_L_mu,
    pmf_R_mu,
    tail_from_pmf,
)

SEED = 20240607


def canonical_model(mu: float = 1.0) -> QueueModel:
    """Burr(b=2, v=3, w=1) service (a Lomax law), lam = 0.5, mu = 1."""
    return QueueModel(0.5, mu, Burr(2.0, 3.0, 1.0))


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    detail: str
    runtime: float = 0.0
    budget: float = math.inf
    values: dict = field(default_factory=dict)


def format_result(r: CriterionResult) -> str:
    status = "PASS" if r.passed else "FAIL"
    return (
        f"criterion {r.number} [{status}] {r.title}: {r.detail} "
        f"({r.runtime:.1f}s, budget {r.budget:g}s)"
    )


# ---------------------------------------------------------------------------
# individual checks; each returns (passed, detail, values)


def _mm1_closed_forms():
    worst = 0.0
    lam = 0.5
    for mu in (0.25, 0.5):
        model = QueueModel(lam, mu, Exponential(1.0))
        rho = model.rho
        n = np.arange(51)
        negbin = stats.nbinom.pmf(n, lam / mu, 1.0 - rho)
        geom = (1.0 - rho) * rho**n
        r = pmf_R_mu(model, 64).coeffs[:51]
        linf = pmf_L_infinity(model, 64).coeffs[:51]
        worst = max(worst, np.max(np.abs(r - negbin)), np.max(np.abs(linf - geom)))
    return worst <= 1e-10, f"sup-norm error {worst:.2e} (tol 1e-10)", {"sup_error": worst}


def _decomposition():
    model = canonical_model()
    N = 1024
    direct = np.convolve(pmf_L_infinity(model, N).coeffs, pmf_R_mu(model, N).coeffs)[: N + 1]
    err = float(np.max(np.abs(direct - pmf_L_mu(model, N).coeffs)))
    return err <= 1e-12, f"sup-norm difference {err:.2e} (tol 1e-12)", {"sup_error": err}


def _gamma_ratio():
    ok = True
    worst_env = 0.0
    ratios = []
    for d in (0.5, 1.0, 2.5):
        rel = []
        for x in (50.0, 100.0, 200.0):
            exact = asy.gamma_ratio(x, d, "exact")
            r = abs(asy.gamma_ratio(x, d, "asym2") - exact) / exact
            env = 2 * (d + 1) * (d + 2) / x**2
            worst_env = max(worst_env, r / env)
            ok &= r <= env
            rel.append(r)
        for a, b in zip(rel[:-1], rel[1:]):
            ratios.append(a / b)
    ok &= all(3 <= q <= 5 for q in ratios)
    detail = (
        f"max error/envelope {worst_env:.3f}; shrink factors "
        f"{min(ratios):.3f}..{max(ratios):.3f} (need [3, 5])"
    )
    return ok, detail, {"shrink": ratios, "worst_envelope_fraction": worst_env}


def _poisson_power_quadrature(lam, d, j):
    """int lam e^(-lam t) (lam t)^(j+1)/(j+1)! t^-d dt by adaptive quadrature."""
    lg = gammaln(j + 2)

    def f(t):
        if t <= 0:
            return 0.0
        return math.exp(math.log(lam) + (j + 1) * math.log(lam * t) - lam * t - lg - d * math.log(t))

    mode = (j + 1 - d) / lam
    sd = math.sqrt(j + 1) / lam
    pts = [0.0, max(mode - 10 * sd, mode / 4), mode, mode + 10 * sd]
    total = 0.0
    for lo, hi in zip(pts[:-1], pts[1:]):
        total += integrate.quad(f, lo, hi, epsabs=0, epsrel=1e-12, limit=200)[0]
    total += integrate.quad(f, pts[-1], np.inf, epsabs=0, epsrel=1e-12, limit=200)[0]
    return total


def _mixed_poisson_identity():
    worst = 0.0
    for lam in (0.5, 1.0, 2.0):
        for d in (0.5, 1.5, 2.5):
            for j in (5, 20, 80):
                exact = asy.mixed_poisson_power_tail(lam, d, j, "exact")
                quad = _poisson_power_quadrature(lam, d, j)
                worst = max(worst, abs(quad - exact) / exact)
    return worst <= 1e-8, f"max relative difference {worst:.2e} (tol 1e-8)", {"rel_error": worst}


def refinement_errors(order: int = 4096, js=(500, 1000, 2000), corrected: bool = False):
    """Relative errors of the one- and two-term expansions against the series."""
    model = canonical_model()
    series = pmf_L_mu(model, order)
    exp = asy.theorem1_expansion(model, corrected=corrected)
    rows = []
    for j in js:
        exact = tail_from_pmf(series, j).value
        e1 = abs(exact - exp(j, 1)) / exact
        e2 = abs(exact - exp(j, 2)) / exact
        rows.append((j, exact, e1, e2))
    return exp, rows


def _second_order_refinement():
    exp, rows = refinement_errors()
    target = abs(exp.c2) / exp.c1
    ok_order = all(e2 < e1 for _, _, e1, e2 in rows)
    scaled = [e1 * j for j, _, e1, _ in rows]
    ok_scale = all(abs(s - target) <= 0.3 * target for s in scaled)
    detail = (
        "e2<e1 at all j: " + ("yes" if ok_order else "no")
        + "; e1*j = " + ", ".join(f"{s:.3f}" for s in scaled)
        + f" vs |c2|/c1 = {target:.4f} +/-30%"
    )
    values = {"rows": rows, "e1_times_j": scaled, "target": target}
    return ok_order and ok_scale, detail, values


def _simulator_cross_validation():
    model = canonical_model()
    est = run_retrial_simulation(model, horizon=1e7, warmup=1e6, batches=32, seed=SEED)
    p0, hw = est.idle_probability()
    sim = est.L_mu().pmf
    series = pmf_L_mu(model, 64).coeffs
    k = min(31, len(sim))
    tv = 0.5 * float(np.sum(np.abs(sim[:k] - series[:k])))
    ok_idle = abs(p0 - (1 - model.rho)) <= hw
    detail = (
        f"P{{C=0}} = {p0:.5f} +/- {hw:.5f} vs {1 - model.rho:g}; "
        f"TV(0..30) = {tv:.4f} (tol 0.01)"
    )
    return ok_idle and tv < 0.01, detail, {"idle": p0, "half_width": hw, "tv": tv}


def _Ttau_trend():
    model = canonical_model()
    series = pmf_R_mu(model, 4096)
    js = (50, 100, 200, 400)
    ratios = [
        tail_from_pmf(series, j).value / asy.tail_Ttau_asym(model, j / model.lam).value for j in js
    ]
    dist = [abs(r - 1) for r in ratios]
    monotone = all(b < a for a, b in zip(dist[:-1], dist[1:]))
    ok = monotone and 0.7 <= ratios[-1] <= 1.3
    detail = "ratios " + ", ".join(f"{r:.4f}" for r in ratios) + (
        "; monotone toward 1" if monotone else "; not monotone"
    )
    return ok, detail, {"ratios": ratios}


def _Tkappa_monte_carlo():
    model = canonical_model()
    rng = np.random.default_rng(SEED)
    draws = sample_T_kappa(model, 10**7, rng)
    p = float(np.mean(draws > 50.0))
    se = math.sqrt(p * (1 - p) / len(draws))
    target = asy.tail_Tkappa_2nd(model, 50.0).value
    z = (p - target) / se
    detail = f"empirical {p:.6f} (se {se:.2e}) vs expansion {target:.6f}: {z:+.1f} se (tol 3)"
    return abs(z) <= 3, detail, {"empirical": p, "se": se, "expansion": target, "z": z}


def naive_multiply(a, b):
    n = len(a)
    out = [0.0] * n
    for i in range(n):
        for k in range(n - i):
            out[i + k] += a[i] * b[k]
    return np.array(out)


def naive_divide(a, d):
    """Long division: q_k = (a_k - sum_{i<k} q_i d_{k-i}) / d_0."""
    n = len(a)
    q = []
    for k in range(n):
        s = a[k]
        for i in range(k):
            s -= q[i] * d[k - i]
        q.append(s / d[0])
    return np.array(q)


def naive_exp(f):
    """exp(f0) * sum_k g^k / k! with g = f - f0; exact for a truncated series."""
    n = len(f)
    g = np.array(f, dtype=float)
    g[0] = 0.0
    out = np.zeros(n)
    out[0] = 1.0
    term = out.copy()
    for k in range(1, n):
        term = np.convolve(term, g)[:n] / k
        out = out + term
    return math.exp(f[0]) * out


def _series_oracle():
    rng = np.random.default_rng(SEED)
    N = 32
    worst = 0.0
    scale = 1.0 / (1.0 + np.arange(N)) ** 2
    for _ in range(100):
        a = rng.uniform(-1, 1, N) * scale
        b = rng.uniform(-1, 1, N) * scale
        d = rng.uniform(-0.5, 0.5, N) * scale
        d[0] = rng.uniform(1.0, 2.0)
        A, B, D = CoefficientSeries(a), CoefficientSeries(b), CoefficientSeries(d)
        for got, ref in (
            ((A * B).coeffs, naive_multiply(a, b)),
            ((A / D).coeffs, naive_divide(a, d)),
            (A.exp().coeffs, naive_exp(a)),
        ):
            worst = max(worst, float(np.max(np.abs(got - ref)) / max(1.0, np.max(np.abs(ref)))))
    return worst <= 1e-13, f"max scaled difference {worst:.2e} (tol 1e-13)", {"error": worst}


CRITERIA = {
    1: ("M/M/1 retrial closed forms", 5.0, _mm1_closed_forms),
    2: ("decomposition L_mu = L_inf + R_mu", 30.0, _decomposition),
    3: ("gamma-ratio expansion", 1.0, _gamma_ratio),
    4: ("mixed Poisson power-tail identity", 10.0, _mixed_poisson_identity),
    5: ("second-order refinement for L_mu", 600.0, _second_order_refinement),
    6: ("simulator vs series", 300.0, _simulator_cross_validation),
    7: ("R_mu tail vs T_tau expansion", 600.0, _Ttau_trend),
    8: ("T_kappa expansion vs Monte Carlo", 120.0, _Tkappa_monte_carlo),
    9: ("series arithmetic vs naive oracles", 1.0, _series_oracle),
}


def run_criterion(number: int) -> CriterionResult:
    title, budget, check = CRITERIA[number]
    start = time.perf_counter()
    passed, detail, values = check()
    runtime = time.perf_counter() - start
    if runtime > budget:
        detail += "; over runtime budget"
    return CriterionResult(number, title, bool(passed and runtime <= budget), detail, runtime, budget, values)


def run_criteria(numbers=None, report=None) -> list[CriterionResult]:
    """Run the selected criteria (all by default), calling ``report`` with
    each formatted line as it completes."""
    results = []
    for n in numbers or sorted(CRITERIA):
        r = run_criterion(n)
        if report is not None:
            report(format_result(r))
        results.append(r)
    return results
