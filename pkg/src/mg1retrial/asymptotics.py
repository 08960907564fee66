"""Closed-form tail expansions for the retrial queue under a two-term power tail.

The service tail is assumed to be t^-a (r1 + r2 t^-h L0(t)) with a > 2 (a > 1
for the first-order T_tau result).  All evaluators return a
:class:`~mg1retrial.transforms.TailEstimate` tagged ``asymptotic-1`` or
``asymptotic-2``: the values are expansion values, not bounded-error
approximations.

Two sets of second-order coefficients are available for L_mu and for
T_theta + T_beta + T_tau.  The default ("standard") coefficients are the
classical ones.  ``corrected=True`` adds two terms of the same order that the
standard bracket leaves out (see :func:`theorem1_expansion`); the exact
series engine agrees with the corrected constant and not with the standard
one.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from scipy.special import gammaln

from .dist import SlowlyVarying
from .errors import DomainError, InvalidParameter
from .transforms import QueueModel, TailEstimate


class RegimeTag(enum.Enum):
    HEquals1 = "h=1"
    HLess1 = "h<1"
    HGreater1 = "h>1"

    @classmethod
    def from_h(cls, h: float) -> "RegimeTag":
        # h is a modelling parameter, compared exactly
        if h == 1:
            return cls.HEquals1
        return cls.HLess1 if h < 1 else cls.HGreater1


@dataclass(frozen=True)
class TwoTermExpansion:
    """c1 x^e1 + (c2 [L0(x)] + c2_l0 L0(x)) x^e2.

    ``l0_in_second`` means the whole second coefficient is multiplied by
    L0(x) (the h < 1 regime).  For h = 1 only the r2 part carries L0; when L0
    is not constant that part is kept separately in ``c2_l0`` and ``c2`` holds
    the rest, otherwise it is folded into ``c2``.
    """

    c1: float
    e1: float
    c2: float
    e2: float
    l0_in_second: bool = False
    c2_l0: float = 0.0
    l0: SlowlyVarying = SlowlyVarying()

    def __post_init__(self):
        for name in ("c1", "e1", "c2", "e2", "c2_l0"):
            object.__setattr__(self, name, float(getattr(self, name)))

    def first(self, x: float) -> float:
        return self.c1 * x**self.e1

    def second(self, x: float) -> float:
        coef = self.c2 * (self.l0(x) if self.l0_in_second else 1.0)
        coef += self.c2_l0 * self.l0(x) if self.c2_l0 else 0.0
        return coef * x**self.e2

    def __call__(self, x: float, order: int = 2) -> float:
        if order == 1:
            return self.first(x)
        return self.first(x) + self.second(x)


def constants(model: QueueModel) -> tuple[float, float, float]:
    """(rho, psi, c_kappa); psi is 0 when there are no retrials."""
    return model.rho, model.psi, model.c_kappa


def _second_order_params(model: QueueModel):
    return model.service.tail_params().require_second_order()


def _h_ge_1_bracket(model: QueueModel, standard: bool) -> tuple[float, float]:
    """Second-order bracket of T_theta + T_beta + T_tau for h >= 1.

    Returns ``(rest, r2_part)``; the r2 part only applies when h = 1 and is
    multiplied by L0.
    """
    p = _second_order_params(model)
    lam, rho, a, r1 = model.lam, model.rho, p.a, p.r1
    one = 1.0 - rho
    retrial = 0.0 if not model.retrials else lam * r1 / (a * model.mu * one**2)
    rest = r1 + retrial + lam**2 * model.beta2 * r1 / one**2
    if not standard:
        # mean shift: T_beta + T_tau moves the leading T_theta term by its
        # mean times the T_theta density, lam r1 / (1 - rho) t^-a
        rest += (model.beta1 + model.psi) * lam * r1 / one
    r2_part = lam * p.r2 / (a * one)
    return rest, r2_part


def _fold_l0(rest: float, r2_part: float, l0: SlowlyVarying, scale: float):
    """Return (c2, c2_l0) with a constant L0 folded into c2."""
    if l0.kind == "const":
        return (rest + r2_part * l0.value) * scale, 0.0
    return rest * scale, r2_part * scale


def theorem1_expansion(model: QueueModel, corrected: bool = False) -> TwoTermExpansion:
    """Two-term expansion of P{L_mu > j} in powers of j.

    Leading term lam^a r1 / ((a-1)(1-rho)) j^(1-a).  For h >= 1 the second
    term is lam^a j^-a times

        (a-4) r1 / (2(1-rho)) + r1 + lam r1 / (a mu (1-rho)^2)
            + lam^2 beta2 r1 / (1-rho)^2 [+ lam r2 L0(j) / (a(1-rho)) if h = 1]

    in the standard form.  With ``corrected=True`` two changes are made:

    * the mixed-Poisson step uses P{N_T > j} = int lam Pois(j; lam t) P{T>t} dt,
      whose second-order factor is d(d-1)/2 rather than d(d-3)/2, so
      (a-4) becomes (a-2);
    * the term (beta1 + psi) lam r1 / (1-rho), the mean of T_beta + T_tau
      times the density of the dominant T_theta term, is added.

    For 0 < h < 1 both corrections are of lower order than the r2 term and
    the two variants coincide.
    """
    p = _second_order_params(model)
    lam, rho, a = model.lam, model.rho, p.a
    one = 1.0 - rho
    c1 = lam**a * p.r1 / ((a - 1) * one)
    regime = RegimeTag.from_h(p.h)
    if regime is RegimeTag.HLess1:
        c2 = lam ** (a + p.h) * p.r2 / ((a + p.h - 1) * one)
        return TwoTermExpansion(c1, 1 - a, c2, 1 - a - p.h, l0_in_second=True, l0=p.l0)
    rest, r2_part = _h_ge_1_bracket(model, standard=not corrected)
    poisson = (a - 2) if corrected else (a - 4)
    rest += poisson * p.r1 / (2 * one)
    if regime is RegimeTag.HGreater1:
        r2_part = 0.0
    c2, c2_l0 = _fold_l0(rest, r2_part, p.l0, lam**a)
    return TwoTermExpansion(c1, 1 - a, c2, -a, c2_l0=c2_l0, l0=p.l0)


def _order_tag(order: int) -> str:
    if order not in (1, 2):
        raise InvalidParameter("order must be 1 or 2")
    return f"asymptotic-{order}"


def tail_Lmu_asym(model: QueueModel, j: int, order: int = 2, corrected: bool = False) -> TailEstimate:
    """P{L_mu > j} from the first (order 1) or both (order 2) terms."""
    tag = _order_tag(order)
    if j < 1:
        raise DomainError("j must be at least 1")
    exp = theorem1_expansion(model, corrected=corrected)
    return TailEstimate(float(exp(float(j), order)), tag)


def tail_Ttau_asym(model: QueueModel, t: float) -> TailEstimate:
    """First-order tail of T_tau: (1 - 1/a) c_kappa psi t^-a L(t)."""
    p = model.service.tail_params()
    if not model.retrials:
        return TailEstimate(0.0, "asymptotic-1")
    value = (1 - 1 / p.a) * model.c_kappa * model.psi * p.tail(t)
    return TailEstimate(float(value), "asymptotic-1")


def _integrated_tail_two_term(p, t: float) -> float:
    """r1 t^(1-a)/(a-1) + r2 t^(1-a-h) L0(t)/(a+h-1)."""
    return p.r1 * t ** (1 - p.a) / (p.a - 1) + p.r2 * t ** (1 - p.a - p.h) * p.l0(t) / (
        p.a + p.h - 1
    )


def tail_Tkappa_2nd(model: QueueModel, t: float) -> TailEstimate:
    """Two-term tail of the geometric compound T_kappa.

    (1/((1-rho) beta1)) int_t^inf tail + rho beta2 / ((1-rho)^2 beta1^2) tail(t),
    with the integral replaced by its two-term power expansion.
    """
    p = _second_order_params(model)
    rho, b1 = model.rho, model.beta1
    first = _integrated_tail_two_term(p, t) / ((1 - rho) * b1)
    second = rho * model.beta2 / ((1 - rho) ** 2 * b1**2) * float(model.service.tail(t))
    return TailEstimate(float(first + second), "asymptotic-2")


def _theta_leading(model: QueueModel, p) -> float:
    return model.lam * p.r1 / ((p.a - 1) * (1 - model.rho))


def tail_Ttheta_2nd(model: QueueModel, t: float) -> TailEstimate:
    """Two-term tail of T_theta in the three h regimes."""
    p = _second_order_params(model)
    lam, one, a = model.lam, 1 - model.rho, p.a
    value = _theta_leading(model, p) * t ** (1 - a)
    regime = RegimeTag.from_h(p.h)
    if regime is RegimeTag.HLess1:
        value += lam * p.r2 / ((a + p.h - 1) * one) * t ** (1 - a - p.h) * p.l0(t)
    else:
        coef = lam**2 * model.beta2 * p.r1 / one**2
        if regime is RegimeTag.HEquals1:
            coef += lam * p.r2 / (a * one) * p.l0(t)
        value += coef * t ** (-a)
    return TailEstimate(float(value), "asymptotic-2")


def delta_T(model: QueueModel, t: float, corrected: bool = False) -> float:
    """Second-order part of P{T_theta + T_beta + T_tau > t}."""
    p = _second_order_params(model)
    a = p.a
    regime = RegimeTag.from_h(p.h)
    if regime is RegimeTag.HLess1:
        return model.lam * p.r2 / ((a + p.h - 1) * (1 - model.rho)) * t ** (1 - a - p.h) * p.l0(t)
    rest, r2_part = _h_ge_1_bracket(model, standard=not corrected)
    if regime is RegimeTag.HEquals1:
        rest += r2_part * p.l0(t)
    return float(rest * t ** (-a))


def tail_Tsum_2nd(model: QueueModel, t: float, corrected: bool = False) -> TailEstimate:
    """Two-term tail of T_theta + T_beta + T_tau (the time whose Poisson
    count is L_mu)."""
    p = _second_order_params(model)
    value = _theta_leading(model, p) * t ** (1 - p.a) + delta_T(model, t, corrected)
    return TailEstimate(float(value), "asymptotic-2")


# ---------------------------------------------------------------------------
# Gamma ratios and mixed Poisson power tails


def gamma_ratio(x: float, d: float, mode: str = "exact") -> float:
    """Gamma(x - d) / Gamma(x), exactly or as x^-d + d(d+1)/2 x^(-d-1)."""
    if not d > 0:
        raise DomainError("d must be positive")
    if not x > d:
        raise DomainError(f"need x > d, got x={x}, d={d}")
    if mode == "exact":
        return math.exp(gammaln(x - d) - gammaln(x))
    if mode == "asym2":
        return x ** (-d) + 0.5 * d * (d + 1) * x ** (-d - 1)
    raise InvalidParameter(f"unknown mode {mode!r}")


def mixed_poisson_power_tail(lam: float, d: float, j: int, mode: str = "exact") -> float:
    """int_0^inf lam e^(-lam t) (lam t)^(j+1)/(j+1)! t^-d dt.

    The exact value is lam^d Gamma(j+2-d) / Gamma(j+2); ``asym2`` gives
    lam^d (j^-d + d(d-3)/2 j^(-d-1)).  Note that the kernel has the Poisson
    index j + 1, so for a tail t^-d this integral is P{N_T > j + 1}; the
    count tail P{N_T > j} itself has second-order factor d(d-1)/2.
    """
    if not lam > 0:
        raise DomainError("lam must be positive")
    if not d > 0:
        raise DomainError("d must be positive")
    if not j + 2 > d:
        raise DomainError(f"need j + 2 > d, got j={j}, d={d}")
    if mode == "exact":
        return lam**d * gamma_ratio(j + 2.0, d)
    if mode == "asym2":
        return lam**d * (j ** (-d) + 0.5 * d * (d - 3) * j ** (-d - 1))
    raise InvalidParameter(f"unknown mode {mode!r}")


def slowly_varying_mixture_tail(lam: float, d: float, l0, j: int) -> float:
    """First-order P{N_T > j} ~ lam^d j^-d L(j) for P{T > t} ~ t^-d L(t).

    ``l0`` is a :class:`SlowlyVarying` or its text form (``logpow:1``).
    """
    if j < 1:
        raise DomainError("j must be at least 1")
    if isinstance(l0, str):
        l0 = SlowlyVarying.parse(l0)
    return lam**d * j ** (-d) * float(l0(float(j)))
