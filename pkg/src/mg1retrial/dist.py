"""Service-time distributions.

Three heavy-tailed families whose tails admit a two-term power expansion

    tail(t) = t**-a * (r1 + r2 * t**-h * L0(t)),

plus the exponential law, which is kept as a light-tailed test oracle.
Every model is an immutable dataclass validated at construction.  Sampling
always goes through a caller-owned ``numpy.random.Generator``.
"""
from __future__ import annotations

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special, stats

from .errors import (
    InfiniteMoment,
    InvalidParameter,
    SecondOrderUnavailable,
    UnsupportedFamily,
)

QUAD_EPSREL = 1e-10
# remainder target for power-tail truncated integrals
REMAINDER_TOL = 1e-12


@dataclass(frozen=True)
class SlowlyVarying:
    """Evaluable slowly varying factor: a constant or ``(ln t) ** power``."""

    kind: str = "const"
    value: float = 1.0

    def __post_init__(self):
        if self.kind not in ("const", "logpow"):
            raise InvalidParameter(f"unknown slowly varying form {self.kind!r}")

    def __call__(self, t):
        if self.kind == "const":
            return self.value if np.ndim(t) == 0 else np.full(np.shape(t), self.value)
        # natural log; t = 1 gives 0 by construction
        return np.log(t) ** self.value

    @classmethod
    def parse(cls, text: str) -> "SlowlyVarying":
        """Parse ``const:1`` / ``logpow:2`` (a bare number means a constant)."""
        text = text.strip()
        if ":" in text:
            kind, val = text.split(":", 1)
            return cls(kind.strip(), float(val))
        return cls("const", float(text))

    def __str__(self):
        return f"{self.kind}:{self.value:g}"


@dataclass(frozen=True)
class TailExpansionParams:
    """Parameters (a, h, r1, r2, L0) of the two-term tail expansion."""

    a: float
    h: float
    r1: float
    r2: float
    l0: SlowlyVarying = field(default_factory=SlowlyVarying)

    def __post_init__(self):
        if not self.r1 > 0:
            raise InvalidParameter("r1 must be positive")
        if not self.h > 0:
            raise InvalidParameter("h must be positive")
        if not self.a > 1:
            raise InvalidParameter("tail index a must exceed 1")

    def L(self, t):
        """The full slowly varying factor r1 + r2 t^-h L0(t)."""
        t = np.asarray(t, dtype=float)
        out = self.r1 + self.r2 * t ** (-self.h) * self.l0(t)
        return float(out) if out.ndim == 0 else out

    def tail(self, t):
        return np.asarray(t, dtype=float) ** (-self.a) * self.L(t)

    def require_second_order(self):
        if not self.a > 2:
            raise SecondOrderUnavailable(
                f"a = {self.a} <= 2: the second service moment is infinite"
            )
        return self


def _scalar_or_array(x, like):
    return float(x) if np.ndim(like) == 0 else x


class ServiceModel(ABC):
    """Common interface of a service-time law on [0, inf)."""

    family: str = ""
    #: points where the density is not smooth; used as quadrature breakpoints
    breakpoints: tuple = ()

    # -- closed-form pieces each family provides -------------------------
    @abstractmethod
    def tail(self, t):
        """Survival function P{T > t}."""

    @abstractmethod
    def logpdf(self, t):
        ...

    @abstractmethod
    def quantile_tail(self, u):
        """Inverse of :meth:`tail`: the t with tail(t) = u."""

    @abstractmethod
    def moments(self) -> tuple[float, float]:
        """Return ``(beta1, beta2)``, the first two moments."""

    @abstractmethod
    def tail_params(self) -> TailExpansionParams:
        ...

    @abstractmethod
    def params(self) -> dict:
        ...

    # -- shared machinery ------------------------------------------------
    def cdf(self, t):
        return 1.0 - self.tail(t)

    def logsf(self, t):
        with np.errstate(divide="ignore"):
            return np.log(self.tail(t))

    def pdf(self, t):
        return np.exp(self.logpdf(t))

    # scalar versions for quadrature integrands, where numpy call overhead
    # dominates; families override them with plain ``math`` code
    def scalar_logpdf(self, t: float) -> float:
        return float(self.logpdf(t))

    def scalar_logsf(self, t: float) -> float:
        return float(self.logsf(t))

    @property
    def mean(self) -> float:
        return self.moments()[0]

    def tail_integral(self, t):
        """Integral of the tail over (t, inf) (unnormalised equilibrium tail)."""
        return np.vectorize(self._tail_integral_quad, otypes=[float])(t)

    def equilibrium_tail(self, t):
        """Tail of the integrated-tail (equilibrium) distribution."""
        out = np.asarray(self.tail_integral(t), dtype=float) / self.mean
        return _scalar_or_array(np.clip(out, 0.0, 1.0), t)

    def equilibrium_quantile(self, u):
        """Solve equilibrium_tail(t) = u by vectorised bisection on ln(1 + t)."""
        u = np.asarray(u, dtype=float)
        flat = u.ravel()
        lo = np.zeros_like(flat)
        hi = np.ones_like(flat)
        for _ in range(2000):
            up = np.asarray(self.equilibrium_tail(np.expm1(hi))) > flat
            if not up.any():
                break
            hi = np.where(up, 2.0 * hi, hi)
        for _ in range(100):
            mid = 0.5 * (lo + hi)
            right = np.asarray(self.equilibrium_tail(np.expm1(mid))) > flat
            lo = np.where(right, mid, lo)
            hi = np.where(right, hi, mid)
            if np.all(hi - lo <= 4e-16 * hi):
                break
        out = np.expm1(0.5 * (lo + hi)).reshape(u.shape)
        return _scalar_or_array(out, u)

    def sample(self, rng: np.random.Generator, size=None):
        """Inverse-transform draws of the service time."""
        u = rng.random(size)
        return self.quantile_tail(1.0 - u)

    def equilibrium_sample(self, rng: np.random.Generator, size=None):
        u = rng.random(size)
        return self.equilibrium_quantile(1.0 - u)

    def laplace_tail(self, s: float) -> float:
        """Integral of exp(-s t) * tail(t) over [0, inf).

        Equals beta1 times the equilibrium LST; no cancellation at small s.
        """
        if s == 0:
            return self.mean
        f = lambda t: math.exp(-s * t) * self.tail(t)
        # decade breakpoints up to a few e-folding lengths: QAGS cannot follow a
        # power law across many decades in one piece
        start = max((1.0, *self.breakpoints))
        stop = start + 40.0 / s
        decades = np.geomspace(start, stop, max(2, int(np.ceil(np.log10(stop / start))) + 1))
        pieces = sorted({0.0, *self.breakpoints, *decades.tolist()})
        total = 0.0
        for lo, hi in zip(pieces[:-1], pieces[1:]):
            total += integrate.quad(f, lo, hi, epsabs=1e-17, epsrel=1e-13, limit=200)[0]
        total += integrate.quad(f, pieces[-1], np.inf, epsabs=1e-17, epsrel=1e-13, limit=200)[0]
        return total

    # -- quadrature fallbacks (also serve as test oracles) ---------------
    def _cutoff(self, t0: float, power: float) -> float:
        """Truncation point beyond which the two-term remainder is negligible.

        The neglected term behaves like t**-(power + 2h); choose T* so that
        it stays below ``REMAINDER_TOL``.
        """
        p = self.tail_params()
        scale = abs(p.r1) + abs(p.r2) + 1.0
        expo = power + 2 * p.h
        return max(2.0 * t0, 10.0, *self.breakpoints, (scale / REMAINDER_TOL) ** (1.0 / expo))

    def _tail_integral_quad(self, t0: float) -> float:
        """GK quadrature on [t0, T*] plus the analytic power-tail remainder."""
        p = self.tail_params()
        T = self._cutoff(t0, p.a - 1)
        pts = [x for x in self.breakpoints if t0 < x < T]
        body = integrate.quad(
            self.tail, t0, T, points=pts or None, epsabs=0, epsrel=QUAD_EPSREL, limit=500
        )[0]
        rem = p.r1 * T ** (1 - p.a) / (p.a - 1) + p.r2 * T ** (1 - p.a - p.h) * p.l0(T) / (
            p.a + p.h - 1
        )
        return body + rem

    def moments_by_quadrature(self) -> tuple[float, float]:
        p = self.tail_params()
        T1 = self._cutoff(0.0, p.a - 1)
        pts = list(self.breakpoints) or None
        m1 = integrate.quad(self.tail, 0, T1, points=pts, epsabs=0, epsrel=QUAD_EPSREL, limit=500)[0]
        m1 += p.r1 * T1 ** (1 - p.a) / (p.a - 1) + p.r2 * T1 ** (1 - p.a - p.h) * p.l0(T1) / (
            p.a + p.h - 1
        )
        if p.a <= 2:
            raise InfiniteMoment("second moment is infinite for a <= 2")
        T2 = self._cutoff(0.0, p.a - 2)
        m2 = integrate.quad(
            lambda t: 2 * t * self.tail(t), 0, T2, points=pts, epsabs=0, epsrel=QUAD_EPSREL, limit=500
        )[0]
        m2 += 2 * (
            p.r1 * T2 ** (2 - p.a) / (p.a - 2)
            + p.r2 * T2 ** (2 - p.a - p.h) * p.l0(T2) / (p.a + p.h - 2)
        )
        return m1, m2

    def spec_string(self) -> str:
        args = " ".join(f"{k}={v:g}" for k, v in self.params().items())
        return f"family={self.family} {args}"


@dataclass(frozen=True)
class HallWeiss(ServiceModel):
    """tail(t) = t^-v (1 + t^w) / 2 for t >= 1 and 1 below; v > 2, w < 0."""

    v: float
    w: float
    family = "hallweiss"
    breakpoints = (1.0,)

    def __post_init__(self):
        if not self.v > 2:
            raise InvalidParameter("HallWeiss needs v > 2")
        if not self.w < 0:
            raise InvalidParameter("HallWeiss needs w < 0")

    def params(self):
        return {"v": self.v, "w": self.w}

    def tail(self, t):
        t = np.asarray(t, dtype=float)
        tt = np.maximum(t, 1.0)
        out = np.where(t < 1.0, 1.0, 0.5 * tt ** (-self.v) * (1.0 + tt**self.w))
        return _scalar_or_array(out, t)

    def logpdf(self, t):
        t = np.asarray(t, dtype=float)
        tt = np.maximum(t, 1.0)
        dens = 0.5 * (self.v * tt ** (-self.v - 1) + (self.v - self.w) * tt ** (self.w - self.v - 1))
        with np.errstate(divide="ignore"):
            out = np.where(t < 1.0, -np.inf, np.log(dens))
        return _scalar_or_array(out, t)

    def scalar_logpdf(self, t):
        if t < 1.0:
            return -math.inf
        v, w = self.v, self.w
        return math.log(0.5 * (v * t ** (-v - 1) + (v - w) * t ** (w - v - 1)))

    def scalar_logsf(self, t):
        if t < 1.0:
            return 0.0
        return math.log(0.5) - self.v * math.log(t) + math.log1p(t**self.w)

    def quantile_tail(self, u):
        # monotone in x = ln t; Newton from a lower bracket converges from the left
        u = np.asarray(u, dtype=float)
        logu = np.log(np.clip(u, 1e-300, 1.0))
        g = lambda x: math.log(0.5) - self.v * x + np.log1p(np.exp(self.w * x)) - logu
        lo = np.zeros_like(logu)
        hi = np.maximum((math.log(1.0) - logu) / self.v, 0.0) + 1.0
        while np.any(g(hi) > 0):
            hi = np.where(g(hi) > 0, 2 * hi, hi)
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            pos = g(mid) > 0
            lo = np.where(pos, mid, lo)
            hi = np.where(pos, hi, mid)
            if np.all(hi - lo < 1e-15 * np.maximum(1.0, hi)):
                break
        out = np.exp(0.5 * (lo + hi))
        return _scalar_or_array(out, u)

    def moments(self):
        v, w = self.v, self.w
        beta1 = 1.0 + 0.5 * (1.0 / (v - 1) + 1.0 / (v - w - 1))
        beta2 = 1.0 + 1.0 / (v - 2) + 1.0 / (v - w - 2)
        return beta1, beta2

    def tail_integral(self, t):
        v, w = self.v, self.w
        t = np.asarray(t, dtype=float)
        tt = np.maximum(t, 1.0)
        upper = 0.5 * (tt ** (1 - v) / (v - 1) + tt ** (1 - v + w) / (v - w - 1))
        out = np.where(t < 1.0, (1.0 - t) + upper, upper)
        return _scalar_or_array(out, t)

    def tail_params(self):
        return TailExpansionParams(a=self.v, h=-self.w, r1=0.5, r2=0.5)


@dataclass(frozen=True)
class Burr(ServiceModel):
    """Burr XII law, tail(t) = (b / (b + t^w))^v; Lomax when w = 1."""

    b: float
    v: float
    w: float
    family = "burr"

    def __post_init__(self):
        if not (self.b > 0 and self.v > 0 and self.w > 0):
            raise InvalidParameter("Burr needs b, v, w > 0")
        if not self.v * self.w > 2:
            raise InvalidParameter("Burr needs v*w > 2")

    def params(self):
        return {"b": self.b, "v": self.v, "w": self.w}

    def tail(self, t):
        t = np.asarray(t, dtype=float)
        out = (self.b / (self.b + t**self.w)) ** self.v
        return _scalar_or_array(out, t)

    def logsf(self, t):
        t = np.asarray(t, dtype=float)
        out = -self.v * np.log1p(t**self.w / self.b)
        return _scalar_or_array(out, t)

    def logpdf(self, t):
        b, v, w = self.b, self.v, self.w
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore"):
            out = (
                math.log(v * w)
                + v * math.log(b)
                + special.xlogy(w - 1, t)
                - (v + 1) * np.log(b + t**w)
            )
        return _scalar_or_array(out, t)

    def scalar_logpdf(self, t):
        b, v, w = self.b, self.v, self.w
        if t <= 0.0:
            return math.log(v / b) if w == 1 else (-math.inf if w > 1 else math.inf)
        return (
            math.log(v * w) + v * math.log(b) + (w - 1) * math.log(t)
            - (v + 1) * math.log(b + t**w)
        )

    def scalar_logsf(self, t):
        return -self.v * math.log1p(t**self.w / self.b)

    def quantile_tail(self, u):
        u = np.asarray(u, dtype=float)
        with np.errstate(divide="ignore"):
            out = (self.b * np.expm1(-np.log(u) / self.v)) ** (1.0 / self.w)
        return _scalar_or_array(out, u)

    def raw_moment(self, k: float) -> float:
        b, v, w = self.b, self.v, self.w
        if not k < v * w:
            raise InfiniteMoment(f"moment {k} is infinite (v*w = {v * w})")
        return v * b ** (k / w) * special.beta(v - k / w, 1 + k / w)

    def moments(self):
        return self.raw_moment(1), self.raw_moment(2)

    def tail_integral(self, t):
        # substitution z = b / (b + x^w) turns the integral into a regularised
        # incomplete beta function
        b, v, w = self.b, self.v, self.w
        t = np.asarray(t, dtype=float)
        z = b / (b + t**w)
        out = self.mean * special.betainc(v - 1 / w, 1 / w, z)
        return _scalar_or_array(out, t)

    def equilibrium_quantile(self, u):
        b, v, w = self.b, self.v, self.w
        u = np.asarray(u, dtype=float)
        z = special.betaincinv(v - 1 / w, 1 / w, u)
        with np.errstate(divide="ignore"):
            out = (b * (1.0 - z) / z) ** (1.0 / w)
        return _scalar_or_array(out, u)

    def tail_params(self):
        b, v, w = self.b, self.v, self.w
        return TailExpansionParams(a=v * w, h=w, r1=b**v, r2=-v * b ** (v + 1))


@dataclass(frozen=True)
class StudentT(ServiceModel):
    """Student-t with v degrees of freedom folded onto [0, inf).

    The upper tail is doubled so that tail(0) = 1; the expansion
    coefficients are therefore twice the one-sided ones.
    """

    v: float
    family = "studentt"

    def __post_init__(self):
        if not self.v > 2:
            raise InvalidParameter("StudentT needs v > 2")

    def params(self):
        return {"v": self.v}

    def tail(self, t):
        t = np.asarray(t, dtype=float)
        out = np.where(t <= 0, 1.0, 2.0 * stats.t.sf(np.maximum(t, 0.0), self.v))
        return _scalar_or_array(out, t)

    def logsf(self, t):
        t = np.asarray(t, dtype=float)
        out = math.log(2.0) + stats.t.logsf(np.maximum(t, 0.0), self.v)
        return _scalar_or_array(out, t)

    def logpdf(self, t):
        t = np.asarray(t, dtype=float)
        out = np.where(t < 0, -np.inf, math.log(2.0) + stats.t.logpdf(np.abs(t), self.v))
        return _scalar_or_array(out, t)

    def scalar_logpdf(self, t):
        if t < 0.0:
            return -math.inf
        v = self.v
        return (
            math.log(2.0) + special.gammaln((v + 1) / 2) - special.gammaln(v / 2)
            - 0.5 * math.log(v * math.pi) - (v + 1) / 2 * math.log1p(t * t / v)
        )

    def scalar_logsf(self, t):
        return math.log(2.0 * special.stdtr(self.v, -max(t, 0.0)))

    def quantile_tail(self, u):
        u = np.asarray(u, dtype=float)
        return _scalar_or_array(stats.t.isf(u / 2.0, self.v), u)

    def moments(self):
        v = self.v
        beta1 = 2.0 * math.sqrt(v) * math.exp(
            special.gammaln((v + 1) / 2) - special.gammaln(v / 2)
        ) / (math.sqrt(math.pi) * (v - 1))
        return beta1, v / (v - 2)

    def _constant(self) -> float:
        v = self.v
        return math.exp(
            special.gammaln((v + 1) / 2) + (v + 1) / 2 * math.log(v)
            - 0.5 * math.log(v * math.pi) - special.gammaln(v / 2)
        )

    def tail_params(self):
        v, c = self.v, self._constant()
        return TailExpansionParams(a=v, h=2.0, r1=2 * c / v, r2=-c * v * (v + 1) / (v + 2))


@dataclass(frozen=True)
class Exponential(ServiceModel):
    """Exponential law with rate ``nu``; light tailed, oracle use only."""

    nu: float
    family = "exponential"

    def __post_init__(self):
        if not self.nu > 0:
            raise InvalidParameter("Exponential needs nu > 0")

    def params(self):
        return {"nu": self.nu}

    def tail(self, t):
        t = np.asarray(t, dtype=float)
        return _scalar_or_array(np.exp(-self.nu * np.maximum(t, 0.0)), t)

    def logsf(self, t):
        t = np.asarray(t, dtype=float)
        return _scalar_or_array(-self.nu * np.maximum(t, 0.0), t)

    def logpdf(self, t):
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore"):
            out = np.where(t < 0, -np.inf, math.log(self.nu) - self.nu * t)
        return _scalar_or_array(out, t)

    def scalar_logpdf(self, t):
        return -math.inf if t < 0 else math.log(self.nu) - self.nu * t

    def scalar_logsf(self, t):
        return -self.nu * max(t, 0.0)

    def quantile_tail(self, u):
        u = np.asarray(u, dtype=float)
        with np.errstate(divide="ignore"):
            return _scalar_or_array(-np.log(u) / self.nu, u)

    def moments(self):
        return 1.0 / self.nu, 2.0 / self.nu**2

    def tail_integral(self, t):
        t = np.asarray(t, dtype=float)
        return _scalar_or_array(np.exp(-self.nu * np.maximum(t, 0.0)) / self.nu, t)

    def equilibrium_quantile(self, u):
        return self.quantile_tail(u)

    def laplace_tail(self, s):
        return 1.0 / (self.nu + s)

    def tail_params(self):
        raise UnsupportedFamily("the exponential law has no regularly varying tail")


FAMILIES = {
    "hallweiss": HallWeiss,
    "burr": Burr,
    "studentt": StudentT,
    "exponential": Exponential,
}
ALIASES = {"hall-weiss": "hallweiss", "student": "studentt", "t": "studentt", "exp": "exponential"}


def make_service(family: str, **params) -> ServiceModel:
    """Build a service model from a family name and numeric parameters.

    ``lomax`` is accepted as Burr with ``w = 1``.
    """
    name = family.strip().lower()
    name = ALIASES.get(name, name)
    if name == "lomax":
        return Burr(b=float(params["b"]), v=float(params["v"]), w=1.0)
    try:
        cls = FAMILIES[name]
    except KeyError:
        raise InvalidParameter(f"unknown family {family!r}") from None
    try:
        return cls(**{k: float(v) for k, v in params.items()})
    except TypeError as exc:
        raise InvalidParameter(f"bad parameters for {name}: {exc}") from None


def parse_service(text: str) -> ServiceModel:
    """Parse ``family=burr b=2 v=3 w=1`` (the ``family=`` prefix is optional)."""
    tokens = text.replace(",", " ").split()
    if not tokens:
        raise InvalidParameter("empty service specification")
    params = {}
    family = None
    for tok in tokens:
        if "=" in tok:
            k, val = tok.split("=", 1)
            if k.strip().lower() == "family":
                family = val
            else:
                params[k.strip()] = val
        elif family is None:
            family = tok
        else:
            raise InvalidParameter(f"cannot parse token {tok!r}")
    if family is None:
        raise InvalidParameter("no family given")
    return make_service(family, **params)
