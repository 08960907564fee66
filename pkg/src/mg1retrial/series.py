"""Truncated power series with the arithmetic needed for PGF extraction."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import DivergenceGuard, IndexBeyondTruncation

GUARD = 1e6
EPS_NUM = 1e-12


@dataclass(frozen=True, eq=False)
class CoefficientSeries:
    """Coefficients c_0..c_N of a power series truncated at order N.

    All arithmetic keeps the truncation order of the shorter operand.
    """

    coeffs: np.ndarray

    # make numpy scalars defer to the reflected operators below
    __array_ufunc__ = None

    def __post_init__(self):
        arr = np.array(self.coeffs, dtype=float)
        arr.setflags(write=False)
        object.__setattr__(self, "coeffs", arr)

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    def __len__(self):
        return len(self.coeffs)

    def __getitem__(self, n):
        return self.coeffs[n]

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.coeffs, dtype=dtype)

    def truncate(self, order: int) -> "CoefficientSeries":
        return CoefficientSeries(self.coeffs[: order + 1])

    def _common(self, other):
        if not isinstance(other, CoefficientSeries):
            other = CoefficientSeries(np.atleast_1d(other))
            if len(other) == 1:
                pad = np.zeros(len(self))
                pad[0] = other.coeffs[0]
                return self.coeffs, pad
        n = min(len(self), len(other))
        return self.coeffs[:n], other.coeffs[:n]

    def __add__(self, other):
        a, b = self._common(other)
        return CoefficientSeries(a + b)

    __radd__ = __add__

    def __sub__(self, other):
        a, b = self._common(other)
        return CoefficientSeries(a - b)

    def __rsub__(self, other):
        a, b = self._common(other)
        return CoefficientSeries(b - a)

    def __neg__(self):
        return CoefficientSeries(-self.coeffs)

    def __mul__(self, other):
        if np.isscalar(other):
            return CoefficientSeries(self.coeffs * other)
        a, b = self._common(other)
        return CoefficientSeries(np.convolve(a, b)[: len(a)])

    __rmul__ = __mul__

    def __truediv__(self, other):
        if np.isscalar(other):
            return CoefficientSeries(self.coeffs / other)
        a, d = self._common(other)
        if d[0] == 0:
            raise ZeroDivisionError("denominator series has zero constant term")
        n = len(a)
        q = np.zeros(n)
        rd = d[1:]
        for k in range(n):
            # q_k = (a_k - sum_{i=1..k} d_i q_{k-i}) / d_0
            acc = a[k] - np.dot(rd[:k], q[k - 1 :: -1]) if k else a[0]
            q[k] = acc / d[0]
            if abs(q[k]) > GUARD:
                raise DivergenceGuard(f"quotient coefficient {k} reached {q[k]:.3g}")
        return CoefficientSeries(q)

    def shift(self, k: int = 1) -> "CoefficientSeries":
        """Multiply by z**k, keeping the truncation order."""
        out = np.zeros(len(self))
        out[k:] = self.coeffs[: len(self) - k]
        return CoefficientSeries(out)

    def integrate(self, constant: float = 0.0) -> "CoefficientSeries":
        """Termwise antiderivative; the z**(N+1) term is dropped."""
        out = np.empty(len(self))
        out[0] = constant
        out[1:] = self.coeffs[:-1] / np.arange(1, len(self))
        return CoefficientSeries(out)

    def derivative(self) -> "CoefficientSeries":
        n = len(self)
        out = np.zeros(n)
        out[:-1] = self.coeffs[1:] * np.arange(1, n)
        return CoefficientSeries(out)

    def exp(self) -> "CoefficientSeries":
        """exp of the series via n e_n = sum_k k f_k e_{n-k}."""
        f = self.coeffs
        n = len(f)
        e = np.zeros(n)
        e[0] = math.exp(f[0])
        kf = np.arange(n) * f
        for m in range(1, n):
            e[m] = np.dot(kf[1 : m + 1], e[m - 1 :: -1]) / m
            if abs(e[m]) > GUARD:
                raise DivergenceGuard(f"exp coefficient {m} reached {e[m]:.3g}")
        return CoefficientSeries(e)

    def __call__(self, z):
        return np.polynomial.polynomial.polyval(z, self.coeffs)

    # -- probability views -------------------------------------------------
    def cdf(self) -> np.ndarray:
        return np.cumsum(self.coeffs)

    def tail(self) -> np.ndarray:
        """P{X > n} = 1 - sum_{k<=n} c_k, clamped to [0, 1]."""
        return np.clip(1.0 - self.cdf(), 0.0, 1.0)

    def is_pmf(self, eps: float = EPS_NUM) -> bool:
        c = self.cdf()
        return bool(np.all(self.coeffs >= -eps) and np.all(c <= 1 + eps) and np.all(c >= -eps))

    def tail_mass_estimate(self, fit_from: float = 0.5) -> tuple[float, float]:
        """Fit c_n ~ C n^-alpha on the upper part of the series.

        Returns ``(mass beyond N, alpha)``; the mass is the analytic sum of the
        fitted power law over n > N.  Geometric (light) tails give alpha very
        large and a negligible mass.
        """
        N = self.order
        lo = max(1, int(N * fit_from))
        n = np.arange(lo, N + 1)
        c = self.coeffs[lo:]
        ok = c > 0
        if ok.sum() < 3:
            return 0.0, math.inf
        slope, icpt = np.polyfit(np.log(n[ok]), np.log(c[ok]), 1)
        alpha = -slope
        if alpha <= 1:
            return math.inf, alpha
        # integral of C x^-alpha over (N + 1/2, inf)
        mass = math.exp(icpt) * (N + 0.5) ** (1 - alpha) / (alpha - 1)
        return float(mass), float(alpha)

    def to_csv(self, path, header_comment: str | None = None):
        """Write ``n,pmf,cdf`` rows with 17 significant digits."""
        cdf = self.cdf()
        with open(path, "w", newline="") as fh:
            if header_comment:
                fh.write(f"# {header_comment}\n")
            w = csv.writer(fh)
            w.writerow(["n", "pmf", "cdf"])
            for n, (p, c) in enumerate(zip(self.coeffs, cdf)):
                w.writerow([n, f"{p:.17g}", f"{c:.17g}"])


def check_index(series: CoefficientSeries, j: int):
    if not 0 <= j < series.order:
        raise IndexBeyondTruncation(f"j = {j} not below truncation order {series.order}")
