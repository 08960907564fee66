"""Discrete-event simulation and direct samplers for the M/G/1 retrial queue.

The event loop tracks the server state C (0 idle, 1 busy) and the orbit size
N.  Retrials that find the server busy change nothing, so by memorylessness
they are not simulated: while idle with n in orbit the next retrial is
Exp(n mu) away, and while busy only arrivals (which join the orbit) and the
service completion matter.  Time-average occupancies of every (C, N) state
are collected per batch after a warm-up period, giving batch-means
confidence intervals.

Arrivals, services and retrials use three independent generators spawned
from one seed, so identical seeds give bit-identical results.  Exact ties
between an arrival and a retrial (a measure-zero event) go to the arrival.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import InsufficientIdleTime, InvalidParameter, TooFewSamples
from .transforms import QueueModel

CONFIDENCE = 0.95
MIN_IDLE_FRACTION = 0.01


class _Stream:
    """Buffered scalar draws from one generator (numpy calls per draw are slow)."""

    def __init__(self, draw, chunk: int = 65536):
        self._draw = draw
        self._chunk = chunk
        self._buf: list = []
        self._i = 0

    def next(self) -> float:
        if self._i >= len(self._buf):
            self._buf = self._draw(self._chunk).tolist()
            self._i = 0
        x = self._buf[self._i]
        self._i += 1
        return x


@dataclass
class StationaryEstimate:
    """Time-average pmf with batch-means confidence half-widths.

    ``pmf`` and ``half_width`` share a shape; for a raw simulation run it is
    (2, J+1) indexed by (C, N).  ``batch_pmfs`` keeps the per-batch estimates
    (first axis = batch) so derived quantities get their own intervals.
    """

    pmf: np.ndarray
    half_width: np.ndarray
    total_time: float
    warmup: float
    batch_pmfs: np.ndarray = field(repr=False, default=None)
    batch_occupancy: np.ndarray = field(repr=False, default=None)
    seed: int | None = None

    @classmethod
    def from_batches(cls, batch_pmfs, total_time, warmup, occupancy=None, seed=None):
        batch_pmfs = np.asarray(batch_pmfs, dtype=float)
        return cls(
            pmf=batch_pmfs.mean(axis=0),
            half_width=_half_width(batch_pmfs),
            total_time=total_time,
            warmup=warmup,
            batch_pmfs=batch_pmfs,
            batch_occupancy=occupancy,
            seed=seed,
        )

    @property
    def batches(self) -> int:
        return len(self.batch_pmfs)

    def L_mu(self) -> "StationaryEstimate":
        """pmf of the number in system, N + C."""
        b = self.batch_pmfs
        total = np.zeros((b.shape[0], b.shape[2] + 1))
        total[:, :-1] += b[:, 0, :]
        total[:, 1:] += b[:, 1, :]
        return StationaryEstimate.from_batches(total, self.total_time, self.warmup, seed=self.seed)

    def idle_probability(self) -> tuple[float, float]:
        """(estimate, half-width) of P{C = 0}."""
        p = self.batch_pmfs[:, 0, :].sum(axis=1)
        return float(p.mean()), float(_half_width(p))

    def write_csv(self, path, comment: str | None = None):
        """``state,pmf,half_width`` rows for a one-dimensional pmf."""
        if self.pmf.ndim != 1:
            raise InvalidParameter("write_csv needs a one-dimensional pmf; use L_mu() first")
        with open(path, "w", newline="") as fh:
            if comment:
                fh.write(f"# {comment}\n")
            w = csv.writer(fh)
            w.writerow(["state", "pmf", "half_width"])
            for n, (p, h) in enumerate(zip(self.pmf, self.half_width)):
                w.writerow([n, f"{p:.17g}", f"{h:.17g}"])


def _half_width(batch_values) -> np.ndarray:
    x = np.asarray(batch_values, dtype=float)
    nb = x.shape[0]
    if nb < 2:
        return np.full(x.shape[1:], np.inf)
    q = stats.t.ppf(0.5 + CONFIDENCE / 2, nb - 1)
    return q * x.std(axis=0, ddof=1) / math.sqrt(nb)


def _streams(seed):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(3)]


def run_retrial_simulation(
    model: QueueModel,
    horizon: float,
    warmup: float | None = None,
    batches: int = 32,
    seed: int | None = 0,
) -> StationaryEstimate:
    """Simulate up to time ``horizon``, discarding ``warmup`` (default 10%).

    Returns the time-average joint pmf of (C, N) over the remaining time,
    split into ``batches`` equal batches.
    """
    if not model.retrials:
        raise InvalidParameter("simulation needs a finite retrial rate")
    if warmup is None:
        warmup = 0.1 * horizon
    if not 0 <= warmup < horizon:
        raise InvalidParameter("need 0 <= warmup < horizon")
    if batches < 2:
        raise InvalidParameter("need at least two batches")

    arr_rng, svc_rng, ret_rng = _streams(seed)
    lam, mu = model.lam, model.mu
    service = model.service
    inter = _Stream(lambda k: arr_rng.exponential(1.0 / lam, k))
    svc = _Stream(lambda k: service.sample(svc_rng, k))
    ret = _Stream(lambda k: ret_rng.exponential(1.0, k))

    blen = (horizon - warmup) / batches
    idle = [[0.0] * 64 for _ in range(batches)]
    busy = [[0.0] * 64 for _ in range(batches)]
    width = 64

    def record(rows, n, t0, t1):
        # time-weight of state n on [t0, t1), clipped to [warmup, horizon)
        nonlocal width
        if t1 <= warmup:
            return
        if t0 < warmup:
            t0 = warmup
        if t1 > horizon:
            t1 = horizon
        if n >= width:
            grow = max(n + 1, 2 * width) - width
            for b in range(batches):
                idle[b].extend([0.0] * grow)
                busy[b].extend([0.0] * grow)
            width += grow
        b = int((t0 - warmup) / blen)
        while t0 < t1 and b < batches:
            end = warmup + (b + 1) * blen
            if end > t1:
                end = t1
            rows[b][n] += end - t0
            t0 = end
            b += 1

    clock = 0.0
    n = 0
    next_arrival = inter.next()
    while clock < horizon:
        # idle: race between the next arrival and the aggregated retrial clock
        if n > 0:
            retrial = clock + ret.next() / (n * mu)
        else:
            retrial = math.inf
        start = next_arrival if next_arrival <= retrial else retrial
        record(idle, n, clock, start)
        if start == next_arrival:
            next_arrival += inter.next()
        else:
            n -= 1
        clock = start
        if clock >= horizon:
            break
        # busy until the service completes; arrivals join the orbit
        done = clock + svc.next()
        while next_arrival < done:
            record(busy, n, clock, next_arrival)
            clock = next_arrival
            n += 1
            next_arrival += inter.next()
        record(busy, n, clock, done)
        clock = done

    occ = np.zeros((batches, 2, width))
    occ[:, 0, :] = np.array(idle)
    occ[:, 1, :] = np.array(busy)
    batch_pmfs = occ / blen
    return StationaryEstimate.from_batches(batch_pmfs, horizon, warmup, occupancy=occ, seed=seed)


def conditional_Rmu_estimate(est: StationaryEstimate) -> StationaryEstimate:
    """pmf of the orbit size given an idle server, with batch-means intervals."""
    idle = est.batch_pmfs[:, 0, :]
    mass = idle.sum(axis=1)
    if mass.mean() < MIN_IDLE_FRACTION or np.any(mass <= 0):
        raise InsufficientIdleTime(
            f"idle fraction {mass.mean():.3g} is below {MIN_IDLE_FRACTION:g}"
        )
    return StationaryEstimate.from_batches(idle / mass[:, None], est.total_time, est.warmup, seed=est.seed)


# ---------------------------------------------------------------------------
# direct samplers


@dataclass
class EmpiricalPMF:
    """Sample frequencies with normal-approximation 95% half-widths."""

    pmf: np.ndarray
    half_width: np.ndarray
    n_samples: int

    @classmethod
    def from_samples(cls, x) -> "EmpiricalPMF":
        x = np.asarray(x)
        p = np.bincount(x) / len(x)
        z = stats.norm.ppf(0.5 + CONFIDENCE / 2)
        return cls(p, z * np.sqrt(p * (1 - p) / len(x)), len(x))


def _rng(seed_or_rng):
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.default_rng(seed_or_rng)


def _geometric_sums(model: QueueModel, counts: np.ndarray, rng) -> np.ndarray:
    """For each count k, the sum of k equilibrium service draws."""
    total = int(counts.sum())
    out = np.zeros(len(counts))
    if total == 0:
        return out
    draws = model.service.equilibrium_sample(rng, total)
    owner = np.repeat(np.arange(len(counts)), counts)
    return np.bincount(owner, weights=draws, minlength=len(counts))


def sample_T_kappa(model: QueueModel, size: int, rng=None, chunk: int = 1_000_000) -> np.ndarray:
    """T_kappa: a geometric number K >= 1, P{K=k} = (1-rho) rho^(k-1), of
    independent equilibrium service times, summed."""
    rng = _rng(rng)
    out = np.empty(size)
    for lo in range(0, size, chunk):
        m = min(chunk, size - lo)
        k = rng.geometric(1.0 - model.rho, m)
        out[lo : lo + m] = _geometric_sums(model, k, rng)
    return out


def sample_T_theta(model: QueueModel, size: int, rng=None) -> np.ndarray:
    """T_theta: zero with probability 1 - rho, otherwise a T_kappa draw."""
    rng = _rng(rng)
    busy = rng.random(size) < model.rho
    out = np.zeros(size)
    out[busy] = sample_T_kappa(model, int(busy.sum()), rng)
    return out


def sample_L_infinity(model: QueueModel, size: int, rng=None) -> np.ndarray:
    """Poisson(lam (T_theta + T_beta)) counts: the number in the ordinary
    M/G/1 queue via the functional form of Little's law."""
    rng = _rng(rng)
    t = sample_T_theta(model, size, rng) + model.service.sample(rng, size)
    return rng.poisson(model.lam * t)


def sample_L_infinity_FLL(model: QueueModel, n_samples: int, seed=None) -> EmpiricalPMF:
    return EmpiricalPMF.from_samples(sample_L_infinity(model, n_samples, seed))


def sample_R_mu(model: QueueModel, size: int, rng=None) -> np.ndarray:
    """Exact draws of the orbit size seen by an idle server.

    log E z^R = -psi lam sum_m P{M=m} (1 - z^(m+1)) / (m+1) with M the
    Poisson(lam T_kappa) count, so R is compound Poisson: Poisson(lam psi)
    candidates, each drawing M and kept with probability 1/(M+1), add M + 1.
    """
    rng = _rng(rng)
    if not model.retrials:
        return np.zeros(size, dtype=np.int64)
    cand = rng.poisson(model.lam * model.psi, size)
    total = int(cand.sum())
    m = rng.poisson(model.lam * sample_T_kappa(model, total, rng))
    keep = rng.random(total) * (m + 1) < 1.0
    owner = np.repeat(np.arange(size), cand)
    return np.bincount(owner[keep], weights=(m + 1)[keep], minlength=size).astype(np.int64)


def sample_L_mu(model: QueueModel, size: int, rng=None) -> np.ndarray:
    """L_mu = L_inf + R_mu with independent parts."""
    rng = _rng(rng)
    return sample_L_infinity(model, size, rng) + sample_R_mu(model, size, rng)


def hill_tail_index(samples, k: int) -> float:
    """Hill estimate of the tail index from the ``k`` largest samples."""
    if k < 10:
        raise TooFewSamples("Hill estimator needs k >= 10")
    x = np.sort(np.asarray(samples, dtype=float))
    if len(x) <= k:
        raise TooFewSamples(f"need more than k={k} samples, got {len(x)}")
    top = x[-k:]
    threshold = x[-k - 1]
    if not threshold > 0:
        raise TooFewSamples("the (k+1)-th largest sample must be positive")
    gamma = np.mean(np.log(top) - math.log(threshold))
    if not gamma > 0:
        raise TooFewSamples("degenerate sample: the top order statistics are all equal")
    return float(1.0 / gamma)


def write_manifest(path, **info):
    with open(path, "w") as fh:
        json.dump(info, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")
