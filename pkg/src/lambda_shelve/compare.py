"""Analytic-versus-Monte-Carlo validation harness behind ``lambda-shelve compare``.

Also home of the leading-order shelving-regime estimates for the long-gap
weight and the mean short gap; the library itself always uses the exact
residue expressions.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import RegimeWarning
from .model import SystemParams, trapping_probability
from .rng import uniform_pair
from .statistics import WaitingLaw, emission_probability, short_long_split
from .trajectory import WaitingSampler, ensemble_run

#: two-sided Kolmogorov-Smirnov critical value at the 1% level, times sqrt(m)
KS_CRITICAL = 1.63
SIGMAS = 3.0
LONG_GAP_RTOL = 0.05
MIN_LONG_GAPS = 1000
ASYMPTOTIC_RTOL = 0.10
EMISSION_TOL = 1e-8
TRAPPING_TOL = 1e-10
#: the first-count check simulates up to this quantile of the |1> law ...
FIRST_COUNT_QUANTILE = 0.99
#: ... but never longer than this many lifetimes of the excited level
FIRST_COUNT_SPAN = 1000.0
#: counter streams reserved for the KS samples, disjoint from trajectory ids
KS_STREAM_BASE = 2**63


def pi_estimate(p: SystemParams) -> float:
    """Leading-order weight of the long waiting-time component (delta1 = 0)."""
    o1s, o2s = p.omega1**2, p.omega2**2
    d2 = p.delta2
    return o1s * o2s / ((o1s - 4 * d2**2) ** 2 + 4 * p.gamma**2 * d2**2)


def t_short_estimate(p: SystemParams) -> float:
    """Leading-order mean of the short waiting times after a blue count."""
    return p.gamma / p.omega1**2 + 2.0 / p.gamma


def ks_distance(samples, cdf) -> float:
    """Two-sided KS statistic of ``samples`` against the callable ``cdf``."""
    x = np.sort(np.asarray(samples, dtype=float))
    m = x.size
    f = cdf(x)
    upper = np.arange(1, m + 1) / m - f
    lower = f - np.arange(m) / m
    return float(max(upper.max(), lower.max()))


def sample_waits(p: SystemParams, k: int, m: int, seed: int, sampler=None) -> np.ndarray:
    """``m`` waiting times after a reset to ``|k>``, conditioned on not being trapped."""
    sampler = sampler or WaitingSampler(p)
    law = sampler.laws[k]
    u, _ = uniform_pair(seed, KS_STREAM_BASE + k, np.arange(m, dtype=np.uint64))
    # map onto (trapping, 1) so every draw emits
    u = law.trapping + (1.0 - law.trapping) * u
    return sampler.invert(k, u)


@dataclass(frozen=True)
class Check:
    quantity: str
    analytic: float | None
    empirical: float | None
    tolerance: float | None
    passed: bool | None

    def row(self):
        return [self.quantity, self.analytic, self.empirical, self.tolerance,
                None if self.passed is None else int(self.passed)]


COLUMNS = ["quantity", "analytic", "empirical", "tolerance", "passed"]


def _within(a, b, tol):
    return bool(abs(a - b) <= tol)


def first_count_waits(p: SystemParams, n: int, seed: int, sampler=None):
    """First count times of ``n`` trajectories started in ``|1>``.

    Returns ``(waits, horizon)``; only counts before ``horizon`` are seen, so
    the waits follow the law conditioned on ``t < horizon``.
    """
    sampler = sampler or WaitingSampler(p)
    law = sampler.laws[1]
    # invert() solves for the survival level, i.e. one minus the quantile
    level = law.trapping + (1.0 - FIRST_COUNT_QUANTILE) * (1.0 - law.trapping)
    horizon = min(float(sampler.invert(1, np.array([level]))[0]), FIRST_COUNT_SPAN / p.gamma)
    stats = ensemble_run(p, 1, n, horizon, seed, theta=horizon, keep_records=True)
    waits = np.array([r.times[0] for r in stats.records if len(r)])
    return waits, horizon


def _ks_checks(p, cfg, sampler):
    checks = []
    m = cfg.ks_samples
    # whole-engine check: first counts of simulated trajectories from |1>
    if sampler.laws[1].trapping < 1.0:
        law = sampler.laws[1]
        waits, horizon = first_count_waits(p, m, cfg.seed, sampler)
        inside = 1.0 - law.survival(horizon)
        if waits.size >= 2:
            d = ks_distance(waits, lambda x: (1.0 - law.survival(x)) / inside)
            crit = KS_CRITICAL / math.sqrt(waits.size)
            checks.append(Check("ks_first_count_from_1", 0.0, d, crit, d < crit))
    # direct sampler check for both reset levels
    crit = KS_CRITICAL / math.sqrt(m)
    for k in (1, 2):
        law = sampler.laws[k]
        if law.trapping >= 1.0:
            continue
        waits = sample_waits(p, k, m, cfg.seed, sampler)
        emit = 1.0 - law.trapping
        d = ks_distance(waits, lambda x: (1.0 - law.survival(x)) / emit)
        checks.append(Check(f"ks_sampler_from_{k}", 0.0, d, crit, d < crit))
    return checks


def run_compare(cfg) -> list[Check]:
    """Run every applicable check for ``cfg`` and return the report rows."""
    p = cfg.params
    sampler = WaitingSampler(p)
    checks = _ks_checks(p, cfg, sampler)
    for k in (1, 2):
        prob = emission_probability(p, k)
        if p.equal_detunings:
            omega2 = p.omega1**2 + p.omega2**2
            expect = (p.omega1**2 if k == 1 else p.omega2**2) / omega2 if omega2 else 0.0
            checks.append(Check(f"emission_probability_{k}", expect, prob, TRAPPING_TOL,
                                _within(prob, expect, TRAPPING_TOL)))
        else:
            checks.append(Check(f"emission_probability_{k}", 1.0, prob, EMISSION_TOL,
                                _within(prob, 1.0, EMISSION_TOL)))

    if p.equal_detunings:
        checks += _trapping_checks(p, cfg)
    else:
        checks += _dark_period_checks(p, cfg)
    return checks


def _trapping_checks(p, cfg):
    n = cfg.n or 10000
    horizon = cfg.horizon or 1e4 / p.gamma
    stats = ensemble_run(p, cfg.k0, n, horizon, cfg.seed, theta=cfg.theta)
    expect = trapping_probability(p, cfg.k0)
    sigma = math.sqrt(max(expect * (1 - expect), 0.0) / n)
    first = stats.first_draw_trapping_frequency
    return [
        Check("first_draw_trapping_frequency", expect, first, SIGMAS * sigma,
              _within(first, expect, SIGMAS * sigma)),
        Check("trapping_frequency_lower_bound", expect, stats.trapping_frequency, SIGMAS * sigma,
              stats.trapping_frequency >= expect - SIGMAS * sigma),
    ]


def _dark_period_checks(p, cfg):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RegimeWarning)
        dec = short_long_split(p, 1)
    theta = cfg.theta or dec.theta
    n = cfg.n or 16
    horizon = cfg.horizon or 400.0 * dec.t_long
    stats = ensemble_run(p, 1, n, horizon, cfg.seed, theta=theta)
    law = WaitingLaw(p, 1)
    checks = []

    g = stats.gaps[1]
    total = g["short_count"] + g["long_count"]
    frac = g["long_count"] / total if total else float("nan")
    sigma = math.sqrt(dec.pi * (1 - dec.pi) / total) if total else float("inf")
    checks.append(Check("long_gap_fraction_from_1", dec.pi, frac, SIGMAS * sigma,
                        _within(frac, dec.pi, SIGMAS * sigma)))

    mass, moment = law.truncated_moments(theta)
    if g["short_count"]:
        sem = g["short_std"] / math.sqrt(g["short_count"])
        bias = abs(moment / mass - dec.t_short)
        tol = SIGMAS * sem + bias
        checks.append(Check("mean_short_gap_from_1", dec.t_short, g["short_mean"], tol,
                            _within(g["short_mean"], dec.t_short, tol)))

    dark = stats.dark_intervals
    tol = LONG_GAP_RTOL * dec.t_long
    ok = dark["count"] >= MIN_LONG_GAPS and _within(dark["mean"], dec.t_long, tol)
    checks.append(Check("mean_long_gap", dec.t_long, dark["mean"], tol, ok))
    checks.append(Check("long_gap_count", float(MIN_LONG_GAPS), float(dark["count"]), None,
                        dark["count"] >= MIN_LONG_GAPS))
    checks.append(Check("t_long_rate_product", 1.0, dec.t_long * dec.rate_long, 4e-16,
                        _within(dec.t_long * dec.rate_long, 1.0, 4e-16)))

    if p.in_shelving_regime() and p.delta1 == 0:
        est = pi_estimate(p)
        checks.append(Check("pi_leading_order", dec.pi, est, ASYMPTOTIC_RTOL * dec.pi,
                            _within(est, dec.pi, ASYMPTOTIC_RTOL * dec.pi)))
        est = t_short_estimate(p)
        checks.append(Check("t_short_leading_order", dec.t_short, est,
                            ASYMPTOTIC_RTOL * dec.t_short,
                            _within(est, dec.t_short, ASYMPTOTIC_RTOL * dec.t_short)))
    return checks
