"""Quantum-jump Monte Carlo of the counting record and its exact density.

Every detection projects the atom onto ``|1>`` (blue) or ``|2>`` (red), so
the count record is a Markov renewal process: the delay to the next count is
drawn by inverting the closed-form survival ``P(t||k>)`` and the channel is
blue with probability ``gamma1 / gamma`` independently of the delay.

Trajectories are simulated in blocks of draws. The uniforms for draw ``n``
of trajectory ``i`` come from a counter-based generator keyed by
``(seed, i, n)``, so results do not depend on batching or threads.
"""

from __future__ import annotations

import math
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    EqualDetunings,
    LambdaShelveError,
    RegimeWarning,
    RootSolveFailure,
    UnsortedRecord,
)
from .model import Channel, SystemParams
from .propagator import Amplitudes, SpectralPropagator, evolve_ode
from .rng import CounterStream, uniform_pair
from .statistics import THETA_MARGIN, WaitingLaw, short_long_split

SURVIVAL_TOL = 1e-12
MAX_ITERATIONS = 200
CHUNK_SIZE = 2048
BLOCK_START = 32
BLOCK_BUDGET = 1 << 20
THREADS_ENV = "LAMBDA_SHELVE_THREADS"
#: log-spaced histogram edges in units of 1/gamma
HIST_DECADES = (-3, 9)
HIST_BINS_PER_DECADE = 10


class WaitingSampler:
    """Exact inverse-transform sampler for the delay to the next count."""

    def __init__(self, p: SystemParams):
        self.params = p
        self.blue_share = p.gamma1 / p.gamma
        self.laws = {k: WaitingLaw(p, k) for k in (1, 2)}
        self._tables = {}

    def _table(self, k):
        if k not in self._tables:
            law = self.laws[k]
            scale = 1.0 / self.params.gamma
            hi = 1e4 * scale
            floor = law.trapping + 1e-16
            while law.survival(hi) > floor and hi < 1e300:
                hi *= 10.0
            n = int(64 * (math.log10(hi / scale) + 4)) + 1
            t = np.concatenate([[0.0], np.logspace(-4, math.log10(hi / scale), n) * scale])
            s = np.minimum.accumulate(law.survival(t))
            s[0] = 1.0
            self._tables[k] = (t, s)
        return self._tables[k]

    def invert(self, k: int, u) -> np.ndarray:
        """Solve ``P(t||k>) = u`` for ``u`` above the trapping mass."""
        law = self.laws[k]
        u = np.asarray(u, dtype=float)
        t_grid, s_grid = self._table(k)
        idx = np.searchsorted(-s_grid, -u, side="left")
        beyond = idx >= t_grid.size
        idx = np.clip(idx, 1, t_grid.size - 1)
        lo = t_grid[idx - 1].copy()
        hi = t_grid[idx].copy()
        if beyond.any():
            # u within rounding of the trapping mass: push the bracket out
            for j in np.flatnonzero(beyond):
                lo[j] = hi[j]
                while law.survival(hi[j]) > u[j] and hi[j] < 1e300:
                    lo[j] = hi[j]
                    hi[j] *= 2.0
        s_lo, s_hi = law.survival(lo), law.survival(hi)
        span = s_lo - s_hi
        frac = np.where(span > 0, (s_lo - u) / np.where(span > 0, span, 1.0), 0.5)
        t = lo + np.clip(frac, 0.0, 1.0) * (hi - lo)

        out = np.empty_like(u)
        todo = np.arange(u.size)
        for _ in range(MAX_ITERATIONS):
            f = law.survival(t) - u[todo]
            done = (np.abs(f) <= SURVIVAL_TOL) | (hi - lo <= 4 * np.spacing(hi))
            if done.any():
                out[todo[done]] = t[done]
                keep = ~done
                todo, t, f, lo, hi = todo[keep], t[keep], f[keep], lo[keep], hi[keep]
            if todo.size == 0:
                return out
            lo = np.where(f > 0, t, lo)
            hi = np.where(f > 0, hi, t)
            d = law.pdf(t)
            with np.errstate(divide="ignore", invalid="ignore"):
                step = t + f / d
            bisect = np.where((lo > 0) & (hi > 4 * lo), np.sqrt(lo * hi), 0.5 * (lo + hi))
            ok = (d > 0) & (step > lo) & (step < hi)
            t = np.where(ok, step, bisect)
        raise RootSolveFailure(f"{todo.size} survival inversions did not converge")

    def sample(self, k: int, u_time, u_channel):
        """Vectorised draw; trapped draws get ``dt = nan`` and channel 0."""
        u_time = np.asarray(u_time, dtype=float)
        u_channel = np.asarray(u_channel, dtype=float)
        dt = np.full(u_time.shape, np.nan)
        law = self.laws[k]
        free = u_time >= law.trapping
        if law.trapping >= 1.0:
            free[:] = False
        if free.any():
            dt[free] = self.invert(k, u_time[free])
        channel = np.where(u_channel < self.blue_share, Channel.BLUE, Channel.RED).astype(np.int8)
        channel[~free] = 0
        return dt, channel


def sample_waiting(p: SystemParams, k: int, rng, sampler: WaitingSampler | None = None):
    """Draw the next ``(Channel, dt)`` after a reset to ``|k>``.

    ``rng`` is anything with a ``random()`` method returning floats in
    ``(0, 1)`` (a :class:`numpy.random.Generator` or a
    :class:`~lambda_shelve.rng.CounterStream`). Returns ``None`` when the
    atom is trapped in a dark state and will never emit again.
    """
    if k not in (1, 2):
        raise ValueError(f"initial level must be 1 or 2, got {k}")
    sampler = sampler or WaitingSampler(p)
    u_time, u_channel = rng.random(), rng.random()
    dt, channel = sampler.sample(k, [u_time], [u_channel])
    if np.isnan(dt[0]):
        return None
    return Channel(int(channel[0])), float(dt[0])


@dataclass
class CountRecord:
    """One observed trajectory: reset level at ``t = 0`` and counts up to ``horizon``."""

    initial: int
    times: np.ndarray
    channels: np.ndarray
    horizon: float
    trapped: bool = False

    @classmethod
    def from_events(cls, initial, events, horizon, trapped=False) -> "CountRecord":
        times = np.array([float(t) for t, _ in events], dtype=float)
        channels = np.array([int(Channel(c)) for _, c in events], dtype=np.int8)
        return cls(int(initial), times, channels, float(horizon), trapped)

    @property
    def events(self) -> list[tuple[float, Channel]]:
        return [(float(t), Channel(int(c))) for t, c in zip(self.times, self.channels)]

    def __len__(self):
        return int(self.times.size)

    def __eq__(self, other):
        if not isinstance(other, CountRecord):
            return NotImplemented
        return (
            self.initial == other.initial
            and self.horizon == other.horizon
            and self.trapped == other.trapped
            and np.array_equal(self.times, other.times)
            and np.array_equal(self.channels, other.channels)
        )

    def check(self):
        if self.times.size != self.channels.size:
            raise UnsortedRecord("times and channels differ in length")
        if self.times.size and (self.times[0] <= 0 or np.any(np.diff(self.times) <= 0)):
            raise UnsortedRecord("event times must be positive and strictly increasing")
        if self.times.size and self.times[-1] > self.horizon:
            raise UnsortedRecord("event after the horizon")
        if not np.all(np.isin(self.channels, (1, 2))):
            raise UnsortedRecord("unknown channel")

    def gaps(self) -> np.ndarray:
        """Delays between successive counts, the first measured from ``t = 0``."""
        return np.diff(self.times, prepend=0.0)

    def gap_origins(self) -> np.ndarray:
        """Level the atom was reset to at the start of each gap."""
        return np.concatenate([[self.initial], self.channels[:-1]]).astype(np.int8)[: self.times.size]


@dataclass(frozen=True)
class IntervalSummary:
    short_count: int = 0
    long_count: int = 0
    bright_periods: int = 0
    dark_periods: int = 0
    censored: float = 0.0


def classify_intervals(record: CountRecord, theta: float) -> IntervalSummary:
    """Split inter-count gaps at ``theta`` into short (bright) and long (dark).

    A maximal run of consecutive short gaps is one bright period and every
    long gap is one dark period. The open interval between the last count and
    the horizon is censored and reported separately.
    """
    if theta <= 0:
        raise ValueError("theta must be > 0")
    gaps = record.gaps()
    censored = record.horizon - (record.times[-1] if record.times.size else 0.0)
    if gaps.size == 0:
        return IntervalSummary(censored=float(censored) if record.horizon > 0 else 0.0)
    short = gaps < theta
    starts = short & ~np.concatenate([[False], short[:-1]])
    return IntervalSummary(
        short_count=int(short.sum()),
        long_count=int((~short).sum()),
        bright_periods=int(starts.sum()),
        dark_periods=int((~short).sum()),
        censored=float(censored),
    )


def trajectory_density(p: SystemParams, record: CountRecord, initial_pure: Amplitudes) -> float:
    """Probability density of exactly the counts in ``record`` over ``(0, horizon]``.

    Evaluated left to right as decaying segments ``exp(-K dt)`` interleaved
    with jumps ``S_m = |m><0|`` and a factor ``gamma_m`` per count; the
    formally growing ``exp(+K t)`` conjugations are never formed.
    """
    record.check()
    try:
        prop = SpectralPropagator(p)
        step = prop.apply
    except LambdaShelveError:
        def step(v, dt):
            return evolve_ode(p, Amplitudes.from_array(v), dt).as_array()

    psi = initial_pure.as_array() if isinstance(initial_pure, Amplitudes) else np.asarray(initial_pure, complex)
    weight = 1.0
    last = 0.0
    for t, m in zip(record.times, record.channels):
        psi = step(psi, float(t) - last)
        jumped = np.zeros(3, dtype=complex)
        jumped[int(m)] = psi[0]
        psi = jumped
        weight *= p.channel_rate(Channel(int(m)))
        last = float(t)
    psi = step(psi, record.horizon - last)
    return float(weight * np.vdot(psi, psi).real)


def _as_key(key):
    if isinstance(key, tuple):
        seed, index = key
    else:
        seed, index = key, 0
    return int(seed), int(index)


def histogram_edges(p: SystemParams) -> np.ndarray:
    lo, hi = HIST_DECADES
    return np.logspace(lo, hi, (hi - lo) * HIST_BINS_PER_DECADE + 1) / p.gamma


@dataclass
class _Accumulator:
    """Order-invariant running sums for one batch of trajectories."""

    nbins: int
    hist: np.ndarray = None
    channel_counts: np.ndarray = None
    # per origin level (index 0 -> |1>, 1 -> |2>): counts and sums of short/long gaps
    n_short: np.ndarray = None
    n_long: np.ndarray = None
    sum_short: np.ndarray = None
    sumsq_short: np.ndarray = None
    sum_long: np.ndarray = None
    sumsq_long: np.ndarray = None
    max_long: float = 0.0
    bright_periods: int = 0
    n_trapped: int = 0
    n_first_trapped: int = 0
    n_events: int = 0

    def __post_init__(self):
        self.hist = np.zeros((2, 2, self.nbins), dtype=np.int64)
        self.channel_counts = np.zeros(2, dtype=np.int64)
        for name in ("n_short", "n_long"):
            setattr(self, name, np.zeros(2, dtype=np.int64))
        for name in ("sum_short", "sumsq_short", "sum_long", "sumsq_long"):
            setattr(self, name, np.zeros(2))

    def merge(self, other: "_Accumulator"):
        self.hist += other.hist
        self.channel_counts += other.channel_counts
        for name in ("n_short", "n_long", "sum_short", "sumsq_short", "sum_long", "sumsq_long"):
            setattr(self, name, getattr(self, name) + getattr(other, name))
        self.max_long = max(self.max_long, other.max_long)
        for name in ("bright_periods", "n_trapped", "n_first_trapped", "n_events"):
            setattr(self, name, getattr(self, name) + getattr(other, name))


def _run_batch(sampler, k0, horizon, seed, streams, theta, edges, keep_events):
    """Simulate the trajectories ``streams`` in blocks of draws.

    The level before draw ``n`` is fixed by the channel of draw ``n - 1``
    and channels do not depend on delays, so a whole block of draws can be
    inverted at once and accumulated with a running sum. Each value depends
    only on ``(seed, stream, draw)``; blocking never changes the result.
    """
    n = streams.size
    acc = _Accumulator(edges.size - 1)
    clock = np.zeros(n)
    level = np.full(n, k0, dtype=np.int8)
    prev_short = np.zeros(n, dtype=bool)
    trapped = np.zeros(n, dtype=bool)
    active = np.arange(n)
    trap_mass = np.array([0.0, sampler.laws[1].trapping, sampler.laws[2].trapping])
    log = []
    offset = 0
    block = BLOCK_START
    while active.size:
        a = active.size
        draws = np.arange(offset, offset + block, dtype=np.uint64)
        u_time, u_channel = uniform_pair(seed, streams[active][:, None], draws[None, :])
        channel = np.where(u_channel < sampler.blue_share, 1, 2).astype(np.int8)
        origin = np.empty((a, block), dtype=np.int8)
        origin[:, 0] = level[active]
        origin[:, 1:] = channel[:, :-1]
        stuck = (u_time < trap_mass[origin]) | (trap_mass[origin] >= 1.0)
        dt = np.zeros((a, block))
        for k in (1, 2):
            sel = (origin == k) & ~stuck
            if sel.any():
                dt[sel] = sampler.invert(k, u_time[sel])
        steps = dt.copy()
        steps[:, 0] += clock[active]
        times = np.cumsum(steps, axis=1)
        stop = stuck | (times > horizon)
        has_stop = stop.any(axis=1)
        end = np.where(has_stop, stop.argmax(axis=1), block)
        cols = np.arange(block)
        valid = cols[None, :] < end[:, None]

        # the first stop is either a trap or the first count past the horizon
        ends_trapped = has_stop & stuck[np.arange(a), np.minimum(end, block - 1)]
        n_trap = int(ends_trapped.sum())
        trapped[active[ends_trapped]] = True
        acc.n_trapped += n_trap
        if offset == 0:
            acc.n_first_trapped += int((ends_trapped & (end == 0)).sum())

        if valid.any():
            gap = dt[valid]
            org = origin[valid] - 1
            ch = channel[valid]
            acc.n_events += int(gap.size)
            acc.channel_counts += np.bincount(ch - 1, minlength=2)[:2]
            b = np.clip(np.searchsorted(edges, gap, side="right") - 1, 0, edges.size - 2)
            np.add.at(acc.hist, (org, ch - 1, b), 1)
            short2d = dt < theta
            short = short2d[valid]
            for o in (0, 1):
                s_ = short & (org == o)
                l_ = ~short & (org == o)
                acc.n_short[o] += int(s_.sum())
                acc.n_long[o] += int(l_.sum())
                acc.sum_short[o] += float(gap[s_].sum())
                acc.sumsq_short[o] += float((gap[s_] ** 2).sum())
                acc.sum_long[o] += float(gap[l_].sum())
                acc.sumsq_long[o] += float((gap[l_] ** 2).sum())
            if (~short).any():
                acc.max_long = max(acc.max_long, float(gap[~short].max()))
            before = np.empty_like(short2d)
            before[:, 0] = prev_short[active]
            before[:, 1:] = short2d[:, :-1]
            acc.bright_periods += int((short2d & ~before & valid).sum())
            last = end - 1
            got = last >= 0
            rows = np.arange(a)[got]
            prev_short[active[got]] = short2d[rows, last[got]]
            clock[active[got]] = times[rows, last[got]]
            level[active[got]] = channel[rows, last[got]]
            if keep_events:
                r, c = np.nonzero(valid)
                log.append((active[r], times[r, c], channel[r, c]))

        active = active[~has_stop]
        offset += block
        if active.size:
            block = int(min(2 * block, max(BLOCK_START, BLOCK_BUDGET // active.size)))

    records = None
    if keep_events:
        if log:
            rows = np.concatenate([r for r, _, _ in log])
            times = np.concatenate([t for _, t, _ in log])
            chans = np.concatenate([c for _, _, c in log])
        else:
            rows, times, chans = np.empty(0, int), np.empty(0), np.empty(0, np.int8)
        order = np.lexsort((times, rows))
        rows, times, chans = rows[order], times[order], chans[order]
        bounds = np.searchsorted(rows, np.arange(n + 1))
        records = [
            CountRecord(k0, times[bounds[i]:bounds[i + 1]], chans[bounds[i]:bounds[i + 1]],
                        float(horizon), bool(trapped[i]))
            for i in range(n)
        ]
    return acc, records


def simulate_trajectory(p: SystemParams, k0: int, horizon: float, key,
                        sampler: WaitingSampler | None = None) -> CountRecord:
    """Simulate one count record on ``(0, horizon]``.

    ``key`` is ``(seed, index)`` or a bare seed (index 0); the same key
    always yields the same record, and ``ensemble_run`` with that seed
    reproduces it as trajectory ``index``.
    """
    if horizon <= 0:
        raise ValueError("horizon must be > 0")
    if k0 not in (1, 2):
        raise ValueError(f"initial level must be 1 or 2, got {k0}")
    seed, index = _as_key(key)
    sampler = sampler or WaitingSampler(p)
    _, records = _run_batch(sampler, k0, horizon, seed, np.array([index], dtype=np.uint64),
                            np.inf, histogram_edges(p), True)
    return records[0]


@dataclass
class EnsembleStats:
    """Aggregated Monte Carlo counting statistics.

    Gap statistics are keyed by the level the atom was reset to when the gap
    started (``1`` after a blue count, ``2`` after a red one, ``k0`` for the
    first gap). Censored trailing intervals are never counted.
    """

    n_trajectories: int
    seed: int
    k0: int
    horizon: float
    theta: float
    histogram_edges: np.ndarray
    waiting_histograms: dict
    channel_counts: dict
    gaps: dict
    dark_intervals: dict
    bright_periods: int
    trapping_frequency: float
    first_draw_trapping_frequency: float
    n_events: int
    records: list | None = field(default=None, repr=False, compare=False)

    def long_fraction(self, level: int = 1) -> float:
        g = self.gaps[level]
        total = g["short_count"] + g["long_count"]
        return g["long_count"] / total if total else float("nan")

    def to_dict(self) -> dict:
        return {
            "n_trajectories": self.n_trajectories,
            "seed": self.seed,
            "k0": self.k0,
            "horizon": self.horizon,
            "theta": self.theta,
            "n_events": self.n_events,
            "channel_counts": self.channel_counts,
            "trapping_frequency": self.trapping_frequency,
            "first_draw_trapping_frequency": self.first_draw_trapping_frequency,
            "bright_periods": self.bright_periods,
            "dark_intervals": self.dark_intervals,
            "gaps": {str(k): v for k, v in self.gaps.items()},
            "histogram_edges": [float(x) for x in self.histogram_edges],
            "waiting_histograms": self.waiting_histograms,
        }


def default_ensemble_theta(p: SystemParams) -> float:
    """Short/long threshold: the decomposition's theta, or a multiple of the fast scale."""
    try:
        with warnings.catch_warnings():
            # callers outside the shelving regime still need some threshold
            warnings.simplefilter("ignore", RegimeWarning)
            return short_long_split(p, 1).theta
    except (EqualDetunings, LambdaShelveError, ValueError):
        law = WaitingLaw(p, 1)
        rates = [abs(2 * z.real) for z in law.roots if abs(z.real) > 1e-12 * max(1.0, abs(z))]
        return THETA_MARGIN / min(rates) if rates else THETA_MARGIN / p.gamma


def _thread_count(threads):
    if threads is not None:
        return max(1, int(threads))
    env = os.environ.get(THREADS_ENV)
    if env:
        return max(1, int(env))
    return min(8, os.cpu_count() or 1)


def _summarise_gap(acc, o):
    ns, nl = int(acc.n_short[o]), int(acc.n_long[o])

    def moments(n, s, sq):
        if n == 0:
            return None, None
        mean = s / n
        var = max(sq / n - mean * mean, 0.0)
        return float(mean), float(math.sqrt(var))

    ms, ss = moments(ns, acc.sum_short[o], acc.sumsq_short[o])
    ml, sl = moments(nl, acc.sum_long[o], acc.sumsq_long[o])
    return {
        "short_count": ns,
        "long_count": nl,
        "short_mean": ms,
        "short_std": ss,
        "long_mean": ml,
        "long_std": sl,
    }


def ensemble_run(p: SystemParams, k0: int, n: int, horizon: float, seed: int,
                 theta: float | None = None, threads: int | None = None,
                 keep_records: bool = False) -> EnsembleStats:
    """Run ``n`` independent trajectories and aggregate their statistics.

    Trajectory ``i`` uses the counter stream ``(seed, i)``. Work is cut into
    fixed chunks of ``CHUNK_SIZE`` trajectories and merged in chunk order,
    so the result is identical for any thread count (``LAMBDA_SHELVE_THREADS``
    caps the default).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if horizon <= 0:
        raise ValueError("horizon must be > 0")
    if k0 not in (1, 2):
        raise ValueError(f"initial level must be 1 or 2, got {k0}")
    theta = default_ensemble_theta(p) if theta is None else float(theta)
    if theta <= 0:
        raise ValueError("theta must be > 0")
    sampler = WaitingSampler(p)
    for k in (1, 2):
        sampler._table(k)  # build lazily-cached tables before threads share them
    edges = histogram_edges(p)
    chunks = [np.arange(a, min(a + CHUNK_SIZE, n), dtype=np.uint64) for a in range(0, n, CHUNK_SIZE)]

    def work(streams):
        return _run_batch(sampler, k0, horizon, seed, streams, theta, edges, keep_records)

    workers = min(_thread_count(threads), len(chunks))
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(work, chunks))
    else:
        results = [work(c) for c in chunks]

    acc = _Accumulator(edges.size - 1)
    records = [] if keep_records else None
    for part, recs in results:
        acc.merge(part)
        if keep_records:
            records.extend(recs)

    n_long = int(acc.n_long.sum())
    dark = {
        "count": n_long,
        "mean": float(acc.sum_long.sum() / n_long) if n_long else None,
        "max": acc.max_long if n_long else None,
    }
    hists = {
        f"{k},{ch.label}": [int(x) for x in acc.hist[k - 1, ch - 1]]
        for k in (1, 2) for ch in Channel
    }
    return EnsembleStats(
        n_trajectories=n,
        seed=int(seed),
        k0=k0,
        horizon=float(horizon),
        theta=theta,
        histogram_edges=edges,
        waiting_histograms=hists,
        channel_counts={"blue": int(acc.channel_counts[0]), "red": int(acc.channel_counts[1])},
        gaps={1: _summarise_gap(acc, 0), 2: _summarise_gap(acc, 1)},
        dark_intervals=dark,
        bright_periods=acc.bright_periods,
        trapping_frequency=acc.n_trapped / n,
        first_draw_trapping_frequency=acc.n_first_trapped / n,
        n_events=acc.n_events,
        records=records,
    )


__all__ = [
    "CountRecord",
    "CounterStream",
    "EnsembleStats",
    "IntervalSummary",
    "WaitingSampler",
    "classify_intervals",
    "ensemble_run",
    "sample_waiting",
    "simulate_trajectory",
    "trajectory_density",
]
