import math

import numpy as np
import pytest
from scipy.integrate import quad

from lambda_shelve import (
    Amplitudes,
    Channel,
    CountRecord,
    SystemParams,
    UnsortedRecord,
    WaitingLaw,
    classify_intervals,
    ensemble_run,
    sample_waiting,
    short_long_split,
    simulate_trajectory,
    trajectory_density,
)
from lambda_shelve.compare import ks_distance, sample_waits
from lambda_shelve.rng import CounterStream
from lambda_shelve.trajectory import CHUNK_SIZE, WaitingSampler

SMALL = SystemParams(1.0, 0.4, 0.1, -0.3, 0.7, 0.3)


def test_classify_intervals_example():
    rec = CountRecord.from_events(1, [(0.1, 1), (0.3, 1), (50.3, 1), (50.4, 1)], horizon=60.0)
    out = classify_intervals(rec, 5.0)
    assert (out.short_count, out.long_count, out.bright_periods, out.dark_periods) == (3, 1, 2, 1)
    assert out.censored == pytest.approx(9.6)


def test_classify_empty_record():
    out = classify_intervals(CountRecord.from_events(1, [], 10.0), 1.0)
    assert (out.short_count, out.long_count, out.censored) == (0, 0, 10.0)
    with pytest.raises(ValueError):
        classify_intervals(CountRecord.from_events(1, [], 10.0), 0.0)


@pytest.mark.parametrize(
    "events", [[(1.0, 1), (0.5, 1)], [(0.0, 1)], [(1.0, 1), (1.0, 2)], [(11.0, 1)], [(1.0, 3)]]
)
def test_malformed_records_rejected(events):
    times = np.array([t for t, _ in events])
    channels = np.array([c for _, c in events], dtype=np.int8)
    rec = CountRecord(1, times, channels, 10.0)
    with pytest.raises(UnsortedRecord):
        trajectory_density(SMALL, rec, Amplitudes.basis(1))


def test_gap_bookkeeping():
    rec = CountRecord.from_events(2, [(1.0, Channel.BLUE), (3.5, Channel.RED), (4.0, Channel.BLUE)], 5.0)
    assert rec.gaps().tolist() == [1.0, 2.5, 0.5]
    assert rec.gap_origins().tolist() == [2, 1, 2]
    assert len(rec) == 3 and rec.events[1] == (3.5, Channel.RED)


def test_density_without_counts_is_survival():
    law = WaitingLaw(SMALL, 1)
    rec = CountRecord.from_events(1, [], 3.0)
    assert trajectory_density(SMALL, rec, Amplitudes.basis(1)) == pytest.approx(float(law.survival(3.0)), rel=1e-12)


def test_density_with_one_count_factorises():
    # one blue count at t0: W_blue(t0||1>) times survival of the rest from |1>
    law = WaitingLaw(SMALL, 1)
    rec = CountRecord.from_events(1, [(0.8, Channel.BLUE)], 2.0)
    expect = SMALL.gamma1 * law.excited_population(0.8) * law.survival(1.2)
    assert trajectory_density(SMALL, rec, Amplitudes.basis(1)) == pytest.approx(float(expect), rel=1e-12)


def test_density_level_swap_symmetry():
    rec = CountRecord.from_events(1, [(0.4, 1), (1.1, 2), (1.7, 2)], 2.5)
    swapped = CountRecord.from_events(2, [(0.4, 2), (1.1, 1), (1.7, 1)], 2.5)
    a = trajectory_density(SMALL, rec, Amplitudes.basis(1))
    b = trajectory_density(SMALL.swapped(), swapped, Amplitudes.basis(2))
    assert a == pytest.approx(b, rel=1e-10)


def test_density_uses_ode_when_roots_degenerate():
    p = SystemParams(0.5, 0.0, 0.0, 0.3, 1.0, 0.0)
    rec = CountRecord.from_events(1, [(1.0, 1)], 2.0)
    law = WaitingLaw(p, 1)
    expect = law.excited_population(1.0) * law.survival(1.0)
    assert trajectory_density(p, rec, Amplitudes.basis(1)) == pytest.approx(float(expect), rel=1e-8)


def test_sample_waiting_scalar_interface():
    rng = CounterStream(3)
    draws = [sample_waiting(SMALL, 1, rng) for _ in range(200)]
    assert all(d is not None and d[1] > 0 and d[0] in (Channel.BLUE, Channel.RED) for d in draws)
    trapped = SystemParams(0.0, 1.0, 0.0, 0.0)
    assert sample_waiting(trapped, 1, CounterStream(0)) is None


def test_inversion_accuracy():
    sampler = WaitingSampler(SMALL)
    u = np.linspace(1e-6, 1 - 1e-6, 501)
    t = sampler.invert(1, u)
    assert np.max(np.abs(sampler.laws[1].survival(t) - u)) <= 1e-12


def test_sampled_waits_follow_the_law():
    m = 20000
    waits = sample_waits(SMALL, 1, m, seed=4)
    law = WaitingLaw(SMALL, 1)
    assert ks_distance(waits, lambda x: 1 - law.survival(x)) < 1.63 / math.sqrt(m)


def test_ks_distance_on_exact_quantiles():
    x = (np.arange(1000) + 0.5) / 1000
    assert ks_distance(x, lambda v: v) == pytest.approx(0.0005)


def test_simulate_is_reproducible_and_matches_ensemble():
    rec = simulate_trajectory(SMALL, 1, 200.0, (7, 5))
    assert rec == simulate_trajectory(SMALL, 1, 200.0, (7, 5))
    assert rec != simulate_trajectory(SMALL, 1, 200.0, (7, 6))
    rec.check()
    stats = ensemble_run(SMALL, 1, 8, 200.0, 7, keep_records=True)
    assert stats.records[5] == rec
    assert simulate_trajectory(SMALL, 1, 200.0, 7) == stats.records[0]


def test_ensemble_independent_of_threads_and_chunking():
    n = CHUNK_SIZE + 37
    a = ensemble_run(SMALL, 2, n, 30.0, 11, threads=1)
    b = ensemble_run(SMALL, 2, n, 30.0, 11, threads=4)
    assert a.to_dict() == b.to_dict()
    part = ensemble_run(SMALL, 2, 37, 30.0, 11, keep_records=True)
    full = ensemble_run(SMALL, 2, 64, 30.0, 11, keep_records=True)
    assert all(x == y for x, y in zip(part.records, full.records[:37]))


def test_thread_env_is_honoured(monkeypatch):
    monkeypatch.setenv("LAMBDA_SHELVE_THREADS", "1")
    a = ensemble_run(SMALL, 1, 3000, 20.0, 1)
    monkeypatch.setenv("LAMBDA_SHELVE_THREADS", "3")
    b = ensemble_run(SMALL, 1, 3000, 20.0, 1)
    assert a.to_dict() == b.to_dict()


def test_channel_split_is_binomial():
    stats = ensemble_run(SMALL, 1, 400, 100.0, 2)
    n = stats.channel_counts["blue"] + stats.channel_counts["red"]
    share = SMALL.gamma1 / SMALL.gamma
    sigma = math.sqrt(n * share * (1 - share))
    assert abs(stats.channel_counts["blue"] - n * share) < 4 * sigma


def test_gap_mean_from_blue_origin(reference):
    # every gap after a blue count is a draw from the |1> law
    law = WaitingLaw(reference, 1)
    mean, _ = quad(lambda t: t * law.pdf(t), 0, np.inf, limit=400)
    dec = short_long_split(reference, 1)
    assert mean == pytest.approx((1 - dec.pi) * dec.t_short + dec.pi * dec.t_long, rel=1e-6)
    # int t^2 exp(s t) dt = -2 / s^3 for every pair term of the density
    second = float((law.gamma * law.pair * -2.0 / law.s**3).sum().real)
    waits = sample_waits(reference, 1, 200000, seed=8)
    # the rare long waits dominate the spread; use the exact variance
    sem = math.sqrt((second - mean**2) / waits.size)
    assert abs(waits.mean() - mean) < 3 * sem


def test_trapped_trajectories_stop_counting():
    p = SystemParams(3, 4, 0.2, 0.2, 1.0, 0.3)
    stats = ensemble_run(p, 1, 2000, 1000.0, 5, keep_records=True)
    assert stats.trapping_frequency == 1.0
    assert all(r.trapped for r in stats.records)
    sigma = math.sqrt(0.64 * 0.36 / 2000)
    assert abs(stats.first_draw_trapping_frequency - 0.64) < 4 * sigma


def test_censored_tail_excluded():
    stats = ensemble_run(SMALL, 1, 50, 40.0, 3, keep_records=True)
    total = sum(stats.gaps[o]["short_count"] + stats.gaps[o]["long_count"] for o in (1, 2))
    assert total == sum(len(r) for r in stats.records) == stats.n_events
    hist_total = sum(sum(v) for v in stats.waiting_histograms.values())
    assert hist_total == stats.n_events


def test_ensemble_argument_checks():
    with pytest.raises(ValueError):
        ensemble_run(SMALL, 1, 0, 1.0, 0)
    with pytest.raises(ValueError):
        ensemble_run(SMALL, 3, 1, 1.0, 0)
    with pytest.raises(ValueError):
        simulate_trajectory(SMALL, 1, -1.0, 0)
