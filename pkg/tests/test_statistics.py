import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from lambda_shelve import (
    Channel,
    DegenerateRoots,
    EqualDetunings,
    RegimeWarning,
    SystemParams,
    WaitingLaw,
    emission_probability,
    no_count_probability,
    short_long_split,
    waiting_density,
    waiting_pdf,
)
from lambda_shelve.compare import pi_estimate, t_short_estimate
from lambda_shelve.statistics import default_theta

import oracles
from conftest import DEEP, REFERENCE, params_strategy, random_params

# frozen from the mpmath oracle (residues of a0 from 40-digit cofactors)
REF_PI = 9.2453148594901526396e-05
REF_T_SHORT = 5.9998944630209038066
REF_T_LONG = 270443.57759699150428
REF_PI_FROM_2 = 0.99996073852996342481
DEEP_PI = 1.0099980021470465009e-06
DEEP_T_SHORT = 2.9999989290025464658
DEEP_T_LONG = 99010298.919909397164


def test_reference_decomposition_matches_frozen_oracle(reference):
    dec = short_long_split(reference, 1)
    assert dec.pi == pytest.approx(REF_PI, rel=1e-9)
    assert dec.t_short == pytest.approx(REF_T_SHORT, rel=1e-9)
    assert dec.t_long == pytest.approx(REF_T_LONG, rel=1e-9)
    assert dec.pi + dec.short_mass == pytest.approx(1.0, abs=1e-10)
    assert dec.t_long * dec.rate_long == pytest.approx(1.0, rel=1e-15)


def test_decomposition_from_metastable_level(reference):
    dec = short_long_split(reference, 2)
    assert dec.pi == pytest.approx(REF_PI_FROM_2, rel=1e-9)


def test_deep_regime_decomposition():
    p = SystemParams(**DEEP)
    dec = short_long_split(p, 1)
    assert dec.pi == pytest.approx(DEEP_PI, rel=1e-8)
    assert dec.t_short == pytest.approx(DEEP_T_SHORT, rel=1e-9)
    assert dec.t_long == pytest.approx(DEEP_T_LONG, rel=1e-8)
    assert pi_estimate(p) == pytest.approx(dec.pi, rel=0.1)
    assert t_short_estimate(p) == pytest.approx(dec.t_short, rel=0.1)


def test_live_oracle_on_random_split_detunings(rng):
    for _ in range(5):
        p = random_params(rng, min_split=0.05)
        values = tuple(p.as_dict().values())
        pi, t_short, t_long, emission, _ = oracles.decomposition(values, 1)
        law = WaitingLaw(p, 1)
        assert law.emission_probability() == pytest.approx(float(emission), abs=1e-9)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RegimeWarning)
            dec = short_long_split(p, 1)
        assert dec.pi == pytest.approx(float(pi), rel=1e-7, abs=1e-12)
        assert dec.t_long == pytest.approx(float(t_long), rel=1e-9)


@settings(max_examples=60, deadline=None)
@given(params_strategy)
def test_emission_probability_is_one_without_dark_states(p):
    if p.equal_detunings or p.omega1 == 0 or p.omega2 == 0:
        return
    law = WaitingLaw(p, 1)
    if not law.analytic or min(abs(z.real) for z in law.roots) < 1e-6:
        return
    assert emission_probability(p, 1) == pytest.approx(1.0, abs=1e-8)
    assert emission_probability(p, 2) == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("k, expect", [(1, 0.36), (2, 0.64)])
def test_equal_detuning_emission(k, expect):
    p = SystemParams(3, 4, 0.2, 0.2, 1.0, 0.3)
    assert emission_probability(p, k) == pytest.approx(expect, abs=1e-10)


def test_degenerate_roots_use_quadrature():
    p = SystemParams(0.5, 0.0, 0.0, 0.3, 1.0, 0.0)
    assert not WaitingLaw(p, 1).analytic
    assert emission_probability(p, 1) == pytest.approx(1.0, abs=1e-9)
    assert emission_probability(p, 2) == 0.0


@settings(max_examples=40, deadline=None)
@given(params_strategy, st.floats(0.05, 20.0))
def test_pdf_is_minus_survival_derivative(p, t):
    law = WaitingLaw(p, 1)
    if not law.analytic:
        return
    h = 1e-5 * max(1.0, t)
    fd = (law.survival(t - h) - law.survival(t + h)) / (2 * h)
    assert law.pdf(t) == pytest.approx(fd, abs=1e-6)


def test_initial_values_are_exact(reference):
    t = np.array([0.0, 1.0])
    for k in (1, 2):
        assert no_count_probability(reference, k, t)[0] == 1.0
        for ch in Channel:
            assert waiting_density(reference, k, ch, t)[0] == 0.0


def test_channel_densities_split_by_decay_rates():
    p = SystemParams(1.0, 0.4, 0.1, -0.3, 0.7, 0.3)
    t = np.linspace(0.1, 10, 7)
    blue = waiting_density(p, 1, Channel.BLUE, t)
    red = waiting_density(p, 1, Channel.RED, t)
    assert np.allclose(blue / 0.7, red / 0.3)
    assert np.allclose(blue + red, waiting_pdf(p, 1, t))


def test_pdf_integrates_to_survival_loss():
    p = SystemParams(1.0, 0.4, 0.1, -0.3, 0.7, 0.3)
    law = WaitingLaw(p, 2)
    for t in (0.5, 3.0, 25.0):
        got, _ = quad(law.pdf, 0, t, epsabs=1e-13)
        assert got == pytest.approx(1 - law.survival(t), abs=1e-10)


def test_split_components_reassemble(reference):
    law = WaitingLaw(reference, 1)
    t = np.geomspace(1e-3, 1e6, 50)
    assert np.allclose(law.long_component(t) + law.short_component(t), law.pdf(t), atol=1e-15)


def test_truncated_moments_match_quadrature():
    p = SystemParams(1.0, 0.4, 0.1, -0.3, 0.7, 0.3)
    law = WaitingLaw(p, 1)
    m0, m1 = law.truncated_moments(4.0)
    q0, _ = quad(law.pdf, 0, 4.0, epsabs=1e-13)
    q1, _ = quad(lambda t: t * law.pdf(t), 0, 4.0, epsabs=1e-13)
    assert m0 == pytest.approx(q0, abs=1e-11)
    assert m1 == pytest.approx(q1, abs=1e-11)


def test_short_mean_weakly_sensitive_to_theta(reference):
    # moving the classification threshold barely shifts the short-gap mean
    law = WaitingLaw(reference, 1)
    dec = short_long_split(reference, 1)
    means = []
    for theta in (0.5 * dec.theta, dec.theta, 2 * dec.theta):
        m0, m1 = law.truncated_moments(theta)
        means.append(m1 / m0)
    assert max(means) - min(means) < 1e-2 * dec.t_short


def test_default_theta_and_warning():
    assert default_theta(4.0, 10000.0) == pytest.approx(200.0)
    with pytest.warns(RegimeWarning):
        default_theta(1.0, 50.0)


def test_split_rejections():
    with pytest.raises(EqualDetunings):
        short_long_split(SystemParams(1, 0.01, 0.1, 0.1), 1)
    with pytest.raises(DegenerateRoots):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RegimeWarning)
            short_long_split(SystemParams(0.5, 0.0, 0.0, 0.3), 1)
    with pytest.warns(RegimeWarning):
        short_long_split(SystemParams(1, 0.5, 0, 0.3), 1)
    with pytest.raises(ValueError):
        short_long_split(SystemParams(1, 0.01, 0, 0.3), 3)


def test_from_metastable_level_most_weight_is_long(reference):
    # after a red count the atom sits in |2> and almost always waits a long time
    dec = short_long_split(reference, 2)
    assert 1 - dec.pi <= 0.05


@given(params_strategy, st.floats(0.0, 20.0))
@settings(deadline=None, max_examples=50)
def test_survival_symmetry_under_level_swap(p, t):
    a = WaitingLaw(p, 1)
    b = WaitingLaw(p.swapped(), 2)
    assert a.survival(t) == pytest.approx(b.survival(t), abs=1e-9)
