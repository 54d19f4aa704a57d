"""Closed-form photon counting statistics after a detection.

After a blue (red) count the atom sits in ``|1>`` (``|2>``), so everything
below is parameterised by that reset level ``k``. With
``a0(t||k>) = sum_i c_i exp(z_i t)`` the no-count probability, the waiting
time densities and all their moments reduce to finite sums over root pairs.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad, solve_ivp

from .errors import DegenerateRoots, EqualDetunings, LambdaShelveError, RegimeWarning
from .model import Channel, SystemParams, amplitude_matrix, trapping_probability
from .propagator import SpectralPropagator, characteristic_roots, evolve_ode_many

#: residue of a0 at a dark root must vanish to this (relative) level
DARK_RESIDUE_TOL = 1e-12
#: factor by which theta must clear each timescale it separates
THETA_MARGIN = 10.0


@dataclass(frozen=True)
class WaitingDecomposition:
    """Split of the waiting-time density into short and long components.

    ``pi`` is the weight of the long (dark period) component, ``theta`` the
    delay separating short from long gaps and ``rate_long = |2 Re z1|`` the
    decay rate of the long component, so ``t_long = 1 / rate_long``.
    ``short_mass`` is the integral of the short component.
    """

    pi: float
    t_short: float
    t_long: float
    theta: float
    rate_long: float
    short_mass: float


def _check_level(k):
    if k not in (1, 2):
        raise ValueError(f"initial level must be 1 or 2, got {k}")


class WaitingLaw:
    """No-count survival ``P(t||k>)`` and waiting density ``p(t||k>)``.

    Uses the closed form whenever the characteristic roots are distinct and
    falls back to ODE integration otherwise (``self.analytic`` is False).
    """

    def __init__(self, p: SystemParams, k: int):
        _check_level(k)
        self.params = p
        self.k = k
        self.gamma = p.gamma
        self.roots = characteristic_roots(p)
        self.trapping = trapping_probability(p, k)
        self.analytic = not self.roots.degenerate
        if not self.analytic:
            return
        prop = SpectralPropagator(p, self.roots)
        self.z = prop.z
        self.dark = prop.dark
        amp = prop.coefficients(k)  # amp[i, j]: root i, level j
        self.c = amp[:, 0].copy()
        self.s = self.z[:, None] + self.z.conj()[None, :]
        self.pair = self.c[:, None] * self.c.conj()[None, :]
        self.gram = amp @ amp.conj().T
        scale = max(1.0, float(np.abs(self.c).max()))
        bad = self.dark & (np.abs(self.c) > DARK_RESIDUE_TOL * scale)
        if bad.any():
            raise LambdaShelveError(
                f"a0 has residue {np.abs(self.c[bad]).max():.3g} at a non-decaying root"
            )
        # reduced form used by the hot path: diagonal terms plus upper pairs
        iu = np.triu_indices(3, 1)
        self._diag_rate = 2.0 * self.z.real
        self._diag_gram = self.gram.diagonal().real.copy()
        self._diag_pop = np.abs(self.c) ** 2
        self._off_s = self.s[iu]
        self._off_gram = 2.0 * self.gram[iu]
        self._off_pop = 2.0 * self.pair[iu]

    # -- evaluation -----------------------------------------------------
    def _combine(self, t, diag, off):
        # explicit sums rather than matmul: results must not depend on batch size
        t = np.asarray(t, dtype=float)
        out = np.zeros(t.shape)
        for rate, weight in zip(self._diag_rate, diag):
            if weight != 0:
                out = out + weight * np.exp(rate * t)
        for rate, weight in zip(self._off_s, off):
            if weight != 0:
                out = out + (weight * np.exp(rate * t)).real
        return out

    def _ode_amplitudes(self, t):
        t = np.asarray(t, dtype=float)
        flat = t.ravel()
        order = np.argsort(flat, kind="stable")
        init = np.zeros(3, dtype=complex)
        init[self.k] = 1.0
        a = np.empty((flat.size, 3), dtype=complex)
        a[order] = evolve_ode_many(self.params, init, flat[order])
        return a.reshape(t.shape + (3,))

    def survival(self, t):
        """Probability of no count in ``(0, t]``."""
        if self.analytic:
            out = np.clip(self._combine(t, self._diag_gram, self._off_gram), 0.0, 1.0)
            # the residue sum reproduces the initial state only up to rounding
            return np.where(np.asarray(t) == 0, 1.0, out)
        a = self._ode_amplitudes(t)
        return np.clip((np.abs(a) ** 2).sum(axis=-1), 0.0, 1.0)

    def excited_population(self, t):
        """``|a0(t||k>)|^2``."""
        if self.analytic:
            out = np.maximum(self._combine(t, self._diag_pop, self._off_pop), 0.0)
            return np.where(np.asarray(t) == 0, 0.0, out)
        return np.abs(self._ode_amplitudes(t)[..., 0]) ** 2

    def pdf(self, t):
        """Waiting-time density summed over both channels."""
        return self.gamma * self.excited_population(t)

    def long_component(self, t):
        """The ``|exp(z1 t)|^2`` part of the density."""
        t = np.asarray(t, dtype=float)
        return self.gamma * self._diag_pop[0] * np.exp(self._diag_rate[0] * t)

    def short_component(self, t):
        return self.pdf(t) - self.long_component(t)

    # -- integrals -------------------------------------------------------
    def _pair_sum(self, power, exclude=None):
        """``sum c_i conj(c_l) / s_il**power`` over decaying pairs."""
        keep = ~(self.dark[:, None] | self.dark[None, :])
        if exclude is not None:
            keep[exclude] = False
        return complex((self.pair[keep] / self.s[keep] ** power).sum())

    def truncated_moments(self, theta: float) -> tuple[float, float]:
        """``(int_0^theta p dt, int_0^theta t p dt)`` in closed form."""
        if not self.analytic:
            raise DegenerateRoots("truncated moments need distinct roots")
        keep = ~(self.dark[:, None] | self.dark[None, :])
        s, w = self.s[keep], self.gamma * self.pair[keep]
        e = np.exp(s * theta)
        m0 = (w * (e - 1.0) / s).sum()
        m1 = (w * (e * (s * theta - 1.0) + 1.0) / s**2).sum()
        return float(m0.real), float(m1.real)

    def emission_probability(self) -> float:
        """Probability that at least one more photon is ever detected."""
        if self.analytic:
            value = (-self.gamma * self._pair_sum(1)).real
        else:
            value = self._quadrature_emission()
        return min(1.0, max(0.0, value))

    def _quadrature_emission(self) -> float:
        decaying = [z.real for z in self.roots if z.real < -1e-12 * max(1.0, abs(z))]
        if not decaying:
            return 0.0
        slowest = min(abs(r) for r in decaying)
        t_end = 50.0 / slowest
        init = np.zeros(3, dtype=complex)
        init[self.k] = 1.0
        m = amplitude_matrix(self.params)
        sol = solve_ivp(
            lambda _, y: m @ y, (0.0, t_end), init, method="DOP853",
            rtol=1e-11, atol=1e-13, dense_output=True,
        )

        def dens(t):
            return self.gamma * abs(sol.sol(t)[0]) ** 2

        total, _ = quad(dens, 0.0, t_end, limit=500, epsabs=1e-13, epsrel=1e-11)
        # the tail decays no slower than exp(-2 |Re z|_min t)
        return total + dens(t_end) / (2.0 * slowest)


def no_count_probability(p: SystemParams, k: int, t):
    """``||exp(-K t)|k>||^2``: no detection within ``(0, t]`` after a reset to ``|k>``."""
    law = WaitingLaw(p, k)
    out = law.survival(t)
    return float(out) if np.ndim(out) == 0 else out


def waiting_density(p: SystemParams, k: int, j: Channel, t):
    """Density of the next count being on channel ``j`` at delay ``t``."""
    out = p.channel_rate(j) * WaitingLaw(p, k).excited_population(t)
    return float(out) if np.ndim(out) == 0 else out


def waiting_pdf(p: SystemParams, k: int, t):
    """Density of the delay to the next count on either channel."""
    out = WaitingLaw(p, k).pdf(t)
    return float(out) if np.ndim(out) == 0 else out


def emission_probability(p: SystemParams, k: int) -> float:
    """Integral of the waiting density over ``[0, inf)``.

    One whenever ``delta1 != delta2`` and both drives are on; below one when
    part of ``|k>`` overlaps a dark state.
    """
    return WaitingLaw(p, k).emission_probability()


def default_theta(t_fast: float, t_long: float) -> float:
    """Geometric mean of the fast and slow timescales.

    Warns when ``theta`` cannot clear both by ``THETA_MARGIN``.
    """
    theta = math.sqrt(t_fast * t_long)
    if not (THETA_MARGIN * t_fast <= theta <= t_long / THETA_MARGIN):
        warnings.warn(
            f"timescales {t_fast:.3g} and {t_long:.3g} are not separated enough "
            "for a short/long classification",
            RegimeWarning,
            stacklevel=3,
        )
    return theta


def short_long_split(p: SystemParams, k: int) -> WaitingDecomposition:
    """Exact short/long decomposition of ``p(t||k>)``.

    The long component is the ``|c1|^2 exp(2 Re z1 t)`` term of the density,
    everything else (including cross terms with ``z1``) is short.

    Raises
    ------
    EqualDetunings
        If ``delta1 == delta2``: the metastable root does not decay.
    DegenerateRoots
        If the roots are not pairwise distinct.
    """
    _check_level(k)
    if p.equal_detunings:
        raise EqualDetunings("no long/short split at delta1 == delta2: dark periods are infinite")
    if not p.in_shelving_regime():
        warnings.warn(f"{p} is outside the shelving regime", RegimeWarning, stacklevel=2)
    law = WaitingLaw(p, k)
    if not law.analytic:
        raise DegenerateRoots("short/long split needs distinct roots")
    if law.dark[0]:
        raise ValueError("the metastable root does not decay for these parameters")
    rate_long = float(abs(law._diag_rate[0]))
    pi = law.gamma * law._diag_pop[0] / rate_long
    short_mass = (-law.gamma * law._pair_sum(1, exclude=(0, 0))).real
    first_moment = (law.gamma * law._pair_sum(2, exclude=(0, 0))).real
    t_long = 1.0 / rate_long
    t_fast = 1.0 / abs(law._diag_rate[1])
    return WaitingDecomposition(
        pi=float(pi),
        t_short=float(first_moment / (1.0 - pi)),
        t_long=t_long,
        theta=default_theta(t_fast, t_long),
        rate_long=float(rate_long),
        short_mass=float(short_mass),
    )
