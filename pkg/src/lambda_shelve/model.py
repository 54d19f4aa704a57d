"""Physical parameters of the driven Lambda atom and its generators.

Basis order is fixed to ``(|0>, |1>, |2>)`` everywhere: ``|0>`` is the
excited level, ``|1>`` the lower level of the strong ("blue") transition and
``|2>`` the metastable lower level of the weak ("red") transition.

All quantities are dimensionless; the documented convention is ``gamma1 = 1``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .errors import InvalidParameters

#: default ratio used by :meth:`SystemParams.in_shelving_regime`
SHELVING_RATIO = 100.0


class Channel(enum.IntEnum):
    """Detection channel; the value is the lower level the atom jumps to."""

    BLUE = 1
    RED = 2

    @property
    def label(self) -> str:
        return self.name.lower()


@dataclass(frozen=True)
class SystemParams:
    """Rabi frequencies, detunings and decay rates of the Lambda atom.

    Parameters
    ----------
    omega1, omega2 : float
        Rabi frequencies of the blue ``|1>-|0>`` and red ``|2>-|0>`` drives.
    delta1, delta2 : float
        Laser detunings.
    gamma1, gamma2 : float
        Total spontaneous decay rates into ``|1>`` and ``|2>``.
    """

    omega1: float = 0.0
    omega2: float = 0.0
    delta1: float = 0.0
    delta2: float = 0.0
    gamma1: float = 1.0
    gamma2: float = 0.0
    # relaxed only by unit tests that need otherwise-invalid parameter sets
    validate: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        for f in fields(self):
            if f.name == "validate":
                continue
            value = getattr(self, f.name)
            try:
                value = float(value)
            except (TypeError, ValueError):
                raise InvalidParameters(f.name, f"not a real number: {value!r}") from None
            object.__setattr__(self, f.name, value)
            if not self.validate:
                continue
            if not math.isfinite(value):
                raise InvalidParameters(f.name, "must be finite")
        if self.validate:
            if self.gamma1 < 0:
                raise InvalidParameters("gamma1", "must be >= 0")
            if self.gamma2 < 0:
                raise InvalidParameters("gamma2", "must be >= 0")
            if self.gamma1 + self.gamma2 <= 0:
                raise InvalidParameters("gamma1", "gamma1 + gamma2 must be > 0")

    @property
    def gamma(self) -> float:
        """Total decay rate of the excited level."""
        return self.gamma1 + self.gamma2

    def channel_rate(self, channel: Channel) -> float:
        return self.gamma1 if Channel(channel) is Channel.BLUE else self.gamma2

    def in_shelving_regime(self, ratio: float = SHELVING_RATIO) -> bool:
        """True when omega1 >> omega2, gamma1 >> gamma2 and gamma1 >> omega2.

        ``>>`` is read as "at least ``ratio`` times larger"; a vanishing
        strong drive or strong decay never qualifies.
        """
        o1, o2 = abs(self.omega1), abs(self.omega2)
        if o1 == 0 or self.gamma1 == 0:
            return False
        return o1 >= ratio * o2 and self.gamma1 >= ratio * self.gamma2 and self.gamma1 >= ratio * o2

    @property
    def equal_detunings(self) -> bool:
        return self.delta1 == self.delta2

    def swapped(self) -> "SystemParams":
        """Parameters with the roles of levels 1 and 2 exchanged."""
        return replace(
            self,
            omega1=self.omega2,
            omega2=self.omega1,
            delta1=self.delta2,
            delta2=self.delta1,
            gamma1=self.gamma2,
            gamma2=self.gamma1,
        )

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self) if f.name != "validate"}


def build_hamiltonian(p: SystemParams) -> np.ndarray:
    """Return the 3x3 Hamiltonian of the driven atom in the rotating frame."""
    h = np.zeros((3, 3), dtype=complex)
    for k, omega, delta in ((1, p.omega1, p.delta1), (2, p.omega2, p.delta2)):
        h[0, k] = h[k, 0] = 0.5 * omega
        h[k, k] = delta
    return h


def build_generator(p: SystemParams) -> np.ndarray:
    """Return ``K = iH + (gamma/2)|0><0|``; no-count evolution is ``exp(-K t)``."""
    k = 1j * build_hamiltonian(p)
    k[0, 0] += 0.5 * p.gamma
    return k


def amplitude_matrix(p: SystemParams) -> np.ndarray:
    """Linear generator ``M = -K`` of the amplitude equations ``da/dt = M a``."""
    return -build_generator(p)


def dark_states(p: SystemParams) -> list[tuple[complex, np.ndarray]]:
    """Non-decaying eigenpairs of ``M``.

    A dark state has no excited-level component, so it never emits. They
    exist only when a drive is off or when the detunings coincide (two-photon
    resonance). Returns ``(eigenvalue, unit vector)`` pairs, mutually
    orthogonal.
    """
    o1, o2 = p.omega1, p.omega2
    out = []
    if o1 == 0 and o2 == 0:
        out.append((-1j * p.delta1, np.array([0, 1, 0], dtype=complex)))
        out.append((-1j * p.delta2, np.array([0, 0, 1], dtype=complex)))
    elif o1 == 0:
        out.append((-1j * p.delta1, np.array([0, 1, 0], dtype=complex)))
    elif o2 == 0:
        out.append((-1j * p.delta2, np.array([0, 0, 1], dtype=complex)))
    elif p.delta1 == p.delta2:
        # rescale first so tiny (even subnormal) drives keep full precision
        big = max(abs(o1), abs(o2))
        a, b = o1 / big, o2 / big
        norm = math.hypot(a, b)
        v = np.array([0.0, b / norm, -a / norm]).astype(complex)
        out.append((-1j * p.delta1, v))
    return out


def trapping_probability(p: SystemParams, k: int) -> float:
    """Probability that an atom reset to ``|k>`` never emits again.

    Equals the squared projection of ``|k>`` on the dark subspace; the dark
    states are also eigenvectors of ``K^dagger`` so their orthogonal
    complement is invariant and decays completely.
    """
    return float(sum(abs(v[k]) ** 2 for _, v in dark_states(p)))
