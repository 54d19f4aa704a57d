"""No-count (conditional) evolution ``exp(-K t)`` of the atomic amplitudes.

Two independent routes are provided:

* a closed form built from the three roots of the characteristic cubic and
  the residues of the Laplace-transformed amplitude equations
  (:class:`SpectralPropagator`, :func:`evolve_analytic`), and
* direct adaptive integration of ``da/dt = M a`` (:func:`evolve_ode`).

The closed form needs pairwise distinct roots; the ODE route always works.
"""

from __future__ import annotations

import cmath
import itertools
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .errors import DegenerateRoots, EqualDetunings, RegimeWarning, StepUnderflow
from .model import SystemParams, amplitude_matrix, dark_states

#: relative separation below which two roots count as coincident
DEGENERACY_TOL = 1e-6
DEFAULT_ODE_TOL = 1e-10


@dataclass(frozen=True)
class Amplitudes:
    """Unnormalised amplitudes over ``(|0>, |1>, |2>)``."""

    a0: complex
    a1: complex
    a2: complex

    @classmethod
    def basis(cls, k: int) -> "Amplitudes":
        v = [0j, 0j, 0j]
        v[k] = 1 + 0j
        return cls(*v)

    @classmethod
    def from_array(cls, v) -> "Amplitudes":
        v = np.asarray(v, dtype=complex)
        return cls(complex(v[0]), complex(v[1]), complex(v[2]))

    def as_array(self) -> np.ndarray:
        return np.array([self.a0, self.a1, self.a2], dtype=complex)

    @property
    def norm2(self) -> float:
        return abs(self.a0) ** 2 + abs(self.a1) ** 2 + abs(self.a2) ** 2


@dataclass(frozen=True)
class RootTriple:
    """Roots of the characteristic cubic, slowest-decaying first."""

    z1: complex
    z2: complex
    z3: complex
    min_separation: float
    degenerate: bool

    @classmethod
    def from_roots(cls, roots) -> "RootTriple":
        z = [complex(r) for r in roots]
        sep = min(abs(a - b) for a, b in itertools.combinations(z, 2))
        scale = max(abs(r) for r in z)
        return cls(z[0], z[1], z[2], sep, sep < DEGENERACY_TOL * scale)

    def as_array(self) -> np.ndarray:
        return np.array([self.z1, self.z2, self.z3], dtype=complex)

    def __iter__(self):
        return iter((self.z1, self.z2, self.z3))


def cubic_coefficients(p: SystemParams) -> np.ndarray:
    """Monic coefficients ``[1, b, c, d]`` of ``det(z I - M)``.

    ``det(z I - M) = (z + G/2)(z + i d1)(z + i d2)
    + (W1^2/4)(z + i d2) + (W2^2/4)(z + i d1)``.
    """
    g = 0.5 * p.gamma
    e1, e2 = 1j * p.delta1, 1j * p.delta2
    q1, q2 = 0.25 * p.omega1**2, 0.25 * p.omega2**2
    return np.array(
        [
            1.0,
            g + e1 + e2,
            g * (e1 + e2) + e1 * e2 + q1 + q2,
            g * e1 * e2 + q1 * e2 + q2 * e1,
        ],
        dtype=complex,
    )


def characteristic_polynomial(p: SystemParams, z):
    """Evaluate ``det(z I - M)`` (vectorised over ``z``)."""
    b = cubic_coefficients(p)
    z = np.asarray(z, dtype=complex)
    return ((z + b[1]) * z + b[2]) * z + b[3]


def _polish(coeffs, z, iterations=3):
    """Newton refinement on the cubic; keeps a step only if it helps."""
    b = coeffs
    for _ in range(iterations):
        f = ((z + b[1]) * z + b[2]) * z + b[3]
        df = (3 * z + 2 * b[1]) * z + b[2]
        if df == 0 or f == 0:
            break
        zn = z - f / df
        fn = ((zn + b[1]) * zn + b[2]) * zn + b[3]
        if abs(fn) >= abs(f):
            break
        z = zn
    return z


def order_roots(roots, rtol=1e-12):
    """Sort by ``|Re z|``; near-ties are ordered by ascending ``|Im z|``."""
    roots = sorted((complex(r) for r in roots), key=lambda z: abs(z.real))
    scale = max(1.0, max(abs(z) for z in roots))
    changed = True
    while changed:
        changed = False
        for i in range(len(roots) - 1):
            a, b = roots[i], roots[i + 1]
            if abs(abs(a.real) - abs(b.real)) <= rtol * scale and abs(b.imag) < abs(a.imag):
                roots[i], roots[i + 1] = b, a
                changed = True
    return roots


def characteristic_roots(p: SystemParams) -> RootTriple:
    """All three roots of the characteristic cubic of the amplitude equations.

    The roots are the eigenvalues of ``M = -K`` (robust for complex
    coefficients), refined by Newton steps on the cubic itself. ``z1`` is the
    root with the smallest ``|Re z|``, i.e. the slow, metastable one.
    """
    coeffs = cubic_coefficients(p)
    eig = np.linalg.eigvals(amplitude_matrix(p))
    roots = [_polish(coeffs, complex(z)) for z in eig]
    scale = max(abs(z) for z in roots)
    cluster = set()
    for i, j in itertools.combinations(range(3), 2):
        if abs(roots[i] - roots[j]) < DEGENERACY_TOL * scale:
            cluster |= {i, j}
    if cluster:
        # members of a multiple root are only sqrt(eps) accurate but their sum
        # is well conditioned: hand the trace defect back to them
        defect = -coeffs[1] - sum(roots)
        for i in cluster:
            roots[i] += defect / len(cluster)
    return RootTriple.from_roots(order_roots(roots))


def _zeta(p: SystemParams) -> complex:
    dd = p.delta2 - p.delta1
    o1s, o2s = p.omega1**2, p.omega2**2
    a = o1s - 4 * p.delta2**2 + 4 * p.delta1 * p.delta2
    num = o2s * dd * (1j * a - 2 * p.gamma1 * dd)
    den = a**2 + 4 * p.gamma1**2 * dd**2
    return num / den


def approx_roots(p: SystemParams) -> RootTriple:
    """Perturbative roots valid for omega1 >> omega2, gamma1 >> gamma2, omega2.

    ``z1 = -i delta2 + zeta`` is the metastable root; ``z2``, ``z3`` are the
    roots of the strongly driven two-level problem.
    """
    if p.delta1 == p.delta2:
        raise EqualDetunings("zeta is singular for delta1 == delta2; use equal_detuning_roots")
    if not p.in_shelving_regime():
        warnings.warn(f"{p} is outside the shelving regime", RegimeWarning, stacklevel=2)
    g, d1 = p.gamma, p.delta1
    zeta = 0j if p.omega2 == 0 else _zeta(p)
    root = cmath.sqrt(g**2 - 4 * p.omega1**2 - 4 * d1**2 - 4j * g * d1)
    centre = -0.25 * g - 0.5j * d1
    return RootTriple.from_roots([-1j * p.delta2 + zeta, centre + 0.25 * root, centre - 0.25 * root])


def equal_detuning_roots(p: SystemParams) -> RootTriple:
    """Exact roots when ``delta1 == delta2 == delta``: ``-i delta`` and a quadratic pair."""
    if p.delta1 != p.delta2:
        raise ValueError("equal_detuning_roots requires delta1 == delta2")
    g, d = p.gamma, p.delta1
    root = cmath.sqrt(g**2 - 4 * p.omega1**2 - 4 * p.omega2**2 - 4 * d**2 - 4j * g * d)
    centre = -0.25 * g - 0.5j * d
    return RootTriple.from_roots([-1j * d, centre + 0.25 * root, centre - 0.25 * root])


def adjugate(p: SystemParams, z: complex) -> np.ndarray:
    """Adjugate of ``z I - M``; column ``k`` is the Laplace numerator for ``|k>``."""
    u = z + 0.5 * p.gamma
    v1 = z + 1j * p.delta1
    v2 = z + 1j * p.delta2
    h1, h2 = 0.5 * p.omega1, 0.5 * p.omega2
    return np.array(
        [
            [v1 * v2, -1j * h1 * v2, -1j * h2 * v1],
            [-1j * h1 * v2, u * v2 + h2 * h2, -h1 * h2],
            [-1j * h2 * v1, -h1 * h2, u * v1 + h1 * h1],
        ],
        dtype=complex,
    )


class SpectralPropagator:
    """Closed-form ``exp(M t) = sum_i R_i exp(z_i t)`` by partial fractions.

    ``R_i = adj(z_i I - M) / prod_{l != i} (z_i - z_l)``. Dark roots (known
    exactly from the parameters) replace their numerical counterparts so that
    non-decaying components have a real part of exactly zero.

    Raises
    ------
    DegenerateRoots
        If two roots are closer than ``DEGENERACY_TOL * max|z|``.
    """

    def __init__(self, p: SystemParams, roots: RootTriple | None = None):
        self.params = p
        self.roots = roots if roots is not None else characteristic_roots(p)
        if self.roots.degenerate:
            raise DegenerateRoots(
                f"roots separated by {self.roots.min_separation:.3g}; use evolve_ode"
            )
        z = self.roots.as_array()
        self.dark = np.zeros(3, dtype=bool)
        for value, _ in dark_states(p):
            i = int(np.argmin(np.abs(z - value)))
            z[i] = value
            self.dark[i] = True
        self.z = z
        self.residues = np.empty((3, 3, 3), dtype=complex)
        for i in range(3):
            others = [z[l] for l in range(3) if l != i]
            self.residues[i] = adjugate(p, z[i]) / ((z[i] - others[0]) * (z[i] - others[1]))

    def coefficients(self, k: int) -> np.ndarray:
        """``C[i, j]`` with ``a_j(t||k>) = sum_i C[i, j] exp(z_i t)``."""
        return self.residues[:, :, k]

    def amplitudes(self, k: int, t) -> np.ndarray:
        """Amplitudes ``a_j(t||k>)``; output shape ``t.shape + (3,)``."""
        t = np.asarray(t, dtype=float)
        e = np.exp(t[..., None] * self.z)
        return e @ self.coefficients(k)

    def matrix(self, t: float) -> np.ndarray:
        """The full propagator ``exp(-K t)`` as a 3x3 matrix."""
        return np.einsum("i,ijk->jk", np.exp(self.z * t), self.residues)

    def apply(self, vector, t: float) -> np.ndarray:
        return self.matrix(t) @ np.asarray(vector, dtype=complex)


def evolve_analytic(p: SystemParams, k: int, t: float) -> Amplitudes:
    """Closed-form ``exp(-K t)|k>`` for ``k in {1, 2}``."""
    if k not in (1, 2):
        raise ValueError(f"initial level must be 1 or 2, got {k}")
    if t < 0:
        raise ValueError("t must be >= 0")
    if t == 0:
        return Amplitudes.basis(k)
    return Amplitudes.from_array(SpectralPropagator(p).amplitudes(k, t))


def evolve_ode_many(p: SystemParams, initial, times, tol: float = DEFAULT_ODE_TOL) -> np.ndarray:
    """Integrate ``da/dt = M a`` and sample at the sorted ``times``.

    Returns an array of shape ``(len(times), 3)``.
    """
    if tol <= 0:
        raise ValueError("tol must be > 0")
    times = np.asarray(times, dtype=float)
    if np.any(times < 0) or np.any(np.diff(times) < 0):
        raise ValueError("times must be non-negative and sorted")
    y0 = initial.as_array() if isinstance(initial, Amplitudes) else np.asarray(initial, dtype=complex)
    out = np.empty((times.size, 3), dtype=complex)
    if times.size == 0:
        return out
    t_end = float(times[-1])
    if t_end == 0:
        out[:] = y0
        return out
    m = amplitude_matrix(p)
    sol = solve_ivp(
        lambda _, y: m @ y,
        (0.0, t_end),
        y0,
        method="DOP853",
        t_eval=times,
        rtol=tol,
        atol=tol,
    )
    if sol.status != 0:
        raise StepUnderflow(sol.message)
    return sol.y.T.copy()


def evolve_ode(p: SystemParams, initial, t: float, tol: float = DEFAULT_ODE_TOL) -> Amplitudes:
    """Adaptive Runge-Kutta (8th order Dormand-Prince) solution at time ``t``."""
    if t < 0:
        raise ValueError("t must be >= 0")
    return Amplitudes.from_array(evolve_ode_many(p, initial, [t], tol)[0])
