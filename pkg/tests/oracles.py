"""Independent reference implementations used only by the tests.

Everything here is written against the raw generator matrix with mpmath
(high precision determinants and polynomial roots) or plain scipy, never
through the package's own closed forms.
"""

import itertools

import mpmath as mp
import numpy as np

mp.mp.dps = 40


def generator_matrix(omega1, omega2, delta1, delta2, gamma1, gamma2):
    """``K`` assembled entry by entry as an mpmath matrix."""
    g = mp.mpf(gamma1) + mp.mpf(gamma2)
    k = mp.matrix(3, 3)
    k[0, 0] = g / 2
    k[0, 1] = k[1, 0] = 1j * mp.mpf(omega1) / 2
    k[0, 2] = k[2, 0] = 1j * mp.mpf(omega2) / 2
    k[1, 1] = 1j * mp.mpf(delta1)
    k[2, 2] = 1j * mp.mpf(delta2)
    return k


def char_matrix(k, z):
    # z I - M with M = -K
    return mp.eye(3) * z + k


def cubic_from_determinant(k):
    """Monic cubic coefficients of det(zI - M) by interpolating four samples."""
    nodes = [mp.mpf(x) for x in (0, 1, -1, 2)]
    vals = [mp.det(char_matrix(k, z)) for z in nodes]
    vander = mp.matrix([[z**3, z**2, z, 1] for z in nodes])
    coeffs = mp.lu_solve(vander, mp.matrix(vals))
    return [coeffs[i] for i in range(4)]


def roots(params):
    k = generator_matrix(*params)
    coeffs = cubic_from_determinant(k)
    return mp.polyroots(coeffs, maxsteps=200, extraprec=200), coeffs


def cofactor(mat, row, col):
    rows = [r for r in range(3) if r != row]
    cols = [c for c in range(3) if c != col]
    minor = mp.matrix([[mat[r, c] for c in cols] for r in rows])
    return (-1) ** (row + col) * mp.det(minor)


def residues(params, level):
    """Residues of the Laplace-transformed a0 after a reset to ``|level>``."""
    k = generator_matrix(*params)
    zs, coeffs = roots(params)
    out = []
    for i, z in enumerate(zs):
        # adj(A)[0, level] is the cofactor C[level, 0]
        adj = cofactor(char_matrix(k, z), level, 0)
        denom = mp.fprod(z - w for j, w in enumerate(zs) if j != i)
        out.append(adj / denom)
    return zs, out


def decomposition(params, level=1):
    """``(pi, t_short, t_long, emission)`` with the slowest root as the long one."""
    zs, cs = residues(params, level)
    order = sorted(range(3), key=lambda i: abs(mp.re(zs[i])))
    zs = [zs[i] for i in order]
    cs = [cs[i] for i in order]
    g = mp.mpf(params[4]) + mp.mpf(params[5])
    emission = mp.mpf(0)
    short_mass = mp.mpf(0)
    first = mp.mpf(0)
    for i, l in itertools.product(range(3), repeat=2):
        s = zs[i] + mp.conj(zs[l])
        term = cs[i] * mp.conj(cs[l])
        emission += mp.re(-g * term / s)
        if (i, l) != (0, 0):
            short_mass += mp.re(-g * term / s)
            first += mp.re(g * term / s**2)
    rate = -2 * mp.re(zs[0])
    pi = g * abs(cs[0]) ** 2 / rate
    return pi, first / short_mass, 1 / rate, emission, zs


def cardano(coeffs):
    """Roots of a monic complex cubic by Cardano's formula (double precision)."""
    _, b, c, d = (complex(x) for x in coeffs)
    p = c - b * b / 3
    q = 2 * b**3 / 27 - b * c / 3 + d
    disc = np.sqrt(q * q / 4 + p**3 / 27 + 0j)
    u = (-q / 2 + disc) ** (1 / 3)
    if abs(u) < 1e-300:
        u = (-q / 2 - disc) ** (1 / 3)
    w = np.exp(2j * np.pi / 3)
    out = []
    for m in range(3):
        um = u * w**m
        vm = -p / (3 * um) if abs(um) > 1e-300 else 0
        out.append(um + vm - b / 3)
    return out
