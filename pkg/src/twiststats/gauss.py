"""Quadratic Gauss sums tau_m(n) and their normalised form G_m(n), n odd.

tau_m(n) = sum_{b mod n} (b/n) e(mb/n) with the Jacobi symbol, and

    G_m(n) = ((1 - i)/2 + (-1/n)(1 + i)/2) tau_m(n),

so G = tau when n = 1 (mod 4) and G = -i tau when n = 3 (mod 4).
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .arith import factorint, jacobi, prime_table

ORACLE_LIMIT = 10_000


def _squarefree_split(n):
    """n = s^2 r with r squarefree; returns (s, r)."""
    s, r = 1, 1
    for p, e in factorint(n).items():
        s *= p ** (e // 2)
        if e % 2:
            r *= p
    return s, r


@dataclass(frozen=True)
class GaussSumValue:
    """coef * sqrt(radicand) * i**phase, radicand squarefree, phase mod 4.

    ``tags`` records which closed-form case produced each prime-power factor:
    'zero', 'power' (-p^alpha), 'root' ((m'/p) p^(alpha+1/2)) or 'totient'.
    """

    coef: int
    radicand: int = 1
    phase: int = 0
    tags: tuple = ()

    def __post_init__(self):
        if self.radicand < 1:
            raise ValueError("radicand must be positive")
        object.__setattr__(self, "phase", self.phase % 4)
        if self.coef == 0:
            object.__setattr__(self, "radicand", 1)
            object.__setattr__(self, "phase", 0)

    def __mul__(self, other):
        g = math.gcd(self.radicand, other.radicand)
        coef = self.coef * other.coef * g
        rad = (self.radicand // g) * (other.radicand // g)
        return GaussSumValue(coef, rad, self.phase + other.phase, self.tags + other.tags)

    def rotate(self, quarter_turns):
        return GaussSumValue(self.coef, self.radicand, self.phase + quarter_turns, self.tags)

    @property
    def is_zero(self):
        return self.coef == 0

    @property
    def abs2(self):
        """|value|^2 as an exact integer."""
        return self.coef * self.coef * self.radicand

    @property
    def value(self):
        return complex(self.coef * math.sqrt(self.radicand)) * (1j ** self.phase)

    def __complex__(self):
        return self.value

    def same_as(self, other):
        """Exact equality of the represented complex numbers."""
        if self.is_zero or other.is_zero:
            return self.is_zero and other.is_zero
        a = self.coef if self.phase < 2 else -self.coef
        b = other.coef if other.phase < 2 else -other.coef
        return (a, self.radicand, self.phase % 2) == (b, other.radicand, other.phase % 2)


ONE = GaussSumValue(1)


def _check_odd(n):
    n = int(n)
    if n < 1 or n % 2 == 0:
        raise ValueError(f"modulus must be odd and positive, got {n}")
    return n


def minus_one_char(n):
    """(-1/n) for odd n > 0."""
    return 1 if n % 4 == 1 else -1


def gauss_prime_power(m, p, beta):
    """G_m(p^beta) by the closed-form case split, alpha = v_p(m) (inf for m = 0)."""
    if beta == 0:
        return ONE
    if m == 0:
        alpha = math.inf
    else:
        alpha = 0
        mm = abs(m)
        while mm % p == 0:
            mm //= p
            alpha += 1
    if beta <= alpha:
        if beta % 2 == 0:
            return GaussSumValue(p ** (beta - 1) * (p - 1), tags=("totient",))
        return GaussSumValue(0, tags=("zero",))
    if beta == alpha + 1:
        if beta % 2 == 0:
            return GaussSumValue(-(p ** alpha), tags=("power",))
        unit = m // p ** alpha
        return GaussSumValue(jacobi(unit, p) * p ** alpha, p, tags=("root",))
    return GaussSumValue(0, tags=("zero",))


def gauss_closed_exact(m, n):
    """G_m(n) as an exact :class:`GaussSumValue` (product over p^beta || n)."""
    n = _check_odd(n)
    m = int(m)
    out = ONE
    if n == 1:
        return out
    pt = prime_table(n) if n <= 1 << 22 else None
    fac = pt.factor(n) if pt is not None else factorint(n)
    for p, beta in sorted(fac.items()):
        out = out * gauss_prime_power(m, p, beta)
        if out.is_zero:
            return out
    return out


def gauss_closed(m, n):
    """G_m(n) as a complex number."""
    return gauss_closed_exact(m, n).value


def tau_closed_exact(m, n):
    """tau_m(n) from the closed form: tau = G for n = 1 (4), tau = i G otherwise."""
    g = gauss_closed_exact(m, n)
    return g if n % 4 == 1 else g.rotate(1)


# --------------------------------------------------------------------------
# brute force oracle
# --------------------------------------------------------------------------

def _jacobi_row(n):
    b = np.arange(n, dtype=np.int64)
    return kernels.jacobi_array(b, np.full(n, n, dtype=np.int64)).astype(np.float64)


def tau_brute_many(ms, n):
    """tau_m(n) for every m in ``ms`` by direct summation over b mod n."""
    n = _check_odd(n)
    if n > ORACLE_LIMIT:
        raise ValueError(f"oracle limited to n <= {ORACLE_LIMIT}")
    ms = np.atleast_1d(np.asarray(ms, dtype=np.int64))
    chi = _jacobi_row(n)
    roots = np.exp(2j * np.pi * np.arange(n) / n)
    b = np.arange(n, dtype=np.int64)
    # reduce m*b mod n before exponentiating so the phase stays exact
    idx = np.mod(np.outer(ms, b), n)
    return (roots[idx] * chi).sum(axis=1)


def tau_brute(m, n):
    """tau_m(n) = sum_{b mod n} (b/n) e(mb/n), direct summation."""
    return complex(tau_brute_many([m], n)[0])


def g_from_tau(tau, n):
    """Apply the prefactor ((1-i)/2 + (-1/n)(1+i)/2)."""
    eps = minus_one_char(n)
    return ((1 - 1j) / 2 + eps * (1 + 1j) / 2) * tau


def gauss_brute(m, n):
    return g_from_tau(tau_brute(m, n), n)


def _classify(z, tol):
    """(abs^2 rounded, quarter-turn class) of a numerically computed Gauss sum."""
    a2 = abs(z) ** 2
    r = round(a2)
    if abs(a2 - r) > tol * max(1.0, a2):
        return None
    if r == 0:
        return (0, 0)
    ang = cmath.phase(z) / (math.pi / 2)
    q = round(ang)
    if abs(ang - q) > tol:
        return None
    return (r, q % 4)


def compare_exact(exact, z, tol=1e-9):
    """True when the float ``z`` equals ``exact`` by magnitude^2 and quarter-turn class
    and also agrees numerically to ``tol * max(1, |z|)``."""
    cls = _classify(z, tol)
    if cls is None:
        return False
    if exact.is_zero:
        return cls == (0, 0)
    want_phase = exact.phase if exact.coef > 0 else (exact.phase + 2) % 4
    if cls != (exact.abs2, want_phase):
        return False
    return abs(exact.value - z) <= tol * max(1.0, abs(z))


@dataclass
class GaussCheckResult:
    nmax: int
    mmax: int
    checked: int
    mismatches: list

    @property
    def ok(self):
        return not self.mismatches


def check_table(nmax, mmax, tol=1e-9):
    """Compare closed form against brute force for odd n <= nmax, |m| <= mmax."""
    ms = np.arange(-mmax, mmax + 1)
    bad = []
    checked = 0
    for n in range(1, nmax + 1, 2):
        taus = tau_brute_many(ms, n)
        for m, t in zip(ms.tolist(), taus):
            g = g_from_tau(t, n)
            checked += 1
            if not compare_exact(gauss_closed_exact(m, n), g, tol):
                bad.append((m, n, complex(g), gauss_closed(m, n)))
    return GaussCheckResult(nmax, mmax, checked, bad)
