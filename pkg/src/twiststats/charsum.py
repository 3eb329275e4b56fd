"""Smoothed quadratic character sums over a twist class and their main term."""
from __future__ import annotations

import functools
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from . import kernels
from .arith import TwistFamily, enumerate_family, factorint, is_squarefree
from .parallel import chunk_ranges, pmap

log = logging.getLogger(__name__)


def _smoothstep(u):
    """exp(-1/u)-based step: 0 for u <= 0, 1 for u >= 1, C^infinity."""
    u = np.asarray(u, dtype=np.float64)
    out = np.zeros_like(u)
    inside = (u > 0) & (u < 1)
    ui = u[inside]
    a = np.exp(-1.0 / ui)
    b = np.exp(-1.0 / (1.0 - ui))
    out[inside] = a / (a + b)
    out[u >= 1] = 1.0
    return out


@dataclass(frozen=True)
class SmoothCutoff:
    """Phi supported on [lo, hi], equal to 1 on [plateau_lo, plateau_hi]."""

    lo: float = 0.5
    plateau_lo: float = 1.0
    plateau_hi: float = 2.0
    hi: float = 2.5

    def __call__(self, t):
        t = np.asarray(t, dtype=np.float64)
        rise = _smoothstep((t - self.lo) / (self.plateau_lo - self.lo))
        fall = _smoothstep((self.hi - t) / (self.hi - self.plateau_hi))
        return rise * fall

    @property
    def hat0(self):
        """Integral of Phi (Fourier transform at 0)."""
        return _cutoff_integral(self)


@functools.lru_cache(maxsize=8)
def _cutoff_integral(cut):
    def f(t):
        return float(cut(np.array([t]))[0])

    pieces = [(cut.lo, cut.plateau_lo), (cut.plateau_hi, cut.hi)]
    total = cut.plateau_hi - cut.plateau_lo
    for a, b in pieces:
        val, _ = integrate.quad(f, a, b, epsabs=1e-14, epsrel=1e-13, limit=200)
        total += val
    return total


DEFAULT_CUTOFF = SmoothCutoff()


def _primes_of(n):
    return sorted(factorint(n)) if abs(n) > 1 else []


def _check_pre(n, v, family):
    n = int(n)
    v = int(v)
    if n < 1 or v < 1:
        raise ValueError("n and v must be positive")
    n0 = family.N0
    if math.gcd(n, n0) != 1:
        raise ValueError(f"(n, N0) = ({n}, {n0}) not coprime")
    if math.gcd(n, v) != 1:
        raise ValueError(f"(n, v) = ({n}, {v}) not coprime")
    if math.gcd(v, n0) != 1:
        raise ValueError(f"(v, N0) = ({v}, {n0}) not coprime")
    if v > 1 and not is_squarefree(v):
        raise ValueError(f"v={v} is not squarefree")
    return n, v


def in_regime(n, v, X, eps=0.05):
    """v sqrt(n) <= X^(1/2 - eps)."""
    return v * math.sqrt(n) <= X ** (0.5 - eps)


def _chunk_sum(task):
    n, v, n0, kappa, a, X, cut, lo, hi = task
    fam = _ClassOnly(n0, kappa, a)
    d = enumerate_family(fam, lo, hi)
    if v > 1:
        d = d[d % v == 0]
    if d.size == 0:
        return 0.0
    absd = np.abs(d)
    w = cut(absd / X)
    if n == 1:
        chi = np.ones(absd.shape, dtype=np.float64)
    else:
        chi = kernels.jacobi_array(n % absd, absd).astype(np.float64)
    return math.fsum((w * chi).tolist())


@dataclass(frozen=True)
class _ClassOnly:
    # picklable stand-in for TwistFamily: the class already fixes the root number
    N0: int
    kappa: int
    a: int


def char_sum(n, v, family: TwistFamily, X, cutoff=DEFAULT_CUTOFF, workers=None):
    """sum over d in F(kappa, a) with v | d of chi_d(n) Phi(kappa d / X)."""
    n, v = _check_pre(n, v, family)
    X = float(X)
    lo = cutoff.lo * X
    hi = cutoff.hi * X
    tasks = [(n, v, family.N0, family.kappa, family.a, X, cutoff, a, b)
             for a, b in chunk_ranges(math.floor(lo), math.ceil(hi))]
    parts = pmap(_chunk_sum, tasks, workers)
    return math.fsum(parts)


def main_term(n, v, X, cutoff=DEFAULT_CUTOFF, N0=8):
    """delta(n square) X/(v N0) prod_{p | nv} (1 + 1/p)^-1 prod_{p !| N0} (1 - p^-2) Phi^(0)."""
    n = int(n)
    v = int(v)
    r = math.isqrt(n)
    if r * r != n:
        return 0.0
    local = 1.0
    for p in _primes_of(n * v):
        local /= 1.0 + 1.0 / p
    euler = 6.0 / math.pi ** 2
    for p in _primes_of(N0):
        euler /= 1.0 - 1.0 / (p * p)
    return float(X) / (v * N0) * local * euler * cutoff.hat0


@dataclass
class CharSumResult:
    n: int
    v: int
    X: float
    lhs: float
    main: float
    error: float
    ratio: float
    in_regime: bool

    def as_dict(self):
        return {"lhs": self.lhs, "main": self.main, "error": self.error,
                "ratio": self.ratio}


def char_sum_report(n, v, family, X, cutoff=DEFAULT_CUTOFF, eps=0.05, workers=None):
    """lhs, main term, their difference and ratio; warns outside v sqrt(n) <= X^(1/2-eps)."""
    ok = in_regime(n, v, X, eps)
    if not ok:
        log.warning("v*sqrt(n) = %g exceeds X^(1/2-eps) = %g", v * math.sqrt(n),
                    X ** (0.5 - eps))
    lhs = char_sum(n, v, family, X, cutoff, workers)
    main = main_term(n, v, X, cutoff, family.N0)
    ratio = lhs / main if main else math.nan
    return CharSumResult(int(n), int(v), float(X), lhs, main, lhs - main, ratio, ok)


def square_ratio_target(n, v, N0):
    """prod_{p | n, p !| v N0} (1 + 1/p)^-1: predicted char_sum(n^2, v)/char_sum(1, v)."""
    out = 1.0
    for p in _primes_of(n):
        if (v * N0) % p:
            out /= 1.0 + 1.0 / p
    return out


def normalized_nonsquare(n, v, family, X, cutoff=DEFAULT_CUTOFF, workers=None):
    """|char_sum| / (X^(1/2) sqrt(n)) for nonsquare n."""
    return abs(char_sum(n, v, family, X, cutoff, workers)) / (math.sqrt(X) * math.sqrt(n))
