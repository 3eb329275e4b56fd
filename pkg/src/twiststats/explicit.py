"""Zero sums over twisted L-functions through the explicit formula.

For a kernel pair (h, h^) with h^ supported in [-1, 1] and dilation L,

    sum_gamma h(gamma L / 2 pi) = A(d) - (1/L) sum_n Lambda(n)/sqrt(n) chi_d(n) H(log n / L)

with H(xi) = h^(xi) + h^(-xi) and the archimedean part

    A(d) = sum_j [ h^(0)/L * log(N_j d^2 / (2 pi)^2)
                   + (1/2pi) int h(tL/2pi) (psi(k_j/2 + it) + psi(k_j/2 - it)) dt ].

Compact support of h^ makes the prime sum finite (n <= e^L).
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy import integrate, special

from . import kernels
from .arith import prime_table
from .charsum import DEFAULT_CUTOFF, main_term
from .parallel import pmap

TWO_PI = 2.0 * math.pi


class QuadratureError(RuntimeError):
    """Adaptive quadrature did not reach the requested tolerance."""


@dataclass(frozen=True)
class KernelPair:
    """Even test function h with Fourier transform h^ supported in [-1, 1].

    ``tail_envelope`` r(u), when given, means h(u) = r(u) (1 - cos 2 pi u) for
    large u; the archimedean integral then uses a Fourier-weighted tail.
    """

    name: str
    h: Callable
    hhat: Callable
    h0: float
    hhat0: float
    L: float
    tail_envelope: Optional[Callable] = None

    def with_L(self, L):
        return KernelPair(self.name, self.h, self.hhat, self.h0, self.hhat0, float(L),
                          self.tail_envelope)

    def H(self, xi):
        return self.hhat(xi) + self.hhat(-np.asarray(xi))


def _fejer_h(u):
    return np.sinc(np.asarray(u, dtype=np.float64)) ** 2


def _fejer_hhat(xi):
    return np.maximum(1.0 - np.abs(np.asarray(xi, dtype=np.float64)), 0.0)


def _fejer_envelope(u):
    return 1.0 / (2.0 * math.pi ** 2 * u * u)


def fejer(L):
    """h(t) = (sin pi t / pi t)^2, h^(xi) = max(1 - |xi|, 0)."""
    if L < 1:
        raise ValueError("L must be >= 1")
    return KernelPair("fejer", _fejer_h, _fejer_hhat, 1.0, 1.0, float(L), _fejer_envelope)


# --------------------------------------------------------------------------
# archimedean term
# --------------------------------------------------------------------------

def _re_psi2(k, L):
    """u -> psi(k/2 + 2 pi i u/L) + psi(k/2 - 2 pi i u/L) = 2 Re psi(...)."""
    def g(u):
        return 2.0 * special.psi(complex(k / 2.0, TWO_PI * u / L)).real
    return g


def _quad(f, a, b, tol, **kw):
    val, err = integrate.quad(f, a, b, epsabs=tol, epsrel=tol, limit=500, **kw)
    if not math.isfinite(val) or err > 100 * tol * max(1.0, abs(val)):
        raise QuadratureError(f"quadrature on [{a}, {b}] gave {val} +- {err}")
    return val, err


@functools.lru_cache(maxsize=256)
def _digamma_part_t(k, kernel, tol):
    g = _re_psi2(k, kernel.L)

    def core(u):
        return float(kernel.h(u)) * g(u)

    if kernel.tail_envelope is None:
        val, _ = _quad(core, 0.0, np.inf, tol)
    else:
        U = 64.0
        head = 0.0
        for a in range(0, int(U), 8):
            head += _quad(core, float(a), float(a + 8), tol)[0]
        env = kernel.tail_envelope

        def smooth(u):
            return env(u) * g(u)

        tail_flat, _ = _quad(smooth, U, np.inf, tol)
        tail_osc, _ = _quad(smooth, U, np.inf, tol, weight="cos", wvar=TWO_PI)
        val = head + tail_flat - tail_osc
    # int_R h(tL/2pi)(...) dt / 2pi = (1/L) int_R h(u)(...) du = (2/L) int_0^inf
    return 2.0 * val / kernel.L


@functools.lru_cache(maxsize=256)
def _digamma_part_x(k, kernel, tol):
    a = k / 2.0
    L = kernel.L
    h0 = kernel.hhat0

    def f(x):
        return 2.0 * (h0 * math.exp(-x) / x
                      - math.exp(-a * x) * float(kernel.hhat(x / L)) / -math.expm1(-x))

    val = 0.0
    edges = [0.0, 1e-3, 0.1, 1.0] + [float(v) for v in np.linspace(2.0, L, 8)]
    edges = sorted(set(e for e in edges if e <= L) | {L})
    for lo, hi in zip(edges[:-1], edges[1:]):
        val += _quad(f, lo, hi, tol)[0]
    val += 2.0 * h0 * special.exp1(L)
    return val / L


def digamma_part(k, kernel, tol=1e-12, route="t"):
    """(1/2pi) int h(tL/2pi) (psi(k/2+it) + psi(k/2-it)) dt.

    route 't' integrates against h; route 'x' uses the integral representation
    of psi and only h^ (independent oracle).
    """
    if route == "t":
        return _digamma_part_t(int(k), kernel, tol)
    if route == "x":
        return _digamma_part_x(int(k), kernel, tol)
    raise ValueError(route)


def archimedean_term(d, forms, kernel, route="t"):
    """Archimedean part of the explicit formula for prod_j L(s, f_j x chi_d)."""
    d = np.asarray(d, dtype=np.float64)
    out = np.zeros(d.shape)
    for f in forms:
        out = out + kernel.hhat0 / kernel.L * np.log(f.level * d * d / TWO_PI ** 2)
        out = out + digamma_part(f.weight, kernel, route=route)
    return float(out) if out.ndim == 0 else out


# --------------------------------------------------------------------------
# prime side
# --------------------------------------------------------------------------

def prime_coefficients(forms, kernel):
    """Per-prime coefficients (primes, c_odd, c_even) of the prime side.

    c_odd[p] collects odd powers p^j (weight chi_d(p)), c_even the even powers
    (weight chi_d(p)^2 = [p not | d]); both include the 1/L and H factors.
    """
    L = kernel.L
    nmax = math.exp(L)
    if nmax < 2:
        return np.zeros(0, dtype=np.int64), np.zeros((len(forms), 0)), np.zeros((len(forms), 0))
    nmax_int = int(math.floor(nmax * (1 + 1e-15)))
    primes = prime_table(nmax_int).primes_upto(nmax_int)
    logp = np.log(primes.astype(np.float64))
    c_odd = np.zeros((len(forms), primes.size))
    c_even = np.zeros((len(forms), primes.size))
    jmax = int(math.floor(L / math.log(2))) + 1
    for row, f in enumerate(forms):
        lam = f.prime_lambdas(nmax_int)[primes]
        if np.isnan(lam).any():
            raise ValueError("eigenvalue table does not reach e^L")
        bad = (f.level % primes) == 0
        # s_j for good p, lambda^j at p | N
        s_prev = np.full(primes.size, 2.0)
        s_cur = lam.copy()
        for j in range(1, jmax + 1):
            if j > 1:
                s_prev, s_cur = s_cur, lam * s_cur - s_prev
            vm = np.where(bad, lam ** j, s_cur) * logp
            xi = j * logp / L
            live = xi < 1.0
            if not live.any():
                break
            term = np.zeros(primes.size)
            term[live] = (vm[live] * np.exp(-0.5 * j * logp[live])
                          * kernel.H(xi[live]) / L)
            if j % 2:
                c_odd[row] += term
            else:
                c_even[row] += term
    return primes, c_odd, c_even


def prime_side(d, forms, kernel, per_form=False):
    """(1/L) sum_{n <= e^L} Lambda(n)/sqrt(n) chi_d(n) H(log n/L), d = 1 (mod 4)."""
    d_arr = np.atleast_1d(np.asarray(d, dtype=np.int64))
    if np.any(d_arr % 4 != 1):
        raise ValueError("d must be 1 mod 4")
    primes, c_odd, c_even = prime_coefficients(forms, kernel)
    if primes.size == 0:
        vals = np.zeros((d_arr.size, len(forms)))
    else:
        vals = kernels.twisted_prime_sums(np.abs(d_arr), primes, c_odd, c_even)
    out = vals if per_form else vals.sum(axis=1)
    return out[0] if np.ndim(d) == 0 else out


def prime_side_direct(d, forms, kernel):
    """Slow oracle: loop over n <= e^L with an explicit Kronecker symbol per n."""
    from .arith import kronecker, vonmangoldt_f
    nmax = int(math.floor(math.exp(kernel.L) * (1 + 1e-15)))
    terms = []
    for n in range(nmax, 1, -1):  # descending: a different order from the kernel
        chi = kronecker(int(d), n)
        if chi == 0:
            continue
        lam = sum(vonmangoldt_f(f, n) for f in forms)
        if lam == 0.0:
            continue
        terms.append(lam / math.sqrt(n) * chi * float(kernel.H(math.log(n) / kernel.L)))
    return math.fsum(terms) / kernel.L


def zero_sum_proxy(d, forms, kernel, route="t"):
    """sum over zeros of prod_j L(s, f_j x chi_d) of h(gamma L / 2 pi)."""
    return archimedean_term(np.abs(np.asarray(d)), forms, kernel, route) - \
        prime_side(d, forms, kernel)


# --------------------------------------------------------------------------
# family aggregates
# --------------------------------------------------------------------------

def _chunk_zero_sums(task):
    forms, kernel, d = task
    return zero_sum_proxy(d, forms, kernel)


def zero_sums_family(d, forms, kernel, workers=None, chunk=4096):
    """zero_sum_proxy over an array of d, parallel over fixed-size blocks."""
    d = np.asarray(d, dtype=np.int64)
    blocks = [d[i:i + chunk] for i in range(0, d.size, chunk)]
    parts = pmap(_chunk_zero_sums, [(tuple(forms), kernel, b) for b in blocks], workers)
    return np.concatenate(parts) if parts else np.zeros(0)


def predicted_main(kernel, X, M=1):
    """2 log X / L * h^(0) + h(0)/2, times M."""
    return M * (2.0 * math.log(X) / kernel.L * kernel.hhat0 + kernel.h0 / 2.0)


@dataclass
class AggregateResult:
    ell: int
    v: int
    X: float
    L: float
    value: float
    count: int
    case: str
    predicted: Optional[float]
    normalized: float

    def as_dict(self):
        return dict(self.__dict__)


def _family_d(family, X, v, cutoff):
    from .arith import enumerate_family
    d = enumerate_family(family, cutoff.lo * X, cutoff.hi * X)
    if v > 1:
        d = d[d % v == 0]
    return d


def _classify_ell(ell, v, N0):
    from .arith import factorint
    fac = factorint(ell) if ell > 1 else {}
    odd = [p for p, e in fac.items() if e % 2]
    if not odd:
        return "square", None
    if len(odd) == 1:
        return "prime-times-square", odd[0]
    return "generic", None


def aggregate_S(ell, v, family, X, kernel, cutoff=DEFAULT_CUTOFF, eps=0.05, workers=None,
                zero_sums=None):
    """sum_{d in F(kappa,a), v | d} zero_sum_proxy(d) chi_d(ell) Phi(kappa d / X),
    with the size it is compared against for the case of ell."""
    ell = int(ell)
    v = int(v)
    n0 = family.N0
    if math.gcd(ell, n0 * v) != 1 or math.gcd(v, n0) != 1:
        raise ValueError("need (ell, N0 v) = 1 and (v, N0) = 1")
    forms = family.forms
    d = _family_d(family, X, v, cutoff)
    absd = np.abs(d)
    w = cutoff(absd / X)
    z = zero_sums_family(d, forms, kernel, workers) if zero_sums is None else zero_sums
    if ell == 1:
        chi = np.ones(d.size)
    else:
        chi = kernels.jacobi_array(ell % absd, absd).astype(np.float64)
    value = math.fsum((z * chi * w).tolist())
    case, q = _classify_ell(ell, v, n0)
    M = len(forms)
    if case == "square":
        pred = main_term(ell, v, X, cutoff, n0) * predicted_main(kernel, X, M)
        norm = value / pred
    elif case == "prime-times-square":
        r = math.isqrt(ell // q)
        local = main_term(r * r, v, X, cutoff, n0) / main_term(1, 1, X, cutoff, n0) \
            if r > 1 else 1.0
        scale = X / (v * kernel.L * n0) * math.log(q) / math.sqrt(q) * local
        pred = None
        norm = value / scale
    else:
        pred = None
        norm = value / (X ** (0.5 + 3 * eps) * math.sqrt(ell) * math.exp(kernel.L / 4))
    return AggregateResult(ell, v, float(X), kernel.L, value, int(d.size), case, pred, norm)
