"""Completed twisted L-functions, central values and central derivatives.

Lambda(s) = Q^s Gamma(s + kappa) L(s, f x chi_d),  Q = sqrt(N)|d| / 2pi,
kappa = (k - 1)/2, and Lambda(s) = eps Lambda(1 - s) with eps = eps_f(d).

Splitting the Mellin integral of the theta series at t = A gives, for any A > 0,

    Lambda(s) = sum_n a_n [ (Q/n)^s Gamma(s+kappa, nA/Q)
                            + eps (Q/n)^(1-s) Gamma(1-s+kappa, n/(AQ)) ].

The value is independent of A, so evaluating with A != 1 and comparing
Lambda(s) with eps Lambda(1-s) is a genuine consistency check.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import mpmath
import numpy as np
from scipy import special

from .arith import chi_periodic, kronecker, root_number_twist

DEFAULT_SPLIT = 1.25
TAIL = 45.0  # e^-45 ~ 3e-20 relative tail
ZERO_FLOOR = 1e-10


class LValueError(RuntimeError):
    """A contract check (functional equation, truncation, derivative) failed."""

    def __init__(self, message, **residuals):
        super().__init__(message)
        self.residuals = residuals


def conductor_scale(f, d):
    """Q = sqrt(N d^2) / 2 pi."""
    return math.sqrt(f.level) * abs(int(d)) / (2.0 * math.pi)


def twist_sign(f, d):
    if abs(int(d)) == 1:
        return f.epsilon
    return root_number_twist(f, d)


def truncation_length(Q, A=DEFAULT_SPLIT, tail=TAIL):
    return int(math.ceil(tail * Q * max(A, 1.0 / A))) + 10


def twisted_coefficients(f, d, nmax):
    """a_n = lambda_f(n) chi_d(n) for 1 <= n <= nmax (index 0 unused)."""
    lam = f.lambda_table(nmax)
    if np.isnan(lam[1:]).any():
        raise ValueError("eigenvalue table incomplete")
    chi = chi_periodic(int(d), nmax).astype(np.float64)
    return lam * chi


def _upper_gamma(a, y):
    """Gamma(a, y) for real a and an array y > 0."""
    if a > 0:
        return special.gammaincc(a, y) * special.gamma(a)
    if a == 0:
        return special.exp1(y)
    # Gamma(a, y) = (Gamma(a + 1, y) - y^a e^-y) / a walks a <= 0 up to a > 0
    return (_upper_gamma(a + 1, y) - np.exp(a * np.log(y) - y)) / a


@dataclass
class CompletedLValue:
    s: complex
    value: complex
    truncation: int
    error: float
    sign: int
    Q: float

    @property
    def scale(self):
        return max(1.0, abs(self.value))


def _half_sum(a, n, Q, s, kappa, y):
    """sum_n a_n (Q/n)^s Gamma(s + kappa, y_n) for real s."""
    g = _upper_gamma(s + kappa, y)
    terms = a * np.exp(s * np.log(Q / n)) * g
    return math.fsum(terms.tolist()), float(np.abs(terms).sum())


def _half_sum_complex(a, n, Q, s, kappa, y):
    total = mpmath.mpc(0)
    absum = 0.0
    for an, nn, yy in zip(a.tolist(), n.tolist(), y.tolist()):
        if an == 0.0:
            continue
        t = an * mpmath.power(Q / nn, s) * mpmath.gammainc(s + kappa, yy)
        total += t
        absum += abs(complex(t))
    return complex(total), absum


def complete_lambda(f, d, s, A=DEFAULT_SPLIT, nmax=None, check=False):
    """Lambda(s, f x chi_d) by the split theta integral.

    Real s uses scipy's incomplete gamma; complex s goes through mpmath.
    With ``check=True`` the functional equation and a truncation-doubling
    run are verified and :class:`LValueError` is raised on failure.
    """
    Q = conductor_scale(f, d)
    eps = twist_sign(f, d)
    kappa = (f.weight - 1) / 2.0
    N = nmax or truncation_length(Q, A)
    a_all = twisted_coefficients(f, d, N)
    n = np.arange(1, N + 1, dtype=np.float64)
    a = a_all[1:]
    s_c = complex(s)
    real = s_c.imag == 0.0
    if real:
        sr = s_c.real
        v1, m1 = _half_sum(a, n, Q, sr, kappa, n * A / Q)
        v2, m2 = _half_sum(a, n, Q, 1.0 - sr, kappa, n / (A * Q))
    else:
        v1, m1 = _half_sum_complex(a, n, Q, s_c, kappa, n * A / Q)
        v2, m2 = _half_sum_complex(a, n, Q, 1 - s_c, kappa, n / (A * Q))
    value = v1 + eps * v2
    err = 4.0 * np.finfo(float).eps * (m1 + m2) * math.sqrt(N)
    out = CompletedLValue(s_c if not real else s_c.real, value, N, err, eps, Q)
    if check:
        verify_lambda(f, d, out, A)
    return out


def fe_residual(f, d, s, A=DEFAULT_SPLIT, nmax=None):
    """|Lambda(s) - eps Lambda(1 - s)| and the scale it is measured against."""
    v = complete_lambda(f, d, s, A, nmax)
    w = complete_lambda(f, d, 1 - complex(s) if complex(s).imag else 1 - float(s), A, nmax)
    res = abs(v.value - v.sign * w.value)
    return res, max(1.0, abs(v.value), abs(w.value)), v, w


def doubling_change(f, d, s, A=DEFAULT_SPLIT, nmax=None):
    v = complete_lambda(f, d, s, A, nmax)
    w = complete_lambda(f, d, s, A, nmax=2 * v.truncation)
    return abs(v.value - w.value), v.scale


def verify_lambda(f, d, val, A=DEFAULT_SPLIT, fe_tol=1e-8, trunc_tol=1e-9):
    res, scale, _, _ = fe_residual(f, d, val.s, A, val.truncation)
    dbl, dscale = doubling_change(f, d, val.s, A, val.truncation)
    if res > fe_tol * scale or dbl > trunc_tol * dscale:
        raise LValueError("L-value contract failed", fe_residual=res, scale=scale,
                          doubling=dbl)
    return res, dbl


# --------------------------------------------------------------------------
# central derivative
# --------------------------------------------------------------------------

def _J(a, y):
    """int_y^inf e^-t t^(a-1) log t dt for integer a >= 1 (array y)."""
    j = np.exp(-y) * np.log(y) + special.exp1(y)
    for b in range(2, a + 1):
        j = y ** (b - 1) * np.exp(-y) * np.log(y) + (b - 1) * j + _upper_gamma(b - 1, y)
    return j


def lambda_prime_half(f, d, nmax=None):
    """Lambda'(1/2) for an odd-sign twist from the A = 1 derivative kernel.

    For k = 2 each term reduces to 2 a_n (Q/n)^(1/2) E_1(n/Q).
    """
    Q = conductor_scale(f, d)
    a_half = f.weight // 2
    N = nmax or truncation_length(Q, 1.0)
    a = twisted_coefficients(f, d, N)[1:]
    n = np.arange(1, N + 1, dtype=np.float64)
    y = n / Q
    if a_half == 1:
        kern = special.exp1(y)
    else:
        kern = np.log(Q / n) * _upper_gamma(a_half, y) + _J(a_half, y)
    terms = 2.0 * a * np.sqrt(Q / n) * kern
    return math.fsum(terms.tolist()), float(np.abs(terms).sum()), N


@dataclass
class CentralDerivative:
    d: int
    Lprime: float
    logabs: float
    u: Optional[float]
    error: float
    truncation: int
    residuals: dict = field(default_factory=dict)
    undecided: bool = False

    def as_dict(self):
        return {"d": self.d, "Lprime": self.Lprime, "logabs": self.logabs, "u": self.u,
                "residuals": self.residuals}


def u_statistic(logabs, d):
    """(log|L'| - 1/2 loglog|d|) / sqrt(loglog|d|), needs |d| >= 20."""
    ll = math.log(math.log(abs(d)))
    return (logabs - 0.5 * ll) / math.sqrt(ll)


def finite_difference_derivative(f, d, h=1e-4, A=DEFAULT_SPLIT):
    """(Lambda(1/2 + h) - Lambda(1/2 - h)) / 2h from the split-A evaluator."""
    p = complete_lambda(f, d, 0.5 + h, A).value
    m = complete_lambda(f, d, 0.5 - h, A).value
    return (p.real - m.real) / (2.0 * h)


def central_derivative(f, d, validate=False, h=1e-4, tol=1e-6):
    """L'(1/2, f x chi_d) for eps_f(d) = -1, with optional finite-difference validation."""
    d = int(d)
    if twist_sign(f, d) != -1:
        raise ValueError(f"d={d}: root number is +1, central derivative not forced")
    Q = conductor_scale(f, d)
    lam1, mag, N = lambda_prime_half(f, d)
    norm = math.sqrt(Q) * math.gamma(f.weight / 2.0)
    Lp = lam1 / norm
    err = 4.0 * np.finfo(float).eps * mag * math.sqrt(N) / norm
    residuals = {}
    if validate:
        fd = finite_difference_derivative(f, d, h) / norm
        rel = abs(fd - Lp) / max(abs(Lp), 1e-300)
        residuals["fd_rel"] = rel
        if rel > tol:
            raise LValueError(f"d={d}: derivative kernel {Lp!r} vs finite difference {fd!r}",
                              kernel=Lp, finite_difference=fd, rel=rel)
    undecided = abs(Lp) <= max(ZERO_FLOOR, 100.0 * err)
    logabs = math.log(abs(Lp)) if Lp != 0.0 else -math.inf
    u = u_statistic(logabs, d) if abs(d) >= 20 and not undecided else None
    return CentralDerivative(d, Lp, logabs, u, err, N, residuals, undecided)


@dataclass
class CentralValue:
    d: int
    L: float
    error: float
    truncation: int
    vanishing: bool


def central_value(f, d):
    """L(1/2, f x chi_d) for an even-sign twist: Lambda(1/2) / (sqrt(Q) Gamma(k/2))."""
    d = int(d)
    if twist_sign(f, d) != 1:
        raise ValueError(f"d={d}: root number is -1, central value vanishes")
    lam = complete_lambda(f, d, 0.5)
    norm = math.sqrt(lam.Q) * math.gamma(f.weight / 2.0)
    L = float(lam.value) / norm
    err = lam.error / norm
    return CentralValue(d, L, err, lam.truncation, abs(L) <= max(ZERO_FLOOR, 100.0 * err))


def lprime_proxy_residual(f, d, x, deriv=None):
    """log|L'(1/2)| - P_f(d; x) - 1/2 loglog x."""
    from .proxy import dirichlet_poly
    if not 3 <= x <= abs(d):
        raise ValueError("need 3 <= x <= |d|")
    cd = deriv if deriv is not None else central_derivative(f, d)
    if cd.undecided:
        raise ValueError(f"d={d}: L'(1/2) numerically zero")
    return cd.logabs - dirichlet_poly(f, d, x) - 0.5 * math.log(math.log(x))


# --------------------------------------------------------------------------
# extended precision
# --------------------------------------------------------------------------

def complete_lambda_mp(f, d, s, A=DEFAULT_SPLIT, dps=30, coefficients=None):
    """Lambda(s) at ``dps`` digits; coefficients a_n may be supplied as exact values."""
    with mpmath.workdps(dps):
        Q = mpmath.sqrt(f.level) * abs(int(d)) / (2 * mpmath.pi)
        eps = twist_sign(f, d)
        kappa = mpmath.mpf(f.weight - 1) / 2
        A = mpmath.mpf(A)
        N = truncation_length(float(Q), float(A), tail=TAIL + dps * math.log(10) / 2)
        if coefficients is None:
            lam = f.lambda_table(N)
            coefficients = [mpmath.mpf(float(lam[n])) * kronecker(int(d), n)
                            for n in range(N + 1)]
        s = mpmath.mpmathify(s)
        total = mpmath.mpf(0)
        for n in range(1, min(N, len(coefficients) - 1) + 1):
            an = coefficients[n]
            if an == 0:
                continue
            t1 = mpmath.power(Q / n, s) * mpmath.gammainc(s + kappa, n * A / Q)
            t2 = mpmath.power(Q / n, 1 - s) * mpmath.gammainc(1 - s + kappa, n / (A * Q))
            total += an * (t1 + eps * t2)
        return total
