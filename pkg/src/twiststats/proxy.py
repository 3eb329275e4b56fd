"""Prime-sum proxies for log|L'| and log|Sha|: P_f(d; x), C(d; x), c(p), mu, sigma^2."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from .arith import (EllipticCurveSpec, NewformSpec, kronecker, prime_table,
                    rational_roots)

log = logging.getLogger(__name__)

LOG2 = math.log(2.0)


# --------------------------------------------------------------------------
# configuration
# --------------------------------------------------------------------------

def default_x(X):
    """x = X^(1 / log log log X); needs X > e^e."""
    lll = math.log(math.log(math.log(X)))
    if lll <= 0:
        raise ValueError(f"X={X} too small for the triple-log rule")
    return X ** (1.0 / lll)


@dataclass(frozen=True)
class ProxyConfig:
    """Cutoffs for P(d; x) and C(d; x).

    ``x_rule`` records how x was chosen ('triple-log' default, 'power:<theta>'
    for x = X^theta, or 'explicit'); every report carries it.
    """

    X: float
    x: Optional[float] = None
    x_rule: str = "triple-log"
    lower: Optional[float] = None

    def __post_init__(self):
        if self.x is None:
            if self.x_rule == "triple-log":
                object.__setattr__(self, "x", default_x(self.X))
            elif self.x_rule.startswith("power:"):
                theta = float(self.x_rule.split(":", 1)[1])
                object.__setattr__(self, "x", self.X ** theta)
            else:
                raise ValueError(f"unknown x rule {self.x_rule!r}")
        elif self.x_rule == "triple-log":
            object.__setattr__(self, "x_rule", "explicit")
        if self.lower is None:
            object.__setattr__(self, "lower", math.log(self.X))

    @classmethod
    def power(cls, X, theta):
        return cls(X, x_rule=f"power:{theta}")

    def window(self):
        """Closed prime window [log X, x] of C(d; x)."""
        return (self.lower, self.x)

    def asymptotic_regime(self, N0, disc):
        """x > log X > max(N0, |disc F|)."""
        return self.x > self.lower > max(N0, abs(disc))

    def as_dict(self):
        return {"X": self.X, "x": self.x, "x_rule": self.x_rule,
                "window": [self.lower, self.x]}


# --------------------------------------------------------------------------
# the Dirichlet polynomial P_f(d; x)
# --------------------------------------------------------------------------

def weight_w(p, x):
    """w(p) = p^(-1/log x) log(x/p) / log x for 2 <= p <= x."""
    p = np.asarray(p, dtype=np.float64)
    if np.any(p > x) or np.any(p < 2):
        raise ValueError("weight needs 2 <= p <= x")
    lx = math.log(x)
    out = np.exp(-np.log(p) / lx) * np.log(x / p) / lx
    return float(out) if out.ndim == 0 else out


def prime_coefficients(f, x):
    """(primes, lambda(p) w(p)/sqrt(p)) for p <= x."""
    if x < 2:
        return np.zeros(0, dtype=np.int64), np.zeros(0)
    primes = prime_table(x).primes_upto(x)
    lam = f.prime_lambdas(int(x))[primes]
    if np.isnan(lam).any():
        missing = primes[np.isnan(lam)][:5].tolist()
        raise ValueError(f"eigenvalues missing at primes {missing}")
    return primes, lam * weight_w(primes, x) / np.sqrt(primes)


def dirichlet_poly(f, d, x):
    """P_f(d; x) = sum_{p <= x} lambda_f(p) chi_d(p) p^(-1/2) w(p)."""
    d = int(d)
    if math.gcd(d, 2 * f.level) != 1:
        raise ValueError(f"(d, 2N) = ({d}, {2 * f.level}) > 1")
    primes, coef = prime_coefficients(f, x)
    if primes.size == 0:
        return 0.0
    if d % 4 == 1:
        return float(kernels.twisted_prime_sums(np.array([abs(d)]), primes, coef)[0, 0])
    return math.fsum(c * kronecker(d, int(p)) for p, c in zip(primes.tolist(), coef.tolist()))


def dirichlet_poly_many(forms, d, x):
    """Array (len(d), M) of P_{f_j}(d; x) for discriminants d = 1 (mod 4)."""
    d = np.asarray(d, dtype=np.int64)
    if np.any(d % 4 != 1):
        raise ValueError("vectorised path needs d = 1 (mod 4)")
    if x < 2:
        return np.zeros((d.size, len(forms)))
    rows = []
    for f in forms:
        primes, coef = prime_coefficients(f, x)
        rows.append(coef)
    return kernels.twisted_prime_sums(np.abs(d), primes, np.vstack(rows))


def deligne_envelope(x):
    """2 sum_{p <= x} p^(-1/2): bound on |P_f(d; x)|."""
    if x < 2:
        return 0.0
    primes = prime_table(x).primes_upto(x)
    return 2.0 * math.fsum((1.0 / np.sqrt(primes)).tolist())


# --------------------------------------------------------------------------
# c(p), Galois profile, Mertens sums
# --------------------------------------------------------------------------

def cubic_disc(c2, c1, c0):
    return (c2 * c2 * c1 * c1 - 4 * c1 ** 3 - 4 * c2 ** 3 * c0
            - 27 * c0 * c0 + 18 * c2 * c1 * c0)


def _as_cubic(F):
    if isinstance(F, EllipticCurveSpec):
        return tuple(int(c) for c in F.cubic)
    F = tuple(int(c) for c in F)
    if len(F) == 4:
        if F[0] != 1:
            raise ValueError("cubic must be monic")
        F = F[1:]
    if len(F) != 3:
        raise ValueError("give (c2, c1, c0) or (1, c2, c1, c0)")
    return F


def c_of_p(F, p):
    """1 + number of roots of F mod p, for an odd prime p not dividing disc(F)."""
    c2, c1, c0 = _as_cubic(F)
    p = int(p)
    if p < 3 or p % 2 == 0:
        raise ValueError("p must be an odd prime")
    if cubic_disc(c2, c1, c0) % p == 0:
        raise ValueError(f"p={p} divides disc(F)")
    if p < 5:
        return 1 + sum(1 for z in range(p) if (((z + c2) * z + c1) * z + c0) % p == 0)
    return 1 + int(kernels.cubic_root_counts(c2, c1, c0, np.array([p]))[0])


def c_table(F, primes):
    """c(p) over an array of primes; 0 marks p = 2 and primes dividing disc(F)."""
    c2, c1, c0 = _as_cubic(F)
    disc = cubic_disc(c2, c1, c0)
    primes = np.asarray(primes, dtype=np.int64)
    out = np.zeros(primes.shape, dtype=np.int64)
    good = (primes > 2) & (disc % primes != 0)
    small = good & (primes < 5)
    big = good & (primes >= 5)
    for i in np.nonzero(small)[0]:
        out[i] = c_of_p((c2, c1, c0), int(primes[i]))
    out[big] = 1 + kernels.cubic_root_counts(c2, c1, c0, primes[big])
    return out


GALOIS_MULTISETS = {
    "trivial": (4,),
    "C2": (4, 2),
    "C3": (4, 1, 1),
    "S3": (4, 2, 2, 2, 1, 1),
}
GROUP_DEGREE = {"trivial": 1, "C2": 2, "C3": 3, "S3": 6}


@dataclass(frozen=True)
class GaloisProfile:
    group: str
    n_K: int
    mu: float
    sigma2: float
    fixed_points: tuple

    @property
    def sigma(self):
        return math.sqrt(self.sigma2)

    @property
    def chebotarev(self):
        """Density of each c value under the Chebotarev law."""
        fp = self.fixed_points
        return {c: fp.count(c) / len(fp) for c in sorted(set(fp))}


def profile_from_multiset(group):
    fp = GALOIS_MULTISETS[group]
    logs = [math.log(c) for c in fp]
    mu = -0.5 - math.fsum(logs) / len(fp)
    sigma2 = 1.0 + math.fsum(v * v for v in logs) / len(fp)
    return GaloisProfile(group, GROUP_DEGREE[group], mu, sigma2, fp)


def galois_group(F):
    c2, c1, c0 = _as_cubic(F)
    disc = cubic_disc(c2, c1, c0)
    if disc == 0:
        raise ValueError("F is not squarefree")
    nroots = len(rational_roots((c2, c1, c0)))
    if nroots == 3:
        return "trivial"
    if nroots == 1:
        return "C2"
    if disc > 0 and math.isqrt(disc) ** 2 == disc:
        return "C3"
    return "S3"


def galois_profile(F):
    """Splitting-field group of F and the resulting (mu, sigma^2)."""
    return profile_from_multiset(galois_group(F))


@dataclass
class MertensResult:
    y: float
    lhs1: float
    target1: float
    lhs2: float
    target2: float


def _mertens_terms(F, y):
    primes = prime_table(y).primes_upto(y)
    c = c_table(F, primes)
    good = c > 0
    lc = np.log(c[good].astype(np.float64))
    return primes[good], lc


def mertens_check(F, y):
    """sum_{p<=y} log c(p)/p and sum (log c(p))^2/p with their loglog main terms.

    p = 2 and primes dividing disc(F) are omitted (a bounded change).
    """
    if y < 100:
        raise ValueError("y must be >= 100")
    prof = galois_profile(F)
    primes, lc = _mertens_terms(F, y)
    inv = 1.0 / primes
    lhs1 = math.fsum((lc * inv).tolist())
    lhs2 = math.fsum((lc * lc * inv).tolist())
    ll = math.log(math.log(y))
    return MertensResult(float(y), lhs1, (-prof.mu - 0.5) * ll, lhs2,
                         (prof.sigma2 - 1.0) * ll)


def mertens_curve(F, ys):
    """Cumulative sums at several y from one pass (ascending ys)."""
    ys = sorted(float(y) for y in ys)
    prof = galois_profile(F)
    primes, lc = _mertens_terms(F, ys[-1])
    out = []
    for y in ys:
        i = np.searchsorted(primes, y, side="right")
        ll = math.log(math.log(y))
        lhs1 = math.fsum((lc[:i] / primes[:i]).tolist()) if i else 0.0
        lhs2 = math.fsum((lc[:i] ** 2 / primes[:i]).tolist()) if i else 0.0
        out.append(MertensResult(y, lhs1, (-prof.mu - 0.5) * ll, lhs2,
                                 (prof.sigma2 - 1.0) * ll))
    return out


def fitted_slopes(results):
    """Least-squares slopes of lhs1 and lhs2 against log log y."""
    ll = np.array([math.log(math.log(r.y)) for r in results])
    s1 = np.polyfit(ll, [r.lhs1 for r in results], 1)[0]
    s2 = np.polyfit(ll, [r.lhs2 for r in results], 1)[0]
    return float(s1), float(s2)


# --------------------------------------------------------------------------
# C(d; x)
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class TamagawaWindow:
    """Primes of the C(d; x) window with their log c(p); bad primes removed."""

    primes: np.ndarray
    logc: np.ndarray
    skipped: tuple
    lo: float
    hi: float
    offset: float = field(default=0.0)  # sum over window of log c(p)/(p+1)


def tamagawa_window(E, config: ProxyConfig, N0=None):
    lo, hi = config.window()
    pt = prime_table(max(hi, 3))
    primes = pt.primes_between(math.ceil(lo), math.floor(hi))
    c = c_table(E, primes)
    bad = c == 0
    if N0 is not None:
        bad |= (N0 % primes) == 0
    skipped = tuple(int(p) for p in primes[bad])
    if skipped:
        log.info("C(d;x) window skips primes %s (p = 2, p | disc F or p | N0)", skipped)
    keep = ~bad
    primes = primes[keep]
    logc = np.log(c[keep].astype(np.float64))
    offset = math.fsum((logc / (primes + 1.0)).tolist())
    return TamagawaWindow(primes, logc, skipped, lo, hi, offset)


def tamagawa_sum_C(E, d, config: ProxyConfig, window=None):
    """C(d; x) = sum over window primes of (p/(p+1)) log c(p) if p | d else -log c(p)/(p+1)."""
    win = window if window is not None else tamagawa_window(E, config)
    d = abs(int(d))
    terms = []
    for p, lc in zip(win.primes.tolist(), win.logc.tolist()):
        if d % p == 0:
            terms.append(p / (p + 1.0) * lc)
        else:
            terms.append(-lc / (p + 1.0))
    return math.fsum(terms)


def tamagawa_sum_C_many(E, d, config: ProxyConfig, window=None):
    """Vectorised C(d; x) by factoring |d| with the least-prime-factor table."""
    win = window if window is not None else tamagawa_window(E, config)
    d = np.abs(np.asarray(d, dtype=np.int64))
    if d.size == 0:
        return np.zeros(0)
    if win.primes.size == 0:
        return np.zeros(d.size)
    lookup = np.zeros(int(win.primes[-1]) + 1)
    lookup[win.primes] = win.logc
    pt = prime_table(int(d.max()))
    hit = np.zeros(d.size)
    rest = d.copy()
    # squarefree |d|: peel off least prime factors
    while True:
        live = rest > 1
        if not live.any():
            break
        p = pt.lpf[rest[live]]
        inwin = p < lookup.size
        contrib = np.zeros(p.size)
        pi = p[inwin]
        # C + offset = sum of log c(p) over window primes dividing d
        contrib[inwin] = lookup[pi]
        hit[live] += contrib
        rest[live] //= p
    return hit - win.offset


# --------------------------------------------------------------------------
# normalised statistics
# --------------------------------------------------------------------------

@dataclass
class ProxyStats:
    d: int
    P: list
    Q: list
    C: Optional[float] = None
    R1: Optional[float] = None
    R2: Optional[float] = None
    mu: Optional[float] = None
    sigma2: Optional[float] = None


def normalized_stats(d, forms, X, x, E=None, config=None):
    """Q_j = P_j / sqrt(loglog X); with a curve also R_1 = P/sqrt(loglog X) and
    R_2 = (P - C)/sqrt(sigma^2 loglog X), P being the curve's own polynomial."""
    if X < 20:
        raise ValueError("X must be >= 20")
    ll = math.log(math.log(X))
    P = [dirichlet_poly(f, d, x) for f in forms]
    Q = [v / math.sqrt(ll) for v in P]
    out = ProxyStats(int(d), P, Q)
    if E is not None:
        cfg = config if config is not None else ProxyConfig(X, x=x)
        prof = galois_profile(E)
        fE = NewformSpec.from_curve(E)
        PE = dirichlet_poly(fE, d, x)
        C = tamagawa_sum_C(E, d, cfg)
        out.C = C
        out.R1 = PE / math.sqrt(ll)
        out.R2 = (PE - C) / math.sqrt(prof.sigma2 * ll)
        out.mu = prof.mu
        out.sigma2 = prof.sigma2
    return out
