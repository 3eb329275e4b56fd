"""Exact arithmetic: primes, Kronecker symbols, discriminants, Hecke data.

Bulk operations work on numpy int64 arrays of discriminants; the scalar
helpers use Python integers and are exact for any size.
"""
from __future__ import annotations

import functools
import logging
import math
import os
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from . import kernels
from ._backend import cache_dir

log = logging.getLogger(__name__)


class MissingCoefficientError(LookupError):
    """A Hecke eigenvalue outside the loaded range (or unavailable) was needed."""


# --------------------------------------------------------------------------
# primes
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PrimeTable:
    limit: int
    primes: np.ndarray
    lpf: np.ndarray  # least prime factor, lpf[0] = lpf[1] = 0

    def is_prime(self, n):
        return 2 <= n <= self.limit and self.lpf[n] == n

    def primes_upto(self, x):
        return self.primes[: np.searchsorted(self.primes, x, side="right")]

    def primes_between(self, lo, hi):
        """Primes p with lo <= p <= hi."""
        i = np.searchsorted(self.primes, lo, side="left")
        j = np.searchsorted(self.primes, hi, side="right")
        return self.primes[i:j]

    def factor(self, n):
        """Factorisation of 1 <= n <= limit as {p: e}."""
        if n < 1 or n > self.limit:
            raise ValueError(f"{n} outside table range [1, {self.limit}]")
        out = {}
        while n > 1:
            p = int(self.lpf[n])
            e = 0
            while n % p == 0:
                n //= p
                e += 1
            out[p] = e
        return out


def _build_prime_table(limit):
    limit = max(int(limit), 2)
    lpf = np.zeros(limit + 1, dtype=np.int64)
    for p in range(2, math.isqrt(limit) + 1):
        if lpf[p] == 0:
            block = lpf[p * p :: p]
            block[block == 0] = p
    rest = np.nonzero(lpf[2:] == 0)[0] + 2
    lpf[rest] = rest
    primes = np.nonzero(lpf[2:] == np.arange(2, limit + 1))[0] + 2
    return PrimeTable(limit, primes.astype(np.int64), lpf)


@functools.lru_cache(maxsize=4)
def _prime_table_exact(limit):
    return _build_prime_table(limit)


def prime_table(limit):
    """Shared read-only prime table covering at least ``limit``."""
    size = 1 << max(10, int(math.ceil(math.log2(max(int(limit), 2)))))
    return _prime_table_exact(size)


def factorint(n):
    """Trial-division factorisation of a nonzero integer (sign dropped)."""
    n = abs(int(n))
    if n == 0:
        raise ValueError("cannot factor 0")
    out = {}
    p = 2
    while p * p <= n:
        while n % p == 0:
            out[p] = out.get(p, 0) + 1
            n //= p
        p += 1 if p == 2 else 2
    if n > 1:
        out[n] = out.get(n, 0) + 1
    return out


def is_squarefree(n):
    return all(e == 1 for e in factorint(n).values())


def divisor_count(n):
    return math.prod(e + 1 for e in factorint(n).values())


# --------------------------------------------------------------------------
# Kronecker symbol
# --------------------------------------------------------------------------

def jacobi(a, n):
    if n <= 0 or n % 2 == 0:
        raise ValueError("Jacobi symbol needs odd positive modulus")
    a %= n
    result = 1
    while a:
        while a % 2 == 0:
            a //= 2
            if n % 8 in (3, 5):
                result = -result
        a, n = n, a
        if a % 4 == 3 and n % 4 == 3:
            result = -result
        a %= n
    return result if n == 1 else 0


def kronecker(d, n):
    """Kronecker symbol (d/n) for any integer d and n >= 0."""
    d = int(d)
    n = int(n)
    if n < 0:
        raise ValueError("n must be nonnegative")
    if n == 0:
        return 1 if abs(d) == 1 else 0
    if d % 2 == 0 and n % 2 == 0:
        return 0
    v = 0
    while n % 2 == 0:
        n //= 2
        v += 1
    k = 1
    if v % 2 == 1 and d % 8 in (3, 5):
        k = -1
    return k * jacobi(d, n)


def is_fundamental(d):
    d = int(d)
    if abs(d) <= 1:
        return False
    if d % 4 == 1:
        return is_squarefree(d)
    if d % 4 == 0:
        m = d // 4
        return m % 4 in (2, 3) and is_squarefree(m)
    return False


@dataclass(frozen=True)
class FundamentalDiscriminant:
    d: int

    def __post_init__(self):
        if not is_fundamental(self.d):
            raise ValueError(f"{self.d} is not a fundamental discriminant")

    @property
    def sign(self):
        return 1 if self.d > 0 else -1

    @property
    def abs(self):
        return abs(self.d)

    def chi(self, n):
        return kronecker(self.d, n)


def chi_array(d, n):
    """chi_d(n) for a fundamental d = 1 (mod 4) and an array of n >= 1."""
    d = int(d)
    if d % 4 != 1:
        return np.array([kronecker(d, int(k)) for k in np.asarray(n).ravel()],
                        dtype=np.int8).reshape(np.shape(n))
    m = abs(d)
    n = np.asarray(n, dtype=np.int64)
    if m == 1:
        return np.ones(n.shape, dtype=np.int8)
    return kernels.jacobi_array(n % m, np.full(n.shape, m, dtype=np.int64))


def chi_periodic(d, nmax):
    """chi_d(n) for 0 <= n <= nmax, using periodicity mod |d|."""
    d = int(d)
    m = abs(d)
    if m == 1:
        out = np.ones(nmax + 1, dtype=np.int8)
        out[0] = 0
        return out
    if d % 4 != 1:
        base = np.array([kronecker(d, r) for r in range(m)], dtype=np.int8)
    else:
        r = np.arange(m, dtype=np.int64)
        base = kernels.jacobi_array(r, np.full(m, m, dtype=np.int64))
    reps = (nmax + 1) // m + 1
    return np.tile(base, reps)[: nmax + 1]


# --------------------------------------------------------------------------
# curves and forms
# --------------------------------------------------------------------------

def _cubic_disc(c2, c1, c0):
    return (c2 * c2 * c1 * c1 - 4 * c1 ** 3 - 4 * c2 ** 3 * c0
            - 27 * c0 * c0 + 18 * c2 * c1 * c0)


@dataclass(frozen=True)
class EllipticCurveSpec:
    """y^2 = F(x) with F = x^3 + c2 x^2 + c1 x + c0.

    ``ainvs`` optionally carries a global minimal model [a1, a2, a3, a4, a6];
    it is used for a_p at p = 2 and at primes of bad reduction.
    """

    cubic: tuple
    conductor: int
    root_number: int
    ainvs: Optional[tuple] = None
    label: str = ""

    def __post_init__(self):
        if len(self.cubic) != 3:
            raise ValueError("cubic must be (c2, c1, c0) of a monic cubic")
        if self.disc == 0:
            raise ValueError("F is not squarefree")
        if self.root_number not in (-1, 1):
            raise ValueError("root number must be +-1")

    @classmethod
    def from_ainvs(cls, ainvs, conductor, root_number, label=""):
        a1, a2, a3, a4, a6 = (int(a) for a in ainvs)
        b2 = a1 * a1 + 4 * a2
        b4 = 2 * a4 + a1 * a3
        b6 = a3 * a3 + 4 * a6
        return cls((b2, 8 * b4, 16 * b6), conductor, root_number,
                   tuple(int(a) for a in ainvs), label)

    @property
    def disc(self):
        return _cubic_disc(*self.cubic)

    @property
    def two_torsion(self):
        """Number of rational 2-torsion points including O (1 + #rational roots)."""
        return 1 + len(rational_roots(self.cubic))

    def F(self, x):
        c2, c1, c0 = self.cubic
        return ((x + c2) * x + c1) * x + c0


def rational_roots(cubic):
    c2, c1, c0 = (int(c) for c in cubic)
    if c0 == 0:
        cands = {0}
        # x (x^2 + c2 x + c1)
        disc = c2 * c2 - 4 * c1
        if disc >= 0 and math.isqrt(disc) ** 2 == disc:
            r = math.isqrt(disc)
            cands |= {(-c2 + r) // 2, (-c2 - r) // 2}
        return sorted(x for x in cands if ((x + c2) * x + c1) * x + c0 == 0)
    divs = set()
    for p, e in factorint(c0).items():
        divs = {q * p ** k for q in (divs or {1}) for k in range(e + 1)}
    divs = divs or {1}
    roots = []
    for q in sorted(divs):
        for x in (q, -q):
            if ((x + c2) * x + c1) * x + c0 == 0:
                roots.append(x)
    return sorted(set(roots))


CURVES = {
    "11a1": EllipticCurveSpec.from_ainvs((0, -1, 1, -10, -20), 11, 1, "11a1"),
    "32a2": EllipticCurveSpec.from_ainvs((0, 0, 0, -1, 0), 32, 1, "32a2"),
    "37a1": EllipticCurveSpec.from_ainvs((0, 0, 1, -1, 0), 37, -1, "37a1"),
    "43a1": EllipticCurveSpec.from_ainvs((0, 1, 1, 0, 0), 43, -1, "43a1"),
    "53a1": EllipticCurveSpec.from_ainvs((1, -1, 1, 0, 0), 53, -1, "53a1"),
}


def get_curve(label):
    try:
        return CURVES[label]
    except KeyError:
        raise KeyError(f"unknown curve {label!r}; known: {sorted(CURVES)}") from None


def ap_point_count(E, p):
    """a_p = p + 1 - #E(F_p) on y^2 = F(x); p odd and of good reduction for F."""
    p = int(p)
    if p % 2 == 0 or p < 3:
        raise ValueError("p must be an odd prime")
    if E.disc % p == 0:
        raise ValueError(f"p={p} divides disc(F)={E.disc}")
    c2, c1, c0 = E.cubic
    s = int(kernels.cubic_char_sums((1, c2, c1, c0), np.array([p]))[0])
    return -s


def _ap_minimal(ainvs, p):
    """a_p from a minimal model, any prime (naive count)."""
    a1, a2, a3, a4, a6 = ainvs
    if p == 2:
        count = 1
        for x in range(2):
            for y in range(2):
                if (y * y + a1 * x * y + a3 * y - x ** 3 - a2 * x * x - a4 * x - a6) % 2 == 0:
                    count += 1
        return 3 - count
    b2 = a1 * a1 + 4 * a2
    b4 = 2 * a4 + a1 * a3
    b6 = a3 * a3 + 4 * a6
    s = int(kernels.cubic_char_sums((4, b2, 2 * b4, b6), np.array([p]))[0])
    return -s


def _curve_key(E):
    return E.label or "F_{}_{}_{}_N{}".format(*E.cubic, E.conductor)


def curve_ap_table(E, limit, use_disk=True):
    """Array a[p] (float, NaN where unavailable) for all primes p <= limit."""
    limit = int(limit)
    pt = prime_table(limit)
    primes = pt.primes_upto(limit)
    path = None
    if use_disk:
        path = os.path.join(cache_dir(), f"ap_{_curve_key(E)}.npy")
        if os.path.exists(path):
            try:
                cached = np.load(path)
            except (OSError, ValueError):
                cached = None
            if cached is not None and cached.shape[0] >= limit + 1:
                return cached[: limit + 1].copy()
    ap = np.full(limit + 1, np.nan)
    odd = primes[primes > 2]
    if E.ainvs is not None:
        a1, a2, a3, a4, a6 = E.ainvs
        b2 = a1 * a1 + 4 * a2
        b4 = 2 * a4 + a1 * a3
        b6 = a3 * a3 + 4 * a6
        ap[odd] = -kernels.cubic_char_sums((4, b2, 2 * b4, b6), odd)
        if limit >= 2:
            ap[2] = _ap_minimal(E.ainvs, 2)
    else:
        good = odd[E.disc % odd != 0]
        ap[good] = -kernels.cubic_char_sums((1, *E.cubic), good)
        skipped = [int(p) for p in primes if E.disc % int(p) == 0]
        if skipped:
            log.info("curve %s: no minimal model, skipping bad primes %s",
                     _curve_key(E), skipped)
    if path is not None:
        tmp = path + f".{os.getpid()}.tmp.npy"
        np.save(tmp, ap)
        os.replace(tmp, path)
    return ap


@dataclass(frozen=True, eq=False)
class NewformSpec:
    """A newform of level N, even weight k and root number epsilon.

    Eigenvalues come either from an elliptic curve (weight 2) or from a
    mapping p -> normalised lambda(p).
    """

    level: int
    weight: int
    epsilon: int
    curve: Optional[EllipticCurveSpec] = None
    coefficients: Optional[Mapping[int, float]] = None
    label: str = ""
    key: str = ""
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __reduce__(self):
        # ship the key, not the cached tables; workers rebuild via form_from_key
        if self.key:
            return (form_from_key, (self.key,))
        return (NewformSpec, (self.level, self.weight, self.epsilon, self.curve,
                              self.coefficients, self.label))

    def __post_init__(self):
        if self.weight <= 0 or self.weight % 2:
            raise ValueError("weight must be a positive even integer")
        if self.epsilon not in (-1, 1):
            raise ValueError("epsilon must be +-1")
        if (self.curve is None) == (self.coefficients is None):
            raise ValueError("give exactly one eigenvalue source")

    @classmethod
    def from_curve(cls, E):
        if isinstance(E, str):
            E = get_curve(E)
        key = f"curve:{E.label}" if CURVES.get(E.label) is E else ""
        return cls(E.conductor, 2, E.root_number, curve=E, label=E.label, key=key)

    def prime_lambdas(self, limit):
        """Array lam[p] of normalised eigenvalues for p <= limit (NaN: missing)."""
        limit = int(limit)
        hit = self._cache.get("lam_p")
        if hit is not None and hit.shape[0] >= limit + 1:
            return hit[: limit + 1]
        size = max(limit, 1024)
        if self.curve is not None:
            ap = curve_ap_table(self.curve, size)
            idx = np.arange(size + 1, dtype=np.float64)
            with np.errstate(invalid="ignore", divide="ignore"):
                lam = ap / np.sqrt(idx)
        else:
            lam = np.full(size + 1, np.nan)
            for p, v in self.coefficients.items():
                if p <= size:
                    lam[int(p)] = float(v)
        self._cache["lam_p"] = lam
        return lam[: limit + 1]

    def lambda_table(self, nmax):
        """lambda(n) for 0 <= n <= nmax via the Hecke recursion."""
        nmax = int(nmax)
        hit = self._cache.get("lam_n")
        if hit is not None and hit.shape[0] >= nmax + 1:
            return hit[: nmax + 1]
        pt = prime_table(nmax)
        lam_p = self.prime_lambdas(nmax)
        good = np.ones(nmax + 1)
        for p in factorint(self.level):
            if p <= nmax:
                good[p] = 0.0
        lpf = pt.lpf[: nmax + 1]
        lam = kernels.hecke_table(lam_p, good, lpf, nmax)
        self._cache["lam_n"] = lam
        return lam


def hecke_lambda(f, n):
    """Normalised Hecke eigenvalue lambda_f(n)."""
    n = int(n)
    if n < 1:
        raise ValueError("n must be positive")
    result = 1.0
    for p, e in factorint(n).items() if n > 1 else []:
        lam_p = f.prime_lambdas(p)[p]
        if np.isnan(lam_p):
            raise MissingCoefficientError(f"lambda({p}) unavailable for {f.label or 'form'}")
        good = 0.0 if f.level % p == 0 else 1.0
        prev, cur = 1.0, lam_p
        for _ in range(e - 1):
            prev, cur = cur, lam_p * cur - good * prev
        result *= cur
    return result


def prime_power(n):
    """(p, j) if n = p^j with j >= 1, else None."""
    n = int(n)
    if n < 2:
        return None
    fac = factorint(n)
    if len(fac) != 1:
        return None
    (p, j), = fac.items()
    return p, j


def power_sums(lam_p, jmax):
    """s_j = alpha^j + beta^j for alpha + beta = lam_p, alpha beta = 1."""
    s = [2.0, float(lam_p)]
    for _ in range(2, jmax + 1):
        s.append(lam_p * s[-1] - s[-2])
    return s


def vonmangoldt_f(f, n):
    """Lambda_f(n): coefficients of -L'/L(s, f); 0 off prime powers.

    At primes dividing the level the Euler factor is (1 - lambda(p) p^-s)^-1
    and Lambda_f(p^j) = lambda(p)^j log p.
    """
    pp = prime_power(n)
    if pp is None:
        return 0.0
    p, j = pp
    lam_p = f.prime_lambdas(p)[p]
    if np.isnan(lam_p):
        raise MissingCoefficientError(f"lambda({p}) unavailable")
    if f.level % p == 0:
        return lam_p ** j * math.log(p)
    return power_sums(lam_p, j)[j] * math.log(p)


def root_number_twist(f, d):
    """epsilon_f(d) = epsilon_f chi_d(-N) for (d, 2N) = 1."""
    d = int(d)
    if math.gcd(d, 2 * f.level) != 1:
        raise ValueError(f"d={d} is not coprime to 2N={2 * f.level}")
    return f.epsilon * kronecker(d, f.level) * (1 if d > 0 else -1)


# --------------------------------------------------------------------------
# twist families
# --------------------------------------------------------------------------

def _lcm(values):
    out = 1
    for v in values:
        out = out * v // math.gcd(out, v)
    return out


def class_chi(kappa, a, m, modulus):
    """chi_d(m) shared by all fundamental d with sign kappa, d = a (mod modulus).

    Needs every prime factor of m to divide ``modulus`` (8 | modulus).
    """
    val = 1
    for q, e in factorint(m).items():
        if modulus % q:
            raise ValueError(f"prime {q} does not divide N0={modulus}")
        if q == 2:
            c = 1 if a % 8 in (1, 7) else -1
        else:
            c = kronecker(a % q, q)
        val *= c ** e
    return val


@dataclass(frozen=True)
class TwistFamily:
    """F(kappa, a): fundamental d with kappa d > 0, d = a (mod N0) and
    epsilon_{f_j}(d) equal to ``sign`` for every member form.

    ``sign=None`` drops the root-number condition.
    """

    forms: tuple = ()
    kappa: int = 1
    a: int = 1
    sign: Optional[int] = -1

    def __post_init__(self):
        object.__setattr__(self, "forms", tuple(self.forms))
        if self.kappa not in (-1, 1):
            raise ValueError("kappa must be +-1")
        if self.a % 8 not in (1, 5):
            raise ValueError(f"a={self.a} must be 1 or 5 mod 8")
        if math.gcd(self.a, self.N0) != 1:
            raise ValueError(f"a={self.a} not coprime to N0={self.N0}")
        if self.sign is not None:
            for f in self.forms:
                eps = f.epsilon * self.kappa * class_chi(self.kappa, self.a, f.level, self.N0)
                if eps != self.sign:
                    raise ValueError(
                        f"class (kappa={self.kappa}, a={self.a}) gives root number {eps} "
                        f"for level {f.level}, need {self.sign}")

    @property
    def N0(self):
        return _lcm([8] + [f.level for f in self.forms])

    @property
    def M(self):
        return len(self.forms)


def valid_pairs(forms, sign=-1):
    """All (kappa, a) classes realising the required root number for every form."""
    forms = tuple(forms)
    n0 = _lcm([8] + [f.level for f in forms])
    out = []
    for kappa in (1, -1):
        for a in range(1, n0, 4):
            if a % 8 not in (1, 5) or math.gcd(a, n0) != 1:
                continue
            ok = True
            if sign is not None:
                for f in forms:
                    eps = f.epsilon * kappa * class_chi(kappa, a, f.level, n0)
                    if eps != sign:
                        ok = False
                        break
            if ok:
                out.append((kappa, a))
    return out


def family_pairs(forms, sign=-1):
    return [TwistFamily(forms, k, a, sign) for k, a in valid_pairs(forms, sign)]


def squarefree_mask(lo, hi):
    """Boolean mask over lo..hi (inclusive, lo >= 1): squarefree integers."""
    lo = int(lo)
    hi = int(hi)
    n = hi - lo + 1
    mask = np.ones(max(n, 0), dtype=bool)
    if n <= 0:
        return mask
    pt = prime_table(math.isqrt(hi) + 1)
    for p in pt.primes_upto(math.isqrt(hi)):
        q = int(p) * int(p)
        start = (-lo) % q
        mask[start::q] = False
    return mask


def _enumerate_classes(n0, classes, X1, X2):
    lo = int(math.floor(X1)) + 1
    hi = int(math.floor(X2))
    if hi < lo:
        return np.zeros(0, dtype=np.int64)
    lo = max(lo, 2)
    m = np.arange(lo, hi + 1, dtype=np.int64)
    sf = squarefree_mask(lo, hi)
    pieces = []
    for kappa in (1, -1):
        residues = sorted(a for k, a in classes if k == kappa)
        if not residues:
            continue
        table = np.zeros(n0, dtype=bool)
        table[residues] = True
        d = kappa * m
        keep = sf & table[d % n0]
        pieces.append(d[keep])
    if not pieces:
        return np.zeros(0, dtype=np.int64)
    d = np.concatenate(pieces)
    return d[np.argsort(np.abs(d), kind="stable")]


def enumerate_family(family, X1, X2):
    """Sorted (by |d|) array of d in the family with X1 < |d| <= X2."""
    if not 0 <= X1:
        raise ValueError("X1 must be nonnegative")
    return _enumerate_classes(family.N0, [(family.kappa, family.a)], X1, X2)


def enumerate_union(forms, X1, X2, sign=-1):
    """Union over all valid (kappa, a) classes, sorted by |d|."""
    forms = tuple(forms)
    n0 = _lcm([8] + [f.level for f in forms])
    return _enumerate_classes(n0, valid_pairs(forms, sign), X1, X2)


def family_from_spec(forms, kappa=None, a=None, sign=-1):
    """A single class when kappa/a are given, else the list of all classes."""
    if kappa is None and a is None:
        return family_pairs(forms, sign)
    if kappa is None or a is None:
        raise ValueError("give both kappa and a, or neither")
    return [TwistFamily(forms, kappa, a, sign)]


def enumerate_families(families: Sequence[TwistFamily], X1, X2):
    """Sorted union of several classes sharing N0."""
    if not families:
        return np.zeros(0, dtype=np.int64)
    n0 = families[0].N0
    if any(f.N0 != n0 for f in families):
        raise ValueError("families must share N0")
    return _enumerate_classes(n0, [(f.kappa, f.a) for f in families], X1, X2)


# --------------------------------------------------------------------------
# coefficient files
# --------------------------------------------------------------------------

def write_coefficients(path, f, pmax):
    lam = f.prime_lambdas(pmax)
    primes = prime_table(pmax).primes_upto(pmax)
    with open(path, "w") as fh:
        fh.write(f"N={f.level} k={f.weight} eps={f.epsilon}\n")
        for p in primes:
            v = lam[p]
            if not np.isnan(v):
                fh.write(f"{int(p)} {float(v)!r}\n")


def read_coefficients(path, label=""):
    with open(path) as fh:
        header = fh.readline().split()
        meta = dict(tok.split("=", 1) for tok in header)
        try:
            level, weight, eps = int(meta["N"]), int(meta["k"]), int(meta["eps"])
        except KeyError as exc:
            raise ValueError(f"{path}: header missing {exc}") from None
        coeffs = {}
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            p, v = line.split()
            coeffs[int(p)] = float(v)
    return NewformSpec(level, weight, eps, coefficients=coeffs,
                       label=label or os.path.basename(path),
                       key="file:" + os.path.abspath(path))


@functools.lru_cache(maxsize=32)
def form_from_key(key):
    """'curve:<label>' or 'file:<path>' -> shared NewformSpec (one per process)."""
    kind, _, rest = key.partition(":")
    if kind == "curve":
        return NewformSpec.from_curve(get_curve(rest))
    if kind == "file":
        return read_coefficients(rest)
    raise ValueError(f"unknown form key {key!r}")


def resolve_form(spec):
    """A NewformSpec from a curve label, 'file:<path>' or an existing spec."""
    if isinstance(spec, NewformSpec):
        return spec
    spec = str(spec)
    if ":" in spec:
        return form_from_key(spec)
    return form_from_key("curve:" + spec)
