"""Hot numeric kernels.

Every kernel exists twice: a loop version compiled with numba and a
vectorised numpy version. ``TWISTSTATS_BACKEND`` picks one at call time
(see :mod:`twiststats._backend`). Both versions perform the same arithmetic
in the same order where summation order matters, so results agree to
roundoff; the benchmark in ``benchmarks/bench_kernels.py`` compares them.
"""
import numpy as np

from ._backend import backend_name, njit


# --------------------------------------------------------------------------
# Jacobi symbol
# --------------------------------------------------------------------------

@njit
def _jacobi_scalar(a, n):
    # n odd and positive
    a = a % n
    result = 1
    while a != 0:
        while a % 2 == 0:
            a //= 2
            r = n % 8
            if r == 3 or r == 5:
                result = -result
        t = a
        a = n
        n = t
        if a % 4 == 3 and n % 4 == 3:
            result = -result
        a = a % n
    if n == 1:
        return result
    return 0


@njit
def _jacobi_loop(a, n):
    out = np.empty(a.shape[0], dtype=np.int8)
    for i in range(a.shape[0]):
        out[i] = _jacobi_scalar(a[i], n[i])
    return out


def _jacobi_numpy(a, n):
    a = np.mod(a, n).astype(np.int64)
    n = n.astype(np.int64).copy()
    res = np.ones(a.shape, dtype=np.int8)
    active = a != 0
    while active.any():
        while True:
            ev = active & (a % 2 == 0)
            if not ev.any():
                break
            a[ev] //= 2
            r = n[ev] % 8
            res[ev] = np.where((r == 3) | (r == 5), -res[ev], res[ev])
        idx = np.nonzero(active)[0]
        ai = a[idx]
        ni = n[idx]
        flip = (ai % 4 == 3) & (ni % 4 == 3)
        res[idx] = np.where(flip, -res[idx], res[idx])
        a[idx] = ni % ai
        n[idx] = ai
        active = a != 0
    res[n != 1] = 0
    return res


def jacobi_array(a, n):
    """Elementwise Jacobi symbol (a/n) for odd positive n."""
    a = np.ascontiguousarray(a, dtype=np.int64)
    n = np.ascontiguousarray(n, dtype=np.int64)
    a, n = np.broadcast_arrays(a, n)
    a = np.ascontiguousarray(a).ravel()
    shape = n.shape
    n = np.ascontiguousarray(n).ravel()
    if backend_name() == "numba":
        out = _jacobi_loop(a, n)
    else:
        out = _jacobi_numpy(a, n)
    return out.reshape(shape)


# --------------------------------------------------------------------------
# Twisted sums over primes: sum_p (c_odd[j,p] chi_d(p) + c_even[j,p] chi_d(p)^2)
# --------------------------------------------------------------------------

@njit
def _twisted_sums_loop(absd, primes, c_odd, c_even):
    nd = absd.shape[0]
    npr = primes.shape[0]
    m_forms = c_odd.shape[0]
    out = np.zeros((nd, m_forms))
    s = np.zeros(m_forms)
    comp = np.zeros(m_forms)
    for i in range(nd):
        m = absd[i]
        for j in range(m_forms):
            s[j] = 0.0
            comp[j] = 0.0
        for k in range(npr):
            if m == 1:
                chi = 1
            else:
                chi = _jacobi_scalar(primes[k] % m, m)
            if chi == 0:
                continue
            for j in range(m_forms):
                v = c_odd[j, k] * chi + c_even[j, k]
                y = v - comp[j]
                t = s[j] + y
                comp[j] = (t - s[j]) - y
                s[j] = t
        for j in range(m_forms):
            out[i, j] = s[j]
    return out


def _twisted_sums_numpy(absd, primes, c_odd, c_even):
    nd = absd.shape[0]
    m_forms = c_odd.shape[0]
    s = np.zeros((nd, m_forms))
    comp = np.zeros((nd, m_forms))
    for k in range(primes.shape[0]):
        chi = _jacobi_numpy(np.full(nd, primes[k], dtype=np.int64), absd)
        chi[absd == 1] = 1
        live = chi != 0
        if not live.any():
            continue
        v = c_odd[:, k][None, :] * chi[live, None].astype(np.float64) + c_even[:, k][None, :]
        sl = s[live]
        y = v - comp[live]
        t = sl + y
        comp[live] = (t - sl) - y
        s[live] = t
    return s


def twisted_prime_sums(absd, primes, c_odd, c_even=None):
    """Per-discriminant sums of prime coefficients twisted by chi_d.

    ``absd`` holds |d| for fundamental discriminants d = 1 (mod 4), for which
    chi_d(p) equals the Jacobi symbol (p mod |d| / |d|). Returns an array of
    shape (len(absd), M) with Kahan-compensated sums in ascending prime order.
    """
    absd = np.ascontiguousarray(absd, dtype=np.int64)
    primes = np.ascontiguousarray(primes, dtype=np.int64)
    c_odd = np.ascontiguousarray(np.atleast_2d(c_odd), dtype=np.float64)
    if c_even is None:
        c_even = np.zeros_like(c_odd)
    c_even = np.ascontiguousarray(np.atleast_2d(c_even), dtype=np.float64)
    if c_odd.shape != c_even.shape or c_odd.shape[1] != primes.shape[0]:
        raise ValueError("coefficient arrays must have shape (M, len(primes))")
    if absd.shape[0] == 0:
        return np.zeros((0, c_odd.shape[0]))
    if backend_name() == "numba":
        return _twisted_sums_loop(absd, primes, c_odd, c_even)
    return _twisted_sums_numpy(absd, primes, c_odd, c_even)


# --------------------------------------------------------------------------
# Point counting: a_p = -sum_x chi_p(G(x)) for a cubic G
# --------------------------------------------------------------------------

@njit
def _cubic_char_sums_loop(coeffs, primes):
    lead = coeffs[0]
    c2 = coeffs[1]
    c1 = coeffs[2]
    c0 = coeffs[3]
    out = np.zeros(primes.shape[0], dtype=np.int64)
    if primes.shape[0] == 0:
        return out
    pmax = 0
    for p in primes:
        if p > pmax:
            pmax = p
    sq = np.empty(pmax, dtype=np.int8)
    for idx in range(primes.shape[0]):
        p = primes[idx]
        for r in range(p):
            sq[r] = -1
        sq[0] = 0
        # consecutive squares: (x+1)^2 = x^2 + (2x+1)
        s = 0
        step = 1
        for x in range(1, (p + 1) // 2):
            t = s + step - p
            s = t + (p & (t >> 63))
            t = step + 2 - p
            step = t + (p & (t >> 63))
            sq[s] = 1
        g = c0 % p
        d1 = (lead + c2 + c1) % p
        d2 = (6 * lead + 2 * c2) % p
        d3 = (6 * lead) % p
        total = 0
        # branch-free modular additions: t + (p & (t >> 63)) with t = a + b - p
        for x in range(p):
            total += sq[g]
            t = g + d1 - p
            g = t + (p & (t >> 63))
            t = d1 + d2 - p
            d1 = t + (p & (t >> 63))
            t = d2 + d3 - p
            d2 = t + (p & (t >> 63))
        out[idx] = total
    return out


def _cubic_char_sums_numpy(coeffs, primes):
    lead, c2, c1, c0 = (int(c) for c in coeffs)
    out = np.zeros(len(primes), dtype=np.int64)
    for idx, p in enumerate(primes):
        p = int(p)
        x = np.arange(p, dtype=np.int64)
        sq = np.full(p, -1, dtype=np.int8)
        sq[(x[1:] * x[1:]) % p] = 1
        sq[0] = 0
        g = (lead * x + c2) % p
        g = (g * x + c1) % p
        g = (g * x + c0) % p
        out[idx] = int(sq[g].astype(np.int64).sum())
    return out


def cubic_char_sums(coeffs, primes):
    """sum_{x mod p} (G(x)/p) for G = lead x^3 + c2 x^2 + c1 x + c0, odd p."""
    coeffs = np.asarray(coeffs, dtype=np.int64)
    primes = np.ascontiguousarray(primes, dtype=np.int64)
    if backend_name() == "numba":
        return _cubic_char_sums_loop(coeffs, primes)
    return _cubic_char_sums_numpy(coeffs, primes)


# --------------------------------------------------------------------------
# Root counts of a monic cubic mod p (Frobenius on x^p, Stickelberger parity)
# --------------------------------------------------------------------------

@njit
def _powmod(b, e, m):
    r = 1
    b = b % m
    while e > 0:
        if e & 1:
            r = (r * b) % m
        b = (b * b) % m
        e >>= 1
    return r


@njit
def _cubic_root_counts_loop(c2, c1, c0, disc, primes):
    out = np.zeros(primes.shape[0], dtype=np.int64)
    for idx in range(primes.shape[0]):
        p = primes[idx]
        b2 = c2 % p
        b1 = c1 % p
        b0 = c0 % p
        # x^3 = -b2 x^2 - b1 x - b0 ; x^4 = e2 x^2 + e1 x + e0
        e2 = (b2 * b2 - b1) % p
        e1 = (b2 * b1 - b0) % p
        e0 = (b2 * b0) % p
        r0, r1, r2 = 1, 0, 0
        s0, s1, s2 = 0, 1, 0
        e = p
        while e > 0:
            if e & 1:
                t0 = (r0 * s0) % p
                t1 = (r0 * s1 + r1 * s0) % p
                t2 = (r0 * s2 + r1 * s1 + r2 * s0) % p
                t3 = (r1 * s2 + r2 * s1) % p
                t4 = (r2 * s2) % p
                r0 = (t0 - t3 * b0 + t4 * e0) % p
                r1 = (t1 - t3 * b1 + t4 * e1) % p
                r2 = (t2 - t3 * b2 + t4 * e2) % p
            t0 = (s0 * s0) % p
            t1 = (2 * s0 * s1) % p
            t2 = (2 * s0 * s2 + s1 * s1) % p
            t3 = (2 * s1 * s2) % p
            t4 = (s2 * s2) % p
            s0 = (t0 - t3 * b0 + t4 * e0) % p
            s1 = (t1 - t3 * b1 + t4 * e1) % p
            s2 = (t2 - t3 * b2 + t4 * e2) % p
            e >>= 1
        if r0 == 0 and (r1 - 1) % p == 0 and r2 == 0:
            out[idx] = 3
        elif _powmod(disc % p, (p - 1) // 2, p) == p - 1:
            out[idx] = 1
        else:
            out[idx] = 0
    return out


def _cubic_root_counts_numpy(c2, c1, c0, disc, primes):
    p = primes.astype(np.int64)
    b2, b1, b0 = c2 % p, c1 % p, c0 % p
    e2 = (b2 * b2 - b1) % p
    e1 = (b2 * b1 - b0) % p
    e0 = (b2 * b0) % p

    def mul(r, s):
        t0 = (r[0] * s[0]) % p
        t1 = ((r[0] * s[1]) % p + (r[1] * s[0]) % p) % p
        t2 = ((r[0] * s[2]) % p + (r[1] * s[1]) % p + (r[2] * s[0]) % p) % p
        t3 = ((r[1] * s[2]) % p + (r[2] * s[1]) % p) % p
        t4 = (r[2] * s[2]) % p
        return (
            (t0 - (t3 * b0) % p + (t4 * e0) % p) % p,
            (t1 - (t3 * b1) % p + (t4 * e1) % p) % p,
            (t2 - (t3 * b2) % p + (t4 * e2) % p) % p,
        )

    one = np.ones_like(p)
    zero = np.zeros_like(p)
    res = (one, zero, zero)
    base = (zero, one % p, zero)
    e = p.copy()
    while (e > 0).any():
        bit = (e & 1).astype(bool)
        prod = mul(res, base)
        res = tuple(np.where(bit, pr, r) for pr, r in zip(prod, res))
        base = mul(base, base)
        e >>= 1
    frob_trivial = (res[0] == 0) & ((res[1] - 1) % p == 0) & (res[2] == 0)
    # Legendre of disc by Euler's criterion
    leg = np.ones_like(p)
    b = disc % p
    e = (p - 1) // 2
    while (e > 0).any():
        bit = (e & 1).astype(bool)
        leg = np.where(bit, (leg * b) % p, leg)
        b = (b * b) % p
        e >>= 1
    return np.where(frob_trivial, 3, np.where(leg == p - 1, 1, 0)).astype(np.int64)


def cubic_root_counts(c2, c1, c0, primes):
    """Number of roots of x^3 + c2 x^2 + c1 x + c0 modulo each odd good prime."""
    primes = np.ascontiguousarray(primes, dtype=np.int64)
    disc = (c2 * c2 * c1 * c1 - 4 * c1 ** 3 - 4 * c2 ** 3 * c0
            - 27 * c0 * c0 + 18 * c2 * c1 * c0)
    if primes.shape[0] == 0:
        return np.zeros(0, dtype=np.int64)
    if backend_name() == "numba":
        return _cubic_root_counts_loop(int(c2), int(c1), int(c0), int(disc), primes)
    return _cubic_root_counts_numpy(int(c2), int(c1), int(c0), int(disc), primes)


# --------------------------------------------------------------------------
# Multiplicative extension of Hecke eigenvalues
# --------------------------------------------------------------------------

@njit
def _hecke_table_loop(lam_p, good, lpf, nmax):
    lam = np.zeros(nmax + 1)
    if nmax >= 1:
        lam[1] = 1.0
    for n in range(2, nmax + 1):
        p = lpf[n]
        m = n
        while m % p == 0:
            m //= p
        q = n // m
        if m > 1:
            lam[n] = lam[q] * lam[m]
        elif q == p:
            lam[n] = lam_p[p]
        else:
            lam[n] = lam_p[p] * lam[n // p] - good[p] * lam[n // (p * p)]
    return lam


def _hecke_table_numpy(lam_p, good, lpf, nmax):
    lam = np.zeros(nmax + 1)
    if nmax >= 1:
        lam[1] = 1.0
    for n in range(2, nmax + 1):
        p = int(lpf[n])
        m = n
        while m % p == 0:
            m //= p
        q = n // m
        if m > 1:
            lam[n] = lam[q] * lam[m]
        elif q == p:
            lam[n] = lam_p[p]
        else:
            lam[n] = lam_p[p] * lam[n // p] - good[p] * lam[n // (p * p)]
    return lam


def hecke_table(lam_p, good, lpf, nmax):
    """lambda(n) for all n <= nmax from prime values (NaN marks missing)."""
    lam_p = np.ascontiguousarray(lam_p, dtype=np.float64)
    good = np.ascontiguousarray(good, dtype=np.float64)
    lpf = np.ascontiguousarray(lpf, dtype=np.int64)
    if backend_name() == "numba":
        return _hecke_table_loop(lam_p, good, lpf, int(nmax))
    return _hecke_table_numpy(lam_p, good, lpf, int(nmax))
