"""Independent reference implementations used only by the tests.

Nothing here imports the package: coefficients come from counting points on
the long Weierstrass model, characters from a textbook Kronecker symbol and
L-values from a 30-digit mpmath series with its own split parameter.
"""
import math

import mpmath


def legendre(a, p):
    a %= p
    if a == 0:
        return 0
    return 1 if pow(a, (p - 1) // 2, p) == 1 else -1


def kronecker(d, n):
    """Kronecker symbol (d/n) for n >= 1 by factoring n."""
    out = 1
    m = n
    q = 2
    while q * q <= m:
        while m % q == 0:
            out *= _kron_prime(d, q)
            m //= q
        q += 1
    if m > 1:
        out *= _kron_prime(d, m)
    return out


def _kron_prime(d, p):
    if p == 2:
        if d % 2 == 0:
            return 0
        return 1 if d % 8 in (1, 7) else -1
    return legendre(d, p)


def affine_points(ainvs, p):
    a1, a2, a3, a4, a6 = ainvs
    count = 0
    for x in range(p):
        rhs = x ** 3 + a2 * x * x + a4 * x + a6
        if p == 2:
            count += sum(1 for y in range(2) if (y * y + (a1 * x + a3) * y - rhs) % 2 == 0)
        else:
            disc = (a1 * x + a3) ** 2 + 4 * rhs
            count += 1 + legendre(disc, p)
    return count


def an_table(ainvs, conductor, nmax):
    """Integer Dirichlet coefficients a_n of L(E, s), 1 <= n <= nmax."""
    a = [0] * (nmax + 1)
    a[1] = 1
    ap = {}
    sieve = list(range(nmax + 1))
    for p in range(2, nmax + 1):
        if sieve[p] == p:
            for k in range(p * p, nmax + 1, p):
                if sieve[k] == k:
                    sieve[k] = p
            ap[p] = p - affine_points(ainvs, p)
    for n in range(2, nmax + 1):
        p = sieve[n]
        m, k = n, 0
        while m % p == 0:
            m //= p
            k += 1
        if m > 1:
            a[n] = a[n // m] * a[m]
        elif k == 1:
            a[n] = ap[p]
        elif conductor % p == 0:
            a[n] = ap[p] * a[n // p]
        else:
            a[n] = ap[p] * a[n // p] - p * a[n // (p * p)]
    return a


_TABLES = {}


def _twisted(ainvs, conductor, d, nmax):
    key = (tuple(ainvs), conductor, d, nmax)
    if key not in _TABLES:
        a = an_table(ainvs, conductor, nmax)
        _TABLES[key] = [(n, a[n] * (kronecker(d, n) if abs(d) > 1 else 1))
                        for n in range(1, nmax + 1)]
    return [(n, c) for n, c in _TABLES[key] if c]


def completed_lambda(ainvs, conductor, eps, d, s, A=1.3, dps=30):
    """Lambda(s) = Q^s Gamma(s + 1/2) L(s, f x chi_d), analytic normalisation,
    at the working precision of the caller (at least ``dps`` digits of tail)."""
    Q = mpmath.sqrt(conductor) * abs(d) / (2 * mpmath.pi)
    A = mpmath.mpf(A)
    span = float(max(A, 1 / A) * Q)
    nmax = int(math.ceil((45 + dps * math.log(10)) * span)) + 20
    s = mpmath.mpmathify(s)
    total = mpmath.mpf(0)
    half = mpmath.mpf(1) / 2
    for n, c in _twisted(ainvs, conductor, d, nmax):
        lam = c / mpmath.sqrt(n)
        t1 = mpmath.power(Q / n, s) * mpmath.gammainc(s + half, n * A / Q)
        t2 = mpmath.power(Q / n, 1 - s) * mpmath.gammainc(1 - s + half, n / (A * Q))
        total += lam * (t1 + eps * t2)
    return total, Q


def central_derivative(ainvs, conductor, eps, d, dps=30):
    """L'(1/2, f x chi_d) for an odd-sign twist via mpmath numerical differentiation.

    ``eps`` is the root number of the twist; the evaluator runs at the raised
    precision mpmath.diff selects, which its tiny step needs.
    """
    with mpmath.workdps(dps):
        _, Q = completed_lambda(ainvs, conductor, eps, d, 0.5, dps=dps)
        der = mpmath.diff(lambda s: completed_lambda(ainvs, conductor, eps, d, s, dps=dps)[0],
                          mpmath.mpf(1) / 2)
        return der / mpmath.sqrt(Q)


def central_value(ainvs, conductor, eps, d, dps=30):
    with mpmath.workdps(dps):
        val, Q = completed_lambda(ainvs, conductor, eps, d, 0.5, dps=dps)
        return val / mpmath.sqrt(Q)
