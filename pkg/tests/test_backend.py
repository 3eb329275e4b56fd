import os

import numpy as np
from hypothesis import given, settings, strategies as st

from twiststats import kernels
from twiststats._backend import backend_name
from twiststats.arith import prime_table, resolve_form, squarefree_mask
from twiststats.proxy import prime_coefficients


def both(monkeypatch, func):
    monkeypatch.setenv("TWISTSTATS_BACKEND", "numba")
    a = func()
    monkeypatch.setenv("TWISTSTATS_BACKEND", "numpy")
    b = func()
    monkeypatch.delenv("TWISTSTATS_BACKEND")
    return np.asarray(a), np.asarray(b)


def test_env_flag_selects_backend(monkeypatch):
    monkeypatch.setenv("TWISTSTATS_BACKEND", "numpy")
    assert backend_name() == "numpy"
    monkeypatch.setenv("TWISTSTATS_BACKEND", "NUMBA")
    assert backend_name() == "numba"


@settings(max_examples=20, deadline=None)
@given(st.lists(st.integers(-10**6, 10**6), min_size=1, max_size=50),
       st.lists(st.integers(0, 10**5).map(lambda k: 2 * k + 1), min_size=50, max_size=50))
def test_jacobi_backends_agree(a, n):
    a = np.array(a, dtype=np.int64)
    n = np.array(n[:a.size], dtype=np.int64)
    old = os.environ.get("TWISTSTATS_BACKEND")
    os.environ["TWISTSTATS_BACKEND"] = "numba"
    x = kernels.jacobi_array(a, n)
    os.environ["TWISTSTATS_BACKEND"] = "numpy"
    y = kernels.jacobi_array(a, n)
    if old is None:
        del os.environ["TWISTSTATS_BACKEND"]
    else:
        os.environ["TWISTSTATS_BACKEND"] = old
    np.testing.assert_array_equal(x, y)


def test_twisted_prime_sums_agree(monkeypatch):
    absd = np.arange(10_001, 14_001, dtype=np.int64)
    absd = absd[(absd % 4 == 1) & squarefree_mask(10_001, 14_000)]
    primes, coef = prime_coefficients(resolve_form("37a1"), 300)
    a, b = both(monkeypatch, lambda: kernels.twisted_prime_sums(absd, primes, coef[None, :]))
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)


def test_point_count_kernels_agree(monkeypatch):
    primes = prime_table(3000).primes_between(5, 3000)
    a, b = both(monkeypatch, lambda: kernels.cubic_char_sums((4, -4, 0, 1), primes))
    np.testing.assert_array_equal(a, b)
    a, b = both(monkeypatch, lambda: kernels.cubic_root_counts(0, -16, 16, primes))
    np.testing.assert_array_equal(a, b)


def test_hecke_table_agrees(monkeypatch):
    nmax = 5000
    lam_p = np.nan_to_num(resolve_form("37a1").prime_lambdas(nmax))
    good = (37 % np.maximum(np.arange(lam_p.size), 1)) != 0
    lpf = prime_table(nmax).lpf
    a, b = both(monkeypatch, lambda: kernels.hecke_table(lam_p, good, lpf, nmax))
    np.testing.assert_allclose(a, b, rtol=0, atol=1e-12)
