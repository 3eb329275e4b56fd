import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from twiststats.arith import get_curve, kronecker, prime_table, resolve_form
from twiststats.proxy import (ProxyConfig, c_of_p, c_table, deligne_envelope, dirichlet_poly,
                              dirichlet_poly_many, galois_group, galois_profile, mertens_check,
                              normalized_stats, tamagawa_sum_C, tamagawa_sum_C_many, weight_w)

F37 = resolve_form("37a1")


def brute_c(F, p):
    c2, c1, c0 = F
    return 1 + sum(1 for z in range(p) if (z ** 3 + c2 * z * z + c1 * z + c0) % p == 0)


@settings(max_examples=60, deadline=None)
@given(st.integers(-30, 30), st.integers(-30, 30), st.integers(-30, 30))
def test_c_of_p_matches_brute_count(c2, c1, c0):
    from twiststats.proxy import cubic_disc
    disc = cubic_disc(c2, c1, c0)
    if disc == 0:
        return
    for p in prime_table(200).primes_upto(200).tolist()[1:]:
        if disc % p:
            assert c_of_p((c2, c1, c0), p) == brute_c((c2, c1, c0), p)


def test_c_table_marks_excluded_primes():
    F = (0, -1, 0)  # x^3 - x, disc 4
    t = c_table(F, np.array([2, 3, 5, 7]))
    assert t[0] == 0 and all(t[1:] == 4)


def test_weight():
    assert weight_w(2, 100) == pytest.approx(2 ** (-1 / math.log(100)) * math.log(50)
                                             / math.log(100))
    with pytest.raises(ValueError):
        weight_w(101, 100)


@pytest.mark.parametrize("d", [5, -3, -7, 13, -1019, 1001])
def test_dirichlet_poly_matches_direct_sum(d):
    x = 500
    lam = F37.prime_lambdas(x)
    direct = math.fsum(lam[p] * kronecker(d, p) * weight_w(p, x) / math.sqrt(p)
                       for p in prime_table(x).primes_upto(x).tolist())
    assert dirichlet_poly(F37, d, x) == pytest.approx(direct, abs=1e-12)
    assert abs(dirichlet_poly(F37, d, x)) <= deligne_envelope(x)


def test_vectorised_matches_scalar():
    d = np.array([5, -3, 13, -1019, 1001, -7])
    forms = (F37, resolve_form("43a1"))
    many = dirichlet_poly_many(forms, d, 300)
    for i, dv in enumerate(d.tolist()):
        for j, f in enumerate(forms):
            if math.gcd(dv, 2 * f.level) == 1:
                assert many[i, j] == pytest.approx(dirichlet_poly(f, dv, 300), abs=1e-12)


@pytest.mark.parametrize("F,group", [((0, -1, 0), "trivial"), ((-1, 1, -1), "C2"),
                                     ((0, -3, -1), "C3"), ((0, -1, -1), "S3")])
def test_galois_groups(F, group):
    assert galois_group(F) == group


def test_galois_table_values():
    L2 = math.log(2)
    table = {"trivial": (-0.5 - 2 * L2, 1 + 4 * L2 ** 2),
             "C2": (-0.5 - 1.5 * L2, 1 + 2.5 * L2 ** 2),
             "C3": (-0.5 - 2 / 3 * L2, 1 + 4 / 3 * L2 ** 2),
             "S3": (-0.5 - 5 / 6 * L2, 1 + 7 / 6 * L2 ** 2)}
    for F, group in [((0, -1, 0), "trivial"), ((-1, 1, -1), "C2"), ((0, -3, -1), "C3"),
                     ((0, -1, -1), "S3")]:
        prof = galois_profile(F)
        assert abs(prof.mu - table[group][0]) <= 1e-12
        assert abs(prof.sigma2 - table[group][1]) <= 1e-12


def test_chebotarev_density_matches_empirical_frequencies():
    F = (0, -1, -1)
    cs = c_table(F, prime_table(200_000).primes_upto(200_000)[2:])
    cs = cs[cs > 0]
    emp = {c: float(np.mean(cs == c)) for c in (1, 2, 4)}
    for c, dens in galois_profile(F).chebotarev.items():
        assert emp[c] == pytest.approx(dens, abs=0.01)


def test_mertens_main_term_small_y():
    r = mertens_check((0, -1, 0), 10_000)
    assert r.target1 == pytest.approx(2 * math.log(2) * math.log(math.log(10_000)))


def test_tamagawa_sum_vectorised_matches_scalar():
    E = get_curve("37a1")
    cfg = ProxyConfig(1e4, x=100)
    d = np.array([5, -3, 13, -1019, 1001, -7, 5 * 13 * 17])
    many = tamagawa_sum_C_many(E, d, cfg)
    for i, dv in enumerate(d.tolist()):
        assert many[i] == pytest.approx(tamagawa_sum_C(E, dv, cfg), abs=1e-12)


def test_tamagawa_sum_decomposition():
    E = get_curve("37a1")
    cfg = ProxyConfig(1e4, x=100)
    from twiststats.proxy import tamagawa_window
    win = tamagawa_window(E, cfg)
    for d in [5, 13, 1001, 1105, -3 * 43 * 67]:
        lhs = tamagawa_sum_C(E, d, cfg) + math.fsum((win.logc / (win.primes + 1.0)).tolist())
        rhs = math.fsum(lc for p, lc in zip(win.primes.tolist(), win.logc.tolist()) if d % p == 0)
        assert lhs == pytest.approx(rhs, abs=1e-12)


def test_normalized_stats_fields():
    E = get_curve("37a1")
    s = normalized_stats(-1019, (F37,), 1e4, 100, E)
    ll = math.log(math.log(1e4))
    assert s.Q[0] == pytest.approx(s.P[0] / math.sqrt(ll))
    assert s.R2 == pytest.approx((s.P[0] - s.C) / math.sqrt(s.sigma2 * ll))
