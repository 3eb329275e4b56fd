import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from twiststats.arith import TwistFamily, get_curve, resolve_form
from twiststats.explicit import aggregate_S, fejer
from twiststats.moments import (FamilyData, FamilySpec, family_data, gaussian_moment,
                                joint_report, lower_bound_constant, mc_rectangle, pc_moment,
                                poly_moment, poly_moment_with_zeros, projection_shapes,
                                proxy_pair_stats, psi_rectangle, random_unit_vectors,
                                rectangle_count, shape_stats, xi_rectangle)
from twiststats.proxy import ProxyConfig, dirichlet_poly, tamagawa_sum_C, tamagawa_window

X_SMALL = 20_000.0


@pytest.fixture(scope="module")
def small_data():
    spec = FamilySpec(("37a1",), curve="37a1", kernel_L=math.log(X_SMALL))
    return family_data(spec, X_SMALL, math.sqrt(X_SMALL), workers=1)


def test_gaussian_moments_known_values():
    assert {k: gaussian_moment(k) for k in (0, 1, 2, 3, 4, 6)} == {0: 1, 1: 0, 2: 1, 3: 0,
                                                                    4: 3, 6: 15}
    for k in range(0, 11, 2):
        assert gaussian_moment(k) == pytest.approx(stats.norm.moment(k))
    with pytest.raises(ValueError):
        gaussian_moment(-1)


def test_family_data_matches_scalar_proxy(small_data):
    f = resolve_form("37a1")
    idx = np.linspace(0, small_data.d.size - 1, 12).astype(int)
    for i in idx:
        d = int(small_data.d[i])
        assert small_data.P[i, 0] == pytest.approx(dirichlet_poly(f, d, small_data.x), abs=1e-10)
    assert np.all(small_data.w > 0)


def test_poly_moment_zeroth_and_degenerate(small_data):
    r0 = poly_moment([1.0], 0, small_data)
    assert r0.ratio == pytest.approx(1.0)
    assert r0.lhs == pytest.approx(small_data.w.sum())
    r = poly_moment([0.0], 2, small_data)
    assert r.lhs == 0.0
    with pytest.raises(ValueError):
        poly_moment([1.0], 9, small_data)


def test_poly_moment_matches_direct_sum(small_data):
    r = poly_moment([1.0], 2, small_data)
    direct = sum(w * p * p for w, p in zip(small_data.w.tolist(), small_data.P[:, 0].tolist()))
    assert r.lhs == pytest.approx(direct, rel=1e-12)
    assert r.predicted == pytest.approx(small_data.w.sum() * math.log(math.log(X_SMALL)))


def test_pc_moment_with_c_zero_is_poly_moment(small_data):
    a = pc_moment(1.0, 0.0, 2, small_data, sigma2=0.5)
    b = poly_moment([1.0], 2, small_data)
    assert a.lhs == pytest.approx(b.lhs, rel=1e-13)
    assert a.predicted == pytest.approx(b.predicted, rel=1e-13)


def test_zero_weighted_moment_equals_class_aggregates(small_data):
    kernel = fejer(math.log(X_SMALL))
    r = poly_moment_with_zeros([1.0], 0, small_data, kernel)
    spec = FamilySpec(("37a1",))
    forms = spec.resolved()
    total = sum(aggregate_S(1, 1, TwistFamily(forms, kappa, a, -1), X_SMALL, kernel).value
                for kappa, a in spec.class_list())
    assert r.lhs == pytest.approx(total, rel=1e-10)


def test_shape_stats_of_gaussian_sample():
    z = np.random.default_rng(1).standard_normal(400_000)
    mean, var, skew, kurt = shape_stats(z)
    assert abs(mean) < 0.01 and abs(var - 1) < 0.01
    assert abs(skew) < 0.02 and abs(kurt) < 0.04


def test_random_unit_vectors_are_unit_and_seeded():
    a = random_unit_vectors(5, 3, 0)
    np.testing.assert_allclose(np.linalg.norm(a, axis=1), 1.0)
    np.testing.assert_array_equal(a, random_unit_vectors(5, 3, 0))


def test_projection_shapes_count(small_data):
    out = projection_shapes(small_data, n=3, seed=0)
    assert len(out) == 3 and all(o.variance > 0 for o in out)


def test_psi_rectangle_examples():
    assert psi_rectangle([-np.inf], [np.inf]) == pytest.approx(1.0)
    assert psi_rectangle([0.0], [np.inf]) == pytest.approx(0.5)
    assert psi_rectangle([-1.0, 0.0], [1.0, np.inf]) == pytest.approx(0.6826894921370859 * 0.5)
    with pytest.raises(ValueError):
        psi_rectangle([1.0], [1.0])


def test_xi_rectangle_limits():
    assert xi_rectangle([-40, -40], [40, 40], 2.0) == pytest.approx(1.0, abs=1e-8)
    # rho -> 0 factorises
    v = xi_rectangle([-1.0, 0.5], [2.0, 1.5], 1e9)
    assert v == pytest.approx(psi_rectangle([-1.0, 0.5], [2.0, 1.5]), abs=1e-8)
    # positive quadrant of a correlated pair: 1/4 + asin(rho)/2pi
    rho = 1 / 1.5
    assert xi_rectangle([0, 0], [40, 40], 1.5) == pytest.approx(
        0.25 + math.asin(rho) / (2 * math.pi), abs=1e-8)
    with pytest.raises(ValueError):
        xi_rectangle([0, 0], [1, 1], 1.0)


@settings(max_examples=15, deadline=None)
@given(st.floats(-3, 1), st.floats(0.1, 2), st.floats(-3, 1), st.floats(0.1, 2),
       st.floats(0.1, 3))
def test_xi_rectangle_additive_in_first_coordinate(a1, w1, a2, w2, cut):
    b1, b2 = a1 + w1, a2 + w2
    m = a1 + w1 * min(cut, 2.9) / 3
    whole = xi_rectangle([a1, a2], [b1, b2], 1.7)
    left = xi_rectangle([a1, a2], [m, b2], 1.7)
    right = xi_rectangle([m, a2], [b1, b2], 1.7)
    assert whole == pytest.approx(left + right, abs=1e-8)
    assert 0 <= left <= whole + 1e-12


def test_mc_rectangle_close_to_exact():
    assert mc_rectangle([0.0, 0.0], [8.0, 8.0], rho=1 / 1.2, n=2_000_000) == pytest.approx(
        xi_rectangle([0, 0], [8, 8], 1.2), abs=2e-3)


def test_rectangle_count_uses_open_closed_convention():
    s = np.array([[0.0, 0.5], [1.0, 1.0], [0.5, 0.5]])
    assert rectangle_count(s, [0.0, 0.0], [1.0, 1.0]) == 2


def test_lower_bound_constants():
    assert lower_bound_constant("theorem1", 1) == 0.75
    assert lower_bound_constant("theorem1", 3) == 0.25
    assert lower_bound_constant("theorem2") == 0.75
    assert lower_bound_constant("rank0") == 0.25
    with pytest.raises(ValueError):
        lower_bound_constant("theorem1", 4)


def test_joint_report_whole_plane():
    s = np.random.default_rng(0).standard_normal((100, 3))
    rep = joint_report(s, [-np.inf] * 3, [np.inf] * 3, "theorem1")
    assert rep.fraction == 1.0 and rep.target == pytest.approx(1.0)
    assert rep.bound == pytest.approx(0.25)
    rep = joint_report(s[:, :2], [-np.inf] * 2, [np.inf] * 2, "theorem1", undecided=100)
    assert rep.fraction == 0.5 and rep.count == 200


def test_proxy_pair_stats_columns(small_data):
    ll = math.log(math.log(X_SMALL))
    r = proxy_pair_stats(small_data, 0.8)
    np.testing.assert_allclose(r[:, 0], small_data.P[:, 0] / math.sqrt(ll))
    np.testing.assert_allclose(r[:, 1], (small_data.P[:, 0] - small_data.C) / math.sqrt(0.8 * ll))


def test_family_data_C_matches_scalar(small_data):
    E = get_curve("37a1")
    cfg = ProxyConfig(X_SMALL, x=small_data.x)
    win = tamagawa_window(E, cfg, small_data.N0)
    for i in range(0, small_data.d.size, max(1, small_data.d.size // 8)):
        assert small_data.C[i] == pytest.approx(
            tamagawa_sum_C(E, int(small_data.d[i]), cfg, win), abs=1e-10)


def test_empty_family_data_reports():
    data = FamilyData(1e4, 100.0, np.zeros(0, dtype=np.int64), np.zeros(0), np.zeros((0, 1)))
    assert poly_moment([1.0], 2, data).lhs == 0.0
