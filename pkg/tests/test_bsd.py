import json
import logging
import math
import os

import httpx
import numpy as np
import pytest
from scipy import integrate

import twiststats
from twiststats import bsd
from twiststats.arith import get_curve
from twiststats.lvalue import central_derivative, central_value, twist_sign
from twiststats.arith import resolve_form

PKG_FIXTURES = os.path.join(os.path.dirname(twiststats.__file__), "data", "fixtures")


def quad_period(cubic):
    """Real period by direct quadrature, x = e1 + t^2 removes the endpoint singularity."""
    roots = np.roots([1.0, *map(float, cubic)])
    real = sorted(r.real for r in roots if abs(r.imag) < 1e-9)
    e1 = real[-1]
    c2 = float(cubic[0])
    # F(x) / (x - e1) = x^2 + (c2 + e1) x + (c1 + c2 e1 + e1^2)
    b = c2 + e1
    c = float(cubic[1]) + c2 * e1 + e1 * e1
    val, _ = integrate.quad(lambda t: 2.0 / math.sqrt((e1 + t * t) ** 2 + b * (e1 + t * t) + c),
                            0, np.inf, epsabs=1e-13, epsrel=1e-13)
    omega = 2.0 * val
    return 2.0 * omega if len(real) == 3 else omega


@pytest.mark.parametrize("label", ["11a1", "37a1", "43a1", "53a1"])
@pytest.mark.parametrize("d", [1, -3, 5, -7, 13])
def test_real_period_matches_quadrature(label, d):
    E = get_curve(label)
    cubic = bsd.twisted_cubic(E, d)
    assert bsd.real_period(cubic) == pytest.approx(quad_period(cubic), rel=1e-9)


def test_real_period_known_value():
    assert bsd.real_period(get_curve("37a1").cubic) == pytest.approx(5.98691729246392, rel=1e-12)
    assert bsd.real_period(get_curve("11a1").cubic) == pytest.approx(1.2692093, rel=1e-7)


def test_packaged_fixture_reproduces_bsd_for_rank_one_curve():
    src = bsd.InvariantSource(fixtures=PKG_FIXTURES)
    inv = src.load("37a1", 1)
    Lp = central_derivative(resolve_form("37a1"), 1).Lprime
    SR = bsd.sha_reg_proxy(Lp, inv)
    assert SR / inv.regulator == pytest.approx(1.0, rel=1e-10)
    assert bsd.sha_proxy(Lp, inv) == pytest.approx(inv.sha, rel=1e-10)


def test_fixture_round_trip(tmp_path):
    a = bsd.CurveInvariants("37a1", 5, 2.5, 1, 2, regulator=0.7)
    b = bsd.CurveInvariants("37a1", -3, 5.98, 1, 1)
    bsd.write_fixture(tmp_path, [a, b])
    got = bsd.load_fixtures(str(tmp_path), "37a1")
    assert got[5].record() == a.record() and got[-3].record() == b.record()
    assert got[-3].regulator is None and got[5].sources["regulator"] == "fixture"


def test_jsonl_fixtures(tmp_path):
    (tmp_path / "11a1.jsonl").write_text(
        '{"d": 1, "omega": 1.26, "torsion": 5, "tamagawa": 5}\n\n'
        '{"d": -3, "omega": 0.7, "torsion": 1, "tamagawa": 1, "sha": 1}\n')
    got = bsd.load_fixtures(str(tmp_path), "11a1")
    assert sorted(got) == [-3, 1] and got[-3].sha == 1


@pytest.mark.parametrize("rec,field", [
    ({"d": 1, "omega": 1.0, "torsion": 1}, "tamagawa"),
    ({"d": 1, "omega": "x", "torsion": 1, "tamagawa": 1}, "omega"),
    ({"d": 1, "omega": 1.0, "torsion": 1.5, "tamagawa": 1}, "torsion"),
    ({"d": 1, "omega": 1.0, "torsion": 1, "tamagawa": 1, "rank": 0}, "rank"),
    ({"d": 1, "omega": -1.0, "torsion": 1, "tamagawa": 1}, "omega"),
    ({"d": True, "omega": 1.0, "torsion": 1, "tamagawa": 1}, "d"),
])
def test_parse_errors_name_the_field(rec, field):
    with pytest.raises(bsd.InvariantParseError) as err:
        bsd.parse_record(rec, "37a1", "fixture")
    assert err.value.field == field


def mock_remote(tmp_path, records, status=None, **kw):
    calls = []

    def handler(request):
        calls.append(str(request.url))
        if status is not None:
            return httpx.Response(status)
        key = request.url.path.rsplit("/", 1)[-1].removesuffix(".json")
        if int(key) not in records:
            return httpx.Response(404)
        return httpx.Response(200, json=records[int(key)])

    rem = bsd.RemoteInvariants("https://example.invalid/inv", cache=str(tmp_path / "cache"),
                               transport=httpx.MockTransport(handler), **kw)
    return rem, calls


def test_remote_fetch_and_cache(tmp_path):
    recs = {5: {"d": 5, "omega": 2.0, "torsion": 1, "tamagawa": 1, "regulator": 0.5}}
    rem, calls = mock_remote(tmp_path, recs)
    inv = rem.get("37a1", 5)
    assert inv.provenance == "remote" and inv.regulator == 0.5
    rem.get("37a1", 5)
    assert len(calls) == 1
    with pytest.raises(bsd.InvariantNotFound):
        rem.get("37a1", 13)


def test_remote_offline_and_refresh(tmp_path):
    recs = {5: {"d": 5, "omega": 2.0, "torsion": 1, "tamagawa": 1}}
    rem, calls = mock_remote(tmp_path, recs)
    rem.get("37a1", 5)
    off, off_calls = mock_remote(tmp_path, recs, offline=True)
    assert off.get("37a1", 5).omega == 2.0
    with pytest.raises(bsd.InvariantNotFound):
        off.get("37a1", 13)
    assert off_calls == [] and off.fetches == 0
    ref, ref_calls = mock_remote(tmp_path, recs, refresh=True)
    ref.get("37a1", 5)
    assert len(ref_calls) == 1


def test_remote_server_errors_retry_then_fail(tmp_path):
    rem, calls = mock_remote(tmp_path, {}, status=503, retries=3)
    with pytest.raises(ConnectionError):
        rem.get("37a1", 5)
    assert len(calls) == 3


def test_merge_prefers_fixture_and_logs_conflict(tmp_path, caplog):
    bsd.write_fixture(tmp_path / "fx", [bsd.CurveInvariants("37a1", 5, 2.0, 1, 1)])
    recs = {5: {"d": 5, "omega": 2.5, "torsion": 1, "tamagawa": 1, "regulator": 0.25}}
    rem, _ = mock_remote(tmp_path, recs)
    src = bsd.InvariantSource(fixtures=str(tmp_path / "fx"), remote=rem)
    with caplog.at_level(logging.WARNING, logger="twiststats.bsd"):
        inv = src.load("37a1", 5)
    assert inv.omega == 2.0 and inv.regulator == 0.25
    assert inv.sources == {"omega": "fixture", "torsion": "fixture", "tamagawa": "fixture",
                           "regulator": "remote"}
    assert any("conflicts" in r.message for r in caplog.records)


def test_missing_regulator_blocks_sha_but_not_sha_reg():
    inv = bsd.CurveInvariants("37a1", 5, 2.0, 2, 3)
    assert bsd.sha_reg_proxy(1.5, inv) == pytest.approx(1.5 * 4 / 6)
    with pytest.raises(bsd.MissingInvariant) as err:
        bsd.sha_proxy(1.5, inv)
    assert err.value.missing == ["regulator"]


def test_sources_exhausted_raise_not_found(tmp_path):
    src = bsd.InvariantSource(fixtures=str(tmp_path))
    with pytest.raises(bsd.InvariantNotFound):
        src.load("37a1", 5)


def test_sha_reg_is_linear_and_trivial_at_unit_invariants():
    inv = bsd.CurveInvariants("37a1", 5, 1.0, 1, 1)
    assert bsd.sha_reg_proxy(0.37, inv) == pytest.approx(0.37)
    assert bsd.sha_reg_proxy(2 * 0.37, inv) == pytest.approx(2 * bsd.sha_reg_proxy(0.37, inv))


def test_s0_proxy_sign_and_positivity():
    inv = bsd.CurveInvariants("37a1", -3, 1.0, 1, 1)
    with pytest.raises(ValueError):
        bsd.s0_proxy(1.0, inv, -1)
    with pytest.raises(ValueError):
        bsd.s0_proxy(0.0, inv, 1)


def test_computed_s0_is_exact_for_trivial_sha_twist():
    E = get_curve("37a1")
    inv = bsd.computed_invariants(E, -3)
    assert inv.approximate and inv.provenance == "computed-proxy"
    L = central_value(resolve_form("37a1"), -3).L
    assert bsd.s0_proxy(L, inv, twist_sign(resolve_form("37a1"), -3)) == pytest.approx(1.0,
                                                                                       rel=1e-9)


def test_computed_period_stays_in_envelope():
    E = get_curve("37a1")
    base = bsd.real_period(E.cubic)
    neg = []
    for d in (5, -7, 13, -15, 21, 1009, -1019):
        rel = bsd.computed_invariants(E, d).omega * math.sqrt(abs(d)) / base
        if d > 0:
            assert rel == pytest.approx(1.0, rel=1e-12)
        else:
            neg.append(rel)
    # negative twists scale one fixed lattice ratio
    assert max(neg) - min(neg) < 1e-12
    with pytest.raises(ValueError):
        bsd.computed_invariants(E, -7, envelope=1.1)


def test_statistics_formulas():
    d = 10_007
    ll = math.log(math.log(d))
    assert bsd.sha_statistic(math.sqrt(d) * math.exp(ll), d, 0.0, 1.0) == pytest.approx(0.0)
    assert bsd.s0_statistic(math.sqrt(d), d, 0.0, 2.0) == pytest.approx(0.0)
    assert bsd.central_statistic(math.exp(-0.5 * ll), d) == pytest.approx(0.0, abs=1e-12)


def test_records_json_serialisable():
    inv = bsd.CurveInvariants("37a1", 5, 2.0, 1, 1)
    json.dumps(inv.as_dict())
