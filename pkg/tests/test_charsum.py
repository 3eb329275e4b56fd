import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from twiststats.arith import TwistFamily, enumerate_family, kronecker, resolve_form
from twiststats.charsum import (DEFAULT_CUTOFF, SmoothCutoff, char_sum, char_sum_report,
                                in_regime, main_term, square_ratio_target)

FORMS = (resolve_form("37a1"),)
FAM = TwistFamily(FORMS, 1, 1, -1)


@given(st.floats(0, 3))
def test_cutoff_shape(t):
    v = float(DEFAULT_CUTOFF(np.array([t]))[0])
    assert 0.0 <= v <= 1.0
    if t <= 0.5 or t >= 2.5:
        assert v == 0.0
    if 1.0 <= t <= 2.0:
        assert v == 1.0


def test_cutoff_integral_by_symmetry():
    # s(u) + s(1 - u) = 1, so each ramp integrates to half its width: 1 + 0.25 + 0.25
    assert DEFAULT_CUTOFF.hat0 == pytest.approx(1.5, abs=1e-12)
    assert SmoothCutoff(0.5, 1.0, 2.0, 3.0).hat0 == pytest.approx(1.75, abs=1e-12)


def direct_sum(n, v, X):
    total = []
    for d in enumerate_family(FAM, 0.5 * X, 2.5 * X).tolist():
        if d % v:
            continue
        w = float(DEFAULT_CUTOFF(np.array([abs(d) / X]))[0])
        total.append(kronecker(d, n) * w)
    return math.fsum(total)


@pytest.mark.parametrize("n,v", [(1, 1), (9, 1), (3, 1), (35, 1), (1, 5), (7, 3)])
def test_char_sum_matches_direct_loop(n, v):
    assert char_sum(n, v, FAM, 2e4) == pytest.approx(direct_sum(n, v, 2e4), abs=1e-9)


def test_worker_count_does_not_change_bits():
    a = char_sum(9, 1, FAM, 3e5, workers=1)
    b = char_sum(9, 1, FAM, 3e5, workers=3)
    assert a == b


def test_main_term_closed_form():
    X = 1e5
    base = X / 296 * (6 / math.pi ** 2) / ((1 - 1 / 4) * (1 - 1 / 37 ** 2)) * 1.5
    assert main_term(1, 1, X, N0=296) == pytest.approx(base, rel=1e-12)
    assert main_term(9, 5, X, N0=296) == pytest.approx(base / 5 / (4 / 3) / (6 / 5), rel=1e-12)
    assert main_term(3, 1, X, N0=296) == 0.0


def test_preconditions_and_regime():
    with pytest.raises(ValueError):
        char_sum(2, 1, FAM, 1e4)
    with pytest.raises(ValueError):
        char_sum(3, 3, FAM, 1e4)
    with pytest.raises(ValueError):
        char_sum(1, 4, FAM, 1e4)
    assert in_regime(9, 1, 1e6) and not in_regime(10**6, 1, 1e6)


def test_report_fields():
    r = char_sum_report(1, 1, FAM, 1e5)
    assert set(r.as_dict()) == {"lhs", "main", "error", "ratio"}
    assert r.error == pytest.approx(r.lhs - r.main)
    assert square_ratio_target(3, 1, 296) == pytest.approx(0.75)
