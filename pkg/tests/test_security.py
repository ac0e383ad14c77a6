import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crosschain.metrics import PropagationEvent
from crosschain.security import (
    confirmation_depth,
    detect_probability,
    fake_probability,
    intact_probability,
    log10_fake_probability,
    security_table,
    verify_detection_by_sampling,
)


def enumerate_outcomes(ps):
    """Exact pb and pf by summing over all 2^n break patterns."""
    pb = pf = 0.0
    for pattern in itertools.product((0, 1), repeat=len(ps)):
        w = math.prod(p if b else 1 - p for p, b in zip(ps, pattern))
        k = sum(pattern)
        if k == len(ps):
            pb += w
        elif k:
            pf += w
    return pb, pf


def test_fake_examples():
    assert fake_probability({1: 0.1, 2: 0.1}) == pytest.approx(0.01)
    assert fake_probability({1: 0.0, 2: 0.7}) == 0.0
    assert fake_probability({1: 0.5, 2: 0.5, 3: 0.5}) == 0.125


def test_detect_examples():
    assert detect_probability({1: 0.1, 2: 0.1}) == pytest.approx(0.18)
    assert detect_probability({1: 0.0, 2: 0.0}) == 0.0
    assert detect_probability({1: 1.0, 2: 1.0}) == 0.0


def test_errors():
    with pytest.raises(ValueError):
        fake_probability({1: 0.1}, [])
    with pytest.raises(ValueError):
        detect_probability({1: 1.5})
    with pytest.raises(KeyError):
        fake_probability({1: 0.1}, [2])
    with pytest.raises(ValueError):
        verify_detection_by_sampling({1: 0.1}, trials=0)


probs = st.lists(st.floats(0, 1), min_size=1, max_size=10)


@settings(max_examples=200, deadline=None)
@given(probs)
def test_matches_enumeration_and_identity(ps):
    d = dict(enumerate(ps))
    pb, pf = enumerate_outcomes(ps)
    assert fake_probability(d) == pytest.approx(pb, abs=1e-12)
    assert detect_probability(d) == pytest.approx(pf, abs=1e-12)
    assert abs(fake_probability(d) + detect_probability(d) + intact_probability(d) - 1) <= 1e-12


@settings(max_examples=200, deadline=None)
@given(probs, st.floats(0, 1))
def test_pb_bounds_and_monotone(ps, extra):
    d = dict(enumerate(ps))
    pb = fake_probability(d)
    assert 0 <= pb <= min(ps)
    d[len(ps)] = extra
    assert fake_probability(d) <= pb


def test_log_space_for_many_chains():
    ps = {i: 0.5 for i in range(40)}
    assert fake_probability(ps) == pytest.approx(0.5**40, rel=1e-12)
    assert log10_fake_probability(ps) == pytest.approx(40 * math.log10(0.5))
    tiny = {i: 1e-20 for i in range(31)}
    assert log10_fake_probability(tiny) == pytest.approx(-620)


def test_sampling_examples():
    est = verify_detection_by_sampling({1: 0.1, 2: 0.1}, trials=100_000, seed=1)
    assert abs(est - 0.18) < 0.01
    assert verify_detection_by_sampling({1: 0.0, 2: 0.0, 3: 0.0}, trials=1000) == 0.0
    assert verify_detection_by_sampling({1: 0.3, 2: 0.6}, trials=5000, seed=3) == \
        verify_detection_by_sampling({1: 0.3, 2: 0.6}, trials=5000, seed=3)


def test_confirmation_depth():
    trace = [PropagationEvent(1, 1, "a", 1), PropagationEvent(3, 1, "a", 2), PropagationEvent(5, 1, "a", 2)]
    assert confirmation_depth(trace[:1], "a") == 1
    assert confirmation_depth(trace, "a") == 2
    assert confirmation_depth(trace, "zz") == 0


def test_table_rows_sum_to_one():
    rows = security_table({1: 0.1, 2: 0.1, 3: 0.3}, [[1, 2], [1, 2, 3]])
    assert rows[0]["pb"] == pytest.approx(0.01)
    assert rows[0]["pf"] == pytest.approx(0.18)
    assert rows[0]["intact"] == pytest.approx(0.81)
    for r in rows:
        assert r["pb"] + r["pf"] + r["intact"] == pytest.approx(1, abs=1e-12)
