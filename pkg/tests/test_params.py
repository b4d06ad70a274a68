import math

import pytest
from hypothesis import given, strategies as st

from bcpdrc.errors import DomainError
from bcpdrc.params import ModelParams, apq, kdq


@given(st.floats(0.001, 0.999), st.floats(0.0, 0.999), st.floats(0.1, 5))
def test_apq_kdelta_round_trip(a, p, q):
    m = apq(a, p, q)
    back = kdq(m.K, m.Delta, q)
    assert back.a == pytest.approx(a, rel=1e-12)
    assert back.p == pytest.approx(p, rel=1e-12, abs=1e-15)
    assert m.r ** 2 + m.p == pytest.approx(1.0, abs=1e-14)


def test_special_values():
    m = kdq(0.5 * math.log(2), 0.0, 2)
    assert m.a == 0.5 and m.p == pytest.approx(0.5, abs=1e-15)
    one = apq(1.0, 0.3, 2)
    assert one.Delta == -math.inf and one.vertex_ratio == math.inf
    assert apq(0.5, 0.0, 1).log_edge_ratio == -math.inf


@pytest.mark.parametrize("a,p,q", [(0.0, 0.5, 1), (1.2, 0.5, 1), (0.5, 1.0, 1), (0.5, -0.1, 1), (0.5, 0.5, 0)])
def test_domain_errors(a, p, q):
    with pytest.raises(DomainError):
        apq(a, p, q)


def test_integer_q():
    assert apq(0.5, 0.5, 3).integer_q == 3
    with pytest.raises(DomainError):
        apq(0.5, 0.5, 1.5).integer_q
