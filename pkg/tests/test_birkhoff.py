from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, strategies as st

from oracles import naive_birkhoff
from symlogflow.birkhoff import (RoofConfigurationError, SpecialFlowPoint, birkhoff_prefix_sums, birkhoff_sum,
                                 check_cancellation, evolve, find_derivative_zero)
from symlogflow.fixtures import asymmetric_roof, iet_fixture, symmetric_roof
from symlogflow.iet import golden_rotation, random_symmetric_iet
from symlogflow.numeric import FloatBackend
from symlogflow.roof import LogRoof, SingularityError
from symlogflow.towers import tower_at


def _log_prime(ctx, x, i, b):
    return -1 / (x - b[i]) + 1 / (b[i + 1] - x)


@given(st.sampled_from([2, 3, 5]), st.integers(0, 10**6), st.integers(1, 60))
def test_derivative_sum_matches_naive(d, seed, n):
    T = random_symmetric_iet(d, seed, D=2)
    f = symmetric_roof(T)
    x = T.sample_points(1, seed)[0]
    got = birkhoff_sum(T, f, x, n, 1)
    ref = naive_birkhoff(T.lengths, x, n, _log_prime, prec=400)
    with mpmath.workprec(400):
        assert abs(got.to_mpf(400) - ref) <= 1e-80 * (1 + abs(ref))


def test_value_sum_matches_naive():
    T = iet_fixture("d5_sqrt2")
    f = symmetric_roof(T)
    x = T.midpoint()
    log_pair = lambda ctx, y, i, b: -ctx.log(y - b[i]) - ctx.log(b[i + 1] - y)
    ref = naive_birkhoff(T.lengths, x, 200, log_pair, prec=256)
    assert abs(birkhoff_sum(T, f, x, 200) - ref) < 1e-50


def test_negative_convention():
    T = golden_rotation()
    f = symmetric_roof(T)
    x = Fraction(1, 3)
    # S_{-n} f(x) = -S_n f(T^-n x)
    assert birkhoff_sum(T, f, x, -7, 1) == -birkhoff_sum(T, f, T.iterate(x, -7), 7, 1)
    pre = birkhoff_prefix_sums(T, f, x, 5, 2)
    assert pre[-1] == birkhoff_sum(T, f, x, 5, 2) and len(pre) == 5


@given(st.sampled_from([2, 3, 4, 5]), st.integers(0, 10**6), st.integers(1, 50))
def test_exact_cancellation(d, seed, n):
    T = random_symmetric_iet(d, seed, D=5)
    rep = check_cancellation(T, symmetric_roof(T), n, random_points=2, seed=seed)
    assert rep.singularity is not None or (rep.ok and rep.residual == 0)


def test_float_cancellation_long_orbit():
    T = golden_rotation(FloatBackend(256))
    rep = check_cancellation(T, symmetric_roof(T), 2000, random_points=1)
    assert rep.ok and abs(rep.residual) < 1e-20


def test_cancellation_fails_for_asymmetric_input():
    T = golden_rotation()
    with pytest.raises(ValueError):
        check_cancellation(T, asymmetric_roof(T), 10)


def test_nonzero_without_symmetric_strengths():
    # one-sided strengths break the identity: the residual is visibly nonzero
    T = golden_rotation()
    f = LogRoof(T, [(1, 0), (0, 1)])
    x = T.midpoint()
    a = birkhoff_sum(T, f, x, 13, 1)
    b = birkhoff_sum(T, f, T.involution(x), -13, 1)
    assert a + b != 0


def test_flow_additivity():
    T = golden_rotation()
    f = symmetric_roof(T)
    p = SpecialFlowPoint(Fraction(1, 7), mpmath.mpf("0.1"))
    q1, n1 = evolve(T, f, p, 13.5)
    q2, n2 = evolve(T, f, q1, 8.25)
    q, n = evolve(T, f, p, 21.75)
    assert q.x == q2.x and n == n1 + n2 and n > 0
    assert abs(q.r - q2.r) < 1e-40
    back, nb = evolve(T, f, q, -21.75)
    assert back.x == p.x and nb == -n and abs(back.r - p.r) < 1e-40


def test_flow_rejects_bad_inputs():
    T = golden_rotation()
    f = symmetric_roof(T)
    with pytest.raises(ValueError):
        evolve(T, f, SpecialFlowPoint(Fraction(1, 2), 100), 1)
    f.min_value = 0
    with pytest.raises(RoofConfigurationError):
        evolve(T, f, SpecialFlowPoint(Fraction(1, 2), 0), 1)


def test_singularity_reports_step():
    T = golden_rotation()
    f = symmetric_roof(T)
    x = T.iterate(T.betas[1] + Fraction(1, 10**40), -3)
    with pytest.raises(SingularityError) as e:
        birkhoff_sum(T, f, x, 5)
    assert e.value.step == 3


def test_derivative_zero_in_tower_base():
    T = golden_rotation()
    f = symmetric_roof(T)
    tw = tower_at(T, T.midpoint(), 55)
    z = find_derivative_zero(T, f, tw, bits=60)
    assert tw.a < z.x < tw.b
    lo, hi = z.bracket
    s_lo, s_hi = birkhoff_sum(T, f, lo, 55, 1), birkhoff_sum(T, f, hi, 55, 1)
    assert (s_lo <= 0 <= s_hi) or (s_hi <= 0 <= s_lo)
