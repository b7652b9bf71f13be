from fractions import Fraction

import mpmath
import pytest
from hypothesis import given, strategies as st

from oracles import naive_birkhoff
from symlogflow.iet import (DiscontinuityHit, DomainError, Iet, Permutation, PrecisionExhausted, golden_rotation,
                            iet_from_spec, random_symmetric_iet, rotation)
from symlogflow.numeric import FloatBackend, QuadraticNumber, sqrt_of

seeds = st.integers(min_value=0, max_value=10**6)
dims = st.sampled_from([2, 3, 4, 5])


def test_rotation_is_translation_mod_one():
    T = rotation(Fraction(2, 5))
    assert T.apply(Fraction(1, 10)) == Fraction(1, 2)
    assert T.apply(Fraction(7, 10)) == Fraction(1, 10)
    assert T.iterate(Fraction(1, 10), 5) == Fraction(1, 10)


def test_golden_rotation_lengths():
    T = golden_rotation()
    phi = (1 + sqrt_of(5)) / 2
    assert T.lengths == (2 - phi, phi - 1)
    assert T.total == 1


def test_symmetric_permutation():
    p = Permutation.symmetric(4)
    assert p.images == (3, 2, 1, 0) and p.is_symmetric
    assert p.inverse() == p
    with pytest.raises(ValueError):
        Permutation((0, 0, 1))


def test_general_permutation_exchange():
    T = Iet([Fraction(1, 4)] * 4, [1, 3, 0, 2])
    # interval 0 goes to position 1, interval 2 to position 0
    assert T.apply(Fraction(1, 8)) == Fraction(3, 8)
    assert T.apply(Fraction(5, 8)) == Fraction(1, 8)
    for x in T.sample_points(20, 1):
        assert T.apply_inverse(T.apply(x)) == x


def test_domain_and_discontinuity_errors():
    T = rotation(Fraction(1, 3))
    with pytest.raises(DomainError):
        T.apply(1)
    with pytest.raises(DiscontinuityHit):
        T.orbit(Fraction(1, 3), 5)
    assert T.orbit(Fraction(1, 3), 5, on_hit="stop") == [Fraction(1, 3), Fraction(2, 3)]


def test_rejects_bad_lengths():
    with pytest.raises(ValueError):
        Iet([Fraction(1, 2), Fraction(0)])
    with pytest.raises(ValueError):
        Iet([Fraction(3, 4), Fraction(1, 2)])
    with pytest.raises(ValueError):
        Iet([sqrt_of(2) / 4, sqrt_of(3) / 4])


@given(dims, seeds)
def test_exact_bijection_and_inverse(d, seed):
    T = random_symmetric_iet(d, seed, D=2)
    for x in T.sample_points(5, seed):
        y = T.apply(x)
        assert 0 <= y < T.total
        assert T.apply_inverse(y) == x


@given(dims, seeds)
def test_symmetry_relation(d, seed):
    T = random_symmetric_iet(d, seed, D=5)
    assert T.check_sb(30, seed).ok


@given(dims, seeds, st.integers(min_value=1, max_value=40))
def test_orbit_against_naive_float_oracle(d, seed, n):
    T = random_symmetric_iet(d, seed, D=3)
    x = T.sample_points(1, seed)[0]
    pts = T.orbit(x, n)
    assert len(pts) == n and pts[0] == x
    # sum of the orbit points and of the visited interval indices
    ref = naive_birkhoff(T.lengths, x, n, lambda ctx, y, i, b: y + 1000 * i)
    with mpmath.workprec(256):
        got = sum(p.to_mpf(256) for p in pts)
        got += 1000 * sum(max(k for k in range(T.d) if T.betas[k] <= p) for p in pts)
        assert abs(ref - got) < mpmath.mpf(2) ** -200
    assert T.iterate(T.iterate(x, n), -n) == x


def test_continuity_interval_rotation():
    T = rotation(Fraction(2, 5))
    a, b = T.continuity_interval(Fraction(1, 2), 5)
    assert (a, b) == (Fraction(2, 5), Fraction(3, 5))


def test_float_backend_tracks_precision():
    E = golden_rotation()
    y = E.iterate(E.betas[1], -20)
    F = golden_rotation(FloatBackend(53))
    # 2^-49 off the preimage of the cut: the error bound after 20 steps is larger
    x = F.number(y.to_mpf(53)) + mpmath.mpf(2) ** -49
    with pytest.raises(PrecisionExhausted):
        F.orbit(x, 40)
    G = golden_rotation(FloatBackend(256))
    assert len(G.orbit(G.number(y.to_mpf(256)) + mpmath.mpf(2) ** -49, 40)) == 40


def test_float_and_exact_agree():
    E = golden_rotation()
    F = golden_rotation(FloatBackend(256))
    xe = E.iterate(E.midpoint(), 500)
    xf = F.iterate(F.midpoint(), 500)
    assert abs(xe.to_mpf(256) - xf) < mpmath.mpf(2) ** -240


def test_spec_roundtrip():
    T = random_symmetric_iet(5, 3, D=2)
    U = iet_from_spec(T.to_spec())
    assert U.lengths == T.lengths and U.permutation == T.permutation


def test_float64_tables_match():
    T = random_symmetric_iet(4, 9, D=7)
    betas, shifts, ib, inv = T.float64_tables()
    assert len(betas) == 5 and len(shifts) == 4
    assert abs(betas[-1] - 1) < 1e-15
