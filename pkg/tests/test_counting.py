import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import primitive_lattice
from symlogflow.fixtures import surface_fixture
from symlogflow.surface import (arc_length, check_separation, count_large_cylinders, covering_step_check,
                                diverg_partial_sum, divergence_witness, fit_count_constant,
                                good_approximation_search, in_arc, torus_lattice_records, write_cylinder_csv)


@pytest.mark.parametrize("T, J", [(10, None), (20, (0.3, 1.1)), (25, (5.9, 0.4 + 2 * math.pi))])
def test_torus_counts_equal_lattice(T, J):
    S = surface_fixture("torus")
    res = count_large_cylinders(S, T, J)
    # the oracle takes a wrapping arc as (lo, hi) with hi < lo
    oj = None if J is None else (J[0] % (2 * math.pi), J[1] % (2 * math.pi))
    assert res.count == len(primitive_lattice(T, oj))
    assert len(torus_lattice_records(T, J)) == res.count
    assert not res.incomplete


def test_torus_ratio_near_six_over_pi_squared():
    # primitive vectors in a disk of radius T: (6/pi^2) pi T^2, over lambda = 2 pi
    res = count_large_cylinders(surface_fixture("torus"), 60)
    assert res.ratio == pytest.approx(3 / math.pi ** 2, rel=0.02)


def _brute_separation(recs, T, eps, A):
    """Pairwise version of the separation audit (all pairs, no windows)."""
    bad_gap, bad_flow = 0, 0
    th = sorted(c.theta for c in recs)
    for a, b in zip(th, th[1:] + [th[0] + 2 * math.pi]):
        if b - a < A * (1 - eps) / T ** 2:
            bad_gap += 1
    for i, c in enumerate(recs):
        for d in recs[i + 1:]:
            if c.holonomy[0] * d.holonomy[1] == c.holonomy[1] * d.holonomy[0]:
                continue
            if c.area_fraction + d.area_fraction <= 1:
                continue
            g = abs(c.theta - d.theta) % (2 * math.pi)
            g = min(g, 2 * math.pi - g)
            if g < A * max(float(c.area_fraction), float(d.area_fraction)) / (c.length * d.length):
                bad_flow += 1
    return bad_gap, bad_flow


@pytest.mark.parametrize("name, T", [("torus", 15), ("h11_rational", 6), ("octagon", 5)])
def test_separation_against_pairwise_oracle(name, T):
    S = surface_fixture(name)
    res = count_large_cylinders(S, T, eps=0.4)
    rep = check_separation(res.records, T, 0.4, area=float(S.area))
    g, f = _brute_separation(res.records, T, 0.4, float(S.area))
    assert len(rep.gap_violations) == g and len(rep.flow_violations) == f
    assert rep.ok and rep.cap_ok


def test_separation_flags_crowded_directions():
    S = surface_fixture("torus")
    recs = count_large_cylinders(S, 15).records
    # a bound built for T = 1000 forbids nothing; for T = 1 it is far too strict
    assert check_separation(recs, 1000, 0.4).gap_violations == []
    bad = check_separation(recs, 1, 0.4)
    assert not bad.ok and bad.violations > 0


@given(st.floats(1.01, 10), st.integers(1, 300))
def test_diverg_closed_form(sigma, K):
    with mpmath.workprec(120):
        a = diverg_partial_sum(sigma, K)
        b = diverg_partial_sum(sigma, K, direct=True)
        assert abs(a - b) <= 1e-25 * abs(a)


def test_divergence_witness_minimal():
    K, s = divergence_witness(18 / math.sqrt(0.3), 1000)
    assert s > 1000
    assert diverg_partial_sum(18 / math.sqrt(0.3), K - 1) <= 1000
    with pytest.raises(ValueError):
        divergence_witness(1, 10)


def test_fit_constant_below_every_ratio():
    S = surface_fixture("torus")
    rs = [count_large_cylinders(S, T) for T in (10, 20, 40)]
    c = fit_count_constant(rs)
    assert all(c * r.T ** 2 * arc_length(None) < r.count for r in rs)


def test_arcs():
    J = (6.0, 0.5 + 2 * math.pi)
    assert in_arc(0.1, J) and in_arc(6.1, J) and not in_arc(3.0, J)
    assert arc_length(J) == pytest.approx(0.5 + 2 * math.pi - 6.0)
    assert arc_length(None) == pytest.approx(2 * math.pi)


def test_covering_step_on_lattice():
    c = 0.29
    recs = torus_lattice_records(400)
    step = covering_step_check(recs, c, T=200, L=201)
    assert step.ok


def test_good_approximations_of_golden_slope():
    S = surface_fixture("torus")
    phi = (1 + math.sqrt(5)) / 2
    res = good_approximation_search(S, 0.4, 3, 60, math.atan2(phi, 1))
    hs = [(int(c.holonomy[0]), int(c.holonomy[1])) for c in res.records]
    target = math.atan2(phi, 1)
    want = [(p, q) for p, q in primitive_lattice(60)
            if math.hypot(p, q) >= 3
            and abs(math.atan2(q, p) - target) < 1 / ((p * p + q * q) * math.log(math.hypot(p, q)))]
    assert sorted(hs) == sorted(want) == [(2, 3), (3, 5)]


def test_csv(tmp_path):
    recs = count_large_cylinders(surface_fixture("h11_rational"), 4).records
    write_cylinder_csv(recs, tmp_path / "c.csv")
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[0].startswith("p,q,theta") and len(lines) == len(recs) + 1
