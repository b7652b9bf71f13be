import math
from fractions import Fraction

import pytest

from oracles import MP, octagon_trace, octagon_vertices, primitive_lattice
from symlogflow.fixtures import surface_fixture
from symlogflow.numeric import QuadraticNumber
from symlogflow.surface import EnumerationBudgetError, holonomies, saddle_connections

R2 = QuadraticNumber(0, Fraction(1, 2), 2)


@pytest.mark.parametrize("T", [1, 3, 7.5, 20])
def test_torus_holonomies_are_primitive_vectors(T):
    S = surface_fixture("torus")
    hs = {(int(a), int(b)) for a, b in holonomies(saddle_connections(S, T))}
    assert hs == set(primitive_lattice(T))


def test_torus_sector_count():
    S = surface_fixture("torus")
    J = (0.2, 0.9)
    hs = {(int(a), int(b)) for a, b in holonomies(saddle_connections(S, 20, sector=J))}
    assert hs == set(primitive_lattice(20, J))
    with pytest.raises(ValueError):
        saddle_connections(S, 5, sector=(0, 4))


def test_octagon_holonomies_are_traced_saddles():
    S = surface_fixture("octagon")
    P = octagon_vertices()
    sides = {(P[(k + 1) % 8][0] - P[k][0], P[(k + 1) % 8][1] - P[k][1]) for k in range(8)}
    delta = MP.mpf(10) ** -30
    for h in holonomies(saddle_connections(S, 2.5)):
        hx, hy = h[0].to_mpf(2000, MP), h[1].to_mpf(2000, MP)
        n = MP.sqrt(hx * hx + hy * hy)
        if any(abs(hx - sx) < 1e-100 and abs(hy - sy) < 1e-100 for sx, sy in sides):
            continue
        if any(abs(hx + sx) < 1e-100 and abs(hy + sy) < 1e-100 for sx, sy in sides):
            continue
        hits = 0
        for k in range(8):
            st = (P[k][0] + delta * hx / n, P[k][1] + delta * hy / n)
            inside = all((P[(i + 1) % 8][0] - P[i][0]) * (st[1] - P[i][1])
                         - (P[(i + 1) % 8][1] - P[i][1]) * (st[0] - P[i][0]) > 0 for i in range(8))
            if inside:
                kind, L = octagon_trace(st, (hx, hy), float(n) + 1)
                hits += kind == "vertex" and abs(L + delta - n) < MP.mpf(10) ** -100
        assert hits >= 1, h


def test_octagon_holonomies_rotation_invariant():
    # the octagon's affine group contains rotation by pi/4
    S = surface_fixture("octagon")
    hs = set(holonomies(saddle_connections(S, 4)))
    rot = {(R2 * (a - b), R2 * (a + b)) for a, b in hs}
    assert rot == hs and len(hs) % 8 == 0


def test_lengths_sorted_and_bounded():
    S = surface_fixture("h11_sqrt2")
    cs = saddle_connections(S, 3)
    assert all(c.length <= 3 + 1e-12 for c in cs)
    assert [c.length_sq for c in cs] == sorted(c.length_sq for c in cs)


def test_budget():
    S = surface_fixture("octagon")
    with pytest.raises(EnumerationBudgetError):
        saddle_connections(S, 30, budget=100)
