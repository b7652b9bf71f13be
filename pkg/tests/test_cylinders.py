from fractions import Fraction

import pytest

from symlogflow.fixtures import surface_fixture
from symlogflow.iet import Iet
from symlogflow.numeric import QuadraticNumber
from symlogflow.surface import (cylinder_by_tracing, cylinders_in_direction, first_return_iet,
                                periodic_tower, primitive_direction, section_tower_areas,
                                separatrix_return_bound)

R2 = QuadraticNumber(0, 1, 2)


def test_horizontal_cylinders_of_sqrt2_suspension():
    S = surface_fixture("h11_sqrt2")
    d = cylinders_in_direction(S, (1, 0))
    got = sorted((c.period, c.area) for c in d.cylinders)
    assert got == [(5, Fraction(9, 50) - R2 / 50), (11, Fraction(33, 50) - R2 / 50)]
    assert d.completely_periodic
    assert [c.holonomy[0] for c in sorted(d.cylinders, key=lambda c: c.period)] == \
        [Fraction(9, 10) - R2 / 10, Fraction(33, 20) - R2 / 20]


def test_rational_suspension_directions():
    S = surface_fixture("h11_rational")
    d = cylinders_in_direction(S, (0, 1))
    assert sorted(c.area for c in d.cylinders) == [Fraction(11, 50), Fraction(7, 25), Fraction(17, 50)]
    assert d.total_area_fraction == 1
    d = cylinders_in_direction(S, (1, 1))
    assert sorted(c.length_sq for c in d.cylinders) == [2 * Fraction(81, 25), 72]


def test_torus_every_rational_direction_one_cylinder():
    S = surface_fixture("torus")
    for v in [(1, 0), (2, 3), (-5, 7)]:
        d = cylinders_in_direction(S, v)
        assert len(d.cylinders) == 1 and d.cylinders[0].area == 1
        assert d.cylinders[0].length_sq == v[0] ** 2 + v[1] ** 2


def test_octagon_horizontal():
    S = surface_fixture("octagon")
    d = cylinders_in_direction(S, (1, 0))
    # two cylinders of equal area whose moduli are in ratio 2 : 1
    assert len(d.cylinders) == 2 and d.completely_periodic
    a, b = sorted(d.cylinders, key=lambda c: c.length_sq)
    assert a.area == b.area == 1 + R2
    assert b.length_sq == 2 * a.length_sq


@pytest.mark.parametrize("v", [(1, 0), (0, 1), (1, 1)])
def test_tracing_agrees_with_decomposition(v):
    S = surface_fixture("h11_rational")
    d = cylinders_in_direction(S, v)
    for c in d.cylinders:
        poly, pt = c.sample_point
        got = cylinder_by_tracing(S, pt, v, polygon=poly)
        assert got == (c.length_sq, c.area)


@pytest.mark.parametrize("name, v", [("h11_rational", (1, 0)), ("h11_rational", (0, 1)),
                                     ("h11_rational", (1, 1)), ("h11_sqrt2", (1, 0))])
def test_first_return_towers_match_cylinders(name, v):
    S = surface_fixture(name)
    sec = first_return_iet(S, v)
    assert isinstance(sec.iet, Iet) and sec.iet.total == 1
    areas = section_tower_areas(sec, 40, seed=3)
    cyl = {c.area: c.period for c in cylinders_in_direction(S, v).cylinders}
    assert areas == cyl


def test_aperiodic_point_has_no_tower():
    S = surface_fixture("h11_sqrt2")
    sec = first_return_iet(S, (0, 1))
    z = sec.iet.sample_points(1, 0)[0]
    assert periodic_tower(sec, z, max_period=200) is None


def test_primitive_direction():
    assert primitive_direction((4, -6)) == (2, -3)
    assert separatrix_return_bound(surface_fixture("torus"), (1, 0)) > 0
