from fractions import Fraction

import pytest

from symlogflow.fixtures import RATIONAL_H11_LENGTHS, SUSPENSION_HEIGHTS, surface_fixture
from symlogflow.numeric import QuadraticNumber
from symlogflow.surface import (FlatSurface, PairingError, SurfaceError, build_from_spec, build_square_torus,
                                build_suspension)


@pytest.mark.parametrize("name, stratum, genus, area", [
    ("torus", (0,), 1, 1),
    ("octagon", (2,), 2, 2 + QuadraticNumber(0, 2, 2)),
    ("h11_sqrt2", (1, 1), 2, Fraction(21, 25) - QuadraticNumber(0, Fraction(1, 25), 2)),
    ("h11_rational", (1, 1), 2, Fraction(21, 25)),
])
def test_fixture_invariants(name, stratum, genus, area):
    S = surface_fixture(name)
    assert S.stratum == stratum and S.genus == genus and S.area == area
    # Gauss-Bonnet for translation surfaces
    assert sum(S.cone_orders) == 2 * S.genus - 2


def test_spec_roundtrip():
    S = surface_fixture("h11_sqrt2")
    U = build_from_spec(S.to_spec())
    assert U.area == S.area and U.stratum == S.stratum


def test_bad_pairings():
    sq = [(0, 0), (1, 0), (1, 1), (0, 1)]
    with pytest.raises(PairingError):
        FlatSurface([sq], {(0, 0): (0, 2), (0, 2): (0, 0), (0, 1): (0, 1), (0, 3): (0, 3)})
    with pytest.raises(PairingError):
        FlatSurface([sq], {(0, 0): (0, 1), (0, 1): (0, 0), (0, 2): (0, 3), (0, 3): (0, 2)})
    with pytest.raises(SurfaceError):
        FlatSurface([list(reversed(sq))], {(0, 0): (0, 2), (0, 2): (0, 0), (0, 1): (0, 3), (0, 3): (0, 1)})


def test_suspension_needs_valid_heights():
    with pytest.raises(SurfaceError):
        build_suspension(RATIONAL_H11_LENGTHS, tuple(-h for h in SUSPENSION_HEIGHTS))


def test_torus_summary():
    s = build_square_torus().summary()
    assert s["genus"] == 1
