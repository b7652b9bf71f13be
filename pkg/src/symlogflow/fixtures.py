"""Named exchanges, roofs and surfaces used by the experiments and tests."""

from __future__ import annotations

from fractions import Fraction

from .iet import Iet, golden_rotation, rotation
from .numeric import QuadraticNumber
from .roof import BvPart, LogRoof, genus2_roof
from .surface.model import FlatSurface, build_octagon, build_square_torus, build_suspension

__all__ = [
    "SQRT2_LENGTHS",
    "RATIONAL_H11_LENGTHS",
    "SUSPENSION_HEIGHTS",
    "IETS",
    "SURFACES",
    "iet_fixture",
    "surface_fixture",
    "symmetric_roof",
    "asymmetric_roof",
    "bv_roof",
    "roof_fixture",
]

_R2 = QuadraticNumber(0, 1, 2)

# a symmetric 5-interval exchange with lengths in Q(sqrt 2), total 1
SQRT2_LENGTHS = (
    _R2 / 10,
    QuadraticNumber(Fraction(1, 5)),
    Fraction(1, 4) - _R2 / 20,
    QuadraticNumber(Fraction(1, 5)),
    Fraction(7, 20) - _R2 / 20,
)
RATIONAL_H11_LENGTHS = tuple(Fraction(n, 20) for n in (2, 4, 5, 4, 5))
SUSPENSION_HEIGHTS = tuple(Fraction(n, 5) for n in (2, 1, 0, -1, -2))


def large_quotient_rotation() -> Iet:
    """Rotation by ``sqrt(226) - 15 = [0; 30, 30, ...]``."""
    return rotation(QuadraticNumber(-15, 1, 226))


IETS = {
    "golden": golden_rotation,
    "rot25": lambda: rotation(Fraction(2, 5)),
    "large_quotient": large_quotient_rotation,
    "d5_sqrt2": lambda: Iet(list(SQRT2_LENGTHS)),
    "h11_rational": lambda: Iet(list(RATIONAL_H11_LENGTHS)),
}

SURFACES = {
    "torus": build_square_torus,
    "octagon": build_octagon,
    "h11_sqrt2": lambda: build_suspension(SQRT2_LENGTHS, SUSPENSION_HEIGHTS, "h11_sqrt2"),
    "h11_rational": lambda: build_suspension(RATIONAL_H11_LENGTHS, SUSPENSION_HEIGHTS, "h11_rational"),
}


def iet_fixture(name: str) -> Iet:
    try:
        return IETS[name]()
    except KeyError:
        raise KeyError(f"unknown exchange fixture {name!r}; have {sorted(IETS)}") from None


def surface_fixture(name: str) -> FlatSurface:
    try:
        return SURFACES[name]()
    except KeyError:
        raise KeyError(f"unknown surface fixture {name!r}; have {sorted(SURFACES)}") from None


def symmetric_roof(T: Iet, C=1) -> LogRoof:
    return LogRoof(T, [(C, C)] * T.d)


def asymmetric_roof(T: Iet) -> LogRoof:
    """One-sided singularity at the left end of the first interval, lifted by 1."""
    return LogRoof(T, [(1, 0)] + [(0, 0)] * (T.d - 1), BvPart.constant(1.0, float(T.total)))


def bv_roof(T: Iet) -> LogRoof:
    """Symmetric strengths plus a piecewise-linear part with one jump."""
    L = float(T.total)
    bv = BvPart((0.0, L / 2, L), ((0.5, 1.0 / L), (0.25,)))
    return LogRoof(T, [(1, 1)] * T.d, bv)


def roof_fixture(T: Iet, spec) -> LogRoof:
    """``spec`` is a name (``symmetric``, ``asymmetric``, ``bv``), a mapping
    ``{"genus2": {"K": .., "i0": ..}}`` or a roof mapping for :meth:`LogRoof.from_spec`."""
    if isinstance(spec, str):
        if spec == "symmetric":
            return symmetric_roof(T)
        if spec == "asymmetric":
            return asymmetric_roof(T)
        if spec == "bv":
            return bv_roof(T)
        raise KeyError(f"unknown roof fixture {spec!r}")
    if "genus2" in spec:
        g = spec["genus2"]
        return genus2_roof(Fraction(str(g.get("K", 1))), int(g.get("i0", 0)), T)
    return LogRoof.from_spec(T, spec)
