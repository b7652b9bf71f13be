"""Rohlin towers by intervals: discovery from near returns, rigidity flags,
trimming and centralizing constants."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction

import mpmath

from .iet import DiscontinuityHit, Iet
from .numeric import QuadraticNumber, format_number

__all__ = [
    "DegenerateTower",
    "EmptyBase",
    "TowerInvariantError",
    "RohlinTower",
    "RigidityScan",
    "near_returns",
    "tower_at",
    "good_rigidity_scan",
    "trim_tower",
    "centralizing_constant",
]

_MP = mpmath.MPContext()
_MP.prec = 256


class DegenerateTower(ValueError):
    """The maximal base has zero length."""


class EmptyBase(ValueError):
    pass


class TowerInvariantError(AssertionError):
    pass


def _mp(v):
    if isinstance(v, QuadraticNumber):
        return v.to_mpf(256, _MP)
    return _MP.mpf(v)


def _text(v) -> str:
    if isinstance(v, QuadraticNumber):
        return format_number(v)
    return mpmath.nstr(v, 40)


@dataclass(frozen=True)
class RohlinTower:
    """Floors ``T^i (a, b)`` for ``0 <= i < h``.

    ``a0, b0`` is the base the tower was built with; trimming moves ``a, b``
    but keeps ``q`` and ``eps`` attached to the original base.
    """

    a: object
    b: object
    h: int
    delta: object
    x0: object
    total: object
    a0: object = None
    b0: object = None
    margin: object = 0
    eps_target: float = 0.05

    def __post_init__(self):
        if self.a0 is None:
            object.__setattr__(self, "a0", self.a)
            object.__setattr__(self, "b0", self.b)

    @property
    def length(self):
        return self.b - self.a

    @property
    def q(self):
        return 1 / _mp(self.b0 - self.a0)

    @property
    def eps(self):
        q = self.q
        if q <= 1:
            return _MP.inf
        return 1 / (q * _MP.log(q))

    @property
    def measure(self):
        return self.h * self.length

    @property
    def gr2_ratio(self) -> float:
        q = self.q
        if q <= 1:
            return 0.0 if self.delta == 0 else math.inf
        return float(abs(_mp(self.delta)) * q * _MP.log(q))

    @property
    def gr2(self) -> bool:
        return abs(_mp(self.delta)) <= self.eps

    @property
    def gr1(self) -> bool:
        return _mp(self.measure) >= _mp(self.total) * (1 - _MP.mpf(self.eps_target))

    @property
    def good(self) -> bool:
        return self.gr1 and self.gr2

    @property
    def c(self) -> float:
        """Largest c with ``x0`` in ``[a + 2c/q, b - 2c/q]`` (capped below 1/2)."""
        room = min(_mp(self.x0 - self.a), _mp(self.b - self.x0))
        if room <= 0:
            return 0.0
        return float(min(room * self.q / 2, _MP.mpf(0.5)))

    def contains(self, x) -> bool:
        return self.a < x < self.b

    def location_constant(self, x) -> float:
        """``min(x - a0, b0 - x) * q``: how deep x sits in the untrimmed base."""
        room = min(_mp(x - self.a0), _mp(self.b0 - x))
        return float(room * self.q)

    def verify(self, T: Iet, probes: int = 20) -> None:
        """Re-check disjoint floors, continuity on the base and a constant
        return displacement; raises :class:`TowerInvariantError`."""
        if not self.a < self.b:
            raise TowerInvariantError("empty base")
        mid = (self.a + self.b) / 2
        try:
            lo, hi = T.continuity_interval(mid, self.h)
            pts = T.orbit(mid, self.h)
        except DiscontinuityHit as e:
            raise TowerInvariantError(f"base midpoint hits a discontinuity: {e}") from e
        if not (lo <= self.a and self.b <= hi):
            raise TowerInvariantError("base is not a continuity interval")
        offsets = sorted(p - mid for p in pts)
        slack = 2 * self.h * T.step_error if T.step_error else 0
        for u, v in zip(offsets, offsets[1:]):
            if v - u < self.length - slack:
                raise TowerInvariantError("floors overlap")
        if not (self.a + offsets[0] >= -slack and self.b + offsets[-1] <= T.total + slack):
            raise TowerInvariantError("floors leave the interval")
        tol = self.h * T.step_error * 2 if T.step_error else 0
        for k in range(1, probes + 1):
            y = self.a + self.length * Fraction(k, probes + 1) if T.is_exact else \
                self.a + self.length * T.number(Fraction(k, probes + 1))
            if abs(T.iterate(y, self.h) - y - self.delta) > tol:
                raise TowerInvariantError(f"displacement is not constant at probe {k}")

    def to_dict(self) -> dict:
        return {
            "a": _text(self.a),
            "b": _text(self.b),
            "height": self.h,
            "displacement": _text(self.delta),
            "x0": _text(self.x0),
            "q": float(self.q),
            "eps": float(self.eps),
            "measure": float(_mp(self.measure)),
            "gr1": bool(self.gr1),
            "gr2": bool(self.gr2),
            "gr2_ratio": self.gr2_ratio,
            "c": self.c,
            "margin": _text(self.margin) if self.margin else "0",
            "eps_target": self.eps_target,
        }


def near_returns(T: Iet, x0, h_max: int) -> list[tuple[int, object]]:
    """Heights h <= h_max where ``|T^h x0 - x0|`` sets a new strict record low.

    Returns ``(h, |T^h x0 - x0|)`` pairs with strictly decreasing displacements.
    """
    if h_max < 1:
        raise ValueError("h_max must be >= 1")
    x0 = T.number(x0)
    pts = T.orbit(x0, h_max + 1)
    out = []
    best = None
    for h in range(1, h_max + 1):
        d = abs(pts[h] - x0)
        if best is None or d < best:
            best = d
            out.append((h, d))
            if d == 0:
                break
    return out


def tower_at(T: Iet, x0, h: int, eps_target: float = 0.05) -> RohlinTower:
    """Largest tower of height h whose base is a sub-interval of the
    continuity interval of ``T^0..T^{h-1}`` around x0.

    The base length is the smaller of the continuity length and the minimal
    gap between the translations ``T^i x0 - x0``; the base is centred on x0
    and pushed back inside the continuity interval when needed.
    """
    if h < 1:
        raise ValueError("h must be >= 1")
    x0 = T.number(x0)
    a0, b0 = T.continuity_interval(x0, h)
    pts = T.orbit(x0, h + 1)
    offsets = sorted(p - x0 for p in pts[:h])
    L = b0 - a0
    for u, v in zip(offsets, offsets[1:]):
        if v - u < L:
            L = v - u
    if T.step_error:
        L = L - 4 * h * T.step_error
    if not L > 0:
        raise DegenerateTower(f"no base of positive length at height {h}")
    a = x0 - L / 2
    b = x0 + L / 2
    if a < a0:
        a, b = a0, a0 + L
    elif b > b0:
        a, b = b0 - L, b0
    return RohlinTower(a, b, h, pts[h] - x0, x0, T.total, eps_target=eps_target)


@dataclass
class RigidityScan:
    """Outcome of :func:`good_rigidity_scan`; iterates over the passing towers."""

    towers: list = field(default_factory=list)
    candidates: list = field(default_factory=list)
    near_misses: list = field(default_factory=list)
    degenerate: list = field(default_factory=list)

    def __iter__(self):
        return iter(self.towers)

    def __len__(self):
        return len(self.towers)

    def __getitem__(self, k):
        return self.towers[k]

    @property
    def heights(self) -> list[int]:
        return [t.h for t in self.towers]

    @property
    def candidate_heights(self) -> list[int]:
        return [t.h for t in self.candidates]


def good_rigidity_scan(T: Iet, x0=None, h_max: int = 10**4, eps_target: float = 0.05) -> RigidityScan:
    """Towers at the near-return heights of x0, split by the (GR1)/(GR2) flags.

    Failing candidates are kept in ``near_misses`` ordered by how far they
    are from passing.
    """
    x0 = T.midpoint() if x0 is None else T.number(x0)
    scan = RigidityScan()
    for h, _ in near_returns(T, x0, h_max):
        try:
            tw = tower_at(T, x0, h, eps_target)
        except DegenerateTower:
            scan.degenerate.append(h)
            continue
        scan.candidates.append(tw)
        (scan.towers if tw.good else scan.near_misses).append(tw)

    def badness(t):
        gap = 1 - float(_mp(t.measure) / _mp(t.total))
        return max(t.gr2_ratio - 1, 0.0) + max(gap - eps_target, 0.0)

    scan.near_misses.sort(key=badness)
    return scan


def _round_up(m, T: Iet):
    if not T.is_exact:
        # nudge up by a few ulps so rounding to the backend never lands below m
        prec = getattr(T.backend, "prec", 53)
        return T.number(_mp(m) * (1 + _MP.ldexp(1, 4 - prec)))
    if isinstance(m, (int, Fraction, QuadraticNumber)):
        return QuadraticNumber.coerce(m)
    mf = _mp(m)
    return QuadraticNumber(Fraction(int(_MP.ceil(mf * 2**96)), 2**96))


def trim_tower(tower: RohlinTower, margin, T: Iet | None = None) -> RohlinTower:
    """Shrink the base by ``margin`` on both sides, same height.

    Transcendental margins (such as ``2 * eps``) are rounded up to a dyadic
    rational on exact backends.  Passing T re-verifies the tower.
    """
    if margin == 0:
        return tower
    if T is not None:
        m = _round_up(margin, T)
    elif isinstance(tower.a, QuadraticNumber):
        m = QuadraticNumber(Fraction(int(_MP.ceil(_mp(margin) * 2**96)), 2**96)) \
            if not isinstance(margin, (int, Fraction, QuadraticNumber)) else QuadraticNumber.coerce(margin)
    else:
        m = margin
    if not tower.length > 2 * m:
        raise EmptyBase("margin leaves an empty base")
    out = replace(tower, a=tower.a + m, b=tower.b - m, margin=tower.margin + m)
    if T is not None:
        out.verify(T)
    return out


def centralizing_constant(tower: RohlinTower, T: Iet, f) -> object:
    """``S_h(f)`` at the midpoint of the base, summed in ``mpf``."""
    y = (tower.a + tower.b) / 2
    total = f._ctx.mpf(0)
    for k, p in enumerate(T.orbit(y, tower.h)):
        try:
            total += f.eval(p)
        except ArithmeticError as e:
            if hasattr(e, "step"):
                e.step = k
            raise
    return total
