"""Cylinder decomposition of the straight-line flow in a fixed direction.

The direction v is made vertical by the linear map ``(x, y) -> (q x - p y,
p x + q y)``.  The flow then moves each triangle's lower edges onto its
upper edges, so the map "enter triangle t at abscissa X" is a piecewise
translation on the union of the triangles' horizontal shadows.  A point
whose orbit under that map comes back to itself lies in a cylinder; the
cylinder's crossing of the shadow is the largest interval on which the
whole itinerary stays inside the same pieces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

from ..iet import Iet
from ..towers import RohlinTower
from ..numeric import QuadraticNumber, format_number
from .model import FlatSurface, cross, dot
from .trace import ClosedOrbit, trace_geodesic

__all__ = [
    "CylinderRecord",
    "Decomposition",
    "SectionMap",
    "cylinders_in_direction",
    "cylinder_by_tracing",
    "section_map",
    "first_return_iet",
    "separatrix_return_bound",
    "primitive_direction",
    "periodic_tower",
    "section_tower_areas",
]


def _exact_str(v) -> str:
    if isinstance(v, QuadraticNumber):
        return format_number(v)
    return str(v)


@dataclass(frozen=True)
class CylinderRecord:
    """A maximal cylinder; ``holonomy`` is its core curve, exact."""

    holonomy: tuple
    area: object
    area_fraction: object
    period: int
    crossing: tuple = field(default=(), compare=False)
    sample_point: tuple = field(default=(), compare=False)

    @property
    def length_sq(self):
        return dot(self.holonomy, self.holonomy)

    @property
    def length(self) -> float:
        return math.sqrt(float(self.length_sq))

    @property
    def theta(self) -> float:
        return math.atan2(float(self.holonomy[1]), float(self.holonomy[0])) % (2 * math.pi)

    @property
    def width(self) -> float:
        return float(self.area) / self.length

    def reversed(self) -> "CylinderRecord":
        h = (-self.holonomy[0], -self.holonomy[1])
        return CylinderRecord(h, self.area, self.area_fraction, self.period, self.crossing, self.sample_point)

    def to_row(self) -> dict:
        return {
            "p": _exact_str(self.holonomy[0]),
            "q": _exact_str(self.holonomy[1]),
            "theta": repr(self.theta),
            "length": repr(self.length),
            "length_sq": _exact_str(self.length_sq),
            "area": _exact_str(self.area),
            "area_fraction": _exact_str(self.area_fraction),
            "width": repr(self.width),
            "period": self.period,
        }


@dataclass
class Decomposition:
    direction: tuple
    cylinders: list
    incomplete: bool = False
    covered: object = 0
    unresolved: list = field(default_factory=list)
    orbit_steps: int = 0

    @property
    def total_area_fraction(self):
        return sum((c.area_fraction for c in self.cylinders), 0)

    @property
    def completely_periodic(self) -> bool:
        return not self.incomplete and self.total_area_fraction == 1


def primitive_direction(v) -> tuple[int, int]:
    """Smallest integer vector on the ray of a rational vector."""
    a, b = Fraction(v[0]), Fraction(v[1])
    m = math.lcm(a.denominator, b.denominator)
    p, q = int(a * m), int(b * m)
    g = math.gcd(p, q)
    if g == 0:
        raise ValueError("direction must be nonzero")
    return p // g, q // g


class SectionMap:
    """The piecewise translation "enter triangle t at abscissa X" for direction v.

    Rational surfaces use integer coordinates: ``X = 2(q x - p y)`` on the
    scaled integer copy, so vertices sit at even abscissae and every odd
    abscissa is a regular point.
    """

    def __init__(self, S: FlatSurface, v):
        self.S = S
        self.input = v
        if S.itriangles is not None and all(not isinstance(c, QuadraticNumber) or c.is_rational for c in v):
            p, q = primitive_direction(tuple(Fraction(str(c)) if isinstance(c, QuadraticNumber) else c for c in v))
            self.integer = True
            tris, offs = S.itriangles, S.ioffset
            self.xscale = 2 * S.scale
            self.pos_scale = S.scale
        else:
            p, q = S.num(v[0]), S.num(v[1])
            self.integer = False
            tris, offs = S.triangles, S.offset
            self.xscale = 1
            self.pos_scale = 1
        self.flipped = q < 0 or (q == 0 and p < 0)
        if self.flipped:
            p, q = -p, -q
        self.p, self.q = p, q
        two = 2 if self.integer else 1
        X = lambda P: two * (q * P[0] - p * P[1])
        Y = lambda P: p * P[0] + q * P[1]
        self.X, self.Y = X, Y
        self.tris, self.offs = tris, offs
        self.pieces = []
        self.shadow = []
        self.apex = []
        for t, tri in enumerate(tris):
            xs = [X(P) for P in tri]
            self.shadow.append((min(xs), max(xs)))
            pcs = []
            for k in range(3):
                k1 = (k + 1) % 3
                if xs[k1] < xs[k]:
                    t2, k2 = S.glue[(t, k)]
                    o = offs[(t, k)]
                    pcs.append((xs[k1], xs[k], t2, X(o), o, k))
            pcs.sort(key=lambda r: r[0])
            self.pieces.append(pcs)
            self.apex.append(pcs[0][1] if len(pcs) == 2 else None)

    def piece(self, t: int, x):
        pcs = self.pieces[t]
        if len(pcs) == 1:
            return pcs[0]
        if x < pcs[0][1]:
            return pcs[0]
        if x > pcs[0][1]:
            return pcs[1]
        return None

    def point_at(self, t: int, x):
        """A surface point (polygon coordinates) on the leaf entering t at x."""
        tri = self.tris[t]
        xs = [self.X(P) for P in tri]
        lows, highs = [], []
        for k in range(3):
            k1 = (k + 1) % 3
            A, B = tri[k], tri[k1]
            if xs[k] == xs[k1]:
                continue
            lo, hi = min(xs[k], xs[k1]), max(xs[k], xs[k1])
            if not lo <= x <= hi:
                continue
            s = (x - xs[k]) / (xs[k1] - xs[k])
            pt = (A[0] + s * (B[0] - A[0]), A[1] + s * (B[1] - A[1]))
            (lows if xs[k1] > xs[k] else highs).append(pt)
        a, b = lows[0], highs[0]
        m = ((a[0] + b[0]) / 2, (a[1] + b[1]) / 2)
        if self.integer:
            m = (Fraction(m[0]) / self.pos_scale, Fraction(m[1]) / self.pos_scale)
        return self.S.tri_polygon[t][0], m

    def leaf_span(self, t: int, x):
        """Flow-time (units of v) from the lower to the upper edge of t at x."""
        tri = self.tris[t]
        xs = [self.X(P) for P in tri]
        ys = [self.Y(P) for P in tri]
        lo_y = hi_y = None
        for k in range(3):
            k1 = (k + 1) % 3
            if xs[k] == xs[k1] or not (min(xs[k], xs[k1]) <= x <= max(xs[k], xs[k1])):
                continue
            y = ys[k] + (x - xs[k]) * (ys[k1] - ys[k]) / (xs[k1] - xs[k])
            if xs[k1] > xs[k]:
                lo_y = y if lo_y is None else lo_y
            else:
                hi_y = y if hi_y is None else hi_y
        vv = self.p * self.p + self.q * self.q
        return (hi_y - lo_y) / (vv * self.pos_scale)


def _remove(gaps: list, a, b):
    """Subtract (a, b) from a sorted list of disjoint open gaps."""
    out = []
    for lo, hi in gaps:
        if hi <= a or b <= lo:
            out.append((lo, hi))
            continue
        if lo < a:
            out.append((lo, a))
        if b < hi:
            out.append((b, hi))
    gaps[:] = out


def _orbit(M: SectionMap, t0: int, x0, budget: int):
    """Follow (t0, x0) until it returns; None when it hits a vertex or the budget."""
    t, x = t0, x0
    L = R = None
    hx = hy = 0
    steps = []
    while True:
        pc = M.piece(t, x)
        if pc is None:
            return "singular"
        lo, hi, t2, dX, o, _ = pc
        a, b = lo - x, hi - x
        if L is None or a > L:
            L = a
        if R is None or b < R:
            R = b
        steps.append((t, x))
        hx = hx + o[0]
        hy = hy + o[1]
        t, x = t2, x + dX
        if t == t0 and x == x0:
            return steps, L, R, (-hx, -hy)
        if len(steps) >= budget:
            return "budget"


def cylinders_in_direction(S: FlatSurface, v, budget: int | None = None) -> Decomposition:
    """Maximal cylinders whose core is parallel to v.

    Every part of the section is either covered by a cylinder or reported
    in ``unresolved`` (an orbit that did not close within ``budget`` steps),
    in which case ``incomplete`` is set.  Holonomies are oriented along v.
    """
    key = ("cyl", _dir_key(S, v))
    if key in S._cache:
        dec = S._cache[key]
        return _orient(dec, v)
    M = SectionMap(S, v)
    if budget is None:
        budget = 10**6 if M.integer else 4000
    gaps = {t: [sh] for t, sh in enumerate(M.shadow) if sh[0] < sh[1]}
    cyls = []
    unresolved = []
    total_steps = 0
    area = S.area
    for t in range(len(M.tris)):
        while gaps.get(t):
            a, b = gaps[t][0]
            res = None
            if M.integer:
                res = _orbit(M, t, a + 1, budget)
            else:
                for j in (2, 3, 5, 7, 11, 13):
                    res = _orbit(M, t, a + (b - a) / j, budget)
                    if res != "singular":
                        break
            if isinstance(res, str):
                gaps[t].pop(0)
                unresolved.append((t, a, b, res))
                total_steps += budget if res == "budget" else 0
                continue
            steps, L, R, hol = res
            total_steps += len(steps)
            W = R - L
            for (tj, xj) in steps:
                _remove(gaps[tj], xj + L, xj + R)
            if M.integer:
                h = (Fraction(hol[0], S.scale), Fraction(hol[1], S.scale))
                s = Fraction(hol[1], S.scale * M.q) if M.q != 0 else Fraction(hol[0], S.scale * M.p)
            else:
                h = hol
                s = hol[1] / M.q if M.q != 0 else hol[0] / M.p
            cyl_area = W * s / M.xscale
            t0, x0 = steps[0]
            mid = x0 + (Fraction(L + R, 2) if M.integer else (L + R) / 2)
            cyls.append(CylinderRecord(
                holonomy=h,
                area=cyl_area,
                area_fraction=cyl_area / area,
                period=len(steps),
                crossing=(t0, x0 + L, x0 + R),
                sample_point=M.point_at(t0, mid),
            ))
    cyls.sort(key=lambda c: (c.length_sq, -float(c.area)))
    dec = Decomposition(direction=(M.p, M.q), cylinders=cyls, incomplete=bool(unresolved),
                        covered=sum((c.area for c in cyls), 0 * area), unresolved=unresolved,
                        orbit_steps=total_steps)
    S._cache[key] = dec
    return _orient(dec, v)


def _dir_key(S: FlatSurface, v):
    if S.itriangles is not None:
        try:
            p, q = primitive_direction(tuple(Fraction(str(c)) if isinstance(c, QuadraticNumber) else c for c in v))
        except (ValueError, TypeError):
            pass
        else:
            if q < 0 or (q == 0 and p < 0):
                p, q = -p, -q
            return (p, q)
    a, b = S.num(v[0]), S.num(v[1])
    if b < 0 or (b == 0 and a < 0):
        a, b = -a, -b
    # normalise the ray by its first nonzero coordinate
    return (1, b / a) if a != 0 else (0, 1)


def _orient(dec: Decomposition, v) -> Decomposition:
    """Copy with holonomies pointing along v."""
    cyls = []
    for c in dec.cylinders:
        h = c.holonomy
        cyls.append(c if h[0] * v[0] + h[1] * v[1] > 0 else c.reversed())
    return Decomposition(dec.direction, cyls, dec.incomplete, dec.covered, dec.unresolved, dec.orbit_steps)


def cylinder_by_tracing(S: FlatSurface, point, v, polygon: int = 0, max_len=10**6):
    """Length and area of the cylinder through ``point`` in direction v,
    from a single traced closed leaf.

    The cylinder extends from the leaf to the nearest vertex on each side
    among the triangles the leaf crosses, so ``area = (d_left + d_right) * t``
    with d measured as ``cross(v, vertex - entry)`` and t the closing
    parameter.  Returns ``(length_sq, area)`` or None for a non-closed leaf.
    """
    v = (S.num(v[0]), S.num(v[1]))
    ev, crossings = trace_geodesic(S, point, v, max_len, polygon=polygon, record=True)
    if not isinstance(ev, ClosedOrbit):
        return None
    left = right = None
    for c in crossings:
        for X in S.triangles[c.triangle]:
            d = cross(v, (X[0] - c.p[0], X[1] - c.p[1]))
            if d > 0 and (left is None or d < left):
                left = d
            elif d < 0 and (right is None or -d < right):
                right = -d
    return ev.length_sq, (left + right) * ev.t


@dataclass
class SectionIet:
    """First-return map of the section, normalised to total length 1."""

    iet: Iet
    section: SectionMap
    starts: list
    total: object

    def locate(self, z):
        """Triangle and abscissa of a section coordinate z."""
        zs = z * self.total
        t = 0
        for t, (base, sh) in enumerate(self.starts):
            if base is None:
                continue
            if base <= zs < base + (sh[1] - sh[0]):
                return t, zs - base + sh[0]
        raise ValueError("point outside the section")

    def coordinate(self, t: int, x):
        """Section coordinate in [0, 1) of abscissa x in triangle t."""
        base, sh = self.starts[t]
        if isinstance(self.total, int):
            return Fraction(base + x - sh[0]) / self.total
        return (base + x - sh[0]) / self.total

    def return_time(self, z):
        t, x = self.locate(z)
        return self.section.leaf_span(t, x)

    def area_of_tower(self, tower):
        """Base length times the return time summed over the floors (area units)."""
        m = (tower.a + tower.b) / 2
        tau = 0
        for y in self.iet.orbit(m, tower.h):
            tau = tau + self.return_time(y)
        base = tower.length * self.total
        return base * tau / self.section.xscale


section_map = SectionMap


def first_return_iet(S: FlatSurface, v) -> SectionIet:
    """The section map of direction v as an :class:`Iet` on ``[0, 1)``.

    The shadows are laid end to end in triangle order.
    """
    M = SectionMap(S, v)
    starts = []
    base = 0
    for t, sh in enumerate(M.shadow):
        if sh[0] < sh[1]:
            starts.append((base, sh))
            base = base + (sh[1] - sh[0])
        else:
            starts.append((None, sh))
    total = base
    dom = []
    for t, pcs in enumerate(M.pieces):
        b0, sh = starts[t]
        if b0 is None:
            continue
        for lo, hi, t2, dX, _, _ in pcs:
            b2, sh2 = starts[t2]
            dom.append((b0 + lo - sh[0], hi - lo, b2 + lo + dX - sh2[0]))
    dom.sort(key=lambda r: r[0])
    order = sorted(range(len(dom)), key=lambda i: dom[i][2])
    images = [0] * len(dom)
    for rank, i in enumerate(order):
        images[i] = rank
    conv = (lambda w: Fraction(w) / Fraction(total)) if M.integer else (lambda w: w / total)
    T = Iet([conv(w) for _, w, _ in dom], images, max_total=None)
    return SectionIet(T, M, starts, total)


def periodic_tower(sec: SectionIet, z, max_period: int = 10**4) -> RohlinTower | None:
    """Tower of the section map through a periodic point z: height is the
    period, base the continuity interval of z for that many steps.  None
    when z does not return within ``max_period`` steps."""
    T = sec.iet
    y = z
    for p in range(1, max_period + 1):
        y = T.apply(y)
        if y == z:
            a, b = T.continuity_interval(z, p)
            return RohlinTower(a, b, p, 0, z, T.total)
    return None


def section_tower_areas(sec: SectionIet, samples: int = 30, seed: int = 0, max_period: int = 10**4) -> dict:
    """Areas of the periodic towers met by sampled section points, keyed by
    area with the tower height as value.  Aperiodic samples are skipped."""
    out = {}
    for z in sec.iet.sample_points(samples, seed):
        tw = periodic_tower(sec, z, max_period)
        if tw is not None:
            out.setdefault(sec.area_of_tower(tw), tw.h)
    return out


def separatrix_return_bound(S: FlatSurface, v) -> float:
    """Longest flow time (as a length) from a vertex to the section along
    a separatrix, forward or backward, for direction v.

    The section is the union of the triangles' lower edges, so each
    separatrix meets it again after crossing a single triangle.
    """
    M = SectionMap(S, v)
    best = 0.0
    norm = math.sqrt(float(M.p * M.p + M.q * M.q))
    for t, tri in enumerate(M.tris):
        xs = [M.X(P) for P in tri]
        lo, hi = M.shadow[t]
        for k, P in enumerate(tri):
            if lo < xs[k] < hi:
                span = M.leaf_span(t, xs[k])
                best = max(best, float(span) * norm)
            elif xs[k] in (lo, hi):
                # an edge parallel to v: the separatrix runs along it
                for j in range(3):
                    if j != k and xs[j] == xs[k]:
                        d = (tri[j][0] - P[0], tri[j][1] - P[1])
                        best = max(best, math.sqrt(float(dot(d, d))) / M.pos_scale)
    return best
