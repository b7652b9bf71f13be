"""Exact straight-line flow on a triangulated translation surface."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .model import FlatSurface, cross, dot, sub, add

__all__ = [
    "GeodesicEvent",
    "ClosedOrbit",
    "HitConePoint",
    "LengthExceeded",
    "trace_geodesic",
    "corner_containing",
    "Crossing",
]


@dataclass(frozen=True)
class GeodesicEvent:
    """``t`` is the exact flow parameter: the path is ``start + t*v``."""

    t: object
    length_sq: object
    crossings: int

    @property
    def length(self) -> float:
        return math.sqrt(float(self.length_sq))


@dataclass(frozen=True)
class ClosedOrbit(GeodesicEvent):
    pass


@dataclass(frozen=True)
class HitConePoint(GeodesicEvent):
    vertex_class: int = -1


@dataclass(frozen=True)
class LengthExceeded(GeodesicEvent):
    pass


@dataclass(frozen=True)
class Crossing:
    """One triangle traversed: entry point ``p`` (triangle frame) and exit parameter."""

    triangle: int
    p: tuple
    t0: object
    t1: object


def corner_containing(S: FlatSurface, t: int, k: int, v):
    """Walk counter-clockwise around the vertex of corner ``(t, k)`` until the
    half-open sector ``[first edge, second edge)`` contains v."""
    n = sum(1 for c in S.corner_class if S.corner_class[c] == S.corner_class[(t, k)])
    for _ in range(n):
        tri = S.triangles[t]
        V = tri[k]
        u = sub(tri[(k + 1) % 3], V)
        w = sub(tri[(k + 2) % 3], V)
        cu = cross(u, v)
        if (cu > 0 or (cu == 0 and dot(u, v) > 0)) and cross(v, w) > 0:
            return t, k
        t, k = S.glue[(t, (k + 2) % 3)]
    raise ValueError("direction not found around vertex")


def _start_states(S: FlatSurface, polygon: int, point, v):
    pt = (S.num(point[0]), S.num(point[1]))
    tris = S.locate(polygon, pt)
    if not tris:
        raise ValueError(f"point {point} is not in polygon {polygon}")
    for t in tris:
        for k, X in enumerate(S.triangles[t]):
            if X == pt:
                return ("vertex", corner_containing(S, t, k, v), pt)
    # copies of the start point: every triangle containing it, in its own frame
    copies = {t: pt for t in tris}
    for t in tris:
        tri = S.triangles[t]
        for k in range(3):
            A, B = tri[k], tri[(k + 1) % 3]
            if cross(sub(B, A), sub(pt, A)) == 0:
                t2, _ = S.glue[(t, k)]
                copies.setdefault(t2, add(pt, S.offset[(t, k)]))
    # the triangle the ray enters
    for t in tris:
        tri = S.triangles[t]
        ok = True
        for k in range(3):
            A, B = tri[k], tri[(k + 1) % 3]
            e = sub(B, A)
            if cross(e, sub(pt, A)) == 0 and cross(e, v) < 0:
                ok = False
        if ok:
            return ("point", t, pt, copies)
    raise ValueError("no triangle admits the direction")


def trace_geodesic(S: FlatSurface, start, v, max_len, polygon: int = 0, record: bool = False):
    """Flow from ``start`` (coordinates in ``polygon``) in direction v.

    Returns :class:`ClosedOrbit` when the path comes back to the start point,
    :class:`HitConePoint` when it reaches a vertex, else
    :class:`LengthExceeded` once the length passes ``max_len``.  With
    ``record=True`` a list of :class:`Crossing` is returned alongside.
    """
    v = (S.num(v[0]), S.num(v[1]))
    if v[0] == 0 and v[1] == 0:
        raise ValueError("direction must be nonzero")
    vv = dot(v, v)
    lim = S.num(Fraction(max_len) if isinstance(max_len, float) else max_len)
    lim_sq = lim * lim
    state = _start_states(S, polygon, start, v)
    zero = vv * 0
    if state[0] == "vertex":
        (t, k), p = state[1], state[2]
        p = S.triangles[t][k]
        copies = {}
    else:
        _, t, p, copies = state
    total = zero
    crossings = []
    n = 0
    while True:
        tri = S.triangles[t]
        sides = [cross(v, sub(X, p)) for X in tri]
        hit = None
        for i, X in enumerate(tri):
            if sides[i] == 0 and X != p and dot(v, sub(X, p)) > 0:
                hit = (i, dot(v, sub(X, p)) / vv)
                break
        if hit is None:
            for i in range(3):
                j = (i + 1) % 3
                if sides[i] < 0 < sides[j]:
                    A, B = tri[i], tri[j]
                    e = sub(B, A)
                    step = cross(e, sub(A, p)) / cross(e, v)
                    break
            else:
                raise ArithmeticError("no exit edge found")
        else:
            step = hit[1]
        # closing check before leaving the triangle
        if t in copies:
            c = copies[t]
            d = sub(c, p)
            if cross(v, d) == 0:
                s = dot(v, d) / vv
                if (s > 0 or (s == 0 and n > 0)) and s <= step:
                    T = total + s
                    if T > 0:
                        if T * T * vv > lim_sq:
                            break
                        if record:
                            crossings.append(Crossing(t, p, total, T))
                        ev = ClosedOrbit(T, T * T * vv, n)
                        return (ev, crossings) if record else ev
        nxt = total + step
        if nxt * nxt * vv > lim_sq:
            break
        if record:
            crossings.append(Crossing(t, p, total, nxt))
        if hit is not None:
            ev = HitConePoint(nxt, nxt * nxt * vv, n, S.corner_class[(t, hit[0])])
            return (ev, crossings) if record else ev
        E = (p[0] + step * v[0], p[1] + step * v[1])
        t, p = S.glue[(t, i)][0], add(E, S.offset[(t, i)])
        total = nxt
        n += 1
    ev = LengthExceeded(total, total * total * vv, n)
    return (ev, crossings) if record else ev
