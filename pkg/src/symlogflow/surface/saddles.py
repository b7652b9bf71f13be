"""Saddle connections by unfolding triangles inside angular wedges.

From every corner the open sector between its two edges is pushed across
the opposite edge.  Each developed triangle either shows its third vertex
inside the current wedge (a saddle connection; the wedge splits in two)
or passes the whole wedge on through one of its edges.  A window is
dropped once the segment it sits on is farther than the length bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .model import FlatSurface, cross, dot

__all__ = ["SaddleConnection", "EnumerationBudgetError", "saddle_connections", "holonomies"]


class EnumerationBudgetError(RuntimeError):
    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial or []


@dataclass(frozen=True)
class SaddleConnection:
    holonomy: tuple
    start: int
    end: int
    corner: tuple

    @property
    def length_sq(self):
        return dot(self.holonomy, self.holonomy)

    @property
    def length(self) -> float:
        return math.sqrt(float(self.length_sq))

    @property
    def theta(self) -> float:
        return math.atan2(float(self.holonomy[1]), float(self.holonomy[0])) % (2 * math.pi)


def _far(P, Q, T2) -> bool:
    """Segment PQ lies entirely outside the closed disk of radius sqrt(T2)."""
    d = (Q[0] - P[0], Q[1] - P[1])
    dd = dot(d, d)
    s = -dot(P, d)
    if s <= 0:
        return dot(P, P) > T2
    if s >= dd:
        return dot(Q, Q) > T2
    c = cross(P, Q)
    return c * c > T2 * dd


def _inside(v, a, b) -> bool:
    return cross(a, v) > 0 and cross(v, b) > 0


def _meets(a1, a2, b1, b2) -> bool:
    """Open angular sectors (each narrower than pi) intersect."""
    if _inside(a1, b1, b2) or _inside(b1, a1, a2):
        return True
    return cross(a1, b1) == 0 and dot(a1, b1) > 0


def _enumerate(S: FlatSurface, T2, tris, offs, sector, budget):
    glue = S.glue
    cls = S.corner_class
    out = []
    nodes = 0
    nxt1 = (1, 2, 0)
    nxt2 = (2, 0, 1)
    # third vertex minus the entry edge's end, per (triangle, entry edge)
    step = {}
    for t2, tri2 in enumerate(tris):
        for k2 in range(3):
            a = tri2[(k2 + 1) % 3]
            b = tri2[(k2 + 2) % 3]
            step[(t2, k2)] = (b[0] - a[0], b[1] - a[1])
    for t in range(len(tris)):
        tri = tris[t]
        for k in range(3):
            V = tri[k]
            B = tri[(k + 1) % 3]
            C = tri[(k + 2) % 3]
            u = (B[0] - V[0], B[1] - V[1])
            w = (C[0] - V[0], C[1] - V[1])
            start = cls[(t, k)]
            if dot(u, u) <= T2 and (sector is None or
                                    (cross(sector[0], u) >= 0 and cross(u, sector[1]) >= 0)):
                out.append((u, start, cls[(t, (k + 1) % 3)], (t, k)))
            if sector is not None and not _meets(u, w, sector[0], sector[1]):
                continue
            stack = [(t, (k + 1) % 3, u[0], u[1], w[0], w[1], u[0], u[1], w[0], w[1])]
            pop = stack.pop
            push = stack.append
            while stack:
                ct, e, px, py, qx, qy, ax, ay, bx, by = pop()
                nodes += 1
                # drop windows whose segment misses the disk
                dx = qx - px
                dy = qy - py
                dd = dx * dx + dy * dy
                s0 = -(px * dx + py * dy)
                if s0 <= 0:
                    if px * px + py * py > T2:
                        continue
                elif s0 >= dd:
                    if qx * qx + qy * qy > T2:
                        continue
                else:
                    c = px * qy - py * qx
                    if c * c > T2 * dd:
                        continue
                t2, k2 = glue[(ct, e)]
                ox, oy = step[(t2, k2)]
                Dx = px + ox
                Dy = py + oy
                c1 = ax * Dy - ay * Dx
                c2 = Dx * by - Dy * bx
                e1 = nxt1[k2]
                e2 = nxt2[k2]
                if c1 > 0 and c2 > 0:
                    D = (Dx, Dy)
                    if Dx * Dx + Dy * Dy <= T2 and (sector is None or
                                                    (cross(sector[0], D) >= 0 and cross(D, sector[1]) >= 0)):
                        out.append((D, start, cls[(t2, e2)], (t, k)))
                    if sector is None or _meets((ax, ay), D, sector[0], sector[1]):
                        push((t2, e1, px, py, Dx, Dy, ax, ay, Dx, Dy))
                    if sector is None or _meets(D, (bx, by), sector[0], sector[1]):
                        push((t2, e2, Dx, Dy, qx, qy, Dx, Dy, bx, by))
                elif c1 <= 0:
                    push((t2, e2, Dx, Dy, qx, qy, ax, ay, bx, by))
                else:
                    push((t2, e1, px, py, Dx, Dy, ax, ay, bx, by))
            if nodes > budget:
                raise EnumerationBudgetError(f"more than {budget} developed triangles", out)
    return out, nodes


def saddle_connections(S: FlatSurface, max_len, sector=None, budget: int = 5 * 10**7) -> list[SaddleConnection]:
    """Every saddle connection of length <= max_len, once per orientation.

    ``sector=(theta_lo, theta_hi)`` (radians, width below pi) restricts the
    search to holonomies whose angle lies in the closed sector; the rays
    are rounded outward and the final filter uses the exact bounds in float.
    Raises :class:`EnumerationBudgetError` (carrying the partial list) when
    more than ``budget`` triangles would be developed.
    """
    ml = Fraction(max_len) if isinstance(max_len, (float, int)) else max_len
    key = (ml, None if sector is None else tuple(float(s) for s in sector))
    cache = S._cache.setdefault("saddles", {})
    if key in cache:
        return cache[key]
    if S.itriangles is not None:
        tris, offs, scale = S.itriangles, S.ioffset, S.scale
        T2 = ml * ml * scale * scale
    else:
        tris, offs, scale = S.triangles, S.offset, 1
        T2 = S.num(ml) * S.num(ml)
    rays = None
    if sector is not None:
        lo, hi = float(sector[0]), float(sector[1])
        if not 0 < hi - lo < math.pi:
            raise ValueError("sector must be narrower than pi")
        pad = 1e-9
        den = 2**40
        def ray(a):
            return (Fraction(round(math.cos(a) * den), den), Fraction(round(math.sin(a) * den), den))
        r_lo, r_hi = ray(lo - pad), ray(hi + pad)
        if S.itriangles is None:
            r_lo = (S.num(r_lo[0]), S.num(r_lo[1]))
            r_hi = (S.num(r_hi[0]), S.num(r_hi[1]))
        rays = (r_lo, r_hi)
    raw, nodes = _enumerate(S, T2, tris, offs, rays, budget)
    out = []
    for D, a, b, corner in raw:
        h = (Fraction(D[0], scale), Fraction(D[1], scale)) if S.itriangles is not None else D
        sc = SaddleConnection(h, a, b, corner)
        if sector is not None:
            th = sc.theta
            lo, hi = float(sector[0]) % (2 * math.pi), float(sector[1]) % (2 * math.pi)
            if not (_in_arc(th, lo, hi)):
                continue
        out.append(sc)
    out.sort(key=lambda s: (s.length_sq, s.theta))
    S._cache.setdefault("saddle_nodes", {})[key] = nodes
    cache[key] = out
    return out


def _in_arc(th, lo, hi) -> bool:
    if lo <= hi:
        return lo - 1e-15 <= th <= hi + 1e-15
    return th >= lo - 1e-15 or th <= hi + 1e-15


def holonomies(conns) -> list[tuple]:
    """Distinct holonomy vectors, sorted by length then angle."""
    seen = {}
    for s in conns:
        seen.setdefault(s.holonomy, s)
    return [s.holonomy for s in sorted(seen.values(), key=lambda s: (s.length_sq, s.theta))]
