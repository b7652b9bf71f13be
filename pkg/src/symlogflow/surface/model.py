"""Translation surfaces given by polygons glued along parallel edges.

Polygons are triangulated once; every triangle keeps the coordinate frame
of its polygon.  Rational surfaces also get an integer copy of all
coordinates (scaled by a common denominator) that the enumeration and
cylinder code run on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce

from ..numeric import QuadraticNumber, format_number, parse_number, sqrt_of

__all__ = [
    "SurfaceError",
    "PairingError",
    "AngleDefectError",
    "FlatSurface",
    "build_square_torus",
    "build_from_spec",
    "build_octagon",
    "build_suspension",
    "cross",
    "dot",
]


class SurfaceError(ValueError):
    pass


class PairingError(SurfaceError):
    pass


class AngleDefectError(SurfaceError):
    pass


def cross(u, v):
    return u[0] * v[1] - u[1] * v[0]


def dot(u, v):
    return u[0] * v[0] + u[1] * v[1]


def sub(u, v):
    return (u[0] - v[0], u[1] - v[1])


def add(u, v):
    return (u[0] + v[0], u[1] + v[1])


def _coerce_all(values):
    """Common exact type: Fraction for rationals, QuadraticNumber otherwise."""
    qs = [QuadraticNumber.coerce(parse_number(v) if isinstance(v, str) else v) for v in values]
    Ds = {q.D for q in qs if q.D is not None}
    if len(Ds) > 1:
        raise SurfaceError(f"coordinates mix fields {sorted(Ds)}")
    if not Ds:
        return [Fraction(int(q.a.numerator), int(q.a.denominator)) for q in qs], None
    return qs, Ds.pop()


def _triangulate(pts: list) -> list[tuple[int, int, int]]:
    """Ear clipping for a simple counter-clockwise polygon (exact predicates)."""
    idx = list(range(len(pts)))
    tris = []
    guard = 0
    while len(idx) > 3:
        n = len(idx)
        for k in range(n):
            i0, i1, i2 = idx[k - 1], idx[k], idx[(k + 1) % n]
            a, b, c = pts[i0], pts[i1], pts[i2]
            if cross(sub(b, a), sub(c, b)) <= 0:
                continue
            blocked = False
            for j in idx:
                if j in (i0, i1, i2):
                    continue
                p = pts[j]
                if (cross(sub(b, a), sub(p, a)) >= 0 and cross(sub(c, b), sub(p, b)) >= 0
                        and cross(sub(a, c), sub(p, c)) >= 0):
                    blocked = True
                    break
            if not blocked:
                tris.append((i0, i1, i2))
                del idx[k]
                break
        else:
            raise SurfaceError("polygon is not simple (no ear found)")
        guard += 1
    tris.append(tuple(idx))
    return tris


@dataclass
class FlatSurface:
    """Polygons (counter-clockwise vertex lists) and an edge pairing.

    ``pairing`` maps ``(polygon, edge)`` to its partner; edge ``i`` runs from
    vertex ``i`` to vertex ``i+1``.  Paired edges must be opposite vectors.
    """

    polygons: list
    pairing: dict
    name: str = ""
    D: int | None = None
    # derived
    triangles: list = field(default_factory=list, repr=False)
    tri_polygon: list = field(default_factory=list, repr=False)
    glue: dict = field(default_factory=dict, repr=False)
    offset: dict = field(default_factory=dict, repr=False)
    corner_class: dict = field(default_factory=dict, repr=False)
    angles: list = field(default_factory=list, repr=False)
    scale: int = 1
    itriangles: list | None = field(default=None, repr=False)
    ioffset: dict | None = field(default=None, repr=False)
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._validate_pairing()
        self._build_triangles()
        self._vertex_classes()
        self._integer_copy()

    # construction -------------------------------------------------------
    def _validate_pairing(self):
        edges = {(p, i) for p, poly in enumerate(self.polygons) for i in range(len(poly))}
        for p, poly in enumerate(self.polygons):
            if len(poly) < 3:
                raise SurfaceError(f"polygon {p} has fewer than three vertices")
            area2 = sum(cross(poly[i], poly[(i + 1) % len(poly)]) for i in range(len(poly)))
            if not area2 > 0:
                raise SurfaceError(f"polygon {p} is not counter-clockwise")
        if set(self.pairing) != edges:
            missing = sorted(edges - set(self.pairing))
            raise PairingError(f"unpaired edges {missing[:5]}")
        for e, f in self.pairing.items():
            if e == f:
                raise PairingError(f"edge {e} is paired with itself")
            if self.pairing.get(f) != e:
                raise PairingError(f"pairing is not an involution at {e}")
            ve, vf = self.edge_vector(*e), self.edge_vector(*f)
            if cross(ve, vf) != 0:
                raise PairingError(f"edges {e} and {f} are not parallel")
            if ve[0] != -vf[0] or ve[1] != -vf[1]:
                raise PairingError(f"edges {e} and {f} are not opposite translates")

    def edge_vector(self, p: int, i: int):
        poly = self.polygons[p]
        return sub(poly[(i + 1) % len(poly)], poly[i])

    def _build_triangles(self):
        owner = {}
        for p, poly in enumerate(self.polygons):
            for (i0, i1, i2) in _triangulate(poly):
                t = len(self.triangles)
                self.triangles.append((poly[i0], poly[i1], poly[i2]))
                self.tri_polygon.append((p, (i0, i1, i2)))
                for k, (u, w) in enumerate(((i0, i1), (i1, i2), (i2, i0))):
                    owner[(p, u, w)] = (t, k)
        n = {p: len(poly) for p, poly in enumerate(self.polygons)}
        for (p, u, w), (t, k) in owner.items():
            if (w - u) % n[p] == 1:
                q, j = self.pairing[(p, u)]
                m = n[q]
                self.glue[(t, k)] = owner[(q, j, (j + 1) % m)]
            else:
                self.glue[(t, k)] = owner[(p, w, u)]
        for (t, k), (t2, k2) in self.glue.items():
            A = self.triangles[t][k]
            B2 = self.triangles[t2][(k2 + 1) % 3]
            self.offset[(t, k)] = sub(B2, A)

    def _vertex_classes(self):
        parent = {}

        def find(c):
            while parent[c] != c:
                parent[c] = parent[parent[c]]
                c = parent[c]
            return c

        for t in range(len(self.triangles)):
            for k in range(3):
                parent[(t, k)] = (t, k)
        for (t, k), (t2, k2) in self.glue.items():
            a, b = find((t, k)), find((t2, (k2 + 1) % 3))
            if a != b:
                parent[a] = b
        roots = {}
        for c in parent:
            r = find(c)
            self.corner_class[c] = roots.setdefault(r, len(roots))
        angles = [0.0] * len(roots)
        for (t, k), cls in self.corner_class.items():
            tri = self.triangles[t]
            u = sub(tri[(k + 1) % 3], tri[k])
            v = sub(tri[(k + 2) % 3], tri[k])
            angles[cls] += math.atan2(float(cross(u, v)), float(dot(u, v)))
        for cls, a in enumerate(angles):
            m = a / (2 * math.pi)
            if abs(m - round(m)) > 1e-9 or round(m) < 1:
                raise AngleDefectError(f"vertex class {cls} has angle {a:.12g}, not a multiple of 2*pi")
        self.angles = [round(a / (2 * math.pi)) for a in angles]

    def _integer_copy(self):
        if self.D is not None:
            return
        dens = [v.denominator for tri in self.triangles for pt in tri for v in pt]
        s = reduce(math.lcm, dens, 1)
        self.scale = s
        self.itriangles = [tuple((int(x * s), int(y * s)) for x, y in tri) for tri in self.triangles]
        self.ioffset = {e: (int(o[0] * s), int(o[1] * s)) for e, o in self.offset.items()}

    # derived data -------------------------------------------------------
    @property
    def cone_orders(self) -> list[int]:
        """``k`` for each vertex class (angle ``2 pi (k + 1)``)."""
        return [m - 1 for m in self.angles]

    @property
    def stratum(self) -> tuple[int, ...]:
        return tuple(sorted(self.cone_orders, reverse=True))

    @property
    def genus(self) -> int:
        return sum(self.cone_orders) // 2 + 1

    @property
    def area(self):
        total = 0
        for poly in self.polygons:
            total = total + sum((cross(poly[i], poly[(i + 1) % len(poly)]) for i in range(len(poly))), 0)
        return total / 2

    @property
    def exact_kind(self) -> str:
        return "rational" if self.D is None else f"Q(sqrt({self.D}))"

    def num(self, v):
        """Coerce a scalar to the surface's number type."""
        if self.D is None:
            if isinstance(v, QuadraticNumber):
                if v.b:
                    raise SurfaceError("irrational value on a rational surface")
                v = v.a
            return Fraction(v) if not isinstance(v, str) else Fraction(str(parse_number(v)))
        return QuadraticNumber.coerce(parse_number(v) if isinstance(v, str) else v)

    def locate(self, polygon: int, point) -> list[int]:
        """Triangles of ``polygon`` containing ``point`` (closed)."""
        pt = (self.num(point[0]), self.num(point[1]))
        out = []
        for t, (p, _) in enumerate(self.tri_polygon):
            if p != polygon:
                continue
            a, b, c = self.triangles[t]
            if cross(sub(b, a), sub(pt, a)) >= 0 and cross(sub(c, b), sub(pt, b)) >= 0 and cross(sub(a, c), sub(pt, c)) >= 0:
                out.append(t)
        return out

    def to_spec(self) -> dict:
        pairs = []
        seen = set()
        for e, f in sorted(self.pairing.items()):
            if e in seen:
                continue
            seen.update((e, f))
            pairs.append([list(e), list(f)])
        fmt = (lambda v: str(v)) if self.D is None else format_number
        return {
            "name": self.name,
            "polygons": [[[fmt(x), fmt(y)] for x, y in poly] for poly in self.polygons],
            "pairing": pairs,
        }

    def summary(self) -> dict:
        return {"name": self.name, "stratum": list(self.stratum), "genus": self.genus,
                "area": str(self.area) if self.D is None else format_number(self.area),
                "vertex_classes": len(self.angles), "triangles": len(self.triangles)}


def build_from_spec(spec: dict) -> FlatSurface:
    """Surface from ``{"polygons": [[[x, y], ...], ...], "pairing": [[[p, i], [q, j]], ...]}``.

    Coordinates may be numbers or exact strings such as ``"1/2 + 1/2 * sqrt(2)"``.
    """
    flat = [c for poly in spec["polygons"] for pt in poly for c in pt]
    vals, D = _coerce_all(flat)
    it = iter(vals)
    polys = [[(next(it), next(it)) for _ in poly] for poly in spec["polygons"]]
    pairing = {}
    for (p, i), (q, j) in spec["pairing"]:
        for e, f in (((p, i), (q, j)), ((q, j), (p, i))):
            if e in pairing and pairing[e] != f:
                raise PairingError(f"edge {e} is paired twice")
            pairing[e] = f
    return FlatSurface(polys, pairing, spec.get("name", ""), D)


def build_square_torus() -> FlatSurface:
    """Unit square with opposite sides glued."""
    return build_from_spec({
        "name": "square torus",
        "polygons": [[[0, 0], [1, 0], [1, 1], [0, 1]]],
        "pairing": [[[0, 0], [0, 2]], [[0, 1], [0, 3]]],
    })


def build_octagon() -> FlatSurface:
    """Regular octagon of side 1 with opposite sides glued (coordinates in Q(sqrt 2))."""
    s = sqrt_of(2) / 2
    one, zero = QuadraticNumber(1), QuadraticNumber(0)
    pts = [(zero, zero), (one, zero), (1 + s, s), (1 + s, 1 + s),
           (one, 1 + 2 * s), (zero, 1 + 2 * s), (-s, 1 + s), (-s, s)]
    pairing = {}
    for i in range(8):
        pairing[(0, i)] = (0, (i + 4) % 8)
    return FlatSurface([pts], pairing, "regular octagon", 2)


def build_suspension(lengths, heights, name: str = "suspension") -> FlatSurface:
    """Polygon suspending a symmetric interval exchange.

    The upper boundary follows the vectors ``(lengths[i], heights[i])`` in
    order and the lower one follows them in reverse order, so the first
    return of the vertical flow to the bottom-left/right diagonal base is
    the symmetric exchange of ``lengths``.  Partial sums of ``heights``
    must be positive (and hence those of the reversed list negative).
    """
    d = len(lengths)
    vals, D = _coerce_all(list(lengths) + list(heights))
    lam, tau = vals[:d], vals[d:]
    if any(not l > 0 for l in lam):
        raise SurfaceError("lengths must be positive")
    if sum(tau, 0 * tau[0]) != 0:
        raise SurfaceError("heights must sum to zero")
    run = 0
    for k in range(d - 1):
        run = run + tau[k]
        if not run > 0:
            raise SurfaceError("partial sums of heights must be positive")
    zeta = list(zip(lam, tau))
    zero = vals[0] * 0
    pts = [(zero, zero)]
    for k in range(d - 1, 0, -1):
        pts.append(add(pts[-1], zeta[k]))
    end = add(pts[-1], zeta[0])
    pts.append(end)
    top = [end]
    for k in range(d - 1, 0, -1):
        top.append(sub(top[-1], zeta[k]))
    pts.extend(top[1:])
    # edges: bottom edge j carries zeta[d-1-j]; top edge d+j carries -zeta[d-1-j]
    pairing = {}
    for j in range(d):
        pairing[(0, j)] = (0, d + j)
        pairing[(0, d + j)] = (0, j)
    return FlatSurface([pts], pairing, name, D)
