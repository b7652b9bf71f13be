"""Counting large cylinders by direction and length, separation audits,
well-approximating cylinders, and the two series/covering checks used to
pass from counts to approximation statements."""

from __future__ import annotations

import bisect
import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath
import numpy as np

from ..numeric import QuadraticNumber
from .cylinders import CylinderRecord, cylinders_in_direction
from .model import FlatSurface
from .saddles import saddle_connections

__all__ = [
    "TWO_PI",
    "CountResult",
    "count_large_cylinders",
    "SeparationReport",
    "check_separation",
    "ApproximationSearch",
    "good_approximation_search",
    "khintchine_ratio",
    "fit_count_constant",
    "psi_log",
    "diverg_partial_sum",
    "divergence_witness",
    "CoveringStep",
    "covering_step_check",
    "torus_lattice_records",
    "write_cylinder_csv",
    "arc_length",
    "in_arc",
]

TWO_PI = 2 * math.pi


def arc_length(J) -> float:
    if J is None:
        return TWO_PI
    return float(J[1]) - float(J[0])


def in_arc(theta: float, J) -> bool:
    """theta in the closed arc J = (lo, hi), lo < hi, angles mod 2 pi."""
    if J is None:
        return True
    lo, hi = float(J[0]), float(J[1])
    if hi - lo >= TWO_PI:
        return True
    d = (theta - lo) % TWO_PI
    return d <= hi - lo


def _big_enough(area_fraction, eps) -> bool:
    e = Fraction(eps) if isinstance(eps, float) else eps
    return area_fraction >= 1 - e


@dataclass
class CountResult:
    T: float
    J: tuple | None
    eps: float
    count: int
    records: list
    incomplete: bool = False
    directions: int = 0

    @property
    def ratio(self) -> float:
        """``count / (T^2 lambda(J))``."""
        return self.count / (float(self.T) ** 2 * arc_length(self.J))


def _sector_for(J):
    if J is None or arc_length(J) >= math.pi - 1e-9:
        return None
    return (float(J[0]), float(J[1]))


def count_large_cylinders(S: FlatSurface, T, J=None, eps=0.4, budget: int | None = None) -> CountResult:
    """Cylinders with area fraction >= 1 - eps, core length <= T and
    direction in J, one record per orientation of the core curve.

    Candidate directions are those of the saddle connections of length <= T;
    each is decomposed once (both orientations share the work).
    """
    Tq = Fraction(T) if isinstance(T, (int, float)) else T
    conns = saddle_connections(S, Tq, sector=_sector_for(J))
    lim = Tq * Tq
    seen = set()
    records = []
    incomplete = False
    ndir = 0
    for sc in conns:
        key = _oriented_key(sc.holonomy)
        if key in seen:
            continue
        seen.add(key)
        if not in_arc(sc.theta, J):
            continue
        ndir += 1
        dec = cylinders_in_direction(S, sc.holonomy, **({} if budget is None else {"budget": budget}))
        incomplete = incomplete or dec.incomplete
        for c in dec.cylinders:
            if c.length_sq <= lim and _big_enough(c.area_fraction, eps) and in_arc(c.theta, J):
                records.append(c)
    uniq = {}
    for c in records:
        uniq.setdefault((c.holonomy, c.crossing), c)
    records = sorted(uniq.values(), key=lambda c: c.theta)
    return CountResult(float(T), J, eps, len(records), records, incomplete, ndir)


def _oriented_key(h):
    a, b = h
    if a != 0:
        r = b / a
        return ("x", r, a > 0)
    return ("y", 0, b > 0)


@dataclass
class SeparationReport:
    T: float
    eps: float
    count: int
    cap: float
    min_gap: float
    gap_bound: float
    gap_violations: list = field(default_factory=list)
    flow_violations: list = field(default_factory=list)
    flow_pairs_checked: int = 0

    @property
    def cap_ok(self) -> bool:
        return self.count <= self.cap

    @property
    def ok(self) -> bool:
        return self.cap_ok and not self.gap_violations and not self.flow_violations

    @property
    def violations(self) -> int:
        return len(self.gap_violations) + len(self.flow_violations) + (0 if self.cap_ok else 1)


def _angle(a: float, b: float) -> float:
    d = abs(a - b) % TWO_PI
    return min(d, TWO_PI - d)


def check_separation(records, T, eps, J=None, area=1) -> SeparationReport:
    """Audit a set of large cylinders (area fraction > 1/2, length <= T) on
    a surface of total ``area`` A.

    Lengths are in the surface's own units; rescaling to area 1 turns the
    unit-area statements into these:

    * consecutive directions differ by at least ``A (1 - eps)/T^2``;
    * there are at most ``2 T^2 lambda(J)/A + 1`` of them;
    * two cylinders that must intersect (area fractions summing past 1)
      have directions at least ``max(a, a')/(l l')`` apart, with a, a'
      absolute areas.
    """
    T = float(T)
    A = float(area)
    recs = sorted(records, key=lambda c: c.theta)
    th = [c.theta for c in recs]
    bound = A * (1 - float(eps)) / T**2
    rep = SeparationReport(T, float(eps), len(recs), 2 * T * T * arc_length(J) / A + 1, math.inf, bound)
    n = len(recs)
    full = J is None or arc_length(J) >= TWO_PI
    for i in range(n - 1 + (1 if full and n > 1 else 0)):
        j = (i + 1) % n
        g = _angle(th[i], th[j])
        rep.min_gap = min(rep.min_gap, g)
        if g < bound:
            rep.gap_violations.append((recs[i].holonomy, recs[j].holonomy, g))
    if not recs:
        return rep
    lmin = min(c.length for c in recs)
    ext = th + [t + TWO_PI for t in th] if full else th
    for i, c in enumerate(recs):
        window = A / (c.length * lmin)
        k = i + 1
        while k < len(ext) and ext[k] - th[i] < window and k - i < n:
            d = recs[k % n]
            k += 1
            if d is c or _parallel(c.holonomy, d.holonomy):
                continue
            if c.area_fraction + d.area_fraction <= 1:
                continue
            rep.flow_pairs_checked += 1
            need = A * max(float(c.area_fraction), float(d.area_fraction)) / (c.length * d.length)
            g = _angle(c.theta, d.theta)
            if g < need:
                rep.flow_violations.append((c.holonomy, d.holonomy, g, need))
    return rep


def _parallel(h, g) -> bool:
    return h[0] * g[1] - h[1] * g[0] == 0


def khintchine_ratio(count: int, T: float, J=None) -> float:
    return count / (float(T) ** 2 * arc_length(J))


def fit_count_constant(results) -> float:
    """Largest c (shaded by 1%) with ``c T^2 lambda(J) < N`` on every result."""
    return 0.99 * min(r.ratio for r in results)


def psi_log(t):
    """``1/(t^2 log t)``."""
    return 1 / (t * t * mpmath.log(t))


def diverg_partial_sum(sigma, K: int, direct: bool = False):
    """``sum_{k=1}^{K} sigma^(2k) psi(sigma^k)`` for ``psi = psi_log``.

    Each term equals ``1/(k log sigma)``, so the sum is ``H_K / log sigma``;
    ``direct=True`` adds the terms one by one instead.  The k = 0 term is
    left out since ``psi(1)`` is infinite.
    """
    sigma = mpmath.mpf(sigma)
    if direct:
        return mpmath.fsum(sigma ** (2 * k) * psi_log(sigma**k) for k in range(1, K + 1))
    return mpmath.harmonic(K) / mpmath.log(sigma)


def divergence_witness(sigma, M) -> tuple[int, object]:
    """Smallest K whose partial sum exceeds M, with that sum.

    K grows like ``exp(M log sigma - gamma)``; it is found from the
    asymptotic estimate and corrected with exact harmonic numbers at a
    precision wide enough to hold K.
    """
    sigma = mpmath.mpf(sigma)
    if sigma <= 1:
        raise ValueError("sigma must exceed 1")
    bits = int(float(M) * float(mpmath.log(sigma)) / math.log(2)) + 128
    with mpmath.workprec(bits):
        target = mpmath.mpf(M) * mpmath.log(sigma)
        K = int(mpmath.floor(mpmath.exp(target - mpmath.euler)))
        K = max(K, 1)
        h = lambda k: mpmath.harmonic(k)
        while h(K) <= target:
            K += 1
        while K > 1 and h(K - 1) > target:
            K -= 1
        return K, h(K) / mpmath.log(sigma)


def _union_measure(intervals, J) -> float:
    """Lebesgue measure of (union of arcs) intersected with J."""
    if not intervals:
        return 0.0
    if J is None or arc_length(J) >= TWO_PI:
        lo, hi = 0.0, TWO_PI
    else:
        lo, hi = float(J[0]), float(J[1])
    pieces = []
    for a, b in intervals:
        for shift in (-TWO_PI, 0.0, TWO_PI):
            x, y = max(a + shift, lo), min(b + shift, hi)
            if x < y:
                pieces.append((x, y))
    if not pieces:
        return 0.0
    arr = np.array(sorted(pieces))
    total = 0.0
    cs, ce = arr[0]
    for s, e in arr[1:]:
        if s > ce:
            total += ce - cs
            cs, ce = s, e
        elif e > ce:
            ce = e
    return total + (ce - cs)


def _difference_measure(new, old, J) -> float:
    """measure((U new minus U old) intersected with J) = m(new u old) - m(old)."""
    return _union_measure(list(new) + list(old), J) - _union_measure(list(old), J)


@dataclass
class CoveringStep:
    c: float
    sigma: float
    T: float
    L: float
    lam: float
    bc_at_sigma_L: bool
    preconditions: bool
    old_measure: float
    new_measure: float
    bound: float
    assumption: bool

    @property
    def ok(self) -> bool:
        """The implication holds (vacuously when its hypotheses fail)."""
        if not (self.preconditions and self.assumption):
            return True
        return self.new_measure > self.bound


def covering_step_check(records, c: float, T: float, L: float, J=None, psi=None) -> CoveringStep:
    """One step of the covering argument on concrete data.

    ``records`` are ``(theta, length)`` pairs (or :class:`CylinderRecord`)
    of large cylinders, complete up to length ``sigma L`` with
    ``sigma = 18/sqrt(c)``.  When ``T >= 36/(c lambda(J))``, ``L > T``,
    the count bound holds at ``sigma L`` and the balls of the lengths in
    ``[T, L]`` cover less than ``c/9`` of J, the balls of lengths in
    ``[L, sigma L]`` must add more than ``min((sigma L)^2 psi(sigma L), 1) c/4 lambda(J)``.
    """
    psi = psi or (lambda t: 1.0 / (t * t * math.log(t)))
    sigma = 18.0 / math.sqrt(c)
    lam = arc_length(J)
    sL = sigma * L
    pairs = [(r.theta, r.length) if isinstance(r, CylinderRecord) else (float(r[0]), float(r[1]))
             for r in records]
    pairs = [p for p in pairs if in_arc(p[0], J)]
    n_sigma = sum(1 for _, l in pairs if l <= sL)
    bc = c * sL * sL * lam < n_sigma
    n_T = sum(1 for _, l in pairs if l <= T)
    pre = T >= 36.0 / (c * lam) and L > T and bc and c * T * T * lam < n_T
    old = [(t - psi(l), t + psi(l)) for t, l in pairs if T <= l <= L]
    new = [(t - psi(l), t + psi(l)) for t, l in pairs if L <= l <= sL]
    m_old = _union_measure(old, J)
    m_new = _difference_measure(new, old, J)
    bound = min(sL * sL * psi(sL), 1.0) * c / 4 * lam
    return CoveringStep(c, sigma, T, L, lam, bc, pre, m_old, m_new, bound, m_old < c / 9 * lam)


def torus_lattice_records(T: float, J=None) -> list[tuple[float, float]]:
    """``(theta, length)`` of the primitive integer vectors of norm <= T."""
    n = int(math.floor(T))
    r = np.arange(-n, n + 1)
    P, Q = np.meshgrid(r, r, indexing="ij")
    P, Q = P.ravel(), Q.ravel()
    m = (P * P + Q * Q <= T * T) & (np.gcd(P, Q) == 1)
    P, Q = P[m], Q[m]
    th = np.mod(np.arctan2(Q, P), TWO_PI)
    ln = np.hypot(P, Q)
    out = list(zip(th.tolist(), ln.tolist()))
    return [p for p in out if in_arc(p[0], J)]


@dataclass
class ApproximationSearch:
    records: list
    searched_to: float
    sector: tuple
    incomplete: bool = False
    candidates: int = 0
    exhausted: bool = False


def good_approximation_search(S: FlatSurface, eps, l_min: float, budget: float, target: float = math.pi / 2,
                              max_records: int | None = None) -> ApproximationSearch:
    """Cylinders with area fraction >= 1 - eps, length >= l_min and
    ``|theta - target| < 1/(l^2 log l)``, in increasing length.

    ``budget`` is the largest core length searched.  Only directions
    within ``1/(l_min^2 log l_min)`` of the target can qualify, so the
    saddle-connection search is restricted to that sector.
    """
    if l_min <= 1:
        raise ValueError("l_min must exceed 1")
    w = 1.0 / (l_min**2 * math.log(l_min))
    sector = (target - w, target + w)
    conns = saddle_connections(S, Fraction(budget), sector=sector)
    found = {}
    incomplete = False
    seen = set()
    for sc in conns:
        key = _oriented_key(sc.holonomy)
        if key in seen:
            continue
        seen.add(key)
        dec = cylinders_in_direction(S, sc.holonomy)
        incomplete = incomplete or dec.incomplete
        for c in dec.cylinders:
            l = c.length
            if l < l_min or l > budget or not _big_enough(c.area_fraction, eps):
                continue
            if _angle(c.theta, target) < 1.0 / (l * l * math.log(l)):
                found.setdefault((c.holonomy, c.crossing), c)
    recs = sorted(found.values(), key=lambda c: (c.length, c.theta))
    exhausted = False
    if max_records is not None and len(recs) > max_records:
        recs = recs[:max_records]
        exhausted = True
    return ApproximationSearch(recs, float(budget), sector, incomplete, len(seen), exhausted)


def write_cylinder_csv(records, path) -> None:
    """Columns p, q, theta, length, area, width (exact fields as strings)."""
    cols = ["p", "q", "theta", "length", "length_sq", "area", "area_fraction", "width", "period"]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=cols)
        w.writeheader()
        for c in records:
            w.writerow(c.to_row())
