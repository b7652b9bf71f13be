"""Tail statistics of centred Birkhoff sums over Rohlin towers and the
pointwise bounds that feed them.

Orbits over a tower are run in float64 (vectorised over base points) with
a running bound on position error; samples whose interval assignment
cannot be certified are excluded and their mass is counted as a tail event.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import mpmath
import numpy as np
from scipy import stats

from .birkhoff import find_derivative_zero
from .iet import Iet
from .roof import LogRoof
from .towers import RohlinTower, _mp, centralizing_constant

__all__ = [
    "TowerNotTrimmed",
    "SamplingDegenerate",
    "HypothesisViolation",
    "TailReport",
    "tail_histogram",
    "Ad0Report",
    "lemma_ad0_check",
    "log_pair_level_measure",
    "Ad1Report",
    "lemma_ad1_check",
    "BvReport",
    "bv_control_check",
    "TightnessSummary",
    "tightness_report",
    "tower_deviations",
    "location_of_zero",
]

U = 2.0 ** -53
PI2_6 = math.pi ** 2 / 6


class TowerNotTrimmed(ValueError):
    pass


class SamplingDegenerate(ValueError):
    pass


class HypothesisViolation(ValueError):
    def __init__(self, message: str, witness=None):
        super().__init__(message)
        self.witness = witness


# float64 orbit machinery ----------------------------------------------------

@dataclass
class _Orbits:
    xs: np.ndarray          # (M, n) positions
    err: np.ndarray         # (n,) absolute position error bound per step
    uncertain: np.ndarray   # (M,) some step landed too close to an endpoint


def _base_grid(a, b, M: int) -> tuple[np.ndarray, float]:
    """Midpoint grid of M points in (a, b) and the base length, via mpf."""
    am, bm = _mp(a), _mp(b)
    L = bm - am
    ys = np.array([float(am + L * (j + mpmath.mpf(0.5)) / M) for j in range(M)])
    return ys, float(L)


def _run_orbits(T: Iet, starts: np.ndarray, n: int) -> _Orbits:
    betas, shifts, _, _ = T.float64_tables()
    inner = betas[1:-1]
    M = len(starts)
    xs = np.empty((M, n))
    scale = max(1.0, float(betas[-1]))
    # endpoints and shifts are themselves rounded once
    err = np.empty(n)
    cur = starts.astype(np.float64).copy()
    e = U * scale
    uncertain = np.zeros(M, dtype=bool)
    slack = 2 * U * scale
    for k in range(n):
        xs[:, k] = cur
        err[k] = e
        if k + 1 == n:
            break
        j = np.searchsorted(inner, cur, side="right")
        if len(inner):
            lo = np.abs(cur - inner[np.maximum(j - 1, 0)])
            hi = np.abs(inner[np.minimum(j, len(inner) - 1)] - cur)
            uncertain |= np.minimum(lo, hi) <= e + slack
        cur = cur + shifts[j]
        e += 3 * U * scale
    return _Orbits(xs, err, uncertain)


def _singular_terms(f: LogRoof, xs: np.ndarray, derivative: int):
    """Values of the singular part only (no bv) with guards."""
    betas = np.array([float(b) for b in f.iet.betas])
    cp = np.array([float(c) for c in f.cplus])
    cm = np.array([float(c) for c in f.cminus])
    idx = np.clip(np.searchsorted(betas, xs, side="right") - 1, 0, f.d - 1)
    dl = xs - betas[idx]
    dr = betas[idx + 1] - xs
    cpi, cmi = cp[idx], cm[idx]
    with np.errstate(divide="ignore", invalid="ignore"):
        if derivative == 0:
            v = -cpi * np.log(np.where(cpi != 0, dl, 1.0)) - cmi * np.log(np.where(cmi != 0, dr, 1.0))
        elif derivative == 1:
            v = -cpi / dl + cmi / dr
        else:
            v = cpi / dl ** 2 + cmi / dr ** 2
    return v, dl, dr, cpi, cmi


def _sums_over_tower(T: Iet, f: LogRoof, a, b, h: int, M: int):
    """``S_h(f)(T^k y)`` for a midpoint grid y of (a, b) and 0 <= k < h.

    Returns ``(S, E, bad, weight)``: sums and error bounds of shape (M, h),
    a mask of uncertified samples and the measure carried by one sample.
    """
    ys, L = _base_grid(a, b, M)
    n = 2 * h - 1
    orb = _run_orbits(T, ys, n)
    vals, guarded = f.eval_array(orb.xs.ravel(), 0)
    d1, _ = f.eval_array(orb.xs.ravel(), 1)
    vals = vals.reshape(orb.xs.shape)
    d1 = np.abs(d1.reshape(orb.xs.shape))
    guarded = guarded.reshape(orb.xs.shape)
    pos = orb.err[None, :] * d1 + 8 * U * np.abs(vals)
    P = np.concatenate([np.zeros((M, 1)), np.cumsum(np.where(guarded, 0.0, vals), axis=1)], axis=1)
    Q = np.concatenate([np.zeros((M, 1)), np.cumsum(np.where(guarded, 0.0, pos), axis=1)], axis=1)
    G = np.concatenate([np.zeros((M, 1), dtype=int), np.cumsum(guarded, axis=1)], axis=1)
    k = np.arange(h)
    S = P[:, k + h] - P[:, k]
    mag = np.maximum(np.abs(P[:, k + h]), np.abs(P[:, k]))
    E = Q[:, k + h] - Q[:, k] + 4 * n * U * mag
    bad = (G[:, k + h] - G[:, k]) > 0
    bad |= orb.uncertain[:, None]
    return S, E, bad, L / M


# tail histogram --------------------------------------------------------------

@dataclass
class TailReport:
    tower_id: str
    height: int
    t: list
    measure: list
    bound: list
    bound_half_c: list
    violations: list
    excluded: float
    subtower_measure: float
    C: float
    B: float
    V: float
    c: float
    total: float
    centre: float
    rate: float | None = None
    samples: int = 0
    deviations: np.ndarray | None = field(default=None, repr=False)

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def iqr(self) -> float:
        if self.deviations is None or not len(self.deviations):
            raise SamplingDegenerate("no deviations recorded")
        q75, q25 = np.percentile(self.deviations, [75, 25])
        return float(q75 - q25)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "empirical_measure", "bound", "violated"])
        for t, m, bd in zip(self.t, self.measure, self.bound):
            w.writerow([repr(float(t)), repr(float(m)), repr(float(bd)), str(m > bd).lower()])
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "tower": self.tower_id, "height": self.height, "C": self.C, "B": self.B,
            "c": self.c, "V": self.V, "centre": self.centre, "excluded": self.excluded,
            "subtower_measure": self.subtower_measure, "rate": self.rate,
            "violations": [list(map(float, v)) for v in self.violations], "samples": self.samples,
        }

    def to_json(self) -> str:
        return json.dumps(self.summary(), sort_keys=True)


def _fit_rate(ts, ms, B) -> float | None:
    pts = [(t, math.log(m)) for t, m in zip(ts, ms) if t >= B and m > 0]
    if len(pts) < 3:
        return None
    x, y = zip(*pts)
    if len(set(x)) < 2:
        return None
    return float(-stats.linregress(x, y).slope)


def location_of_zero(T: Iet, f: LogRoof, tower: RohlinTower) -> tuple[object, float]:
    """Zero of ``S_h(f')`` on the untrimmed base and its location constant."""
    full = replace(tower, a=tower.a0, b=tower.b0, margin=0)
    z = find_derivative_zero(T, f, full, bits=48)
    return z.x, min(tower.location_constant(z.x), 0.5)


def tail_histogram(T: Iet, f: LogRoof, tower: RohlinTower, samples_per_floor: int = 200,
                   t_grid: Sequence[float] | None = None, c: float | None = None,
                   require_trimmed: bool = True, keep_deviations: bool = True) -> TailReport:
    """Measure of ``{x in subtower : |S_h(f)(x) - S_h(f)(y)| >= t}`` against
    ``|I| e^{1/c} e^{-(t-B)/2C}`` with ``B = 6C + 2V``.

    Each floor is sampled on the same midpoint grid of the base (floors are
    translates).  ``c`` defaults to the location constant of the zero of
    ``S_h(f')`` in the untrimmed base.
    """
    if samples_per_floor < 1:
        raise SamplingDegenerate("need at least one sample per floor")
    if require_trimmed and not _mp(tower.margin) >= 2 * tower.eps * (1 - mpmath.mpf(2) ** -200):
        raise TowerNotTrimmed("tail bounds need the base trimmed by 2 eps")
    if not tower.length > 0:
        raise SamplingDegenerate("empty base")
    C = f.tail_constant
    V = f.variation
    B = 6 * C + 2 * V
    if c is None:
        _, c = location_of_zero(T, f, tower)
    if not c > 0:
        raise SamplingDegenerate("location constant must be positive")
    if t_grid is None:
        t_grid = list(np.geomspace(max(B, 1e-9), B + 40 * C, 25))
    centre = centralizing_constant(tower, T, f)
    cf = float(centre)
    h = tower.h
    S, E, bad, w = _sums_over_tower(T, f, tower.a, tower.b, h, samples_per_floor)
    dev = np.abs(S - cf)
    hi = dev + E + 1e-15 * abs(cf)
    excluded = float(bad.sum()) * w
    total = float(_mp(T.total))
    ts, ms, bs, bs2, viol = [], [], [], [], []
    for t in t_grid:
        m = float(np.count_nonzero(hi[~bad] >= t)) * w + excluded
        bd = total * math.exp(1 / c) * math.exp(-(t - B) / (2 * C))
        bd2 = total * math.exp(2 / c) * math.exp(-(t - B) / (2 * C))
        ts.append(float(t)); ms.append(m); bs.append(bd); bs2.append(bd2)
        if m > bd:
            viol.append((float(t), m, bd))
    return TailReport(
        tower_id=f"h{h}", height=h, t=ts, measure=ms, bound=bs, bound_half_c=bs2,
        violations=viol, excluded=excluded, subtower_measure=float(_mp(tower.measure)),
        C=C, B=B, V=V, c=float(c), total=total, centre=cf, rate=_fit_rate(ts, ms, B),
        samples=int(S.size), deviations=dev[~bad] if keep_deviations else None,
    )


def tower_deviations(T: Iet, f: LogRoof, tower: RohlinTower, samples: int) -> np.ndarray:
    """``|S_h(f)(x) - S_h(f)(y)|`` on about ``samples`` points of the whole tower."""
    M = max(1, -(-samples // tower.h))
    centre = float(centralizing_constant(tower, T, f))
    S, _, bad, _ = _sums_over_tower(T, f, tower.a, tower.b, tower.h, M)
    return np.abs(S - centre)[~bad]


# lemma ad0 --------------------------------------------------------------------

def log_pair_level_measure(t: float) -> float:
    """Measure of ``{x in (0,1): |g(x) - g(1/2)| >= t}`` for ``g = -log x - log(1-x)``.

    The level set is ``x(1-x) <= e^{-t}/4``, two end pieces of total length
    ``1 - sqrt(1 - e^{-t})``.
    """
    if t <= 0:
        return 1.0
    u = math.exp(-t)
    return u / (1 + math.sqrt(1 - u))


@dataclass
class Ad0Report:
    K: float
    t: list
    measure: list
    bound: list
    violations: list
    derivative_at_x0: float
    dif_checked: int
    dif_violations: list
    dif_max_ratio: float

    @property
    def ok(self) -> bool:
        return not self.violations and not self.dif_violations


def lemma_ad0_check(g: Callable, g2: Callable, interval: tuple, x0: float, C: float,
                    t_grid: Sequence[float], g1: Callable | None = None,
                    level_measure: Callable | None = None, grid: int = 10**4) -> Ad0Report:
    """Check the exponential tail of ``g`` about its value at the midpoint.

    ``g``, ``g1``, ``g2`` are vectorised callables on ``(a, b)``.  The
    hypothesis ``|g''| <= C/(x-a)^2 + C/(b-x)^2`` is tested on a midpoint
    grid and ``g'(x0) = 0`` is required; either failure raises
    :class:`HypothesisViolation`.  Level-set measures come from
    ``level_measure(t)`` (normalised) when given, else from the grid.
    """
    a, b = map(float, interval)
    L = b - a
    xs = a + L * (np.arange(grid) + 0.5) / grid
    lhs = np.abs(g2(xs))
    rhs = C / (xs - a) ** 2 + C / (b - xs) ** 2
    bad = np.nonzero(lhs > rhs * (1 + 1e-12))[0]
    if len(bad):
        k = bad[0]
        raise HypothesisViolation(f"|g''| exceeds the bound at x={xs[k]!r}", float(xs[k]))
    if g1 is not None:
        d0 = float(g1(np.array([x0]))[0])
        scale = 1 / (x0 - a) + 1 / (b - x0)
    else:
        hstep = 1e-6 * L
        d0 = float((g(np.array([x0 + hstep])) - g(np.array([x0 - hstep])))[0] / (2 * hstep))
        scale = 1e-4 * (1 / (x0 - a) + 1 / (b - x0))
    if abs(d0) > 1e-9 * max(scale, 1.0):
        raise HypothesisViolation(f"g'(x0) = {d0!r} is not zero", x0)
    K = 0.25 * math.exp(L / (x0 - a) + L / (b - x0))
    y0 = (a + b) / 2
    gy0 = float(g(np.array([y0]))[0])
    dev = np.abs(g(xs) - gy0)
    ts, ms, bs, viol = [], [], [], []
    for t in t_grid:
        if level_measure is not None:
            m = float(level_measure(t))
        else:
            m = float(np.count_nonzero(dev >= t)) / grid
        bd = 2 * math.sqrt(K) * math.exp(-t / (2 * C))
        ts.append(float(t)); ms.append(m); bs.append(bd)
        if m > bd:
            viol.append((float(t), m, bd))
    dif_rhs = C * (-np.log((xs - a) / L) - np.log((b - xs) / L) + L / (x0 - a) + L / (b - x0))
    ratio = dev / dif_rhs
    dv = [(float(xs[k]), float(dev[k]), float(dif_rhs[k])) for k in np.nonzero(dev > dif_rhs * (1 + 1e-12))[0]]
    return Ad0Report(K, ts, ms, bs, viol, d0, grid, dv, float(ratio.max()))


# lemma ad1 --------------------------------------------------------------------

@dataclass
class Ad1Report:
    height: int
    grid_checked: int = 0
    grid_violations: list = field(default_factory=list)
    max_ratio: float = 0.0
    pairs_checked: int = 0
    pair_violations: list = field(default_factory=list)
    pair_max_ratio: float = 0.0
    uncertified: int = 0

    @property
    def ok(self) -> bool:
        return not self.grid_violations and not self.pair_violations


def lemma_ad1_check(T: Iet, f: LogRoof, tower: RohlinTower, samples: int = 1000,
                    pairs: int = 1000, seed: int = 0) -> Ad1Report:
    """Bounds on ``S_h(f'')`` over the base grid and on increments of
    intermediate sums ``S_k(f)`` for random pairs in the base.

    Only the singular part of f enters; a bv part is ignored.  Float
    rounding is accounted for by inflating each left side by its error bound.
    """
    h = tower.h
    a, b = float(_mp(tower.a)), float(_mp(tower.b))
    Cp, Cm = float(f.sum_plus), float(f.sum_minus)
    rep = Ad1Report(h)

    ys, L = _base_grid(tower.a, tower.b, samples)
    orb = _run_orbits(T, ys, h)
    v, dl, dr, _, _ = _singular_terms(f, orb.xs, 2)
    rel = 2 * orb.err[None, :] / np.minimum(dl, dr) + 8 * U
    lhs = np.abs(v).sum(axis=1)
    lhs_hi = lhs + (np.abs(v) * rel).sum(axis=1) + h * U * lhs
    rhs = PI2_6 * (Cp / (ys - a) ** 2 + Cm / (b - ys) ** 2)
    unc = orb.uncertain | (np.min(np.minimum(dl, dr), axis=1) <= orb.err[-1])
    rep.grid_checked = int((~unc).sum())
    rep.uncertified = int(unc.sum())
    ratio = lhs_hi / rhs
    rep.max_ratio = float(ratio[~unc].max()) if rep.grid_checked else 0.0
    for k in np.nonzero((lhs_hi > rhs) & ~unc)[0]:
        rep.grid_violations.append((float(ys[k]), float(lhs[k]), float(rhs[k])))

    rng = np.random.default_rng(seed)
    u = np.sort(rng.random((pairs, 2)), axis=1)
    x = a + (b - a) * u[:, 0]
    xp = a + (b - a) * u[:, 1]
    keep = (x > a) & (xp < b) & (xp > x)
    x, xp = x[keep], xp[keep]
    hs = rng.integers(0, h, size=len(x))
    delta = xp - x
    orb = _run_orbits(T, x, max(h, 1))
    _, dl, dr, cpi, cmi = _singular_terms(f, orb.xs, 0)
    near_d = np.minimum(dl, dr - delta[:, None])
    with np.errstate(divide="ignore", invalid="ignore"):
        term = cpi * np.log1p(delta[:, None] / dl) + cmi * np.log1p(-delta[:, None] / dr)
        sens = (cpi + cmi) * orb.err[None, :] / near_d
    mask = np.arange(h)[None, :] < hs[:, None]
    term = np.where(mask, term, 0.0)
    err_terms = np.where(mask, np.abs(term) * 8 * U + sens, 0.0)
    lhs = np.abs(term.sum(axis=1))
    lhs_hi = lhs + err_terms.sum(axis=1) + h * U * np.abs(term).sum(axis=1)
    span = b - a
    extra = delta / span * (1 + math.log(1 / span))
    rhs = Cp * (delta / (x - a) + extra) + Cm * (delta / (b - xp) + extra)
    near = np.min(np.where(mask, near_d, np.inf), axis=1) <= orb.err[-1]
    unc = orb.uncertain | near
    rep.pairs_checked = int((~unc).sum())
    rep.uncertified += int(unc.sum())
    with np.errstate(divide="ignore", invalid="ignore"):
        pr = np.where(rhs > 0, lhs_hi / rhs, 0.0)
    rep.pair_max_ratio = float(pr[~unc].max()) if rep.pairs_checked else 0.0
    for k in np.nonzero((lhs_hi > rhs) & ~unc)[0]:
        rep.pair_violations.append((float(x[k]), float(xp[k]), int(hs[k]), float(lhs[k]), float(rhs[k])))
    return rep


# bounded variation control ----------------------------------------------------

@dataclass
class BvReport:
    max_difference: float
    bound: float
    samples: int

    @property
    def ok(self) -> bool:
        return self.max_difference <= self.bound


def bv_control_check(T: Iet, f: LogRoof, tower: RohlinTower, samples_per_floor: int = 50) -> BvReport:
    """Largest ``|S_h(g)(x) - S_h(g)(x')|`` over x in the (trimmed) tower and
    x' in its base, for the bv part g of f, against ``2V``."""
    if f.bv is None:
        return BvReport(0.0, 0.0, 0)
    h = tower.h
    ys, _ = _base_grid(tower.a, tower.b, samples_per_floor)
    orb = _run_orbits(T, ys, 2 * h - 1)
    g = f.bv.eval_array(orb.xs.ravel()).reshape(orb.xs.shape)
    P = np.concatenate([np.zeros((len(ys), 1)), np.cumsum(g, axis=1)], axis=1)
    k = np.arange(h)
    S = P[:, k + h] - P[:, k]
    base = S[:, 0]
    diff = max(S.max() - base.min(), base.max() - S.min())
    return BvReport(float(diff), 2 * f.variation, int(S.size))


# tightness --------------------------------------------------------------------

@dataclass
class TightnessSummary:
    heights: list
    iqrs: list
    max_iqr: float
    slope: float | None = None
    ci: tuple | None = None

    @property
    def tight(self) -> bool:
        if self.ci is None:
            return True
        return self.ci[0] <= 0 <= self.ci[1]

    @property
    def growing(self) -> bool:
        return self.ci is not None and self.ci[0] > 0


def tightness_report(reports: Sequence, confidence: float = 0.95) -> TightnessSummary:
    """IQR of ``|S_h(f) - c_n|`` per tower and a linear fit of IQR against log h.

    ``reports`` holds :class:`TailReport` objects or ``(h, deviations)`` pairs.
    """
    hs, iq = [], []
    for r in reports:
        if isinstance(r, TailReport):
            hs.append(r.height); iq.append(r.iqr)
        else:
            h, dev = r
            q75, q25 = np.percentile(dev, [75, 25])
            hs.append(int(h)); iq.append(float(q75 - q25))
    if not hs:
        raise ValueError("no reports")
    out = TightnessSummary(hs, iq, max(iq))
    if len(hs) >= 3:
        fit = stats.linregress(np.log(hs), iq)
        tq = stats.t.ppf(0.5 + confidence / 2, len(hs) - 2)
        out.slope = float(fit.slope)
        out.ci = (float(fit.slope - tq * fit.stderr), float(fit.slope + tq * fit.stderr))
    elif len(hs) == 2:
        out.slope = float((iq[1] - iq[0]) / (math.log(hs[1]) - math.log(hs[0])))
    return out
