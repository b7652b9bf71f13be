"""Birkhoff sums over an IET, the special flow under a roof, the
cancellation identity for symmetric roofs, and zeros of ``S_h(f')``."""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field

import mpmath

from .iet import Iet
from .numeric import QuadraticNumber
from .roof import LogRoof, SingularityError

__all__ = [
    "SpecialFlowPoint",
    "RoofConfigurationError",
    "BracketError",
    "birkhoff_sum",
    "birkhoff_prefix_sums",
    "CancellationReport",
    "check_cancellation",
    "evolve",
    "find_derivative_zero",
    "ZeroLocation",
]


class RoofConfigurationError(ValueError):
    """The roof is not bounded below by a positive constant."""


class BracketError(ArithmeticError):
    pass


@dataclass(frozen=True)
class SpecialFlowPoint:
    x: object
    r: object


def _term(f, x, derivative):
    return f.eval(x, derivative)


def birkhoff_prefix_sums(T: Iet, f, x, n: int, derivative: int = 0, as_mpf: bool = False) -> list:
    """Partial sums ``[S_1, ..., S_|n|]`` along the forward (n > 0) orbit of x,
    or ``[f(T^-1 x), f(T^-1 x) + f(T^-2 x), ...]`` for n < 0."""
    sums = []
    total = None
    pts = T.orbit(x, n) if n else []
    for k, y in enumerate(pts):
        try:
            v = f.eval(y, derivative)
        except SingularityError as e:
            e.step = k if n > 0 else -(k + 1)
            raise
        if as_mpf and isinstance(v, QuadraticNumber):
            v = v.to_mpf(getattr(f, "prec", 256))
        total = v if total is None else total + v
        sums.append(total)
    return sums


def birkhoff_sum(T: Iet, f, x, n: int, derivative: int = 0):
    """``S_n(f^(k))(x)`` with the usual convention for negative n.

    ``f`` is anything with an ``eval(x, derivative)`` method.
    """
    if n == 0:
        return 0
    sums = birkhoff_prefix_sums(T, f, x, n, derivative)
    return sums[-1] if n > 0 else -sums[-1]


@dataclass
class CancellationReport:
    n: int
    forward: object = 0
    backward: object = 0
    residual: object = 0
    tolerance: float = 0.0
    error_bound: float = 0.0
    max_prefix_residual: float = 0.0
    random_checks: list = field(default_factory=list)
    singularity: str | None = None

    @property
    def ok(self) -> bool:
        if self.singularity is not None:
            return False
        return (abs(self.residual) <= self.tolerance
                and self.max_prefix_residual <= self.tolerance
                and all(abs(r) <= self.tolerance for _, r in self.random_checks))


def _sum_pair(T: Iet, f: LogRoof, x, n: int):
    """Prefix sums of f' along x's forward orbit and along S(x)'s backward
    orbit, plus a first-order error bound for float backends."""
    exact = T.is_exact and all(isinstance(c, QuadraticNumber) for c in f.cplus + f.cminus)
    fwd = T.orbit(x, n)
    bwd = T.orbit(T.involution(x), -n)
    err = 0.0
    if exact:
        a = b = QuadraticNumber(0)
    else:
        a = b = mpmath.mpf(0)
    res_max = 0.0
    u = 2.0 ** -f.prec
    for k in range(n):
        ta = f.eval(fwd[k], 1)
        tb = f.eval(bwd[k], 1)
        a = a + ta
        b = b + tb
        if not exact:
            pos_err = float(k * T.step_error) if T.step_error else 0.0
            err += (float(abs(f.eval(fwd[k], 2))) + float(abs(f.eval(bwd[k], 2)))) * pos_err
            err += (abs(float(a)) + abs(float(b))) * 4 * u
        r = abs(a + b)
        rf = float(r)
        if rf > res_max:
            res_max = rf
    return a, b, res_max, err


def check_cancellation(T: Iet, f: LogRoof, n: int, random_points: int = 3, seed: int = 0,
                       tolerance: float | None = None) -> CancellationReport:
    """Check ``S_n(f')(T^-n x0) = -S_n(f')(x0)`` at ``x0 = |I|/2`` (every prefix
    length up to n) and the general form ``S_n(f')(T^-n(S x)) = -S_n(f')(x)``
    at a few sampled x."""
    if not T.permutation.is_symmetric:
        raise ValueError("cancellation needs a symmetric permutation")
    if not (f.symmetric and f.pure):
        raise ValueError("cancellation needs a pure symmetric roof")
    exact = T.is_exact and all(isinstance(c, QuadraticNumber) for c in f.cplus + f.cminus)
    rep = CancellationReport(n=n, tolerance=0.0 if exact else (tolerance if tolerance is not None else 1e-20))
    if n == 0:
        return rep
    try:
        a, b, res_max, err = _sum_pair(T, f, T.midpoint(), n)
        rep.forward, rep.backward = a, b
        rep.residual = a + b
        rep.max_prefix_residual = res_max
        rep.error_bound = err
        for x in T.sample_points(random_points, seed):
            a2, b2, _, _ = _sum_pair(T, f, x, n)
            rep.random_checks.append((x, a2 + b2))
    except SingularityError as e:
        rep.singularity = str(e)
    return rep


def evolve(T: Iet, f: LogRoof, p: SpecialFlowPoint, t) -> tuple[SpecialFlowPoint, int]:
    """Flow ``p`` for time t under the roof; returns the new point and the
    number of roof crossings (negative when flowing backwards)."""
    if getattr(f, "min_value", 1.0) <= 0:
        raise RoofConfigurationError("roof must be bounded below by a positive constant")
    ctx = getattr(f, "_ctx", mpmath.mp)
    x = T.number(p.x)
    fx = f.eval(x)
    s = ctx.mpf(p.r) + ctx.mpf(t)
    if not (ctx.mpf(p.r) < fx and p.r >= 0):
        raise ValueError("point is not under the roof")
    n = 0
    if s >= 0:
        while s >= fx:
            s -= fx
            x = T.apply(x)
            n += 1
            try:
                fx = f.eval(x)
            except SingularityError as e:
                e.step = n
                raise
    else:
        while s < 0:
            x = T.apply_inverse(x)
            n -= 1
            try:
                fx = f.eval(x)
            except SingularityError as e:
                e.step = n
                raise
            s += fx
    return SpecialFlowPoint(x, s), n


@dataclass
class ZeroLocation:
    x: object
    residual: float
    iterations: int
    bracket: tuple


def _mpf_tables(T: Iet, f: LogRoof):
    ctx = f._ctx
    conv = lambda seq: [f._mpf(v) for v in seq]
    return conv(T.betas), conv(T.shifts), conv(f.cplus), conv(f.cminus)


def _sum_prime(T: Iet, f: LogRoof, x, h: int, tables):
    """``S_h(f')(x)``, orbit and terms in ``mpf`` at the roof's precision.

    Rounding drift after h steps is about ``h * 2^-prec``, far below the
    bisection tolerance.
    """
    betas, shifts, cps, cms = tables
    total = f._ctx.mpf(0)
    cur = f._mpf(x)
    for k in range(h):
        i = bisect.bisect_right(betas, cur) - 1
        cp, cm = cps[i], cms[i]
        if cp:
            total -= cp / (cur - betas[i])
        if cm:
            total += cm / (betas[i + 1] - cur)
        if f.bv is not None:
            total += f.bv(cur, 1)
        cur = cur + shifts[i]
    return total


def find_derivative_zero(T: Iet, f: LogRoof, tower, max_iter: int = 2000,
                         bits: int | None = None) -> ZeroLocation:
    """Bisection for a zero of ``S_h(f')`` in the open tower base.

    The preferred bracket is ``x0 = |I|/2`` and ``T^-h x0``, where the
    cancellation identity forces opposite signs.  When either point leaves
    the base, the bracket falls back to the base itself pulled in by
    ``2^-40`` of its length.  The bracket is halved until its width drops
    below ``2^-bits`` of the initial width (``bits`` defaults to prec/2).
    """
    a, b, h = tower.a, tower.b, tower.h
    x0 = T.midpoint()
    xb = T.iterate(x0, -h)
    if not (a < x0 < b and a < xb < b):
        w = (b - a) / 2 ** 40
        x0, xb = a + w, b - w
    ctx = _mpf_tables(T, f)
    bits = f.prec // 2 if bits is None else bits
    if xb == x0:
        return ZeroLocation(x0, float(abs(_sum_prime(T, f, x0, h, ctx))), 0, (x0, x0))
    lo, hi = (x0, xb) if x0 < xb else (xb, x0)
    glo = _sum_prime(T, f, lo, h, ctx)
    ghi = _sum_prime(T, f, hi, h, ctx)
    if glo == 0:
        return ZeroLocation(lo, 0.0, 0, (lo, hi))
    if ghi == 0:
        return ZeroLocation(hi, 0.0, 0, (lo, hi))
    if (glo > 0) == (ghi > 0):
        raise BracketError("S_h(f') has the same sign at both bracket points")
    width0 = hi - lo
    tol = width0 * T.number(mpmath.ldexp(1, -bits)) if not T.is_exact else width0 / 2 ** bits
    it = 0
    while hi - lo > tol:
        if it >= max_iter:
            raise ArithmeticError("bisection did not converge")
        mid = (lo + hi) / 2
        gm = _sum_prime(T, f, mid, h, ctx)
        it += 1
        if gm == 0:
            lo = hi = mid
            break
        if (gm > 0) == (glo > 0):
            lo, glo = mid, gm
        else:
            hi = mid
    xz = (lo + hi) / 2
    res = _sum_prime(T, f, xz, h, ctx)
    return ZeroLocation(xz, float(abs(res)), it, (lo, hi))
