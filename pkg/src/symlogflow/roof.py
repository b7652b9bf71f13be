"""Roof functions with logarithmic singularities at the IET endpoints.

On ``(beta_i, beta_{i+1})``::

    f(x) = -Cp[i] * log(x - beta_i) - Cm[i] * log(beta_{i+1} - x) + g(x)

where ``Cp[i]`` is the left strength of interval ``i`` and ``Cm[i]`` its
right strength, and ``g`` is an optional piecewise polynomial.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import mpmath
import numpy as np

from .iet import DomainError, Iet
from .numeric import QuadraticNumber, sqrt_of

__all__ = [
    "SingularityError",
    "BvPart",
    "LogRoof",
    "SrReport",
    "genus2_roof",
    "exact_inverse_sqrt",
]


class SingularityError(ArithmeticError):
    """Evaluation point within the guard distance of a singular endpoint."""

    def __init__(self, x, endpoint: int, distance, step: int | None = None):
        where = f" at step {step}" if step is not None else ""
        super().__init__(f"point within {mpmath.nstr(distance, 5)} of beta_{endpoint}{where}")
        self.x = x
        self.endpoint = endpoint
        self.distance = distance
        self.step = step


@dataclass(frozen=True)
class BvPart:
    """Piecewise polynomial ``g`` on ``[breaks[k], breaks[k+1])``.

    ``coeffs[k]`` lists coefficients in increasing degree, in the variable
    ``x`` itself (not shifted).  ``variation`` is the declared total
    variation; :meth:`total_variation` computes it in closed form.
    """

    breaks: tuple
    coeffs: tuple
    variation: float | None = None

    def __post_init__(self):
        br = tuple(float(b) for b in self.breaks)
        cf = tuple(tuple(float(c) for c in row) for row in self.coeffs)
        if len(cf) != len(br) - 1 or any(b1 >= b2 for b1, b2 in zip(br, br[1:])):
            raise ValueError("BvPart needs increasing breaks and one coefficient row per piece")
        object.__setattr__(self, "breaks", br)
        object.__setattr__(self, "coeffs", cf)
        computed = self.total_variation()
        if self.variation is None:
            object.__setattr__(self, "variation", computed)
        elif self.variation < computed - 1e-12 * max(1.0, computed):
            raise ValueError(f"declared variation {self.variation} is below the true value {computed}")

    @classmethod
    def constant(cls, value: float, total: float = 1.0) -> "BvPart":
        return cls((0.0, total), ((value,),), 0.0)

    def _piece(self, x: float) -> int:
        k = bisect.bisect_right(self.breaks, x) - 1
        return min(max(k, 0), len(self.coeffs) - 1)

    def __call__(self, x, derivative: int = 0):
        xf = float(x)
        p = np.polynomial.Polynomial(self.coeffs[self._piece(xf)])
        if derivative:
            p = p.deriv(derivative)
        return float(p(xf))

    def eval_array(self, xs: np.ndarray, derivative: int = 0) -> np.ndarray:
        out = np.empty_like(xs, dtype=np.float64)
        idx = np.clip(np.searchsorted(self.breaks, xs, side="right") - 1, 0, len(self.coeffs) - 1)
        for k, row in enumerate(self.coeffs):
            m = idx == k
            if m.any():
                p = np.polynomial.Polynomial(row)
                if derivative:
                    p = p.deriv(derivative)
                out[m] = p(xs[m])
        return out

    def total_variation(self) -> float:
        """Sum of variations inside pieces plus the jumps between them."""
        tv = 0.0
        prev_right = None
        for k, row in enumerate(self.coeffs):
            lo, hi = self.breaks[k], self.breaks[k + 1]
            p = np.polynomial.Polynomial(row)
            crit = [r.real for r in p.deriv().roots() if abs(r.imag) < 1e-14 and lo < r.real < hi] if len(row) > 1 else []
            pts = [lo] + sorted(crit) + [hi]
            vals = [p(t) for t in pts]
            tv += sum(abs(b - a) for a, b in zip(vals, vals[1:]))
            if prev_right is not None:
                tv += abs(vals[0] - prev_right)
            prev_right = vals[-1]
        return float(tv)

    def lower_bound(self) -> float:
        lo = math.inf
        for k, row in enumerate(self.coeffs):
            a, b = self.breaks[k], self.breaks[k + 1]
            p = np.polynomial.Polynomial(row)
            pts = [a, b] + ([r.real for r in p.deriv().roots() if abs(r.imag) < 1e-14 and a < r.real < b] if len(row) > 1 else [])
            lo = min(lo, min(p(t) for t in pts))
        return float(lo)

    def to_spec(self) -> dict:
        return {"breaks": list(self.breaks), "coeffs": [list(r) for r in self.coeffs], "variation": self.variation}


def exact_inverse_sqrt(K) -> QuadraticNumber:
    """``1/sqrt(K)`` for rational K > 0, exactly, as an element of Q(sqrt(m))."""
    K = Fraction(K)
    p, q = K.numerator, K.denominator
    n = p * q  # sqrt(p/q) = sqrt(p q) / q
    s, m = 1, 1
    k = 2
    rest = n
    while k * k <= rest:
        while rest % (k * k) == 0:
            rest //= k * k
            s *= k
        k += 1
    m = rest
    root = s * sqrt_of(m) / q  # sqrt(K)
    return 1 / root


@dataclass
class SrReport:
    checked: int = 0
    violations: list = field(default_factory=list)
    max_error: float = 0.0

    @property
    def ok(self) -> bool:
        return not self.violations


class LogRoof:
    """A roof with logarithmic singularities over the endpoints of ``iet``.

    ``constants`` holds one pair ``(C_i^+, C_{i+1}^-)`` per interval.
    Derivatives of the singular part are computed exactly when both the point
    and the constants are exact; values of ``f`` itself are ``mpf``.

    >>> from fractions import Fraction
    >>> T = Iet([Fraction(1)])
    >>> f = LogRoof(T, [(1, 1)])
    >>> round(float(f.eval(Fraction(1, 2))), 6), f.eval(Fraction(1, 2), 1), f.eval(Fraction(1, 2), 2)
    (1.386294, QuadraticNumber('0'), QuadraticNumber('8'))
    """

    def __init__(self, iet: Iet, constants: Sequence[tuple], bv: BvPart | None = None,
                 eta_min=1e-30, prec: int | None = None, validate: bool = True):
        if len(constants) != iet.d:
            raise ValueError(f"need {iet.d} constant pairs, got {len(constants)}")
        self.iet = iet
        self.prec = prec or getattr(iet.backend, "prec", 256)
        self.cplus = tuple(self._const(c[0]) for c in constants)
        self.cminus = tuple(self._const(c[1]) for c in constants)
        if any(c < 0 for c in self.cplus + self.cminus):
            raise ValueError("singularity strengths must be non-negative")
        if all(c == 0 for c in self.cplus + self.cminus):
            raise ValueError("at least one singularity strength must be positive")
        self.bv = bv
        self.eta_min = mpmath.mpf(eta_min)
        self._eta_q = QuadraticNumber(Fraction(float(eta_min)))
        self._ctx = mpmath.MPContext()
        self._ctx.prec = self.prec
        if validate:
            self.validate_positive()

    def _const(self, c):
        if isinstance(c, (int, Fraction, QuadraticNumber, str)):
            q = QuadraticNumber.coerce(c)
            D = getattr(self.iet.backend, "D", None)
            if self.iet.is_exact and (q.D is None or q.D == D or D is None):
                return q
            return q.to_mpf(self.prec)
        return mpmath.mpf(c)

    # properties -------------------------------------------------------------
    @property
    def d(self) -> int:
        return self.iet.d

    @property
    def symmetric(self) -> bool:
        return all(p == m for p, m in zip(self.cplus, self.cminus))

    @property
    def pure(self) -> bool:
        return self.bv is None

    @property
    def sum_plus(self):
        return sum(self.cplus, 0)

    @property
    def sum_minus(self):
        return sum(self.cminus, 0)

    @property
    def tail_constant(self) -> float:
        """``(pi^2/6) * max(sum C^+, sum C^-)``."""
        return math.pi ** 2 / 6 * max(float(self.sum_plus), float(self.sum_minus))

    @property
    def variation(self) -> float:
        return self.bv.variation if self.bv is not None else 0.0

    def _exact_ok(self, x) -> bool:
        return (isinstance(x, QuadraticNumber)
                and all(isinstance(c, QuadraticNumber) for c in self.cplus + self.cminus))

    def _mpf(self, v):
        if isinstance(v, QuadraticNumber):
            return v.to_mpf(self.prec, self._ctx)
        return self._ctx.mpf(v)

    # evaluation -------------------------------------------------------------
    def locate(self, x):
        """Index i and distances ``(x - beta_i, beta_{i+1} - x)``; checks guards."""
        T = self.iet
        if not (x > 0 and x < T.total):
            raise DomainError(f"{x} outside (0, |I|)")
        i = bisect.bisect_right(T.betas, x) - 1
        dl = x - T.betas[i]
        dr = T.betas[i + 1] - x
        if dl == 0:
            raise SingularityError(x, i, 0)
        eta = self._eta_q if isinstance(x, QuadraticNumber) else self.eta_min
        for dist, c, j in ((dl, self.cplus[i], i), (dr, self.cminus[i], i + 1)):
            if c and dist < eta:
                raise SingularityError(x, j, self._mpf(dist))
        return i, dl, dr

    def eval(self, x, derivative: int = 0):
        """``f``, ``f'`` or ``f''`` at x (strictly inside an interval)."""
        x = self.iet.number(x)
        i, dl, dr = self.locate(x)
        cp, cm = self.cplus[i], self.cminus[i]
        if derivative == 0:
            ctx = self._ctx
            v = ctx.mpf(0)
            if cp != 0:
                v -= self._mpf(cp) * ctx.log(self._mpf(dl))
            if cm != 0:
                v -= self._mpf(cm) * ctx.log(self._mpf(dr))
        elif derivative in (1, 2):
            if not self._exact_ok(x):
                dl, dr = self._mpf(dl), self._mpf(dr)
                cp, cm = self._mpf(cp), self._mpf(cm)
            if derivative == 1:
                v = -cp / dl + cm / dr
            else:
                v = cp / (dl * dl) + cm / (dr * dr)
        else:
            raise ValueError("derivative must be 0, 1 or 2")
        if self.bv is not None:
            v = self._mpf(v) + self.bv(x, derivative)
        return v

    __call__ = eval

    def eval_array(self, xs: np.ndarray, derivative: int = 0):
        """float64 vectorized evaluation.

        Returns ``(values, guarded)`` where ``guarded`` marks points within
        ``max(eta_min, 1e-300)`` of a singular endpoint (values there are NaN).
        """
        betas = np.array([float(b) for b in self.iet.betas])
        cp = np.array([float(c) for c in self.cplus])
        cm = np.array([float(c) for c in self.cminus])
        idx = np.clip(np.searchsorted(betas, xs, side="right") - 1, 0, self.d - 1)
        dl = xs - betas[idx]
        dr = betas[idx + 1] - xs
        eta = max(float(self.eta_min), 1e-300)
        guarded = ((dl < eta) & (cp[idx] != 0)) | ((dr < eta) & (cm[idx] != 0)) | (dl <= 0) | (dr <= 0)
        with np.errstate(divide="ignore", invalid="ignore"):
            if derivative == 0:
                v = -cp[idx] * np.log(np.where(cp[idx] != 0, dl, 1.0)) - cm[idx] * np.log(np.where(cm[idx] != 0, dr, 1.0))
            elif derivative == 1:
                v = -cp[idx] / dl + cm[idx] / dr
            else:
                v = cp[idx] / dl ** 2 + cm[idx] / dr ** 2
        if self.bv is not None:
            v = v + self.bv.eval_array(xs, derivative)
        v = np.where(guarded, np.nan, v)
        return v, guarded

    # checks -----------------------------------------------------------------
    def validate_positive(self, grid: int = 2000):
        """Check the roof is bounded below by a positive constant on a grid."""
        T = self.iet
        lo = math.inf
        for i in range(self.d):
            a, b = float(T.betas[i]), float(T.betas[i + 1])
            xs = a + (b - a) * (np.arange(1, grid) / grid)
            v, _ = self.eval_array(xs)
            lo = min(lo, float(np.nanmin(v)))
            if self.cplus[i] == 0 and self.cminus[i] == 0 and self.bv is None:
                lo = min(lo, 0.0)
        self.min_value = lo
        if self.bv is None:
            # the pure part is >= 0 as soon as |I| <= 1
            return lo
        if not lo > 0:
            raise ValueError(f"roof is not bounded below by a positive constant (min {lo:.3g})")
        return lo

    def check_sr(self, samples: int = 1000, seed: int = 0, T: Iet | None = None) -> SrReport:
        """Check ``f'(T^-1(S x)) == -f'(x)`` for the singular part."""
        T = T or self.iet
        pure = LogRoof(T, list(zip(self.cplus, self.cminus)), None, self.eta_min, self.prec, validate=False)
        rep = SrReport()
        for x in T.sample_points(samples, seed):
            if x in T.betas:
                continue
            y = T.apply_inverse(T.involution(x))
            if y in T.betas:
                continue
            lhs = pure.eval(y, 1)
            rhs = -pure.eval(x, 1)
            rep.checked += 1
            err = abs(lhs - rhs)
            scale = 1 + abs(rhs)
            tol = 0 if isinstance(err, QuadraticNumber) else mpmath.ldexp(scale, -self.prec // 2)
            if err > tol:
                rep.violations.append((x, lhs, rhs))
            rep.max_error = max(rep.max_error, float(err))
        return rep

    def to_spec(self) -> dict:
        spec = {"constants": [[str(p), str(m)] for p, m in zip(self.cplus, self.cminus)],
                "eta_min": float(self.eta_min)}
        if self.bv is not None:
            spec["bv"] = self.bv.to_spec()
        return spec

    @classmethod
    def from_spec(cls, iet: Iet, spec: dict) -> "LogRoof":
        bv = None
        if spec.get("bv"):
            b = spec["bv"]
            bv = BvPart(tuple(b["breaks"]), tuple(tuple(r) for r in b["coeffs"]), b.get("variation"))
        consts = spec["constants"]
        if consts == "symmetric":
            consts = [(1, 1)] * iet.d
        return cls(iet, [tuple(c) for c in consts], bv, spec.get("eta_min", 1e-30))


def genus2_roof(K, i0: int, iet: Iet | None = None) -> LogRoof:
    """Symmetric roof on a five-interval exchange with one silent pair.

    Every interval except ``i0`` gets strength ``1/sqrt(K)`` at both ends.
    """
    if not K > 0:
        raise ValueError("K must be positive")
    if not 0 <= i0 < 5:
        raise ValueError("i0 must be in 0..4")
    if iet is None:
        iet = Iet([Fraction(1, 5)] * 5)
    if iet.d != 5:
        raise ValueError("genus-2 roofs live over five-interval exchanges")
    if isinstance(K, (int, Fraction)) or (isinstance(K, QuadraticNumber) and K.is_rational):
        c = exact_inverse_sqrt(K.a if isinstance(K, QuadraticNumber) else K)
    else:
        c = 1 / mpmath.sqrt(mpmath.mpf(K))
    consts = [(0, 0) if i == i0 else (c, c) for i in range(5)]
    return LogRoof(iet, consts)
