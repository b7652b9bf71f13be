"""Number backends: exact arithmetic in a real quadratic field and
high-precision floats with a tracked error bound.

Geometry and dynamics code is written against plain Python operators, so
either :class:`QuadraticNumber` (exact) or an ``mpmath`` ``mpf`` bound to a
private context (float) can flow through it unchanged.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache
from numbers import Rational

import mpmath
from gmpy2 import mpq

__all__ = [
    "FieldMismatchError",
    "QuadraticNumber",
    "BigFloat",
    "UncertifiedComparison",
    "ExactBackend",
    "FloatBackend",
    "exact_sign",
    "to_float",
    "sqrt_of",
    "parse_number",
    "format_number",
    "is_squarefree",
    "certified_lt",
    "quadratic_approximation",
]


class FieldMismatchError(ValueError):
    """Raised when two quadratic numbers from different fields meet."""


class UncertifiedComparison(ArithmeticError):
    """An interval comparison could not be decided at the working precision."""


@lru_cache(maxsize=256)
def is_squarefree(n: int) -> bool:
    if n < 1:
        return False
    k = 2
    while k * k <= n:
        if n % (k * k) == 0:
            return False
        k += 1
    return True


def _sgn(q) -> int:
    return (q > 0) - (q < 0)


_ZERO = mpq(0)


def _new(a, b, D):
    x = object.__new__(QuadraticNumber)
    x.a = a
    x.b = b
    x.D = D if b else None
    return x


def _rat(v):
    if isinstance(v, float):
        return mpq(Fraction(v))
    return mpq(v)


class QuadraticNumber:
    """The real number ``a + b*sqrt(D)`` with rational ``a``, ``b``.

    ``D`` is a square-free integer > 1, or ``None`` for plain rationals.
    Numbers with ``b == 0`` are rationals and combine with any field.
    Instances are treated as immutable.

    >>> phi = (1 + sqrt_of(5)) / 2
    >>> phi * phi == phi + 1
    True
    >>> exact_sign(QuadraticNumber(-9, 4, 5))
    -1
    """

    __slots__ = ("a", "b", "D")

    def __init__(self, a=0, b=0, D: int | None = None):
        a = _rat(a)
        b = _rat(b)
        if b == 0:
            D = None
        elif D is None:
            raise ValueError("irrational part needs a radicand D")
        elif D == 1:
            a, b, D = a + b, _ZERO, None
        elif D < 2 or not is_squarefree(D):
            raise ValueError(f"radicand {D} is not a square-free integer > 1")
        self.a = a
        self.b = b
        self.D = D

    # coercion -----------------------------------------------------------
    @classmethod
    def coerce(cls, x) -> "QuadraticNumber":
        if type(x) is QuadraticNumber:
            return x
        if isinstance(x, (int, Fraction, Rational, float)) or type(x) is type(_ZERO):
            return _new(_rat(x), _ZERO, None)
        if isinstance(x, QuadraticNumber):
            return x
        if isinstance(x, str):
            return parse_number(x)
        raise TypeError(f"cannot convert {type(x).__name__} to QuadraticNumber")

    def _field(self, other: "QuadraticNumber") -> int | None:
        if self.D is None:
            return other.D
        if other.D is None or other.D == self.D:
            return self.D
        raise FieldMismatchError(f"Q(sqrt({self.D})) vs Q(sqrt({other.D}))")

    @property
    def is_rational(self) -> bool:
        return not self.b

    # arithmetic ---------------------------------------------------------
    def __add__(self, other):
        if type(other) is not QuadraticNumber:
            try:
                other = QuadraticNumber.coerce(other)
            except TypeError:
                return NotImplemented
        D = self.D if other.D is None else (other.D if self.D is None or self.D == other.D else self._field(other))
        return _new(self.a + other.a, self.b + other.b, D)

    __radd__ = __add__

    def __neg__(self):
        return _new(-self.a, -self.b, self.D)

    def __pos__(self):
        return self

    def __sub__(self, other):
        if type(other) is not QuadraticNumber:
            try:
                other = QuadraticNumber.coerce(other)
            except TypeError:
                return NotImplemented
        D = self.D if other.D is None else (other.D if self.D is None or self.D == other.D else self._field(other))
        return _new(self.a - other.a, self.b - other.b, D)

    def __rsub__(self, other):
        try:
            o = QuadraticNumber.coerce(other)
        except TypeError:
            return NotImplemented
        return o - self

    def __mul__(self, other):
        if type(other) is not QuadraticNumber:
            try:
                other = QuadraticNumber.coerce(other)
            except TypeError:
                return NotImplemented
        if other.D is None:
            return _new(self.a * other.a, self.b * other.a, self.D)
        if self.D is None:
            return _new(self.a * other.a, self.a * other.b, other.D)
        D = self._field(other)
        return _new(self.a * other.a + self.b * other.b * D, self.a * other.b + self.b * other.a, D)

    __rmul__ = __mul__

    def norm(self):
        """Field norm ``a^2 - b^2 D``."""
        if self.D is None:
            return self.a * self.a
        return self.a * self.a - self.b * self.b * self.D

    def conjugate(self) -> "QuadraticNumber":
        return _new(self.a, -self.b, self.D)

    def inverse(self) -> "QuadraticNumber":
        if not self.b:
            if not self.a:
                raise ZeroDivisionError("division by zero")
            return _new(1 / self.a, _ZERO, None)
        n = self.norm()  # nonzero since sqrt(D) is irrational
        return _new(self.a / n, -self.b / n, self.D)

    def __truediv__(self, other):
        if type(other) is not QuadraticNumber:
            try:
                other = QuadraticNumber.coerce(other)
            except TypeError:
                return NotImplemented
        if other.D is None:
            if not other.a:
                raise ZeroDivisionError("division by zero")
            return _new(self.a / other.a, self.b / other.a, self.D)
        self._field(other)
        return self * other.inverse()

    def __rtruediv__(self, other):
        try:
            o = QuadraticNumber.coerce(other)
        except TypeError:
            return NotImplemented
        return o / self

    def __pow__(self, k: int):
        if not isinstance(k, int):
            return NotImplemented
        if k < 0:
            return self.inverse() ** (-k)
        result = QuadraticNumber(1)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def __abs__(self):
        return -self if exact_sign(self) < 0 else self

    # comparison ---------------------------------------------------------
    def sign(self) -> int:
        return exact_sign(self)

    def _cmp(self, other) -> int:
        if type(other) is not QuadraticNumber:
            other = QuadraticNumber.coerce(other)
        if other.D is not None and self.D is not None and other.D != self.D:
            self._field(other)
        da = self.a - other.a
        db = self.b - other.b
        if not db:
            return (da > 0) - (da < 0)
        return _sign_parts(da, db, self.D or other.D)

    def __eq__(self, other):
        if type(other) is not QuadraticNumber:
            try:
                other = QuadraticNumber.coerce(other)
            except TypeError:
                return NotImplemented
        if not self.b and not other.b:
            return self.a == other.a
        return self.a == other.a and self.b == other.b and self.D == other.D

    def __hash__(self):
        if not self.b:
            return hash(self.a)
        return hash((self.a, self.b, self.D))

    def __lt__(self, other):
        return self._cmp(other) < 0

    def __le__(self, other):
        return self._cmp(other) <= 0

    def __gt__(self, other):
        return self._cmp(other) > 0

    def __ge__(self, other):
        return self._cmp(other) >= 0

    def __bool__(self):
        return bool(self.a) or bool(self.b)

    def __floor__(self) -> int:
        if not self.b:
            return int(math.floor(self.a))
        guess = int(mpmath.floor(self.to_mpf(mpmath.mp.prec + 64)))
        while self < guess:
            guess -= 1
        while self >= guess + 1:
            guess += 1
        return guess

    def __ceil__(self) -> int:
        return -math.floor(-self)

    def __float__(self) -> float:
        if not self.b:
            return float(self.a)
        return float(self.to_mpf(80))

    def to_mpf(self, prec: int = 256, ctx=None):
        """Value as an ``mpf`` of ``prec`` bits (within one ulp)."""
        ctx = ctx or mpmath.mp
        with mpmath.workprec(prec + 40):
            v = mpmath.mpf(int(self.a.numerator)) / int(self.a.denominator)
            if self.b:
                v += mpmath.mpf(int(self.b.numerator)) / int(self.b.denominator) * mpmath.sqrt(self.D)
        if ctx is mpmath.mp:
            with mpmath.workprec(prec):
                return +v
        return ctx.mpf(v)

    def __repr__(self):
        return f"QuadraticNumber({format_number(self)!r})"

    def __str__(self):
        return format_number(self)

    def __reduce__(self):
        return (_from_strings, (str(self.a), str(self.b), self.D))


def _from_strings(a, b, D):
    return QuadraticNumber(mpq(a), mpq(b), D)


def _sign_parts(a, b, D) -> int:
    sa = (a > 0) - (a < 0)
    sb = (b > 0) - (b < 0)
    if sb == 0:
        return sa
    if sa == 0 or sa == sb:
        return sb
    diff = a * a - b * b * D
    return sa * ((diff > 0) - (diff < 0))


def exact_sign(x) -> int:
    """Sign of ``a + b*sqrt(D)`` decided without floating point."""
    if not isinstance(x, QuadraticNumber):
        return _sgn(x)
    return _sign_parts(x.a, x.b, x.D)


def sqrt_of(D: int) -> QuadraticNumber:
    """``sqrt(D)`` for square-free D (returns the integer root if D is a square)."""
    r = math.isqrt(D)
    if r * r == D:
        return QuadraticNumber(r)
    return QuadraticNumber(0, 1, D)


_TERM_RE = re.compile(r"([+-]?)(\d+(?:/\d+)?)?(?:\*?sqrt\((\d+)\))?")


def parse_number(text: str) -> QuadraticNumber:
    """Parse ``"a/b + c/d * sqrt(D)"`` (terms in any order) or a decimal.

    >>> parse_number("-1/2 + 1/2 * sqrt(5)") == (sqrt_of(5) - 1) / 2
    True
    >>> parse_number("0.25")
    QuadraticNumber('1/4')
    """
    s = text.replace(" ", "")
    total = QuadraticNumber(0)
    pos = 0
    while s and pos < len(s):
        m = _TERM_RE.match(s, pos)
        if m is None or m.end() == pos or (m.group(2) is None and m.group(3) is None):
            break
        coef = Fraction(m.group(2)) if m.group(2) else Fraction(1)
        if m.group(1) == "-":
            coef = -coef
        total = total + (coef * sqrt_of(int(m.group(3))) if m.group(3) else QuadraticNumber(coef))
        pos = m.end()
    else:
        if s:
            return total
    try:
        return QuadraticNumber(Fraction(s))
    except (ValueError, ZeroDivisionError):
        raise ValueError(f"cannot parse exact number {text!r}") from None


def format_number(x) -> str:
    """Serialize as ``"a/b + c/d * sqrt(D)"``; rationals as ``"a/b"``."""
    if isinstance(x, QuadraticNumber):
        a, b, D = x.a, x.b, x.D
    else:
        a, b, D = mpq(x), 0, None
    if not b:
        return str(a)
    op = "+" if b > 0 else "-"
    return f"{a} {op} {abs(b)} * sqrt({D})"


def quadratic_approximation(value, D: int | None, denominator: int = 2**40) -> QuadraticNumber:
    """Exact number within ``1/denominator`` of ``value``.

    With a radicand the result has a nonzero irrational part (about a
    quarter of the value), so sampled lengths are genuinely irrational.
    """
    with mpmath.workprec(256):
        v = mpmath.mpf(value)
        if D is None:
            return QuadraticNumber(Fraction(int(mpmath.nint(v * denominator)), denominator))
        b = Fraction(max(1, int(mpmath.nint(v * 1024))), 4096)
        rest = v - mpmath.mpf(b.numerator) / b.denominator * mpmath.sqrt(D)
        a = Fraction(int(mpmath.nint(rest * denominator)), denominator)
    return QuadraticNumber(a, b, D)


@dataclass(frozen=True)
class BigFloat:
    """A high-precision value with an absolute error bound."""

    value: mpmath.mpf
    prec: int
    err: mpmath.mpf = field(default_factory=lambda: mpmath.mpf(0))

    @property
    def lower(self):
        with mpmath.workprec(self.prec + 10):
            return mpmath.mpf(self.value) - self.err

    @property
    def upper(self):
        with mpmath.workprec(self.prec + 10):
            return mpmath.mpf(self.value) + self.err

    def __float__(self):
        return float(self.value)

    def serialize(self) -> str:
        digits = max(15, int(self.prec * math.log10(2)))
        return f"{mpmath.nstr(self.value, digits, strip_zeros=False)}@{self.prec}"

    @classmethod
    def parse(cls, text: str) -> "BigFloat":
        body, prec = text.rsplit("@", 1)
        p = int(prec)
        with mpmath.workprec(p):
            v = mpmath.mpf(body)
            return cls(v, p, mpmath.ldexp(abs(v) if v else 1, -p + 1))


def to_float(x, precision: int = 256) -> BigFloat:
    """Round an exact number to ``precision`` bits with a one-ulp bound."""
    if precision < 53:
        raise ValueError("precision must be at least 53 bits")
    q = QuadraticNumber.coerce(x)
    v = q.to_mpf(precision)
    with mpmath.workprec(precision):
        ulp = mpmath.ldexp(1, int(mpmath.floor(mpmath.log(abs(v), 2))) - precision + 1) if v else mpmath.mpf(0)
    return BigFloat(v, precision, ulp)


def certified_lt(x: BigFloat, y: BigFloat) -> bool:
    """Decide ``x < y`` for interval values, or raise if undecidable."""
    if x.upper < y.lower:
        return True
    if x.lower >= y.upper:
        return False
    raise UncertifiedComparison(f"{x.serialize()} vs {y.serialize()}")


@dataclass(frozen=True)
class ExactBackend:
    """Exact arithmetic in Q(sqrt(D)) (``D=None`` for rationals)."""

    D: int | None = None
    kind = "exact"

    def number(self, v):
        q = QuadraticNumber.coerce(v)
        if q.D is not None and self.D is not None and q.D != self.D:
            raise FieldMismatchError(f"number in Q(sqrt({q.D})) for backend Q(sqrt({self.D}))")
        return q

    def to_mpf(self, v, prec: int = 256):
        return QuadraticNumber.coerce(v).to_mpf(prec)

    @property
    def unit_roundoff(self):
        return 0

    def log(self, v, prec: int = 256):
        return mpmath.log(self.to_mpf(v, prec))

    def describe(self) -> dict:
        return {"kind": "exact", "D": self.D}


@dataclass(frozen=True)
class FloatBackend:
    """``mpf`` arithmetic at ``prec`` bits in a private mpmath context.

    Each backend owns its context so precision is never taken from global
    state.  ``interval=True`` makes orbit code certify every branch decision.
    """

    prec: int = 256
    interval: bool = False
    kind = "float"

    @cached_property
    def ctx(self):
        c = mpmath.MPContext()
        c.prec = self.prec
        return c

    def number(self, v):
        if isinstance(v, QuadraticNumber):
            return v.to_mpf(self.prec, self.ctx)
        if isinstance(v, Fraction) or type(v) is type(_ZERO):
            return self.ctx.mpf(int(v.numerator)) / int(v.denominator)
        if isinstance(v, str):
            try:
                return self.number(parse_number(v))
            except ValueError:
                return self.ctx.mpf(v)
        return self.ctx.mpf(v)

    def to_mpf(self, v, prec: int | None = None):
        return self.number(v)

    @property
    def unit_roundoff(self):
        return self.ctx.ldexp(1, -self.prec)

    def log(self, v, prec: int | None = None):
        return self.ctx.log(v)

    def describe(self) -> dict:
        return {"kind": "float", "prec": self.prec, "interval": self.interval}

    def __getstate__(self):
        return {"prec": self.prec, "interval": self.interval}

    def __setstate__(self, state):
        object.__setattr__(self, "prec", state["prec"])
        object.__setattr__(self, "interval", state["interval"])


def backend_from_spec(kind: str, precision: int = 256, D: int | None = None, interval: bool = False):
    if kind == "exact":
        return ExactBackend(D)
    if kind == "float":
        return FloatBackend(precision, interval)
    raise ValueError(f"unknown backend {kind!r}")
