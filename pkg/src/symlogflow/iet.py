"""Interval exchange transformations.

``T`` acts on ``[0, |I|)`` as the translation ``x -> x - beta_i + beta'_{pi(i)}``
on each half-open piece ``[beta_i, beta_{i+1})``.  Lengths are exact
:class:`~symlogflow.numeric.QuadraticNumber` values or ``mpf`` values from a
:class:`~symlogflow.numeric.FloatBackend`; in the float case every orbit step
carries an error bound and a branch decision that the bound cannot certify
raises :class:`PrecisionExhausted`.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import mpmath
import numpy as np

from .numeric import (
    BigFloat,
    ExactBackend,
    FloatBackend,
    QuadraticNumber,
    backend_from_spec,
    parse_number,
    quadratic_approximation,
)

__all__ = [
    "Permutation",
    "Iet",
    "DomainError",
    "DiscontinuityHit",
    "PrecisionExhausted",
    "SymmetryReport",
    "random_symmetric_iet",
    "rotation",
    "golden_rotation",
    "iet_from_spec",
]


class DomainError(ValueError):
    pass


class DiscontinuityHit(ArithmeticError):
    """An orbit landed exactly on an endpoint ``beta_j``."""

    def __init__(self, step: int, index: int, point, orbit=None):
        super().__init__(f"T^{step} x = beta_{index}")
        self.step = step
        self.index = index
        self.point = point
        self.orbit = orbit or []


class PrecisionExhausted(ArithmeticError):
    """Accumulated float error reached the distance to a discontinuity."""

    def __init__(self, step: int, gap, err):
        super().__init__(f"step {step}: gap {mpmath.nstr(gap, 5)} <= error bound {mpmath.nstr(err, 5)}")
        self.step = step
        self.gap = gap
        self.err = err


@dataclass(frozen=True)
class Permutation:
    """A permutation of ``{0, ..., d-1}``; ``images[i]`` is the position of
    interval ``i`` after the exchange."""

    images: tuple[int, ...]

    def __post_init__(self):
        imgs = tuple(int(i) for i in self.images)
        if sorted(imgs) != list(range(len(imgs))):
            raise ValueError(f"{imgs} is not a permutation of 0..{len(imgs) - 1}")
        object.__setattr__(self, "images", imgs)

    @classmethod
    def symmetric(cls, d: int) -> "Permutation":
        return cls(tuple(range(d - 1, -1, -1)))

    @property
    def d(self) -> int:
        return len(self.images)

    @property
    def is_symmetric(self) -> bool:
        d = self.d
        return all(p == d - 1 - i for i, p in enumerate(self.images))

    def __call__(self, i: int) -> int:
        return self.images[i]

    def inverse(self) -> "Permutation":
        inv = [0] * self.d
        for i, p in enumerate(self.images):
            inv[p] = i
        return Permutation(tuple(inv))


@dataclass
class SymmetryReport:
    checked: int = 0
    skipped: int = 0
    violations: list = field(default_factory=list)
    max_error: float = 0.0

    @property
    def ok(self) -> bool:
        return not self.violations


class Iet:
    """An interval exchange transformation.

    >>> T = Iet([Fraction(1, 3), Fraction(2, 3)])
    >>> T.apply(0), T.apply(Fraction(1, 2))
    (QuadraticNumber('2/3'), QuadraticNumber('1/6'))
    """

    def __init__(self, lengths: Sequence, permutation: Permutation | Sequence[int] | None = None,
                 backend=None, max_total=1):
        if permutation is None:
            permutation = Permutation.symmetric(len(lengths))
        elif not isinstance(permutation, Permutation):
            permutation = Permutation(tuple(permutation))
        if permutation.d != len(lengths):
            raise ValueError("permutation size does not match number of lengths")
        if backend is None:
            qs = [QuadraticNumber.coerce(v) for v in lengths]
            Ds = {q.D for q in qs if q.D is not None}
            if len(Ds) > 1:
                raise ValueError(f"lengths live in different fields {sorted(Ds)}")
            backend = ExactBackend(Ds.pop() if Ds else None)
        self.backend = backend
        self.permutation = permutation
        self.lengths = tuple(backend.number(v) for v in lengths)
        if any(not (v > 0) for v in self.lengths):
            raise ValueError("all lengths must be positive")
        zero = backend.number(0)
        betas = [zero]
        for v in self.lengths:
            betas.append(betas[-1] + v)
        self.betas = tuple(betas)
        self.total = betas[-1]
        if max_total is not None and self.total > max_total:
            raise ValueError(f"total length {self.total} exceeds {max_total}")
        d = self.d
        inv = permutation.inverse()
        image_starts = [zero]
        for k in range(d):
            image_starts.append(image_starts[-1] + self.lengths[inv(k)])
        self.image_betas = tuple(image_starts)
        self.shifts = tuple(image_starts[permutation(i)] - betas[i] for i in range(d))
        # inverse map: the piece starting at image_betas[k] came from interval inv(k)
        self._inv_shifts = tuple(-self.shifts[inv(k)] for k in range(d))
        self._inner = self.betas[1:-1]
        self._inner_img = self.image_betas[1:-1]
        if backend.kind == "float":
            u = backend.unit_roundoff
            self.step_error = (2 * d + 2) * u * abs(self.total)
        else:
            self.step_error = 0

    # basic data ------------------------------------------------------------
    @property
    def d(self) -> int:
        return len(self.lengths)

    @property
    def is_exact(self) -> bool:
        return self.backend.kind == "exact"

    def __repr__(self):
        return f"Iet(d={self.d}, permutation={self.permutation.images}, backend={self.backend.describe()})"

    def number(self, v):
        return self.backend.number(v)

    def midpoint(self):
        return self.total / 2

    def interval_index(self, x) -> int:
        return bisect.bisect_right(self._inner, x)

    def _check_domain(self, x):
        if not (x >= 0 and x < self.total):
            raise DomainError(f"{x} outside [0, |I|)")

    # dynamics --------------------------------------------------------------
    def apply(self, x):
        x = self.number(x)
        self._check_domain(x)
        return x + self.shifts[bisect.bisect_right(self._inner, x)]

    def apply_inverse(self, x):
        x = self.number(x)
        self._check_domain(x)
        return x + self._inv_shifts[bisect.bisect_right(self._inner_img, x)]

    def involution(self, x):
        x = self.number(x)
        if not (x >= 0 and x <= self.total):
            raise DomainError(f"{x} outside [0, |I|]")
        return self.total - x

    def __call__(self, x):
        return self.apply(x)

    def _gap(self, x, inner):
        """Distance from x to the nearest interior endpoint of ``inner``."""
        k = bisect.bisect_left(inner, x)
        g = None
        if k < len(inner):
            g = inner[k] - x
        if k > 0:
            g2 = x - inner[k - 1]
            g = g2 if g is None or g2 < g else g
        return g

    def orbit(self, x, n: int, on_hit: str = "raise") -> list:
        """``[x, Tx, ..., T^{n-1}x]`` for n >= 0, ``[T^-1 x, ..., T^n x]`` for n < 0.

        Landing exactly on an interior endpoint raises :class:`DiscontinuityHit`
        (``on_hit="raise"``) or ends the orbit at that point (``on_hit="stop"``).
        Float backends raise :class:`PrecisionExhausted` when the accumulated
        error bound reaches the gap to an endpoint.
        """
        x = self.number(x)
        self._check_domain(x)
        forward = n >= 0
        inner = self._inner if forward else self._inner_img
        shifts = self.shifts if forward else self._inv_shifts
        exact = self.is_exact
        err = self.number(0) if not exact else 0
        out = []
        steps = abs(n)
        cur = x
        for k in range(steps):
            if forward:
                out.append(cur)
            j = bisect.bisect_right(inner, cur)
            if (j > 0 and inner[j - 1] == cur):
                if on_hit == "stop":
                    if not forward:
                        out.append(cur)
                    return out
                raise DiscontinuityHit(k if forward else -k, j, cur, out)
            if not exact and len(inner):
                gap = self._gap(cur, inner)
                if gap <= err:
                    raise PrecisionExhausted(k, gap, err)
            cur = cur + shifts[j]
            if not exact:
                err = err + self.step_error
            if not forward:
                out.append(cur)
        return out

    def iterate(self, x, n: int):
        """``T^n x`` (any sign of n)."""
        if n == 0:
            return self.number(x)
        if n > 0:
            pts = self.orbit(x, n)
            return self.apply(pts[-1])
        return self.orbit(x, n)[-1]

    def orbit_enclosures(self, x, n: int) -> list[BigFloat]:
        """Forward orbit with a rigorous absolute error bound on every point."""
        if self.is_exact:
            return [BigFloat(p.to_mpf(256), 256) for p in self.orbit(x, n)]
        pts = self.orbit(x, n)
        return [BigFloat(p, self.backend.prec, k * self.step_error) for k, p in enumerate(pts)]

    def continuity_interval(self, x, h: int):
        """Maximal ``(a, b)`` around x on which ``T^k`` is continuous for ``0 <= k < h``."""
        if h < 1:
            raise ValueError("h must be >= 1")
        x = self.number(x)
        self._check_domain(x)
        betas = self.betas
        exact = self.is_exact
        err = 0 if exact else self.number(0)
        left = right = None
        cur = x
        for k in range(h):
            j = bisect.bisect_right(betas, cur) - 1
            dl = cur - betas[j]
            dr = betas[j + 1] - cur
            if not exact and (dl <= err or dr <= err):
                if dl == 0:
                    raise DiscontinuityHit(k, j, cur)
                raise PrecisionExhausted(k, min(dl, dr), err)
            if dl == 0:
                raise DiscontinuityHit(k, j, cur)
            if left is None or dl < left:
                left = dl
            if right is None or dr < right:
                right = dr
            if k + 1 < h:
                cur = cur + self.shifts[j]
                if not exact:
                    err = err + self.step_error
        return x - left, x + right

    # checks ----------------------------------------------------------------
    def sample_points(self, samples: int, seed: int = 0) -> list:
        """Deterministic pseudo-random points of ``(0, |I|)`` in the backend's number type."""
        rng = np.random.default_rng(seed)
        raw = rng.integers(1, 2**53, size=samples)
        return [self.total * Fraction(int(r), 2**53) if self.is_exact else
                self.total * self.number(Fraction(int(r), 2**53)) for r in raw]

    def check_sb(self, samples: int = 1000, seed: int = 0) -> SymmetryReport:
        """Check ``T(S(x)) == S(T^-1(x))`` at sampled points."""
        rep = SymmetryReport()
        tol = 0 if self.is_exact else 8 * self.step_error
        for x in self.sample_points(samples, seed):
            sx = self.involution(x)
            if sx >= self.total or x in self.betas or sx in self.betas or x in self.image_betas:
                rep.skipped += 1
                continue
            lhs = self.apply(sx)
            rhs = self.involution(self.apply_inverse(x))
            rep.checked += 1
            e = abs(lhs - rhs)
            if e > tol:
                rep.violations.append((x, lhs, rhs))
            ef = float(e)
            if ef > rep.max_error:
                rep.max_error = ef
        return rep

    # conversions ------------------------------------------------------------
    def with_backend(self, backend) -> "Iet":
        if backend.kind == "float" and self.is_exact:
            return Iet([backend.number(v) for v in self.lengths], self.permutation, backend, max_total=None)
        if backend.kind == self.backend.kind:
            return Iet(self.lengths, self.permutation, backend, max_total=None)
        raise ValueError("cannot convert a float IET to the exact backend")

    def float64_tables(self):
        """``(betas, shifts, image_betas, inverse_shifts)`` as float64 arrays."""
        f = lambda seq: np.array([float(v) for v in seq], dtype=np.float64)
        return f(self.betas), f(self.shifts), f(self.image_betas), f(self._inv_shifts)

    def to_spec(self) -> dict:
        return {
            "d": self.d,
            "permutation": "symmetric" if self.permutation.is_symmetric else list(self.permutation.images),
            "lengths": [str(v) if self.is_exact else mpmath.nstr(v, int(self.backend.prec * 0.302) + 2) for v in self.lengths],
            "backend": self.backend.kind,
            "precision": getattr(self.backend, "prec", 256),
        }


def iet_from_spec(spec: dict) -> Iet:
    """Build an IET from a spec mapping (see :meth:`Iet.to_spec`)."""
    lengths = spec["lengths"]
    d = int(spec.get("d", len(lengths)))
    if len(lengths) != d:
        raise ValueError(f"expected {d} lengths, got {len(lengths)}")
    perm = spec.get("permutation", "symmetric")
    perm = Permutation.symmetric(d) if perm == "symmetric" else Permutation(tuple(perm))
    kind = spec.get("backend", "exact")
    exact = [parse_number(str(v)) for v in lengths]
    Ds = {q.D for q in exact if q.D is not None}
    backend = backend_from_spec(kind, int(spec.get("precision", 256)), Ds.pop() if Ds else None)
    return Iet(exact, perm, backend)


def rotation(alpha, backend=None) -> Iet:
    """Rotation ``x -> x + alpha mod 1`` as a two-interval exchange."""
    if backend is not None and backend.kind == "float":
        a = backend.number(alpha)
        return Iet([1 - a, a], None, backend)
    a = QuadraticNumber.coerce(alpha)
    return Iet([1 - a, a], None, backend)


def golden_rotation(backend=None) -> Iet:
    """Rotation by ``phi - 1``: lengths ``(2 - phi, phi - 1)``."""
    alpha = (QuadraticNumber(0, 1, 5) - 1) / 2
    return rotation(alpha, backend)


def random_symmetric_iet(d: int, seed: int, backend=None, D: int | None = None) -> Iet:
    """Symmetric IET with lengths uniform on the simplex (seeded).

    Exact backends get lengths projected to Q(sqrt(D)) with total exactly 1.
    """
    rng = np.random.default_rng(seed)
    e = rng.exponential(size=d)
    w = e / e.sum()
    if backend is None or backend.kind == "exact":
        parts = [quadratic_approximation(float(v), D) for v in w[:-1]]
        last = 1 - sum(parts, QuadraticNumber(0))
        return Iet(parts + [last], None, backend or ExactBackend(D))
    parts = [backend.number(float(v)) for v in w[:-1]]
    last = backend.number(1) - sum(parts, backend.number(0))
    return Iet(parts + [last], None, backend)
