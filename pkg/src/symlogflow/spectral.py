"""Monte-Carlo correlations of the special flow.

Points of the phase space are drawn as ``x`` uniform on the base and
``s`` uniform on ``[0, 1)`` (height ``r = s f(x)``), weighted by ``f(x)``
so that the weighted sample is the normalised invariant measure.  Each
batch gets its own generator spawned from the master seed and batches
are reduced in a fixed order, so results do not depend on the worker
count.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import mpmath
import numpy as np
from scipy import integrate

from .iet import Iet
from .towers import centralizing_constant

__all__ = [
    "Observable",
    "box",
    "bump",
    "trig",
    "ConstantRoof",
    "CorrelationEstimate",
    "correlation",
    "evolve_batch",
    "CorrelationProfile",
    "rigidity_correlation_profile",
    "noise_floor",
    "correlation_spectrum",
]


class ConstantRoof:
    """A bounded roof ``f = value`` with the array interface of the log roofs."""

    def __init__(self, iet: Iet, value: float = 1.0):
        if not value > 0:
            raise ValueError("roof must be positive")
        self.iet = iet
        self.value = float(value)
        self.min_value = self.value
        self._ctx = mpmath.mp

    def eval_array(self, xs, derivative: int = 0):
        v = np.full(np.shape(xs), self.value if derivative == 0 else 0.0)
        return v, np.zeros(np.shape(xs), dtype=bool)

    def eval(self, x, derivative: int = 0):
        return self.value if derivative == 0 else 0.0


def _smooth_bump(z):
    out = np.zeros_like(z, dtype=float)
    m = np.abs(z) < 1
    out[m] = np.exp(1 - 1 / (1 - z[m] ** 2))
    return out


@dataclass(frozen=True)
class Observable:
    """``g(x, s) = u(x) * w(s)`` with ``s = r / f(x)``, minus ``mean`` when centred."""

    kind: str
    params: tuple
    mean: float = 0.0

    def u(self, x):
        k, p = self.kind, self.params
        if k == "box":
            return ((x >= p[0]) & (x < p[1])).astype(float)
        if k == "bump":
            return _smooth_bump((x - p[0]) / p[1])
        if k == "trig":
            return np.cos(2 * math.pi * p[0] * x / p[1])
        raise ValueError(f"unknown observable kind {k!r}")

    def w(self, s):
        k, p = self.kind, self.params
        if k == "box":
            return ((s >= p[2]) & (s < p[3])).astype(float)
        if k == "bump":
            return _smooth_bump(2 * s - 1)
        return np.ones_like(s, dtype=float)

    def w_mean(self) -> float:
        if self.kind == "box":
            return self.params[3] - self.params[2]
        if self.kind == "bump":
            return integrate.quad(lambda s: float(_smooth_bump(np.array([2 * s - 1]))[0]), 0, 1)[0]
        return 1.0

    def __call__(self, x, s):
        return self.u(x) * self.w(s) - self.mean

    def centred(self, T: Iet, f) -> "Observable":
        """Same observable with its mean under the flow-invariant measure removed."""
        betas = [float(b) for b in T.betas]
        fx = lambda x: float(f.eval_array(np.array([x]))[0][0])
        ux = lambda x: float(self.u(np.array([x]))[0])
        num = den = 0.0
        for a, b in zip(betas, betas[1:]):
            den += integrate.quad(fx, a, b, limit=200)[0]
            num += integrate.quad(lambda x: ux(x) * fx(x), a, b, limit=200,
                                  points=[p for p in self._kinks() if a < p < b] or None)[0]
        return Observable(self.kind, self.params, num * self.w_mean() / den)

    def _kinks(self):
        if self.kind == "box":
            return [self.params[0], self.params[1]]
        if self.kind == "bump":
            return [self.params[0] - self.params[1], self.params[0], self.params[0] + self.params[1]]
        return []


def box(a: float, b: float, s0: float = 0.0, s1: float = 0.5) -> Observable:
    return Observable("box", (a, b, s0, s1))


def bump(centre: float, radius: float) -> Observable:
    return Observable("bump", (centre, radius))


def trig(k: int, total: float = 1.0) -> Observable:
    return Observable("trig", (k, total))


def evolve_batch(T: Iet, f, x: np.ndarray, r: np.ndarray, t: float, max_steps: int = 10**7):
    """Flow the points ``(x, r)`` for time ``t >= 0`` in float64.

    Returns ``(x, r, bad)``; ``bad`` marks points that came within the
    roof's guard distance of a singularity.
    """
    betas, shifts, _, _ = T.float64_tables()
    inner = betas[1:-1]
    x = x.copy()
    s = r + t
    fx, bad = f.eval_array(x)
    bad = bad.copy()
    active = np.nonzero(~bad & (s >= fx))[0]
    steps = 0
    while active.size:
        s[active] -= fx[active]
        xa = x[active]
        xa = xa + shifts[np.searchsorted(inner, xa, side="right")]
        x[active] = xa
        fa, ga = f.eval_array(xa)
        fx[active] = fa
        bad[active] |= ga
        keep = ~ga & (s[active] >= fa)
        active = active[keep]
        steps += 1
        if steps > max_steps:
            raise RuntimeError("flow did not finish within the step limit")
    return x, s, bad


@dataclass
class CorrelationEstimate:
    t: float
    value: float
    stderr: float
    samples: int
    excluded: int

    @property
    def excluded_fraction(self) -> float:
        return self.excluded / self.samples if self.samples else 0.0


def _batch(T, f, g, t, n, seed_seq):
    rng = np.random.default_rng(seed_seq)
    total = float(T.total)
    x = rng.random(n) * total
    s0 = rng.random(n)
    fx, guard = f.eval_array(x)
    w = np.where(guard, 0.0, fx)
    fx = np.where(guard, 1.0, fx)
    r = s0 * fx
    g0 = g(x, s0)
    if t == 0:
        gt = g0
        bad = guard
    else:
        xt, rt, bad = evolve_batch(T, f, x, r, t)
        ft, _ = f.eval_array(xt)
        st = np.where(bad, 0.0, rt / np.where(bad, 1.0, ft))
        gt = g(xt, st)
        bad = bad | guard
    w = np.where(bad, 0.0, w)
    prod = np.where(bad, 0.0, g0 * gt)
    return w, prod, int(bad.sum())


def correlation(T: Iet, f, g: Observable, t: float, samples: int = 10**5, seed: int = 0,
                batches: int = 8, workers: int = 1) -> CorrelationEstimate:
    """Estimate ``<g o T_t, g>`` under the normalised invariant measure."""
    if t < 0:
        raise ValueError("t must be non-negative")
    seqs = np.random.SeedSequence(seed).spawn(batches)
    sizes = [samples // batches + (1 if i < samples % batches else 0) for i in range(batches)]
    jobs = [(T, f, g, float(t), n, sq) for n, sq in zip(sizes, seqs)]
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            parts = list(ex.map(lambda a: _batch(*a), jobs))
    else:
        parts = [_batch(*a) for a in jobs]
    w = np.concatenate([p[0] for p in parts])
    y = np.concatenate([p[1] for p in parts])
    excluded = sum(p[2] for p in parts)
    W = w.sum()
    if W <= 0:
        return CorrelationEstimate(float(t), math.nan, math.nan, samples, excluded)
    R = float((w * y).sum() / W)
    # ratio-estimator standard error
    n = len(w)
    wbar = W / n
    resid = w * (y - R)
    se = float(np.sqrt((resid**2).sum() / (n * (n - 1))) / wbar)
    return CorrelationEstimate(float(t), R, se, samples, excluded)


def noise_floor(T: Iet, f, g: Observable, c_max: float, samples: int, seed: int = 0,
                times: int = 20, quantile: float = 0.95) -> tuple[float, list]:
    """95th percentile of ``|R|`` at random times in ``[c_max, 2 c_max]``."""
    rng = np.random.default_rng(np.random.SeedSequence([seed, 7919]))
    ts = np.sort(rng.uniform(c_max, 2 * c_max, size=times))
    ests = [correlation(T, f, g, float(t), samples, seed + 1 + i) for i, t in enumerate(ts)]
    return float(np.quantile([abs(e.value) for e in ests], quantile)), ests


@dataclass
class CorrelationProfile:
    rows: list = field(default_factory=list)
    r0: CorrelationEstimate | None = None
    floor: float = math.nan
    baseline: list = field(default_factory=list)

    @property
    def min_abs(self) -> float:
        return min(abs(r["R"]) for r in self.rows) if self.rows else math.nan

    @property
    def ratio(self) -> float:
        """``min |R(c_n)|`` over the noise floor."""
        return self.min_abs / self.floor if self.floor > 0 else math.inf

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=["n", "h_n", "c_n", "R", "stderr"])
            w.writeheader()
            for r in self.rows:
                w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})


def rigidity_correlation_profile(T: Iet, f, g: Observable, towers, samples: int = 10**5, seed: int = 0,
                                 floor_times: int = 20) -> CorrelationProfile:
    """Correlations at the centralizing times ``c_n = S_{h_n} f`` (base midpoint)
    of the given towers, with ``R(0)`` and the noise floor for comparison."""
    prof = CorrelationProfile()
    prof.r0 = correlation(T, f, g, 0.0, samples, seed)
    cs = []
    for n, tw in enumerate(towers):
        c = float(centralizing_constant(tw, T, f))
        cs.append(c)
        est = correlation(T, f, g, c, samples, seed + 1000 + n)
        prof.rows.append({"n": n, "h_n": tw.h, "c_n": c, "R": est.value, "stderr": est.stderr})
    if cs:
        prof.floor, prof.baseline = noise_floor(T, f, g, max(cs), samples, seed + 5000, floor_times)
    return prof


def correlation_spectrum(T: Iet, f, g: Observable, t_max: float, n_times: int = 256,
                         samples: int = 10**4, seed: int = 0, path=None) -> list[dict]:
    """Hann-windowed Fourier transform of ``R`` on a uniform time grid.

    Exploratory only: finite data cannot tell singular from absolutely
    continuous spectrum.  Rows carry ``exploratory=true``.
    """
    ts = np.linspace(0.0, t_max, n_times)
    R = np.array([correlation(T, f, g, float(t), samples, seed).value for t in ts])
    win = np.hanning(n_times)
    spec = np.abs(np.fft.rfft(R * win)) ** 2
    freqs = np.fft.rfftfreq(n_times, d=ts[1] - ts[0]) * 2 * math.pi
    rows = [{"frequency": float(a), "power": float(b), "exploratory": "true"} for a, b in zip(freqs, spec)]
    if path is not None:
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=["frequency", "power", "exploratory"])
            w.writeheader()
            w.writerows(rows)
    return rows
