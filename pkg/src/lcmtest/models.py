"""Concave distribution functions on the unit interval.

Three families cover every shape the limit machinery distinguishes: the
uniform law (one maximal affine interval), the power family ``u**gamma``
(strictly concave, no affine interval), and piecewise-affine CDFs (any
finite collection of affine intervals).  :class:`IntervalStructure` records
the maximal open intervals on which a concave CDF is affine, with each
interval's width ``d`` and rise ``h``; these drive the limiting laws and
the couplings in :mod:`lcmtest.limits`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .streams import Stream, generator

_TOL = 1e-12


@dataclass(frozen=True)
class UniformCdf:
    """Uniform distribution on [0, 1]: F(u) = u."""


@dataclass(frozen=True)
class PowerCdf:
    """Power distribution F(u) = u**gamma with gamma in (0, 1].

    Strictly concave for gamma < 1; gamma = 1 is the uniform law.
    """

    gamma: float

    def __post_init__(self):
        g = float(self.gamma)
        if not (0.0 < g <= 1.0) or not math.isfinite(g):
            raise ValueError(f"gamma must lie in (0, 1], got {self.gamma!r}")
        object.__setattr__(self, "gamma", g)


@dataclass(frozen=True)
class PiecewiseAffineCdf:
    """Concave piecewise-affine CDF given by knots from (0, 0) to (x_bar, 1).

    Knot abscissas and ordinates increase strictly, segment slopes never
    increase, and adjacent equal-slope segments are merged on construction,
    so each stored segment is a maximal affine stretch.
    """

    xs: tuple
    ys: tuple

    def __post_init__(self):
        xs = [float(v) for v in self.xs]
        ys = [float(v) for v in self.ys]
        if len(xs) != len(ys) or len(xs) < 2:
            raise ValueError("need at least two knots")
        if xs[0] != 0.0 or ys[0] != 0.0:
            raise ValueError("knots must start at (0, 0)")
        if ys[-1] != 1.0:
            raise ValueError("knots must end at height 1")
        if xs[-1] > 1.0:
            raise ValueError("support must be contained in [0, 1]")
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise ValueError("knot abscissas must strictly increase")
        if any(b <= a for a, b in zip(ys, ys[1:])):
            raise ValueError("knot ordinates must strictly increase")
        slopes = [(ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]) for i in range(len(xs) - 1)]
        scale = max(1.0, max(abs(s) for s in slopes))
        merged_x, merged_y = [xs[0]], [ys[0]]
        for i, s in enumerate(slopes):
            if i > 0:
                if s > slopes[i - 1] + _TOL * scale:
                    raise ValueError("slopes increase: the CDF is not concave")
                if abs(s - slopes[i - 1]) <= _TOL * scale:
                    # Same affine stretch: replace the interior knot.
                    merged_x.pop()
                    merged_y.pop()
            merged_x.append(xs[i + 1])
            merged_y.append(ys[i + 1])
        object.__setattr__(self, "xs", tuple(merged_x))
        object.__setattr__(self, "ys", tuple(merged_y))

    @classmethod
    def from_knots(cls, knots) -> "PiecewiseAffineCdf":
        pts = [(float(x), float(y)) for x, y in knots]
        return cls(tuple(x for x, _ in pts), tuple(y for _, y in pts))


ConcaveCdf = Union[UniformCdf, PowerCdf, PiecewiseAffineCdf]


def x_bar(spec: ConcaveCdf) -> float:
    """Left edge of the region where F equals 1."""
    if isinstance(spec, PiecewiseAffineCdf):
        return spec.xs[-1]
    return 1.0


def evaluate(spec: ConcaveCdf, x) -> np.ndarray:
    """F(x) for scalar or array ``x >= 0``; equals 1 beyond the support."""
    x = np.asarray(x, dtype=np.float64)
    if np.any(x < 0.0):
        raise ValueError("evaluation points must be nonnegative")
    capped = np.minimum(x, 1.0)
    if isinstance(spec, UniformCdf):
        out = capped
    elif isinstance(spec, PowerCdf):
        out = np.power(capped, spec.gamma)
    elif isinstance(spec, PiecewiseAffineCdf):
        out = np.interp(capped, spec.xs, spec.ys)
    else:
        raise TypeError(f"not a concave CDF spec: {spec!r}")
    return out if out.ndim else out[()]


def quantile(spec: ConcaveCdf, u) -> np.ndarray:
    """Quantile function F^{-1}(u) for u in [0, 1]."""
    u = np.asarray(u, dtype=np.float64)
    if np.any(u < 0.0) or np.any(u > 1.0):
        raise ValueError("quantile levels must lie in [0, 1]")
    if isinstance(spec, UniformCdf):
        out = u.copy()
    elif isinstance(spec, PowerCdf):
        out = np.power(u, 1.0 / spec.gamma)
    elif isinstance(spec, PiecewiseAffineCdf):
        out = np.interp(u, spec.ys, spec.xs)
    else:
        raise TypeError(f"not a concave CDF spec: {spec!r}")
    return out if out.ndim else out[()]


@dataclass(frozen=True, eq=False)
class IntervalStructure:
    """Maximal open affine intervals of a concave CDF.

    ``(a[k], b[k])`` are the intervals, ``d[k] = b[k] - a[k]`` their widths,
    ``h[k] = F(b[k]) - F(a[k])`` their rises; ``x_bar`` is where F reaches 1.
    The collection may be empty (strictly concave F).
    """

    a: np.ndarray
    b: np.ndarray
    d: np.ndarray
    h: np.ndarray
    x_bar: float

    def __post_init__(self):
        a = np.ascontiguousarray(self.a, dtype=np.float64)
        b = np.ascontiguousarray(self.b, dtype=np.float64)
        d = np.ascontiguousarray(self.d, dtype=np.float64)
        h = np.ascontiguousarray(self.h, dtype=np.float64)
        if not (a.shape == b.shape == d.shape == h.shape) or a.ndim != 1:
            raise ValueError("interval arrays must share one shape")
        xb = float(self.x_bar)
        if not (0.0 < xb <= 1.0):
            raise ValueError("x_bar must lie in (0, 1]")
        if a.size:
            if np.any(b <= a) or np.any(d <= 0.0) or np.any(h <= 0.0):
                raise ValueError("intervals need positive width and rise")
            if np.any(np.abs((b - a) - d) > _TOL):
                raise ValueError("d must equal b - a")
            if np.any(a[1:] < b[:-1] - _TOL):
                raise ValueError("intervals must be sorted and disjoint")
            if a[0] < -_TOL or b[-1] > xb + _TOL:
                raise ValueError("intervals must lie inside (0, x_bar)")
            if d.sum() > xb + _TOL or h.sum() > 1.0 + _TOL:
                raise ValueError("total width/rise cannot exceed x_bar / 1")
        for name, arr in (("a", a), ("b", b), ("d", d), ("h", h)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "x_bar", xb)

    def __len__(self) -> int:
        return int(self.a.size)

    @property
    def is_empty(self) -> bool:
        return self.a.size == 0

    def as_tuples(self) -> list[tuple[float, float, float, float]]:
        return [tuple(map(float, row)) for row in zip(self.a, self.b, self.d, self.h)]


_EMPTY = np.zeros(0)


def extract_intervals(spec: ConcaveCdf) -> IntervalStructure:
    """Affine-interval structure of a concave CDF.

    The uniform law yields the single unit interval, a strictly concave
    power law yields an empty collection, and a piecewise-affine CDF yields
    one interval per stored segment.
    """
    if isinstance(spec, UniformCdf) or (isinstance(spec, PowerCdf) and spec.gamma == 1.0):
        one = np.ones(1)
        return IntervalStructure(np.zeros(1), one, one, one, 1.0)
    if isinstance(spec, PowerCdf):
        return IntervalStructure(_EMPTY, _EMPTY, _EMPTY, _EMPTY, 1.0)
    if isinstance(spec, PiecewiseAffineCdf):
        xs = np.asarray(spec.xs)
        ys = np.asarray(spec.ys)
        return IntervalStructure(xs[:-1], xs[1:], np.diff(xs), np.diff(ys), float(xs[-1]))
    raise TypeError(f"not a concave CDF spec: {spec!r}")


def coupling_lengths(iv: IntervalStructure, p: float) -> np.ndarray:
    """Sub-interval lengths ``d**(2/(p+2)) * h**(p/(p+2))`` for the dominance coupling.

    By the weighted AM-GM inequality each length is at most
    ``2/(p+2) * d + p/(p+2) * h``, so the lengths always sum to at most 1 and
    fit inside the unit interval.  Undefined for ``p = inf``.
    """
    if np.isinf(p):
        raise ValueError("coupling lengths are undefined for p = inf")
    if p < 1.0:
        raise ValueError("norm index p must be at least 1")
    if iv.is_empty:
        raise ValueError("interval structure is empty")
    lengths = np.power(iv.d, 2.0 / (p + 2.0)) * np.power(iv.h, p / (p + 2.0))
    total = float(lengths.sum())
    if total > 1.0 + _TOL:
        raise ValueError(f"coupling lengths sum to {total} > 1; invalid intervals")
    return lengths


def pack_intervals(lengths) -> list[tuple[float, float]]:
    """Pack disjoint intervals of the given lengths left-to-right from 0.

    Any placement works; packing in index order from the origin keeps runs
    reproducible.
    """
    lengths = np.asarray(lengths, dtype=np.float64)
    if lengths.ndim != 1 or lengths.size == 0:
        raise ValueError("need a nonempty 1-d list of lengths")
    if np.any(lengths <= 0.0):
        raise ValueError("lengths must be positive")
    ends = np.cumsum(lengths)
    if ends[-1] > 1.0 + _TOL:
        raise ValueError(f"lengths sum to {float(ends[-1])} > 1")
    starts = np.concatenate(([0.0], ends[:-1]))
    return [(float(a), float(b)) for a, b in zip(starts, ends)]


def inverse_cdf_sample(spec: ConcaveCdf, count: int, stream: Stream) -> np.ndarray:
    """I.i.d. draws from the spec via the inverse-CDF transform.

    Deterministic given the stream token.
    """
    if count < 1:
        raise ValueError("count must be at least 1")
    u = generator(stream).random(count)
    return np.asarray(quantile(spec, u))


def pit_transform(spec: ConcaveCdf, samples) -> np.ndarray:
    """Elementwise F(X_i); uniform when the spec is the true CDF."""
    arr = np.asarray(samples, dtype=np.float64)
    if np.any(arr < 0.0) or np.any(arr > 1.0):
        raise ValueError("samples must lie in [0, 1]")
    return np.asarray(evaluate(spec, arr))


def spec_to_dict(spec: ConcaveCdf) -> dict:
    """Tagged JSON-ready record for a concave CDF spec."""
    if isinstance(spec, UniformCdf):
        return {"type": "uniform"}
    if isinstance(spec, PowerCdf):
        return {"type": "power", "gamma": spec.gamma}
    if isinstance(spec, PiecewiseAffineCdf):
        return {"type": "piecewise", "knots": [[x, y] for x, y in zip(spec.xs, spec.ys)]}
    raise TypeError(f"not a concave CDF spec: {spec!r}")


def spec_from_dict(data: dict) -> ConcaveCdf:
    """Inverse of :func:`spec_to_dict`; validates the spec it builds."""
    if not isinstance(data, dict) or "type" not in data:
        raise ValueError("spec record must be an object with a 'type' field")
    kind = data["type"]
    if kind == "uniform":
        return UniformCdf()
    if kind == "power":
        if "gamma" not in data:
            raise ValueError("power spec needs a 'gamma' field")
        return PowerCdf(data["gamma"])
    if kind == "piecewise":
        if "knots" not in data:
            raise ValueError("piecewise spec needs a 'knots' field")
        return PiecewiseAffineCdf.from_knots(data["knots"])
    raise ValueError(f"unknown spec type {kind!r}")
