"""One-dimensional feature distributions.

Three families are supported: Gaussian, Beta on [0, 1] and a tabulated
density given on a grid with linear interpolation. All methods accept
scalars or numpy arrays and return the same shape.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple

import numpy as np
from scipy import special

CLAMP_SIGMAS = 12.0
MLR_GRID = 2048
DENSITY_FLOOR = 1e-12

_SQRT2 = math.sqrt(2.0)
_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def _is_scalar(x) -> bool:
    t = type(x)
    return t is float or t is int or t is np.float64


def _out(values, like):
    if np.ndim(like) == 0:
        return float(values)
    return values


class FeatureDistribution:
    """Common interface. Subclasses implement the vectorised primitives."""

    kind = "abstract"

    def pdf(self, x):
        raise NotImplementedError

    def logpdf(self, x):
        with np.errstate(divide="ignore"):
            return _out(np.log(np.asarray(self.pdf(x), dtype=float)), x)

    def cdf(self, x):
        raise NotImplementedError

    def sf(self, x):
        return _out(1.0 - np.asarray(self.cdf(x), dtype=float), x)

    def quantile(self, p):
        raise NotImplementedError

    def isf(self, q):
        """Smallest x with P(X >= x) <= q, i.e. ``quantile(1 - q)``."""
        return self.quantile(_out(1.0 - np.asarray(q, dtype=float), q))

    @property
    def support(self) -> tuple[float, float]:
        """Finite effective support used for bracketing and tabulation."""
        raise NotImplementedError

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class Gaussian(FeatureDistribution):
    mean: float
    stddev: float
    kind = "gaussian"

    def __post_init__(self):
        if not (math.isfinite(self.mean) and math.isfinite(self.stddev)):
            raise ValueError("gaussian parameters must be finite")
        if self.stddev <= 0:
            raise ValueError("stddev must be positive")

    def pdf(self, x):
        if _is_scalar(x):
            z = (x - self.mean) / self.stddev
            return math.exp(-0.5 * z * z - _LOG_SQRT_2PI) / self.stddev
        z = (np.asarray(x, dtype=float) - self.mean) / self.stddev
        return np.exp(-0.5 * z * z - _LOG_SQRT_2PI) / self.stddev

    def logpdf(self, x):
        if _is_scalar(x):
            z = (x - self.mean) / self.stddev
            return -0.5 * z * z - _LOG_SQRT_2PI - math.log(self.stddev)
        z = (np.asarray(x, dtype=float) - self.mean) / self.stddev
        return -0.5 * z * z - _LOG_SQRT_2PI - math.log(self.stddev)

    def cdf(self, x):
        if _is_scalar(x):
            return 0.5 * math.erfc(-(x - self.mean) / (self.stddev * _SQRT2))
        return special.ndtr((np.asarray(x, dtype=float) - self.mean) / self.stddev)

    def sf(self, x):
        if _is_scalar(x):
            return 0.5 * math.erfc((x - self.mean) / (self.stddev * _SQRT2))
        return special.ndtr((self.mean - np.asarray(x, dtype=float)) / self.stddev)

    def quantile(self, p):
        lo, hi = self.support
        if _is_scalar(p):
            return lo if p <= 0 else hi if p >= 1 else self.mean + self.stddev * special.ndtri(p)
        z = self.mean + self.stddev * special.ndtri(p)
        z = np.where(np.asarray(p) <= 0.0, lo, np.where(np.asarray(p) >= 1.0, hi, z))
        return _out(z, p)

    def isf(self, q):
        lo, hi = self.support
        if _is_scalar(q):
            return hi if q <= 0 else lo if q >= 1 else self.mean - self.stddev * special.ndtri(q)
        z = self.mean - self.stddev * special.ndtri(q)
        z = np.where(np.asarray(q) <= 0.0, hi, np.where(np.asarray(q) >= 1.0, lo, z))
        return _out(z, q)

    @property
    def support(self):
        w = CLAMP_SIGMAS * self.stddev
        return (self.mean - w, self.mean + w)

    def to_dict(self):
        return {"kind": "gaussian", "mean": self.mean, "stddev": self.stddev}


@dataclass(frozen=True)
class Beta(FeatureDistribution):
    a: float
    b: float
    kind = "beta"

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0) or not math.isfinite(self.a + self.b):
            raise ValueError("beta shapes must be positive and finite")

    @cached_property
    def _log_norm(self) -> float:
        return float(special.betaln(self.a, self.b))

    def logpdf(self, x):
        if _is_scalar(x):
            if not 0.0 <= x <= 1.0:
                return -math.inf
            if (x == 0.0 and self.a < 1.0) or (x == 1.0 and self.b < 1.0):
                return math.inf
            with np.errstate(divide="ignore"):
                return float(special.xlogy(self.a - 1.0, x) + special.xlog1py(self.b - 1.0, -x)
                             - self._log_norm)
        xa = np.asarray(x, dtype=float)
        inside = (xa >= 0.0) & (xa <= 1.0)
        xc = np.clip(xa, 0.0, 1.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            val = (special.xlogy(self.a - 1.0, xc) + special.xlog1py(self.b - 1.0, -xc)
                   - special.betaln(self.a, self.b))
        return _out(np.where(inside, val, -np.inf), x)

    def pdf(self, x):
        if _is_scalar(x):
            return math.exp(self.logpdf(x))
        return _out(np.exp(np.asarray(self.logpdf(x))), x)

    # scalar arguments skip the array clipping, which dominates the cost of
    # a single special-function call
    def cdf(self, x):
        if _is_scalar(x):
            return float(special.betainc(self.a, self.b, min(max(x, 0.0), 1.0)))
        return _out(special.betainc(self.a, self.b, np.clip(x, 0.0, 1.0)), x)

    def sf(self, x):
        if _is_scalar(x):
            return float(special.betaincc(self.a, self.b, min(max(x, 0.0), 1.0)))
        return _out(special.betaincc(self.a, self.b, np.clip(x, 0.0, 1.0)), x)

    def quantile(self, p):
        if _is_scalar(p):
            return float(special.betaincinv(self.a, self.b, min(max(p, 0.0), 1.0)))
        return _out(special.betaincinv(self.a, self.b, np.clip(p, 0.0, 1.0)), p)

    def isf(self, q):
        if _is_scalar(q):
            return float(special.betainccinv(self.a, self.b, min(max(q, 0.0), 1.0)))
        return _out(special.betainccinv(self.a, self.b, np.clip(q, 0.0, 1.0)), q)

    @property
    def support(self):
        return (0.0, 1.0)

    def to_dict(self):
        return {"kind": "beta", "a": self.a, "b": self.b}


@dataclass(frozen=True, eq=False)
class Tabulated(FeatureDistribution):
    """Piecewise-linear density on a grid, renormalised to unit mass.

    The CDF is the exact integral of the interpolant, so it is piecewise
    quadratic and the quantile is available in closed form.
    """

    grid: np.ndarray
    density: np.ndarray
    _cum: np.ndarray = field(init=False, repr=False)
    kind = "tabulated"

    def __post_init__(self):
        g = np.array(self.grid, dtype=float)
        d = np.array(self.density, dtype=float)
        if g.ndim != 1 or g.shape != d.shape or g.size < 2:
            raise ValueError("grid and density must be 1-d arrays of equal length >= 2")
        if not np.all(np.isfinite(g)) or not np.all(np.isfinite(d)):
            raise ValueError("grid and density must be finite")
        if np.any(np.diff(g) <= 0):
            raise ValueError("grid must be strictly increasing")
        if np.any(d < 0):
            raise ValueError("density values must be non-negative")
        cells = 0.5 * (d[1:] + d[:-1]) * np.diff(g)
        total = cells.sum()
        if total <= 0:
            raise ValueError("density has zero mass")
        d = d / total
        cum = np.concatenate(([0.0], np.cumsum(cells / total)))
        cum[-1] = 1.0
        for name, val in (("grid", g), ("density", d), ("_cum", cum)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    def pdf(self, x):
        return _out(np.interp(x, self.grid, self.density, left=0.0, right=0.0), x)

    def cdf(self, x):
        g, d, c = self.grid, self.density, self._cum
        xa = np.asarray(x, dtype=float)
        i = np.clip(np.searchsorted(g, xa, side="right") - 1, 0, g.size - 2)
        h = g[i + 1] - g[i]
        t = np.clip(xa - g[i], 0.0, h)
        slope = (d[i + 1] - d[i]) / h
        val = c[i] + d[i] * t + 0.5 * slope * t * t
        val = np.where(xa <= g[0], 0.0, np.where(xa >= g[-1], 1.0, val))
        return _out(np.clip(val, 0.0, 1.0), x)

    def quantile(self, p):
        g, d, c = self.grid, self.density, self._cum
        pa = np.clip(np.asarray(p, dtype=float), 0.0, 1.0)
        k = np.clip(np.searchsorted(c, pa, side="left"), 1, g.size - 1)
        i = k - 1
        h = g[k] - g[i]
        r = np.maximum(pa - c[i], 0.0)
        slope = (d[k] - d[i]) / h
        disc = np.maximum(d[i] * d[i] + 2.0 * slope * r, 0.0)
        denom = d[i] + np.sqrt(disc)
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(denom > 0, 2.0 * r / denom, 0.0)
        x = g[i] + np.clip(t, 0.0, h)
        x = np.where(pa <= 0.0, g[0], x)
        return _out(x, p)

    @property
    def support(self):
        return (float(self.grid[0]), float(self.grid[-1]))

    @property
    def has_flat_segments(self) -> bool:
        """True when the CDF is flat somewhere strictly inside the support."""
        pos = np.flatnonzero(self.density > 0)
        inner = self.density[pos[0]:pos[-1] + 1]
        return bool(np.any((inner[1:] == 0) & (inner[:-1] == 0)))

    def __eq__(self, other):
        return (isinstance(other, Tabulated) and np.array_equal(self.grid, other.grid)
                and np.array_equal(self.density, other.density))

    def __hash__(self):
        return hash((self.grid.tobytes(), self.density.tobytes()))

    def to_dict(self):
        return {"kind": "tabulated", "grid": self.grid.tolist(),
                "density": self.density.tolist()}


class MLRCheck(NamedTuple):
    ok: bool
    first_violation: float | None


def common_support(g0: FeatureDistribution, g1: FeatureDistribution,
                   grid_size: int = MLR_GRID) -> tuple[float, float]:
    """Interval where both densities exceed the floor."""
    lo = max(g0.support[0], g1.support[0])
    hi = min(g0.support[1], g1.support[1])
    if not lo < hi:
        raise ValueError("distributions have empty common support")
    x = np.linspace(lo, hi, max(grid_size, 2))
    mask = (np.asarray(g0.pdf(x)) > DENSITY_FLOOR) & (np.asarray(g1.pdf(x)) > DENSITY_FLOOR)
    if not mask.any():
        raise ValueError("distributions have empty common support")
    idx = np.flatnonzero(mask)
    lo_i, hi_i = idx[0], idx[-1]
    # widen by one cell so the end points are not lost to the coarse scan
    a = x[max(lo_i - 1, 0)]
    b = x[min(hi_i + 1, x.size - 1)]
    fine = np.linspace(a, b, 4 * max(grid_size, 2))
    m = (np.asarray(g0.pdf(fine)) > DENSITY_FLOOR) & (np.asarray(g1.pdf(fine)) > DENSITY_FLOOR)
    j = np.flatnonzero(m)
    return float(fine[j[0]]), float(fine[j[-1]])


def verify_mlr(g0: FeatureDistribution, g1: FeatureDistribution,
               grid_size: int = MLR_GRID) -> MLRCheck:
    """Check that g1/g0 is strictly increasing on the common support."""
    if grid_size < 2:
        raise ValueError("grid_size must be at least 2")
    lo, hi = common_support(g0, g1, grid_size)
    x = np.linspace(lo, hi, grid_size)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.asarray(g1.logpdf(x)) - np.asarray(g0.logpdf(x))
    ok = np.isfinite(ratio)
    xs, rs = x[ok], ratio[ok]
    bad = np.flatnonzero(np.diff(rs) <= 0)
    if bad.size:
        return MLRCheck(False, float(xs[bad[0] + 1]))
    return MLRCheck(True, None)


def from_dict(spec: dict, path: str = "distribution") -> FeatureDistribution:
    """Build a distribution from a config literal; errors name the field path."""
    if not isinstance(spec, dict):
        raise ValueError(f"{path}: expected an object")
    kind = str(spec.get("kind", "")).lower()
    try:
        if kind == "gaussian":
            return Gaussian(float(spec["mean"]), float(spec["stddev"]))
        if kind == "beta":
            return Beta(float(spec["a"]), float(spec["b"]))
        if kind == "tabulated":
            return Tabulated(np.asarray(spec["grid"], dtype=float),
                             np.asarray(spec["density"], dtype=float))
    except KeyError as exc:
        raise ValueError(f"{path}.{exc.args[0]}: missing field") from None
    except (TypeError, ValueError) as exc:
        raise ValueError(f"{path}: {exc}") from None
    raise ValueError(f"{path}.kind: unknown distribution kind {spec.get('kind')!r}")
