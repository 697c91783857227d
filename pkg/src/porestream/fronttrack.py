"""Front tracking for 1D scalar conservation laws S_t + F(S)_x = 0.

The flux is approximated by a polyline on a uniform saturation grid. For
such a flux the entropy solution of piecewise-constant initial data stays
piecewise constant with finitely many discontinuities: each Riemann problem
resolves into a fan of shocks given by the convex or concave envelope of
the polyline between the two states, fronts move at constant
Rankine-Hugoniot speeds, and collisions spawn new Riemann solutions. The
method is exact in time (no CFL limit) and resolves discontinuities
sharply; its only approximation is the flux grid spacing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import impl as _impl

__all__ = [
    "DEFAULT_RESOLUTION",
    "FluxPolyline",
    "PiecewiseConstantFn",
    "WaveFan",
    "ResolutionError",
    "envelope",
    "evolve",
    "sample",
    "interval_averages",
]

DEFAULT_RESOLUTION = 64


class ResolutionError(RuntimeError):
    """Raised when the collision-event budget is exhausted.

    Usually means the flux grid is too fine for the requested data and
    duration; re-run with a coarser saturation grid or a larger budget.
    """


@dataclass(frozen=True)
class FluxPolyline:
    """Piecewise-linear flux on the uniform saturation grid j/n, j=0..n."""

    values: np.ndarray

    def __post_init__(self):
        vals = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64))
        if vals.ndim != 1 or len(vals) < 2:
            raise ValueError("flux polyline needs at least two node values")
        if not np.all(np.isfinite(vals)):
            raise ValueError("flux polyline values must be finite")
        object.__setattr__(self, "values", vals)

    @classmethod
    def tabulate(cls, fn, resolution: int = DEFAULT_RESOLUTION) -> "FluxPolyline":
        """Sample a callable F(S) at the n+1 nodes of the saturation grid."""
        if resolution < 1:
            raise ValueError("resolution must be at least 1")
        nodes = np.arange(resolution + 1) / resolution
        return cls(values=np.asarray(fn(nodes), dtype=np.float64))

    @property
    def resolution(self) -> int:
        return len(self.values) - 1

    @property
    def dS(self) -> float:
        return 1.0 / self.resolution

    @property
    def nodes(self) -> np.ndarray:
        n = self.resolution
        return np.arange(n + 1) / n

    def snap_index(self, S):
        """Nearest saturation-grid node index for each value."""
        n = self.resolution
        idx = np.rint(np.asarray(S, dtype=np.float64) * n).astype(np.int64)
        return np.clip(idx, 0, n)

    def snap(self, S):
        """Round saturations to the grid the solver actually uses."""
        return self.snap_index(S) / self.resolution

    def __call__(self, S):
        """Polyline value at arbitrary saturations (linear interpolation)."""
        return np.interp(S, self.nodes, self.values)


@dataclass(frozen=True)
class PiecewiseConstantFn:
    """Piecewise-constant profile.

    values[i] holds on [breakpoints[i], breakpoints[i+1]); the first value
    also extends to the left of breakpoints[0], so jumps sit at
    breakpoints[1:]. At a breakpoint the right interval's value applies.
    """

    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        bp = np.ascontiguousarray(np.asarray(self.breakpoints, dtype=np.float64))
        vals = np.ascontiguousarray(np.asarray(self.values, dtype=np.float64))
        if bp.ndim != 1 or vals.shape != bp.shape or len(bp) == 0:
            raise ValueError("breakpoints and values must be equal-length 1D arrays")
        if np.any(np.diff(bp) <= 0.0):
            raise ValueError("breakpoints must be strictly increasing")
        if not np.all(np.isfinite(bp)) or not np.all(np.isfinite(vals)):
            raise ValueError("breakpoints and values must be finite")
        if vals.min() < 0.0 or vals.max() > 1.0:
            raise ValueError("values must lie in [0, 1]")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)

    @classmethod
    def constant(cls, value: float, anchor: float = 0.0) -> "PiecewiseConstantFn":
        return cls(breakpoints=np.array([anchor]), values=np.array([float(value)]))

    def __call__(self, x):
        return sample(self, x)

    def total_variation(self) -> float:
        return float(np.sum(np.abs(np.diff(self.values))))


@dataclass(frozen=True)
class WaveFan:
    """Discontinuities of one Riemann solution, ordered left to right."""

    positions: np.ndarray
    left: np.ndarray
    right: np.ndarray
    speeds: np.ndarray

    def __len__(self) -> int:
        return len(self.speeds)


def envelope(flux: FluxPolyline, S_l: float, S_r: float) -> WaveFan:
    """Riemann solution between two states as a fan of discontinuities.

    The states are snapped to the flux grid first. Wave speeds are the
    chord slopes of the lower convex (S_l < S_r) or upper concave
    (S_l > S_r) envelope of the polyline and increase strictly from left
    to right.
    """
    a = int(flux.snap_index(S_l))
    b = int(flux.snap_index(S_r))
    speeds, states = _impl.riemann_fan(flux.values, flux.dS, a, b)
    n = flux.resolution
    return WaveFan(
        positions=np.zeros(len(speeds)),
        left=states[:-1] / n,
        right=states[1:] / n,
        speeds=speeds,
    )


def evolve(
    initial: PiecewiseConstantFn,
    flux: FluxPolyline,
    duration: float,
    max_events: int = 10_000_000,
) -> PiecewiseConstantFn:
    """Entropy solution at time `duration` for piecewise-constant data.

    Values are snapped to the flux grid. Collisions are processed in
    (time, position) order; the collision count is capped at max_events,
    beyond which ResolutionError is raised.
    """
    if duration < 0.0:
        raise ValueError("duration must be nonnegative")
    bp = initial.breakpoints
    s_idx = np.ascontiguousarray(flux.snap_index(initial.values))
    xj = np.ascontiguousarray(bp[1:])
    x, states, _events, status = _impl.ft_evolve(
        flux.values, flux.dS, xj, s_idx, float(duration), int(max_events)
    )
    if status != 0:
        raise ResolutionError(
            f"front tracking exceeded {max_events} collision events; "
            "use a coarser flux grid or raise the budget"
        )
    n = flux.resolution
    if len(x) == 0:
        return PiecewiseConstantFn(
            breakpoints=bp[:1].copy(), values=states / n
        )
    x = np.maximum.accumulate(x)
    last = np.empty(len(x), dtype=bool)
    last[-1] = True
    last[:-1] = x[1:] > x[:-1]
    pos = x[last]
    vals = np.concatenate((states[:1], states[1:][last])) / n
    jump = vals[:-1] != vals[1:]
    pos = pos[jump]
    vals = np.concatenate((vals[:1], vals[1:][jump]))
    if len(pos) == 0:
        return PiecewiseConstantFn(breakpoints=bp[:1].copy(), values=vals)
    anchor = min(bp[0], pos[0] - 1.0)
    return PiecewiseConstantFn(
        breakpoints=np.concatenate(([anchor], pos)), values=vals
    )


def sample(fn: PiecewiseConstantFn, x):
    """Profile value at x; at a breakpoint the right interval's value."""
    x = np.asarray(x, dtype=np.float64)
    idx = np.searchsorted(fn.breakpoints, x, side="right") - 1
    out = fn.values[np.maximum(idx, 0)]
    return float(out) if x.ndim == 0 else out


def _cumulative(fn: PiecewiseConstantFn, x):
    """Integral of the profile from breakpoints[0] to x (linear extension)."""
    bp = fn.breakpoints
    vals = fn.values
    knots = np.concatenate(([0.0], np.cumsum(vals[:-1] * np.diff(bp))))
    inner = np.interp(x, bp, knots)
    below = x < bp[0]
    above = x > bp[-1]
    out = np.where(below, vals[0] * (x - bp[0]), inner)
    out = np.where(above, knots[-1] + vals[-1] * (x - bp[-1]), out)
    return out


def interval_averages(fn: PiecewiseConstantFn, windows) -> np.ndarray:
    """Mean of the profile over each [lo, hi) window; rows of `windows`.

    Zero-width windows return the sampled value at the point.
    """
    w = np.asarray(windows, dtype=np.float64)
    if w.ndim != 2 or w.shape[1] != 2:
        raise ValueError("windows must have shape (k, 2)")
    if np.any(w[:, 1] < w[:, 0]):
        raise ValueError("window upper bounds must not be below lower bounds")
    lo = w[:, 0]
    hi = w[:, 1]
    width = hi - lo
    flat = width == 0.0
    means = np.empty(len(w))
    if np.any(~flat):
        means[~flat] = (
            _cumulative(fn, hi[~flat]) - _cumulative(fn, lo[~flat])
        ) / width[~flat]
    if np.any(flat):
        means[flat] = sample(fn, lo[flat])
    return means
