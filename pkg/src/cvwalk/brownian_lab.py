"""Discretized Brownian paths, grid sign-integral transforms, first-passage
embedding of walks, and path distance metrics.

The grid transform sends increments to sgn(value) * increment with the
convention sgn(0) = -1 (grid values vanish only at the origin). Iterating it
is the discrete stand-in for iterating the continuous Levy transform
B -> integral of sgn(B) dB.

`embed_walk` extracts the walk of successive +-(1/sqrt(n)) level crossings.
Levels are snapped to the lattice (1/sqrt(n)) * Z rather than reset to the
observed value at each hit, so overshoot does not accumulate and the
extracted steps are exactly +-1.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import _kernels
from .walk_core import IncrementPath, RngSpec, scaled_eval_many

__all__ = [
    "BrownianGrid",
    "EmbeddedWalk",
    "sample_brownian",
    "levy_transform_grid",
    "iterate_levy",
    "embed_walk",
    "grid_evaluator",
    "walk_evaluator",
    "sup_distance",
    "du_metric",
    "read_grid_binary",
    "write_grid_binary",
]

PathEvaluator = Callable[[np.ndarray], np.ndarray]


class BrownianGrid:
    """A path sampled on the uniform grid 0, dt, 2*dt, ...; value 0 at 0."""

    __slots__ = ("_dt", "_values")

    def __init__(self, dt: float, values):
        if dt <= 0:
            raise ValueError("dt must be positive")
        arr = np.asarray(values, dtype=np.float64)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("values must be a nonempty 1-d array")
        if arr[0] != 0.0:
            raise ValueError("grid must start at value 0")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "_dt", float(dt))
        object.__setattr__(self, "_values", arr)

    @property
    def dt(self) -> float:
        return self._dt

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def horizon(self) -> float:
        return (len(self._values) - 1) * self._dt

    def times(self) -> np.ndarray:
        return np.arange(len(self._values)) * self._dt

    def __len__(self) -> int:
        return len(self._values)

    def __repr__(self) -> str:
        return f"BrownianGrid(dt={self._dt!r}, points={len(self)})"

    def __setattr__(self, name, value):
        raise AttributeError("BrownianGrid is immutable")


@dataclass(frozen=True)
class EmbeddedWalk:
    """First-passage skeleton of a grid at level spacing 1/sqrt(n).

    hit_indices are the grid indices of successive crossings, times are the
    same in grid time, and walk holds the +-1 crossing signs. The k-th
    snapped level is (sum of the first k signs) / sqrt(n).
    """

    n: int
    hit_indices: np.ndarray
    walk: IncrementPath
    times: np.ndarray

    def levels(self) -> np.ndarray:
        return self.walk.positions() / math.sqrt(self.n)


def sample_brownian(horizon: float, dt: float, rng: RngSpec) -> BrownianGrid:
    """Grid path with independent centered Gaussian increments of variance dt.

    Produces ceil(horizon / dt) + 1 values; reproducible per RngSpec.
    """
    if dt <= 0 or horizon <= 0:
        raise ValueError("horizon and dt must be positive")
    if dt > horizon:
        raise ValueError("dt must not exceed horizon")
    n_inc = math.ceil(horizon / dt)
    gen = rng.generator()
    increments = gen.normal(0.0, math.sqrt(dt), size=n_inc)
    values = np.empty(n_inc + 1, dtype=np.float64)
    values[0] = 0.0
    np.cumsum(increments, out=values[1:])
    return BrownianGrid(dt, values)


def levy_transform_grid(grid: BrownianGrid) -> BrownianGrid:
    """One grid transform: increment i becomes sgn(value_i) * increment_i,
    with sgn(0) = -1."""
    v = grid.values
    signs = np.where(v[:-1] > 0, 1.0, -1.0)
    out = np.empty_like(v)
    out[0] = 0.0
    np.cumsum(signs * np.diff(v), out=out[1:])
    return BrownianGrid(grid.dt, out)


def iterate_levy(grid: BrownianGrid, h: int) -> BrownianGrid:
    """h-fold grid transform; h = 0 returns the grid unchanged."""
    if h < 0:
        raise ValueError("h must be nonnegative")
    for _ in range(h):
        grid = levy_transform_grid(grid)
    return grid


def embed_walk(grid: BrownianGrid, n: int) -> EmbeddedWalk:
    """Scan the grid for successive crossings of snapped levels 1/sqrt(n)
    apart. A grid that ends early simply yields a shorter walk."""
    if n <= 0:
        raise ValueError("embedding level n must be positive")
    delta = 1.0 / math.sqrt(n)
    idx, signs = _kernels.embed_scan(grid.values, delta)
    return EmbeddedWalk(
        n=n,
        hit_indices=idx,
        walk=IncrementPath(signs),
        times=idx * grid.dt,
    )


def grid_evaluator(grid: BrownianGrid) -> PathEvaluator:
    """Linear-interpolation evaluator over the grid nodes."""
    nodes = grid.times()
    values = grid.values
    horizon = grid.horizon

    def evaluate(ts: np.ndarray) -> np.ndarray:
        ts = np.asarray(ts, dtype=np.float64)
        if ts.size and (ts.min() < 0 or ts.max() > horizon):
            raise ValueError("evaluation time outside grid domain")
        return np.interp(ts, nodes, values)

    return evaluate


def walk_evaluator(path: IncrementPath, n: int) -> PathEvaluator:
    """Evaluator of the diffusively rescaled walk t -> S(n*t) / sqrt(n)."""

    def evaluate(ts: np.ndarray) -> np.ndarray:
        return scaled_eval_many(path, n, np.asarray(ts, dtype=np.float64))

    return evaluate


def _probe_times(horizon: float, probe_dt: float) -> np.ndarray:
    if probe_dt <= 0:
        raise ValueError("probe_dt must be positive")
    m = int(math.floor(horizon / probe_dt + 1e-9))
    return np.arange(m + 1) * probe_dt


def sup_distance(f: PathEvaluator, g: PathEvaluator, horizon: float, probe_dt: float) -> float:
    """Max of |f - g| over the probe grid 0, probe_dt, ..., horizon."""
    ts = _probe_times(horizon, probe_dt)
    return float(np.max(np.abs(f(ts) - g(ts))))


def du_metric(f: PathEvaluator, g: PathEvaluator, n_terms: int, probe_dt: float) -> float:
    """Truncated weighted sup-distance sum over horizons 1..n_terms:
    sum of 2^-m * min(1, sup over [0, m] of |f - g|). Always < 1."""
    if n_terms < 1:
        raise ValueError("n_terms must be at least 1")
    total = 0.0
    for m in range(1, n_terms + 1):
        total += 2.0 ** (-m) * min(1.0, sup_distance(f, g, float(m), probe_dt))
    return total


def write_grid_binary(grid: BrownianGrid, file) -> None:
    """Binary layout: little-endian float64 dt, int64 count, then count
    little-endian float64 values."""
    with open(file, "wb") as fh:
        fh.write(struct.pack("<dq", grid.dt, len(grid)))
        fh.write(grid.values.astype("<f8").tobytes())


def read_grid_binary(file) -> BrownianGrid:
    with open(file, "rb") as fh:
        header = fh.read(16)
        if len(header) != 16:
            raise ValueError("truncated grid file: missing header")
        dt, count = struct.unpack("<dq", header)
        payload = fh.read()
    if len(payload) != 8 * count:
        raise ValueError(f"truncated grid file: expected {count} values")
    values = np.frombuffer(payload, dtype="<f8").astype(np.float64)
    return BrownianGrid(dt, values)
