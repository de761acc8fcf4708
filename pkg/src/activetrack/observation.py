"""Quantized-Gaussian angle-of-arrival measurement model.

The array is a uniform linear array whose axis points along the robot
heading, so bearings are folded into [0, 180] degrees: a source and its
mirror image across the axis are indistinguishable. Measurement mean and
spread come from a table gridded over (distance, folded AoA) and are
bilinearly interpolated.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.special import ndtr

from ._kernels import table_params
from .kinematics import THETA, X, Y, WorldState, wrap_angle

#: floor applied to likelihood values
LIK_FLOOR = 1e-12

TABLE_HEADER = ["distance_m", "aoa_deg", "mu_deg", "sigma_deg"]


class TableFormatError(ValueError):
    pass


class DegenerateGeometryError(ValueError):
    pass


@dataclass(frozen=True)
class AoaGrid:
    resolution: float = 5.0

    def __post_init__(self):
        if not self.resolution > 0:
            raise ValueError("AoA resolution must be > 0")
        n = 180.0 / self.resolution
        if abs(n - round(n)) > 1e-9:
            raise ValueError(f"180 / resolution must be an integer, got {n}")

    @property
    def num_bins(self) -> int:
        return int(round(180.0 / self.resolution)) + 1

    @property
    def bins(self) -> np.ndarray:
        return np.arange(self.num_bins) * self.resolution

    def edges(self) -> np.ndarray:
        """Bin edges, ``num_bins + 1`` values from -rho/2 to 180 + rho/2."""
        return (np.arange(self.num_bins + 1) - 0.5) * self.resolution


@dataclass(frozen=True)
class Observation:
    bin_index: int
    value: float


@dataclass(frozen=True, eq=False)
class ObservationTable:
    distance_knots: np.ndarray
    aoa_knots: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.distance_knots, dtype=float)
        a = np.asarray(self.aoa_knots, dtype=float)
        mu = np.asarray(self.mu, dtype=float)
        sigma = np.asarray(self.sigma, dtype=float)
        for name, val in (("distance_knots", d), ("aoa_knots", a), ("mu", mu), ("sigma", sigma)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)
        if d.ndim != 1 or a.ndim != 1 or d.size < 1 or a.size < 1:
            raise TableFormatError("knot vectors must be non-empty 1-D arrays")
        if np.any(np.diff(d) <= 0) or np.any(np.diff(a) <= 0):
            raise TableFormatError("knots must be strictly ascending")
        if a[0] < 0 or a[-1] > 180:
            raise TableFormatError("AoA knots must lie in [0, 180]")
        if mu.shape != (d.size, a.size) or sigma.shape != (d.size, a.size):
            raise TableFormatError(
                f"parameter matrices must have shape {(d.size, a.size)}")
        if not np.all(sigma > 0):
            raise TableFormatError("all sigma entries must be > 0")
        if np.any(mu < 0) or np.any(mu > 180):
            raise TableFormatError("mu entries must lie in [0, 180]")

    def __eq__(self, other):
        if not isinstance(other, ObservationTable):
            return NotImplemented
        return all(np.array_equal(getattr(self, f), getattr(other, f))
                   for f in ("distance_knots", "aoa_knots", "mu", "sigma"))

    def save(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write(",".join(TABLE_HEADER) + "\n")
            for i, d in enumerate(self.distance_knots):
                for j, a in enumerate(self.aoa_knots):
                    row = (d, a, self.mu[i, j], self.sigma[i, j])
                    fh.write(",".join(repr(float(x)) for x in row) + "\n")

    @classmethod
    def load(cls, path) -> ObservationTable:
        with open(Path(path), newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != TABLE_HEADER:
                raise TableFormatError(f"bad header {header!r}, expected {TABLE_HEADER!r}")
            try:
                rows = [tuple(float(v) for v in row) for row in reader if row]
            except ValueError as exc:
                raise TableFormatError(f"non-numeric entry: {exc}") from None
        if any(len(r) != 4 for r in rows):
            raise TableFormatError("every row needs 4 columns")
        dists = list(dict.fromkeys(r[0] for r in rows))
        aoas = list(dict.fromkeys(r[1] for r in rows))
        if len(rows) != len(dists) * len(aoas):
            raise TableFormatError("incomplete grid")
        mu = np.empty((len(dists), len(aoas)))
        sigma = np.empty_like(mu)
        for k, (d, a, m, s) in enumerate(rows):
            i, j = divmod(k, len(aoas))
            if d != dists[i] or a != aoas[j]:
                raise TableFormatError(f"row {k + 2} out of distance-major order")
            mu[i, j] = m
            sigma[i, j] = s
        return cls(np.array(dists), np.array(aoas), mu, sigma)


@dataclass(frozen=True)
class SyntheticTableParams:
    sigma0: float = 2.0
    sigma_per_m: float = 1.5
    kappa: float = 2.0
    max_distance: float = 9.0
    distance_step: float = 0.5
    aoa_step: float = 5.0


def synthetic_sigma(distance, aoa, params: SyntheticTableParams):
    return ((params.sigma0 + params.sigma_per_m * np.asarray(distance))
            * (1.0 + params.kappa * np.abs(np.cos(np.radians(aoa)))))


def build_synthetic_table(params: SyntheticTableParams = SyntheticTableParams()) -> ObservationTable:
    """Unbiased table whose spread grows with distance and toward endfire."""
    if not params.sigma0 > 0:
        raise ValueError("sigma0 must be > 0")
    if params.sigma_per_m < 0 or params.kappa < 0:
        raise ValueError("sigma_per_m and kappa must be >= 0")
    n_d = int(round(params.max_distance / params.distance_step)) + 1
    n_a = int(round(180.0 / params.aoa_step)) + 1
    d = np.arange(n_d) * params.distance_step
    a = np.arange(n_a) * params.aoa_step
    dd, aa = np.meshgrid(d, a, indexing="ij")
    return ObservationTable(d, a, aa.copy(), synthetic_sigma(dd, aa, params))


def relative_geometry_batch(robot: np.ndarray, source: np.ndarray):
    """Distance and folded AoA for rows of robot/source ``[x, y, theta, v]``.

    Coincident positions give distance 0 and a bearing of 0 degrees
    relative to the world x-axis (the ``atan2(0, 0)`` convention).
    """
    dx = source[..., X] - robot[..., X]
    dy = source[..., Y] - robot[..., Y]
    dist = np.hypot(dx, dy)
    bearing = np.degrees(np.arctan2(dy, dx))
    folded = np.abs(wrap_angle(bearing - robot[..., THETA]))
    return dist, folded


def relative_geometry(w: WorldState) -> tuple[float, float]:
    if w.robot.x == w.source.x and w.robot.y == w.source.y:
        raise DegenerateGeometryError("degenerate geometry: robot and source coincide")
    d, a = relative_geometry_batch(w.robot.as_array(), w.source.as_array())
    return float(d), float(a)


def _bracket(knots: np.ndarray, q: np.ndarray):
    q = np.clip(q, knots[0], knots[-1])
    if knots.size == 1:
        zero = np.zeros(q.shape, dtype=int)
        return zero, zero, np.zeros(q.shape)
    hi = np.clip(np.searchsorted(knots, q, side="right"), 1, knots.size - 1)
    lo = hi - 1
    frac = (q - knots[lo]) / (knots[hi] - knots[lo])
    return lo, hi, frac


def interpolate_params(table: ObservationTable, distance, folded_aoa):
    """Bilinear (mu, sigma) lookup; queries outside the grid are clamped."""
    d = np.asarray(distance, dtype=float)
    a = np.asarray(folded_aoa, dtype=float)
    i0, i1, fd = _bracket(table.distance_knots, d)
    j0, j1, fa = _bracket(table.aoa_knots, a)

    def lerp2(m):
        top = m[i0, j0] * (1 - fa) + m[i0, j1] * fa
        bot = m[i1, j0] * (1 - fa) + m[i1, j1] * fa
        return top * (1 - fd) + bot * fd

    mu, sigma = lerp2(table.mu), lerp2(table.sigma)
    if mu.ndim == 0:
        return float(mu), float(sigma)
    return mu, sigma


def quantized_gaussian(mu, sigma, grid: AoaGrid) -> np.ndarray:
    """Bin masses of N(mu, sigma^2) over the grid, renormalized to sum to 1.

    Broadcasts over leading dimensions of ``mu``/``sigma``; the last axis
    of the result indexes the bins.
    """
    mu = np.asarray(mu, dtype=float)[..., None]
    sigma = np.asarray(sigma, dtype=float)[..., None]
    cdf = ndtr((grid.edges() - mu) / sigma)
    mass = np.diff(cdf, axis=-1)
    # table means lie in [0, 180], so the bin holding mu always carries mass
    return mass / mass.sum(axis=-1, keepdims=True)


def observation_pmf(table: ObservationTable, grid: AoaGrid, w: WorldState) -> np.ndarray:
    d, a = relative_geometry(w)
    mu, sigma = interpolate_params(table, d, a)
    return quantized_gaussian(mu, sigma, grid)


def params_batch(table: ObservationTable, robot: np.ndarray, source: np.ndarray):
    """Interpolated ``(mu, sigma)`` for matching rows of robot and source states.

    Compiled equivalent of :func:`relative_geometry_batch` followed by
    :func:`interpolate_params`; accepts single rows too.
    """
    robot = np.asarray(robot, dtype=float)
    source = np.asarray(source, dtype=float)
    shape = np.broadcast_shapes(robot.shape, source.shape)[:-1]
    r = np.ascontiguousarray(np.broadcast_to(robot, shape + (4,)).reshape(-1, 4))
    s = np.ascontiguousarray(np.broadcast_to(source, shape + (4,)).reshape(-1, 4))
    mu, sigma = table_params(r, s, table.distance_knots, table.aoa_knots, table.mu, table.sigma)
    return mu.reshape(shape), sigma.reshape(shape)


def pmf_batch(table: ObservationTable, grid: AoaGrid, robot: np.ndarray,
              source: np.ndarray) -> np.ndarray:
    mu, sigma = params_batch(table, robot, source)
    return quantized_gaussian(mu, sigma, grid)


def sample_observation(pmf, rng: np.random.Generator, grid: AoaGrid | None = None) -> Observation:
    """Inverse-CDF draw of one bin."""
    cdf = np.cumsum(pmf)
    idx = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    idx = min(idx, len(cdf) - 1)
    value = float(grid.bins[idx]) if grid is not None else float("nan")
    return Observation(idx, value)


def make_observation(grid: AoaGrid, bin_index: int) -> Observation:
    return Observation(int(bin_index), float(grid.bins[bin_index]))


def likelihood(table: ObservationTable, grid: AoaGrid, w: WorldState, z: Observation) -> float:
    return max(float(observation_pmf(table, grid, w)[z.bin_index]), LIK_FLOOR)


def likelihood_batch(table: ObservationTable, grid: AoaGrid, robot: np.ndarray,
                     source: np.ndarray, bin_index: int) -> np.ndarray:
    """Floored likelihood of one bin for many states.

    Only the bin's own edges and the two outer grid edges are evaluated;
    agrees with :func:`pmf_batch` up to rounding.
    """
    mu, sigma = params_batch(table, robot, source)
    edges = grid.edges()[[0, bin_index, bin_index + 1, -1]]
    cdf = ndtr((edges - np.asarray(mu)[..., None]) / np.asarray(sigma)[..., None])
    mass = (cdf[..., 2] - cdf[..., 1]) / (cdf[..., 3] - cdf[..., 0])
    return np.maximum(mass, LIK_FLOOR)


def gaussian_bin_mass(mu: float, sigma: float, center: float, rho: float) -> float:
    """Unnormalized mass of one bin; handy as an independent check."""
    def phi(x):
        return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))
    return phi((center + rho / 2 - mu) / sigma) - phi((center - rho / 2 - mu) / sigma)
