"""Wasserstein-1 machinery for equal-size empirical measures.

`w1_exact` solves the min-cost perfect matching (the W1 optimum for uniform
empirical measures of equal size); `grid_pairing` builds the cheaper
cell-by-cell coupling whose cost always dominates the exact value.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .seeding import derive_seed64, make_rng

DEFAULT_EXACT_CAP = 4096


class TransportCapError(ValueError):
    """Instance exceeds the configured size cap of the exact solver."""


@dataclass(frozen=True)
class GridSpec:
    """Partition of the square [-C, C)^2 into cells_per_axis^2 equal cells."""

    bound: float  # C: half-side of the covering square, > 1
    cells_per_axis: int
    cell_side: float

    def __post_init__(self):
        if self.bound <= 1.0:
            raise ValueError("grid bound C must exceed 1")
        if self.cells_per_axis < 1:
            raise ValueError("cells_per_axis must be >= 1")
        if abs(self.cell_side * self.cells_per_axis - 2.0 * self.bound) > 1e-9:
            raise ValueError("cell_side * cells_per_axis must equal 2C")

    @property
    def cell_count(self) -> int:
        return self.cells_per_axis ** 2

    def cell_indices(self, points: np.ndarray) -> np.ndarray:
        """Cell id per point; points outside [-C, C)^2 get the overflow id.

        Real cells are numbered 0 .. cell_count-1 row by row; the synthetic
        overflow cell is cell_count.
        """
        points = np.asarray(points, dtype=np.complex128)
        ix = np.floor((points.real + self.bound) / self.cell_side).astype(np.int64)
        iy = np.floor((points.imag + self.bound) / self.cell_side).astype(np.int64)
        m = self.cells_per_axis
        inside = (ix >= 0) & (ix < m) & (iy >= 0) & (iy < m)
        return np.where(inside, iy * m + ix, self.cell_count)


@dataclass(frozen=True)
class TransportResult:
    """Pairing permutation and its average transport cost.

    `permutation[k]` is the 0-based index in `b` matched to `a[k]`, and
    `value` is (1/n) * sum_k |a_k - b_perm(k)|.  `bad_count` and
    `per_cell_counts` are populated by the grid method only; the last entry
    of `per_cell_counts` is the overflow cell.
    """

    permutation: np.ndarray
    value: float
    bad_count: int | None = None
    per_cell_counts: tuple | None = None


def _as_points(a) -> np.ndarray:
    arr = np.ascontiguousarray(a, dtype=np.complex128)
    if arr.ndim != 1:
        raise ValueError("point sets must be 1-D")
    return arr


def w1_exact(a, b, cap: int = DEFAULT_EXACT_CAP) -> TransportResult:
    """Exact W1 between the uniform empirical measures of a and b.

    Solves the assignment problem on the |a_i - b_j| cost matrix; O(n^3),
    capped at `cap` points (default 4096, a few minutes at the cap).
    """
    a, b = _as_points(a), _as_points(b)
    n = a.size
    if n != b.size:
        raise ValueError(f"point sets must have equal size, got {n} and {b.size}")
    if n == 0:
        raise ValueError("point sets must be nonempty")
    if n > cap:
        raise TransportCapError(f"n={n} exceeds exact-solver cap {cap}")
    cost = np.abs(a[:, None] - b[None, :])
    rows, cols = linear_sum_assignment(cost)
    perm = np.empty(n, dtype=np.int64)
    perm[rows] = cols
    value = float(cost[np.arange(n), perm].sum() / n)
    return TransportResult(permutation=perm, value=value)


def grid_pairing(a, b, grid: GridSpec) -> TransportResult:
    """Cell-by-cell coupling of a to b on `grid`.

    Within each cell the first min(count_a, count_b) points pair in
    ascending index order; leftovers pair in ascending index order across
    the whole set.  An index is bad when its pair is not co-located in a
    real cell (leftover pairs and overflow-cell pairs).  The reported value
    always dominates `w1_exact` on the same inputs.
    """
    a, b = _as_points(a), _as_points(b)
    n = a.size
    if n != b.size:
        raise ValueError(f"point sets must have equal size, got {n} and {b.size}")
    if n == 0:
        raise ValueError("point sets must be nonempty")
    cells_a = grid.cell_indices(a)
    cells_b = grid.cell_indices(b)
    buckets_a, buckets_b = defaultdict(list), defaultdict(list)
    for k, c in enumerate(cells_a):
        buckets_a[int(c)].append(k)
    for k, c in enumerate(cells_b):
        buckets_b[int(c)].append(k)

    perm = np.full(n, -1, dtype=np.int64)
    paired_b = np.zeros(n, dtype=bool)
    bad = np.zeros(n, dtype=bool)
    per_cell = []
    overflow = grid.cell_count
    for cell in range(overflow + 1):
        ia, ib = buckets_a.get(cell, []), buckets_b.get(cell, [])
        per_cell.append((len(ia), len(ib)))
        k = min(len(ia), len(ib))
        for src, dst in zip(ia[:k], ib[:k]):
            perm[src] = dst
            paired_b[dst] = True
            if cell == overflow:
                bad[src] = True
    leftover_a = np.flatnonzero(perm == -1)
    leftover_b = np.flatnonzero(~paired_b)
    perm[leftover_a] = leftover_b
    bad[leftover_a] = True

    value = float(np.abs(a - b[perm]).sum() / n)
    return TransportResult(
        permutation=perm,
        value=value,
        bad_count=int(bad.sum()),
        per_cell_counts=tuple(per_cell),
    )


def cell_counts(points, grid: GridSpec) -> np.ndarray:
    """Occupancy of every grid cell; the last entry is the overflow cell."""
    cells = grid.cell_indices(_as_points(points))
    return np.bincount(cells, minlength=grid.cell_count + 1)


def default_grid(n: int, bound: float = 1.25) -> GridSpec:
    """Grid whose cell side is at most n^(-1/4) in scaled coordinates."""
    if n < 1:
        raise ValueError("n must be >= 1")
    target = 2.0 * bound * n ** 0.25
    m = math.ceil(target - 1e-9)  # guard against float fuzz just above an integer
    return GridSpec(bound=bound, cells_per_axis=m, cell_side=2.0 * bound / m)


def disk_points(rng: np.random.Generator, shape) -> np.ndarray:
    """Uniform draws from the closed unit disk (radius sqrt(u), angle uniform)."""
    radius = np.sqrt(rng.random(shape))
    theta = 2.0 * np.pi * rng.random(shape)
    return radius * np.exp(1j * theta)


def uniform_disk_sample(count: int, seed: int) -> np.ndarray:
    """`count` iid uniform points on the closed unit disk."""
    if count < 1:
        raise ValueError("count must be >= 1")
    return disk_points(make_rng(seed), count)


def w1_to_disk_samples(points, reps: int, seed: int, cap: int = DEFAULT_EXACT_CAP) -> np.ndarray:
    """Per-replicate exact W1 values against fresh uniform-disk samples."""
    points = _as_points(points)
    if reps < 1:
        raise ValueError("reps must be >= 1")
    values = np.empty(reps)
    for r in range(reps):
        ref = uniform_disk_sample(points.size, derive_seed64(seed, "disk-rep", r))
        values[r] = w1_exact(points, ref, cap=cap).value
    return values


def w1_to_disk(points, method: str = "sample", reps: int = 1, seed: int = 0,
               cap: int = DEFAULT_EXACT_CAP) -> float:
    """Estimated W1 from the empirical measure of `points` to the disk law.

    method "lattice" matches against the predicted-location lattice (bias =
    lattice-to-disk distance); method "sample" averages exact matchings
    against `reps` independent uniform-disk samples.
    """
    points = _as_points(points)
    if method == "lattice":
        from .lattice import lattice

        return w1_exact(points, lattice(points.size).points, cap=cap).value
    if method == "sample":
        return float(w1_to_disk_samples(points, reps, seed, cap=cap).mean())
    raise ValueError(f"unknown method {method!r}")
