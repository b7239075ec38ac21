"""Eigenvalue extraction, the spiral ordering, and region counting.

Angles throughout use the convention arg z in (0, 2*pi], so a positive real
number has argument 2*pi.  Disks and annuli include their boundary; squares
are half-open (a <= Re z < b, c <= Im z < d).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .ensembles import ComplexMatrix

# Moduli this close to an exact multiple of 1/sqrt(n) are snapped before the
# floor key is taken, keeping the comparator deterministic across platforms.
_SNAP_TOL = 1e-12


class EigensolverError(RuntimeError):
    """Dense eigensolver failed to converge; message carries the seed."""


@dataclass(frozen=True)
class ComplexSpectrum:
    """Ordered eigenvalues; `scaled` means values belong to X / sqrt(n)."""

    values: np.ndarray  # 1-D complex128
    scaled: bool

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.complex128)
        if values.ndim != 1 or values.size == 0:
            raise ValueError("spectrum must be a nonempty 1-D array")
        if not np.all(np.isfinite(values.view(np.float64))):
            raise ValueError("spectrum values must be finite")
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class Disk:
    """Closed disk |z - center| <= radius."""

    center: complex
    radius: float

    def __post_init__(self):
        if self.radius < 0:
            raise ValueError("radius must be nonnegative")

    def contains(self, z: np.ndarray) -> np.ndarray:
        return np.abs(np.asarray(z) - self.center) <= self.radius


@dataclass(frozen=True)
class Square:
    """Half-open axis-aligned square a <= Re z < b, c <= Im z < d."""

    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        side = self.b - self.a
        if side <= 0 or abs(side - (self.d - self.c)) > 1e-12 * max(1.0, abs(side)):
            raise ValueError("square sides must be positive and equal")

    def contains(self, z: np.ndarray) -> np.ndarray:
        z = np.asarray(z)
        re, im = z.real, z.imag
        return (re >= self.a) & (re < self.b) & (im >= self.c) & (im < self.d)


@dataclass(frozen=True)
class Annulus:
    """Closed annulus r_in <= |z| <= r_out about the origin."""

    r_in: float
    r_out: float

    def __post_init__(self):
        if not 0 <= self.r_in <= self.r_out:
            raise ValueError("need 0 <= r_in <= r_out")

    def contains(self, z: np.ndarray) -> np.ndarray:
        mod = np.abs(np.asarray(z))
        return (mod >= self.r_in) & (mod <= self.r_out)


Region = Union[Disk, Square, Annulus]


def arg_in_2pi(z: np.ndarray) -> np.ndarray:
    """Argument in (0, 2*pi]; positive reals map to 2*pi."""
    a = np.angle(z)
    return np.where(a <= 0.0, a + 2.0 * np.pi, a)


def eigenvalues(m: ComplexMatrix, scale: bool, check_residual: bool = False) -> ComplexSpectrum:
    """Dense spectrum of `m`, ordered by (modulus, argument).

    Uses a backward-stable Schur-based general eigensolver.  With `scale`
    the eigenvalues of m / sqrt(n) are returned.  `check_residual` runs an
    inverse-iteration residual assertion on one eigenpair (debug aid).
    """
    try:
        vals = np.linalg.eigvals(m.entries)
    except np.linalg.LinAlgError as exc:
        raise EigensolverError(
            f"eigensolver failed for n={m.n}, dist={m.dist_kind}, seed={m.seed}: {exc}"
        ) from exc
    if check_residual:
        _assert_eigenpair_residual(m.entries, vals)
    if scale:
        vals = vals / math.sqrt(m.n)
    order = np.lexsort((arg_in_2pi(vals), np.abs(vals)))
    return ComplexSpectrum(values=vals[order], scaled=scale)


def _assert_eigenpair_residual(a: np.ndarray, vals: np.ndarray, tol: float = 1e-6):
    """Inverse iteration on the largest eigenvalue; residual <= tol * ||A||."""
    lam = vals[np.argmax(np.abs(vals))]
    n = a.shape[0]
    scale = np.linalg.norm(a, ord="fro") / math.sqrt(n)
    shifted = a - (lam + 1e-10 * (1 + abs(lam))) * np.eye(n)
    v = np.ones(n, dtype=np.complex128) / math.sqrt(n)
    for _ in range(3):
        v = np.linalg.solve(shifted, v)
        v = v / np.linalg.norm(v)
    residual = np.linalg.norm(a @ v - lam * v)
    norm = np.linalg.norm(a, ord=2) if n <= 64 else scale * math.sqrt(n)
    if residual > tol * max(norm, 1.0):
        raise EigensolverError(
            f"eigenpair residual {residual:.3e} exceeds {tol:.1e} * ||A||"
        )


def spiral_key(z: complex, n: int) -> tuple:
    """Sort key for the spiral order: zero first, then (floor key, arg, modulus)."""
    if z == 0:
        return (0, 0, 0.0, 0.0)
    mod = abs(z)
    sqrt_n = math.sqrt(n)
    t = mod * sqrt_n
    nearest = round(t)
    if abs(mod - nearest / sqrt_n) <= _SNAP_TOL:
        floor_key = int(nearest)
    else:
        floor_key = int(math.floor(t))
    arg = math.atan2(z.imag, z.real)
    if arg <= 0.0:
        arg += 2.0 * math.pi
    return (1, floor_key, arg, mod)


def spiral_compare(w: complex, z: complex, n: int) -> int:
    """-1, 0, or +1 as w precedes, equals, or follows z in the spiral order.

    Zero precedes everything nonzero; nonzero points compare
    lexicographically on (floor(sqrt(n)|.|), arg in (0, 2*pi], |.|) and are
    equal only when all three keys tie.
    """
    kw, kz = spiral_key(w, n), spiral_key(z, n)
    if kw < kz:
        return -1
    if kw > kz:
        return 1
    return 0


def _spiral_order(values: np.ndarray, n: int) -> np.ndarray:
    """Stable argsort of `values` under the spiral order (vectorized keys)."""
    mod = np.abs(values)
    sqrt_n = math.sqrt(n)
    t = mod * sqrt_n
    nearest = np.round(t)
    snap = np.abs(mod - nearest / sqrt_n) <= _SNAP_TOL
    floor_key = np.where(snap, nearest, np.floor(t))
    arg = arg_in_2pi(values)
    nonzero = (values != 0).astype(np.int8)
    zero_mask = ~nonzero.astype(bool)
    floor_key = np.where(zero_mask, 0.0, floor_key)
    arg = np.where(zero_mask, 0.0, arg)
    mod = np.where(zero_mask, 0.0, mod)
    return np.lexsort((mod, arg, floor_key, nonzero))


def spiral_sort(s: ComplexSpectrum) -> ComplexSpectrum:
    """Spectrum re-ordered by the spiral order; stable on full-key ties."""
    order = _spiral_order(s.values, s.n)
    return ComplexSpectrum(values=s.values[order], scaled=s.scaled)


def count_in_region(s: ComplexSpectrum, region: Region) -> int:
    """Number of spectrum points inside `region` (boundary per region type)."""
    return int(np.count_nonzero(region.contains(s.values)))


def spectral_radius(s: ComplexSpectrum) -> float:
    """Largest modulus among the spectrum values."""
    return float(np.max(np.abs(s.values)))
