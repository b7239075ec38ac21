"""Seeded generation of square random matrices with iid entries.

Every supported entry (atom) distribution has mean zero, unit absolute
second moment, and finite moments of all orders; the exact low moments are
available analytically through `atom_moments`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .seeding import make_rng

_PARAM_TOL = 1e-12

BUILTIN_KINDS = ("complex-gaussian", "real-gaussian", "rademacher")


class DistributionError(ValueError):
    """Atom-distribution parameters violate the moment contract."""


@dataclass(frozen=True)
class MomentSummary:
    """Exact analytic moments of an atom distribution."""

    mean: complex
    abs_second: float  # E|xi|^2
    second: complex  # E[xi^2]
    abs_fourth: float  # E|xi|^4


@dataclass(frozen=True)
class AtomDistribution:
    """Entry distribution for an iid matrix.

    `kind` is one of "complex-gaussian", "real-gaussian", "rademacher", or
    "custom-discrete".  Custom distributions are restricted to finite
    support so the moment requirements are checkable analytically at
    construction time.
    """

    kind: str
    atoms: tuple = field(default=())
    probs: tuple = field(default=())

    def __post_init__(self):
        if self.kind in BUILTIN_KINDS:
            if self.atoms or self.probs:
                raise DistributionError(
                    f"kind {self.kind!r} takes no atoms/probs parameters"
                )
            return
        if self.kind != "custom-discrete":
            raise DistributionError(f"unknown distribution kind {self.kind!r}")
        atoms = tuple(complex(a) for a in self.atoms)
        probs = tuple(float(p) for p in self.probs)
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "probs", probs)
        if len(atoms) == 0 or len(atoms) != len(probs):
            raise DistributionError("custom-discrete needs matching nonempty atoms/probs")
        if any(p < 0 for p in probs):
            raise DistributionError("probabilities must be nonnegative")
        if abs(math.fsum(probs) - 1.0) > _PARAM_TOL:
            raise DistributionError("probabilities must sum to 1 within 1e-12")
        mean = sum(p * a for p, a in zip(probs, atoms))
        if abs(mean) > _PARAM_TOL:
            raise DistributionError(f"atom mean must be 0, got {mean}")
        var = math.fsum(p * abs(a) ** 2 for p, a in zip(probs, atoms))
        if abs(var - 1.0) > _PARAM_TOL:
            raise DistributionError(f"atom E|xi|^2 must be 1, got {var}")

    @property
    def is_real(self) -> bool:
        """True when the atom variable is real-valued."""
        if self.kind in ("real-gaussian", "rademacher"):
            return True
        if self.kind == "complex-gaussian":
            return False
        return all(a.imag == 0.0 for a in self.atoms)

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "custom-discrete":
            d["atoms"] = [[a.real, a.imag] for a in self.atoms]
            d["probs"] = list(self.probs)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "AtomDistribution":
        kind = d.get("kind")
        if kind == "custom-discrete":
            atoms = tuple(
                complex(a[0], a[1]) if isinstance(a, (list, tuple)) else complex(a)
                for a in d.get("atoms", ())
            )
            return cls(kind=kind, atoms=atoms, probs=tuple(d.get("probs", ())))
        return cls(kind=kind)


@dataclass(frozen=True)
class ComplexMatrix:
    """Square complex matrix with optional sampling provenance."""

    n: int
    entries: np.ndarray  # shape (n, n), complex128, row-major semantics
    seed: int | None = None
    dist_kind: str | None = None

    def __post_init__(self):
        entries = np.ascontiguousarray(self.entries, dtype=np.complex128)
        if entries.shape != (self.n, self.n):
            raise ValueError(f"entries must be {self.n}x{self.n}, got {entries.shape}")
        if not np.all(np.isfinite(entries.view(np.float64))):
            raise ValueError("matrix entries must be finite")
        object.__setattr__(self, "entries", entries)

    @property
    def trace(self) -> complex:
        return complex(np.trace(self.entries))


def atom_moments(dist: AtomDistribution) -> MomentSummary:
    """Exact analytic moments (mean, E|xi|^2, E[xi^2], E|xi|^4)."""
    if dist.kind == "complex-gaussian":
        # real/imag parts iid N(0, 1/2)
        return MomentSummary(0j, 1.0, 0j, 2.0)
    if dist.kind == "real-gaussian":
        return MomentSummary(0j, 1.0, 1.0 + 0j, 3.0)
    if dist.kind == "rademacher":
        return MomentSummary(0j, 1.0, 1.0 + 0j, 1.0)
    mean = sum(p * a for p, a in zip(dist.probs, dist.atoms))
    abs2 = math.fsum(p * abs(a) ** 2 for p, a in zip(dist.probs, dist.atoms))
    second = sum(p * a * a for p, a in zip(dist.probs, dist.atoms))
    abs4 = math.fsum(p * abs(a) ** 4 for p, a in zip(dist.probs, dist.atoms))
    return MomentSummary(complex(mean), abs2, complex(second), abs4)


def sample_atoms(dist: AtomDistribution, count: int, rng: np.random.Generator) -> np.ndarray:
    """Draw `count` iid atoms as a flat complex array."""
    if dist.kind == "complex-gaussian":
        parts = rng.standard_normal((2, count))
        return (parts[0] + 1j * parts[1]) * np.sqrt(0.5)
    if dist.kind == "real-gaussian":
        return rng.standard_normal(count).astype(np.complex128)
    if dist.kind == "rademacher":
        return (2.0 * rng.integers(0, 2, size=count) - 1.0).astype(np.complex128)
    idx = rng.choice(len(dist.atoms), size=count, p=np.asarray(dist.probs))
    return np.asarray(dist.atoms, dtype=np.complex128)[idx]


def sample_matrix(dist: AtomDistribution, n: int, seed: int) -> ComplexMatrix:
    """Sample an n-by-n matrix with iid entries from `dist`.

    Entry (i, j) is the (i*n + j)-th draw of a counter-based stream keyed by
    `seed`, so the fill is independent of traversal order and identical
    (dist, n, seed) triples yield bit-identical matrices.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = make_rng(seed)
    entries = sample_atoms(dist, n * n, rng).reshape(n, n)
    return ComplexMatrix(n=n, entries=entries, seed=seed, dist_kind=dist.kind)
