"""Seeded, persisted experiment pipelines and their result emission.

Each pipeline draws all randomness from seeds derived per replicate and per
stream (matrix draws and index-set draws are separate streams), so re-runs
are byte-identical regardless of how many workers execute the replicates.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.special import gammaln

from .ensembles import AtomDistribution, atom_moments, sample_matrix
from .seeding import derive_seed64, make_rng
from .spectral import EigensolverError, eigenvalues, spectral_radius
from .stats import (
    LimitSpec,
    disk_moments,
    ginibre_variance,
    ks_two_sample,
    limit_sampler_fixed_K,
    linear_statistic,
    partial_statistic,
    sample_index_set,
    function_by_id,
)
from .transport import cell_counts, default_grid, w1_to_disk_samples

log = logging.getLogger(__name__)

EXPERIMENT_KINDS = (
    "partial-fixed-K",
    "partial-growing-K",
    "full-clt",
    "wasserstein-decay",
    "local-law-cells",
    "thinning-bound",
)

# At most this fraction of replicates may be skipped due to solver failures.
MAX_SKIP_FRACTION = 0.01


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    """Single JSON-expressible description of an experiment run."""

    kind: str
    ensemble: AtomDistribution = field(
        default_factory=lambda: AtomDistribution("complex-gaussian")
    )
    n_list: tuple = (256,)
    k: int | None = None
    k_divisor: float = 1.2  # growing-K rule: max(1, floor(n^(1/4) / divisor))
    allow_large_k: bool = False
    f_id: str = "re"
    replicates: int = 100
    base_seed: int = 1
    threads: int = 1
    method: str = "sample"  # wasserstein only: "sample" or "lattice"
    w1_reps: int = 1
    grid_bound: float = 1.25
    n_max: int = 60  # thinning-bound only

    def __post_init__(self):
        if self.kind not in EXPERIMENT_KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}")
        if not self.n_list or any(int(n) < 1 for n in self.n_list):
            raise ConfigError("n_list must be a nonempty list of positive integers")
        object.__setattr__(self, "n_list", tuple(int(n) for n in self.n_list))
        if self.replicates < 1:
            raise ConfigError("replicates must be >= 1")
        if self.base_seed < 0:
            raise ConfigError("base_seed must be nonnegative")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if self.method not in ("sample", "lattice"):
            raise ConfigError(f"unknown wasserstein method {self.method!r}")
        if self.kind == "partial-fixed-K":
            k = 1 if self.k is None else self.k
            if k < 1 or any(k > n for n in self.n_list):
                raise ConfigError(f"fixed K={k} must satisfy 1 <= K <= n")
            object.__setattr__(self, "k", k)
        if self.kind == "partial-growing-K" and not self.allow_large_k:
            for n in self.n_list:
                k = self.k_for(n)
                if k > n ** 0.25 + 1e-9:
                    raise ConfigError(
                        f"K={k} at n={n} exceeds the n^(1/4) growth budget; "
                        "set allow_large_k to override"
                    )

    def k_for(self, n: int) -> int:
        """Thinning size at matrix size n under this configuration."""
        if self.kind == "partial-fixed-K":
            return self.k
        if self.k is not None:
            return self.k
        return max(1, math.floor(n ** 0.25 / self.k_divisor))

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "ensemble": self.ensemble.to_dict(),
            "n_list": list(self.n_list),
            "k": self.k,
            "k_divisor": self.k_divisor,
            "allow_large_k": self.allow_large_k,
            "f": self.f_id,
            "replicates": self.replicates,
            "base_seed": self.base_seed,
            "method": self.method,
            "w1_reps": self.w1_reps,
            "grid_bound": self.grid_bound,
            "n_max": self.n_max,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        ensemble = d.get("ensemble", {"kind": "complex-gaussian"})
        if isinstance(ensemble, dict):
            ensemble = AtomDistribution.from_dict(ensemble)
        try:
            return cls(
                kind=d["kind"],
                ensemble=ensemble,
                n_list=tuple(d.get("n_list", (256,))),
                k=d.get("k"),
                k_divisor=float(d.get("k_divisor", 1.2)),
                allow_large_k=bool(d.get("allow_large_k", False)),
                f_id=d.get("f", "re"),
                replicates=int(d.get("replicates", 100)),
                base_seed=int(d.get("base_seed", 1)),
                threads=int(d.get("threads", 1)),
                method=d.get("method", "sample"),
                w1_reps=int(d.get("w1_reps", 1)),
                grid_bound=float(d.get("grid_bound", 1.25)),
                n_max=int(d.get("n_max", 60)),
            )
        except KeyError as exc:
            raise ConfigError(f"missing config field: {exc}") from exc


def config_hash(config: ExperimentConfig) -> str:
    """Provenance hash over the canonical JSON form (threads excluded)."""
    payload = json.dumps(config.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def derive_seed(base_seed: int, kind: str, n: int, replicate: int, stream_tag: str) -> int:
    """Collision-resistant per-(experiment, size, replicate, stream) seed."""
    return derive_seed64(base_seed, kind, n, replicate, stream_tag)


@dataclass(frozen=True)
class ExperimentResult:
    config: ExperimentConfig
    records: list
    summary: dict


def _map_replicates(worker, arg_list, threads: int) -> list:
    """Run `worker` over `arg_list`, results in submission order."""
    if threads <= 1 or len(arg_list) <= 1:
        return [worker(a) for a in arg_list]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(worker, a) for a in arg_list]
        return [f.result() for f in futures]


# ---------------------------------------------------------------------------
# Replicate workers (module level so process pools can pickle them)

def _partial_replicate(args):
    ens_dict, n, k, f_id, seed_matrix, seed_index = args
    dist = AtomDistribution.from_dict(ens_dict)
    f = function_by_id(f_id)
    try:
        spectrum = eigenvalues(sample_matrix(dist, n, seed_matrix), scale=True)
    except EigensolverError as exc:
        return None, str(exc)
    index_set = sample_index_set(n, k, seed_index)
    kept, removed = partial_statistic(spectrum, f, index_set)
    full = kept + removed
    return (
        {
            "n": n,
            "k": k,
            "seed_matrix": seed_matrix,
            "seed_index": seed_index,
            "kept_re": kept.real,
            "kept_im": kept.imag,
            "removed_re": removed.real,
            "removed_im": removed.imag,
            "full_re": full.real,
            "full_im": full.imag,
        },
        None,
    )


def _full_clt_replicate(args):
    ens_dict, n, f_id, seed_matrix = args
    dist = AtomDistribution.from_dict(ens_dict)
    f = function_by_id(f_id)
    try:
        spectrum = eigenvalues(sample_matrix(dist, n, seed_matrix), scale=True)
    except EigensolverError as exc:
        return None, str(exc)
    full = linear_statistic(spectrum, f)
    return (
        {
            "n": n,
            "seed_matrix": seed_matrix,
            "full_re": full.real,
            "full_im": full.imag,
        },
        None,
    )


def _wasserstein_replicate(args):
    ens_dict, n, method, w1_reps, seed_matrix, seed_disk = args
    dist = AtomDistribution.from_dict(ens_dict)
    try:
        spectrum = eigenvalues(sample_matrix(dist, n, seed_matrix), scale=True)
    except EigensolverError as exc:
        return None, str(exc)
    if method == "lattice":
        from .transport import w1_to_disk

        value = w1_to_disk(spectrum.values, method="lattice")
    else:
        value = float(w1_to_disk_samples(spectrum.values, w1_reps, seed_disk).mean())
    return (
        {
            "n": n,
            "method": method,
            "seed_matrix": seed_matrix,
            "seed_disk": seed_disk,
            "w1": value,
        },
        None,
    )


def _local_law_replicate(args):
    ens_dict, n, bound, seed_x, seed_g = args
    dist = AtomDistribution.from_dict(ens_dict)
    ginibre = AtomDistribution("complex-gaussian")
    try:
        spec_x = eigenvalues(sample_matrix(dist, n, seed_x), scale=True)
        spec_g = eigenvalues(sample_matrix(ginibre, n, seed_g), scale=True)
    except EigensolverError as exc:
        return None, str(exc)
    grid = default_grid(n, bound)
    counts_x = cell_counts(spec_x.values, grid)
    counts_g = cell_counts(spec_g.values, grid)
    live = grid.cell_count  # real cells; the final entry is overflow
    max_disc = int(np.max(np.abs(counts_x[:live] - counts_g[:live])))
    return (
        {
            "n": n,
            "seed_x": seed_x,
            "seed_g": seed_g,
            "max_cell_discrepancy": max_disc,
            "normalized_discrepancy": max_disc / n ** 0.25,
            "x_in_grid": int(counts_x[:live].sum()),
            "g_in_grid": int(counts_g[:live].sum()),
            "radius_x": spectral_radius(spec_x),
            "radius_g": spectral_radius(spec_g),
        },
        None,
    )


# ---------------------------------------------------------------------------
# Pipelines

def _finalize_records(config, outcomes, base_fields) -> list:
    """Attach replicate indices, drop failures, enforce the skip budget."""
    records, skipped = [], 0
    for replicate, (record, error) in enumerate(outcomes):
        if record is None:
            skipped += 1
            log.warning("replicate %d skipped: %s", replicate, error)
            continue
        row = {"kind": config.kind, "replicate": replicate}
        row.update(base_fields)
        row.update(record)
        records.append(row)
    if skipped > MAX_SKIP_FRACTION * len(outcomes):
        raise RuntimeError(
            f"{skipped}/{len(outcomes)} replicates skipped; exceeding the "
            f"{MAX_SKIP_FRACTION:.0%} budget"
        )
    return records


def _centered_variance(values: np.ndarray) -> float:
    return float(np.var(values - values.mean())) if values.size else 0.0


def run_partial_fixed_K(config: ExperimentConfig) -> ExperimentResult:
    """Thinned statistics with a fixed removal count K.

    Per replicate: sample a matrix, eigen-solve it scaled, draw a uniform
    K-subset from an independent stream, and record the kept/removed sums.
    The summary centers by cross-replicate means and compares the removed
    part to the fixed-K limit law (two-sample KS, sigma2 = 0 side).
    """
    if config.kind != "partial-fixed-K":
        raise ConfigError(f"expected kind partial-fixed-K, got {config.kind}")
    f = function_by_id(config.f_id)
    moments = disk_moments(f)
    records, summary_rows = [], []
    for n in config.n_list:
        k = config.k_for(n)
        ens = config.ensemble.to_dict()
        args = [
            (
                ens,
                n,
                k,
                config.f_id,
                derive_seed(config.base_seed, config.kind, n, r, "matrix"),
                derive_seed(config.base_seed, config.kind, n, r, "index"),
            )
            for r in range(config.replicates)
        ]
        outcomes = _map_replicates(_partial_replicate, args, config.threads)
        rows = _finalize_records(config, outcomes, {"f": config.f_id})
        records.extend(rows)

        removed = np.array([r["removed_re"] for r in rows])
        kept = np.array([r["kept_re"] for r in rows])
        limit = LimitSpec(
            sigma2=0.0,
            mean_f=moments.mean_f,
            var_re=moments.var_re,
            var_im=moments.var_im,
            cov=moments.cov,
            K=k,
        )
        # Removed-part limit is sum_i (f(U_i) - E f(U_i)): the negated
        # sigma2=0 sampler output.
        limit_samples = -limit_sampler_fixed_K(
            limit, f, len(rows), derive_seed(config.base_seed, config.kind, n, 0, "limit")
        ).real
        ks_stat, ks_p = ks_two_sample(removed - removed.mean(), limit_samples)
        summary_rows.append(
            {
                "n": n,
                "k": k,
                "replicates": len(rows),
                "removed_mean": float(removed.mean()),
                "removed_var": _centered_variance(removed),
                "removed_var_target": k * moments.var_re,
                "kept_var": _centered_variance(kept),
                "ks_stat": ks_stat,
                "ks_p": ks_p,
            }
        )
    return ExperimentResult(config, records, {"rows": summary_rows})


def run_partial_growing_K(config: ExperimentConfig) -> ExperimentResult:
    """Thinned statistics normalized by sqrt(K) with K growing like n^(1/4).

    The summary compares the centered, sqrt(K)-normalized removed and kept
    parts to the Gaussian limit with disk-moment covariances, including a
    two-sample KS against Gaussian draws of the target variance.
    """
    if config.kind != "partial-growing-K":
        raise ConfigError(f"expected kind partial-growing-K, got {config.kind}")
    f = function_by_id(config.f_id)
    moments = disk_moments(f)
    records, summary_rows = [], []
    for n in config.n_list:
        k = config.k_for(n)
        ens = config.ensemble.to_dict()
        args = [
            (
                ens,
                n,
                k,
                config.f_id,
                derive_seed(config.base_seed, config.kind, n, r, "matrix"),
                derive_seed(config.base_seed, config.kind, n, r, "index"),
            )
            for r in range(config.replicates)
        ]
        outcomes = _map_replicates(_partial_replicate, args, config.threads)
        rows = _finalize_records(config, outcomes, {"f": config.f_id})
        records.extend(rows)

        sqrt_k = math.sqrt(k)
        rem_re = np.array([r["removed_re"] for r in rows]) / sqrt_k
        rem_im = np.array([r["removed_im"] for r in rows]) / sqrt_k
        kept_re = np.array([r["kept_re"] for r in rows]) / sqrt_k
        centered = rem_re - rem_re.mean()
        rng = make_rng(derive_seed(config.base_seed, config.kind, n, 0, "gauss"))
        gauss = math.sqrt(max(moments.var_re, 0.0)) * rng.standard_normal(len(rows))
        ks_stat, ks_p = ks_two_sample(centered, gauss)
        summary_rows.append(
            {
                "n": n,
                "k": k,
                "replicates": len(rows),
                "removed_var_re": _centered_variance(rem_re),
                "removed_var_im": _centered_variance(rem_im),
                "removed_cov": float(
                    np.mean(
                        (rem_re - rem_re.mean()) * (rem_im - rem_im.mean())
                    )
                ),
                "kept_var_re": _centered_variance(kept_re),
                "target_var_re": moments.var_re,
                "target_var_im": moments.var_im,
                "target_cov": moments.cov,
                "ks_stat": ks_stat,
                "ks_p": ks_p,
            }
        )
    return ExperimentResult(config, records, {"rows": summary_rows})


def run_full_clt(config: ExperimentConfig) -> ExperimentResult:
    """Centered full linear statistic versus the limiting Gaussian variance."""
    if config.kind != "full-clt":
        raise ConfigError(f"expected kind full-clt, got {config.kind}")
    f = function_by_id(config.f_id)
    atom = atom_moments(config.ensemble)
    target = ginibre_variance(f, atom, real_atom=config.ensemble.is_real)
    records, summary_rows = [], []
    for n in config.n_list:
        ens = config.ensemble.to_dict()
        args = [
            (
                ens,
                n,
                config.f_id,
                derive_seed(config.base_seed, config.kind, n, r, "matrix"),
            )
            for r in range(config.replicates)
        ]
        outcomes = _map_replicates(_full_clt_replicate, args, config.threads)
        rows = _finalize_records(config, outcomes, {"f": config.f_id})
        records.extend(rows)
        full = np.array([r["full_re"] for r in rows])
        summary_rows.append(
            {
                "n": n,
                "replicates": len(rows),
                "full_var": _centered_variance(full),
                "target_var": target.sigma2,
                "gradient_term": target.gradient_term,
                "fourier_term": target.fourier_term,
                "fourth_moment_term": target.fourth_moment_term,
            }
        )
    return ExperimentResult(config, records, {"rows": summary_rows})


def run_wasserstein_decay(config: ExperimentConfig) -> ExperimentResult:
    """W1 from the scaled empirical spectrum to the disk law across sizes.

    The summary reports per-size means, the log-log regression slope of the
    mean W1 against n, and the fraction of trials below n^(-1/4).
    """
    if config.kind != "wasserstein-decay":
        raise ConfigError(f"expected kind wasserstein-decay, got {config.kind}")
    records, summary_rows = [], []
    for n in config.n_list:
        ens = config.ensemble.to_dict()
        args = [
            (
                ens,
                n,
                config.method,
                config.w1_reps,
                derive_seed(config.base_seed, config.kind, n, r, "matrix"),
                derive_seed(config.base_seed, config.kind, n, r, "disk"),
            )
            for r in range(config.replicates)
        ]
        outcomes = _map_replicates(_wasserstein_replicate, args, config.threads)
        rows = _finalize_records(config, outcomes, {})
        records.extend(rows)
        w1 = np.array([r["w1"] for r in rows])
        summary_rows.append(
            {
                "n": n,
                "trials": len(rows),
                "w1_mean": float(w1.mean()),
                "w1_std": float(w1.std()),
                "frac_below_quarter_power": float(np.mean(w1 <= n ** -0.25)),
            }
        )
    slope = None
    if len({row["n"] for row in summary_rows}) >= 2:
        xs = np.log([row["n"] for row in summary_rows])
        ys = np.log([row["w1_mean"] for row in summary_rows])
        slope = float(np.polyfit(xs, ys, 1)[0])
    return ExperimentResult(config, records, {"rows": summary_rows, "loglog_slope": slope})


def run_local_law_cells(config: ExperimentConfig) -> ExperimentResult:
    """Per-cell eigenvalue count discrepancy against an independent Ginibre draw."""
    if config.kind != "local-law-cells":
        raise ConfigError(f"expected kind local-law-cells, got {config.kind}")
    records, summary_rows = [], []
    for n in config.n_list:
        ens = config.ensemble.to_dict()
        args = [
            (
                ens,
                n,
                config.grid_bound,
                derive_seed(config.base_seed, config.kind, n, r, "matrix-x"),
                derive_seed(config.base_seed, config.kind, n, r, "matrix-g"),
            )
            for r in range(config.replicates)
        ]
        outcomes = _map_replicates(_local_law_replicate, args, config.threads)
        rows = _finalize_records(config, outcomes, {})
        records.extend(rows)
        norm = np.array([r["normalized_discrepancy"] for r in rows])
        contained = [
            r for r in rows if max(r["radius_x"], r["radius_g"]) <= config.grid_bound
        ]
        summary_rows.append(
            {
                "n": n,
                "trials": len(rows),
                "grid_bound": config.grid_bound,
                "max_normalized_discrepancy": float(norm.max()),
                "mean_normalized_discrepancy": float(norm.mean()),
                "contained_trials": len(contained),
                "contained_count_ok": all(
                    r["x_in_grid"] == n and r["g_in_grid"] == n for r in contained
                ),
            }
        )
    return ExperimentResult(config, records, {"rows": summary_rows})


def _thinning_scan_for_n(n: int):
    """Worst pmf/bound ratio over all feasible (K, J, j) at fixed n."""
    k = np.arange(1, n + 1, dtype=np.float64)[:, None, None]
    j_size = np.arange(0, n + 1, dtype=np.float64)[None, :, None]
    j = np.arange(0, n + 1, dtype=np.float64)[None, None, :]

    def log_comb(a, b):
        return gammaln(a + 1) - gammaln(b + 1) - gammaln(a - b + 1)

    feasible = (j <= k) & (j <= n - j_size) & (k - j <= j_size)
    with np.errstate(invalid="ignore", divide="ignore"):
        log_pmf = log_comb(n - j_size, j) + log_comb(j_size, k - j) - log_comb(n, k)
        pmf = np.where(feasible, np.exp(np.where(feasible, log_pmf, -np.inf)), 0.0)

        p = 1.0 - j_size / n
        log_binom = log_comb(k, j) + j * np.log(p) + (k - j) * np.log1p(-p)
        binom = np.where(j <= k, np.exp(np.where(j <= k, log_binom, -np.inf)), 0.0)
        binom = np.where(p <= 0.0, (j == 0).astype(float) * (j <= k), binom)
        binom = np.where(p >= 1.0, (j == k).astype(float), binom)
    prefactor = np.exp((k * k / n) / np.sqrt(1.0 - (k - 1.0) / n))
    bound = prefactor * binom

    violations = int(np.sum(pmf > bound * (1 + 1e-12)))
    mask = pmf > 0
    ratio = np.where(mask, pmf / np.where(mask, bound, 1.0), 0.0)
    flat = int(np.argmax(ratio))
    ki, ji_size, ji = np.unravel_index(flat, ratio.shape)
    return {
        "n": n,
        "worst_ratio": float(ratio[ki, ji_size, ji]),
        "k": int(ki + 1),
        "j_size": int(ji_size),
        "j": int(ji),
        "violations": violations,
    }


def run_thinning_bound(config: ExperimentConfig) -> ExperimentResult:
    """Exhaustive pmf <= bound verification for all feasible tuples up to n_max."""
    if config.kind != "thinning-bound":
        raise ConfigError(f"expected kind thinning-bound, got {config.kind}")
    if config.n_max < 1:
        raise ConfigError("n_max must be >= 1")
    records = []
    for n in range(1, config.n_max + 1):
        row = _thinning_scan_for_n(n)
        row["kind"] = config.kind
        records.append(row)
    worst = max(records, key=lambda r: r["worst_ratio"])
    summary = {
        "n_max": config.n_max,
        "violations": int(sum(r["violations"] for r in records)),
        "worst_ratio": worst["worst_ratio"],
        "worst_case": {key: worst[key] for key in ("n", "k", "j_size", "j")},
    }
    return ExperimentResult(config, records, summary)


RUNNERS = {
    "partial-fixed-K": run_partial_fixed_K,
    "partial-growing-K": run_partial_growing_K,
    "full-clt": run_full_clt,
    "wasserstein-decay": run_wasserstein_decay,
    "local-law-cells": run_local_law_cells,
    "thinning-bound": run_thinning_bound,
}


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    return RUNNERS[config.kind](config)


# ---------------------------------------------------------------------------
# Emission

def records_jsonl(result: ExperimentResult) -> str:
    """Records as JSONL with a config-hash header line and stable key order."""
    header = {"config_hash": config_hash(result.config), "config": result.config.to_dict()}
    lines = [json.dumps(header, sort_keys=True, separators=(",", ":"))]
    lines.extend(
        json.dumps(record, sort_keys=True, separators=(",", ":"))
        for record in result.records
    )
    return "\n".join(lines) + "\n"


def write_records_jsonl(path, result: ExperimentResult):
    Path(path).write_text(records_jsonl(result), encoding="utf-8")


def write_summary_csv(path, result: ExperimentResult):
    """Summary rows as CSV under a config-hash comment header."""
    rows = result.summary.get("rows") or [result.summary]
    fieldnames = sorted({key for row in rows for key in row})
    with open(path, "w", newline="", encoding="utf-8") as handle:
        handle.write(f"# config_hash={config_hash(result.config)}\n")
        writer = csv.DictWriter(handle, fieldnames=fieldnames)
        writer.writeheader()
        for row in rows:
            writer.writerow({key: _csv_cell(row.get(key)) for key in fieldnames})


def _csv_cell(value):
    if isinstance(value, dict):
        return json.dumps(value, sort_keys=True, separators=(",", ":"))
    return value
