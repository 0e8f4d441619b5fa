"""Replicated simulate -> estimate experiments and distributional checks."""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import special

from .asymptotics import limit_cov_matrix, ratio_cdf, ratio_limit_params, zero_integral_variance
from .basis import ORTHONORMALITY_TOL
from .estimator import SingularQError, estimate
from .fbm import Seed
from .model import ModelParams, default_n_steps, simulate, zero_driver

log = logging.getLogger(__name__)

MAX_FAILURE_FRACTION = 0.01
MIN_CORRELATION_SAMPLE = 100
KOLMOGOROV_TERMS = 20


class ExperimentAborted(RuntimeError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    params: ModelParams
    horizons: tuple[float, ...]
    replications: int
    master_seed: int = 0
    n_steps: int | None = None  # None: default_n_steps(T) per horizon
    workers: int = 1
    noiseless: bool = False  # zero driver: errors are pure discretisation residuals

    def __post_init__(self):
        hs = tuple(float(h) for h in np.atleast_1d(self.horizons))
        object.__setattr__(self, "horizons", hs)
        if self.replications < 1:
            raise ValueError("replications must be at least 1")
        if not hs or any(h <= 0 for h in hs):
            raise ValueError("horizons must be positive")
        if any(b <= a for a, b in zip(hs, hs[1:])):
            raise ValueError("horizons must be strictly increasing")

    def steps_for(self, T: float) -> int:
        return default_n_steps(T) if self.n_steps is None else int(self.n_steps)


@dataclass(frozen=True)
class ReplicationRecord:
    rep: int
    T: float
    seed_stream: int
    theta_hat: np.ndarray
    scaled: np.ndarray  # p mu-components then the alpha component
    D: float
    gamma: float
    failed: bool = False

    @property
    def scaled_alpha(self) -> float:
        return float(self.scaled[-1])


def rate_exponents(params: ModelParams) -> np.ndarray:
    """Per-component power of T: ``1 - H`` if ``int phi_i != 0`` else ``1/2``."""
    zero = params.basis.zero_integral_mask(ORTHONORMALITY_TOL)
    return np.where(zero, 0.5, 1.0 - params.H)


def exp_scaled(err: float, rate: float) -> float:
    """``e^{rate} * err`` formed in log-magnitude space."""
    if err == 0.0 or not np.isfinite(err):
        return err * 1.0
    log_mag = rate + math.log(abs(err))
    if log_mag > 700.0:
        return math.copysign(math.inf, err)
    return math.copysign(math.exp(log_mag), err)


def scaled_errors(params: ModelParams, theta_hat: np.ndarray, T: float) -> np.ndarray:
    err = theta_hat - params.theta
    mu_scaled = T ** rate_exponents(params) * err[:-1]
    return np.append(mu_scaled, exp_scaled(float(err[-1]), params.alpha * T))


def _one_replication(job) -> ReplicationRecord:
    cfg, T, rep, stream = job
    params = cfg.params
    n_steps = cfg.steps_for(T)
    driver = zero_driver(T, n_steps) if cfg.noiseless else None
    pair = simulate(params, T, n_steps, Seed(cfg.master_seed, stream), driver=driver)
    p = params.basis.p
    try:
        res = estimate(pair)
    except SingularQError as exc:
        log.warning("replication %d at T=%g failed: %s", rep, T, exc)
        nan = np.full(p + 1, np.nan)
        return ReplicationRecord(rep, T, stream, nan, nan.copy(), exc.D, math.nan, failed=True)
    return ReplicationRecord(
        rep, T, stream, res.theta_hat, scaled_errors(params, res.theta_hat, T), res.D, res.gamma
    )


def run_experiment(cfg: ExperimentConfig) -> list[ReplicationRecord]:
    """Run every (horizon, replication) pair; stream index = global job index.

    Records come back ordered by (T, rep) whatever the worker count.
    """
    jobs = [
        (cfg, T, rep, h * cfg.replications + rep)
        for h, T in enumerate(cfg.horizons)
        for rep in range(cfg.replications)
    ]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            records = list(pool.map(_one_replication, jobs, chunksize=16))
    else:
        records = [_one_replication(j) for j in jobs]
    for T in cfg.horizons:
        failed = sum(r.failed for r in records if r.T == T)
        if failed > MAX_FAILURE_FRACTION * cfg.replications:
            raise ExperimentAborted(
                f"{failed} of {cfg.replications} replications at T={T} had a singular Q "
                f"(limit {MAX_FAILURE_FRACTION:.0%})"
            )
    return records


# --------------------------------------------------------------------------
# Kolmogorov-Smirnov


@dataclass(frozen=True)
class KSReport:
    statistic: float
    n: int
    p_value: float

    def to_dict(self) -> dict:
        return {"statistic": self.statistic, "n": self.n, "p_value": self.p_value}


def kolmogorov_sf(lam: float, terms: int = KOLMOGOROV_TERMS) -> float:
    """``P(K > lam)`` for the Kolmogorov distribution, by its alternating series."""
    if lam < 0.2:
        return 1.0  # series unreliable; the true value exceeds 1 - 1e-14
    k = np.arange(1, terms + 1)
    val = 2.0 * np.sum((-1.0) ** (k - 1) * np.exp(-2.0 * k**2 * lam**2))
    return float(min(1.0, max(0.0, val)))


def ks_test(sample: Sequence[float], cdf: Callable) -> KSReport:
    """One-sample KS statistic and asymptotic p-value against ``cdf``."""
    x = np.sort(np.asarray(sample, dtype=float))
    n = x.size
    if n == 0:
        raise ValueError("KS test needs a nonempty sample")
    F = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    d = float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))
    d = min(1.0, max(0.0, d))
    return KSReport(d, n, kolmogorov_sf(math.sqrt(n) * d))


def normal_cdf(scale: float) -> Callable:
    return lambda x: special.ndtr(np.asarray(x) / scale)


# --------------------------------------------------------------------------
# summaries


def successful(records, T: float | None = None) -> list[ReplicationRecord]:
    return [r for r in records if not r.failed and (T is None or r.T == T)]


def cross_rate_correlation(records: Sequence[ReplicationRecord]) -> np.ndarray:
    """Sample correlation matrix of all scaled error components at one horizon."""
    ok = successful(records)
    if len({r.T for r in ok}) > 1:
        raise ValueError("records span several horizons; filter to one T first")
    if len(ok) < MIN_CORRELATION_SAMPLE:
        raise ValueError(f"need at least {MIN_CORRELATION_SAMPLE} successful records, got {len(ok)}")
    data = np.array([r.scaled for r in ok])
    return np.corrcoef(data, rowvar=False)


@dataclass
class LimitLaws:
    """Limit distributions of the scaled errors; built once per parameter set."""

    params: ModelParams
    mu_scales: np.ndarray = field(init=False)
    ratio: object = field(init=False)
    zero_integral: dict = field(init=False)

    def __post_init__(self):
        params = self.params
        sigma = params.sigma
        cov = limit_cov_matrix(params.basis, sigma).scaled_cov
        zero = params.basis.zero_integral_mask()
        scales = np.sqrt(np.diag(cov))
        self.zero_integral = {}
        for k in np.flatnonzero(zero):
            z = zero_integral_variance(params.basis, int(k), params.H)
            self.zero_integral[int(k)] = z
            scales[k] = sigma * math.sqrt(z.limit_variance)
        self.mu_scales = scales
        self.ratio = ratio_limit_params(params)

    def ks_reports(self, records) -> dict:
        ok = successful(records)
        data = np.array([r.scaled for r in ok])
        out = {}
        for i, s in enumerate(self.mu_scales):
            out[f"scaled_{i + 1}"] = ks_test(data[:, i], normal_cdf(s)).to_dict()
        sigma = self.params.sigma
        out["scaled_alpha"] = ks_test(data[:, -1] / sigma, lambda z: ratio_cdf(self.ratio, z)).to_dict()
        return out


def summarize(records, cfg: ExperimentConfig, laws: LimitLaws | None = None) -> dict:
    """Per-horizon moments, KS reports and correlations as plain data."""
    laws = LimitLaws(cfg.params) if laws is None else laws
    p = cfg.params.basis.p
    names = [f"scaled_{i + 1}" for i in range(p)] + ["scaled_alpha"]
    per_h = []
    for T in cfg.horizons:
        rs = [r for r in records if r.T == T]
        ok = successful(rs)
        entry = {"T": T, "n_ok": len(ok), "n_failed": len(rs) - len(ok)}
        if ok:
            data = np.array([r.scaled for r in ok])
            err = np.array([r.theta_hat for r in ok]) - cfg.params.theta
            entry["mean"] = dict(zip(names, data.mean(axis=0).tolist()))
            entry["variance"] = dict(zip(names, data.var(axis=0, ddof=1).tolist() if len(ok) > 1 else [math.nan] * (p + 1)))
            entry["median_abs_error"] = dict(
                zip([f"mu_{i + 1}" for i in range(p)] + ["alpha"], np.median(np.abs(err), axis=0).tolist())
            )
            entry["ks"] = laws.ks_reports(ok)
            if len(ok) >= MIN_CORRELATION_SAMPLE:
                entry["correlation"] = cross_rate_correlation(ok).tolist()
        per_h.append(entry)
    return {
        "config": config_echo(cfg),
        "limit_laws": {
            "mu_scales": laws.mu_scales.tolist(),
            "ratio_m": laws.ratio.m,
            "ratio_alpha": laws.ratio.alpha,
            "zero_integral": {
                str(k + 1): {
                    "by_series": z.by_series,
                    "by_integral": z.by_integral,
                    "by_oracle": z.by_oracle,
                    "convention_factor": z.convention_factor,
                    "limit_variance": z.limit_variance,
                }
                for k, z in laws.zero_integral.items()
            },
        },
        "horizons": per_h,
    }


def config_echo(cfg: ExperimentConfig) -> dict:
    pr = cfg.params
    basis = pr.basis
    return {
        "hurst": pr.H,
        "alpha": pr.alpha,
        "sigma": pr.sigma,
        "x0": pr.x0,
        "mu": list(pr.drift.mu),
        "basis": basis.kind,
        "fourier_order": basis.order,
        "horizons": list(cfg.horizons),
        "n_steps": cfg.n_steps,
        "replications": cfg.replications,
        "seed": cfg.master_seed,
        "noiseless": cfg.noiseless,
    }


def csv_header(p: int) -> list[str]:
    return (
        ["rep", "T", "seed_stream"]
        + [f"mu_hat_{i + 1}" for i in range(p)]
        + ["alpha_hat"]
        + [f"scaled_{i + 1}" for i in range(p)]
        + ["scaled_alpha", "D", "gamma", "failed"]
    )


def write_records_csv(records, path, p: int) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(csv_header(p))
        for r in records:
            w.writerow(
                [r.rep, repr(r.T), r.seed_stream]
                + [repr(float(v)) for v in r.theta_hat]
                + [repr(float(v)) for v in r.scaled]
                + [repr(float(r.D)), repr(float(r.gamma)), int(r.failed)]
            )


def read_records_csv(path) -> list[ReplicationRecord]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        return []
    p = sum(1 for k in rows[0] if k.startswith("mu_hat_"))
    out = []
    for row in rows:
        theta = np.array([float(row[f"mu_hat_{i + 1}"]) for i in range(p)] + [float(row["alpha_hat"])])
        scaled = np.array([float(row[f"scaled_{i + 1}"]) for i in range(p)] + [float(row["scaled_alpha"])])
        out.append(
            ReplicationRecord(
                int(row["rep"]),
                float(row["T"]),
                int(row["seed_stream"]),
                theta,
                scaled,
                float(row["D"]),
                float(row["gamma"]),
                bool(int(row["failed"])),
            )
        )
    return out
