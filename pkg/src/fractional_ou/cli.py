"""Command-line front end: simulate, estimate, limits, mc, variance-check."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .asymptotics import limit_cov_matrix, ratio_limit_params, zero_integral_variance
from .basis import BasisError, DriftFunction, PeriodicBasis, fourier_basis, load_basis_file
from .estimator import SingularQError, assemble_inputs, estimate_from_inputs
from .fbm import FbmGenerationError, SamplePath, Seed
from .mc import ExperimentAborted, ExperimentConfig, run_experiment, summarize, write_records_csv
from .model import ModelParams, SimulatedPair, simulate, write_path_csv, xi_infty_mean_var

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
GRID_RTOL = 1e-9


class ConfigError(ValueError):
    pass


# key -> (accepted python types, description)
CONFIG_KEYS: dict[str, tuple[tuple[type, ...], str]] = {
    "hurst": ((float, int), "Hurst index H"),
    "alpha": ((float, int), "mean-reversion rate, must be > 0"),
    "sigma": ((float, int), "noise scale, must be > 0"),
    "x0": ((float, int), "initial value"),
    "fourier_order": ((int,), "use the Fourier basis 1, sqrt2 sin(2 pi k t), sqrt2 cos(2 pi k t), k <= order"),
    "basis_file": ((str,), "CSV with columns t, phi_1..phi_p on a uniform grid of [0, 1]"),
    "mu": ((list,), "drift coefficients, one per basis function (default zeros)"),
    "T": ((float, int), "horizon for simulate"),
    "horizons": ((list,), "strictly increasing horizons for mc"),
    "n_steps": ((int,), "grid steps (default max(4096, ceil(256 T)))"),
    "replications": ((int,), "replications per horizon for mc"),
    "seed": ((int,), "master seed"),
    "output_dir": ((str,), "directory for output files"),
    "noiseless": ((bool,), "mc only: drive with a zero path"),
    "hurst_list": ((list,), "Hurst indices for variance-check"),
    "l_max": ((int,), "series truncation for variance-check (default 40)"),
    "oracle_n": ((int,), "finite horizon of the variance oracle (default 128)"),
}


@dataclass
class RunConfig:
    values: dict = field(default_factory=dict)

    def get(self, key, default=None):
        return self.values.get(key, default)

    def require(self, key):
        if key not in self.values:
            raise ConfigError(f"missing config key '{key}'")
        return self.values[key]


def validate_config(raw: dict) -> RunConfig:
    """Check keys and value types; nothing is computed here."""
    for key, value in raw.items():
        if key not in CONFIG_KEYS:
            raise ConfigError(f"unknown config key '{key}'")
        types, _ = CONFIG_KEYS[key]
        # bool is an int subclass; only accept it where asked for
        if isinstance(value, bool) and bool not in types:
            raise ConfigError(f"config key '{key}' has type bool")
        if not isinstance(value, types):
            raise ConfigError(f"config key '{key}' has type {type(value).__name__}")
        if isinstance(value, list) and not all(
            isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
        ):
            raise ConfigError(f"config key '{key}' must be a list of numbers")
    if "fourier_order" in raw and "basis_file" in raw:
        raise ConfigError("config keys 'fourier_order' and 'basis_file' are mutually exclusive")
    return RunConfig(dict(raw))


def load_config(path: str | None) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from exc
    return validate_config(raw)


def build_basis(cfg: RunConfig) -> PeriodicBasis:
    if cfg.get("basis_file") is not None:
        return load_basis_file(cfg.get("basis_file"))
    order = cfg.get("fourier_order", 0)
    if order < 0:
        raise ConfigError("config key 'fourier_order' must be >= 0")
    return fourier_basis(order)


def build_params(cfg: RunConfig) -> ModelParams:
    basis = build_basis(cfg)
    mu = cfg.get("mu", [0.0] * basis.p)
    if len(mu) != basis.p:
        raise ConfigError(f"config key 'mu' has {len(mu)} entries but the basis has {basis.p} functions")
    return ModelParams(
        H=float(cfg.require("hurst")),
        alpha=float(cfg.require("alpha")),
        sigma=float(cfg.get("sigma", 1.0)),
        x0=float(cfg.get("x0", 0.0)),
        drift=DriftFunction(basis, tuple(float(m) for m in mu)),
    )


def master_seed(cfg: RunConfig, args) -> int:
    seed = args.seed if args.seed is not None else cfg.get("seed", 0)
    if seed < 0 or seed >= 2**64:
        raise ConfigError("seed must be an unsigned 64-bit integer")
    return int(seed)


def output_dir(cfg: RunConfig, args) -> Path:
    out = Path(args.out if args.out is not None else cfg.get("output_dir", "."))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _n_steps(cfg: RunConfig):
    n = cfg.get("n_steps")
    if n is not None and n < 2:
        raise ConfigError("config key 'n_steps' must be >= 2")
    return n


# --------------------------------------------------------------------------
# commands


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    params = build_params(cfg)
    T = float(cfg.require("T"))
    if not T > 0:
        raise ConfigError("config key 'T' must be positive")
    pair = simulate(params, T, _n_steps(cfg), Seed(master_seed(cfg, args), 0))
    path = output_dir(cfg, args) / "path.csv"
    write_path_csv(pair, path)
    print(path)
    return EXIT_OK


def read_path_csv(path) -> tuple[SamplePath, SamplePath | None]:
    """Parse a ``t, X[, B]`` CSV and check the grid is uniform."""
    try:
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except (ValueError, OSError) as exc:
        raise ConfigError(f"cannot parse path CSV {path}: {exc}") from exc
    if data.shape[1] < 2 or data.shape[0] < 3:
        raise ConfigError(f"path CSV {path} needs columns t, X and at least 3 rows")
    if not np.all(np.isfinite(data[:, :2])):
        raise ConfigError(f"path CSV {path} has non-finite t or X values")
    t = data[:, 0]
    steps = np.diff(t)
    dt = (t[-1] - t[0]) / (t.size - 1)
    if not dt > 0 or np.max(np.abs(steps - dt)) > GRID_RTOL * dt:
        raise ConfigError(f"path CSV {path} is not on a uniform grid (relative tolerance {GRID_RTOL:g})")
    X = SamplePath(float(t[0]), dt, data[:, 1])
    B = None
    if data.shape[1] > 2 and np.all(np.isfinite(data[:, 2])):
        B = SamplePath(float(t[0]), dt, data[:, 2])
    return X, B


def cmd_estimate(args) -> int:
    cfg = load_config(args.config)
    basis = build_basis(cfg)
    X, _ = read_path_csv(args.path)
    if X.t0 != 0.0:
        raise ConfigError("path CSV must start at t = 0")
    # the estimator only reads X; params are not needed
    inputs = assemble_inputs(SimulatedPair(X, None, None), basis)
    print(estimate_from_inputs(inputs).to_json())
    return EXIT_OK


def limits_payload(params: ModelParams, l_max: int = 40, oracle_n: int = 128) -> dict:
    gauss = limit_cov_matrix(params.basis, params.sigma)
    ratio = ratio_limit_params(params)
    mean, var = xi_infty_mean_var(params)
    payload = {
        "gaussian_cov": gauss.scaled_cov.tolist(),
        "unit_integrals": params.basis.unit_integrals.tolist(),
        "m": ratio.m,
        "ratio_alpha": ratio.alpha,
        "xi_infty_mean": mean,
        "xi_infty_var": var,
        "zero_integral": {},
    }
    if 0.5 < params.H < 1.0:
        for k in np.flatnonzero(params.basis.zero_integral_mask()):
            z = zero_integral_variance(params.basis, int(k), params.H, l_max, oracle_n)
            payload["zero_integral"][params.basis.labels[k]] = {
                "variance": params.sigma**2 * z.limit_variance,
                "convention_factor": z.convention_factor,
                "by_series": z.by_series,
                "by_integral": z.by_integral,
                "by_oracle": z.by_oracle,
            }
    return payload


def cmd_limits(args) -> int:
    cfg = load_config(args.config)
    params = build_params(cfg)
    payload = limits_payload(params, cfg.get("l_max", 40), cfg.get("oracle_n", 128))
    text = json.dumps(payload, indent=2)
    if args.out is not None or cfg.get("output_dir") is not None:
        (output_dir(cfg, args) / "limits.json").write_text(text + "\n")
    print(text)
    return EXIT_OK


def _workers(args) -> int:
    if args.threads is None:
        return 1
    if args.threads < 0:
        raise ConfigError("--threads must be >= 0")
    return args.threads or (os.cpu_count() or 1)


def cmd_mc(args) -> int:
    cfg = load_config(args.config)
    params = build_params(cfg)
    reps = cfg.require("replications")
    if reps < 1:
        raise ConfigError("config key 'replications' must be >= 1")
    horizons = cfg.get("horizons", [cfg.get("T")] if cfg.get("T") is not None else None)
    if horizons is None:
        raise ConfigError("missing config key 'horizons'")
    try:
        exp = ExperimentConfig(
            params=params,
            horizons=tuple(horizons),
            replications=reps,
            master_seed=master_seed(cfg, args),
            n_steps=_n_steps(cfg),
            workers=_workers(args),
            noiseless=cfg.get("noiseless", False),
        )
    except ValueError as exc:
        raise ConfigError(f"config key 'horizons': {exc}") from exc
    records = run_experiment(exp)
    out = output_dir(cfg, args)
    write_records_csv(records, out / "replications.csv", params.basis.p)
    summary = summarize(records, exp)
    (out / "summary.json").write_text(json.dumps(summary, indent=2, default=_json_default) + "\n")
    print(out / "replications.csv")
    print(out / "summary.json")
    return EXIT_OK


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def cmd_variance_check(args) -> int:
    cfg = load_config(args.config)
    basis = build_basis(cfg)
    hs = cfg.get("hurst_list", [cfg.get("hurst")] if cfg.get("hurst") is not None else None)
    if not hs:
        raise ConfigError("missing config key 'hurst_list'")
    for h in hs:
        if not 0.5 < h < 1.0:
            raise ConfigError(f"config key 'hurst_list' entry {h} is outside (0.5, 1)")
    zero = np.flatnonzero(basis.zero_integral_mask())
    if zero.size == 0:
        raise ConfigError("the basis has no zero-integral function to check")
    l_max, oracle_n = cfg.get("l_max", 40), cfg.get("oracle_n", 128)
    rows = []
    for h in hs:
        for k in zero:
            z = zero_integral_variance(basis, int(k), float(h), l_max, oracle_n)
            rows.append(
                [repr(float(h)), basis.labels[k]]
                + [repr(float(v)) for v in (z.by_series, z.by_integral, z.by_oracle, z.convention_factor, z.max_rel_dev)]
            )
    header = ["H", "phi_id", "by_series", "by_integral", f"by_oracle_n{oracle_n}", "convention_factor", "max_rel_dev"]
    path = output_dir(cfg, args) / "variance_check.csv"
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for r in rows:
            fh.write(",".join(r) + "\n")
    print(path)
    return EXIT_OK


# --------------------------------------------------------------------------
# argument parsing


def _keys_help() -> str:
    width = max(len(k) for k in CONFIG_KEYS)
    lines = ["config keys (flat TOML):"]
    for k, (_, desc) in CONFIG_KEYS.items():
        lines.append(f"  {k:<{width}}  {desc}")
    return "\n".join(lines)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="TOML config file")
    common.add_argument("--out", metavar="DIR", help="output directory (overrides output_dir)")
    common.add_argument("--seed", type=int, metavar="U64", help="master seed (overrides seed)")
    common.add_argument("--threads", type=int, metavar="N", help="mc workers, 0 = all CPUs")
    common.add_argument("-v", "--verbose", action="store_true")

    fmt = argparse.RawDescriptionHelpFormatter
    parser = argparse.ArgumentParser(
        prog="fou",
        description="Simulate and estimate a non-ergodic fractional OU process with periodic mean.",
        epilog=_keys_help() + "\n\nexit codes: 0 success, 2 config or input error, 3 numerical failure",
        formatter_class=fmt,
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, func, helptext in (
        ("simulate", cmd_simulate, "simulate one path, write t,X,B CSV"),
        ("limits", cmd_limits, "print limit-law parameters as JSON"),
        ("mc", cmd_mc, "run a Monte Carlo experiment"),
        ("variance-check", cmd_variance_check, "compare the zero-integral variance evaluations"),
    ):
        p = sub.add_parser(name, parents=[common], help=helptext, epilog=_keys_help(), formatter_class=fmt)
        p.set_defaults(func=func)
    p = sub.add_parser(
        "estimate", parents=[common], help="estimate parameters from a path CSV",
        epilog=_keys_help(), formatter_class=fmt,
    )
    p.add_argument("path", help="CSV with columns t, X[, B]")
    p.set_defaults(func=cmd_estimate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (SingularQError, FbmGenerationError, ExperimentAborted, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ConfigError, BasisError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
