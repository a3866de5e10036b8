"""Command-line entry point.

Subcommands: surface, equilibrium, crra, hdra, verify, figures.  Settings
come from an INI config file, overridden by GDAPORT_* environment variables
(for CI), overridden by explicit flags.  Every run writes its artifacts
plus a manifest.json recording all parameters, tolerances, the seed, the
library version, and wall time.

Exit codes: 0 success, 2 configuration error, 3 solver or verification
failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import configparser
import os
import sys
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import figures
from .crra import CrraSpec, HdraSpec, equilibrium_path, hdra_equilibrium_path
from .equilibrium import solve_equilibrium, solve_equilibrium_da
from .fileio import RunManifest, emit_csv, read_strategy_path, write_strategy_path
from .market import MarketError, MarketModel, SolverConfig
from .numerics import NumericsError
from .preference import GdaParams, Utility
from .surface import indifference_curve
from .verify import certify_equilibrium

ENV_PREFIX = "GDAPORT"
MODES = ("surface", "equilibrium", "crra", "hdra", "verify", "figures")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_IO = 4


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    mode: str
    out: str = "gdaport-out"
    seed: int = 20240311
    # market (single segment from the CLI; richer markets via the library)
    mu: tuple = (0.06,)
    sigma: tuple = ((0.3,),)
    horizon: float = 3.0
    # preference
    rho: float = 1.0
    beta: float = 0.5
    delta: float = 0.9
    # solver
    grid_step: float = 0.01
    picard_tol: float = 1e-11
    max_picard_iters: int = 300
    window_shrink: float = 0.5
    refine_target: float = 1e-7
    # mode extras
    preset: str = ""
    path_csv: str = ""
    curve_v_max: float = 1.0
    curve_points: int = 30
    hdra_intercept: float = 1.0
    hdra_slope: float = 0.5

    def market(self) -> MarketModel:
        return MarketModel.constant(np.asarray(self.mu), np.asarray(self.sigma), self.horizon)

    def utility(self) -> Utility:
        return Utility.crra(self.rho)

    def params(self) -> GdaParams:
        return GdaParams(self.beta, self.delta)

    def solver(self) -> SolverConfig:
        return SolverConfig(
            grid_step=self.grid_step,
            picard_tol=self.picard_tol,
            max_picard_iters=self.max_picard_iters,
            window_shrink=self.window_shrink,
            refine_target=self.refine_target,
        )

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        try:
            self.market()
            self.utility()
            self.params()
            self.solver()
        except (ValueError, MarketError) as exc:
            raise ConfigError(str(exc)) from exc
        if self.mode == "crra" and self.delta == 1.0:
            raise ConfigError(
                "delta = 1 has no semi-analytic pipeline: non-participation is "
                "the unique equilibrium (run mode=equilibrium, which dispatches "
                "to the zero path)"
            )
        if self.mode == "figures" and self.preset not in figures.PRESETS:
            raise ConfigError(
                f"figures mode needs --preset from {sorted(figures.PRESETS)}"
            )
        if self.mode == "verify" and not self.path_csv:
            raise ConfigError("verify mode needs --path (a strategy-path CSV)")


_FIELD_SECTIONS = {
    "mu": "market",
    "sigma": "market",
    "horizon": "market",
    "rho": "utility",
    "beta": "gda",
    "delta": "gda",
    "grid_step": "solver",
    "picard_tol": "solver",
    "max_picard_iters": "solver",
    "window_shrink": "solver",
    "refine_target": "solver",
    "out": "run",
    "seed": "run",
    "preset": "run",
    "path_csv": "run",
    "curve_v_max": "surface",
    "curve_points": "surface",
    "hdra_intercept": "hdra",
    "hdra_slope": "hdra",
}


def _parse_mu(text: str) -> tuple:
    return tuple(float(v) for v in text.split(","))


def _parse_sigma(text: str) -> tuple:
    return tuple(tuple(float(v) for v in row.split(",")) for row in text.split(";"))


_PARSERS = {
    "mu": _parse_mu,
    "sigma": _parse_sigma,
    "seed": int,
    "max_picard_iters": int,
    "curve_points": int,
    "out": str,
    "preset": str,
    "path_csv": str,
}


def _coerce(name: str, raw: str):
    parser = _PARSERS.get(name, float)
    try:
        return parser(raw)
    except ValueError as exc:
        raise ConfigError(f"cannot parse {name}={raw!r}: {exc}") from exc


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    cfg = ExperimentConfig(mode=args.mode)
    if args.config:
        ini = configparser.ConfigParser()
        read = ini.read(args.config)
        if not read:
            raise ConfigError(f"config file {args.config!r} not found")
        for name, section in _FIELD_SECTIONS.items():
            if ini.has_option(section, name):
                setattr(cfg, name, _coerce(name, ini.get(section, name)))
    for name, section in _FIELD_SECTIONS.items():
        env = os.environ.get(f"{ENV_PREFIX}_{section.upper()}_{name.upper()}")
        if env is not None:
            setattr(cfg, name, _coerce(name, env))
    overrides = {
        "out": args.out,
        "seed": args.seed,
        "grid_step": args.grid_step,
        "picard_tol": args.tol,
        "preset": args.preset,
        "path_csv": args.path,
    }
    for name, value in overrides.items():
        if value is not None:
            setattr(cfg, name, value)
    cfg.validate()
    return cfg


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gdaport",
        description="Equilibrium portfolio selection under generalized disappointment aversion",
    )
    sub = parser.add_subparsers(dest="mode", required=True)
    for mode in MODES:
        p = sub.add_parser(mode)
        p.add_argument("--config", help="INI config file")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int, help="random seed")
        p.add_argument("--tol", type=float, help="Picard tolerance")
        p.add_argument("--grid-step", dest="grid_step", type=float, help="time grid step")
        if mode == "figures":
            p.add_argument("--preset", help="figure preset name")
        else:
            p.set_defaults(preset=None)
        if mode == "verify":
            p.add_argument("--path", help="strategy-path CSV to verify")
        else:
            p.set_defaults(path=None)
    return parser


def run(cfg: ExperimentConfig) -> int:
    out_dir = Path(cfg.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(command=cfg.mode, parameters=asdict(cfg))
    status = EXIT_OK

    if cfg.mode == "surface":
        grid = np.concatenate([[0.0], np.geomspace(1e-3, cfg.curve_v_max, cfg.curve_points)])
        rows = indifference_curve(cfg.utility(), cfg.params(), grid)
        out = emit_csv(
            out_dir / "surface.csv",
            {"v": rows[:, 0], "y_on_curve": rows[:, 1], "mrs": rows[:, 2]},
        )
        manifest.add_output(out)
    elif cfg.mode in ("equilibrium", "crra", "hdra"):
        market = cfg.market()
        if cfg.mode == "equilibrium":
            if cfg.delta == 1.0:
                path = solve_equilibrium_da(cfg.utility(), cfg.params(), market, cfg.grid_step)
            else:
                path = solve_equilibrium(cfg.utility(), cfg.params(), market, cfg.solver())
        elif cfg.mode == "crra":
            spec = CrraSpec(cfg.rho, cfg.beta, cfg.delta)
            path = equilibrium_path(spec, market, grid_step=cfg.grid_step)
        else:
            hdra = HdraSpec.affine(cfg.hdra_intercept, cfg.hdra_slope)
            path = hdra_equilibrium_path(hdra, cfg.params(), market, cfg.solver())
        out = write_strategy_path(out_dir / "path.csv", path)
        manifest.add_output(out)
    elif cfg.mode == "verify":
        market = cfg.market()
        path = read_strategy_path(cfg.path_csv)
        report = certify_equilibrium(
            cfg.utility(), cfg.params(), market, path, seed=cfg.seed
        )
        out = emit_csv(out_dir / "verification.csv", report.table())
        manifest.add_output(out)
        if not report.passed:
            status = EXIT_SOLVER
    elif cfg.mode == "figures":
        series = figures.run_preset(cfg.preset)
        for name, columns in series.items():
            out = emit_csv(out_dir / f"{name}.csv", columns)
            manifest.add_output(out)

    manifest.write(out_dir)
    return status


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args)
    except ConfigError as exc:
        print(f"gdaport: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return run(cfg)
    except ConfigError as exc:
        print(f"gdaport: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericsError as exc:
        print(f"gdaport: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"gdaport: I/O failure: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
