"""Command-line entry point: ``twrsim {simulate,sweep,optimize,crlb} --config FILE``.

Exit codes: 0 on success, 1 on runtime or numerical failure, 2 on
configuration or usage errors. Diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import contextlib
import dataclasses
import math
import sys
from typing import Optional, Sequence

from twrsim.analytics import CrlbState, RelativeClock, crlb, ds_variance, ss_bias
from twrsim.config import ConfigError, RunConfig
from twrsim.errors import NoPositiveRoot, SingularInformation
from twrsim.harness import (
    analytic_argmin,
    empirical_argmin,
    run_trial,
    sweep_dt53,
    sweep_grid,
    write_sweep_csv,
)
from twrsim.optimizer import ObjectiveParams, measurement_rate, solve_optimal_delay
from twrsim.protocol import Protocol
from twrsim.timebase import seconds_to_cm, variance_to_cm2

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2


class _Out:
    def __init__(self, quiet: bool):
        self.quiet = quiet

    def __call__(self, *args):
        if not self.quiet:
            print(*args)


def _err(msg: str) -> None:
    print(f"twrsim: error: {msg}", file=sys.stderr)


def _load(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if args.config else RunConfig()
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.out is not None:
        changes["output_path"] = args.out
    return dataclasses.replace(cfg, **changes) if changes else cfg


@contextlib.contextmanager
def _open_output(path: Optional[str]):
    if path is None or path == "-":
        yield sys.stdout
    else:
        with open(path, "w", newline="") as fh:
            yield fh


def cmd_simulate(cfg: RunConfig, out: _Out) -> int:
    trial = cfg.trial()
    rate = measurement_rate(trial.timing.dt53, trial.timing.dt32, trial.timing.processing_T)
    out(f"measurements per trial: {trial.n_measurements}")
    out(f"rate_hz: {rate:.0f}")
    for protocol in (Protocol.SS, Protocol.DS):
        if protocol is Protocol.DS and cfg.timestamp_log:
            with open(cfg.timestamp_log, "w", newline="") as log:
                res = run_trial(trial, protocol, log=log)
        else:
            res = run_trial(trial, protocol)
        name = protocol.value
        out(f"{name} mean_error: {res.mean_error:.6e} s ({res.mean_error_cm:.4f} cm)")
        out(f"{name} std: {res.std:.6e} s ({res.std_cm:.4f} cm)")
    R = cfg.noise.effective_variance
    rel = trial.relative_clock
    ds_std = math.sqrt(ds_variance(R, trial.timing.dt32, trial.timing.dt53))
    out(f"predicted SS bias: {ss_bias(rel, trial.timing.dt32):.6e} s")
    out(f"predicted SS std: {math.sqrt(R):.6e} s ({seconds_to_cm(math.sqrt(R)):.4f} cm)")
    out(f"predicted DS std: {ds_std:.6e} s ({seconds_to_cm(ds_std):.4f} cm)")
    return EXIT_OK


def cmd_sweep(cfg: RunConfig, out: _Out) -> int:
    if cfg.sweep is None:
        raise ConfigError("sweep subcommand needs a [sweep] section")
    spec = cfg.sweep
    grid = sweep_grid(spec.dt53_min, spec.dt53_max, spec.points, spec.log_spaced)
    rows = sweep_dt53(cfg.trial(), grid, workers=cfg.workers)
    to_stdout = cfg.output_path in (None, "-")
    with _open_output(cfg.output_path) as fh:
        write_sweep_csv(rows, fh)
    stream = sys.stderr if to_stdout else sys.stdout
    report = (lambda *a: None) if out.quiet else (lambda *a: print(*a, file=stream))
    report(f"rows: {len(rows)}")
    report(f"empirical argmin dt53: {empirical_argmin(rows):.6e} s")
    report(f"analytic argmin dt53: {analytic_argmin(rows):.6e} s")
    return EXIT_OK


def cmd_optimize(cfg: RunConfig, out: _Out) -> int:
    R = cfg.noise.variance_R
    if R <= 0:
        raise ConfigError("optimize needs a positive [noise] variance_R")
    params = ObjectiveParams(cfg.timing.dt32, cfg.timing.processing_T, R)
    opt = solve_optimal_delay(params)
    var = ds_variance(R, params.dt32, opt.dt53_star)
    rate = measurement_rate(opt.dt53_star, params.dt32, params.processing_T)
    out(f"optimal dt53: {opt.dt53_star:.6e} s ({opt.dt53_star * 1e3:.4f} ms)")
    out(f"cubic residual: {opt.residual:.3e} (relative {opt.relative_residual:.3e})")
    out(f"predicted std: {math.sqrt(var):.6e} s ({seconds_to_cm(math.sqrt(var)):.4f} cm)")
    out(f"predicted rate_hz: {rate:.0f}")
    out(f"predicted r_avg: {opt.r_avg_at_star:.6e} s^3 ({variance_to_cm2(opt.r_avg_at_star):.6e} cm^2 s)")
    return EXIT_OK


def cmd_crlb(cfg: RunConfig, out: _Out) -> int:
    R = cfg.noise.variance_R
    if R <= 0:
        raise ConfigError("crlb needs a positive [noise] variance_R")
    state = CrlbState(
        tof=cfg.scene.tof_initial,
        origin=cfg.clock_i.offset,
        rel=RelativeClock.between(cfg.clock_i, cfg.clock_j),
        dt32_j=cfg.timing.dt32,
        dt53_j=cfg.timing.dt53,
    )
    res = crlb(state, R)
    ratio = res.tof_variance_bound / ds_variance(R, state.dt32_j, state.dt53_j)
    out(res.report())
    out(f"tof_variance_bound_cm2 {variance_to_cm2(res.tof_variance_bound):.12g}")
    out(f"ratio_to_ds_variance {ratio:.12g}")
    return EXIT_OK


COMMANDS = {
    "simulate": (cmd_simulate, "run one SS and one DS trial and compare with the models"),
    "sweep": (cmd_sweep, "Monte Carlo sweep over dt53, written as CSV"),
    "optimize": (cmd_optimize, "optimal dt53 for the configured dt32 and processing time"),
    "crlb": (cmd_crlb, "Cramer-Rao bound on the ToF variance at the configured state"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run configuration file")
    common.add_argument("--seed", type=int, help="override [run] seed")
    common.add_argument("--out", help="output CSV path (overrides [run] output_path)")
    common.add_argument("--quiet", action="store_true", help="suppress the text report")
    parser = argparse.ArgumentParser(prog="twrsim", description="Two-way ranging simulation, delay optimization and CRLB.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=help_text, description=help_text)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = _load(args)
        return COMMANDS[args.command][0](cfg, _Out(args.quiet))
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_USAGE
    except (NoPositiveRoot, SingularInformation, ArithmeticError) as exc:
        _err(f"{type(exc).__name__}: {exc}")
        return EXIT_RUNTIME
    except (OSError, ValueError) as exc:
        _err(f"{type(exc).__name__}: {exc}")
        return EXIT_RUNTIME


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
