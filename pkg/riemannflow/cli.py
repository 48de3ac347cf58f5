"""Command-line entry point: ``python -m riemannflow <command> [options]``."""
import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

from . import analysis, sweep
from .config import RunConfig, load_config
from .errors import ConfigError, DomainError, RiemannFlowError
from .integrator import integrate, launch_on_ray, launch_on_shell
from .io import gap_table_to_dict, read_json, read_trajectory_csv, sweep_to_dict, write_json, write_trajectory_csv
from .misc import get_info
from .plotting import emit_svg_plot
from .surface import turning_point

logger = logging.getLogger(__name__)

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERICAL = 3

# Flag destination -> RunConfig field
_INTEGRATOR_FLAGS = (
    ("rel_tol", float), ("abs_tol", float), ("energy_tol", float), ("max_time", float),
    ("escape_radius", float), ("closure_tol", float), ("turning_tol", float),
    ("max_step_angle", float), ("max_steps", int),
)


def _common(parser: argparse.ArgumentParser, launch: bool = True) -> None:
    parser.add_argument("--epsilon", type=str, default=None, help="decimal, '1/pi' or '1+sqrt2'")
    parser.add_argument("--config", type=Path, default=None, help="JSON file with RunConfig keys")
    parser.add_argument("--out", type=Path, default=None, help="output file")
    if launch:
        parser.add_argument("--y0", type=float, default=None, help="launch at -i*y0")
        parser.add_argument("--re", type=float, default=None, help="launch real part")
        parser.add_argument("--im", type=float, default=None, help="launch imaginary part")
    group = parser.add_argument_group("integrator")
    for name, kind in _INTEGRATOR_FLAGS:
        group.add_argument("--" + name.replace("_", "-"), dest=name, type=kind, default=None)
    group.add_argument("--tmax", dest="max_time", type=float, default=None, help="alias of --max-time")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="riemannflow",
                                     description="Complex classical trajectories of H = p^2 + x^2 (ix)^eps")
    parser.add_argument("--log-level", choices=["debug", "info", "warning", "error"], default="warning")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("trajectory", help="integrate one orbit and write it as CSV")
    _common(p)
    p.add_argument("--duration", type=float, default=None, help="signed run length instead of the time budget")

    p = sub.add_parser("period", help="analytic and numeric period")
    _common(p)

    p = sub.add_parser("turning-points", help="list turning-point pairs")
    _common(p, launch=False)
    p.add_argument("--nmax", dest="n_max", type=int, default=None)

    p = sub.add_parser("critical", help="separatrix x_n by bisection")
    _common(p, launch=False)
    p.add_argument("--n", type=int, default=None, help="sheet depth of the boundary")
    p.add_argument("--y-lo", dest="y_lo", type=float, default=None)
    p.add_argument("--y-hi", dest="y_hi", type=float, default=None)
    p.add_argument("--tol", type=float, default=None)

    p = sub.add_parser("terminate", help="terminating start s_n")
    _common(p, launch=False)
    p.add_argument("--n", type=int, default=None)

    p = sub.add_parser("escape", help="escape-ray angles and an optional blowup fit")
    _common(p, launch=False)
    p.add_argument("--nmin", type=int, default=-2)
    p.add_argument("--nmax", type=int, default=2)
    p.add_argument("--fit-ray", type=int, default=None, help="integrate outward along ray N and fit the blowup")
    p.add_argument("--r0", type=float, default=50.0, help="launch radius for --fit-ray")

    p = sub.add_parser("classify", help="closed / terminating / escaping verdict")
    _common(p)

    p = sub.add_parser("sweep-x0", help="critical curve x0(eps)")
    _common(p, launch=False)
    p.add_argument("--grid", dest="eps_grid", type=str, default=None, help="start:stop:count or a,b,c")
    p.add_argument("--tol", type=float, default=None)
    p.add_argument("--workers", type=int, default=None)

    p = sub.add_parser("sweep-s0", help="terminating start s0(eps)")
    _common(p, launch=False)
    p.add_argument("--grid", dest="eps_grid", type=str, default=None, help="start:stop:count or a,b,c")
    p.add_argument("--minimum", action="store_true", help="golden-section search for the s0 minimum")
    p.add_argument("--eps-lo", dest="eps_lo", type=str, default=None)
    p.add_argument("--eps-hi", dest="eps_hi", type=str, default=None)
    p.add_argument("--workers", type=int, default=None)

    p = sub.add_parser("gap", help="terminating crossings s_n inside the gap for eps > 2")
    _common(p, launch=False)
    p.add_argument("--nmax", dest="n_max", type=int, default=None)
    p.add_argument("--workers", type=int, default=None)

    p = sub.add_parser("plot", help="SVG from trajectory CSV files or a sweep/gap JSON file")
    p.add_argument("inputs", type=Path, nargs="+")
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--title", type=str, default=None)
    p.add_argument("--mark-y", type=float, action="append", default=[], help="mark -i*y on the axis")

    return parser


def _run_config(args: argparse.Namespace) -> RunConfig:
    """File values first, then every flag that was given."""
    base = RunConfig.from_mapping(load_config(args.config)) if getattr(args, "config", None) else RunConfig()
    fields = set(RunConfig.__dataclass_fields__)
    # Epsilon tokens and grid text are parsed by from_mapping
    return base.merged({k: v for k, v in vars(args).items() if k in fields})


def _emit(summary: Dict[str, Any], out: Optional[Path]) -> None:
    if out is not None:
        write_json(summary, out)
    for key, value in summary.items():
        print(f"{key}: {value}")


def _cmd_trajectory(args, cfg: RunConfig) -> int:
    launch = launch_on_shell(cfg.initial_point(), 1, cfg.epsilon)
    traj = integrate(launch, cfg.epsilon, cfg.integrator_config(), duration=cfg.duration)
    if args.out is not None:
        write_trajectory_csv(traj, args.out)
    get_info(traj)
    return EXIT_OK


def _cmd_period(args, cfg: RunConfig) -> int:
    analytic = analysis.analytic_period(cfg.epsilon)
    numeric = analysis.numeric_period(cfg.initial_point(), cfg.epsilon, cfg.integrator_config())
    _emit({"epsilon": cfg.epsilon, "analytic": analytic, "numeric": numeric,
           "difference": abs(numeric - analytic)}, args.out)
    return EXIT_OK


def _cmd_turning_points(args, cfg: RunConfig) -> int:
    rows = []
    for n in range(cfg.n_max + 1):
        for side in ("right", "left"):
            tp = turning_point(n, side, cfg.epsilon)
            x = tp.location.x
            rows.append({"n": n, "side": side, "theta": tp.location.theta, "sheet": tp.location.sheet,
                         "re": x.real, "im": x.imag})
            print(f"n={n} {side:5s} theta={tp.location.theta:+.9f} sheet={tp.location.sheet:+d} "
                  f"x={x.real:+.9f}{x.imag:+.9f}i")
    if args.out is not None:
        write_json({"epsilon": cfg.epsilon, "turning_points": rows}, args.out)
    return EXIT_OK


def _cmd_critical(args, cfg: RunConfig) -> int:
    if cfg.y_lo is None or cfg.y_hi is None:
        raise ConfigError("critical needs --y-lo and --y-hi")
    y = analysis.critical_point(cfg.epsilon, cfg.n, cfg.y_lo, cfg.y_hi, cfg.tol, cfg.integrator_config())
    _emit({"epsilon": cfg.epsilon, "boundary": cfg.n, "y": y, "tolerance": cfg.tol}, args.out)
    return EXIT_OK


def _cmd_terminate(args, cfg: RunConfig) -> int:
    y = analysis.terminating_start(cfg.n, cfg.epsilon, cfg.integrator_config())
    _emit({"epsilon": cfg.epsilon, "n": cfg.n, "y": y}, args.out)
    return EXIT_OK


def _cmd_escape(args, cfg: RunConfig) -> int:
    rays = analysis.escape_angles(cfg.epsilon, range(args.nmin, args.nmax + 1))
    summary: Dict[str, Any] = {"epsilon": cfg.epsilon,
                               "rays": [{"n": r.n, "theta": r.theta, "sheet": r.sheet} for r in rays]}
    if args.fit_ray is not None:
        theta0 = analysis.escape_angles(cfg.epsilon, [args.fit_ray])[0].theta
        traj = integrate(launch_on_ray(args.r0, theta0, cfg.epsilon), cfg.epsilon, cfg.integrator_config())
        fit = analysis.fit_escape(traj, cfg.epsilon)
        summary.update({"t_star": fit.t_star, "fitted_exponent": fit.fitted_exponent,
                        "expected_exponent": fit.expected_exponent, "residual": fit.residual,
                        "phase_residual": analysis.escape_phase_residual(float(traj.theta[-1]), cfg.epsilon)})
    _emit(summary, args.out)
    return EXIT_OK


def _cmd_classify(args, cfg: RunConfig) -> int:
    result = analysis.classify(cfg.initial_point(), cfg.epsilon, cfg.integrator_config())
    verdict = result.verdict
    summary: Dict[str, Any] = {"epsilon": cfg.epsilon, "verdict": type(verdict).__name__,
                               "pt_symmetric": result.pt_symmetric, "pt_distance": result.pt_distance}
    if isinstance(verdict, analysis.Closed):
        summary.update({"period": verdict.period, "sheets_visited": sorted(verdict.sheets_visited),
                        "enclosed": sorted(f"{n}{side[0]}" for n, side in verdict.enclosed_pairs)})
    elif isinstance(verdict, analysis.Terminating):
        summary.update({"pair_n": verdict.pair_n, "side": verdict.side, "s_value": verdict.s_value})
    elif isinstance(verdict, analysis.Escaping):
        summary.update({"theta": verdict.theta, "blowup_time": verdict.blowup_time})
    elif isinstance(verdict, analysis.Spiraling):
        summary.update({"max_radius": verdict.max_radius, "growth": verdict.growth,
                        "sheets_visited": sorted(verdict.sheets_visited)})
    else:
        summary["reason"] = verdict.reason
    _emit(summary, args.out)
    return EXIT_OK


def _cmd_sweep_x0(args, cfg: RunConfig) -> int:
    if cfg.eps_grid is None:
        raise ConfigError("sweep-x0 needs --grid")
    result = sweep.sweep_x0(cfg.eps_grid, cfg.integrator_config(), cfg.tol, cfg.workers)
    _write_sweep(result, args.out)
    return EXIT_OK


def _cmd_sweep_s0(args, cfg: RunConfig) -> int:
    if args.minimum:
        if cfg.eps_lo is None or cfg.eps_hi is None:
            raise ConfigError("sweep-s0 --minimum needs --eps-lo and --eps-hi")
        eps_star, y_star = sweep.find_s0_minimum(cfg.eps_lo, cfg.eps_hi, cfg.integrator_config())
        _emit({"eps_star": eps_star, "value_y_star": y_star}, args.out)
        return EXIT_OK
    if cfg.eps_grid is None:
        raise ConfigError("sweep-s0 needs --grid or --minimum")
    result = sweep.sweep_s0(cfg.eps_grid, cfg.integrator_config(), cfg.workers)
    _write_sweep(result, args.out)
    return EXIT_OK


def _write_sweep(result: sweep.SweepResult, out: Optional[Path]) -> None:
    if out is not None:
        write_json(sweep_to_dict(result), out)
    for sample in result.samples:
        print(f"eps={sample.epsilon:.9g} {sample.kind}=-{sample.value_y:.9g}i")
    for eps, reason in result.failures:
        print(f"eps={eps:.9g} failed: {reason}")


def _cmd_gap(args, cfg: RunConfig) -> int:
    table = sweep.gap_table(cfg.epsilon, cfg.n_max, cfg.integrator_config(), cfg.workers)
    if args.out is not None:
        write_json(gap_table_to_dict(table), args.out)
    for entry in table.entries:
        if entry.y is None:
            print(f"n={entry.n}: no termination ({entry.verdict or entry.reason})")
        else:
            print(f"n={entry.n}: s_n=-{entry.y:.9g}i")
    if table.edge is not None:
        print(f"R0 upper edge: -{table.edge:.9g}i")
    print(f"in-gap order (bottom to top): {table.in_gap_order()}")
    return EXIT_OK


def _cmd_plot(args) -> int:
    markers = [(complex(0.0, -y), f"-{y:g}i") for y in args.mark_y]
    if all(path.suffix.lower() == ".json" for path in args.inputs):
        if len(args.inputs) != 1:
            raise ConfigError("plot takes a single JSON summary")
        emit_svg_plot(read_json(args.inputs[0]), args.out, title=args.title, markers=markers)
    else:
        trajectories = [read_trajectory_csv(path) for path in args.inputs]
        emit_svg_plot(trajectories, args.out, title=args.title, markers=markers)
    return EXIT_OK


_COMMANDS = {
    "trajectory": _cmd_trajectory,
    "period": _cmd_period,
    "turning-points": _cmd_turning_points,
    "critical": _cmd_critical,
    "terminate": _cmd_terminate,
    "escape": _cmd_escape,
    "classify": _cmd_classify,
    "sweep-x0": _cmd_sweep_x0,
    "sweep-s0": _cmd_sweep_s0,
    "gap": _cmd_gap,
}


def cli_main(argv: Optional[List[str]] = None) -> int:
    """Run one command and return its exit code: 0 success, 2 usage error, 3 numerical failure."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE

    logging.basicConfig(level=getattr(logging, args.log_level.upper()), format=LOG_FORMAT)
    try:
        if args.command == "plot":
            return _cmd_plot(args)
        cfg = _run_config(args)
        return _COMMANDS[args.command](args, cfg)
    except (ConfigError, DomainError) as exc:
        parser.print_usage(sys.stderr)
        print(f"riemannflow: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except RiemannFlowError as exc:
        print(f"riemannflow: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
