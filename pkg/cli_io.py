"""
Peakon lab command line.

Parses run configurations, drives the solver and the analyzers, and writes
CSV / key=value outputs for external plotting.

Usage:
    python cli_io.py run --seed-recipe fig1 [--out DIR]
    python cli_io.py predict-blowup --config my_run.env
    python cli_io.py besov-profile runs/snapshots/snapshot_0003.csv --s 1 --p 2 --r 2
    python cli_io.py sweep --seed-recipe fig1 --param "initial_data.amplitude=-5e,-10e,-20e" --workers 3
    python cli_io.py verify --seed-recipe fig2

Configuration documents are key=value lines (dotenv syntax). Numeric values
accept decimal literals, e, pi, + - * /, and the Euler suffix: "-20e" is -20*e.
"""

import argparse
import asyncio
import itertools
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from io import StringIO
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from dotenv import dotenv_values, load_dotenv

from analysis import (
    energy_drift,
    flow_map_integrate,
    gradient_bound_residual,
    lagrangian_residual,
    non_crossing_margin,
    sup_bound_residual,
    w1inf_doubling_holds,
)
from besov import besov_norm, block_norms, build_partition, high_frequency_fraction
from blowup_predictor import BlowupReport, check_condition, compute_t1
from common.constants import (
    CODE_VERSION,
    DEFAULT_OUT_DIR,
    DIAGNOSTICS_COLUMNS,
    DIAGNOSTICS_FILE,
    LOG_FILE,
    MANIFEST_FILE,
    OUT_DIR_ENV,
    REPORT_FILE,
    SNAPSHOT_COLUMNS,
    SNAPSHOT_DIR,
    SNAPSHOT_TEMPLATE,
    SUMMARY_FILE,
)
from common.errors import ConfigurationError, PeakonLabError
from common.utils import evaluate_expression, format_key_values, parse_call, write_text_atomic
from grid_field import Field, make_grid
from helmholtz import HelmholtzParams
from peakon import InitialDataSpec, build_initial_data
from timestepper import SimConfig, SimResult, run

try:
    from rich.console import Console
    from rich.table import Table
    from rich import box
    RICH_AVAILABLE = True
except ImportError:
    RICH_AVAILABLE = False

RECIPES_DIR = os.path.join(os.path.dirname(os.path.abspath(__file__)), "recipes")
RECIPES = ("fig1", "fig2", "fig3")
VERIFY_FILE = "verify_report.txt"
DEFAULT_SEED_COUNT = 17

logger = logging.getLogger(__name__)


def setup_logging(file_log_level="DEBUG", quiet=False, log_path=LOG_FILE):
    """Configures logging to both console (INFO) and file (specified level); quiet keeps errors only."""
    log_level = getattr(logging, str(file_log_level).upper(), logging.DEBUG)
    root = logging.getLogger()
    root.setLevel(logging.ERROR if quiet else min(log_level, logging.INFO))

    if root.hasHandlers():
        root.handlers.clear()

    formatter = logging.Formatter('%(asctime)s - %(name)s - %(levelname)s - %(message)s')

    file_handler = logging.FileHandler(log_path)
    file_handler.setLevel(logging.ERROR if quiet else log_level)
    file_handler.setFormatter(formatter)
    root.addHandler(file_handler)

    console_handler = logging.StreamHandler()
    console_handler.setLevel(logging.ERROR if quiet else logging.INFO)
    console_handler.setFormatter(formatter)
    root.addHandler(console_handler)

    logging.getLogger('numba').setLevel(logging.WARNING)
    return root


# --- configuration ---------------------------------------------------------

def _number(key, text):
    value = evaluate_expression(text)
    if isinstance(value, list):
        raise ConfigurationError(f"{key} must be a number, got '{text}'")
    return float(value)


def _integer(key, text):
    value = _number(key, text)
    if value != int(value):
        raise ConfigurationError(f"{key} must be an integer, got '{text}'")
    return int(value)


def _number_list(key, text):
    value = evaluate_expression(text if str(text).strip().startswith("[") else f"[{text}]")
    try:
        return tuple(float(item) for item in value)
    except TypeError:
        raise ConfigurationError(f"{key} must be a list of numbers, got '{text}'")


def _initial_data(key, text):
    name, args, kwargs = parse_call(text)
    if args:
        raise ConfigurationError(f"initial_data arguments must be named, got '{text}'")
    return InitialDataSpec(name, kwargs)


# key -> (SimConfig field, converter)
CONFIG_KEYS = {
    "beta0": ("params", lambda key, text: HelmholtzParams(_number(key, text))),
    "initial_data": ("initial_data", _initial_data),
    "half_width": ("half_width", _number),
    "n_points": ("n_points", _integer),
    "t_end": ("t_end", _number),
    "scheme": ("scheme", lambda key, text: str(text).strip()),
    "cfl_safety": ("cfl_safety", _number),
    "blowup_factor": ("blowup_factor", _number),
    "output_interval": ("output_interval", _number),
    "diagnostics_every": ("diagnostics_every", _integer),
    "dt_min": ("dt_min", _number),
    "max_steps": ("max_steps", _integer),
    "analytic_v_sup": ("analytic_v_sup", _number),
    "analytic_vx_sup": ("analytic_vx_sup", _number),
    "seed_positions": ("seed_positions", _number_list),
}


def parse_config(text: str) -> SimConfig:
    """
    Parse a key=value run document into a validated SimConfig.

    Raises:
        ConfigurationError: unknown keys, missing initial_data / beta0, or a
            value violating its constraint (the message names the field)
    """
    raw = dotenv_values(stream=StringIO(text), interpolate=False)
    entries = {key.strip().lower(): value for key, value in raw.items()}

    unknown = sorted(set(entries) - set(CONFIG_KEYS))
    if unknown:
        raise ConfigurationError(f"unknown configuration keys: {', '.join(unknown)}")
    if not entries.get("initial_data"):
        raise ConfigurationError("initial_data missing")
    if not entries.get("beta0"):
        raise ConfigurationError("beta0 missing")

    kwargs = {}
    for key, value in entries.items():
        if value is None or str(value).strip() == "":
            raise ConfigurationError(f"{key} has no value")
        target, convert = CONFIG_KEYS[key]
        kwargs[target] = convert(key, value)
    return SimConfig(**kwargs)


def load_config_text(config_path: Optional[str] = None, seed_recipe: Optional[str] = None) -> str:
    if seed_recipe is not None:
        if seed_recipe not in RECIPES:
            raise ConfigurationError(f"seed recipe must be one of {', '.join(RECIPES)}, got '{seed_recipe}'")
        config_path = os.path.join(RECIPES_DIR, f"{seed_recipe}.env")
    if config_path is None:
        raise ConfigurationError("either --config or --seed-recipe is required")
    if not os.path.exists(config_path):
        raise ConfigurationError(f"config file not found: {config_path}")
    with open(config_path) as f:
        return f.read()


def config_echo(config):
    echo = {
        "beta0": config.params.beta0,
        "initial_data": config.initial_data.describe(),
    }
    for key, (target, _) in CONFIG_KEYS.items():
        if target in ("params", "initial_data"):
            continue
        value = getattr(config, target)
        if value is not None:
            echo[key] = value
    return echo


def apply_override(config, key, value):
    """Sweep override; 'initial_data.<arg>' addresses a generator argument."""
    if key.startswith("initial_data."):
        arg = key.split(".", 1)[1]
        args = dict(config.initial_data.args)
        args[arg] = value
        return replace(config, initial_data=InitialDataSpec(config.initial_data.name, args))
    if key == "beta0":
        return replace(config, params=HelmholtzParams(value))
    if key not in CONFIG_KEYS:
        raise ConfigurationError(f"unknown sweep parameter '{key}'")
    target, _ = CONFIG_KEYS[key]
    if target in ("n_points", "diagnostics_every", "max_steps"):
        value = int(value)
    return replace(config, **{target: value})


# --- rendering -------------------------------------------------------------

def render_table(title, columns, rows):
    if RICH_AVAILABLE:
        console = Console()
        table = Table(title=title, box=box.ROUNDED)
        for column in columns:
            table.add_column(column, justify="right")
        for row in rows:
            table.add_row(*[_cell(value) for value in row])
        console.print(table)
        return

    print("\n" + "=" * 80)
    print(title)
    print("=" * 80)
    print("  ".join(f"{column:>16}" for column in columns))
    print("-" * 80)
    for row in rows:
        print("  ".join(f"{_cell(value):>16}" for value in row))


def _cell(value):
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


# --- run -------------------------------------------------------------------

@dataclass
class RunManifest:
    config: Dict[str, object]
    code_version: str
    grid: Dict[str, float]
    wall_clock_seconds: float
    verdict: Dict[str, object]
    files: List[str] = field(default_factory=list)
    snapshot_times: List[float] = field(default_factory=list)
    steps: int = 0
    out_dir: str = ""
    error: Optional[str] = None

    def to_dict(self):
        data = asdict(self)
        data["verdict"] = {key: value for key, value in self.verdict.items() if value is not None}
        if self.error is None:
            data.pop("error")
        return data


def diagnostics_frame(result):
    rows = [[getattr(record, column) for column in DIAGNOSTICS_COLUMNS] for record in result.diagnostics]
    return pd.DataFrame(rows, columns=DIAGNOSTICS_COLUMNS)


def snapshot_frame(snapshot):
    return pd.DataFrame(
        {"x": snapshot.v.grid.x, "v": snapshot.v.values, "n": snapshot.n.values},
        columns=SNAPSHOT_COLUMNS,
    )


def write_result(result: SimResult, out_dir: str) -> List[str]:
    """Writes diagnostics.csv and snapshots/snapshot_NNNN.csv; returns paths relative to out_dir."""
    os.makedirs(os.path.join(out_dir, SNAPSHOT_DIR), exist_ok=True)
    files = []

    diagnostics_frame(result).to_csv(os.path.join(out_dir, DIAGNOSTICS_FILE), index=False)
    files.append(DIAGNOSTICS_FILE)

    for i, snapshot in enumerate(result.snapshots):
        relative = os.path.join(SNAPSHOT_DIR, SNAPSHOT_TEMPLATE.format(i))
        snapshot_frame(snapshot).to_csv(os.path.join(out_dir, relative), index=False)
        files.append(relative)
    return files


def execute_run(config: SimConfig, out_dir: str) -> Tuple[RunManifest, SimResult]:
    """Run the solver and write its outputs; returns (RunManifest, SimResult)."""
    run_logger = logging.getLogger('RunCommand')
    os.makedirs(out_dir, exist_ok=True)
    grid = config.grid

    started = time.time()
    result = run(config)
    elapsed = time.time() - started

    files = write_result(result, out_dir)
    manifest = RunManifest(
        config=config_echo(config),
        code_version=CODE_VERSION,
        grid={"half_width": grid.half_width, "n_points": grid.n_points, "dx": grid.dx},
        wall_clock_seconds=round(elapsed, 3),
        verdict=asdict(result.verdict),
        files=files,
        snapshot_times=[snapshot.t for snapshot in result.snapshots],
        steps=result.steps,
        out_dir=os.path.abspath(out_dir),
    )
    write_text_atomic(os.path.join(out_dir, MANIFEST_FILE), format_key_values(manifest.to_dict()))
    run_logger.info(
        f"{result.verdict.kind} after {result.steps} steps in {elapsed:.2f}s; outputs in {out_dir}"
    )
    return manifest, result


def cmd_run(config: SimConfig, out_dir: str) -> RunManifest:
    return execute_run(config, out_dir)[0]


# --- predict-blowup ----------------------------------------------------------

def cmd_predict_blowup(config: SimConfig, out_dir: Optional[str] = None, show: bool = True) -> Dict[str, BlowupReport]:
    """
    Evaluate the blow-up certificate from grid sup-norms and, when the config
    carries analytic bounds, from those too. Returns {bounds_source: BlowupReport}.
    """
    predict_logger = logging.getLogger('PredictCommand')
    grid = config.grid
    _, n0 = build_initial_data(grid, config.initial_data, config.params)

    reports = {"measured": check_condition(n0, config.params)}
    if config.analytic_bounds is not None:
        reports["analytic"] = check_condition(n0, config.params, sup_bounds=config.analytic_bounds)

    for source, report in reports.items():
        predict_logger.info(
            f"{source}: b={report.b:.6g} T1={report.t1} threshold={report.threshold} "
            f"T2={report.t2} -> {report.verdict}"
        )

    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        document = {source: report.to_dict() for source, report in reports.items()}
        document["config"] = config_echo(config)
        write_text_atomic(os.path.join(out_dir, REPORT_FILE), format_key_values(document))

    if show:
        rows = [
            (source, report.b, report.t1 if report.t1 is not None else "-",
             report.threshold if report.threshold is not None else "-",
             len(report.witnesses), report.t2 if report.t2 is not None else "-", report.verdict)
            for source, report in reports.items()
        ]
        render_table("Blow-up certificate", ["bounds", "b", "T1", "threshold", "witnesses", "T2", "verdict"], rows)
    return reports


# --- besov-profile -----------------------------------------------------------

def load_snapshot(path: str, column: str = "n") -> Field:
    """Rebuild the grid from the x column and return the requested field."""
    if not os.path.exists(path):
        raise ConfigurationError(f"snapshot not found: {path}")
    frame = pd.read_csv(path)
    missing = [name for name in ("x", column) if name not in frame.columns]
    if missing:
        raise ConfigurationError(f"snapshot {path} lacks columns: {', '.join(missing)}")

    x = frame["x"].to_numpy(dtype=float)
    grid = make_grid(-x[0], len(x))
    if not np.allclose(x, grid.x, rtol=0.0, atol=1e-9 * grid.half_width):
        raise ConfigurationError(f"snapshot {path} is not on a uniform periodic grid")
    return Field(grid, frame[column].to_numpy(dtype=float))


def cmd_besov_profile(
    snapshot_path: str, s: float, p: float, r: float, column: str = "n", show: bool = True
) -> Tuple[List[Tuple[int, float, float]], float]:
    """
    Returns (rows of (j, 2^(j s) ||Delta_j f||_Lp, ||f - S_j f||_2 / ||f||_2),
    l^r aggregate). The last column is the share of f the low-pass S_j misses.
    """
    f = load_snapshot(snapshot_path, column)
    partition = build_partition(f.grid)
    rows = [
        (j, value, high_frequency_fraction(f, partition, j))
        for j, value in block_norms(f, s, p, partition)
    ]
    aggregate = besov_norm(f, s, p, r, partition)
    if show:
        render_table(
            f"Besov profile of {column} (s={s}, p={p}, r={r}): {aggregate:.6g}",
            ["j", "2^(js)|Delta_j f|_p", "|f - S_j f|_2 / |f|_2"],
            rows,
        )
    return rows, aggregate


# --- sweep -----------------------------------------------------------------

def expand_grid(parameter_grid):
    """Cartesian product of {key: [values]}; an empty grid has no points."""
    if not parameter_grid or any(len(values) == 0 for values in parameter_grid.values()):
        return []
    keys = sorted(parameter_grid)
    return [dict(zip(keys, combo)) for combo in itertools.product(*(parameter_grid[key] for key in keys))]


def _sweep_worker(config, overrides, run_dir):
    """Runs in a worker process; failures come back as data."""
    try:
        for key, value in overrides.items():
            config = apply_override(config, key, value)
        manifest = cmd_run(config, run_dir)
        return manifest.to_dict()
    except (PeakonLabError, OSError) as e:
        return {"out_dir": os.path.abspath(run_dir), "error": f"{type(e).__name__}: {e}", "verdict": {}}


async def _run_sweep(config, points, out_dir, workers):
    loop = asyncio.get_running_loop()
    with ProcessPoolExecutor(max_workers=workers) as pool:
        tasks = [
            loop.run_in_executor(pool, _sweep_worker, config, overrides, os.path.join(out_dir, f"run_{i:04d}"))
            for i, overrides in enumerate(points)
        ]
        return await asyncio.gather(*tasks, return_exceptions=True)


def cmd_sweep(
    config: SimConfig, parameter_grid: Dict[str, List[Any]], out_dir: str, workers: Optional[int] = None
) -> List[Any]:
    """
    Independent runs over the parameter grid, executed concurrently, one
    manifest each, plus summary.csv (parameters -> verdict, bracket, error).
    """
    sweep_logger = logging.getLogger('SweepCommand')
    os.makedirs(out_dir, exist_ok=True)
    points = expand_grid(parameter_grid)
    sweep_logger.info(f"sweeping {len(points)} runs into {out_dir}")

    manifests = []
    if points:
        outcomes = asyncio.run(_run_sweep(config, points, out_dir, workers or min(len(points), os.cpu_count() or 1)))
        for i, outcome in enumerate(outcomes):
            if isinstance(outcome, BaseException):
                sweep_logger.error(f"run_{i:04d} failed: {outcome}")
                outcome = {"out_dir": os.path.abspath(os.path.join(out_dir, f"run_{i:04d}")),
                           "error": f"{type(outcome).__name__}: {outcome}", "verdict": {}}
            manifests.append(outcome)

    parameter_columns = sorted(parameter_grid) if points else []
    columns = ["run"] + parameter_columns + ["verdict", "reason", "t_low", "t_high", "error"]
    rows = []
    for i, (overrides, manifest) in enumerate(zip(points, manifests)):
        verdict = manifest.get("verdict", {})
        rows.append(
            [f"run_{i:04d}"]
            + [overrides[key] for key in parameter_columns]
            + [verdict.get("kind"), verdict.get("reason"), verdict.get("t_low"), verdict.get("t_high"),
               manifest.get("error")]
        )
    pd.DataFrame(rows, columns=columns).to_csv(os.path.join(out_dir, SUMMARY_FILE), index=False)
    return manifests


def parse_param_flags(flags):
    """['key=v1,v2', ...] -> {key: [v1, v2]}."""
    grid = {}
    for flag in flags or []:
        if "=" not in flag:
            raise ConfigurationError(f"--param must look like key=v1,v2,..., got '{flag}'")
        key, values = flag.split("=", 1)
        key = key.strip().lower()
        grid[key] = [_number(key, item) for item in values.split(",") if item.strip()]
    return grid


# --- verify ----------------------------------------------------------------

def default_seeds(grid):
    quarter = grid.half_width / 4.0
    return np.linspace(-quarter, quarter, DEFAULT_SEED_COUNT)


def cmd_verify(config: SimConfig, out_dir: Optional[str] = None, show: bool = True) -> Dict[str, Any]:
    """
    Run a configuration and evaluate the invariant monitors on its output:
    sign preservation, energy monotonicity, gradient and sup bounds,
    n(t, psi) psi_x = n0 along characteristics, flow-map ordering, mass drift.
    """
    verify_logger = logging.getLogger('VerifyCommand')
    if out_dir is not None:
        manifest, result = execute_run(config, out_dir)
    else:
        result = run(config)
    params = config.params
    grid = config.grid

    snapshots = result.snapshots
    n0 = snapshots[0].n
    n0_scale = max(1.0, n0.sup_norm())
    seeds = np.asarray(config.seed_positions) if config.seed_positions else default_seeds(grid)

    trajectory = flow_map_integrate(result.v_snapshots(), params, seeds)
    masses = [record.mass_n for record in result.diagnostics]
    t1 = compute_t1(snapshots[0].v, params)

    monitors = {
        "verdict": result.verdict.kind,
        "min_n_relative": min(record.min_n for record in result.diagnostics) / n0_scale,
        "energy_drift": energy_drift(result.diagnostics),
        "gradient_bound_residual": max(
            gradient_bound_residual(snap.v, params) / max(snap.v.sup_norm(), 1e-300) for snap in snapshots
        ),
        "sup_bound_residual": max(sup_bound_residual(snap.v) for snap in snapshots),
        "lagrangian_residual": lagrangian_residual(trajectory, [snap.n for snap in snapshots], n0),
        "min_psi_x": trajectory.min_psi_x(),
        "non_crossing_margin": non_crossing_margin(trajectory),
        "escaped_paths": trajectory.escaped_count,
        "mass_drift": max(abs(m - masses[0]) for m in masses) / max(1.0, abs(masses[0])),
        "w1inf_doubling_holds": w1inf_doubling_holds(result.diagnostics, t1) if t1 is not None else True,
    }
    verify_logger.info(f"monitors: {monitors}")

    if out_dir is not None:
        write_text_atomic(os.path.join(out_dir, VERIFY_FILE), format_key_values(monitors))
    if show:
        render_table("Invariant monitors", ["monitor", "value"], list(monitors.items()))
    return monitors


# --- entry point -------------------------------------------------------------

def parse_arguments(argv=None):
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--out', default=None, help=f'Output directory (default: ${OUT_DIR_ENV} or {DEFAULT_OUT_DIR})')
    common.add_argument('--log-level', default='INFO', help='File log level (default: INFO)')
    common.add_argument('--quiet', action='store_true', help='Only log errors')

    source = argparse.ArgumentParser(add_help=False)
    group = source.add_mutually_exclusive_group(required=True)
    group.add_argument('--config', help='Path to a key=value run configuration')
    group.add_argument('--seed-recipe', choices=RECIPES, help='Shipped reproduction recipe')

    parser = argparse.ArgumentParser(description='Peakon lab: solver, blow-up certificate and invariant monitors')
    commands = parser.add_subparsers(dest='command', required=True)

    commands.add_parser('run', parents=[common, source], help='Integrate a configuration and write CSV outputs')
    commands.add_parser('predict-blowup', parents=[common, source], help='Evaluate the blow-up certificate')
    commands.add_parser('verify', parents=[common, source], help='Run and report the invariant monitors')

    besov_parser = commands.add_parser('besov-profile', parents=[common], help='Dyadic block energies of a snapshot')
    besov_parser.add_argument('snapshot', help='Snapshot CSV written by run')
    besov_parser.add_argument('--s', type=float, default=0.0, help='Smoothness index (default: 0)')
    besov_parser.add_argument('--p', type=float, default=2.0, help='Integrability index, inf allowed (default: 2)')
    besov_parser.add_argument('--r', type=float, default=2.0, help='Summability index, inf allowed (default: 2)')
    besov_parser.add_argument('--column', default='n', choices=('v', 'n'), help='Field to analyse (default: n)')

    sweep_parser = commands.add_parser('sweep', parents=[common, source], help='Concurrent runs over a parameter grid')
    sweep_parser.add_argument('--param', action='append', default=[],
                              help="Grid axis key=v1,v2,...; initial_data.<arg> addresses generator arguments")
    sweep_parser.add_argument('--workers', type=int, default=None, help='Worker processes (default: one per run)')

    return parser.parse_args(argv)


def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv()
    args = parse_arguments(argv)
    out_dir = args.out or os.getenv(OUT_DIR_ENV, DEFAULT_OUT_DIR)
    os.makedirs(out_dir, exist_ok=True)
    setup_logging(args.log_level, args.quiet, log_path=os.path.join(out_dir, LOG_FILE))

    try:
        if args.command == 'besov-profile':
            cmd_besov_profile(args.snapshot, args.s, args.p, args.r, column=args.column)
            return 0

        config = parse_config(load_config_text(args.config, args.seed_recipe))
        if args.command == 'run':
            manifest = cmd_run(config, out_dir)
            render_table("Run", ["key", "value"], list(manifest.verdict.items()) + [("steps", manifest.steps)])
        elif args.command == 'predict-blowup':
            cmd_predict_blowup(config, out_dir)
        elif args.command == 'verify':
            cmd_verify(config, out_dir)
        elif args.command == 'sweep':
            manifests = cmd_sweep(config, parse_param_flags(args.param), out_dir, args.workers)
            failed = sum(1 for manifest in manifests if manifest.get("error"))
            if failed:
                logger.warning(f"{failed} of {len(manifests)} sweep runs failed, see {SUMMARY_FILE}")
        return 0
    except PeakonLabError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return 1
    except OSError as e:
        logger.error(f"I/O error on {e.filename}: {e.strerror}")
        return 1
    except KeyboardInterrupt:
        logger.warning("interrupted by user")
        return 1


if __name__ == "__main__":
    sys.exit(main())
