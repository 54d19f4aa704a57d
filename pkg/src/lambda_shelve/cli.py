"""``lambda-shelve`` command line: roots, density, simulate, compare, scan."""

from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import math
import sys
import warnings
from pathlib import Path

import numpy as np

from . import compare as cmp
from .config import PARAM_KEYS, SCHEMA, ParseError, ValidationError, parse_config
from .errors import InvalidParameters, LambdaShelveError, RegimeWarning
from .model import Channel
from .propagator import approx_roots, characteristic_roots, equal_detuning_roots
from .statistics import emission_probability, no_count_probability, short_long_split, waiting_density
from .svgplot import line_chart
from .trajectory import ensemble_run

EXIT_OK, EXIT_INPUT, EXIT_NUMERICAL, EXIT_COMPARE = 0, 1, 2, 3
COMMANDS = ("roots", "density", "simulate", "compare", "scan")

ROOT_COLUMNS = ["root_index", "re_exact", "im_exact", "re_approx", "im_approx", "rel_error"]
DENSITY_COLUMNS = ["t", "p_survive_1", "p_survive_2", "w_blue_1", "w_red_1", "w_blue_2", "w_red_2"]
EVENT_COLUMNS = ["trajectory_id", "event_time", "channel"]
SCAN_TAIL = ["pi", "t_short", "t_long", "theta", "emission_probability"]

SIMULATE_DEFAULT_N = 100
SIMULATE_DEFAULT_HORIZON = 1000.0  # in units of 1/gamma


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        # adding 0.0 folds -0.0 into 0.0
        return "" if not math.isfinite(value) else f"{float(value) + 0.0:.17g}"
    return str(value)


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        return float(value) if math.isfinite(value) else None
    return value


def csv_text(columns, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def json_text(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2) + "\n"


def table_text(columns, rows, fmt) -> str:
    if fmt == "json":
        return json_text([dict(zip(columns, row)) for row in rows])
    return csv_text(columns, rows)


def _emit(text, path):
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_bytes(text.encode())


def _note(message):
    print(f"lambda-shelve: {message}", file=sys.stderr)


# ---------------------------------------------------------------- subcommands


def _approx_for(p):
    if p.equal_detunings and (p.omega1 or p.omega2):
        return equal_detuning_roots(p), None
    if p.in_shelving_regime() and not p.equal_detunings:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RegimeWarning)
            return approx_roots(p), None
    return None, "no approximate roots: parameters are outside the shelving regime"


def roots_table(cfg):
    """Exact roots next to the best-matching approximate ones."""
    p = cfg.params
    exact = list(characteristic_roots(p))
    approx, note = _approx_for(p)
    rows = []
    if approx is None:
        for i, z in enumerate(exact, start=1):
            rows.append([i, z.real, z.imag, None, None, None])
        return ROOT_COLUMNS, rows, note
    approx = list(approx)
    best = min(itertools.permutations(approx),
               key=lambda perm: sum(abs(a - b) for a, b in zip(exact, perm)))
    for i, (z, w) in enumerate(zip(exact, best), start=1):
        err = abs(z - w) / abs(z) if abs(z) > 0 else abs(w)
        rows.append([i, z.real, z.imag, w.real, w.imag, err])
    return ROOT_COLUMNS, rows, None


def time_grid(cfg) -> np.ndarray:
    if cfg.spacing == "linear":
        return np.linspace(cfg.t_min, cfg.t_max, cfg.points)
    if cfg.t_min > 0:
        return np.geomspace(cfg.t_min, cfg.t_max, cfg.points)
    # log grid anchored at t = 0
    tail = np.logspace(math.log10(cfg.t_max) - 6, math.log10(cfg.t_max), cfg.points - 1)
    return np.concatenate([[0.0], tail])


def density_table(cfg):
    p = cfg.params
    t = time_grid(cfg)
    cols = [t, no_count_probability(p, 1, t), no_count_probability(p, 2, t)]
    for k in (1, 2):
        for ch in (Channel.BLUE, Channel.RED):
            cols.append(waiting_density(p, k, ch, t))
    rows = [[float(c[i]) for c in cols] for i in range(t.size)]
    return DENSITY_COLUMNS, rows


def scan_values(cfg) -> np.ndarray:
    if cfg.scan_min is None or cfg.scan_max is None:
        raise ValidationError("scan_min", "scan needs both scan_min and scan_max")
    if cfg.scan_spacing == "log":
        return np.geomspace(cfg.scan_min, cfg.scan_max, cfg.scan_steps)
    return np.linspace(cfg.scan_min, cfg.scan_max, cfg.scan_steps)


def scan_table(cfg):
    base = cfg.params.as_dict()
    rows = []
    for value in scan_values(cfg):
        row = [float(value)]
        p = type(cfg.params)(**{**base, cfg.scan_param: float(value)})
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RegimeWarning)
                dec = short_long_split(p, 1)
            row += [dec.pi, dec.t_short, dec.t_long, dec.theta]
        except (LambdaShelveError, ValueError):
            row += [None] * 4
        try:
            row.append(emission_probability(p, 1))
        except LambdaShelveError:
            row.append(None)
        rows.append(row)
    return [cfg.scan_param] + SCAN_TAIL, rows


def simulate(cfg):
    p = cfg.params
    n = cfg.n or SIMULATE_DEFAULT_N
    horizon = cfg.horizon or SIMULATE_DEFAULT_HORIZON / p.gamma
    stats = ensemble_run(p, cfg.k0, n, horizon, cfg.seed, theta=cfg.theta, keep_records=True)
    rows = []
    for i, rec in enumerate(stats.records):
        rows.extend([i, float(t), int(c)] for t, c in zip(rec.times, rec.channels))
    return stats, rows


def compare_rows(cfg):
    checks = cmp.run_compare(cfg)
    return cmp.COLUMNS, [c.row() for c in checks], all(c.passed is not False for c in checks)


# ---------------------------------------------------------------- plumbing


def _plot(columns, rows, path, title):
    x = [r[0] for r in rows]
    series = {c: [r[i] for r in rows] for i, c in enumerate(columns) if i > 0}
    Path(path).write_bytes(line_chart(x, series, title=title, xlabel=columns[0]).encode())


def run_command(command: str, cfg) -> int:
    """Execute ``command`` for ``cfg``, writing its artifacts; returns the exit code."""
    status = EXIT_OK
    if command == "roots":
        columns, rows, note = roots_table(cfg)
        if note:
            _note(note)
    elif command == "density":
        columns, rows = density_table(cfg)
    elif command == "scan":
        columns, rows = scan_table(cfg)
    elif command == "compare":
        columns, rows, ok = compare_rows(cfg)
        status = EXIT_OK if ok else EXIT_COMPARE
    elif command == "simulate":
        stats, rows = simulate(cfg)
        columns = EVENT_COLUMNS
        summary = stats.to_dict()
        if cfg.format == "json":
            _emit(json_text({"summary": summary,
                             "events": [dict(zip(columns, r)) for r in rows]}), cfg.out)
        else:
            _emit(csv_text(columns, rows), cfg.out)
            summary_path = cfg.summary or (f"{cfg.out}.summary.json" if cfg.out else None)
            if summary_path:
                _emit(json_text(summary), summary_path)
        if cfg.plot:
            _note("simulate has no line chart; --plot ignored")
        return status
    else:
        raise ValueError(f"unknown command {command!r}")

    _emit(table_text(columns, rows, cfg.format), cfg.out)
    if cfg.plot:
        if command == "compare":
            _note("compare has no line chart; --plot ignored")
        else:
            _plot(columns, rows, cfg.plot, command)
    return status


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="key = value file (or .json)")
    for key, (kind, _) in SCHEMA.items():
        flag = "--" + key.replace("_", "-")
        choices = None
        if key == "format":
            choices = ("csv", "json")
        elif key in ("spacing", "scan_spacing"):
            choices = ("log", "linear")
        elif key == "scan_param":
            choices = PARAM_KEYS
        # everything is parsed as text; the config layer converts and validates
        common.add_argument(flag, dest=key, default=None, choices=choices,
                            metavar=None if choices else kind.__name__.upper())
    parser = argparse.ArgumentParser(
        prog="lambda-shelve",
        description="Photon counting statistics of a driven three-level Lambda atom.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "roots": "exact and approximate roots of the characteristic cubic",
        "density": "no-count probabilities and waiting-time densities on a time grid",
        "simulate": "Monte Carlo count records and ensemble summary",
        "compare": "analytic versus Monte Carlo validation report",
        "scan": "sweep one parameter and tabulate the short/long decomposition",
    }
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=helps[name])
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    flags = {k: v for k, v in vars(args).items() if k in SCHEMA}
    try:
        cfg = parse_config(flags=flags, path=args.config)
    except (ParseError, ValidationError, InvalidParameters, OSError) as exc:
        _note(f"invalid configuration: {exc}")
        return EXIT_INPUT
    try:
        return run_command(args.command, cfg)
    except (ValidationError, InvalidParameters) as exc:
        _note(f"invalid configuration: {exc}")
        return EXIT_INPUT
    except (LambdaShelveError, ArithmeticError, np.linalg.LinAlgError) as exc:
        _note(f"numerical failure: {type(exc).__name__}: {exc}")
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
