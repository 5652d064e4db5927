"""Batch experiment runner.

Every subcommand writes one CSV table plus a JSON sidecar echoing the fully
resolved configuration (parameters, seed, thread count, library version), so
any output can be re-derived by pointing ``--config`` at its sidecar.  Flags
override config-file values, which override the environment and built-in
defaults.

Exit status: 0 on success, 2 on configuration/validation errors, 3 on
runtime failures (including a failed oracle check).

Subcommands map onto the study's figures: ``trace`` (parity convergence),
``posterior`` (density curves), ``ensemble`` (estimate statistics),
``bias-scan`` / ``stddev-scan`` (phase scans), ``scaling-fit`` (spread vs
record length), ``intensity-scan`` (fitted constant vs photon number) and
``oracle-check`` (detector-model cross-validation).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, analysis, fock_oracle, inference, model, simulate
from .analysis import (
    CSV_COLUMNS,
    ClassificationRule,
    EnsembleConfig,
    EnsembleTemplate,
)
from .inference import DEFAULT_GRID_RESOLUTION, PhaseGrid
from .model import HALF_PI, TmsvSource
from .simulate import MeasurementRecord, RecordConfig

DEFAULT_SEED = 123456789
THREADS_ENV_VAR = "TMSV_PARITY_THREADS"


class CliError(Exception):
    """Configuration problem; maps to exit status 2."""


@dataclass(frozen=True)
class Param:
    name: str
    kind: type
    default: object = None
    required: bool = False
    many: bool = False
    help: str = ""


@dataclass(frozen=True)
class RunSpec:
    """Fully resolved invocation of one subcommand."""

    subcommand: str
    parameters: dict
    output_path: Path
    master_seed: int
    threads: int


def _theta_params(step_default: float, max_default: float) -> list[Param]:
    return [
        Param("theta_min", float, 0.0, help="scan start (radians)"),
        Param("theta_max", float, max_default, help="scan end, inclusive"),
        Param("theta_step", float, step_default, help="scan step"),
    ]


_GRID = Param("grid", int, DEFAULT_GRID_RESOLUTION, help="phase grid resolution")
_RULE_PARAMS = [
    Param("r2_min", float, ClassificationRule().r_squared_min, help="fit quality floor"),
    Param("ratio_low", float, ClassificationRule().ratio_low, help="c/c_crb lower edge"),
    Param("ratio_high", float, ClassificationRule().ratio_high, help="c/c_crb upper edge"),
]

SCHEMAS: dict[str, list[Param]] = {
    "parity-curve": [
        Param("nbar", float, required=True, help="mean photon number"),
        Param("theta_min", float, 0.0),
        Param("theta_max", float, HALF_PI),
        Param("steps", int, 100, help="number of sample points"),
    ],
    "trace": [
        Param("nbar", float, required=True),
        Param("theta", float, required=True, help="true phase"),
        Param("M", int, 10_000, help="record length"),
    ],
    "posterior": [
        Param("nbar", float, required=True),
        Param("M", int, required=True),
        Param("m", int, help="even-outcome count; omit to simulate at --theta"),
        Param("theta", float, help="true phase used when --m is omitted"),
        _GRID,
    ],
    "ensemble": [
        Param("nbar", float, required=True),
        Param("theta", float, required=True),
        Param("M", int, required=True),
        Param("N", int, 10_000, help="ensemble size"),
        _GRID,
    ],
    "bias-scan": [
        Param("nbar", float, required=True),
        *_theta_params(0.02, HALF_PI),
        Param("M", int, (100, 1000, 10_000), many=True),
        Param("N", int, 10_000),
        _GRID,
    ],
    "stddev-scan": [
        Param("nbar", float, required=True),
        *_theta_params(0.02, HALF_PI),
        Param("M", int, (100, 1000, 10_000), many=True),
        Param("N", int, 10_000),
        _GRID,
    ],
    "scaling-fit": [
        Param("nbar", float, required=True),
        Param("theta", float, required=True, many=True),
        Param("M", int, analysis.DEFAULT_SCALING_M, many=True),
        Param("N", int, 4000),
        _GRID,
        *_RULE_PARAMS,
    ],
    "intensity-scan": [
        Param("theta", float, required=True),
        Param("nbar", float, (1.0, 2.0, 3.0, 5.0, 7.0, 10.0), many=True),
        Param("M", int, analysis.INTENSITY_SCALING_M, many=True),
        Param("N", int, 4000),
        _GRID,
        *_RULE_PARAMS,
    ],
    "oracle-check": [
        Param("nbar", float, (0.5, 1.0, 3.0, 7.0, 10.0), many=True),
        Param("epsilon", float, 1e-8, help="truncation tail mass"),
        *_theta_params(0.05, 1.5),
        Param("tolerance", float, 1e-6, help="max allowed |closed - fock|"),
    ],
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tmsv-parity",
        description="Monte Carlo phase estimation with squeezed-vacuum parity readout",
    )
    parser.add_argument("--version", action="version", version=__version__)
    subparsers = parser.add_subparsers(dest="subcommand", required=True)
    for name, params in SCHEMAS.items():
        sub = subparsers.add_parser(name)
        sub.add_argument("-o", "--output", type=Path, help="CSV output path")
        sub.add_argument("--config", type=Path, help="JSON config (flags override)")
        sub.add_argument("--seed", type=int, help=f"master seed (default {DEFAULT_SEED})")
        sub.add_argument("--threads", help='worker threads, integer or "auto"')
        for p in params:
            flag = "--" + p.name.replace("_", "-")
            if p.many:
                sub.add_argument(flag, dest=p.name, type=p.kind, nargs="+", help=p.help)
            else:
                sub.add_argument(flag, dest=p.name, type=p.kind, help=p.help)
    return parser


def load_config(path: Path) -> dict:
    """Read and shape-check a config/sidecar JSON file."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot read config {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CliError(
            f"malformed JSON in {path} at line {exc.lineno} column {exc.colno}: {exc.msg}"
        ) from exc
    if not isinstance(data, dict):
        raise CliError(f"config {path} must contain a JSON object")
    allowed = {"subcommand", "parameters", "seed", "threads", "output", "version"}
    for key in data:
        if key not in allowed:
            raise CliError(f"unknown config key {key!r}")
    params = data.get("parameters", {})
    if not isinstance(params, dict):
        raise CliError('config "parameters" must be an object')
    return data


def _coerce(param: Param, value, origin: str):
    def one(v):
        if param.kind is int:
            if isinstance(v, bool) or not isinstance(v, (int, float)) or v != int(v):
                raise CliError(f"{origin}: parameter {param.name!r} must be an integer")
            return int(v)
        if param.kind is float:
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise CliError(f"{origin}: parameter {param.name!r} must be a number")
            return float(v)
        return v

    if param.many:
        if not isinstance(value, (list, tuple)):
            raise CliError(f"{origin}: parameter {param.name!r} must be a list")
        return [one(v) for v in value]
    return one(value)


def _resolve_threads(raw) -> int:
    if raw is None:
        raw = os.environ.get(THREADS_ENV_VAR, "auto")
    if isinstance(raw, str):
        if raw == "auto":
            return os.cpu_count() or 1
        try:
            raw = int(raw)
        except ValueError as exc:
            raise CliError(f'threads must be a positive integer or "auto", got {raw!r}') from exc
    if not isinstance(raw, int) or isinstance(raw, bool) or raw < 1:
        raise CliError(f"threads must be a positive integer, got {raw!r}")
    return raw


def resolve_spec(subcommand: str, flags: dict, config: dict | None) -> RunSpec:
    """Merge flags over config-file values over defaults into a RunSpec."""
    schema = {p.name: p for p in SCHEMAS[subcommand]}
    values: dict = {}
    if config is not None:
        recorded = config.get("subcommand")
        if recorded is not None and recorded != subcommand:
            raise CliError(
                f"config was recorded for {recorded!r}, not {subcommand!r}"
            )
        for key, value in config.get("parameters", {}).items():
            if key not in schema:
                raise CliError(f"unknown parameter {key!r} for {subcommand!r}")
            values[key] = _coerce(schema[key], value, "config")
    for key, value in flags.items():
        if value is None:
            continue
        if key not in schema:
            raise CliError(f"unknown parameter {key!r} for {subcommand!r}")
        values[key] = _coerce(schema[key], value, "flag")
    for name, param in schema.items():
        if name not in values:
            if param.required:
                raise CliError(f"missing required parameter {name!r} for {subcommand!r}")
            if param.default is not None:
                values[name] = _coerce(param, param.default, "default")
            else:
                values[name] = None

    seed = flags.get("_seed")
    if seed is None and config is not None:
        seed = config.get("seed")
    if seed is None:
        seed = DEFAULT_SEED
    if not isinstance(seed, int) or isinstance(seed, bool) or not 0 <= seed < 2**64:
        raise CliError(f"seed must be a 64-bit unsigned integer, got {seed!r}")

    threads_raw = flags.get("_threads")
    if threads_raw is None and config is not None:
        threads_raw = config.get("threads")
    threads = _resolve_threads(threads_raw)

    output = flags.get("_output")
    if output is None and config is not None and config.get("output"):
        output = Path(config["output"])
    if output is None:
        raise CliError("an output CSV path is required (-o/--output)")

    return RunSpec(
        subcommand=subcommand,
        parameters=values,
        output_path=Path(output),
        master_seed=seed,
        threads=threads,
    )


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.12g}"
    return str(value)


def _write_csv(path: Path, headers, rows) -> None:
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(headers)
            for row in rows:
                if isinstance(row, dict):
                    writer.writerow([_fmt(row[h]) for h in headers])
                else:
                    writer.writerow([_fmt(v) for v in row])
    except OSError as exc:
        raise RuntimeError(f"cannot write {path}: {exc}") from exc


def _write_sidecar(spec: RunSpec) -> None:
    sidecar = spec.output_path.with_suffix(".json")
    payload = {
        "subcommand": spec.subcommand,
        "parameters": spec.parameters,
        "seed": spec.master_seed,
        "threads": spec.threads,
        "output": str(spec.output_path),
        "version": __version__,
    }
    try:
        with open(sidecar, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise RuntimeError(f"cannot write {sidecar}: {exc}") from exc


def _theta_values(p: dict) -> np.ndarray:
    lo, hi, step = p["theta_min"], p["theta_max"], p["theta_step"]
    if step <= 0 or hi < lo:
        raise CliError("need theta_step > 0 and theta_max >= theta_min")
    count = int(math.floor((hi - lo) / step + 1e-9)) + 1
    return lo + step * np.arange(count)


def _template(p: dict, spec: RunSpec, source: TmsvSource) -> EnsembleTemplate:
    return EnsembleTemplate(
        source=source,
        ensemble_size=p["N"],
        master_seed=spec.master_seed,
        grid=PhaseGrid.uniform(p["grid"]),
    )


def _rule(p: dict) -> ClassificationRule:
    return ClassificationRule(
        r_squared_min=p["r2_min"], ratio_low=p["ratio_low"], ratio_high=p["ratio_high"]
    )


def _run_parity_curve(spec: RunSpec) -> int:
    p = spec.parameters
    source = TmsvSource(p["nbar"])
    thetas = np.linspace(p["theta_min"], p["theta_max"], p["steps"])
    rows = [
        (th, model.parity_expectation(source, th), model.even_probability(source, th))
        for th in thetas
    ]
    _write_csv(spec.output_path, ["theta", "parity", "p_even"], rows)
    return 0


def _run_trace(spec: RunSpec) -> int:
    p = spec.parameters
    config = RecordConfig(
        theta_true=p["theta"],
        source=TmsvSource(p["nbar"]),
        record_length=p["M"],
        seed=spec.master_seed,
    )
    trace = simulate.parity_trace(config)
    rows = list(enumerate(trace.running_parity, start=1))
    _write_csv(spec.output_path, ["k", "running_parity"], rows)
    return 0


def _run_posterior(spec: RunSpec) -> int:
    p = spec.parameters
    source = TmsvSource(p["nbar"])
    grid = PhaseGrid.uniform(p["grid"])
    if p["m"] is not None:
        record = MeasurementRecord(even_count=p["m"], record_length=p["M"])
    elif p["theta"] is not None:
        config = RecordConfig(
            theta_true=p["theta"], source=source, record_length=p["M"], seed=spec.master_seed
        )
        record = simulate.draw_record(config)
    else:
        raise CliError("posterior needs either --m or --theta")
    table = inference.build_likelihood_table(source, grid)
    post = inference.posterior(record, table)
    rows = zip(grid.points, post.density)
    _write_csv(spec.output_path, ["phi", "density"], rows)
    return 0


def _run_ensemble(spec: RunSpec) -> int:
    p = spec.parameters
    source = TmsvSource(p["nbar"])
    config = EnsembleConfig(
        theta_true=p["theta"],
        source=source,
        record_length=p["M"],
        ensemble_size=p["N"],
        master_seed=spec.master_seed,
        grid=PhaseGrid.uniform(p["grid"]),
    )
    ens = analysis.run_ensemble(config, threads=spec.threads)
    row = analysis._cell_row(p["theta"], source, p["M"], ens)
    _write_csv(spec.output_path, CSV_COLUMNS, [row])
    return 0


def _run_phase_scan(spec: RunSpec) -> int:
    p = spec.parameters
    template = _template(p, spec, TmsvSource(p["nbar"]))
    rows = analysis.scan_bias(_theta_values(p), template, p["M"], threads=spec.threads)
    _write_csv(spec.output_path, CSV_COLUMNS, rows)
    return 0


def _run_scaling_fit(spec: RunSpec) -> int:
    p = spec.parameters
    template = _template(p, spec, TmsvSource(p["nbar"]))
    rows, _ = analysis.scaling_analysis(
        p["theta"], template, p["M"], _rule(p), threads=spec.threads
    )
    _write_csv(spec.output_path, CSV_COLUMNS, rows)
    return 0


def _run_intensity_scan(spec: RunSpec) -> int:
    p = spec.parameters
    template = _template(p, spec, TmsvSource(p["nbar"][0]))
    rows, _ = analysis.scan_intensity(
        p["theta"], p["nbar"], template, p["M"], _rule(p), threads=spec.threads
    )
    _write_csv(spec.output_path, CSV_COLUMNS, rows)
    return 0


def _run_oracle_check(spec: RunSpec) -> int:
    p = spec.parameters
    rows = []
    worst = 0.0
    for nbar in p["nbar"]:
        source = TmsvSource(nbar)
        for theta in _theta_values(p):
            closed = model.even_probability(source, theta)
            via_fock = fock_oracle.even_probability_via_fock(source, theta, p["epsilon"])
            diff = abs(closed - via_fock)
            worst = max(worst, diff)
            rows.append((nbar, theta, closed, via_fock, diff))
    _write_csv(
        spec.output_path,
        ["nbar", "theta", "p_even_closed", "p_even_fock", "abs_diff"],
        rows,
    )
    if worst > p["tolerance"]:
        print(
            f"oracle check FAILED: max |closed - fock| = {worst:.3e} "
            f"> {p['tolerance']:.3e}",
            file=sys.stderr,
        )
        return 3
    return 0


_RUNNERS = {
    "parity-curve": _run_parity_curve,
    "trace": _run_trace,
    "posterior": _run_posterior,
    "ensemble": _run_ensemble,
    "bias-scan": _run_phase_scan,
    "stddev-scan": _run_phase_scan,
    "scaling-fit": _run_scaling_fit,
    "intensity-scan": _run_intensity_scan,
    "oracle-check": _run_oracle_check,
}


def run(spec: RunSpec) -> int:
    """Execute a resolved spec: write the CSV, then echo the sidecar."""
    status = _RUNNERS[spec.subcommand](spec)
    _write_sidecar(spec)
    return status


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = load_config(args.config) if args.config else None
        flags = {
            p.name: getattr(args, p.name) for p in SCHEMAS[args.subcommand]
        }
        flags["_seed"] = args.seed
        flags["_threads"] = args.threads
        flags["_output"] = args.output
        spec = resolve_spec(args.subcommand, flags, config)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        return run(spec)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return 3


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
