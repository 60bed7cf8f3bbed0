"""Command-line front end: scenario runner, builtin registry, sweeps.

Exit codes: 0 all asserted checks pass, 2 a check failed, 3 numerical
failure, 4 configuration error.
"""
from __future__ import annotations

import argparse
import csv
import datetime
import json
import os
import sys

import numpy as np

from . import __version__
from .errors import ConfigError, InputError, NumericalFailure, WstabError
from .scenarios import (RunResult, Scenario, builtin_descriptions,
                        builtin_scenario, parse_scenario, run_scenario,
                        scenario_to_tree)
from .surface import export_off

EXIT_OK = 0
EXIT_CHECK_FAILED = 2
EXIT_NUMERICAL = 3
EXIT_CONFIG = 4

GNUPLOT_TEMPLATE = """# generated by wstab {version}
set datafile separator ','
set key autotitle columnhead
set grid
set term push
plot '{csv}' using 1:2 with linespoints title '{title}'
pause -1
"""


def _load_scenario(path: str) -> Scenario:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            obj = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"scenario file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}")
    name = os.path.splitext(os.path.basename(path))[0]
    return parse_scenario(obj, name)


def _resolve_scenario(ref: str) -> Scenario:
    """A scenario reference is a config-file path or a builtin name."""
    if os.path.exists(ref) or ref.endswith(".json"):
        return _load_scenario(ref)
    return builtin_scenario(ref)


def _jsonify(obj):
    """Recursively convert numpy scalars/arrays to plain Python values."""
    if isinstance(obj, dict):
        return {k: _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonify(v) for v in obj.tolist()]
    return obj


def _write_csv(path: str, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        if header:
            w.writerow(header)
        w.writerows(rows)


def _write_outputs(result: RunResult, out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    report_path = os.path.join(out_dir, "report.json")
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump(_jsonify(result.report), fh, sort_keys=True, indent=2)
        fh.write("\n")
    meta = {
        "generated_at": datetime.datetime.now(datetime.timezone.utc)
        .isoformat(),
        "version": __version__,
    }
    with open(os.path.join(out_dir, "meta.json"), "w", encoding="utf-8") as fh:
        json.dump(meta, fh, sort_keys=True, indent=2)
        fh.write("\n")
    if result.samples:
        csv_path = os.path.join(out_dir, "samples.csv")
        _write_csv(csv_path, result.samples_header, result.samples)
        with open(os.path.join(out_dir, "plot.gp"), "w",
                  encoding="utf-8") as fh:
            fh.write(GNUPLOT_TEMPLATE.format(version=__version__,
                                             csv="samples.csv",
                                             title=result.scenario.name))
    if result.spectrum_rows:
        _write_csv(os.path.join(out_dir, "spectrum.csv"),
                   ["index", "eigenvalue", "residual"], result.spectrum_rows)
    if result.mesh is not None:
        export_off(result.mesh, os.path.join(out_dir, "mesh.off"))


def _finish(result: RunResult, out_dir: str) -> int:
    _write_outputs(result, out_dir)
    for check in result.checks:
        status = "PASS" if check.passed else "FAIL"
        print(f"[{status}] {check.name}: {check.detail}")
    if not result.checks:
        print("no asserted checks for this scenario")
    print(f"report written to {os.path.join(out_dir, 'report.json')}")
    return EXIT_OK if result.passed else EXIT_CHECK_FAILED


def cmd_run(args) -> int:
    scn = _load_scenario(args.scenario)
    result = run_scenario(scn)
    return _finish(result, args.out)


def cmd_builtin(args) -> int:
    scn = builtin_scenario(args.name)
    result = run_scenario(scn)
    return _finish(result, args.out)


def cmd_list(args) -> int:
    for name, desc in builtin_descriptions():
        print(f"{name}: {desc}")
    return EXIT_OK


def _parse_range(spec: str):
    parts = spec.split(":")
    if len(parts) != 3:
        raise ConfigError("range must be formatted a:b:step")
    try:
        a, b, step = (float(p) for p in parts)
    except ValueError:
        raise ConfigError(f"non-numeric range component in '{spec}'")
    if step <= 0:
        raise ConfigError("range step must be positive")
    values = []
    v = a
    while v <= b + 1e-12:
        values.append(round(v, 12))
        v += step
    if not values:
        raise ConfigError(f"range '{spec}' is empty")
    return values


def cmd_sweep(args) -> int:
    scn = _resolve_scenario(args.scenario)
    values = _parse_range(args.range)
    tree = scenario_to_tree(scn)
    tree.pop("expect", None)
    tree["sweep"] = {"param": args.param, "values": values}
    swept = parse_scenario(tree, scn.name)
    swept.space_factory = scn.space_factory
    result = run_scenario(swept)
    return _finish(result, args.out)


def cmd_export_mesh(args) -> int:
    from .functionals import Quadrature
    from .scenarios import build_immersion, build_space
    from .surface import mesh_from_immersion
    scn = _resolve_scenario(args.scenario)
    space = build_space(scn)
    imm = build_immersion(scn)
    mesh = mesh_from_immersion(imm, scn.resolution, space=space)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "mesh.off")
    export_off(mesh, path)
    print(f"mesh written to {path}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="wstab",
        description=("weighted-geometry stability toolkit for free boundary "
                     "surfaces"))
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    pr = sub.add_parser("run", help="run a scenario config file")
    pr.add_argument("scenario", help="path to a JSON scenario file")
    pr.add_argument("--out", default="out", help="output directory")
    pr.set_defaults(func=cmd_run)

    pb = sub.add_parser("builtin", help="run a builtin scenario by name")
    pb.add_argument("name")
    pb.add_argument("--out", default="out", help="output directory")
    pb.set_defaults(func=cmd_builtin)

    pl = sub.add_parser("list", help="list builtin scenarios")
    pl.set_defaults(func=cmd_list)

    ps = sub.add_parser("sweep",
                        help="sweep a numeric scenario parameter")
    ps.add_argument("scenario",
                    help="scenario config file or builtin name")
    ps.add_argument("--param", required=True,
                    help="dotted path of the knob, e.g. ambient.density.k")
    ps.add_argument("--range", required=True, help="a:b:step")
    ps.add_argument("--out", default="out", help="output directory")
    ps.set_defaults(func=cmd_sweep)

    pe = sub.add_parser("export-mesh",
                        help="mesh a scenario's surface and write an OFF file")
    pe.add_argument("scenario",
                    help="scenario config file or builtin name")
    pe.add_argument("--out", default="out", help="output directory")
    pe.set_defaults(func=cmd_export_mesh)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, InputError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except WstabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
