"""Command-line interface: ``hyhardy <command> [options]``.

Every command validates its parameters through :func:`make_params`, writes a
deterministic JSON document (sorted keys, ``schema_version``) or a tidy
long-format CSV table, and exits with

* 0 on success,
* 1 when a verification check or a numerical acceptance test fails,
* 2 on invalid input,
* 3 when the mathematics refuses (non-coercive operator, wrong regime,
  no sign change in a bracket).

Options may also come from an INI-style file given by ``--config``: keys of
the ``[params]``, ``[grid]`` and ``[output]`` sections and of the section
named after the command mirror the long flags (dashes or underscores).
Flags given on the command line win.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import conformal, kernels, mass, variational, verify
from .errors import (
    BracketError,
    ConvergenceError,
    DomainError,
    HyHardyError,
    NonCoerciveError,
    ParameterError,
    PreconditionError,
    RegimeError,
)
from .params import make_params
from .radial import Geometry, geometric_grid

SCHEMA_VERSION = "1.0"

EXIT_OK, EXIT_VERIFY, EXIT_INPUT, EXIT_REFUSED = 0, 1, 2, 3

# option name -> (type, default); shared by flags and config files
OPTIONS = {
    "n": (int, None),
    "gamma": (float, 0.0),
    "s": (float, 0.0),
    "lam": (float, 0.0),
    "radius": (float, 0.5),
    "geometry": (str, "hyperbolic"),
    "h_coefficient": (float, 0.0),
    "theta": (float, 0.0),
    "ratio": (float, 1.15),
    "r_min": (float, None),
    "seed": (int, 0),
    "restarts": (int, 5),
    "p": (float, 2.0),
    "r": (str, None),
    "r_spec": (str, None),
    "suite": (str, "all"),
    "bracket": (str, None),
    "sweep_command": (str, "mass"),
    "sweep_param": (str, "lam"),
    "values": (str, None),
    "workers": (int, None),
    "format": (str, "json"),
    "output": (str, None),
}

SECTION_KEYS = ("params", "grid", "output")


class InputError(Exception):
    """Malformed command-line or config input (exit code 2)."""


@dataclass
class RunConfig:
    """Resolved options for one command."""

    command: str
    options: dict = field(default_factory=dict)

    def __getattr__(self, name):
        if name.startswith("__") or name == "options":
            raise AttributeError(name)
        try:
            return self.options[name]
        except KeyError as exc:
            raise AttributeError(name) from exc

    @property
    def output_format(self):
        return self.options.get("format", "json")

    @property
    def output_path(self):
        return self.options.get("output")

    def params(self, **override):
        blk = {k: self.options.get(k) for k in ("n", "gamma", "s", "lam")}
        blk.update(override)
        if blk["n"] is None:
            raise InputError("--n is required")
        theta = self.options.get("theta", 0.0) if self.options.get("geometry") == "euclidean" else 0.0
        return make_params(blk["n"], blk["gamma"], blk["s"], blk["lam"], theta)


# ---------------------------------------------------------------- parsing
def _add_common(p, names):
    for name in names:
        flag = "--" + name.replace("_", "-")
        typ, _ = OPTIONS[name]
        p.add_argument(flag, dest=name, default=None, type=None if typ is str else typ, metavar=name.upper())


def build_parser():
    parser = argparse.ArgumentParser(
        prog="hyhardy",
        description="Hardy-Schrodinger operators on the Poincare ball",
    )
    parser.add_argument("--config", default=None, help="INI file with option defaults")
    sub = parser.add_subparsers(dest="command", required=True)
    out = ("format", "output")
    prm = ("n", "gamma", "s", "lam")

    p = sub.add_parser("kernels", help="tabulate f, G and V_p")
    _add_common(p, ("n", "p", "r", "r_spec") + out)
    p = sub.add_parser("verify", help="run self-verification suites")
    _add_common(p, ("suite",) + out)
    p = sub.add_parser("mu", help="minimize the Rayleigh quotient on a ball")
    _add_common(p, prm + ("radius", "geometry", "ratio", "r_min", "seed", "restarts") + out)
    p = sub.add_parser("mass", help="mass of the operator on a ball")
    _add_common(p, prm + ("radius", "geometry", "h_coefficient", "theta") + out)
    p = sub.add_parser("lambda-star", help="threshold where the hyperbolic mass changes sign")
    _add_common(p, ("n", "gamma", "s", "radius", "bracket") + out)
    p = sub.add_parser("certificate", help="existence certificate for the ball problem")
    _add_common(p, prm + ("radius",) + out)
    p = sub.add_parser("sweep", help="fan a command out over parameter values")
    _add_common(p, prm + ("radius", "sweep_command", "sweep_param", "values", "workers", "seed") + out)
    return parser


def _read_config(path, command):
    parser = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise InputError(f"cannot read config {path!r}: {exc}") from exc
    merged = {}
    for section in SECTION_KEYS + (command,):
        if parser.has_section(section):
            for key, raw in parser.items(section):
                name = key.replace("-", "_")
                if name not in OPTIONS:
                    raise InputError(f"unknown config key {key!r} in [{section}]")
                merged[name] = raw
    return merged


def _coerce(name, raw):
    typ, _ = OPTIONS[name]
    if raw is None or typ is str:
        return raw
    try:
        return typ(raw)
    except (TypeError, ValueError) as exc:
        raise InputError(f"invalid value for {name}: {raw!r}") from exc


def resolve_config(args):
    """Merge built-in defaults, the config file and explicit flags (flags win)."""
    values = {name: default for name, (_, default) in OPTIONS.items()}
    if args.config:
        for name, raw in _read_config(args.config, args.command).items():
            values[name] = _coerce(name, raw)
    for name in OPTIONS:
        if getattr(args, name, None) is not None:
            values[name] = getattr(args, name)
    if values["format"] not in ("json", "csv"):
        raise InputError("--format must be json or csv")
    if values["geometry"] not in ("hyperbolic", "euclidean"):
        raise InputError("--geometry must be hyperbolic or euclidean")
    return RunConfig(args.command, values)


def _float_list(text, name):
    try:
        return [float(x) for x in text.replace(",", " ").split()]
    except ValueError as exc:
        raise InputError(f"invalid number list for {name}: {text!r}") from exc


def parse_r_spec(spec):
    """``geom:lo:hi:count`` or ``lin:lo:hi:count``."""
    parts = spec.split(":")
    if len(parts) != 4 or parts[0] not in ("geom", "lin"):
        raise InputError(f"r-spec must be geom:lo:hi:count or lin:lo:hi:count, got {spec!r}")
    try:
        lo, hi, count = float(parts[1]), float(parts[2]), int(parts[3])
    except ValueError as exc:
        raise InputError(f"invalid r-spec {spec!r}") from exc
    if count < 1 or not 0 < lo <= hi:
        raise InputError(f"invalid r-spec range {spec!r}")
    return (np.geomspace if parts[0] == "geom" else np.linspace)(lo, hi, count).tolist()


# ---------------------------------------------------------------- output
def jsonable(obj):
    """Recursively convert to JSON-native types; non-finite floats become ``None``."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        val = float(obj)
        return val if math.isfinite(val) else None
    return obj


def render_json(command, result):
    doc = {"schema_version": SCHEMA_VERSION, "command": command, "result": jsonable(result)}
    return json.dumps(doc, sort_keys=True, indent=2, allow_nan=False) + "\n"


def render_csv(rows, columns):
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: ("" if row.get(k) is None else repr(row[k]) if isinstance(row.get(k), float)
                             else row.get(k)) for k in columns})
    return buf.getvalue()


def _long_rows(records, index_name="index"):
    """Flatten ``[(index, dict)]`` into tidy ``index, field, value`` rows."""
    rows = []
    for idx, rec in records:
        for key in sorted(rec):
            val = rec[key]
            if isinstance(val, (dict, list)):
                continue
            rows.append({index_name: idx, "field": key, "value": val})
    return rows


# ---------------------------------------------------------------- commands
def cmd_kernels(cfg):
    n = cfg.n
    if n is None:
        raise InputError("--n is required")
    if cfg.r is None and cfg.r_spec is None:
        raise InputError("give --r or --r-spec")
    radii = parse_r_spec(cfg.r_spec) if cfg.r_spec else _float_list(cfg.r, "--r")
    make_params(n, 0.0)
    p = cfg.p
    if not p >= 1:
        raise InputError("--p must be >= 1")
    rows = []
    asym = kernels.asymptotics_V_p(n, p)
    for r in radii:
        if not 0 < r <= 1:
            raise InputError(f"radii must lie in (0, 1], got {r}")
        if r == 1.0:
            vp = asym.boundary_constant if asym.boundary_exponent == 0 else math.inf
            rows.append({"r": 1.0, "f": 0.0, "G": 0.0, "V_p": vp})
        else:
            rows.append({"r": float(r), "f": float(kernels.f_weight(n, r)),
                         "G": float(kernels.green_G(n, r)), "V_p": float(kernels.weight_V_p(n, p, r))})
    return {"n": n, "p": p, "rows": rows}, (rows, ["r", "f", "G", "V_p"])


def cmd_verify(cfg):
    suite = cfg.suite
    if suite != "all" and suite not in verify.SUITES:
        raise InputError(f"unknown suite {suite!r}; choose from {', '.join(verify.SUITES + ('all',))}")
    report = verify.run_suite(suite)
    rows = [{"name": c.name, "status": c.status, "measured": c.measured, "tolerance": c.tolerance}
            for c in report.checks]
    code = EXIT_OK if report.passed else EXIT_VERIFY
    return report.as_dict(), (rows, ["name", "status", "measured", "tolerance"]), code


def _mu_record(cfg, params):
    R = cfg.radius
    ratio = cfg.ratio
    if cfg.geometry == "hyperbolic":
        if not 0 < R < 1:
            raise InputError("the hyperbolic ball needs --radius in (0, 1)")
        grid = geometric_grid(params.n, R, r_min=cfg.r_min or 1e-6 * R, ratio=ratio, max_spacing=R / 80)
        form = variational.hyperbolic_form(params, grid)
        threshold = variational.hyperbolic_threshold(params)
    else:
        if not R > 0:
            raise InputError("--radius must be positive")
        problem = _euclidean_problem(cfg, params)
        grid = geometric_grid(params.n, R, r_min=cfg.r_min or 1e-6 * R, ratio=ratio,
                              geometry=Geometry.EUCLIDEAN, max_spacing=R / 80)
        form = variational.euclidean_form(problem, grid)
        threshold = variational.mu_gamma_rn(params)
    opts = variational.MinimizeOptions(restarts=cfg.restarts, seed=cfg.seed)
    res = variational.minimize_quotient(form, opts)
    rec = res.as_dict()
    rec.update({
        "threshold": threshold,
        "margin_vs_threshold": threshold - res.mu_est,
        "below_threshold": bool(res.mu_est < threshold),
        "grid_nodes": len(grid),
        "geometry": cfg.geometry,
    })
    return rec


def cmd_mu(cfg):
    rec = _mu_record(cfg, cfg.params())
    return rec, (_long_rows([(0, rec)]), ["index", "field", "value"])


def _euclidean_problem(cfg, params):
    if cfg.h_coefficient == 0.0:
        return conformal.EuclideanProblem.unperturbed(params, cfg.radius)
    return conformal.EuclideanProblem.power(params, cfg.radius, cfg.h_coefficient, cfg.theta)


def _mass_record(cfg, params):
    if cfg.geometry == "hyperbolic":
        if not 0 < cfg.radius < 1:
            raise InputError("the hyperbolic ball needs --radius in (0, 1)")
        rep = mass.hyperbolic_mass(params, cfg.radius)
    else:
        if not cfg.radius > 0:
            raise InputError("--radius must be positive")
        rep = mass.euclidean_mass(params, _euclidean_problem(cfg, params))
    rec = rep.as_dict()
    rec["geometry"] = cfg.geometry
    if not rep.accepted:
        raise ConvergenceError(f"mass report failed its self-certification: {rec}")
    return rec


def cmd_mass(cfg):
    rec = _mass_record(cfg, cfg.params())
    return rec, (_long_rows([(0, rec)]), ["index", "field", "value"])


def cmd_lambda_star(cfg):
    params = cfg.params(lam=0.0)
    bracket = None
    if cfg.bracket:
        vals = _float_list(cfg.bracket, "--bracket")
        if len(vals) != 2 or not vals[0] < vals[1]:
            raise InputError("--bracket needs two increasing numbers")
        bracket = tuple(vals)
    if not 0 < cfg.radius < 1:
        raise InputError("the hyperbolic ball needs --radius in (0, 1)")
    res = mass.lambda_star(params, cfg.radius, bracket=bracket)
    rec = res.as_dict()
    rec["sign_certificate"] = bool(res.mass_below < 0 < res.mass_above)
    return rec, (_long_rows([(0, rec)]), ["index", "field", "value"])


def _certificate_record(cfg, params):
    if not 0 < cfg.radius < 1:
        raise InputError("the hyperbolic ball needs --radius in (0, 1)")
    return variational.existence_certificate(params, cfg.radius).as_dict()


def cmd_certificate(cfg):
    rec = _certificate_record(cfg, cfg.params())
    return rec, (_long_rows([(0, rec)]), ["index", "field", "value"])


_SWEEPABLE = {"mass": _mass_record, "certificate": _certificate_record, "mu": _mu_record}


def _sweep_one(task):
    cfg, name, value = task
    try:
        rec = _SWEEPABLE[cfg.sweep_command](cfg, cfg.params(**{name: value}))
        return {"status": "ok", **rec}
    except (NonCoerciveError, RegimeError, BracketError) as exc:
        return {"status": "refused", "message": str(exc)}
    except ConvergenceError as exc:
        return {"status": "failed", "message": str(exc)}


def pool_size(flag):
    env = os.environ.get("HYHARDY_THREADS")
    if env:
        try:
            size = int(env)
        except ValueError as exc:
            raise InputError(f"HYHARDY_THREADS must be an integer, got {env!r}") from exc
    elif flag is not None:
        size = flag
    else:
        size = os.cpu_count() or 1
    if size < 1:
        raise InputError("worker count must be positive")
    return size


def cmd_sweep(cfg):
    name = cfg.sweep_param
    if name not in ("lam", "gamma", "s"):
        raise InputError("--sweep-param must be lam, gamma or s")
    if cfg.sweep_command not in _SWEEPABLE:
        raise InputError(f"--sweep-command must be one of {', '.join(sorted(_SWEEPABLE))}")
    if not cfg.values:
        raise InputError("--values is required")
    values = _float_list(cfg.values, "--values")
    for v in values:
        cfg.params(**{name: v})
    tasks = [(cfg, name, v) for v in values]
    workers = pool_size(cfg.workers)
    if workers == 1 or len(tasks) == 1:
        results = [_sweep_one(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as ex:
            results = list(ex.map(_sweep_one, tasks))
    records = [{"index": i, name: v, **res} for i, (v, res) in enumerate(zip(values, results))]
    rows = _long_rows([(r["index"], r) for r in records])
    return {"command": cfg.sweep_command, "param": name, "records": records}, (
        rows, ["index", "field", "value"])


COMMANDS = {
    "kernels": cmd_kernels,
    "verify": cmd_verify,
    "mu": cmd_mu,
    "mass": cmd_mass,
    "lambda-star": cmd_lambda_star,
    "certificate": cmd_certificate,
    "sweep": cmd_sweep,
}


def run(argv=None, stdout=None, stderr=None):
    """Execute one command; returns the exit code."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code else EXIT_OK
    try:
        cfg = resolve_config(args)
        out = COMMANDS[args.command](cfg)
        result, table = out[0], out[1]
        code = out[2] if len(out) > 2 else EXIT_OK
    except (InputError, ParameterError, PreconditionError, DomainError) as exc:
        print(f"hyhardy: error: {exc}", file=stderr)
        return EXIT_INPUT
    except (NonCoerciveError, RegimeError, BracketError) as exc:
        print(f"hyhardy: refused: {exc}", file=stderr)
        return EXIT_REFUSED
    except (ConvergenceError, HyHardyError) as exc:
        print(f"hyhardy: numerical failure: {exc}", file=stderr)
        return EXIT_VERIFY
    if cfg.output_format == "csv":
        text = render_csv(*table)
    else:
        text = render_json(args.command, result)
    if cfg.output_path:
        with open(cfg.output_path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        stdout.write(text)
    return code


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":  # pragma: no cover
    main()
