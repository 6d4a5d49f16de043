"""Command-line front end.

Exit codes: 0 success, 1 usage or input error, 2 a check found a
violation, 3 a hypothesis of the check fails, 4 no comparison parameter
exists, 5 numeric failure.  Diagnostics go to stderr as one-line JSON.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import bounds, comparison, hodograph, stream
from .errors import (
    DegenerateHp,
    EvaluationDomain,
    GradientTooSmall,
    HypothesisViolated,
    NoCheckS,
    NumericFailure,
    SchemaError,
)
from .quadrature import DEFAULT_TOL
from .vorticity import VorticityDistribution, s_zero

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VIOLATION = 2
EXIT_HYPOTHESIS = 3
EXIT_NO_CHECK_S = 4
EXIT_NUMERIC = 5

SUBCOMMANDS = ("stream-table", "critical", "solve", "check-wave", "compare", "hodograph", "fixture")


# -- serialization -------------------------------------------------------------

def _num(v: float) -> str:
    if math.isnan(v):
        return "null"
    if math.isinf(v):
        return '"inf"' if v > 0 else '"-inf"'
    return format(v, ".17g")


def dumps(obj, indent: Optional[int] = None, _level: int = 0) -> str:
    """JSON text with 17 significant digits and infinities as strings."""
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _num(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    pad = "" if indent is None else "\n" + " " * (indent * (_level + 1))
    end = "" if indent is None else "\n" + " " * (indent * _level)
    sep = ", " if indent is None else ","
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{" + sep.join(items) + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        # numeric rows stay on one line
        if indent is not None and all(not isinstance(v, (dict, list, tuple)) for v in obj):
            return "[" + ", ".join(dumps(v) for v in obj) + "]"
        return "[" + sep.join(f"{pad}{dumps(v, indent, _level + 1)}" for v in obj) + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _revive(obj):
    if isinstance(obj, dict):
        return {k: _revive(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_revive(v) for v in obj]
    if obj == "inf":
        return math.inf
    if obj == "-inf":
        return -math.inf
    return obj


def document(payload: dict) -> dict:
    return {"wavebound_schema": SCHEMA_VERSION, **payload}


def load_json(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise SchemaError(f"{path} must hold a JSON object")
    version = doc.get("wavebound_schema", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise SchemaError(f"{path} has schema version {version!r}, expected {SCHEMA_VERSION}")
    return _revive(doc)


def write_json(payload: dict, out: Optional[str]) -> None:
    text = dumps(document(payload), indent=1 if out else None) + "\n"
    _write_text(text, out)


def _write_text(text: str, out: Optional[str]) -> None:
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def diagnose(kind: str, message: str, **extra) -> None:
    sys.stderr.write(dumps({"error": kind, "message": message, **extra}) + "\n")


# -- configuration --------------------------------------------------------------

@dataclass
class RunConfig:
    subcommand: str
    vorticity: Optional[str] = None
    wave: Optional[str] = None
    fields: Optional[list] = None
    f: Optional[str] = None
    r: Optional[float] = None
    s: Optional[float] = None
    s_min: Optional[float] = None
    s_max: Optional[float] = None
    n: int = 101
    quad_tol: float = DEFAULT_TOL
    check_tol: float = 1e-6
    out: Optional[str] = None
    format: str = "json"
    bound: str = "upper"
    class_tol: Optional[float] = None
    p_count: Optional[int] = None
    delta: float = 1e-8
    name: Optional[str] = None
    branch: str = "minus"
    p: float = 3.0
    dim: int = 2
    spacing: float = 1.0 / 64

    def validate(self) -> None:
        if self.subcommand not in SUBCOMMANDS:
            raise SchemaError(f"unknown subcommand {self.subcommand!r}")
        if not (self.quad_tol > 0 and self.check_tol > 0):
            raise SchemaError("tolerances must be positive")

    def need(self, attr: str, flag: str):
        val = getattr(self, attr)
        if val is None:
            raise SchemaError(f"{self.subcommand} needs {flag}")
        return val


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        diagnose("usage", message)
        raise SystemExit(EXIT_USAGE)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--vorticity", metavar="PATH", help="vorticity distribution JSON")
    common.add_argument("--quad-tol", type=float, default=DEFAULT_TOL, help="absolute quadrature tolerance")
    common.add_argument("--check-tol", type=float, default=1e-6, help="tolerance of inequality checks")
    common.add_argument("--out", metavar="PATH", help="output file (directory for fixture remark1); stdout by default")
    common.add_argument("--format", choices=("json", "csv"), default="json")

    ap = _Parser(prog="wavebound", description="Stream solutions and bounds for steady water waves with vorticity.")
    sub = ap.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)

    p = sub.add_parser("stream-table", parents=[common], help="tabulate h(s) and R(s)")
    p.add_argument("--s-min", type=float)
    p.add_argument("--s-max", type=float)
    p.add_argument("--n", type=int, default=101, help="number of s samples")

    sub.add_parser("critical", parents=[common], help="s0, h0, s_c, r_c, r0")

    p = sub.add_parser("solve", parents=[common], help="stream branches for a head r, or a profile for s")
    p.add_argument("--r", type=float)
    p.add_argument("--s", type=float)
    p.add_argument("--n", type=int, default=65, help="profile samples when --s is given")

    p = sub.add_parser("check-wave", parents=[common], help="upper/lower stream-function bounds for a wave")
    p.add_argument("--wave", metavar="PATH", required=True, help="wave field JSON")
    p.add_argument("--bound", choices=("upper", "lower", "both"), default="upper")

    p = sub.add_parser("compare", parents=[common], help="comparison-principle check for two grid fields")
    p.add_argument("--field", metavar="PATH", action="append", dest="fields", help="grid field JSON; give twice")
    p.add_argument("--f", metavar="PATH", required=True, help="nonlinearity JSON")
    p.add_argument("--class-tol", type=float, help="residual tolerance of the solution-class test")

    p = sub.add_parser("hodograph", parents=[common], help="partial hodograph patch of a grid field")
    p.add_argument("--field", metavar="PATH", action="append", dest="fields", help="grid field JSON")
    p.add_argument("--f", metavar="PATH", help="nonlinearity JSON for the L h residual")
    p.add_argument("--p-count", type=int, help="number of p levels")
    p.add_argument("--delta", type=float, default=1e-8, help="minimum admissible normal derivative")

    p = sub.add_parser("fixture", parents=[common], help="write reference inputs")
    p.add_argument("name", choices=("stream-as-wave", "remark1"))
    p.add_argument("--r", type=float)
    p.add_argument("--s", type=float)
    p.add_argument("--branch", choices=("minus", "plus"), default="minus")
    p.add_argument("--p", type=float, default=3.0)
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--spacing", type=float, default=1.0 / 64, help="grid spacing of the remark1 fields")
    return ap


def parse_config(argv) -> RunConfig:
    ns = build_parser().parse_args(argv)
    cfg = RunConfig(**{k: v for k, v in vars(ns).items() if k in RunConfig.__dataclass_fields__})
    cfg.validate()
    return cfg


# -- subcommands ----------------------------------------------------------------

def _dist(cfg: RunConfig) -> VorticityDistribution:
    return VorticityDistribution.from_json(load_json(cfg.need("vorticity", "--vorticity")))


def _cmd_stream_table(cfg: RunConfig) -> int:
    dist = _dist(cfg)
    s0, _ = s_zero(dist)
    s_min = cfg.s_min if cfg.s_min is not None else s0 + 1e-3 * max(1.0, s0)
    s_max = cfg.s_max if cfg.s_max is not None else s_min + 4.0
    table = stream.scan(dist, s_min, s_max, cfg.n, cfg.quad_tol)
    if cfg.format == "csv":
        _write_text(table.to_csv(), cfg.out)
    else:
        rows = [{"s": a, "h": b, "R": c} for a, b, c in zip(table.s_grid, table.h_values, table.R_values)]
        write_json({"critical": table.critical_json(), "rows": rows}, cfg.out)
    return EXIT_OK


def _cmd_critical(cfg: RunConfig) -> int:
    dist = _dist(cfg)
    s0, _ = s_zero(dist)
    s_c, r_c = stream.critical_head(dist, cfg.quad_tol)
    payload = {"s0": s0, "h0": stream.h_zero(dist, cfg.quad_tol), "s_c": s_c, "r_c": r_c, "r0": stream.r_zero(dist, cfg.quad_tol)}
    if cfg.format == "csv":
        _write_text(",".join(payload) + "\n" + ",".join(format(v, ".17g") for v in payload.values()) + "\n", cfg.out)
    else:
        write_json(payload, cfg.out)
    return EXIT_OK


def _cmd_solve(cfg: RunConfig) -> int:
    dist = _dist(cfg)
    if (cfg.r is None) == (cfg.s is None):
        raise SchemaError("solve needs exactly one of --r and --s")
    if cfg.r is not None:
        write_json(stream.solve_stream_pair(dist, cfg.r, cfg.quad_tol).to_json(), cfg.out)
        return EXIT_OK
    prof = stream.stream_profile(dist, cfg.s, cfg.n, cfg.quad_tol)
    if cfg.format == "csv":
        lines = ["y,U,dU"] + [",".join(format(float(v), ".17g") for v in row) for row in prof.samples]
        _write_text("\n".join(lines) + "\n", cfg.out)
    else:
        write_json(
            {"s": prof.s, "depth": prof.depth, "r": stream.head_R(dist, prof.s, cfg.quad_tol), "samples": prof.samples},
            cfg.out,
        )
    return EXIT_OK


def _cmd_check_wave(cfg: RunConfig) -> int:
    dist = _dist(cfg)
    wave = bounds.WaveField.from_json(load_json(cfg.wave))
    reports = {}
    if cfg.bound in ("upper", "both"):
        reports["upper"] = bounds.check_upper_bound(wave, dist, tol=cfg.check_tol, quad_tol=cfg.quad_tol)
    if cfg.bound in ("lower", "both"):
        reports["lower"] = bounds.check_lower_bound(wave, dist, tol=cfg.check_tol, quad_tol=cfg.quad_tol)
    if len(reports) == 1:
        write_json(next(iter(reports.values())).to_json(), cfg.out)
    else:
        write_json({k: v.to_json() for k, v in reports.items()}, cfg.out)
    return max(rep.exit_code for rep in reports.values())


def _fields(cfg: RunConfig, count: int) -> list:
    paths = cfg.fields or []
    if len(paths) != count:
        raise SchemaError(f"{cfg.subcommand} needs --field exactly {count} time(s)")
    return [comparison.GridField.from_json(load_json(p)) for p in paths]


def _cmd_compare(cfg: RunConfig) -> int:
    u1, u2 = _fields(cfg, 2)
    f = comparison.NonlinearTerm.from_json(load_json(cfg.f))
    rep = comparison.compare_pair(u1, u2, f, tol=cfg.check_tol, class_tol=cfg.class_tol)
    write_json(rep.to_json(), cfg.out)
    if rep.verdict.startswith("hypothesis_failed"):
        return EXIT_HYPOTHESIS
    return EXIT_VIOLATION if rep.verdict == "inconsistent" else EXIT_OK


def _finite_max(a) -> float:
    a = np.asarray(a, dtype=float)
    a = a[np.isfinite(a)]
    return float(np.max(np.abs(a))) if a.size else 0.0


def _cmd_hodograph(cfg: RunConfig) -> int:
    (u,) = _fields(cfg, 1)
    patch = hodograph.forward(u, p_count=cfg.p_count, delta=cfg.delta)
    summary = {
        "p_interval": patch.metadata["p_interval"],
        "reciprocal_residual": _finite_max(hodograph.reciprocal_residual(u, patch)),
        "chain_residual": max((_finite_max(c) for c in hodograph.chain_residual(u, patch)), default=0.0),
    }
    if cfg.f:
        f = comparison.NonlinearTerm.from_json(load_json(cfg.f))
        summary["L_residual_max"] = _finite_max(hodograph.operator_L(patch, f))
    if cfg.out:
        write_json(patch.to_json(), cfg.out)
    write_json(summary, None)
    return EXIT_OK


def _cmd_fixture(cfg: RunConfig) -> int:
    if cfg.name == "stream-as-wave":
        dist = _dist(cfg)
        wave = bounds.stream_wave_fixture(dist, s=cfg.s, r=cfg.r, branch=cfg.branch, quad_tol=cfg.quad_tol)
        write_json(wave.to_json(), cfg.out)
        return EXIT_OK
    if not cfg.p > 2 or cfg.dim < 2 or not cfg.spacing > 0:
        raise SchemaError("remark1 needs p > 2, dim >= 2 and spacing > 0")
    u1, u2, f = comparison.remark1_fixture(cfg.p, cfg.dim, spacing=cfg.spacing)
    outdir = cfg.out or "."
    os.makedirs(outdir, exist_ok=True)
    for name, doc in (("u1.json", u1.to_json()), ("u2.json", u2.to_json()), ("f.json", f.to_json())):
        write_json(doc, os.path.join(outdir, name))
    return EXIT_OK


_DISPATCH = {
    "stream-table": _cmd_stream_table,
    "critical": _cmd_critical,
    "solve": _cmd_solve,
    "check-wave": _cmd_check_wave,
    "compare": _cmd_compare,
    "hodograph": _cmd_hodograph,
    "fixture": _cmd_fixture,
}


def run(cfg: RunConfig) -> int:
    """Execute one subcommand and map failures to exit codes."""
    try:
        cfg.validate()
        return _DISPATCH[cfg.subcommand](cfg)
    except (HypothesisViolated, GradientTooSmall) as exc:
        diagnose(type(exc).__name__, str(exc))
        return EXIT_HYPOTHESIS
    except NoCheckS as exc:
        diagnose("NoCheckS", str(exc))
        return EXIT_NO_CHECK_S
    except (NumericFailure, EvaluationDomain, DegenerateHp) as exc:
        diagnose(type(exc).__name__, str(exc))
        return EXIT_NUMERIC
    except (ValueError, KeyError, TypeError) as exc:
        diagnose(type(exc).__name__, str(exc))
        return EXIT_USAGE


def main(argv=None) -> int:
    try:
        cfg = parse_config(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    except SchemaError as exc:
        diagnose("SchemaError", str(exc))
        return EXIT_USAGE
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
