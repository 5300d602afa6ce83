"""Command-line surface.

Subcommands: verify, football, surgery-demo, average, check-surface.
Reports are JSON documents with schema "systole-lab/1"; identical config
and seed produce byte-identical report files (wall time goes to stderr).
Figures are written where --svg points, rendered in the chart plane.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import tempfile
import time

import numpy as np

from . import figures
from .averaging import find_short_football_geodesic, fubini_check
from .errors import ConfigError, SurfaceError, SystoleLabError
from .factors import factor_from_expression, factor_from_grid
from .football import figure_eight_geodesic, football_factor
from .instances import random_instance
from .metrics import ConformalFactor
from .sphere import sample_great_circles
from .surfaces import build_surface
from .surgery import find_odd_loop_ex, polyloop_length
from .verifier import verify_relative_pu

SCHEMA = "systole-lab/1"

_CONFIG_KEYS = {
    "polynomial": list,
    "factor": dict,
    "samples": int,
    "seed": int,
    "quadrature_level": int,
    "surgery": dict,
}
_FACTOR_KEYS = {"expression", "grid"}
_SURGERY_KEYS = {"point_count", "loop_count"}


def load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config: {exc}")
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    validate_config(cfg)
    return cfg


def validate_config(cfg: dict) -> None:
    for key, value in cfg.items():
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"unknown config key {key!r}")
        want = _CONFIG_KEYS[key]
        if want is int and isinstance(value, bool):
            raise ConfigError(f"config key {key!r} must be an integer")
        if not isinstance(value, want):
            raise ConfigError(f"config key {key!r} must be {want.__name__}")
    factor = cfg.get("factor", {})
    for key in factor:
        if key not in _FACTOR_KEYS:
            raise ConfigError(f"unknown factor key {key!r}")
    if len(factor) > 1:
        raise ConfigError("factor must give exactly one of expression or grid")
    surgery = cfg.get("surgery", {})
    for key in surgery:
        if key not in _SURGERY_KEYS:
            raise ConfigError(f"unknown surgery key {key!r}")
    poly = cfg.get("polynomial")
    if poly is not None and not all(isinstance(x, (int, float)) and
                                    not isinstance(x, bool) for x in poly):
        raise ConfigError("polynomial must be a list of numbers")


def resolve_factor(cfg: dict) -> ConformalFactor:
    spec = cfg.get("factor", {"expression": "1"})
    if "grid" in spec:
        return factor_from_grid(spec["grid"])
    expression = spec.get("expression", "1")
    if expression.strip().lower() == "football":
        return football_factor()
    return factor_from_expression(expression)


def write_report(report: dict, path: str | None) -> str:
    payload = json.dumps(report, sort_keys=True, indent=2) + "\n"
    if path is None:
        sys.stdout.write(payload)
        return ""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _base_report(command: str, cfg: dict) -> dict:
    return {
        "schema": SCHEMA,
        "command": command,
        "config": cfg,
        "results": {},
        "slack": {},
        "wall_time_s": None,
    }


def cmd_verify(cfg: dict, args) -> dict:
    poly = cfg.get("polynomial")
    if poly is None:
        raise ConfigError("verify needs a polynomial")
    X = build_surface(poly)
    f = resolve_factor(cfg)
    cert = verify_relative_pu(f, X,
                              samples=cfg.get("samples", 4000),
                              seed=cfg.get("seed", 1),
                              quadrature_level=cfg.get("quadrature_level", 6))
    report = _base_report("verify", cfg)
    report["results"] = {
        "certificate": cert.to_json(),
        "genus": X.genus,
        "ratio_ok": cert.ratio <= 0.25 * math.pi * (1.0 + cert.slack),
    }
    report["slack"] = cert.slack_breakdown | {"total": cert.slack}
    if args.svg:
        figures.save_figure(
            figures.certificate_figure(cert, X.weierstrass_roots), args.svg)
    return report


def cmd_football(cfg: dict, args) -> dict:
    f = resolve_factor(cfg)
    count = max(1, min(cfg.get("samples", 3), 12))
    seed = cfg.get("seed", 1)
    geos = []
    hoops = []
    skipped = 0
    for circle in sample_great_circles(4 * count + 8, seed):
        if len(geos) == count:
            break
        try:
            g = figure_eight_geodesic(circle)
        except SystoleLabError:
            skipped += 1
            continue
        if g.degenerate:
            skipped += 1
            continue
        geos.append(g)
        from .averaging import arc_length_precise
        from .football import cover_factor
        fc = cover_factor(f)
        t0 = math.atan2(float(np.dot(np.cross(circle.n, [0, 0, 1]), circle.e2)),
                        float(np.dot(np.cross(circle.n, [0, 0, 1]), circle.e1)))
        mid = circle.point(t0 + 0.5 * math.pi)
        if mid[2] > 0:
            t0 += math.pi
        hoops.append((arc_length_precise(fc, circle, t0, t0 + math.pi),
                      arc_length_precise(fc, circle, t0 + math.pi, t0 + 2 * math.pi)))
    report = _base_report("football", cfg)
    report["results"] = {
        "geodesics": [g.to_record() for g in geos],
        "hoop_lengths": [[a, b] for a, b in hoops],
        "skipped_degenerate": skipped,
    }
    if args.svg:
        figures.save_figure(
            figures.football_figure(geos, [a for a, _ in hoops]), args.svg)
    return report


def cmd_surgery_demo(cfg: dict, args) -> dict:
    surgery_cfg = cfg.get("surgery", {})
    count = surgery_cfg.get("point_count", 3)
    if count % 2 == 0:
        raise ConfigError("the labeled set must have odd size")
    seed = cfg.get("seed", 1)
    S, loops = random_instance(count, seed,
                               n_loops=surgery_cfg.get("loop_count", count))
    f = resolve_factor(cfg)
    loops = [lp.with_length(f) for lp in loops]
    L = max(lp.metric_length for lp in loops) * (1.0 + 1e-4)
    out, stats = find_odd_loop_ex(loops, S, L, S, f=f, seed=seed)
    report = _base_report("surgery-demo", cfg)
    report["results"] = {
        "points": [[s.real, s.imag] for s in S],
        "input_lengths": [lp.metric_length for lp in loops],
        "length_bound": L,
        "output_length": out.metric_length,
        "odd_windings": sorted(int(i) for i in stats["odd_set"]),
        "surgeries": stats["surgeries"],
        "parity_odd": len(stats["odd_set"]) % 2 == 1,
        "length_ok": out.metric_length <= L + 1e-9,
    }
    if not (report["results"]["parity_odd"] and report["results"]["length_ok"]):
        raise SystoleLabError("surgery postcondition failed", code="surgery-failed")
    if args.svg:
        figures.save_figure(figures.surgery_figure(loops, out, S), args.svg)
    return report


def cmd_average(cfg: dict, args) -> dict:
    f = resolve_factor(cfg)
    rep = fubini_check(f, cfg.get("samples", 20000), cfg.get("seed", 1),
                       quadrature_level=cfg.get("quadrature_level", 6))
    report = _base_report("average", cfg)
    report["results"] = rep.to_json()
    report["slack"] = {"monte_carlo": rep.slack}
    if not rep.agrees:
        raise SystoleLabError("Fubini sides disagree beyond 3 standard errors",
                              code="fubini-mismatch")
    return report


def cmd_check_surface(cfg: dict, args) -> dict:
    poly = cfg.get("polynomial")
    if poly is None:
        raise ConfigError("check-surface needs a polynomial")
    X = build_surface(poly)
    report = _base_report("check-surface", cfg)
    report["results"] = {
        "genus": X.genus,
        "degree": 2 * X.genus + 2,
        "weierstrass_roots": [[r.real, r.imag] for r in X.weierstrass_roots],
        "upper_half_plane_count": len(X.upper_ramification_points()),
        "lower_half_plane_count": len(X.lower_ramification_points()),
    }
    return report


_COMMANDS = {
    "verify": cmd_verify,
    "football": cmd_football,
    "surgery-demo": cmd_surgery_demo,
    "average": cmd_average,
    "check-surface": cmd_check_surface,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="systole-lab",
        description="Short-loop certificates for singular conformal metrics "
                    "on the sphere and hyperelliptic double covers.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON config path")
        p.add_argument("--out", default=None, help="report JSON path")
        p.add_argument("--svg", default=None, help="figure output path")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--samples", type=int, default=None)
        p.add_argument("--quadrature-level", type=int, default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    start = time.perf_counter()
    try:
        cfg = load_config(args.config)
        for key in ("seed", "samples"):
            value = getattr(args, key)
            if value is not None:
                cfg[key] = value
        if args.quadrature_level is not None:
            cfg["quadrature_level"] = args.quadrature_level
        if "SYSTOLE_LAB_THREADS" in os.environ:
            try:
                int(os.environ["SYSTOLE_LAB_THREADS"])
            except ValueError:
                raise ConfigError("SYSTOLE_LAB_THREADS must be an integer")
        report = _COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config-invalid: {exc}", file=sys.stderr)
        return 2
    except SurfaceError as exc:
        # a rejected polynomial is a configuration problem
        print(f"config-invalid ({exc.code}): {exc}", file=sys.stderr)
        return 2
    except SystoleLabError as exc:
        print(f"computation-failed ({exc.code}): {exc}", file=sys.stderr)
        return 3
    wall = time.perf_counter() - start
    write_report(report, args.out)
    print(f"{args.command}: ok in {wall:.2f}s", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
