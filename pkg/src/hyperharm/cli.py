"""Command line entry point: ``hyperharm <subcommand> [--flags]``.

Flags build a config; a ``--config`` file is merged over them, so values in
the file win.  Every stage subcommand runs that stage and whatever it needs.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .harmonic import dirichlet_solve, mesh_ball
from .pipeline import (ConfigError, ExperimentConfig, ExperimentReport, _merge,
                       boundary_map, generate, run, write_report)
from .hull import build_hull
from .geometry import origin
from .streams import RandomStream

# the hull command also probes the retraction's Lipschitz decay
STAGE_COMMANDS = {"gen": ["gen"], "hull": ["hull", "lipschitz"], "smooth": ["smooth"],
                  "dim": ["dim"], "volume": ["volume"], "heatdecay": ["heatdecay"],
                  "green": ["green"], "phi": ["phi"], "sweep": ["sweep"]}


def _floats(text: str) -> list:
    return [float(v) for v in text.split(",") if v.strip()]


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--config", type=Path, help="JSON config; its values override flags")
    p.add_argument("--seed", type=int)
    p.add_argument("--name")
    p.add_argument("--n", type=int, choices=(2, 3), help="dimension of the hyperbolic space")
    p.add_argument("--a", type=float, help="curvature scale (curvature -a^2)")
    p.add_argument("--generator", choices=("cantor", "circle", "snowflake", "geodesic", "bent"))
    p.add_argument("--ratio", type=float, help="Cantor contraction ratio")
    p.add_argument("--depth", type=int)
    p.add_argument("--m", type=int, help="sample count for circles and bent planes")
    p.add_argument("--theta", type=float, help="bending angle")
    p.add_argument("--roughness", type=float)
    p.add_argument("--hull-policy", choices=("auto", "all", "stratified", "chain"))
    p.add_argument("--hull-budget", type=int)
    p.add_argument("--samples", type=int, help="Monte Carlo samples for the stage")
    p.add_argument("--d", type=float, help="neighborhood depth, or ball radius for solve")
    p.add_argument("--d-grid", type=_floats, help="comma-separated ball radii")
    p.add_argument("--h", type=float, help="mesh spacing")
    p.add_argument("--tol", type=float)
    p.add_argument("--boundary-map", choices=("retract", "smoothed", "bent-unfold"))
    p.add_argument("--out", type=Path, default=Path("hyperharm-out"))
    p.add_argument("--format", action="append", choices=("csv", "json", "svg"),
                   help="report formats (repeatable; default all)")


def config_from_args(args, stages: list | None = None) -> ExperimentConfig:
    flags: dict = {}
    if args.seed is not None:
        flags["seed"] = args.seed
    if args.name:
        flags["name"] = args.name
    space = {k: v for k, v in (("n", args.n), ("a", args.a)) if v is not None}
    if space:
        flags["space"] = space
    gen = {k: v for k, v in (("kind", args.generator), ("ratio", args.ratio),
                             ("depth", args.depth), ("m", args.m), ("theta", args.theta),
                             ("roughness", args.roughness)) if v is not None}
    if gen:
        flags["generator"] = gen
    hull = {k: v for k, v in (("policy", args.hull_policy), ("budget", args.hull_budget))
            if v is not None}
    if hull:
        flags["hull"] = hull
    stage = stages[-1] if stages else None
    if args.samples is not None and stage in ("volume", "heatdecay", "green"):
        key = {"volume": ("volume", "samples"), "heatdecay": ("kernel", "samples"),
               "green": ("kernel", "green_samples")}[stage]
        flags.setdefault(key[0], {})[key[1]] = args.samples
    if args.d is not None and stage in ("volume", "heatdecay", "green"):
        flags.setdefault("volume" if stage == "volume" else "kernel", {})["d"] = args.d
    solver = {k: v for k, v in (("d_grid", args.d_grid), ("h", args.h), ("tol", args.tol),
                                ("boundary_map", args.boundary_map)) if v is not None}
    if solver:
        flags["solver"] = solver
    if flags.get("generator", {}).get("kind") == "bent":
        flags.setdefault("solver", {}).setdefault("boundary_map", "bent-unfold")
    raw = flags
    if args.config is not None:
        with open(args.config) as fh:
            raw = _merge(flags, json.load(fh))
    cfg = ExperimentConfig.from_dict(raw)
    if stages:
        cfg = cfg.with_stages(stages)
    return cfg


def _finish(report: ExperimentReport, args) -> int:
    formats = tuple(args.format or ("csv", "json", "svg"))
    for p in write_report(report, args.out, formats):
        print(p)
    for name, st in report.stages.items():
        extra = f"  ({st.error})" if st.error else ""
        print(f"{name:10s} {st.status}{extra}")
    print(f"report hash {report.hash()}")
    return 0 if report.passed else 1


def _cmd_stage(args) -> int:
    cfg = config_from_args(args, STAGE_COMMANDS[args.command])
    return _finish(run(cfg, log=lambda s: print(s, file=sys.stderr)), args)


def _cmd_run(args) -> int:
    cfg = config_from_args(args)
    return _finish(run(cfg, log=lambda s: print(s, file=sys.stderr)), args)


def _cmd_solve(args) -> int:
    """One Dirichlet problem on B(origin, d) with the configured boundary map."""
    cfg = config_from_args(args)
    d = args.d if args.d is not None else float(cfg["solver"]["d_grid"][-1])
    so = cfg["solver"]
    h = float(so["h"])
    if not 0 < h <= d / 4:
        raise ConfigError("$.solver.h", "mesh spacing must be at most d/4")
    S = generate(cfg)
    K = build_hull(S, cfg["hull"]["policy"], int(cfg["hull"]["budget"]),
                   rng=RandomStream(cfg.seed).child("hull"))
    center = origin(cfg["space"]["n"])
    rmap = boundary_map(cfg, K, center, d)
    mesh = mesh_ball(center, d, h, cfg["space"]["a"])
    _, rep = dirichlet_solve(mesh, rmap(mesh.points), float(so["tol"]), int(so["max_iters"]))
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / "solve.json").write_text(rep.to_json())
    (args.out / "solve-trace.csv").write_text(rep.trace_csv())
    print(rep.to_json())
    return 0 if rep.converged else 1


def _cmd_report(args) -> int:
    report = ExperimentReport.load(args.input)
    return _finish(report, args)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hyperharm", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in STAGE_COMMANDS:
        p = sub.add_parser(name, help=f"run the {name} stage and its prerequisites")
        _add_common(p)
        p.set_defaults(func=_cmd_stage)
    p = sub.add_parser("solve", help="a single harmonic Dirichlet solve")
    _add_common(p)
    p.set_defaults(func=_cmd_solve)
    p = sub.add_parser("run", help="every stage enabled in the config")
    _add_common(p)
    p.set_defaults(func=_cmd_run)
    p = sub.add_parser("report", help="re-emit CSV/JSON/SVG from a saved report.json")
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--out", type=Path, default=Path("hyperharm-out"))
    p.add_argument("--format", action="append", choices=("csv", "json", "svg"))
    p.set_defaults(func=_cmd_report)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
