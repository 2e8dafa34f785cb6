"""Command-line front end.

Every run prints one JSON report envelope and writes it to ``<out>/report.json``
next to the command's artifacts.  Exit codes: 0 success, 1 numerical failure
(or a failed verification), 2 configuration or domain error.

Configuration is layered: the shipped ``defaults.toml``, then an optional
``--config`` file (TOML, or JSON by suffix), then command-line flags.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import os
import sys
import time
from enum import Enum
from importlib import resources
from pathlib import Path

import numpy as np

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .exceptions import ConfigError, DomainError, HyperminError, NumericalError

log = logging.getLogger("hypermin.cli")

COMMANDS = ("barrier", "solve", "plateau", "example", "classify", "trap", "verify", "report")


# --------------------------------------------------------------------------
# configuration


def load_defaults() -> dict:
    text = resources.files("hypermin").joinpath("defaults.toml").read_text()
    return tomllib.loads(text)


def read_config_file(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e.strerror}") from None
    try:
        data = json.loads(text) if path.suffix.lower() == ".json" else tomllib.loads(text)
    except (ValueError, tomllib.TOMLDecodeError) as e:
        raise ConfigError(f"cannot parse config {path}: {e}") from None
    if not isinstance(data, dict):
        raise ConfigError("a config file must hold a table of tables")
    return data


def _is_num(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _coerce(where, value, default):
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{where} must be a boolean")
        return value
    if isinstance(default, int):
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        if not isinstance(value, int) or isinstance(value, bool):
            raise ConfigError(f"{where} must be an integer")
        return value
    if isinstance(default, float):
        if not _is_num(value):
            raise ConfigError(f"{where} must be a number")
        return float(value)
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{where} must be a string")
        return value
    if isinstance(default, list):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{where} must be a list")
        proto = default[0] if default else ""
        return [_coerce(f"{where}[{i}]", v, proto) for i, v in enumerate(value)]
    raise ConfigError(f"{where}: unsupported default type")  # pragma: no cover


def _check_value(table, key, value, default):
    where = f"{table}.{key}"
    if key == "chi":  # an integer or "auto"
        if value == "auto" or (isinstance(value, int) and not isinstance(value, bool)):
            return value
        if isinstance(value, str):
            try:
                return int(value)
            except ValueError:
                pass
        raise ConfigError(f"{where} must be an integer or \"auto\"")
    value = _coerce(where, value, default)
    if key == "tol" or key.endswith("_tol"):
        if not (value > 0 and math.isfinite(value)):
            raise ConfigError(f"{where} must be > 0, got {value}")
    if isinstance(default, list) and (key.endswith("_range") or key.endswith("resolution")):
        if len(value) != len(default):
            raise ConfigError(f"{where} needs {len(default)} entries")
    if key == "seed" and not 0 <= value < 2**64:
        raise ConfigError(f"{where} must be an unsigned 64-bit integer")
    return value


def merge_config(defaults: dict, layers) -> dict:
    """Apply override layers ``{table: {key: value}}`` on top of the defaults.

    Unknown tables and keys are rejected; values are checked against the
    default's type.
    """
    cfg = {t: dict(v) for t, v in defaults.items()}
    for layer in layers:
        for table, entries in layer.items():
            if table not in cfg:
                raise ConfigError(f"unknown config table {table!r}")
            if not isinstance(entries, dict):
                raise ConfigError(f"config table {table!r} must be a table")
            for key, value in entries.items():
                if key not in cfg[table]:
                    raise ConfigError(f"unknown config key {table}.{key}")
                cfg[table][key] = _check_value(table, key, value, defaults[table][key])
    return cfg


# --------------------------------------------------------------------------
# JSON


def jsonable(obj):
    """Plain JSON types; numpy scalars and arrays unwrapped, non-finite floats to null."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, Enum):
        return jsonable(obj.value)
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, Path):
        return str(obj)
    return obj


def dumps(obj) -> str:
    return json.dumps(jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def payload_digest(payload) -> str:
    return hashlib.sha256(dumps(payload).encode()).hexdigest()


def _write_json(path, obj):
    Path(path).write_text(dumps(obj))
    return Path(path).name


# --------------------------------------------------------------------------
# commands


def _model(cfg):
    from .hyperbolic import CuspModel

    return CuspModel(cfg["tau"], cfg["h"], cfg["y0"])


def cmd_barrier(cfg, out, seed):
    from .barrier import BarrierParams, barrier_mesh, integrate_alpha
    from .mesh import write_obj

    if not cfg["lambda"] or not cfg["T"]:
        raise ConfigError("barrier needs non-empty lambda and T grids")
    # validate the whole grid before writing anything
    grid = [BarrierParams(lam, T, cfg["t_offset"]) for lam in cfg["lambda"] for T in cfg["T"]]
    items, bad = [], []
    for params in grid:
        curve = integrate_alpha(params)
        patch = barrier_mesh(params, cfg["u_range"], cfg["resolution"], curve)
        stem = f"barrier_l{params.lam:g}_T{params.T:g}"
        fi = float(np.max(curve.first_integral_residual()))
        rep = {
            "lambda": params.lam, "T": params.T, "t_offset": params.t_offset,
            "v0": curve.v0, "alpha_max": params.alpha_max, "n_samples": int(len(curve.v)),
            "first_integral_residual": fi, "mean_curvature_residual": patch.residual,
            "files": [write_obj(patch.mesh, out / f"{stem}.obj").name,
                      curve.to_csv(out / f"{stem}.csv").name, f"{stem}.json"],
        }
        _write_json(out / f"{stem}.json", rep)
        items.append(rep)
        if fi > cfg["tol"]:
            bad.append(stem)
    payload = {"curves": items, "tol": cfg["tol"]}
    if bad:
        raise NumericalError(f"first-integral residual above tolerance for {', '.join(bad)}", payload)
    return payload


def _jittered(problem, amount, seed):
    """Move interior vertices by up to ``amount`` times their shortest incident edge."""
    import dataclasses

    if amount == 0:
        return problem
    if not 0 < amount <= 0.3:
        raise ConfigError("solve.jitter must lie in [0, 0.3]")
    P = problem.points.copy()
    F = problem.faces
    fixed = np.zeros(len(P), dtype=bool)
    for ids in problem.arcs.values():
        fixed[ids] = True
    fixed[np.setdiff1d(np.arange(len(P)), F.ravel())] = True
    edges = np.concatenate([F[:, [0, 1]], F[:, [1, 2]], F[:, [2, 0]]])
    L = np.linalg.norm(P[edges[:, 0]] - P[edges[:, 1]], axis=1)
    short = np.full(len(P), np.inf)
    np.minimum.at(short, edges[:, 0], L)
    np.minimum.at(short, edges[:, 1], L)
    rng = np.random.default_rng(seed)
    ang = rng.uniform(0.0, 2 * math.pi, len(P))
    rad = amount * short * rng.uniform(0.0, 1.0, len(P))
    move = ~fixed
    P[move] += (rad[:, None] * np.column_stack([np.cos(ang), np.sin(ang)]))[move]
    return dataclasses.replace(problem, points=P)


def cmd_solve(cfg, out, seed):
    from .domains import ideal_triangle
    from .graph_solver import BoundaryDatum, omega_n, quadrilateral, solve
    from .mesh import write_obj, write_vtk

    dom = cfg["domain"]
    n = cfg["resolution"]
    if n < 2:
        raise ConfigError("solve.resolution must be >= 2")
    if dom == "quadrilateral":
        problem = quadrilateral(cfg["x_range"], cfg["y_range"], (n, n),
                                BoundaryDatum.affine(0.0, cfg["lam"], 0.0))
    elif dom == "omega_n":
        problem = omega_n(cfg["n"], n_theta=3 * n, Lambda=cfg["Lambda"])
    elif dom == "ideal_triangle":
        problem = ideal_triangle(cfg["h"], cfg["y_cut"], n).problem
    else:
        raise ConfigError(f"unknown solve.domain {dom!r}; use quadrilateral, omega_n or ideal_triangle")
    problem = _jittered(problem, cfg["jitter"], seed)
    sol = solve(problem, tol=cfg["tol"])
    mesh = sol.surface_mesh()
    write_obj(mesh, out / "surface.obj")
    write_vtk(mesh, out / "surface.vtk", {"u": sol.u})
    payload = {"domain": dom, "solution": sol.report(), "files": ["surface.obj", "surface.vtk"]}
    if dom == "quadrilateral":
        exact = cfg["lam"] * problem.hp_points[:, 0]
        payload["exact_error"] = float(np.max(np.abs(sol.u - exact)))
    return payload


def _polygon_from_json(path):
    from .plateau import Polygon

    try:
        d = json.loads(Path(path).read_text())
    except (OSError, ValueError) as e:
        raise ConfigError(f"cannot read polygon {path}: {e}") from None
    if not isinstance(d, dict) or "vertices" not in d:
        raise ConfigError("polygon JSON needs a \"vertices\" list")
    return Polygon(np.asarray(d["vertices"], dtype=float), d.get("kinds"), d.get("names"))


def cmd_plateau(cfg, out, seed):
    from .examples import scherk_hexagon
    from .mesh import write_obj
    from .plateau import PlateauSolver

    poly = _polygon_from_json(cfg["polygon"]) if cfg["polygon"] else scherk_hexagon(cfg["h"])
    solver = PlateauSolver(target=cfg["target"], tol=cfg["tol"], ambient=cfg["ambient"])
    solver.fit(poly)
    write_obj(solver.mesh_, out / "plateau.obj")
    return {"polygon": {"vertices": poly.vertices, "kinds": poly.kinds, "names": poly.names},
            "ambient": cfg["ambient"], "result": solver.result_.report(),
            "area_trace_tail": solver.result_.area_trace[-5:], "files": ["plateau.obj"]}


def _build(example_id, h, resolution, y_cut=16.0, target=0.12, r_cut=0.9, tol=1e-8, plateau_tol=1e-4):
    from .examples import build_example

    if example_id in (1, 2, 5):
        return build_example(example_id, h=h, y_cut=y_cut, n_cols=resolution, tol=tol)
    if example_id == 3:
        return build_example(3, h=h, target=target, tol=plateau_tol)
    if example_id == 4:
        return build_example(4, h=h, r_cut=r_cut, target=target, tol=plateau_tol)
    raise ConfigError(f"unknown example {example_id}; choose 1 to 5")


def _provenance(example_id, h, resolution, y_cut):
    return f"example id={example_id} h={h!r} resolution={resolution} y_cut={y_cut!r}"


def cmd_example(cfg, out, seed):
    from .mesh import merge_meshes, write_obj

    eid = cfg["id"]
    b = _build(eid, cfg["h"], cfg["resolution"], cfg["y_cut"], cfg["target"], cfg["r_cut"],
               cfg["tol"], cfg["plateau_tol"])
    files = {}
    for p in b.complex.patches:
        name = "patch_" + p.name.replace("'", "p") + ".obj"
        write_obj(p.mesh, out / name)
        files[p.name] = name
    # the quotient's gluing cannot be stored in an OBJ; write the welded
    # fundamental domain with a provenance line that verify can rebuild from
    quotient = f"example{eid}.obj"
    fd, _ = merge_meshes([p.mesh for p in b.complex.patches], tol=1e-9)
    write_obj(fd, out / quotient, [_provenance(eid, cfg["h"], cfg["resolution"], cfg["y_cut"])])
    manifest = b.complex.manifest(b.topology, files)
    manifest.update(example=eid, params=b.params, ends=b.ends, diagnostics=b.diagnostics,
                    deck_check=b.complex.deck_check(), domain_file=quotient)
    _write_json(out / "manifest.json", manifest)
    return manifest


def cmd_classify(cfg, out, seed):
    from .ends import BoundaryCurve, classify, diameter_G, k0_of, slab_of_curve

    if not cfg["curve"]:
        raise ConfigError("classify needs a curve CSV (--curve)")
    if not Path(cfg["curve"]).is_file():
        raise ConfigError(f"no such curve file {cfg['curve']}")
    model = _model(cfg)
    curve = BoundaryCurve.from_csv(cfg["curve"], model)
    kind = classify(curve, tol=cfg["tol"] * max(model.tau, model.h))
    G = diameter_G(curve)
    return {"p": kind.p, "q": kind.q, "kind": kind.kind, "slab": slab_of_curve(curve, kind).to_dict(),
            "G": G, "k0": k0_of(G, model.h), "model": model.to_dict(), "n_samples": len(curve.s)}


def _trap_one(mesh, kind, model, cfg, out, stem):
    from .mesh import write_vtk
    from .sweep import barrier_surface, trapping_report

    rep = trapping_report(mesh, kind, model, n_steps=cfg["n_steps"], rel_tol=cfg["tol"])
    d = rep.to_dict()
    d.update(width_ratio=rep.width_ratio, type=[kind.p, kind.q], model=model.to_dict())
    if cfg["vtk"]:
        names = []
        for side, fam, res in (("lower", rep.families[0], rep.lower), ("upper", rep.families[1], rep.upper)):
            name = f"{stem}_barrier_{side}.vtk"
            write_vtk(barrier_surface(fam, res.param, mesh), out / name, title=f"stalled {side} barrier")
            names.append(name)
        names.append(f"{stem}_mesh.vtk")
        write_vtk(mesh, out / names[-1], {"y": mesh.vertices[:, 1]}, title="end mesh")
        d["files"] = names
    return d


def cmd_trap(cfg, out, seed):
    from .ends import EndType, StandardEnd, standard_end_mesh

    if cfg["example"] == 0:
        model = _model(cfg)
        end = StandardEnd(EndType(cfg["p"], cfg["q"]), cfg["constant"], model)
        mesh = standard_end_mesh(end, (model.y0, cfg["y_top"]), cfg["mesh_resolution"])
        d = _trap_one(mesh, end.kind, model, cfg, out, "standard")
        edge = mesh.max_edge_length()
        return {"standard_end": end.to_dict(), "trap": d, "mesh_edge": edge,
                "width_over_edge": d["slab"]["width"] / edge}
    b = _build(cfg["example"], cfg["h"], cfg["resolution"], cfg["y_cut"])
    names = [cfg["end"]] if cfg["end"] else sorted(b.ends)
    ends, skipped = {}, []
    for name in names:
        try:
            e = b.end_mesh(name)
        except DomainError as err:
            if cfg["end"]:
                raise
            log.warning("end %s skipped: %s", name, err)
            skipped.append(name)
            continue
        ends[name] = _trap_one(e.mesh, e.kind, e.model, cfg, out, f"end_{name}")
    if not ends:
        raise DomainError(f"example {cfg['example']} has no end meshed past its cut")
    return {"example": cfg["example"], "ends": ends, "skipped": skipped}


def _smooth_total(b):
    if "smooth_total" in b.diagnostics:
        return float(b.diagnostics["smooth_total"])
    if all(p.graph for p in b.complex.patches):
        return b.complex.smooth_total_curvature()
    return None


def _cut_row(b, y):
    from .curvature import curvature_report

    q = b.quotient().mesh
    rep = curvature_report(q)
    smooth = _smooth_total(b)
    return {"y_cut": y, "chi": int(b.topology.chi), "polyhedral_total": rep.polyhedral_total,
            "gb_defect": rep.gb_defect, "smooth_total": smooth,
            "total_K": rep.polyhedral_total if smooth is None else smooth,
            "length": float(sum(t["length"] for t in rep.boundary_terms)),
            "kg": float(sum(t["kg"] for t in rep.boundary_terms))}


def _parse_provenance(path):
    for line in Path(path).read_text().splitlines():
        if not line.startswith("#"):
            break
        parts = line[1:].split()
        if parts and parts[0] == "example":
            kv = dict(p.split("=", 1) for p in parts[1:] if "=" in p)
            try:
                return int(kv["id"]), float(kv["h"]), int(kv["resolution"])
            except (KeyError, ValueError):
                return None
    return None


def cmd_verify(cfg, out, seed):
    from .curvature import TruncationSeries, curvature_report
    from .mesh import read_obj

    payload, checks = {}, {}
    expect = cfg["chi"]
    eid, h, res = cfg["example"], cfg["h"], cfg["resolution"]
    if cfg["mesh"]:
        path = Path(cfg["mesh"])
        if not path.is_file():
            raise ConfigError(f"no such mesh file {path}")
        mesh = read_obj(path)
        rep = curvature_report(mesh)
        payload["mesh"] = {"file": path.name, **rep.to_dict(), "n_vertices": mesh.n_vertices}
        checks["gb_defect"] = abs(rep.gb_defect) <= cfg["tol"]
        prov = _parse_provenance(path)
        if prov is None:
            if expect != "auto":
                checks["chi"] = rep.chi_truncated == expect
            if cfg["ycuts"]:
                log.warning("mesh carries no example provenance; truncation series skipped")
            payload["checks"] = checks
            return payload
        eid, h, res = prov
    if eid not in (1, 2, 3, 4, 5):
        raise ConfigError(f"unknown example {eid}; choose 1 to 5")
    cuts = sorted(cfg["ycuts"])
    if eid in (3, 4) or not cuts:
        if cuts:
            log.warning("example %d has no cusp truncation; y cuts ignored", eid)
        rows = [_cut_row(_build(eid, h, res), math.nan)]
    else:
        if cuts[0] <= 1:
            raise ConfigError("verify.ycuts must exceed 1")
        rows = [_cut_row(_build(eid, h, res, y), y) for y in cuts]
    chi = rows[-1]["chi"]
    target = 2 * math.pi * chi
    payload["example"] = eid
    payload["cuts"] = rows
    payload["target"] = target
    checks["gb_defect"] = checks.get("gb_defect", True) and all(abs(r["gb_defect"]) <= cfg["tol"] for r in rows)
    if expect != "auto":
        checks["chi"] = checks.get("chi", True) and chi == expect
    if len(rows) > 1:
        series = TruncationSeries(cuts, [r["total_K"] for r in rows], cfg["order"])
        payload["series"] = {**series.to_dict(), "monotone": series.monotone(),
                             "relative_error": abs(series.totals[-1] - target) / abs(target) if chi else None,
                             "extrapolated_relative_error":
                                 abs(series.extrapolated_total - target) / abs(target) if chi else None}
    with (out / "verify_series.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["y", "length", "kg", "total_K"])
        for r in rows:
            w.writerow([repr(float(r[k])) for k in ("y_cut", "length", "kg", "total_K")])
    payload["files"] = ["verify_series.csv"]
    payload["checks"] = checks
    return payload


def cmd_report(cfg, out, seed):
    if not cfg["inputs"]:
        raise ConfigError("report needs at least one input")
    own = (out / "report.json").resolve()
    found = []
    for item in cfg["inputs"]:
        p = Path(item)
        if p.is_dir():
            found += sorted(q for q in p.rglob("report.json") if q.resolve() != own)
        elif p.is_file():
            found.append(p)
        else:
            raise ConfigError(f"no such report or directory {p}")
    runs = []
    for p in found:
        try:
            env = json.loads(p.read_text())
        except ValueError as e:
            raise ConfigError(f"{p} is not JSON: {e}") from None
        if not isinstance(env, dict) or env.get("tool") != "hypermin":
            raise ConfigError(f"{p} is not a hypermin report")
        runs.append({"path": str(p), "command": env.get("command"), "status": env.get("status"),
                     "version": env.get("version"), "warnings": len(env.get("warnings", [])),
                     "payload_sha256": payload_digest(env.get("payload"))})
    counts = {}
    for r in runs:
        counts[r["status"]] = counts.get(r["status"], 0) + 1
    return {"runs": runs, "status_counts": counts}


HANDLERS = {"barrier": cmd_barrier, "solve": cmd_solve, "plateau": cmd_plateau,
            "example": cmd_example, "classify": cmd_classify, "trap": cmd_trap,
            "verify": cmd_verify, "report": cmd_report}


# --------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _list_of(kind):
    def parse(text):
        try:
            return [kind(v) for v in text.split(",") if v.strip()]
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected comma-separated {kind.__name__}s, got {text!r}")
    parse.__name__ = f"{kind.__name__} list"
    return parse


FLOATS, INTS = _list_of(float), _list_of(int)

# (flag, key, type); a type of None is a boolean switch
FLAGS = {
    "barrier": [("--lambda", "lambda", FLOATS), ("--T", "T", FLOATS), ("--t-offset", "t_offset", float),
                ("--u-range", "u_range", FLOATS), ("--resolution", "resolution", INTS)],
    "solve": [("--domain", "domain", str), ("--lam", "lam", float), ("--x-range", "x_range", FLOATS),
              ("--y-range", "y_range", FLOATS), ("--resolution", "resolution", int), ("--n", "n", int),
              ("--Lambda", "Lambda", float), ("--h", "h", float), ("--y-cut", "y_cut", float),
              ("--jitter", "jitter", float)],
    "plateau": [("--polygon", "polygon", str), ("--h", "h", float), ("--target", "target", float),
                ("--ambient", "ambient", str)],
    "example": [("--id", "id", int), ("--h", "h", float), ("--y-cut", "y_cut", float),
                ("--resolution", "resolution", int), ("--target", "target", float),
                ("--r-cut", "r_cut", float), ("--plateau-tol", "plateau_tol", float)],
    "classify": [("--curve", "curve", str), ("--tau", "tau", float), ("--h", "h", float),
                 ("--y0", "y0", float)],
    "trap": [("--example", "example", int), ("--end", "end", str), ("--p", "p", int), ("--q", "q", int),
             ("--constant", "constant", float), ("--tau", "tau", float), ("--h", "h", float),
             ("--y0", "y0", float), ("--y-top", "y_top", float), ("--mesh-resolution", "mesh_resolution", INTS),
             ("--y-cut", "y_cut", float), ("--resolution", "resolution", int), ("--n-steps", "n_steps", int),
             ("--vtk", "vtk", None)],
    "verify": [("--example", "example", int), ("--mesh", "mesh", str), ("--chi", "chi", str),
               ("--ycuts", "ycuts", FLOATS), ("--h", "h", float), ("--resolution", "resolution", int),
               ("--order", "order", float)],
    "report": [],
}


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--config", help="TOML or JSON file of {command: {key: value}} tables")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int, help="seed for mesh jitter")
    common.add_argument("--tol", type=float, help="the command's tolerance")
    parser = _Parser(prog="hypermin", description="Minimal surfaces in cusp ends: barriers, "
                     "graph solves, examples, classification, sweeps and curvature checks.")
    parser.add_argument("--version", action="version", version=f"hypermin {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        for flag, key, kind in FLAGS[name]:
            if kind is None:
                p.add_argument(flag, dest=f"opt_{key}", action="store_const", const=True, default=None)
            else:
                p.add_argument(flag, dest=f"opt_{key}", type=kind, default=None)
        if name == "report":
            p.add_argument("inputs", nargs="*", help="report.json files or directories")
    return parser


def _flag_layer(args, defaults):
    cmd = args.command
    layer = {cmd: {}, "run": {}}
    for _, key, _ in FLAGS[cmd]:
        v = getattr(args, f"opt_{key}")
        if v is not None:
            layer[cmd][key] = v
    if cmd == "report" and args.inputs:
        layer[cmd]["inputs"] = args.inputs
    if args.tol is not None:
        if "tol" not in defaults[cmd]:
            raise ConfigError(f"--tol does not apply to {cmd}")
        layer[cmd]["tol"] = args.tol
    if args.out is not None:
        layer["run"]["out"] = args.out
    if args.seed is not None:
        layer["run"]["seed"] = args.seed
    return layer


# --------------------------------------------------------------------------
# running


class _Collector(logging.Handler):
    def __init__(self):
        super().__init__(logging.WARNING)
        self.messages = []

    def emit(self, record):
        self.messages.append(f"{record.name}: {record.getMessage()}")


def _thread_limit():
    raw = os.environ.get("HYPERMIN_THREADS", "").strip()
    if not raw:
        return None
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"HYPERMIN_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"HYPERMIN_THREADS must be a positive integer, got {raw!r}")
    return n


def run(argv=None):
    """Run one command; returns the exit code, the envelope and its JSON text."""
    from threadpoolctl import threadpool_limits

    collector = _Collector()
    watched = [logging.getLogger("hypermin"), logging.getLogger("py.warnings")]
    for lg in watched:
        lg.addHandler(collector)
    logging.captureWarnings(True)
    start = time.perf_counter()
    env = {"tool": "hypermin", "version": __version__, "command": None, "config": None,
           "payload": None, "status": "ok"}
    out = None
    code = 0
    try:
        args = build_parser().parse_args(argv)
        cmd = env["command"] = args.command
        defaults = load_defaults()
        layers = [read_config_file(args.config)] if args.config else []
        layers.append(_flag_layer(args, defaults))
        cfg = merge_config(defaults, layers)
        env["config"] = {"run": cfg["run"], cmd: cfg[cmd]}
        out = Path(cfg["run"]["out"])
        try:
            out.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            out = None
            raise ConfigError(f"cannot create output directory: {e.strerror}") from None
        if not os.access(out, os.W_OK):
            bad, out = out, None
            raise ConfigError(f"output directory {bad} is not writable")
        limit = _thread_limit()
        with threadpool_limits(limits=limit):
            env["payload"] = HANDLERS[cmd](cfg[cmd], out, cfg["run"]["seed"])
        checks = (env["payload"] or {}).get("checks") if isinstance(env["payload"], dict) else None
        if checks and not all(checks.values()):
            env["status"] = "failed"
            code = 1
    except (ConfigError, DomainError) as e:
        env["status"] = "config_error" if isinstance(e, ConfigError) else "domain_error"
        env["error"] = {"type": type(e).__name__, "message": str(e)}
        code = 2
    except NumericalError as e:
        env["status"] = "numerical_error"
        env["error"] = {"type": type(e).__name__, "message": str(e), "diagnostics": e.diagnostics}
        code = 1
    except HyperminError as e:
        env["status"] = "error"
        env["error"] = {"type": type(e).__name__, "message": str(e)}
        code = 1
    except Exception as e:  # still one envelope; the traceback goes to stderr
        import traceback

        traceback.print_exc()
        env["status"] = "internal_error"
        env["error"] = {"type": type(e).__name__, "message": str(e)}
        code = 1
    finally:
        logging.captureWarnings(False)
        for lg in watched:
            lg.removeHandler(collector)
    env["warnings"] = collector.messages
    env["timing"] = {"seconds": round(time.perf_counter() - start, 3)}
    text = dumps(env)
    if out is not None:
        try:
            (out / "report.json").write_text(text)
        except OSError:
            pass
    return code, env, text


def main(argv=None):
    code, env, text = run(argv)
    sys.stdout.write(text)
    if code:
        sys.stderr.write(f"hypermin: {env['error']['message'] if 'error' in env else env['status']}\n")
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
