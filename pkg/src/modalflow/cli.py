"""Command-line front end: ``modalflow flow|climb|tree|rates|cluster --config FILE --out DIR [--seed N]``.

Exit codes: 0 success, 1 runtime failure, 2 configuration error.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .climb import ClimbConfig
from .clustertree import build_cluster_tree, leaf_clusters
from .controls import Controls
from .density import DensityModel, GaussianMixture, density_from_spec, load_density, read_points_csv, write_points_csv
from .errors import InputError, ModalflowError
from .experiments import climb_agreement, random_interior_starts
from .fixtures import get_fixture
from .flow import ModeRegistry, assign_basin, integrate_gamma, integrate_xi, integrate_zeta
from .grid import Box, Grid
from .metrics import rate_experiment_alg1, rate_experiment_alg2
from .sample_methods import (MethodConfig, basin_labels, meanshift_cluster, method1, method2, sample_mixture,
                             score_agreement)


class ConfigError(InputError):
    """Invalid run configuration (exit code 2)."""


_CONTROL_KEYS = {f.name for f in dataclasses.fields(Controls)} - {"bounds", "fmax", "grid", "extra"}


@dataclass(frozen=True)
class CommonConfig:
    """Keys accepted by every command."""

    density: object = None  # path, {"fixture": name}, or an inline density spec
    grid: dict | None = None  # {"box": [[lo, hi], ...], "cells_per_axis": n}
    seed: int = 0
    controls: dict = field(default_factory=dict)
    bounds_points: int = 201
    workers: int | None = None


@dataclass(frozen=True)
class FlowConfig(CommonConfig):
    starts: object = field(default_factory=lambda: {"grid": {"per_axis": 5}})
    flows: list = field(default_factory=lambda: ["gamma"])
    zeta_fraction: float = 0.9


@dataclass(frozen=True)
class ClimbRunConfig(CommonConfig):
    algorithm: str = "both"
    eta: float | None = None
    eta_rel_fmax: float = 1e-3
    eps: float | None = None
    eps_rel_diam: float = 1e-2
    starts: object = field(default_factory=lambda: {"random": {"count": 50}})


@dataclass(frozen=True)
class TreeConfig(CommonConfig):
    level_count: int = 256


@dataclass(frozen=True)
class RatesConfig(CommonConfig):
    algorithm: str = "alg1"
    start: list | None = None
    steps: list | None = None


@dataclass(frozen=True)
class ClusterConfig(CommonConfig):
    n: int = 1000
    sample_file: str | None = None
    methods: list = field(default_factory=lambda: ["method1", "method2", "meanshift"])
    bandwidth: float | None = None
    eta: float | None = None
    eps: float | None = None
    meanshift_eps: float | None = None
    truncate: float | None = None


CONFIGS = {"flow": FlowConfig, "climb": ClimbRunConfig, "tree": TreeConfig, "rates": RatesConfig,
           "cluster": ClusterConfig}


def parse_config(command: str, raw: dict, seed: int | None = None):
    cls = CONFIGS[command]
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(raw) - names)
    if unknown:
        raise ConfigError(f"unknown config keys for '{command}': {unknown}")
    if "density" not in raw:
        raise ConfigError("config needs a 'density' entry")
    cfg = cls(**raw)
    if seed is not None:
        cfg = dataclasses.replace(cfg, seed=seed)
    unknown = sorted(set(cfg.controls) - _CONTROL_KEYS)
    if unknown:
        raise ConfigError(f"unknown controls keys: {unknown}")
    if not isinstance(cfg.seed, int) or cfg.seed < 0:
        raise ConfigError("seed must be a non-negative integer")
    return cfg


def _positive(name, v, allow_none=True):
    if v is None and allow_none:
        return
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v) or v <= 0:
        raise ConfigError(f"{name} must be a positive number, got {v!r}")


def _validate(command: str, cfg) -> None:
    if cfg.workers is not None and (not isinstance(cfg.workers, int) or cfg.workers < 1):
        raise ConfigError("workers must be a positive integer")
    if command == "flow":
        bad = sorted(set(cfg.flows) - {"gamma", "xi", "zeta"})
        if bad or not cfg.flows:
            raise ConfigError(f"flows must be a non-empty subset of gamma, xi, zeta; got {cfg.flows}")
        if not 0 < cfg.zeta_fraction < 1:
            raise ConfigError("zeta_fraction must be in (0, 1)")
    elif command == "climb":
        if cfg.algorithm not in ("alg1", "alg2", "both"):
            raise ConfigError("algorithm must be alg1, alg2 or both")
        for name in ("eta", "eps", "eta_rel_fmax", "eps_rel_diam"):
            _positive(name, getattr(cfg, name))
    elif command == "tree":
        if not isinstance(cfg.level_count, int) or cfg.level_count < 8:
            raise ConfigError("level_count must be an integer >= 8")
    elif command == "rates":
        if cfg.algorithm not in ("alg1", "alg2"):
            raise ConfigError("algorithm must be alg1 or alg2")
        if cfg.start is None:
            raise ConfigError("rates needs a 'start' point")
        steps = cfg.steps
        if not isinstance(steps, list) or len(steps) < 4:
            raise ConfigError("rates needs 'steps': at least 4 step sizes")
        for s in steps:
            _positive("step", s, allow_none=False)
        if any(b >= a for a, b in zip(steps, steps[1:])):
            raise ConfigError("steps must be strictly decreasing")
    elif command == "cluster":
        if cfg.sample_file is None and (isinstance(cfg.n, bool) or not isinstance(cfg.n, int) or cfg.n < 1):
            raise ConfigError(f"n must be a positive integer, got {cfg.n!r}")
        bad = sorted(set(cfg.methods) - {"method1", "method2", "meanshift"})
        if bad or not cfg.methods:
            raise ConfigError(f"unknown methods: {bad}")
        for name in ("bandwidth", "eta", "eps", "meanshift_eps", "truncate"):
            _positive(name, getattr(cfg, name))


@dataclass
class Setup:
    model: DensityModel
    box: Box
    grid: Grid
    base_dir: Path
    _controls: Controls | None = None
    overrides: dict = field(default_factory=dict)
    bounds_points: int = 201

    @property
    def controls(self) -> Controls:
        if self._controls is None:
            self._controls = Controls.for_model(self.model, grid=self.grid, bounds_points=self.bounds_points,
                                                **self.overrides)
        return self._controls


def _resolve_density(cfg, base_dir: Path) -> tuple[DensityModel, Box | None]:
    spec = cfg.density
    if isinstance(spec, str):
        return load_density(base_dir / spec), None
    if isinstance(spec, dict) and set(spec) == {"fixture"}:
        fx = get_fixture(spec["fixture"])
        return fx.model, fx.box
    if isinstance(spec, dict):
        return density_from_spec(spec, base_dir), None
    raise ConfigError("density must be a file path, {'fixture': name}, or an inline spec")


def build_setup(cfg, base_dir: Path) -> Setup:
    model, box = _resolve_density(cfg, base_dir)
    if cfg.grid is not None:
        if not isinstance(cfg.grid, dict):
            raise ConfigError("grid must be an object")
        grid = Grid.from_dict(cfg.grid)
        box = grid.box
    else:
        box = box or model.default_box()
        grid = Grid.default_for(box)
    if grid.dim != model.dim:
        raise ConfigError("grid dimension does not match the density")
    return Setup(model, box, grid, base_dir, overrides=dict(cfg.controls), bounds_points=cfg.bounds_points)


def _point(p, dim, what="point"):
    arr = np.atleast_1d(np.asarray(p, dtype=float))
    if arr.shape != (dim,) or not np.all(np.isfinite(arr)):
        raise ConfigError(f"{what} {p!r} is not a finite point of dimension {dim}")
    return arr


def _starts(spec, setup: Setup, seed: int) -> np.ndarray:
    dim = setup.model.dim
    if isinstance(spec, list):
        if not spec:
            raise ConfigError("starts list is empty")
        return np.array([_point(p, dim, "start") for p in spec])
    if not isinstance(spec, dict) or len(spec) != 1:
        raise ConfigError("starts must be a list of points or one of {ring|grid|random: {...}}")
    (kind, opts), = spec.items()
    c = setup.controls
    if kind == "ring":
        unknown = set(opts) - {"center", "radius", "count"}
        if unknown:
            raise ConfigError(f"unknown ring keys: {sorted(unknown)}")
        if dim != 2:
            raise ConfigError("ring starts need a 2D density")
        center = _point(opts.get("center", [0.0, 0.0]), dim, "ring center")
        r, n = opts.get("radius", 1.0), opts.get("count", 8)
        ang = 2 * np.pi * np.arange(n) / n
        return center + r * np.column_stack([np.cos(ang), np.sin(ang)])
    if kind == "grid":
        unknown = set(opts) - {"per_axis", "min_level_rel_fmax"}
        if unknown:
            raise ConfigError(f"unknown grid-start keys: {sorted(unknown)}")
        k = opts.get("per_axis", 5)
        axes = [np.linspace(lo, hi, k + 2)[1:-1] for lo, hi in zip(setup.box.lo, setup.box.hi)]
        pts = np.stack([m.ravel() for m in np.meshgrid(*axes, indexing="ij")], axis=1)
        keep = setup.model.eval_many(pts) > opts.get("min_level_rel_fmax", 1e-3) * c.fmax
        return pts[keep]
    if kind == "random":
        unknown = set(opts) - {"count", "min_level_rel_fmax", "margin_cells"}
        if unknown:
            raise ConfigError(f"unknown random-start keys: {sorted(unknown)}")
        return random_interior_starts(setup.model, c, opts.get("count", 50), seed,
                                      opts.get("min_level_rel_fmax", 0.05), opts.get("margin_cells", 2.0)).points
    raise ConfigError(f"unknown starts kind {kind!r}")


def _dump(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(f"not JSON serializable: {type(o)}")


def cmd_flow(cfg: FlowConfig, setup: Setup, out: Path) -> dict:
    c = setup.controls
    starts = _starts(cfg.starts, setup, cfg.seed)
    tdir = out / "trajectories"
    tdir.mkdir(exist_ok=True)
    registry = ModeRegistry(c.merge_radius)
    rows = []
    for i, x in enumerate(starts):
        row = {"index": i, "start": x}
        for name in cfg.flows:
            if name == "zeta":
                term = integrate_gamma(setup.model, x, c).terminal
                gap = setup.model.eval(term.point) - setup.model.eval(x)
                traj = integrate_zeta(setup.model, x, cfg.zeta_fraction * max(gap, 0.0), c)
            else:
                traj = (integrate_gamma if name == "gamma" else integrate_xi)(setup.model, x, c)
            traj.to_csv(tdir / f"{name}_{i:04d}.csv")
            entry = {"kind": traj.terminal.kind, "terminal": traj.terminal.point, "points": len(traj)}
            if name != "zeta" and traj.terminal.kind == "mode":
                entry["mode_id"] = registry.register(traj.terminal.point, traj.levels[-1]).id
            row[name] = entry
        rows.append(row)
    modes = [{"id": m.id, "location": m.location, "level": m.level} for m in registry.modes]
    summary = {"n_starts": len(starts), "flows": cfg.flows, "modes": modes, "trajectories": rows}
    print(f"flow: {len(starts)} starts, {len(modes)} modes")
    return summary


def cmd_climb(cfg: ClimbRunConfig, setup: Setup, out: Path) -> dict:
    c = setup.controls
    if isinstance(cfg.starts, dict) and "random" in cfg.starts:
        opts = cfg.starts["random"]
        unknown = set(opts) - {"count", "min_level_rel_fmax", "margin_cells"}
        if unknown:
            raise ConfigError(f"unknown random-start keys: {sorted(unknown)}")
        starts = random_interior_starts(setup.model, c, opts.get("count", 50), cfg.seed,
                                        opts.get("min_level_rel_fmax", 0.05), opts.get("margin_cells", 2.0))
    else:
        from .experiments import Starts

        pts = _starts(cfg.starts, setup, cfg.seed)
        registry = ModeRegistry(c.merge_radius)
        ids = []
        for p in pts:
            m = assign_basin(setup.model, p, c, registry)
            ids.append(-1 if m is None else m.id)
        starts = Starts(pts, np.array(ids), registry, 0)
    algs = ["alg1", "alg2"] if cfg.algorithm == "both" else [cfg.algorithm]
    cdir = out / "climbs"
    cdir.mkdir(exist_ok=True)
    summary = {"n_starts": len(starts.points), "rejected_candidates": starts.rejected, "results": {}}
    for alg in algs:
        step = (cfg.eta or cfg.eta_rel_fmax * c.fmax) if alg == "alg1" else (cfg.eps or cfg.eps_rel_diam * c.diameter)
        res = climb_agreement(setup.model, c, starts, alg, step, seed=cfg.seed, workers=cfg.workers)
        for i, r in enumerate(res.results):
            r.to_csv(cdir / f"{alg}_{i:04d}.csv")
        summary["results"][alg] = res.to_dict()
        print(f"climb {alg}: step {step:.6g}, agreement {res.agreement:.4f} over {res.n_starts} starts")
    return summary


def cmd_tree(cfg: TreeConfig, setup: Setup, out: Path) -> dict:
    c = setup.controls
    tree = build_cluster_tree(setup.model, c, cfg.level_count)
    tree.to_json(out / "tree.json")
    text = tree.render()
    (out / "tree.txt").write_text(text)
    with (out / "profile.csv").open("w") as fh:
        fh.write("level,component_count\n")
        for t in tree.levels[::-1]:
            fh.write(f"{float(t)!r},{tree.component_count(float(t))}\n")
    leaves = leaf_clusters(tree)
    print(text, end="")
    return {"n_nodes": len(tree.nodes), "n_leaves": len(leaves),
            "leaf_modes": [{"location": n.mode.location, "level": n.mode.level} for n in leaves],
            "merge_intervals": [n.merge_interval for n in tree.nodes if n.merge_interval is not None]}


def cmd_rates(cfg: RatesConfig, setup: Setup, out: Path) -> dict:
    c = setup.controls
    x = _point(cfg.start, setup.model.dim, "start")
    run = rate_experiment_alg1 if cfg.algorithm == "alg1" else rate_experiment_alg2
    rep = run(setup.model, x, cfg.steps, c, ClimbConfig(seed=cfg.seed))
    rep.to_csv(out / f"rates_{cfg.algorithm}.csv")
    print(f"rates {cfg.algorithm}: slope {rep.slope:.4f}, two-point slope {rep.two_point_slope:.4f}"
          + (" (floor saturated)" if rep.floor_saturated else ""))
    return {"algorithm": cfg.algorithm, "steps": rep.steps, "distances": rep.distances, "slope": rep.slope,
            "intercept": rep.intercept, "two_point_slope": rep.two_point_slope,
            "floor_saturated": rep.floor_saturated, "iterations": rep.iterations}


def cmd_cluster(cfg: ClusterConfig, setup: Setup, out: Path) -> dict:
    truth_model = setup.model if isinstance(setup.model, GaussianMixture) else None
    if cfg.sample_file is not None:
        pts = read_points_csv(setup.base_dir / cfg.sample_file)
    elif truth_model is None:
        raise ConfigError("cluster needs a mixture density to sample from, or a sample_file")
    else:
        pts = sample_mixture(truth_model, cfg.n, cfg.seed)
    if pts.shape[1] != setup.model.dim:
        raise ConfigError("sample dimension does not match the density")
    write_points_csv(out / "sample.csv", pts)
    base = MethodConfig(bandwidth=cfg.bandwidth, eta=cfg.eta, eps=cfg.eps, truncate=cfg.truncate,
                        seed=cfg.seed, workers=cfg.workers)
    runners = {"method1": lambda: method1(pts, base),
               "method2": lambda: method2(pts, base),
               "meanshift": lambda: meanshift_cluster(pts, dataclasses.replace(base, eps=cfg.meanshift_eps))}
    labeled = {}
    report = {"n": len(pts), "methods": {}, "pairwise": {}}
    truth = None
    if truth_model is not None:
        truth = basin_labels(truth_model, pts, setup.controls, cfg.workers)
        truth.to_csv(out / "labels_truth.csv")
    for name in cfg.methods:
        lab = runners[name]()
        lab.to_csv(out / f"labels_{name}.csv")
        labeled[name] = lab
        entry = {"n_clusters": lab.n_clusters, "n_unassigned": lab.n_unassigned}
        if truth is not None:
            agr = score_agreement(lab, truth)
            entry.update(ari_vs_truth=agr.ari, pairwise_vs_truth=agr.pairwise_agreement)
        report["methods"][name] = entry
        print(f"cluster {name}: {lab.n_clusters} clusters"
              + (f", ARI vs truth {entry['ari_vs_truth']:.4f}" if truth is not None else ""))
    names = list(labeled)
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            agr = score_agreement(labeled[a], labeled[b])
            report["pairwise"][f"{a}|{b}"] = {"ari": agr.ari, "pairwise_agreement": agr.pairwise_agreement}
    return report


COMMANDS = {"flow": cmd_flow, "climb": cmd_climb, "tree": cmd_tree, "rates": cmd_rates, "cluster": cmd_cluster}


def _defaults_text() -> str:
    lines = ["config keys and defaults:"]
    for name, cls in CONFIGS.items():
        parts = []
        for f in dataclasses.fields(cls):
            if f.default is not dataclasses.MISSING:
                v = f.default
            elif f.default_factory is not dataclasses.MISSING:
                v = f.default_factory()
            else:
                v = None
            parts.append(f"{f.name}={json.dumps(v)}")
        lines.append(f"  {name}: " + ", ".join(parts))
    lines.append("  controls keys: " + ", ".join(sorted(_CONTROL_KEYS)))
    lines.append("environment: MODALFLOW_THREADS caps worker threads (default 1)")
    return "\n".join(lines)


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="modalflow", description=__doc__.splitlines()[0],
                                epilog=_defaults_text(), formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--out", required=True, help="output directory (created if missing)")
    p.add_argument("--seed", type=int, default=None, help="master seed, overrides the config")
    return p


def main(argv=None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and 2
    cfg_path = Path(args.config)
    try:
        if not cfg_path.exists():
            raise ConfigError(f"config file not found: {cfg_path}")
        try:
            raw = json.loads(cfg_path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {cfg_path} is not valid JSON: {exc}") from exc
        try:
            cfg = parse_config(args.command, raw, args.seed)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc
        _validate(args.command, cfg)
        setup = build_setup(cfg, cfg_path.parent)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
    except (InputError, ValueError, KeyError, TypeError) as exc:
        print(f"modalflow: configuration error: {exc}", file=sys.stderr)
        return 2
    try:
        summary = COMMANDS[args.command](cfg, setup, out)
        _dump(out / "summary.json", {"command": args.command, "seed": cfg.seed, **summary})
    except ConfigError as exc:
        print(f"modalflow: configuration error: {exc}", file=sys.stderr)
        return 2
    except (ModalflowError, ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"modalflow: run failed: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
