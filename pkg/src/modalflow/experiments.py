"""Batch protocols shared by the CLI, the scripts, and the acceptance tests."""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .climb import ClimbConfig, ClimbResult, climb_alg1, climb_alg2
from .controls import Controls
from .density import DensityModel
from .flow import ModeRegistry, assign_basin
from .sample_methods import map_ordered


@dataclass(frozen=True)
class Starts:
    points: np.ndarray
    expected: np.ndarray  # registry ids from the gradient-flow oracle
    registry: ModeRegistry
    rejected: int


def _offsets(dim: int, spacing: np.ndarray, cells: float) -> np.ndarray:
    """Axis and diagonal offsets of ``cells`` grid cells."""
    dirs = [np.array(v, dtype=float) for v in itertools.product((-1, 0, 1), repeat=dim) if any(v)]
    return np.array([cells * spacing * v for v in dirs])


def basin_with_margin(model: DensityModel, x, controls: Controls, registry: ModeRegistry,
                      margin_cells: float = 2.0) -> int | None:
    """Mode id of ``x`` when the gradient flow sends ``x`` and every point ``margin_cells``
    grid cells away (axes and diagonals) to the same mode; ``None`` otherwise."""
    mode = assign_basin(model, x, controls, registry)
    if mode is None:
        return None
    if margin_cells <= 0:
        return mode.id
    for off in _offsets(model.dim, controls.grid.spacing, margin_cells):
        y = np.asarray(x) + off
        if not controls.box.contains(y) or model.eval(y) <= controls.level_floor:
            return None
        other = assign_basin(model, y, controls, registry)
        if other is None or other.id != mode.id:
            return None
    return mode.id


def random_interior_starts(model: DensityModel, controls: Controls, n: int, seed: int,
                           min_level_rel_fmax: float = 0.05, margin_cells: float = 2.0,
                           max_draws: int | None = None) -> Starts:
    """Uniform draws over the domain kept when ``f > min_level_rel_fmax * fmax`` and the
    basin is unambiguous within ``margin_cells``; candidates are tested in draw order."""
    rng = np.random.default_rng(seed)
    box = controls.box
    lo, hi = np.array(box.lo), np.array(box.hi)
    registry = ModeRegistry(controls.merge_radius)
    pts, ids, rejected = [], [], 0
    max_draws = max_draws or 10_000 * n
    floor = min_level_rel_fmax * controls.fmax
    draws = 0
    while len(pts) < n and draws < max_draws:
        batch = lo + (hi - lo) * rng.random((max(64, 4 * n), model.dim))
        vals = model.eval_many(batch)
        for x, v in zip(batch, vals):
            draws += 1
            if v <= floor:
                continue
            mid = basin_with_margin(model, x, controls, registry, margin_cells)
            if mid is None:
                rejected += 1
                continue
            pts.append(x)
            ids.append(mid)
            if len(pts) == n:
                break
    return Starts(np.array(pts), np.array(ids, dtype=np.int64), registry, rejected)


@dataclass(frozen=True)
class AgreementSummary:
    algorithm: str
    step: float
    n_starts: int
    n_agree: int
    stop_reasons: dict
    results: tuple[ClimbResult, ...]

    @property
    def agreement(self) -> float:
        return self.n_agree / self.n_starts if self.n_starts else float("nan")

    def to_dict(self) -> dict:
        return {"algorithm": self.algorithm, "step": self.step, "n_starts": self.n_starts,
                "n_agree": self.n_agree, "agreement": self.agreement, "stop_reasons": self.stop_reasons}


def climb_agreement(model: DensityModel, controls: Controls, starts: Starts, algorithm: str, step: float,
                    seed: int = 0, workers: int | None = None) -> AgreementSummary:
    """Run one climb per start and count how often it returns the oracle mode."""
    if algorithm == "alg1":
        climb, cfg = climb_alg1, ClimbConfig(eta=step, seed=seed)
    elif algorithm == "alg2":
        climb, cfg = climb_alg2, ClimbConfig(eps=step, seed=seed)
    else:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    results = map_ordered(lambda x: climb(model, x, cfg, controls), list(starts.points), workers)
    agree, reasons = 0, {}
    for res, want in zip(results, starts.expected):
        reasons[res.stop_reason] = reasons.get(res.stop_reason, 0) + 1
        if res.returned_mode is None:
            continue
        got = starts.registry.match(res.returned_mode.location)
        agree += int(got is not None and got.id == want)
    return AgreementSummary(algorithm, float(step), len(results), agree, dict(sorted(reasons.items())),
                            tuple(results))
