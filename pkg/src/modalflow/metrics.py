"""Polylines, Hausdorff distance, and convergence-rate experiments.

The directed distance ``sup_{a in A} dist(a, B)`` between polygonal sets is
computed by branch and bound over the segments of ``A``. Segments whose upper
bound cannot beat the best value seen are dropped, the rest are halved.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .climb import ClimbConfig, ClimbResult, climb_alg1, climb_alg2
from .controls import Controls
from .density import DensityModel
from .errors import InputError, RateExperimentError
from .flow import ModeRegistry, assign_basin, integrate_gamma


@dataclass(frozen=True)
class Polyline:
    """Closed polygonal set through ``vertices`` in order; a single vertex is a point."""

    vertices: np.ndarray

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.vertices, dtype=float))
        if v.ndim != 2 or v.shape[0] < 1:
            raise InputError("a polyline needs at least one vertex")
        if not np.all(np.isfinite(v)):
            raise InputError("polyline vertices must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "vertices", v)

    def __len__(self):
        return len(self.vertices)

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    @property
    def length(self) -> float:
        return float(np.linalg.norm(np.diff(self.vertices, axis=0), axis=1).sum())

    def segments(self) -> tuple[np.ndarray, np.ndarray]:
        """Segment start points and direction vectors; a single vertex gives one degenerate segment."""
        v = self.vertices
        if len(v) == 1:
            return v, np.zeros_like(v)
        return v[:-1], np.diff(v, axis=0)

    def distance_matrix(self, points) -> np.ndarray:
        """Distances from each row of ``points`` to each segment, shape ``(len(points), n_segments)``."""
        p = np.atleast_2d(np.asarray(points, dtype=float))
        starts, dirs = self.segments()
        dd = np.einsum("ij,ij->i", dirs, dirs)
        safe = np.where(dd > 0, dd, 1.0)
        rel = p[:, None, :] - starts[None, :, :]
        s = np.clip(np.einsum("ijk,jk->ij", rel, dirs) / safe, 0.0, 1.0)
        diff = rel - s[:, :, None] * dirs[None, :, :]
        return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))

    def distance_to(self, points) -> np.ndarray:
        """Euclidean distance from each row of ``points`` to this polygonal set."""
        p = np.atleast_2d(np.asarray(points, dtype=float))
        step = max(1, _CHUNK // max(1, len(self.vertices)))
        return np.concatenate([self.distance_matrix(p[i:i + step]).min(axis=1)
                               for i in range(0, len(p), step)]) if len(p) else np.empty(0)


_CHUNK = 2_000_000


def _segment_bounds(starts, dirs, b: Polyline):
    """Per segment of ``a``: best known value of ``dist(., b)`` at its endpoints and an upper bound on its sup.

    The distance to one segment of ``b`` is convex along a line, so its sup over
    a segment of ``a`` is attained at an endpoint; the minimum over segments of
    ``b`` of those endpoint maxima bounds ``dist(., b)`` from above.
    """
    lows, ups = [], []
    step = max(1, _CHUNK // max(1, len(b.vertices)))
    for i in range(0, len(starts), step):
        d0 = b.distance_matrix(starts[i:i + step])
        d1 = b.distance_matrix(starts[i:i + step] + dirs[i:i + step])
        lows.append(np.maximum(d0.min(axis=1), d1.min(axis=1)))
        ups.append(np.maximum(d0, d1).min(axis=1))
    return np.concatenate(lows), np.concatenate(ups)


def directed_hausdorff(a: Polyline, b: Polyline, tol: float = 1e-10, max_rounds: int = 200) -> float:
    """``sup_{x in a} dist(x, b)`` to within ``tol``, by bisecting the segments of ``a``."""
    starts, dirs = a.segments()
    low, up = _segment_bounds(starts, dirs, b)
    best = float(low.max())
    for _ in range(max_rounds):
        keep = up > best + tol
        if not keep.any():
            return best
        half = 0.5 * dirs[keep]
        starts = np.concatenate([starts[keep], starts[keep] + half])
        dirs = np.concatenate([half, half])
        low, up = _segment_bounds(starts, dirs, b)
        best = max(best, float(low.max()))
    return max(best, float(up.max()))  # never underestimate


def hausdorff(a: Polyline, b: Polyline, tol: float = 1e-10) -> float:
    """Symmetric Hausdorff distance between two polygonal sets, to within ``tol``."""
    if a.dim != b.dim:
        raise InputError("polylines have different dimensions")
    return max(directed_hausdorff(a, b, tol), directed_hausdorff(b, a, tol))


@dataclass(frozen=True)
class RateReport:
    """Hausdorff distances between climbing polylines and the gradient line, per step size."""

    algorithm: str
    steps: np.ndarray
    distances: np.ndarray
    slope: float
    intercept: float
    two_point_slope: float
    floor_saturated: bool
    iterations: np.ndarray = field(default_factory=lambda: np.array([]), compare=False)

    def to_csv(self, path) -> None:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["step", "hausdorff_distance"])
            for s, dist in zip(self.steps, self.distances):
                w.writerow([repr(float(s)), repr(float(dist))])
        side = {"algorithm": self.algorithm, "slope": self.slope, "intercept": self.intercept,
                "two_point_slope": self.two_point_slope, "floor_saturated": self.floor_saturated}
        path.with_suffix(".json").write_text(json.dumps(side, indent=2, sort_keys=True) + "\n")


FLOOR = 1e-9


def fit_loglog(steps, distances) -> tuple[float, float, float]:
    """OLS slope and intercept of ``log(distance)`` on ``log(step)``, and the slope through the two smallest steps."""
    x = np.log(np.asarray(steps, dtype=float))
    y = np.log(np.maximum(np.asarray(distances, dtype=float), 1e-300))
    slope, intercept = np.polyfit(x, y, 1)
    order = np.argsort(x)
    i, j = order[0], order[1]
    two = (y[j] - y[i]) / (x[j] - x[i])
    return float(slope), float(intercept), float(two)


def reference_line(model: DensityModel, x, controls: Controls) -> Polyline:
    """Gradient line from ``x`` to its mode at integrator tolerance 1e-10 and fine spacing."""
    traj = integrate_gamma(model, x, controls, tol=1e-10, max_step=1e-4 * controls.diameter)
    if traj.terminal.kind != "mode":
        raise RateExperimentError(f"reference gradient line from {np.asarray(x).tolist()} ended as "
                                  f"{traj.terminal.kind}")
    return Polyline(traj.points)


def _check_steps(steps):
    steps = np.asarray(steps, dtype=float)
    if steps.ndim != 1 or len(steps) < 4:
        raise InputError("a rate experiment needs at least 4 step sizes")
    if not np.all(steps > 0) or not np.all(np.diff(steps) < 0):
        raise InputError("step sizes must be positive and strictly decreasing")
    return steps


def _rate_experiment(name, climb, key, model, x, steps, controls, config: ClimbConfig | None):
    steps = _check_steps(steps)
    x = model._check(x)
    ref = reference_line(model, x, controls)
    target = ref.vertices[-1]
    registry = ModeRegistry(controls.merge_radius)
    expected = assign_basin(model, x, controls, registry)
    dists, iters = [], []
    base = config or ClimbConfig()
    for s in steps:
        cfg = ClimbConfig(**{**base.__dict__, "eta": None, "eps": None, key: float(s)})
        res: ClimbResult = climb(model, x, cfg, controls, registry)
        if res.returned_mode is None or res.returned_mode.id != expected.id:
            got = None if res.returned_mode is None else res.returned_mode.location.tolist()
            raise RateExperimentError(
                f"{name} with step {s:g} returned {got} (stop: {res.stop_reason}); "
                f"the gradient line from x ends at {target.tolist()}")
        dists.append(hausdorff(res.polyline, ref))
        iters.append(res.iterations)
    dists = np.array(dists)
    slope, intercept, two = fit_loglog(steps, dists)
    return RateReport(name, steps, dists, slope, intercept, two, bool(np.any(dists <= FLOOR)), np.array(iters))


def rate_experiment_alg1(model: DensityModel, x, eta_sequence, controls: Controls,
                         config: ClimbConfig | None = None) -> RateReport:
    """Hausdorff distance between the level-step polyline ``q_0, ..., q_K`` and the gradient
    line from ``x`` to its mode, for each ``eta``, with a log-log slope fit."""
    return _rate_experiment("alg1", climb_alg1, "eta", model, x, eta_sequence, controls, config)


def rate_experiment_alg2(model: DensityModel, x, eps_sequence, controls: Controls,
                         config: ClimbConfig | None = None) -> RateReport:
    """As :func:`rate_experiment_alg1` for the spatial-step climb; its polyline ends at the mode."""
    return _rate_experiment("alg2", climb_alg2, "eps", model, x, eps_sequence, controls, config)
