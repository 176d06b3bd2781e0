"""Clustering a sample by climbing a kernel density estimate.

Every sample point is moved uphill on the estimate by one of three schemes:
the level-step climb (method 1), the spatial-step climb (method 2), or the
explicit Euler scheme that is MeanShift when its step is ``h**2``. Points are
then grouped by the mode they reach. Climbs are independent; modes are
registered afterwards in input order so that labels do not depend on
scheduling.
"""
from __future__ import annotations

import csv
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from sklearn.metrics import adjusted_rand_score
from sklearn.metrics.cluster import pair_confusion_matrix

from .climb import ClimbConfig, climb_alg1, climb_alg2, forward_euler_ms
from .controls import Controls
from .density import DensityModel, GaussianMixture, KernelDensity, kde_fit
from .errors import InputError, ModalflowError
from .flow import Mode, ModeRegistry, integrate_gamma

UNASSIGNED = -1


def worker_count(requested: int | None = None) -> int:
    """Number of worker threads: ``requested``, capped by ``MODALFLOW_THREADS`` (default 1)."""
    env = os.environ.get("MODALFLOW_THREADS", "1")
    try:
        cap = max(1, int(env))
    except ValueError as exc:
        raise InputError(f"MODALFLOW_THREADS must be an integer, got {env!r}") from exc
    return cap if requested is None else max(1, min(requested, cap))


def map_ordered(fn: Callable, items, workers: int | None = None) -> list:
    """``[fn(x) for x in items]``, optionally on a thread pool; results keep input order."""
    n = worker_count(workers)
    if n == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))


@dataclass(frozen=True)
class LabeledSample:
    """Sample points with the id of the mode each one reached, ``-1`` when unassigned."""

    points: np.ndarray
    labels: np.ndarray
    modes: tuple[Mode, ...]

    @property
    def n_clusters(self) -> int:
        return len(np.unique(self.labels[self.labels >= 0]))

    @property
    def n_unassigned(self) -> int:
        return int(np.sum(self.labels < 0))

    def to_csv(self, path) -> None:
        d = self.points.shape[1]
        levels = {m.id: m.level for m in self.modes}
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([f"coord_{i}" for i in range(d)] + ["label", "mode_level"])
            for p, lab in zip(self.points, self.labels):
                lv = repr(float(levels[int(lab)])) if lab >= 0 else ""
                w.writerow([repr(float(v)) for v in p] + [int(lab), lv])


@dataclass(frozen=True)
class AgreementReport:
    ari: float
    pairwise_agreement: float
    n_clusters_a: int
    n_clusters_b: int
    n_compared: int
    n_excluded: int

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass(frozen=True)
class MethodConfig:
    """Settings shared by the sample-level methods.

    ``None`` step sizes take the defaults of each method: ``eta = 1e-2 * fmax``
    of the estimate, ``eps = 1e-2 * diameter`` of its domain, and ``h**2`` for
    MeanShift. ``truncate`` limits kernel sums to ``truncate * h``.
    """

    bandwidth: float | None = None
    eta: float | None = None
    eps: float | None = None
    truncate: float | None = None
    seed: int = 0
    workers: int | None = None
    control_overrides: dict = field(default_factory=dict)


def sample_mixture(mixture: GaussianMixture, n: int, seed: int) -> np.ndarray:
    """``n`` independent draws: a component by weight, then a normal via the covariance's Cholesky factor."""
    if int(n) != n or n < 1:
        raise InputError(f"n must be a positive integer, got {n}")
    rng = np.random.default_rng(seed)
    comp = rng.choice(len(mixture.weights), size=int(n), p=mixture.weights)
    z = rng.standard_normal((int(n), mixture.dim))
    chol = np.linalg.cholesky(mixture.covs)
    return mixture.means[comp] + np.einsum("nij,nj->ni", chol[comp], z)


def _group(points, found, radius) -> LabeledSample:
    """Register terminal locations in input order; ``None`` entries are unassigned."""
    registry = ModeRegistry(radius)
    labels = np.full(len(points), UNASSIGNED, dtype=np.int64)
    for i, hit in enumerate(found):
        if hit is not None:
            labels[i] = registry.register(hit[0], hit[1]).id
    return LabeledSample(np.array(points, dtype=float), labels, tuple(registry.modes))


def _prepare(sample, config: MethodConfig) -> tuple[np.ndarray, KernelDensity, Controls]:
    pts = np.atleast_2d(np.asarray(sample, dtype=float))
    if pts.size == 0:
        raise InputError("sample is empty")
    kde = kde_fit(pts, config.bandwidth, truncate=config.truncate)
    return pts, kde, Controls.for_model(kde, **config.control_overrides)


def _run(pts, climb_one: Callable, controls: Controls, workers) -> LabeledSample:
    def one(p):
        try:
            return climb_one(p)
        except ModalflowError:
            return None

    return _group(pts, map_ordered(one, list(pts), workers), controls.merge_radius)


def method1(sample, config: MethodConfig = MethodConfig()) -> LabeledSample:
    """Level-step climb on the kernel estimate from every sample point, grouped by returned mode."""
    pts, kde, controls = _prepare(sample, config)
    cfg = ClimbConfig(eta=config.eta or 1e-2 * controls.fmax, seed=config.seed)

    def one(p):
        res = climb_alg1(kde, p, cfg, controls)
        return None if res.returned_mode is None else (res.returned_mode.location, res.returned_mode.level)

    return _run(pts, one, controls, config.workers)


def method2(sample, config: MethodConfig = MethodConfig()) -> LabeledSample:
    """Spatial-step climb on the kernel estimate from every sample point, grouped by fixed point."""
    pts, kde, controls = _prepare(sample, config)
    cfg = ClimbConfig(eps=config.eps or 1e-2 * controls.diameter, seed=config.seed)

    def one(p):
        res = climb_alg2(kde, p, cfg, controls)
        return None if res.returned_mode is None else (res.returned_mode.location, res.returned_mode.level)

    return _run(pts, one, controls, config.workers)


def meanshift_cluster(sample, config: MethodConfig = MethodConfig()) -> LabeledSample:
    """Explicit Euler ascent of ``log`` of the kernel estimate; with ``eps = h**2`` each step is a MeanShift step."""
    pts, kde, controls = _prepare(sample, config)
    eps = config.eps or kde.bandwidth ** 2

    def one(p):
        term = forward_euler_ms(kde, p, eps, controls).terminal
        return (term.point, kde.eval(term.point)) if term.kind == "mode" else None

    return _run(pts, one, controls, config.workers)


def basin_labels(model: DensityModel, points, controls: Controls, workers: int | None = None) -> LabeledSample:
    """Label points by the mode their gradient line reaches on ``model``."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))

    def one(p):
        term = integrate_gamma(model, p, controls).terminal
        return (term.point, model.eval(term.point)) if term.kind == "mode" else None

    return _run(pts, one, controls, workers)


def score_agreement(a: LabeledSample, b: LabeledSample) -> AgreementReport:
    """Adjusted Rand index and fraction of point pairs on which two labelings agree.

    Points unassigned in either labeling are excluded.
    """
    if a.points.shape != b.points.shape or not np.array_equal(a.points, b.points):
        raise InputError("labelings are over different point sets")
    mask = (a.labels >= 0) & (b.labels >= 0)
    la, lb = a.labels[mask], b.labels[mask]
    if len(la) < 2:
        raise InputError("fewer than two points are assigned in both labelings")
    ari = float(adjusted_rand_score(la, lb))
    pairs = pair_confusion_matrix(la, lb)
    agree = float((pairs[0, 0] + pairs[1, 1]) / pairs.sum())
    return AgreementReport(ari=ari, pairwise_agreement=agree, n_clusters_a=len(np.unique(la)),
                           n_clusters_b=len(np.unique(lb)), n_compared=int(mask.sum()),
                           n_excluded=int((~mask).sum()))
