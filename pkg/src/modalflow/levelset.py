"""Metric projection onto level sets and connectivity of upper level sets.

Connectivity is decided on a regular cell grid: a cell belongs to the upper
level set ``{f >= t}`` when ``f`` at its center is at least ``t``, and two
member cells are connected when they share a face. This is exact for generic
levels as long as the grid resolves the gaps between clusters.
"""
from __future__ import annotations

import csv
import threading
import weakref
from collections import OrderedDict
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from .controls import Controls
from .density import DensityModel
from .errors import ArgmaxFailed, GridTooSmall, InputError, ProjectionFailed
from .flow import integrate_gamma
from .grid import Grid

_values_cache: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()
_label_cache: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()
_cache_lock = threading.Lock()
_LABEL_CACHE_SIZE = 64


def grid_values(model: DensityModel, grid: Grid) -> np.ndarray:
    """Density at every cell center, shape ``grid.shape``. Cached per (model, grid)."""
    with _cache_lock:
        per_model = _values_cache.setdefault(model, {})
        vals = per_model.get(grid)
    if vals is None:
        vals = model.eval_many(grid.centers).reshape(grid.shape)
        vals.setflags(write=False)
        with _cache_lock:
            per_model[grid] = vals
    return vals


@dataclass(frozen=True)
class ComponentLabeling:
    """Face-adjacency components of ``{f >= t}`` on ``grid``; ``labels`` is -1 outside."""

    grid: Grid
    t: float
    labels: np.ndarray
    n_components: int

    def cells(self, label: int) -> np.ndarray:
        """Flat indices of the cells carrying ``label``."""
        return np.flatnonzero(self.labels.ravel() == label)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels[self.labels >= 0].ravel(), minlength=self.n_components)

    def label_at(self, x) -> int | None:
        """Label of the cell containing ``x``.

        When that cell is outside the level set (``x`` close to the boundary),
        the nearest labeled cell among its face and corner neighbors is used.
        """
        idx = self.grid.cell_of(x)
        if idx is None:
            raise InputError(f"point {np.asarray(x).tolist()} is outside the grid")
        lab = int(self.labels[idx])
        if lab >= 0:
            return lab
        best, best_d = None, np.inf
        x = np.asarray(x, dtype=float)
        lo, w = np.array(self.grid.box.lo), self.grid.spacing
        for off in np.ndindex(*(3,) * self.grid.dim):
            j = tuple(i + o - 1 for i, o in zip(idx, off))
            if any(k < 0 or k >= self.grid.cells_per_axis for k in j):
                continue
            lj = int(self.labels[j])
            if lj < 0:
                continue
            d = float(np.linalg.norm(lo + (np.array(j) + 0.5) * w - x))
            if d < best_d:
                best, best_d = lj, d
        return best

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([f"cell_index_{i}" for i in range(self.grid.dim)] + ["label"])
            for idx in zip(*np.nonzero(self.labels >= 0)):
                w.writerow([int(i) for i in idx] + [int(self.labels[idx])])


def label_components(model: DensityModel, t: float, grid: Grid) -> ComponentLabeling:
    """Label the connected components of ``{f >= t}`` on ``grid``.

    Raises :class:`GridTooSmall` when a boundary cell lies in the level set.
    """
    if grid.dim != model.dim:
        raise InputError("grid dimension does not match model")
    if grid.dim > 3:
        raise InputError(f"grid connectivity supports d <= 3, got d = {grid.dim}")
    key = (grid, float(t))
    with _cache_lock:
        cache = _label_cache.setdefault(model, OrderedDict())
        hit = cache.get(key)
        if hit is not None:
            cache.move_to_end(key)
            return hit
    vals = grid_values(model, grid)
    mask = vals >= t
    shell = np.zeros_like(mask)
    for ax in range(grid.dim):
        sl = [slice(None)] * grid.dim
        sl[ax] = 0
        shell[tuple(sl)] = True
        sl[ax] = -1
        shell[tuple(sl)] = True
    if np.any(mask & shell):
        raise GridTooSmall(f"level {t:.6g} reaches the grid boundary; enlarge the box")
    raw, n = ndimage.label(mask)
    labels = raw.astype(np.int64) - 1
    labels.setflags(write=False)
    out = ComponentLabeling(grid=grid, t=float(t), labels=labels, n_components=int(n))
    with _cache_lock:
        cache[key] = out
        while len(cache) > _LABEL_CACHE_SIZE:
            cache.popitem(last=False)
    return out


def _angle(v, n) -> float:
    nv, nn = np.linalg.norm(v), np.linalg.norm(n)
    if nv == 0 or nn == 0:
        return 0.0
    cosv = float(v @ n) / (nv * nn)
    perp = np.linalg.norm(v / nv - cosv * n / nn)
    return float(np.arctan2(perp, cosv))


def stationarity_angle(model: DensityModel, x, q) -> float:
    """Angle between ``q - x`` and ``grad f(q)``; zero at an exact projection step upward."""
    return _angle(np.asarray(q) - np.asarray(x), model.grad(q))


def _newton_projection(model, x, t, q, c, controls, max_iter=60):
    """Solve ``f(q) = t``, ``q - x = c grad f(q)`` by Newton on ``(q, c)``."""
    d = len(x)
    eye = np.eye(d)
    best = None
    for it in range(max_iter):
        fq, gq, hq = model._derivatives(q, 2)
        r1 = q - x - c * gq
        r2 = fq - t
        dist = float(np.linalg.norm(q - x))
        if abs(r2) <= controls.level_tol and np.linalg.norm(r1) <= 1e-10 * max(dist, 1e-300):
            if best is not None and it - best >= 1:
                return q, c, True
            best = it if best is None else best
        jac = np.zeros((d + 1, d + 1))
        jac[:d, :d] = eye - c * hq
        jac[:d, d] = -gq
        jac[d, :d] = gq
        try:
            delta = np.linalg.solve(jac, -np.concatenate([r1, [r2]]))
        except np.linalg.LinAlgError:
            return q, c, False
        if not np.all(np.isfinite(delta)):
            return q, c, False
        q = q + delta[:d]
        c = c + delta[d]
    fq, gq, _ = model._derivatives(q, 1)
    ok = abs(fq - t) <= controls.level_tol and np.linalg.norm(q - x - c * gq) <= 1e-8 * np.linalg.norm(q - x)
    return q, c, bool(ok)


def _ray_point(model, x, t, direction, scale):
    """A point ``x + u * direction`` on ``{f = t}``, found by bracketing then bisection."""
    from scipy.optimize import brentq

    fx = model._derivatives(x, 0)[0]
    sign = 1.0 if t > fx else -1.0
    u_hi = scale
    for _ in range(60):
        if sign * (model._derivatives(x + u_hi * direction, 0)[0] - t) >= 0:
            break
        u_hi *= 2.0
    else:
        return None
    u = brentq(lambda u: model._derivatives(x + u * direction, 0)[0] - t, 0.0, u_hi, xtol=1e-15, rtol=1e-15)
    return x + u * direction


def project_to_level(model: DensityModel, x, t: float, controls: Controls) -> np.ndarray:
    """Metric projection of ``x`` onto the level set ``{f = t}``.

    Solves the Lagrange conditions ``f(q) = t`` and ``q - x = c grad f(q)`` by
    Newton's method seeded at the first-order estimate
    ``x + (t - f(x)) grad f(x) / |grad f(x)|^2``. If that seed fails or lands
    farther than the first-order distance bound allows, a second seed on the
    ray ``x + u grad f(x)`` is tried; the nearer accepted solution wins.

    Raises :class:`ProjectionFailed` when no seed gives an accepted solution.
    """
    x = model._check(x)
    fx, gx, _ = model._derivatives(x, 1)
    if abs(t - fx) <= controls.level_tol:
        return x.copy()
    gn = float(np.linalg.norm(gx))
    if gn <= controls.grad_floor:
        raise ProjectionFailed(f"gradient norm {gn:.3g} below floor at the starting point", x.copy())
    direction = gx / gn
    step = (t - fx) / gn
    guard = 4.0 * abs(t - fx) / gn
    sign = np.sign(t - fx)

    def accept(q, c, ok):
        if not ok or not np.all(np.isfinite(q)):
            return False
        if np.sign(c) != sign or np.linalg.norm(q - x) > guard:
            return False
        return _angle(sign * (q - x), model._derivatives(q, 1)[1]) <= controls.angle_tol

    candidates = []
    q, c, ok = _newton_projection(model, x, t, x + step * direction, step / gn, controls)
    last = q
    if accept(q, c, ok):
        candidates.append(q)
    if not candidates or np.linalg.norm(q - x) > 2.0 * abs(t - fx) / gn:
        r = _ray_point(model, x, t, sign * direction, abs(step))
        if r is not None:
            gr = model._derivatives(r, 1)[1]
            c0 = float((r - x) @ gr) / float(gr @ gr) if gr @ gr > 0 else step / gn
            q2, c2, ok2 = _newton_projection(model, x, t, r, c0, controls)
            last = q2
            if accept(q2, c2, ok2):
                candidates.append(q2)
    if not candidates:
        raise ProjectionFailed(f"projection onto level {t:.6g} did not converge", last)
    return min(candidates, key=lambda q: float(np.linalg.norm(q - x)))


def distance_to_level(model: DensityModel, x, t: float, controls: Controls) -> float:
    """Distance from ``x`` to ``{f = t}`` via :func:`project_to_level`."""
    x = model._check(x)
    return float(np.linalg.norm(project_to_level(model, x, t, controls) - x))


def same_component(model: DensityModel, x, y, t: float, controls: Controls) -> bool:
    """Whether ``x`` and ``y`` lie in the same connected component of ``{f >= t}``.

    Fast path: the segment ``[x, y]`` stays in the upper level set at
    ``controls.probes`` equispaced points. Otherwise the grid labeling decides.
    """
    x, y = model._check(x), model._check(y)
    slack = controls.level_tol
    if model._derivatives(x, 0)[0] < t - slack or model._derivatives(y, 0)[0] < t - slack:
        raise InputError("same_component requires f(x) >= t and f(y) >= t")
    if np.array_equal(x, y):
        return True
    s = np.linspace(0.0, 1.0, controls.probes)[:, None]
    if np.all(model.eval_many(x + s * (y - x)) >= t - slack):
        return True
    lab = label_components(model, t, controls.grid)
    lx, ly = lab.label_at(x), lab.label_at(y)
    return lx is not None and lx == ly


def argmax_on_component(model: DensityModel, seed, t: float, controls: Controls) -> np.ndarray:
    """Location of the maximum of ``f`` over the component of ``{f >= t}`` containing ``seed``.

    The gradient line from ``seed`` cannot leave the component, so its mode is
    the answer whenever no grid cell of the component is higher. Otherwise the
    ascent is restarted from the discrete local maxima among the top decile of
    the component's cells, and the highest mode found is returned.
    """
    seed = model._check(seed)
    if model._derivatives(seed, 0)[0] < t - controls.level_tol:
        raise InputError("argmax_on_component requires f(seed) >= t")
    first = integrate_gamma(model, seed, controls).terminal
    lab = label_components(model, t, controls.grid)
    label = lab.label_at(seed)
    if label is None:
        # component smaller than a grid cell: a single mode at this resolution
        if first.kind == "mode":
            return first.point
        raise ArgmaxFailed("ascent from seed did not reach a mode")
    vals = grid_values(model, controls.grid)
    comp = lab.labels == label
    top = float(vals[comp].max())
    if first.kind == "mode" and model.eval(first.point) >= top - controls.level_tol:
        return first.point
    masked = np.where(comp, vals, -np.inf)
    local_max = (masked == ndimage.maximum_filter(masked, size=3, mode="constant", cval=-np.inf)) & comp
    cutoff = np.quantile(vals[comp], 0.9)
    starts_idx = np.flatnonzero((local_max & (vals >= cutoff)).ravel())
    starts_idx = starts_idx[np.argsort(vals.ravel()[starts_idx])[::-1][:32]]
    found = [first.point] if first.kind == "mode" else []
    for i in starts_idx:
        term = integrate_gamma(model, controls.grid.centers[i], controls).terminal
        if term.kind == "mode":
            found.append(term.point)
    if not found:
        raise ArgmaxFailed(f"no ascent inside the component at level {t:.6g} reached a mode")
    return max(found, key=lambda p: model.eval(p))
