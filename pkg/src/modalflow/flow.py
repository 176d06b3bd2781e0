"""Gradient flows of a density and basin-of-attraction assignment.

Three parameterizations of the same gradient line are integrated:

* ``gamma``: ``x' = grad f(x)`` (time parameter),
* ``xi``: ``x' = grad f(x) / f(x)``, the flow of ``log f``,
* ``zeta``: ``x' = grad f(x) / |grad f(x)|^2``, parameterized by the level
  gained, so that ``f(zeta(s)) = f(x) + s``.

All three use classical RK4 with step doubling. ``gamma`` and ``xi`` finish
with Newton iterations once the gradient is small and the Hessian is negative
definite, so terminal modes are accurate to ``controls.mode_tol``.
"""
from __future__ import annotations

import csv
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .controls import Controls
from .density import DensityModel
from .errors import InputError

TERMINAL_KINDS = ("mode", "saddle_suspect", "max_steps", "left_domain", "level_reached", "diverged")


@dataclass(frozen=True)
class TerminalInfo:
    point: np.ndarray
    kind: str
    grad_norm: float
    hessian_definite: bool


@dataclass(frozen=True)
class Trajectory:
    """A discretized gradient line.

    ``params`` holds time for ``gamma``/``xi`` and the level offset for ``zeta``.
    """

    points: np.ndarray
    params: np.ndarray
    levels: np.ndarray
    terminal: TerminalInfo

    def __len__(self):
        return len(self.points)

    @property
    def end(self) -> np.ndarray:
        return self.points[-1]

    def to_csv(self, path) -> None:
        d = self.points.shape[1]
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["param", "level"] + [f"coord_{i}" for i in range(d)])
            for s, lv, p in zip(self.params, self.levels, self.points):
                w.writerow([repr(float(s)), repr(float(lv))] + [repr(float(v)) for v in p])


@dataclass(frozen=True)
class Mode:
    location: np.ndarray
    level: float
    id: int


class ModeRegistry:
    """Thread-safe register-or-match store of modes.

    Two locations within ``radius`` of each other are the same mode. Ids are
    assigned in registration order.
    """

    def __init__(self, radius: float):
        self.radius = float(radius)
        self._modes: list[Mode] = []
        self._lock = threading.Lock()

    def __len__(self):
        return len(self._modes)

    def __iter__(self):
        return iter(list(self._modes))

    @property
    def modes(self) -> list[Mode]:
        return list(self._modes)

    def _nearest(self, loc):
        best, best_d = None, np.inf
        for m in self._modes:
            d = float(np.linalg.norm(m.location - loc))
            if d < best_d:
                best, best_d = m, d
        return best if best_d <= self.radius else None

    def match(self, location) -> Mode | None:
        with self._lock:
            return self._nearest(np.asarray(location, dtype=float))

    def register(self, location, level: float) -> Mode:
        loc = np.array(location, dtype=float)
        with self._lock:
            found = self._nearest(loc)
            if found is not None:
                return found
            mode = Mode(location=loc, level=float(level), id=len(self._modes))
            self._modes.append(mode)
            return mode


def _is_neg_definite(hess) -> bool:
    return bool(np.linalg.eigvalsh(hess).max() < 0)


def _rk4(field, y, h):
    k1 = field(y)
    k2 = field(y + 0.5 * h * k1)
    k3 = field(y + 0.5 * h * k2)
    k4 = field(y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


class _Stall(Exception):
    """Raised by a field that cannot be evaluated (vanishing gradient)."""


def _integrate_to_mode(model: DensityModel, x, controls: Controls, field: Callable, tol: float | None,
                       max_step: float | None) -> Trajectory:
    tol = controls.rk_tol if tol is None else tol
    max_step = controls.max_step if max_step is None else max_step
    lvl_scale, pos_scale = tol * controls.fmax, tol * controls.diameter
    y = np.array(x, dtype=float)
    f, g, hess = model._derivatives(y, 2)
    points, params, levels = [y.copy()], [0.0], [f]
    time = 0.0
    gn = float(np.linalg.norm(g))
    h = max_step / max(gn, 1e-300)
    kind = "max_steps"
    for _ in range(controls.max_steps):
        if gn <= controls.polish_tol:
            if hess is None:
                hess = model._derivatives(y, 2)[2]
            if _is_neg_definite(hess):
                y, f, g, hess, ok = _polish(model, y, f, g, hess, controls, points, params, levels, time)
                gn = float(np.linalg.norm(g))
                if ok:
                    kind = "mode"
                    break
            elif gn <= controls.mode_tol:
                kind = "saddle_suspect"
                break
        # RK4 step with step doubling
        v = field(y, g, f)
        h = min(h, max_step / max(float(np.linalg.norm(v)), 1e-300))
        while True:
            try:
                full = _rk4(lambda z: field(z), y, h)
                half = _rk4(lambda z: field(z), _rk4(lambda z: field(z), y, 0.5 * h), 0.5 * h)
            except _Stall:
                h *= 0.25
                continue
            f_full = model._derivatives(full, 0)[0]
            f_half, g_half, _ = model._derivatives(half, 1)
            ratio = max(abs(f_full - f_half) / lvl_scale, float(np.linalg.norm(full - half)) / pos_scale)
            if ratio <= 1.0 and f_half >= f - 1e-12 * controls.fmax:
                break
            h *= max(0.1, 0.9 * ratio ** -0.2) if ratio > 1.0 else 0.5
            if h < 1e-300:
                raise RuntimeError("step size underflow in gradient-flow integration")
        y, f, g, hess = half, f_half, g_half, None
        time += h
        points.append(y.copy())
        params.append(time)
        levels.append(f)
        gn = float(np.linalg.norm(g))
        if not controls.box.contains(y):
            kind = "left_domain"
            break
        h *= min(4.0, 0.9 * max(ratio, 1e-10) ** -0.2)
    if hess is None:
        hess = model._derivatives(y, 2)[2]
    term = TerminalInfo(point=y.copy(), kind=kind, grad_norm=float(np.linalg.norm(g)),
                        hessian_definite=_is_neg_definite(hess))
    return Trajectory(np.array(points), np.array(params), np.array(levels), term)


def _polish(model, y, f, g, hess, controls, points, params, levels, time, max_iter: int = 30):
    """Newton iterations at a near-mode point. Appends accepted iterates to the records."""
    for _ in range(max_iter):
        step = -np.linalg.solve(hess, g)
        z = y + step
        fz, gz, hz = model._derivatives(z, 2)
        if fz < f - 1e-12 * controls.fmax or not _is_neg_definite(hz):
            return y, f, g, hess, False
        y, f, g, hess = z, fz, gz, hz
        points.append(y.copy())
        params.append(time)
        levels.append(f)
        if np.linalg.norm(g) <= controls.mode_tol and np.linalg.norm(step) <= max(controls.fixed_point_tol, 1e-15):
            return y, f, g, hess, True
        if np.linalg.norm(g) <= controls.mode_tol and np.linalg.norm(step) <= 1e-14 * (1 + np.linalg.norm(y)):
            return y, f, g, hess, True
    return y, f, g, hess, bool(np.linalg.norm(g) <= controls.mode_tol)


def _check_start(model: DensityModel, x, controls: Controls) -> np.ndarray:
    x = model._check(x)
    if model._derivatives(x, 0)[0] <= controls.level_floor:
        raise InputError(f"starting point density is at or below level_floor ({controls.level_floor})")
    return x


def integrate_gamma(model: DensityModel, x, controls: Controls, tol: float | None = None,
                    max_step: float | None = None) -> Trajectory:
    """Integrate ``x' = grad f(x)`` until a mode, a saddle stall, the box edge, or ``max_steps``."""
    x = _check_start(model, x, controls)

    def field(z, g=None, f=None):
        return model._derivatives(z, 1)[1] if g is None else g

    return _integrate_to_mode(model, x, controls, field, tol, max_step)


def integrate_xi(model: DensityModel, x, controls: Controls, tol: float | None = None,
                 max_step: float | None = None) -> Trajectory:
    """Integrate ``x' = grad f(x) / f(x)``: the same line as gamma, travelled at another speed."""
    x = _check_start(model, x, controls)

    def field(z, g=None, f=None):
        if g is None:
            f, g, _ = model._derivatives(z, 1)
        if f <= 0:
            raise _Stall
        return g / f

    return _integrate_to_mode(model, x, controls, field, tol, max_step)


def integrate_zeta(model: DensityModel, x, t_end: float, controls: Controls, tol: float | None = None,
                   max_step: float | None = None) -> Trajectory:
    """Integrate the level-parameterized line ``x' = grad f / |grad f|^2`` for ``s`` in ``[0, t_end]``.

    Stops early, flagged ``saddle_suspect``, when the gradient norm falls below
    ``controls.grad_floor``; the line is only defined below the level of its
    limiting critical point.
    """
    x = _check_start(model, x, controls)
    if t_end < 0:
        raise InputError("t_end must be non-negative")
    tol = controls.rk_tol if tol is None else tol
    max_step = controls.max_step if max_step is None else max_step
    floor = controls.grad_floor
    lvl_scale, pos_scale = tol * controls.fmax, tol * controls.diameter

    def field(z):
        g = model._derivatives(z, 1)[1]
        gg = float(g @ g)
        if gg < floor * floor:
            raise _Stall
        return g / gg

    y = x.copy()
    f0, g, _ = model._derivatives(y, 1)
    points, params, levels = [y.copy()], [0.0], [f0]
    s = 0.0
    kind = "level_reached"
    gn = float(np.linalg.norm(g))
    ds = min(t_end, max_step * gn) if gn > 0 else 0.0
    steps = 0
    while s < t_end:
        if gn < floor:
            kind = "saddle_suspect"
            break
        if steps >= controls.max_steps:
            kind = "max_steps"
            break
        ds = min(ds, t_end - s, max_step * gn)
        try:
            full = _rk4(field, y, ds)
            half = _rk4(field, _rk4(field, y, 0.5 * ds), 0.5 * ds)
        except _Stall:
            if ds < 1e-14 * max(controls.fmax, 1e-300):
                kind = "saddle_suspect"
                break
            ds *= 0.25
            continue
        f_full = model._derivatives(full, 0)[0]
        f_half, g_half, _ = model._derivatives(half, 1)
        ratio = max(abs(f_full - f_half) / lvl_scale, float(np.linalg.norm(full - half)) / pos_scale)
        if ratio > 1.0:
            ds *= max(0.1, 0.9 * ratio ** -0.2)
            continue
        s = t_end if t_end - s - ds <= 1e-15 * max(t_end, 1.0) else s + ds
        y = half
        steps += 1
        points.append(y.copy())
        params.append(s)
        levels.append(f_half)
        gn = float(np.linalg.norm(g_half))
        if not controls.box.contains(y):
            kind = "left_domain"
            break
        ds *= min(4.0, 0.9 * max(ratio, 1e-10) ** -0.2)
    f_end, g_end, h_end = model._derivatives(y, 2)
    term = TerminalInfo(point=y.copy(), kind=kind, grad_norm=float(np.linalg.norm(g_end)),
                        hessian_definite=_is_neg_definite(h_end))
    return Trajectory(np.array(points), np.array(params), np.array(levels), term)


def assign_basin(model: DensityModel, x, controls: Controls, registry: ModeRegistry) -> Mode | None:
    """Follow the gradient line from ``x`` and return its mode; ``None`` when unassigned."""
    traj = integrate_gamma(model, x, controls)
    if traj.terminal.kind != "mode":
        return None
    return registry.register(traj.terminal.point, traj.levels[-1])


def ascend(model: DensityModel, x, controls: Controls) -> TerminalInfo:
    """Terminal information of the gamma flow from ``x`` (no trajectory kept by callers)."""
    return integrate_gamma(model, x, controls).terminal
