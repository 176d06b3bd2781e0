"""Climbing the cluster tree by successive projections onto level sets.

``climb_alg1`` raises the level by a fixed amount at every step and projects
onto the new level set, stopping when the projection jumps to another
cluster. ``climb_alg2`` instead moves a fixed distance, projecting onto the
highest level reachable within a ball. The forward and backward Euler schemes
of the gradient flow are included for comparison.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .controls import Controls, newton_critical
from .density import DensityModel
from .errors import InputError, ProjectionFailed, StepFailed
from .flow import Mode, ModeRegistry, TerminalInfo, Trajectory, _is_neg_definite, ascend
from .levelset import _angle, argmax_on_component, project_to_level, same_component

STOP_REASONS = ("left_component", "empty_level", "fixed_point", "max_iterations", "projection_failed")


@dataclass(frozen=True)
class ClimbConfig:
    """Step sizes and limits for one climb.

    ``eta`` is the level step of :func:`climb_alg1`, ``eps`` the spatial step
    of :func:`climb_alg2`; each algorithm reads only its own. When
    ``max_iterations`` is ``None`` the cap is ``10 * ceil(fmax / eta)`` or
    ``10 * ceil(diameter / eps)``.
    """

    eta: float | None = None
    eps: float | None = None
    max_iterations: int | None = None
    seed: int = 0
    sphere_seeds: int = 8

    def __post_init__(self):
        for name in ("eta", "eps"):
            v = getattr(self, name)
            if v is not None and not (math.isfinite(v) and v > 0):
                raise InputError(f"{name} must be positive and finite, got {v}")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise InputError("max_iterations must be >= 1")
        if self.sphere_seeds < 0:
            raise InputError("sphere_seeds must be >= 0")


@dataclass(frozen=True)
class ClimbResult:
    points: np.ndarray
    levels: np.ndarray
    stop_reason: str
    returned_mode: Mode | None
    diagnostics: dict = field(default_factory=dict, compare=False)

    @property
    def iterations(self) -> int:
        return len(self.points) - 1

    @property
    def polyline(self):
        from .metrics import Polyline

        return Polyline(self.points)

    def to_csv(self, path) -> None:
        path = Path(path)
        d = self.points.shape[1]
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["step", "level"] + [f"coord_{i}" for i in range(d)])
            for k, (lv, p) in enumerate(zip(self.levels, self.points)):
                w.writerow([k, repr(float(lv))] + [repr(float(v)) for v in p])
        side = {
            "stop_reason": self.stop_reason,
            "mode_id": None if self.returned_mode is None else self.returned_mode.id,
            "iterations": self.iterations,
        }
        path.with_suffix(".json").write_text(json.dumps(side, indent=2, sort_keys=True) + "\n")


def _start(model, x, controls):
    x = model._check(x)
    f0 = model._derivatives(x, 0)[0]
    if f0 <= controls.level_floor:
        raise InputError(f"starting point density is at or below level_floor ({controls.level_floor})")
    return x, f0


def climb_alg1(model: DensityModel, x, config: ClimbConfig, controls: Controls,
               registry: ModeRegistry | None = None) -> ClimbResult:
    """Level-step climb: ``t_k = t_0 + k * eta``, ``q_k`` the projection of ``q_{k-1}`` onto ``{f = t_k}``.

    Stops when ``q_k`` leaves the component of ``{f >= t_{k-1}}`` holding
    ``q_{k-1}`` or when the level set is empty, and returns the maximizer of
    ``f`` over that component. A local projection failure is resolved by
    ascending from ``q_{k-1}``: if the mode reached is below ``t_k`` the
    component has no point at level ``t_k``, so the true projection lies in
    another component (or nowhere).
    """
    if config.eta is None:
        raise InputError("climb_alg1 needs eta")
    eta = config.eta
    x, f0 = _start(model, x, controls)
    registry = ModeRegistry(controls.merge_radius) if registry is None else registry
    cap = config.max_iterations or 10 * math.ceil(controls.fmax / eta)
    empty_above = controls.fmax - 4 * np.finfo(float).eps * controls.fmax
    points, levels = [x], [f0]
    angles, implied_steps = [], []
    q_prev, t_prev = x, f0
    stop = "max_iterations"
    for k in range(1, cap + 1):
        t_k = f0 + k * eta
        if t_k > empty_above:
            stop = "empty_level"
            break
        try:
            q = project_to_level(model, q_prev, t_k, controls)
        except ProjectionFailed:
            term = ascend(model, q_prev, controls)
            if term.kind == "mode" and model.eval(term.point) < t_k:
                stop = "left_component"
            else:
                stop = "projection_failed"
            break
        if not same_component(model, q, q_prev, t_prev, controls):
            stop = "left_component"
            break
        g = model._derivatives(q, 1)[1]
        angles.append(_angle(q - q_prev, g))
        implied_steps.append(float((q - q_prev) @ g) / float(g @ g))
        points.append(q)
        levels.append(t_k)
        q_prev, t_prev = q, t_k
    mode = None
    if stop in ("left_component", "empty_level"):
        top = argmax_on_component(model, q_prev, t_prev, controls)
        mode = registry.register(top, model.eval(top))
    diag = {"step_angles": np.array(angles), "implied_steps": np.array(implied_steps)}
    return ClimbResult(np.array(points), np.array(levels), stop, mode, diag)


def _sphere_basis(u):
    """Orthonormal basis of the tangent space of the unit sphere at ``u``."""
    d = len(u)
    q, _ = np.linalg.qr(np.column_stack([u, np.eye(d)]))
    return q[:, 1:d]


def _sphere_ascent(model, center, eps, u, max_iter=100):
    """Maximize ``f(center + eps * u)`` over unit vectors ``u`` by Riemannian Newton with line search."""
    u = u / np.linalg.norm(u)
    y = center + eps * u
    f, g, h = model._derivatives(y, 2)
    for _ in range(max_iter):
        basis = _sphere_basis(u)
        rg = eps * (basis.T @ g)
        if np.linalg.norm(rg) <= 1e-15 * max(abs(f), 1e-300) * 1e3:
            break
        rh = basis.T @ (eps * eps * h - eps * float(u @ g) * np.eye(len(u))) @ basis
        evals = np.linalg.eigvalsh(rh)
        if evals.max() < 0:
            step = -np.linalg.solve(rh, rg)
        else:
            step = rg / max(float(np.abs(evals).max()), 1e-300)
        v = basis @ step
        accepted = False
        for _ in range(40):
            w = u + v
            w = w / np.linalg.norm(w)
            yw = center + eps * w
            fw = model._derivatives(yw, 0)[0]
            if fw >= f:
                accepted = True
                break
            v = 0.5 * v
        if not accepted:
            break
        moved = float(np.linalg.norm(w - u))
        u, y = w, yw
        f, g, h = model._derivatives(y, 2)
        if moved <= 1e-15:
            break
    return y, f


def boundary_max(model: DensityModel, center, eps: float, controls: Controls,
                 rng: np.random.Generator | None = None, n_random: int = 8):
    """Maximize ``f`` over the closed ball of radius ``eps`` around ``center``.

    The sphere is searched from ``center + eps * N(center)`` and ``n_random``
    random directions (in one dimension the two endpoints are exact). The
    interior can only hold the maximum when a critical point is within reach,
    which requires ``|grad f(center)| <= kappa2 * eps``; in that case a Newton
    search for a nearby mode is added to the candidates.

    Returns ``(point, value)``.
    """
    center = model._check(center)
    if not (eps > 0):
        raise InputError("eps must be positive")
    fc, gc, _ = model._derivatives(center, 1)
    gn = float(np.linalg.norm(gc))
    d = model.dim
    if d == 1:
        cands = [center - eps, center + eps]
        vals = [model._derivatives(c, 0)[0] for c in cands]
        best = int(np.argmax(vals))
        best_y, best_f = cands[best], vals[best]
    else:
        rng = np.random.default_rng(0) if rng is None else rng
        first = gc / gn if gn > 0 else np.eye(d)[0]
        dirs = [first] + [v for v in rng.standard_normal((n_random, d))]
        best_y, best_f = None, -np.inf
        for u in dirs:
            if np.linalg.norm(u) == 0:
                continue
            y, fy = _sphere_ascent(model, center, eps, u)
            if fy > best_f:
                best_y, best_f = y, fy
    if gn <= 2.0 * controls.kappa2 * eps:
        y, ok = newton_critical(model, center, tol=controls.mode_tol)
        if ok and np.linalg.norm(y - center) <= eps:
            fy = model.eval(y)
            if fy > best_f:
                best_y, best_f = y, fy
    return np.array(best_y, dtype=float), float(best_f)


def climb_alg2(model: DensityModel, x, config: ClimbConfig, controls: Controls,
               registry: ModeRegistry | None = None) -> ClimbResult:
    """Spatial-step climb: ``t_k`` is the maximum of ``f`` within ``eps`` of ``q_{k-1}``,
    ``q_k`` the projection of ``q_{k-1}`` onto ``{f = t_k}``. Stops at a fixed point.

    The projection is cross-checked against the maximizer found on the ball;
    the largest disagreement is kept in ``diagnostics["crosscheck"]``.
    """
    if config.eps is None:
        raise InputError("climb_alg2 needs eps")
    eps = config.eps
    x, f0 = _start(model, x, controls)
    registry = ModeRegistry(controls.merge_radius) if registry is None else registry
    rng = np.random.default_rng(config.seed)
    cap = config.max_iterations or 10 * math.ceil(controls.diameter / eps)
    points, levels = [x], [f0]
    step_lengths, interior, cross = [], [], 0.0
    q_prev = x
    stop = "max_iterations"
    for _ in range(cap):
        y, t_k = boundary_max(model, q_prev, eps, controls, rng=rng, n_random=config.sphere_seeds)
        inside = float(np.linalg.norm(y - q_prev)) < eps * (1 - 1e-9)
        if inside or t_k <= levels[-1]:
            # maximum in the interior: the level set of the ball maximum meets the ball only there
            q = y if t_k > levels[-1] else q_prev
        else:
            try:
                q = project_to_level(model, q_prev, t_k, controls)
                cross = max(cross, float(np.linalg.norm(q - y)))
            except ProjectionFailed:
                q = y
        if np.linalg.norm(q - q_prev) <= controls.fixed_point_tol:
            stop = "fixed_point"
            break
        step_lengths.append(float(np.linalg.norm(q - q_prev)))
        interior.append(bool(inside))
        points.append(q)
        levels.append(max(model.eval(q), levels[-1]) if inside else t_k)
        q_prev = q
    mode = None
    if stop == "fixed_point":
        mode = registry.register(q_prev, model.eval(q_prev))
    diag = {"step_lengths": np.array(step_lengths), "interior_steps": np.array(interior, dtype=bool),
            "crosscheck": cross}
    return ClimbResult(np.array(points), np.array(levels), stop, mode, diag)


def forward_euler_ms(model: DensityModel, x, eps: float, controls: Controls,
                     max_iterations: int = 100_000) -> Trajectory:
    """Explicit scheme ``x <- x + eps * grad f(x) / f(x)``; on a kernel estimate with
    ``eps = h**2`` this is the MeanShift update.

    Terminal kinds: ``mode`` at a converged local maximum, ``saddle_suspect``
    at a converged non-maximum, ``diverged`` after two consecutive decreases
    of ``f``, ``max_steps`` otherwise.
    """
    x, _ = _start(model, x, controls)
    if not (eps >= 0 and math.isfinite(eps)):
        raise InputError("eps must be non-negative")
    y = x.copy()
    f, g, _ = model._derivatives(y, 1)
    points, levels = [y.copy()], [f]
    kind, drops = "max_steps", 0
    for _ in range(max_iterations):
        if np.linalg.norm(g) <= controls.mode_tol:
            kind = "mode"
            break
        z = y + eps * g / f
        if np.linalg.norm(z - y) <= controls.fixed_point_tol:
            kind = "mode"
            break
        fz, gz, _ = model._derivatives(z, 1)
        drops = drops + 1 if fz < f - 1e-12 * f else 0
        y, f, g = z, fz, gz
        points.append(y.copy())
        levels.append(f)
        if drops >= 2:
            kind = "diverged"
            break
        if f <= 0:
            kind = "diverged"
            break
    hess = model._derivatives(y, 2)[2]
    neg = _is_neg_definite(hess)
    if kind == "mode" and not neg:
        kind = "saddle_suspect"
    term = TerminalInfo(point=y.copy(), kind=kind, grad_norm=float(np.linalg.norm(g)), hessian_definite=neg)
    return Trajectory(np.array(points), np.arange(len(points), dtype=float) * eps, np.array(levels), term)


def backward_euler_step(model: DensityModel, x, eps: float, controls: Controls, max_iter: int = 50) -> np.ndarray:
    """Solve the implicit step ``y = x + eps * grad f(y)`` by Newton, seeded with the explicit step.

    Raises :class:`StepFailed` when the residual does not reach ``1e-12``.
    """
    x, _ = _start(model, x, controls)
    if not (eps >= 0 and math.isfinite(eps)):
        raise InputError("eps must be non-negative")
    if eps == 0:
        return x.copy()
    y = x + eps * model._derivatives(x, 1)[1]
    eye = np.eye(model.dim)
    for _ in range(max_iter):
        _, g, h = model._derivatives(y, 2)
        r = y - x - eps * g
        if np.linalg.norm(r) <= 1e-12:
            return y
        try:
            y = y - np.linalg.solve(eye - eps * h, r)
        except np.linalg.LinAlgError as exc:
            raise StepFailed("singular Jacobian in backward Euler step") from exc
        if not np.all(np.isfinite(y)):
            break
    raise StepFailed(f"backward Euler step with eps={eps} did not converge; shrink eps")
