"""Numerical controls shared by the flow, level-set, and climbing routines."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .density import DensityBounds, DensityModel, estimate_bounds
from .errors import InputError
from .grid import Box, Grid


@dataclass(frozen=True)
class Controls:
    """Tolerances and scales for one density on one domain.

    Relative tolerances are multiplied by the scale named in their suffix:
    ``*_rel_kappa1`` by the gradient bound, ``*_rel_fmax`` by the maximum
    density, ``*_rel_diam`` by the domain diameter. Build with
    :meth:`for_model` rather than by hand.
    """

    bounds: DensityBounds
    fmax: float  # Newton-refined maximum, >= bounds.fmax
    grid: Grid
    level_floor: float = 1e-12
    mode_tol_rel_kappa1: float = 1e-8
    polish_rel_kappa1: float = 1e-6
    grad_floor_rel_kappa1: float = 1e-3
    zeta_level_tol: float = 1e-6
    rk_tol: float = 1e-10
    max_step_rel_diam: float = 1e-2
    max_steps: int = 200_000
    merge_radius_rel_diam: float = 1e-4
    fixed_point_rel_diam: float = 1e-12
    level_tol_rel_fmax: float = 1e-10
    angle_tol: float = 1e-6
    probes: int = 32
    extra: dict = field(default_factory=dict, compare=False)

    @classmethod
    def for_model(cls, model: DensityModel, box: Box | None = None, grid: Grid | None = None,
                  bounds_points: int = 201, **overrides) -> "Controls":
        if grid is None:
            grid = Grid.default_for(model.default_box() if box is None else box)
        elif box is not None and grid.box != box:
            raise InputError("box and grid.box disagree")
        if grid.dim != model.dim:
            raise InputError("grid dimension does not match model")
        bounds = estimate_bounds(model, grid.box, bounds_points)
        fmax = refine_fmax(model, grid.box, bounds_points)
        return cls(bounds=bounds, fmax=max(fmax, bounds.fmax), grid=grid, **overrides)

    def with_(self, **changes) -> "Controls":
        return replace(self, **changes)

    @property
    def box(self) -> Box:
        return self.grid.box

    @property
    def diameter(self) -> float:
        return self.grid.box.diameter

    @property
    def kappa1(self) -> float:
        return self.bounds.kappa1

    @property
    def kappa2(self) -> float:
        return self.bounds.kappa2

    @property
    def mode_tol(self) -> float:
        return self.mode_tol_rel_kappa1 * self.kappa1

    @property
    def polish_tol(self) -> float:
        return self.polish_rel_kappa1 * self.kappa1

    @property
    def grad_floor(self) -> float:
        return self.grad_floor_rel_kappa1 * self.kappa1

    @property
    def merge_radius(self) -> float:
        return self.merge_radius_rel_diam * self.diameter

    @property
    def fixed_point_tol(self) -> float:
        return self.fixed_point_rel_diam * self.diameter

    @property
    def level_tol(self) -> float:
        return self.level_tol_rel_fmax * self.fmax

    @property
    def max_step(self) -> float:
        return self.max_step_rel_diam * self.diameter


def newton_critical(model: DensityModel, x, tol: float, max_iter: int = 50, require_ascent: bool = True):
    """Newton iteration ``x <- x - H^{-1} grad f`` towards a nearby local maximum.

    Returns ``(point, converged)``. Stops without converging when the Hessian is
    not negative definite or, with ``require_ascent``, when a step lowers ``f``.
    """
    x = np.array(x, dtype=float)
    f, g, hess = model.derivatives(x)
    for _ in range(max_iter):
        if np.linalg.norm(g) <= tol:
            return x, True
        if np.linalg.eigvalsh(hess).max() >= 0:
            return x, False
        step = -np.linalg.solve(hess, g)
        y = x + step
        fy, gy, hy = model.derivatives(y)
        if require_ascent and fy < f - 1e-15 * abs(f):
            return x, False
        x, f, g, hess = y, fy, gy, hy
    return x, bool(np.linalg.norm(g) <= tol)


def refine_fmax(model: DensityModel, box: Box, points_per_axis: int = 201, n_starts: int = 8) -> float:
    """Newton-polish the best grid points so the maximum is not limited by grid spacing."""
    axes = [np.linspace(l, h, points_per_axis) for l, h in zip(box.lo, box.hi)]
    pts = np.stack([m.ravel() for m in np.meshgrid(*axes, indexing="ij")], axis=1)
    vals = model.eval_many(pts)
    best = float(vals.max())
    for i in np.argsort(vals)[::-1][:n_starts]:
        y, ok = newton_critical(model, pts[i], tol=0.0, max_iter=30)
        if box.contains(y):
            best = max(best, model.eval(y))
    return best
