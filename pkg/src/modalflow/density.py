"""Smooth densities with exact first and second derivatives.

Two families are provided: finite Gaussian mixtures, used as ground truth, and
Gaussian kernel density estimates, used by the plug-in clustering methods. A
kernel estimate is a mixture with equal weights and isotropic covariance
``h**2 I``; it gets its own class because the isotropic form is much cheaper
to evaluate when the sample is large.

All models are immutable after construction.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import InputError
from .grid import Box

_LOG_2PI = math.log(2.0 * math.pi)


class DensityModel:
    """Common interface. Subclasses implement :meth:`_derivatives` and :meth:`eval_many`."""

    dim: int

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 0:
            x = x.reshape(1)
        if x.shape != (self.dim,):
            raise InputError(f"point of shape {x.shape} does not match model dimension {self.dim}")
        if not np.all(np.isfinite(x)):
            raise InputError("point has non-finite coordinates")
        return x

    def eval(self, x) -> float:
        return self._derivatives(self._check(x), 0)[0]

    def grad(self, x) -> np.ndarray:
        return self._derivatives(self._check(x), 1)[1]

    def hessian(self, x) -> np.ndarray:
        return self._derivatives(self._check(x), 2)[2]

    def value_and_grad(self, x):
        f, g, _ = self._derivatives(self._check(x), 1)
        return f, g

    def derivatives(self, x):
        """Return ``(f, grad, hessian)`` at ``x`` in a single pass."""
        return self._derivatives(self._check(x), 2)

    def eval_many(self, points) -> np.ndarray:
        raise NotImplementedError

    def derivatives_many(self, points, chunk: int = 4096):
        """Batched ``(f, grad, hessian)`` with shapes ``(m,)``, ``(m, d)``, ``(m, d, d)``."""
        p = np.asarray(points, dtype=float).reshape(-1, self.dim)
        parts = [self._derivatives_block(p[i:i + chunk]) for i in range(0, len(p), chunk)]
        return tuple(np.concatenate(a) for a in zip(*parts))

    def _derivatives_block(self, p):
        raise NotImplementedError

    def default_box(self) -> Box:
        raise NotImplementedError

    def _derivatives(self, x, order):
        raise NotImplementedError


class GaussianMixture(DensityModel):
    """Finite mixture ``sum_k w_k N(mu_k, Sigma_k)``.

    Parameters
    ----------
    weights : array_like, shape (K,)
        Mixing weights, positive, summing to one within 1e-12.
    means : array_like, shape (K, d)
    covs : array_like, shape (K, d, d)
        Symmetric positive-definite covariance matrices.
    """

    def __init__(self, weights, means, covs):
        w = np.atleast_1d(np.asarray(weights, dtype=float))
        mu = np.asarray(means, dtype=float)
        if mu.ndim == 1:
            mu = mu.reshape(len(w), -1)
        cov = np.asarray(covs, dtype=float)
        k, d = mu.shape
        if cov.ndim == 1 and d == 1:
            cov = cov.reshape(k, 1, 1)
        if k == 0:
            raise InputError("a mixture needs at least one component")
        if w.shape != (k,) or cov.shape != (k, d, d):
            raise InputError(f"inconsistent shapes: weights {w.shape}, means {mu.shape}, covs {cov.shape}")
        if np.any(w <= 0) or np.any(w > 1) or abs(w.sum() - 1.0) > 1e-12:
            raise InputError("weights must lie in (0, 1] and sum to 1")
        if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(cov))):
            raise InputError("means and covariances must be finite")
        for c in cov:
            if not np.allclose(c, c.T, rtol=0, atol=1e-12):
                raise InputError("covariance matrices must be symmetric")
            if np.linalg.eigvalsh(c).min() <= 0:
                raise InputError("covariance matrices must be positive definite")
        self.weights = w
        self.means = mu
        self.covs = cov
        self.dim = d
        self.precisions = np.linalg.inv(cov)
        self.precisions = 0.5 * (self.precisions + np.transpose(self.precisions, (0, 2, 1)))
        logdet = np.linalg.slogdet(cov)[1]
        self._log_norm = np.log(w) - 0.5 * (d * _LOG_2PI + logdet)
        for arr in (self.weights, self.means, self.covs, self.precisions, self._log_norm):
            arr.setflags(write=False)

    @classmethod
    def single(cls, mean, cov) -> "GaussianMixture":
        mean = np.atleast_1d(np.asarray(mean, dtype=float))
        cov = np.asarray(cov, dtype=float).reshape(len(mean), len(mean))
        return cls([1.0], mean[None, :], cov[None, :, :])

    @classmethod
    def standard(cls, d: int = 1) -> "GaussianMixture":
        return cls.single(np.zeros(d), np.eye(d))

    def _derivatives(self, x, order):
        diff = x[None, :] - self.means  # (K, d)
        z = np.einsum("kij,kj->ki", self.precisions, diff)
        w = np.exp(self._log_norm - 0.5 * np.einsum("ki,ki->k", diff, z))
        f = float(w.sum())
        if order == 0:
            return f, None, None
        g = -(w @ z)
        if order == 1:
            return f, g, None
        hess = np.einsum("k,ki,kj->ij", w, z, z) - np.einsum("k,kij->ij", w, self.precisions)
        return f, g, 0.5 * (hess + hess.T)

    def eval_many(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float).reshape(-1, self.dim)
        out = np.zeros(len(p))
        for k in range(len(self.weights)):
            diff = p - self.means[k]
            q = np.einsum("ni,ij,nj->n", diff, self.precisions[k], diff)
            out += np.exp(self._log_norm[k] - 0.5 * q)
        return out

    def _derivatives_block(self, p):
        m, d = p.shape
        f = np.zeros(m)
        g = np.zeros((m, d))
        hess = np.zeros((m, d, d))
        for k in range(len(self.weights)):
            diff = p - self.means[k]
            z = diff @ self.precisions[k]
            w = np.exp(self._log_norm[k] - 0.5 * np.einsum("ni,ni->n", diff, z))
            f += w
            g -= w[:, None] * z
            hess += w[:, None, None] * (z[:, :, None] * z[:, None, :] - self.precisions[k])
        return f, g, hess

    def default_box(self, n_sd: float = 8.0) -> Box:
        sd = np.sqrt(np.einsum("kii->ki", self.covs))
        return Box(tuple((self.means - n_sd * sd).min(axis=0)), tuple((self.means + n_sd * sd).max(axis=0)))

    def to_dict(self) -> dict:
        return {
            "type": "mixture",
            "components": [
                {"weight": float(w), "mean": m.tolist(), "cov": c.tolist()}
                for w, m, c in zip(self.weights, self.means, self.covs)
            ],
        }

    def __repr__(self):
        return f"GaussianMixture(K={len(self.weights)}, d={self.dim})"


class KernelDensity(DensityModel):
    """Gaussian kernel density estimate ``(1/n) sum_i N(x; x_i, h^2 I)``.

    ``truncate`` (in bandwidths) drops kernels farther than ``truncate * h``
    from the query point; ``None`` keeps the exact sum.
    """

    def __init__(self, sample, bandwidth: float, truncate: float | None = None):
        pts = np.asarray(sample, dtype=float)
        if pts.ndim == 1:
            pts = pts.reshape(-1, 1)
        if pts.ndim != 2 or len(pts) == 0:
            raise InputError("kernel density needs a non-empty sample")
        if not np.all(np.isfinite(pts)):
            raise InputError("sample contains non-finite coordinates")
        h = float(bandwidth)
        if not (np.isfinite(h) and h > 0):
            raise InputError(f"bandwidth must be finite and positive, got {bandwidth}")
        self.sample = pts.copy()
        self.sample.setflags(write=False)
        self.bandwidth = h
        self.dim = pts.shape[1]
        self.truncate = truncate
        self._norm = (2.0 * math.pi * h * h) ** (-0.5 * self.dim) / len(pts)
        self._tree = None
        if truncate is not None:
            from scipy.spatial import cKDTree

            self._tree = cKDTree(self.sample)

    @property
    def n(self) -> int:
        return len(self.sample)

    def _neighbors(self, x):
        if self._tree is None:
            return self.sample
        idx = self._tree.query_ball_point(x, self.truncate * self.bandwidth)
        return self.sample[idx]

    def _derivatives(self, x, order):
        h2 = self.bandwidth ** 2
        diff = x[None, :] - self._neighbors(x)
        w = self._norm * np.exp(-0.5 * np.einsum("ni,ni->n", diff, diff) / h2)
        f = float(w.sum())
        if order == 0:
            return f, None, None
        g = -(w @ diff) / h2
        if order == 1:
            return f, g, None
        hess = (diff.T * w) @ diff / (h2 * h2) - f / h2 * np.eye(self.dim)
        return f, g, 0.5 * (hess + hess.T)

    def eval_many(self, points, chunk: int = 2048) -> np.ndarray:
        p = np.asarray(points, dtype=float).reshape(-1, self.dim)
        h2 = self.bandwidth ** 2
        sq_s = np.einsum("ni,ni->n", self.sample, self.sample)
        out = np.empty(len(p))
        for start in range(0, len(p), chunk):
            block = p[start:start + chunk]
            sq = np.einsum("ni,ni->n", block, block)[:, None] + sq_s[None, :] - 2.0 * block @ self.sample.T
            np.maximum(sq, 0.0, out=sq)
            if self.truncate is not None:
                sq[sq > (self.truncate ** 2) * h2] = np.inf
            out[start:start + chunk] = self._norm * np.exp(-0.5 * sq / h2).sum(axis=1)
        return out

    def _derivatives_block(self, p, sub: int = 256):
        m, d = p.shape
        h2 = self.bandwidth ** 2
        f = np.empty(m)
        g = np.empty((m, d))
        hess = np.empty((m, d, d))
        for i in range(0, m, sub):
            diff = p[i:i + sub, None, :] - self.sample[None, :, :]
            sq = np.einsum("mni,mni->mn", diff, diff)
            w = self._norm * np.exp(-0.5 * sq / h2)
            if self.truncate is not None:
                w[sq > (self.truncate ** 2) * h2] = 0.0
            fi = w.sum(axis=1)
            f[i:i + sub] = fi
            g[i:i + sub] = -np.einsum("mn,mni->mi", w, diff) / h2
            hess[i:i + sub] = (np.einsum("mn,mni,mnj->mij", w, diff, diff) / (h2 * h2)
                               - fi[:, None, None] / h2 * np.eye(d))
        return f, g, hess

    def default_box(self, n_bw: float = 8.0) -> Box:
        pad = n_bw * self.bandwidth
        return Box(tuple(self.sample.min(axis=0) - pad), tuple(self.sample.max(axis=0) + pad))

    def __repr__(self):
        return f"KernelDensity(n={self.n}, d={self.dim}, h={self.bandwidth:.4g})"


def rule_of_thumb_bandwidth(sample) -> float:
    """``n**(-1/(d+4))`` times the per-axis sample standard deviation, averaged over axes."""
    pts = np.asarray(sample, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    n, d = pts.shape
    sd = pts.std(axis=0, ddof=1).mean() if n > 1 else 1.0
    if not sd > 0:
        sd = 1.0
    return float(n ** (-1.0 / (d + 4)) * sd)


def kde_fit(sample, bandwidth: float | None = None, truncate: float | None = None) -> KernelDensity:
    """Fit a Gaussian kernel density estimate; ``bandwidth=None`` uses the rule of thumb."""
    pts = np.asarray(sample, dtype=float)
    if pts.size == 0:
        raise InputError("kernel density needs a non-empty sample")
    if bandwidth is None:
        bandwidth = rule_of_thumb_bandwidth(pts)
    return KernelDensity(pts, bandwidth, truncate=truncate)


@dataclass(frozen=True)
class DensityBounds:
    """Grid estimates of the derivative bounds.

    Every field is a maximum over grid points, hence a lower bound on the true
    supremum.
    """

    kappa1: float
    kappa2: float
    fmax: float


def estimate_bounds(model: DensityModel, box: Box | None = None, grid_points_per_axis: int = 201) -> DensityBounds:
    """Maximize ``|grad f|``, the Hessian spectral norm, and ``f`` over a grid of points.

    Grid points include the box corners. Cost is ``grid_points_per_axis**d``
    Hessian evaluations.
    """
    box = model.default_box() if box is None else box
    if box.dim != model.dim:
        raise InputError("box dimension does not match model")
    if grid_points_per_axis < 2:
        raise InputError("grid_points_per_axis must be at least 2")
    axes = [np.linspace(l, h, grid_points_per_axis) for l, h in zip(box.lo, box.hi)]
    pts = np.stack([m.ravel() for m in np.meshgrid(*axes, indexing="ij")], axis=1)
    f, g, hess = model.derivatives_many(pts)
    k2 = np.abs(np.linalg.eigvalsh(hess)).max()
    return DensityBounds(kappa1=float(np.linalg.norm(g, axis=1).max()), kappa2=float(k2), fmax=float(f.max()))


def read_points_csv(path) -> np.ndarray:
    """Read a headerless CSV of points, one row per point."""
    path = Path(path)
    if not path.exists():
        raise InputError(f"points file not found: {path}")
    with path.open(newline="") as fh:
        rows = [[float(v) for v in row] for row in csv.reader(fh) if row]
    if not rows:
        raise InputError(f"points file is empty: {path}")
    if len({len(r) for r in rows}) != 1:
        raise InputError(f"rows of unequal length in {path}")
    return np.array(rows)


def write_points_csv(path, points) -> None:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for p in pts:
            writer.writerow([repr(float(v)) for v in p])


def density_from_spec(spec: dict, base_dir=".") -> DensityModel:
    """Build a model from its JSON description (see README for the schema)."""
    if not isinstance(spec, dict) or "type" not in spec:
        raise InputError("density spec must be an object with a 'type' field")
    kind = spec["type"]
    if kind == "mixture":
        unknown = set(spec) - {"type", "components"}
        if unknown:
            raise InputError(f"unknown mixture keys: {sorted(unknown)}")
        comps = spec.get("components") or []
        if not comps:
            raise InputError("mixture needs at least one component")
        for c in comps:
            if set(c) - {"weight", "mean", "cov"}:
                raise InputError(f"unknown component keys: {sorted(set(c) - {'weight', 'mean', 'cov'})}")
        d = len(np.atleast_1d(comps[0]["mean"]))
        return GaussianMixture(
            [c["weight"] for c in comps],
            [np.atleast_1d(c["mean"]) for c in comps],
            [np.asarray(c["cov"], dtype=float).reshape(d, d) for c in comps],
        )
    if kind == "kde":
        unknown = set(spec) - {"type", "sample_file", "bandwidth", "truncate"}
        if unknown:
            raise InputError(f"unknown kde keys: {sorted(unknown)}")
        if "sample_file" not in spec:
            raise InputError("kde spec needs 'sample_file'")
        sample_path = Path(base_dir) / spec["sample_file"]
        return kde_fit(read_points_csv(sample_path), spec.get("bandwidth"), spec.get("truncate"))
    raise InputError(f"unknown density type: {kind!r}")


def load_density(path) -> DensityModel:
    path = Path(path)
    if not path.exists():
        raise InputError(f"density file not found: {path}")
    try:
        spec = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"density file {path} is not valid JSON: {exc}") from exc
    return density_from_spec(spec, base_dir=path.parent)
