import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats
from scipy.optimize import approx_fprime

from modalflow import GaussianMixture, InputError, KernelDensity, estimate_bounds, kde_fit, load_density
from modalflow.density import density_from_spec, read_points_csv, rule_of_thumb_bandwidth, write_points_csv
from modalflow.grid import Box

from oracles import INV_2PI, KDE_012_AT_1, PHI0, PHI1


def test_standard_normal_values():
    m = GaussianMixture.standard(1)
    assert m.eval(0.0) == pytest.approx(PHI0, rel=1e-14)
    assert m.eval(1.0) == pytest.approx(PHI1, rel=1e-14)
    assert m.grad(1.0)[0] == pytest.approx(-PHI1, rel=1e-14)
    assert m.hessian(0.0)[0, 0] == pytest.approx(-PHI0, rel=1e-14)


def test_standard_2d_peak():
    m = GaussianMixture.standard(2)
    assert m.eval([0.0, 0.0]) == pytest.approx(INV_2PI, rel=1e-14)
    assert np.allclose(m.grad([0.0, 0.0]), 0.0)


def test_mixture_matches_scipy(mix2, rng):
    pts = rng.normal(size=(50, 2)) * 3
    ref = sum(w * stats.multivariate_normal(mu, c).pdf(pts)
              for w, mu, c in zip(mix2.model.weights, mix2.model.means, mix2.model.covs))
    assert np.allclose(mix2.model.eval_many(pts), ref, rtol=1e-12, atol=0)
    assert np.allclose([mix2.model.eval(p) for p in pts], ref, rtol=1e-12, atol=0)


def test_kde_value_on_three_points():
    kde = KernelDensity([[0.0], [1.0], [2.0]], 1.0)
    assert kde.eval(1.0) == pytest.approx(KDE_012_AT_1, rel=1e-14)
    assert kde.grad(1.0)[0] == pytest.approx(0.0, abs=1e-15)


@pytest.mark.parametrize("model", [GaussianMixture([0.3, 0.7], [[0.0, 1.0], [2.0, -1.0]],
                                                   [[[1.0, 0.3], [0.3, 0.5]], [[2.0, 0.0], [0.0, 1.0]]]),
                                   KernelDensity(np.random.default_rng(3).normal(size=(40, 2)), 0.6)])
def test_gradient_and_hessian_match_finite_differences(model):
    for x in ([0.3, -0.2], [1.5, 0.7], [-1.0, 2.0]):
        x = np.array(x)
        g_fd = approx_fprime(x, model.eval, 1e-7)
        assert np.allclose(model.grad(x), g_fd, atol=1e-6)
        h_fd = np.array([approx_fprime(x, lambda y, i=i: model.grad(y)[i], 1e-7) for i in range(2)])
        assert np.allclose(model.hessian(x), h_fd, atol=1e-6)


def test_batch_derivatives_agree_with_pointwise(mix2, rng):
    pts = rng.normal(size=(20, 2))
    f, g, h = mix2.model.derivatives_many(pts)
    for i, p in enumerate(pts):
        fi, gi, hi = mix2.model.derivatives(p)
        assert f[i] == pytest.approx(fi, rel=1e-13)
        assert np.allclose(g[i], gi, rtol=1e-12, atol=1e-18)
        assert np.allclose(h[i], hi, rtol=1e-12, atol=1e-18)


def test_truncated_kde_is_close_to_exact(rng):
    pts = rng.normal(size=(200, 2))
    exact, trunc = kde_fit(pts, 0.4), kde_fit(pts, 0.4, truncate=8.0)
    for x in rng.normal(size=(10, 2)):
        assert trunc.eval(x) == pytest.approx(exact.eval(x), rel=1e-12)


def test_bounds_on_standard_normal():
    b = estimate_bounds(GaussianMixture.standard(1), Box((-5.0,), (5.0,)), 1001)
    assert b.kappa1 == pytest.approx(PHI1, rel=1e-12)  # max |x| phi(x) at x = 1
    assert b.kappa2 == pytest.approx(PHI0, rel=1e-12)  # max |x^2 - 1| phi(x) at x = 0
    assert b.fmax == pytest.approx(PHI0, rel=1e-12)


@pytest.mark.parametrize("kwargs", [
    dict(weights=[0.5, 0.6], means=[[0.0], [1.0]], covs=[[[1.0]], [[1.0]]]),
    dict(weights=[1.0], means=[[0.0, 0.0]], covs=[[[1.0, 0.0], [0.0, -1.0]]]),
    dict(weights=[1.0], means=[[0.0, 0.0]], covs=[[[1.0, 0.2], [0.0, 1.0]]]),
    dict(weights=[1.0], means=[[np.nan]], covs=[[[1.0]]]),
])
def test_invalid_mixtures_rejected(kwargs):
    with pytest.raises(InputError):
        GaussianMixture(**kwargs)


def test_invalid_kde_rejected():
    with pytest.raises(InputError):
        kde_fit(np.empty((0, 2)))
    with pytest.raises(InputError):
        KernelDensity([[0.0]], 0.0)


def test_wrong_dimension_rejected():
    with pytest.raises(InputError):
        GaussianMixture.standard(2).eval([0.0, 0.0, 0.0])


def test_rule_of_thumb_scaling(rng):
    pts = rng.normal(size=(1000, 1))
    assert rule_of_thumb_bandwidth(pts) == pytest.approx(1000 ** -0.2 * pts.std(ddof=1), rel=1e-12)


def test_spec_round_trip(mix2, tmp_path):
    path = tmp_path / "d.json"
    path.write_text(json.dumps(mix2.spec()))
    m = load_density(path)
    assert m.eval([1.0, 0.5]) == pytest.approx(mix2.model.eval([1.0, 0.5]), rel=1e-15)


def test_kde_spec_reads_sample(tmp_path):
    write_points_csv(tmp_path / "s.csv", [[0.0], [1.0], [2.0]])
    assert np.array_equal(read_points_csv(tmp_path / "s.csv"), [[0.0], [1.0], [2.0]])
    m = density_from_spec({"type": "kde", "sample_file": "s.csv", "bandwidth": 1.0}, tmp_path)
    assert m.eval(1.0) == pytest.approx(KDE_012_AT_1, rel=1e-14)


def test_spec_errors(tmp_path):
    with pytest.raises(InputError, match="not found"):
        load_density(tmp_path / "missing.json")
    with pytest.raises(InputError):
        density_from_spec({"type": "mixture", "components": [], "extra": 1})
    with pytest.raises(InputError):
        density_from_spec({"type": "histogram"})


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=1, max_size=30), st.floats(0.1, 2.0), st.floats(-5, 5))
def test_kde_positive_and_bounded(sample, h, x):
    kde = kde_fit(np.array(sample), h)
    f = kde.eval(x)
    assert 0 <= f <= 1 / (np.sqrt(2 * np.pi) * h) + 1e-15


@settings(max_examples=40, deadline=None)
@given(st.floats(0.05, 0.95), st.floats(-4, 4), st.floats(0.2, 3.0), st.floats(-6, 6))
def test_mixture_integrates_to_one_1d(w, mu, sd, shift):
    m = GaussianMixture([w, 1 - w], [[mu], [mu + shift]], [[[sd ** 2]], [[1.0]]])
    xs = np.linspace(-40, 40, 200001)
    total = np.trapezoid(m.eval_many(xs[:, None]), xs)
    assert total == pytest.approx(1.0, abs=1e-8)
