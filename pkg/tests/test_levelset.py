import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from modalflow import (GridTooSmall, ProjectionFailed, argmax_on_component, distance_to_level, label_components,
                       project_to_level, same_component)
from modalflow.fixtures import get_fixture
from modalflow.grid import Box, Grid
from modalflow.levelset import stationarity_angle

from oracles import (MIX1_LEFT_MODE, MIX1_RIGHT_MODE, MIX1_SADDLE_LEVEL, PHI1, PROJ_1D_T025, PROJ_1D_T03,
                     PROJ_2D_T01_RADIUS)


def test_projection_1d_closed_form(gauss1):
    q = project_to_level(gauss1.model, 1.0, 0.3, gauss1.controls())
    assert q[0] == pytest.approx(PROJ_1D_T03, abs=1e-12)


def test_distance_1d_closed_form_and_bound(gauss1):
    d = distance_to_level(gauss1.model, 1.0, 0.25, gauss1.controls())
    assert d == pytest.approx(1.0 - PROJ_1D_T025, abs=1e-12)
    assert d <= 2 * (0.25 - PHI1) / PHI1


def test_projection_2d_lands_on_circle_along_ray(gauss2):
    x = np.array([1.0, 0.5])
    q = project_to_level(gauss2.model, x, 0.1, gauss2.controls())
    assert np.linalg.norm(q) == pytest.approx(PROJ_2D_T01_RADIUS, abs=1e-12)
    assert abs(q[0] * x[1] - q[1] * x[0]) <= 1e-12


def test_projection_above_maximum_fails(gauss2):
    with pytest.raises(ProjectionFailed):
        project_to_level(gauss2.model, [1.0, 0.0], 0.2, gauss2.controls())


def test_projection_at_mode_fails(gauss2):
    with pytest.raises(ProjectionFailed):
        project_to_level(gauss2.model, [0.0, 0.0], 0.1, gauss2.controls())


def test_projection_on_level_is_identity(gauss1):
    assert project_to_level(gauss1.model, 1.0, PHI1, gauss1.controls())[0] == 1.0


def test_labels_around_saddle(mix1):
    g = mix1.controls().grid
    assert label_components(mix1.model, MIX1_SADDLE_LEVEL + 1e-3, g).n_components == 2
    assert label_components(mix1.model, MIX1_SADDLE_LEVEL - 1e-3, g).n_components == 1
    assert label_components(mix1.model, 0.3, g).n_components == 0


def test_label_at_and_sizes(mix1):
    lab = label_components(mix1.model, 0.1, mix1.controls().grid)
    assert lab.label_at(0.0) != lab.label_at(3.5)
    assert lab.label_at(1.75) is None
    assert lab.sizes().tolist() == [33, 33]  # symmetric mixture
    assert len(lab.cells(0)) == 33


def test_level_touching_box_raises():
    m = get_fixture("D_gauss1").model
    with pytest.raises(GridTooSmall):
        label_components(m, 0.01, Grid(Box((-2.0,), (2.0,)), 64))


def test_same_component(mix1):
    c = mix1.controls()
    assert not same_component(mix1.model, 0.0, 3.5, 0.1, c)
    assert same_component(mix1.model, 0.0, 3.5, 0.05, c)
    assert same_component(mix1.model, -0.5, 0.5, 0.1, c)


@pytest.mark.parametrize("seed,t,mode", [(3.0, 0.1, MIX1_RIGHT_MODE), (1.0, 0.1, MIX1_LEFT_MODE),
                                         (1.0, 0.05, None)])
def test_argmax_on_component(mix1, seed, t, mode):
    top = argmax_on_component(mix1.model, seed, t, mix1.controls())
    if mode is None:
        # one component holding both equal modes: either maximizer is valid
        assert min(abs(top[0] - MIX1_LEFT_MODE), abs(top[0] - MIX1_RIGHT_MODE)) <= 1e-7
    else:
        assert top[0] == pytest.approx(mode, abs=1e-7)


def test_labeling_csv(mix1, tmp_path):
    lab = label_components(mix1.model, 0.1, mix1.controls().grid)
    lab.to_csv(tmp_path / "l.csv")
    rows = (tmp_path / "l.csv").read_text().splitlines()
    assert rows[0] == "cell_index_0,label"
    assert len(rows) == 1 + 66


def _random_regular_point(fx, rng):
    c = fx.controls()
    lo, hi = np.array(c.box.lo), np.array(c.box.hi)
    while True:
        x = lo + (hi - lo) * rng.random(fx.model.dim)
        f, g = fx.model.value_and_grad(x)
        if f > 0.05 * c.fmax and np.linalg.norm(g) > 0.1 * c.kappa1:
            return x, f, g


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(["D_gauss2", "D_mix1", "D_mix2"]), st.integers(0, 2 ** 32 - 1), st.floats(1e-3, 1.0))
def test_projection_is_stationary_and_on_level(name, seed, frac):
    fx = get_fixture(name)
    c = fx.controls()
    x, f, g = _random_regular_point(fx, np.random.default_rng(seed))
    eta = frac * min(np.dot(g, g) / (2 * c.kappa2), 0.99 * (c.fmax - f))
    assume(eta > 1e-8 * c.fmax)
    q = project_to_level(fx.model, x, f + eta, c)
    assert fx.model.eval(q) == pytest.approx(f + eta, abs=1e-9 * c.fmax)
    assert stationarity_angle(fx.model, x, q) <= 1e-6
    assert np.linalg.norm(q - x) <= 2 * eta / np.linalg.norm(g)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_nearer_than_random_level_points(seed):
    fx = get_fixture("D_mix2")
    c = fx.controls()
    rng = np.random.default_rng(seed)
    x, f, g = _random_regular_point(fx, rng)
    t = f + 0.3 * min(np.dot(g, g) / (2 * c.kappa2), c.fmax - f)
    d = distance_to_level(fx.model, x, t, c)
    # points on the level set found along random rays from x cannot be closer
    for u in rng.normal(size=(16, 2)):
        u /= np.linalg.norm(u)
        r = np.linspace(0, 3 * d + 1e-3, 2000)
        vals = fx.model.eval_many(x + r[:, None] * u) - t
        hit = np.flatnonzero(np.sign(vals[:-1]) != np.sign(vals[1:]))
        if len(hit):
            assert r[hit[0]] >= d - (r[1] - r[0])
