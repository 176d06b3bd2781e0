import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from modalflow import ModeRegistry, assign_basin, integrate_gamma, integrate_xi, integrate_zeta
from modalflow.errors import InputError
from modalflow.flow import TERMINAL_KINDS, ascend

from oracles import MIX1_LEFT_MODE, MIX1_RIGHT_MODE, MIX2_MODE_HI, MIX2_MODE_LO, ZETA_1D_LEVEL, ZETA_2D_RADIUS


def test_gamma_reaches_origin_from_ring(gauss2):
    c = gauss2.controls()
    for a in np.linspace(0, 2 * np.pi, 8, endpoint=False):
        tr = integrate_gamma(gauss2.model, [2 * np.cos(a), 2 * np.sin(a)], c)
        assert tr.terminal.kind == "mode"
        assert np.linalg.norm(tr.end) <= 1e-6


def test_gamma_on_single_gaussian_stays_on_ray(gauss2):
    tr = integrate_gamma(gauss2.model, [1.5, 0.5], gauss2.controls())
    cross = tr.points[:, 0] * 0.5 - tr.points[:, 1] * 1.5
    assert np.max(np.abs(cross)) <= 1e-9


@pytest.mark.parametrize("x0,mode", [(1.0, MIX1_LEFT_MODE), (-1.0, MIX1_LEFT_MODE),
                                     (4.0, MIX1_RIGHT_MODE), (2.8, MIX1_RIGHT_MODE)])
def test_mix1_basins(mix1, x0, mode):
    c = mix1.controls()
    for integrate in (integrate_gamma, integrate_xi):
        tr = integrate(mix1.model, x0, c)
        assert tr.terminal.kind == "mode"
        assert tr.end[0] == pytest.approx(mode, abs=1e-7)


def test_mix2_modes(mix2):
    c = mix2.controls()
    reg = ModeRegistry(c.merge_radius)
    hi = assign_basin(mix2.model, [2.5, 1.5], c, reg)
    lo = assign_basin(mix2.model, [-0.5, -0.5], c, reg)
    assert np.allclose(hi.location, MIX2_MODE_HI, atol=1e-7)
    assert np.allclose(lo.location, MIX2_MODE_LO, atol=1e-7)
    assert assign_basin(mix2.model, [3.2, 0.4], c, reg).id == hi.id
    assert len(reg.modes) == 2


def test_start_at_saddle_is_flagged(mix1):
    term = ascend(mix1.model, 1.75, mix1.controls())
    assert term.kind == "saddle_suspect"
    assert term.kind in TERMINAL_KINDS


def test_zeta_level_gain_1d(gauss1):
    tr = integrate_zeta(gauss1.model, 1.0, 0.05, gauss1.controls())
    assert tr.terminal.kind == "level_reached"
    assert gauss1.model.eval(tr.end) == pytest.approx(ZETA_1D_LEVEL, abs=1e-9)


def test_zeta_level_gain_2d(gauss2):
    tr = integrate_zeta(gauss2.model, [1.0, 0.0], 0.05, gauss2.controls())
    assert np.linalg.norm(tr.end) == pytest.approx(ZETA_2D_RADIUS, abs=1e-7)
    assert abs(tr.end[1]) <= 1e-12


def test_zeta_stops_short_of_unreachable_level(gauss1):
    tr = integrate_zeta(gauss1.model, 1.0, 1.0, gauss1.controls())
    assert tr.terminal.kind == "saddle_suspect"
    assert tr.terminal.hessian_definite
    assert abs(tr.end[0]) < 1e-2
    with pytest.raises(InputError):
        integrate_zeta(gauss1.model, 1.0, -0.1, gauss1.controls())


def test_start_outside_domain_rejected(gauss1):
    with pytest.raises(InputError):
        integrate_gamma(gauss1.model, 20.0, gauss1.controls())


def test_trajectory_csv(gauss2, tmp_path):
    tr = integrate_gamma(gauss2.model, [1.0, 1.0], gauss2.controls())
    tr.to_csv(tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "param,level,coord_0,coord_1"
    assert len(lines) == len(tr) + 1


@settings(max_examples=25, deadline=None)
@given(st.floats(-4.0, 7.5).filter(lambda v: abs(v - 1.75) > 1e-3))
def test_gamma_levels_monotone_mix1(x0):
    from modalflow.fixtures import get_fixture

    fx = get_fixture("D_mix1")
    for integrate in (integrate_gamma, integrate_xi):
        tr = integrate(fx.model, x0, fx.controls())
        assert np.all(np.diff(tr.levels) >= -1e-9)
        want = MIX1_LEFT_MODE if x0 < 1.75 else MIX1_RIGHT_MODE
        assert tr.end[0] == pytest.approx(want, abs=1e-6)


@settings(max_examples=20, deadline=None)
@given(st.floats(-3, 6), st.floats(-3, 4))
def test_zeta_level_identity_mix2(a, b):
    from modalflow.fixtures import get_fixture

    fx = get_fixture("D_mix2")
    c = fx.controls()
    x = np.array([a, b])
    f, g = fx.model.value_and_grad(x)
    if np.linalg.norm(g) < 0.05 * c.kappa1:
        return
    top = ascend(fx.model, x, c)
    gap = fx.model.eval(top.point) - f
    tr = integrate_zeta(fx.model, x, 0.5 * gap, c)
    assert np.max(np.abs(tr.levels - f - tr.params)) <= 1e-6
    assert np.max(np.abs(np.array([fx.model.eval(p) for p in tr.points]) - f - tr.params)) <= 1e-6
