import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from modalflow import Box, Grid, InputError
from modalflow.experiments import basin_with_margin, random_interior_starts
from modalflow.flow import ModeRegistry


def test_box_basics():
    b = Box.from_pairs([[-1.0, 3.0], [0.0, 3.0]])
    assert b.dim == 2
    assert b.diameter == pytest.approx(5.0)
    assert b.contains([0.0, 0.0]) and not b.contains([4.0, 0.0])
    assert b.to_pairs() == [[-1.0, 3.0], [0.0, 3.0]]
    with pytest.raises(InputError):
        Box((1.0,), (0.0,))


def test_grid_cells_and_round_trip():
    g = Grid(Box((0.0, 0.0), (1.0, 2.0)), 4)
    assert g.shape == (4, 4)
    assert np.allclose(g.spacing, [0.25, 0.5])
    assert g.cell_of([0.0, 0.0]) == (0, 0)
    assert g.cell_of([1.0, 2.0]) == (3, 3)
    assert g.cell_of([1.5, 0.0]) is None
    assert Grid.from_dict(g.to_dict()) == g
    with pytest.raises(InputError):
        Grid(g.box, 1)


@settings(max_examples=50, deadline=None)
@given(st.floats(-5, 5), st.floats(0.1, 10), st.integers(2, 300), st.floats(0, 1))
def test_cell_contains_point(lo, width, cells, u):
    g = Grid(Box((lo,), (lo + width,)), cells)
    x = lo + u * width
    (i,) = g.cell_of(x)
    left = lo + i * g.spacing[0]
    assert left - 1e-9 <= x <= left + g.spacing[0] + 1e-9


def test_starts_are_interior_and_labeled(mix2):
    c = mix2.controls()
    s = random_interior_starts(mix2.model, c, 20, seed=3)
    assert len(s.points) == 20 and len(s.expected) == 20
    assert np.all(mix2.model.eval_many(s.points) > 0.05 * c.fmax)
    again = random_interior_starts(mix2.model, c, 20, seed=3)
    assert np.array_equal(s.points, again.points)


def test_margin_rejects_point_near_saddle(mix1):
    c = mix1.controls()
    reg = ModeRegistry(c.merge_radius)
    assert basin_with_margin(mix1.model, np.array([1.75 + 1e-3]), c, reg) is None
    assert basin_with_margin(mix1.model, np.array([0.5]), c, reg) is not None
