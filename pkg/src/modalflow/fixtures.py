"""Canonical test densities with their domains.

``D_mix1`` is a symmetric 1D bimodal mixture (equal mode heights); ``D_mix2``
is a 2D two-component mixture where one component has a non-scalar
covariance, so the two modes have different heights.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .controls import Controls
from .density import GaussianMixture
from .errors import InputError
from .grid import Box


@dataclass(frozen=True)
class Fixture:
    name: str
    model: GaussianMixture
    box: Box

    def controls(self, **overrides) -> Controls:
        return _controls(self.name, tuple(sorted(overrides.items())))

    def spec(self) -> dict:
        return self.model.to_dict()


def _build() -> dict[str, Fixture]:
    out = {
        "D_gauss1": Fixture("D_gauss1", GaussianMixture.standard(1), Box((-8.0,), (8.0,))),
        "D_gauss2": Fixture("D_gauss2", GaussianMixture.standard(2), Box((-8.0, -8.0), (8.0, 8.0))),
        "D_mix1": Fixture("D_mix1", GaussianMixture([0.5, 0.5], [[0.0], [3.5]], [[[1.0]], [[1.0]]]),
                          Box((-8.0,), (11.5,))),
        "D_mix2": Fixture("D_mix2", GaussianMixture([0.5, 0.5], [[0.0, 0.0], [3.0, 1.0]],
                                                    [np.eye(2), np.diag([1.5, 0.5])]),
                          Box((-8.0, -8.0), (13.0, 9.0))),
    }
    return out


FIXTURES = _build()


def get_fixture(name: str) -> Fixture:
    try:
        return FIXTURES[name]
    except KeyError:
        raise InputError(f"unknown fixture {name!r}; known: {sorted(FIXTURES)}") from None


@lru_cache(maxsize=None)
def _controls(name: str, overrides: tuple) -> Controls:
    fx = FIXTURES[name]
    return Controls.for_model(fx.model, box=fx.box, **dict(overrides))
