"""Cluster tree of a density by a descending level sweep with union-find.

Cells of the connectivity grid are added in order of decreasing density and
joined to their face neighbours. A merge of two sizeable components during
the sweep is a split point of the tree, read upwards: below the merge level
there is one cluster, above it two. Levels are taken on a uniform grid, so
every split level is known up to one level step; nodes report the bracketing
interval and use its midpoint as their death level.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .controls import Controls
from .density import DensityModel
from .errors import InputError
from .flow import Mode, ModeRegistry
from .levelset import argmax_on_component, grid_values, label_components

MIN_CELLS = 2


@dataclass(frozen=True)
class TreeNode:
    """One cluster of the tree, alive for levels in ``[birth_level, death_level)``.

    ``representative_cells`` are flat grid indices of the component just above
    ``birth_level``; ``merge_interval`` brackets ``death_level`` for internal
    nodes.
    """

    id: int
    parent: int | None
    children: tuple[int, ...]
    birth_level: float
    death_level: float
    representative_cells: np.ndarray = field(repr=False)
    top_cell: int = field(repr=False, default=-1)
    mode: Mode | None = None
    merge_interval: tuple[float, float] | None = None

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def alive_at(self, t: float) -> bool:
        return self.birth_level <= t < self.death_level


@dataclass(frozen=True)
class ClusterTree:
    nodes: tuple[TreeNode, ...]
    root_ids: tuple[int, ...]
    levels: np.ndarray
    controls: Controls = field(repr=False, compare=False)
    model: DensityModel = field(repr=False, compare=False)

    def __getitem__(self, i: int) -> TreeNode:
        return self.nodes[i]

    def alive(self, t: float) -> list[TreeNode]:
        return [n for n in self.nodes if n.alive_at(t)]

    def component_count(self, t: float) -> int:
        """Number of clusters at level ``t`` according to the tree."""
        return len(self.alive(t))

    def to_dict(self) -> dict:
        def mode(m):
            return None if m is None else {"id": m.id, "location": [float(v) for v in m.location],
                                           "level": float(m.level)}

        return {
            "levels": {"top": float(self.levels[0]), "bottom": float(self.levels[-1]),
                       "count": int(len(self.levels))},
            "roots": list(self.root_ids),
            "nodes": [{
                "id": n.id, "parent": n.parent, "children": list(n.children),
                "birth_level": float(n.birth_level), "death_level": float(n.death_level),
                "merge_interval": None if n.merge_interval is None else [float(v) for v in n.merge_interval],
                "n_cells": int(len(n.representative_cells)), "mode": mode(n.mode),
            } for n in self.nodes],
        }

    def to_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    def render(self) -> str:
        """Indented text view, one node per line."""
        lines = []

        def walk(i, depth):
            n = self.nodes[i]
            text = f"{'  ' * depth}node {n.id}: levels [{n.birth_level:.6g}, {n.death_level:.6g})"
            if n.mode is not None:
                text += f" mode {n.mode.id} at ({', '.join(f'{v:.6g}' for v in n.mode.location)})"
            lines.append(text)
            for c in n.children:
                walk(c, depth + 1)

        for r in self.root_ids:
            walk(r, 0)
        return "\n".join(lines) + "\n"


class _UnionFind:
    def __init__(self, n):
        self.parent = np.full(n, -1, dtype=np.int64)
        self.size = np.zeros(n, dtype=np.int64)

    def add(self, i):
        self.parent[i] = i
        self.size[i] = 1

    def find(self, i):
        root = i
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[i] != root:
            self.parent[i], i = root, self.parent[i]
        return root

    def union(self, a, b):
        if self.size[a] < self.size[b]:
            a, b = b, a
        self.parent[b] = a
        self.size[a] += self.size[b]
        return a


@dataclass
class _Proto:
    top_cell: int
    created_step: int | None = None
    children: list = field(default_factory=list)
    split_step: int | None = None  # level index of the merge into the parent, seen from above
    parent: "_Proto | None" = None


def _strides(shape):
    return np.cumprod((1,) + shape[::-1][:-1])[::-1]


def build_cluster_tree(model: DensityModel, controls: Controls, level_count: int = 256,
                       registry: ModeRegistry | None = None) -> ClusterTree:
    """Sweep ``level_count`` uniform levels from the maximum density down to ``level_floor``.

    Raises :class:`GridTooSmall` when the lowest level reaches the grid boundary.
    """
    if level_count < 8:
        raise InputError("level_count must be >= 8")
    grid = controls.grid
    shape = grid.shape
    vals = grid_values(model, grid).ravel()
    levels = np.linspace(controls.fmax, controls.level_floor, level_count)
    label_components(model, levels[-1], grid)  # shell check
    registry = ModeRegistry(controls.merge_radius) if registry is None else registry

    order = np.argsort(-vals, kind="stable")
    strides = _strides(shape)
    idx = np.array(np.unravel_index(np.arange(len(vals)), shape)).T
    uf = _UnionFind(len(vals))
    proto_of: dict[int, _Proto] = {}
    pos = 0
    for step, level in enumerate(levels):
        while pos < len(order) and vals[order[pos]] >= level:
            c = int(order[pos])
            pos += 1
            uf.add(c)
            root = c
            p = _Proto(top_cell=c)
            proto_of[c] = p
            for ax in range(len(shape)):
                for sgn in (-1, 1):
                    j = idx[c, ax] + sgn
                    if j < 0 or j >= shape[ax]:
                        continue
                    nb = c + sgn * int(strides[ax])
                    if uf.parent[nb] < 0:
                        continue
                    r_nb = uf.find(nb)
                    root = uf.find(root)
                    if r_nb == root:
                        continue
                    a, b = proto_of[root], proto_of[r_nb]
                    big_a, big_b = uf.size[root] >= MIN_CELLS, uf.size[r_nb] >= MIN_CELLS
                    if big_a and big_b:
                        merged = _merge(a, b, step, vals)
                    else:
                        merged = a if big_a or (not big_b and vals[a.top_cell] >= vals[b.top_cell]) else b
                    new_root = uf.union(root, r_nb)
                    proto_of[new_root] = merged
                    root = new_root
    roots = sorted({uf.find(int(c)) for c in order[:pos]}, key=lambda r: vals[proto_of[r].top_cell], reverse=True)
    return _assemble(model, controls, levels, [proto_of[r] for r in roots], registry)


def _merge(a: _Proto, b: _Proto, step: int, vals) -> _Proto:
    # several merges in one level step make one node with several children
    for host, guest in ((a, b), (b, a)):
        if host.created_step == step and host.children:
            guest.split_step, guest.parent = step, host
            host.children.append(guest)
            return host
    top = a.top_cell if vals[a.top_cell] >= vals[b.top_cell] else b.top_cell
    node = _Proto(top_cell=top, created_step=step, children=[a, b])
    a.split_step = b.split_step = step
    a.parent = b.parent = node
    return node


def _assemble(model, controls, levels, roots, registry) -> ClusterTree:
    vals = grid_values(model, controls.grid).ravel()
    flat = []
    stack = [(r, None) for r in reversed(roots)]
    while stack:
        p, parent_id = stack.pop()
        flat.append((p, parent_id))
        pid = len(flat) - 1
        kids = sorted(p.children, key=lambda c: vals[c.top_cell], reverse=True)
        for k in reversed(kids):
            stack.append((k, pid))
    ids = {id(p): i for i, (p, _) in enumerate(flat)}
    centers = controls.grid.centers
    nodes = []
    for i, (p, parent_id) in enumerate(flat):
        if p.split_step is None:
            birth = float(levels[-1])
            cells_level = float(levels[-1])
        else:
            hi, lo = float(levels[p.split_step - 1]), float(levels[p.split_step])
            birth = 0.5 * (hi + lo)
            cells_level = hi
        lab = label_components(model, cells_level, controls.grid)
        label = lab.labels.ravel()[p.top_cell]
        cells = np.flatnonzero(lab.labels.ravel() == label) if label >= 0 else np.array([p.top_cell])
        if p.children:
            hi, lo = float(levels[p.created_step - 1]), float(levels[p.created_step])
            death, interval, mode = 0.5 * (hi + lo), (lo, hi), None
        else:
            top = argmax_on_component(model, centers[p.top_cell], cells_level, controls)
            mode = registry.register(top, model.eval(top))
            death, interval = float(mode.level), None
        children = tuple(ids[id(c)] for c in sorted(p.children, key=lambda c: vals[c.top_cell], reverse=True))
        nodes.append(TreeNode(id=i, parent=parent_id, children=children, birth_level=birth, death_level=death,
                              representative_cells=cells, top_cell=int(p.top_cell), mode=mode,
                              merge_interval=interval))
    root_ids = tuple(i for i, (_, parent) in enumerate(flat) if parent is None)
    return ClusterTree(tuple(nodes), root_ids, levels, controls, model)


def leaf_clusters(tree: ClusterTree) -> list[TreeNode]:
    return [n for n in tree.nodes if n.is_leaf]


def cluster_of(tree: ClusterTree, x, t: float) -> TreeNode | None:
    """The node alive at level ``t`` whose component contains ``x``; ``None`` when ``f(x) < t``."""
    model, controls = tree.model, tree.controls
    x = model._check(x)
    if controls.grid.cell_of(x) is None:
        raise InputError(f"point {x.tolist()} is outside the grid")
    if not (tree.levels[-1] <= t <= tree.levels[0]):
        raise InputError(f"level {t} outside the swept range [{tree.levels[-1]}, {tree.levels[0]}]")
    if model.eval(x) < t:
        return None
    lab = label_components(model, t, controls.grid)
    label = lab.label_at(x)
    if label is None:
        return None
    flat = lab.labels.ravel()
    for n in tree.alive(t):
        if flat[n.top_cell] == label:
            return n
    return None
