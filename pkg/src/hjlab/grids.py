"""Spatial grids on [0, R] and functions sampled on them.

Grids are either uniform or geometrically graded toward x = 0, where the
singular steady state and the boundary layer live.  All objects are frozen
after construction (arrays are marked read-only) and safe to share.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Grid:
    """Strictly increasing nodes with nodes[0] == 0."""

    nodes: np.ndarray
    ratio: float = 1.0  # geometric grading descriptor, 1.0 = uniform

    def __post_init__(self):
        nodes = _freeze(np.asarray(self.nodes))
        object.__setattr__(self, "nodes", nodes)
        if nodes.ndim != 1 or nodes.size < 3:
            raise ValueError("grid needs at least 3 nodes")
        if nodes[0] != 0.0:
            raise ValueError("grid must start at x = 0")
        if np.any(np.diff(nodes) <= 0):
            raise ValueError("grid nodes must be strictly increasing")
        if not (0.0 < self.ratio <= 1.0):
            raise ValueError("grading ratio must lie in (0, 1]")

    @property
    def R(self) -> float:
        return float(self.nodes[-1])

    @property
    def n(self) -> int:
        return self.nodes.size

    @property
    def spacing(self) -> np.ndarray:
        return np.diff(self.nodes)

    @staticmethod
    def uniform(R: float, n: int) -> "Grid":
        if R <= 0 or n < 3:
            raise ValueError("need R > 0 and n >= 3")
        return Grid(np.linspace(0.0, R, n))

    @staticmethod
    def graded(R: float, h_min: float, ratio: float = 0.97,
               h_max: float | None = None) -> "Grid":
        """Geometric mesh: finest cell h_min at x=0, widths grow by 1/ratio.

        h_max (default R/50) caps the coarse end so the far field keeps a
        sane resolution.
        """
        if R <= 0 or h_min <= 0 or not (0.0 < ratio <= 1.0):
            raise ValueError("need R > 0, h_min > 0, ratio in (0, 1]")
        if h_max is None:
            h_max = R / 50.0
        widths = []
        x, h = 0.0, float(h_min)
        while x < R:
            w = min(h, h_max)
            widths.append(w)
            x += w
            h /= ratio
        # land the last node exactly on R (a short final cell is harmless)
        overshoot = x - R
        if overshoot > 0:
            widths[-1] -= overshoot
            if widths[-1] <= 1e-12 * R:
                widths.pop()
        nodes = np.concatenate([[0.0], np.cumsum(widths)])
        nodes[-1] = R
        return Grid(nodes, ratio=ratio)


@dataclass(frozen=True)
class GridFunction:
    """Values sampled on a grid, stamped with a time.

    The stamp is the physical time t for solver output and the similarity
    time s for transformed data; which one is meant is determined by
    context (see steady.to_similarity / from_similarity).
    """

    grid: Grid
    values: np.ndarray
    t: float = 0.0
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        values = _freeze(np.asarray(self.values))
        object.__setattr__(self, "values", values)
        if values.shape != self.grid.nodes.shape:
            raise ValueError("values length must match grid")
        if not np.all(np.isfinite(values)):
            raise ValueError("grid function carries non-finite values")

    @property
    def x(self) -> np.ndarray:
        return self.grid.nodes

    def with_values(self, values: np.ndarray, t: float | None = None) -> "GridFunction":
        return GridFunction(self.grid, values, self.t if t is None else t)

    @staticmethod
    def sample(grid: Grid, f, t: float = 0.0) -> "GridFunction":
        return GridFunction(grid, np.asarray([f(x) for x in grid.nodes]), t)
