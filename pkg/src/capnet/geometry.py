"""Quadrant geometry of the long rectangular coaxial capacitor.

The inner plate sits on the x axis centred at the origin, the outer conductor is
a rectangle of width ``a`` and height ``b``.  Mirror symmetry about both axes
means only the first quadrant ``[0, a/2] x [0, b/2]`` is solved.

Nodes are flattened row-major: ``k = j * nx + i`` with ``j`` indexing y.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace

import numpy as np

# relative slack when comparing node coordinates against the plate edge
_EDGE_TOL = 1e-12


class NodeClass(enum.IntEnum):
    INTERIOR = 0
    INNER_PLATE = 1  # Dirichlet v0
    OUTER_WALL = 2  # Dirichlet 0
    SYMMETRY_X = 3  # dV/dx = 0 on x = 0
    SYMMETRY_Y = 4  # dV/dy = 0 on y = 0 beyond the plate

    @property
    def is_dirichlet(self) -> bool:
        return self in (NodeClass.INNER_PLATE, NodeClass.OUTER_WALL)


@dataclass(frozen=True)
class CapacitorSpec:
    """Outer width/height ``a``, ``b``, plate length ``d`` and plate potential ``v0``."""

    d: float = 0.5
    a: float = 2.0
    b: float = 2.0
    v0: float = 1.0

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ValueError(f"outer dimensions must be positive, got a={self.a}, b={self.b}")
        if not math.isfinite(self.v0):
            raise ValueError(f"v0 must be finite, got {self.v0}")
        if not 0 < self.d < self.a:
            raise ValueError(f"plate length must satisfy 0 < d < a={self.a}, got d={self.d}")

    def with_d(self, d: float) -> "CapacitorSpec":
        return replace(self, d=float(d))


@dataclass(frozen=True)
class GridSpec:
    nx: int = 41
    ny: int = 41
    a: float = 2.0
    b: float = 2.0

    def __post_init__(self):
        if self.nx < 3 or self.ny < 3:
            raise ValueError(f"grid needs at least 3x3 nodes, got {self.nx}x{self.ny}")
        if not (self.a > 0 and self.b > 0):
            raise ValueError("quadrant extents must be positive")

    @classmethod
    def for_spec(cls, spec: CapacitorSpec, nx: int = 41, ny: int = 41) -> "GridSpec":
        return cls(nx=nx, ny=ny, a=spec.a, b=spec.b)

    @property
    def n(self) -> int:
        return self.nx * self.ny

    @property
    def shape(self) -> tuple[int, int]:
        return (self.ny, self.nx)

    @property
    def hx(self) -> float:
        return (self.a / 2) / (self.nx - 1)

    @property
    def hy(self) -> float:
        return (self.b / 2) / (self.ny - 1)

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.nx) * self.hx

    @property
    def y(self) -> np.ndarray:
        return np.arange(self.ny) * self.hy

    def coordinates(self) -> np.ndarray:
        """(N, 2) array of node coordinates in flattening order."""
        xx, yy = np.meshgrid(self.x, self.y)
        return np.column_stack([xx.ravel(), yy.ravel()])

    def refined(self) -> "GridSpec":
        return replace(self, nx=2 * self.nx - 1, ny=2 * self.ny - 1)


def classify_nodes(spec: CapacitorSpec, grid: GridSpec) -> np.ndarray:
    """Return the boundary class of every node as a flat ``int8`` array of length N.

    Dirichlet classes win over Neumann ones at corners, so the origin is always
    a plate node and ``(0, b/2)`` is an outer-wall node.
    """
    if not math.isclose(spec.a, grid.a) or not math.isclose(spec.b, grid.b):
        raise ValueError("grid extents do not match capacitor dimensions")
    if spec.d >= spec.a:
        raise ValueError("plate touches the outer wall")

    classes = np.full(grid.shape, NodeClass.INTERIOR, dtype=np.int8)
    classes[0, :] = NodeClass.SYMMETRY_Y
    classes[:, 0] = NodeClass.SYMMETRY_X

    # integer index keeps refined grids consistent at coincident nodes
    on_plate = np.arange(grid.nx) * grid.hx <= spec.d / 2 + _EDGE_TOL * spec.a
    classes[0, on_plate] = NodeClass.INNER_PLATE

    classes[:, -1] = NodeClass.OUTER_WALL
    classes[-1, :] = NodeClass.OUTER_WALL
    return classes.ravel()


def dirichlet_values(spec: CapacitorSpec, classes: np.ndarray) -> np.ndarray:
    """Prescribed potential per node (zero away from the plate)."""
    values = np.zeros(classes.shape, dtype=np.float64)
    values[classes == NodeClass.INNER_PLATE] = spec.v0
    return values


def class_counts(classes: np.ndarray) -> dict[NodeClass, int]:
    return {c: int(np.count_nonzero(classes == c)) for c in NodeClass}
