"""Finite-difference Laplace solves on the classified quadrant grid.

Two independent routes share the 5-point stencil with mirror (ghost node)
closure on the symmetry edges: in-place SOR sweeps, and a dense direct solve
used as an oracle on small grids.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np

from .geometry import CapacitorSpec, GridSpec, NodeClass, classify_nodes, dirichlet_values

MAX_DIRECT_NODES = 10_000


class SingularSystemError(np.linalg.LinAlgError):
    """Raised when the stencil system has no unique solution (no Dirichlet node)."""


@dataclass(frozen=True)
class SolverConfig:
    omega: float = 1.8
    tol: float = 1e-8
    max_iters: int = 100_000

    def __post_init__(self):
        if not 0 < self.omega < 2:
            raise ValueError(f"relaxation factor must lie in (0, 2), got {self.omega}")
        if not self.tol > 0:
            raise ValueError(f"tolerance must be positive, got {self.tol}")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")


@dataclass(frozen=True)
class SolveReport:
    iterations: int
    final_update: float
    converged: bool


@dataclass
class Field:
    """Potential values on the quadrant grid, flattened row-major (y outer)."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if self.values.size != self.grid.n:
            raise ValueError(f"expected {self.grid.n} values, got {self.values.size}")

    def as_grid(self) -> np.ndarray:
        return self.values.reshape(self.grid.shape)


@numba.njit(cache=True)
def _sor_sweeps(v, classes, omega, tol, max_iters, hx, hy):
    ny, nx = v.shape
    cx = hy * hy / (2.0 * (hx * hx + hy * hy))
    cy = hx * hx / (2.0 * (hx * hx + hy * hy))
    change = 0.0
    for it in range(1, max_iters + 1):
        change = 0.0
        for j in range(ny):
            for i in range(nx):
                c = classes[j, i]
                if c == 1 or c == 2:
                    continue
                east = v[j, i + 1]
                north = v[j + 1, i]
                west = v[j, i + 1] if i == 0 else v[j, i - 1]
                south = v[j + 1, i] if j == 0 else v[j - 1, i]
                target = cx * (east + west) + cy * (north + south)
                delta = omega * (target - v[j, i])
                v[j, i] += delta
                if abs(delta) > change:
                    change = abs(delta)
        if change <= tol:
            return it, change, True
    return max_iters, change, False


def _check_classes(classes, grid: GridSpec) -> np.ndarray:
    classes = np.asarray(classes, dtype=np.int8).reshape(grid.shape)
    dirichlet = (classes == NodeClass.INNER_PLATE) | (classes == NodeClass.OUTER_WALL)
    if not dirichlet.any():
        raise SingularSystemError("no Dirichlet node: potential is only defined up to a constant")
    if not (dirichlet[:, -1].all() and dirichlet[-1, :].all()):
        raise ValueError("nodes on x = a/2 and y = b/2 must be Dirichlet")
    return classes


def solve_classified_sor(classes, fixed, grid: GridSpec, cfg: SolverConfig | None = None):
    """SOR on an arbitrary node classification; ``fixed`` holds Dirichlet values."""
    cfg = cfg or SolverConfig()
    classes = _check_classes(classes, grid)
    v = np.where(
        (classes == NodeClass.INNER_PLATE) | (classes == NodeClass.OUTER_WALL),
        np.asarray(fixed, dtype=np.float64).reshape(grid.shape),
        0.0,
    )
    iters, change, ok = _sor_sweeps(v, classes, cfg.omega, cfg.tol, cfg.max_iters, grid.hx, grid.hy)
    return Field(grid, v.ravel()), SolveReport(int(iters), float(change), bool(ok))


def solve_sor(spec: CapacitorSpec, grid: GridSpec, cfg: SolverConfig | None = None):
    """Lexicographic SOR. Returns ``(field, report)``; non-convergence is reported, not raised."""
    classes = classify_nodes(spec, grid)
    return solve_classified_sor(classes, dirichlet_values(spec, classes), grid, cfg)


def assemble_system(classes, fixed, grid: GridSpec):
    """Dense matrix/rhs of the 5-point system with mirrored ghost nodes."""
    n = grid.n
    if n > MAX_DIRECT_NODES:
        raise ValueError(f"dense solve limited to {MAX_DIRECT_NODES} nodes, grid has {n}")
    classes = _check_classes(classes, grid).reshape(-1)
    nx, ny = grid.nx, grid.ny
    wx = 1.0 / grid.hx**2
    wy = 1.0 / grid.hy**2
    A = np.zeros((n, n))
    rhs = np.zeros(n)
    fixed = np.asarray(fixed, dtype=np.float64).reshape(-1)
    for k in range(n):
        j, i = divmod(k, nx)
        if NodeClass(classes[k]).is_dirichlet:
            A[k, k] = 1.0
            rhs[k] = fixed[k]
            continue
        A[k, k] = -2.0 * (wx + wy)
        A[k, k + 1] += wx
        A[k, k + 1 if i == 0 else k - 1] += wx
        A[k, k + nx] += wy
        A[k, k + nx if j == 0 else k - nx] += wy
    return A, rhs


def solve_classified_direct(classes, fixed, grid: GridSpec) -> Field:
    A, rhs = assemble_system(classes, fixed, grid)
    try:
        # LAPACK gesv: LU with partial pivoting
        values = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularSystemError("stencil system is singular; is any node Dirichlet?") from exc
    if not np.all(np.isfinite(values)):
        raise SingularSystemError("direct solve produced non-finite values")
    pinned = np.diag(A) == 1.0
    pinned &= np.count_nonzero(A, axis=1) == 1
    values[pinned] = rhs[pinned]
    return Field(grid, values)


def solve_direct(spec: CapacitorSpec, grid: GridSpec) -> Field:
    classes = classify_nodes(spec, grid)
    return solve_classified_direct(classes, dirichlet_values(spec, classes), grid)


def laplacian_residual(field: Field, classes) -> float:
    """Largest |discrete Laplacian| over interior nodes, in units of V / length^2."""
    v = field.as_grid()
    grid = field.grid
    inner = np.asarray(classes).reshape(grid.shape)[1:-1, 1:-1] == NodeClass.INTERIOR
    if not inner.any():
        return 0.0
    lap = (v[1:-1, 2:] + v[1:-1, :-2] - 2 * v[1:-1, 1:-1]) / grid.hx**2 + (
        v[2:, 1:-1] + v[:-2, 1:-1] - 2 * v[1:-1, 1:-1]
    ) / grid.hy**2
    return float(np.max(np.abs(lap[inner])))


def field_volume(field: Field) -> float:
    """Discrete integral of the potential over the quadrant.

    Every node carries weight ``area / N`` so a uniform unit field integrates
    to the quadrant area exactly.
    """
    grid = field.grid
    area = (grid.a / 2) * (grid.b / 2)
    return float(field.values.sum() * area / grid.n)
