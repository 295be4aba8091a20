"""Regression-plus-projection inverse prediction, in latent or raw field space.

A linear model ``features . phi = d`` is fitted offline.  Given a target ``d``,
an initial guess (the solved field at a nearby plate length, or its encoding)
is moved to the closest point on the hyperplane ``{x : x . phi = d}``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Dataset, ScaleTransform
from .models import EncDec
from .nn import Mlp
from .solver import Field, SolverConfig, solve_sor

RIDGE = 1e-10
_COND_LIMIT = 1e12


class DegenerateModelError(ValueError):
    pass


@dataclass
class RegressionModel:
    phi: np.ndarray
    includes_bias: bool = False

    def features(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        return np.hstack([x, np.ones((x.shape[0], 1))]) if self.includes_bias else x

    def predict(self, x):
        return self.features(x) @ self.phi


@dataclass
class InverseResult:
    z_hat: np.ndarray
    objective: float
    init_d: float | None = None


def _solve_gram(g, rhs):
    g = np.asarray(g)
    if np.linalg.cond(g) > _COND_LIMIT:
        g = g + RIDGE * max(np.trace(g) / len(g), 1.0) * np.eye(len(g))
    return np.linalg.solve(g, rhs)


def fit_regression(features, labels, includes_bias: bool = False) -> RegressionModel:
    """Minimum-norm least squares for ``features @ phi = labels``.

    Tall systems use the normal equations, wide ones the dual form
    ``phi = X^T (X X^T)^-1 y``; a tiny ridge is added when the Gram matrix is
    numerically singular.
    """
    x = np.atleast_2d(np.asarray(features, dtype=np.float64))
    y = np.asarray(labels, dtype=np.float64).reshape(-1)
    if x.shape[0] != y.size:
        raise ValueError(f"{x.shape[0]} feature rows but {y.size} labels")
    if not np.any(x):
        raise DegenerateModelError("feature matrix is all zeros")
    if includes_bias:
        x = np.hstack([x, np.ones((x.shape[0], 1))])
    m, p = x.shape
    if m >= p:
        phi = _solve_gram(x.T @ x, x.T @ y)
    else:
        phi = x.T @ _solve_gram(x @ x.T, y)
    return RegressionModel(phi, includes_bias)


def invert_to_hyperplane(x0, model: RegressionModel, d: float) -> InverseResult:
    """Closest point to ``x0`` satisfying ``x . phi = d`` (bias folded into the offset)."""
    phi = np.asarray(model.phi, dtype=np.float64)
    if model.includes_bias:
        phi, d = phi[:-1], d - phi[-1]
    norm2 = float(phi @ phi)
    if norm2 == 0.0:
        raise DegenerateModelError("regression coefficients are all zero")
    x0 = np.asarray(x0, dtype=np.float64)
    x_hat = x0 - ((x0 @ phi - d) / norm2) * phi
    return InverseResult(x_hat, abs(float(x_hat @ phi) - d))


def initial_d(d_true: float, offset: float = 0.2, a: float = 2.0) -> float:
    """Initial guess ``offset`` away from ``d_true``, stepping toward the middle of (0, 1)."""
    d_init = d_true + offset if d_true <= 0.5 else d_true - offset
    if not 0 < d_init < a:
        raise ValueError(f"initial estimate d={d_init} outside (0, {a})")
    return d_init


def initial_estimate(ds: Dataset, d_true: float, offset: float = 0.2, solver_cfg: SolverConfig | None = None, encdec: EncDec | None = None, scale: float = 0.9):
    """Solved field at the offset plate length, or its latent code when ``encdec`` is given.

    Returns ``(d_init, field_or_code)``.
    """
    d_init = initial_d(d_true, offset, ds.a)
    field, _ = solve_sor(ds.spec_for(d_init), ds.grid, solver_cfg)
    if encdec is None:
        return d_init, field
    return d_init, encdec.encode(ScaleTransform(scale).apply(field.values))


def reconstruct_latent(z_hat, dec: Mlp, scale: float = 0.9) -> np.ndarray:
    """Decode a latent code into a field in physical units."""
    z_hat = np.asarray(z_hat, dtype=np.float64)
    if z_hat.shape[-1] != dec.n_in:
        raise ValueError(f"latent code has size {z_hat.shape[-1]}, decoder expects {dec.n_in}")
    return ScaleTransform(scale).invert(dec(z_hat))


def fit_latent_regression(ds: Dataset, encdec: EncDec, scale: float = 0.9, rows=None) -> RegressionModel:
    """Regress d on the encodings of the labelled samples (all samples if ``rows`` is None)."""
    rows = ds.supervised_indices if rows is None else rows
    z = encdec.encode(ScaleTransform(scale).apply(ds.fields[rows]))
    return fit_regression(z, ds.d_values[rows])


def fit_raw_regression(ds: Dataset, rows=None) -> RegressionModel:
    rows = ds.supervised_indices if rows is None else rows
    return fit_regression(ds.fields[rows], ds.d_values[rows])


def inverse_latent(ds: Dataset, encdec: EncDec, model: RegressionModel, d: float, offset: float = 0.2, solver_cfg=None, scale: float = 0.9):
    """Encode the initial estimate, project onto ``z . phi = d``, decode."""
    d_init, z0 = initial_estimate(ds, d, offset, solver_cfg, encdec, scale)
    res = invert_to_hyperplane(z0, model, d)
    res.init_d = d_init
    return reconstruct_latent(res.z_hat, encdec.decoder, scale), res


def inverse_raw_space(ds: Dataset, model: RegressionModel, d: float, offset: float = 0.2, solver_cfg=None):
    """Project the initial field itself onto ``V . phi = d``; no decoder involved."""
    d_init, field = initial_estimate(ds, d, offset, solver_cfg)
    res = invert_to_hyperplane(field.values, model, d)
    res.init_d = d_init
    return res.z_hat, res
