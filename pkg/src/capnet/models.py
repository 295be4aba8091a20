"""Networks trained on solved capacitor fields.

* encoder-decoder: field -> latent code -> field (unsupervised)
* boundary-decoder: plate length d -> latent code -> field, sharing the decoder
* joint: both branches trained together on one decoder
* coordinate nets: (x, y) -> V fitted at a single d, either on data (plain NN)
  or on boundary data plus a finite-difference Laplace penalty (PINN)
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dataset import Dataset, ScaleTransform
from .geometry import CapacitorSpec, GridSpec, NodeClass, classify_nodes
from .nn import IDENTITY, TANH, Adam, Mlp, backward, forward, init_xavier, load_mlp, make_rng, save_mlp
from .solver import SolverConfig, solve_sor

log = logging.getLogger(__name__)


class TrainingDivergenceError(RuntimeError):
    def __init__(self, model, epoch, loss):
        super().__init__(f"{model}: loss became {loss} at epoch {epoch}")
        self.model = model
        self.epoch = epoch


@dataclass(frozen=True)
class TrainConfig:
    lam: float = 1.0  # weight of the boundary-decoder term in joint training
    lr: float = 1e-3
    epochs: int = 2000
    seed: int = 1
    latent_dim: int = 8
    hidden: int = 64
    boundary_hidden: int = 16
    boundary_linear: bool = False  # literal linear boundary map, no tanh
    scale: float = 0.9
    coord_hidden: int = 32
    coord_epochs: int = 2000
    coord_lr: float = 1e-3
    pinn_mu: float = 1.0
    neumann_weight: float = 1.0

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lambda must be non-negative")
        if min(self.latent_dim, self.hidden, self.boundary_hidden, self.coord_hidden) < 1:
            raise ValueError("layer widths must be at least 1")
        if self.epochs < 0 or self.coord_epochs < 0:
            raise ValueError("epoch counts must be non-negative")


@dataclass
class EncDec:
    encoder: Mlp
    decoder: Mlp

    @property
    def latent_dim(self) -> int:
        return self.encoder.n_out

    def encode(self, x):
        return self.encoder(x)

    def decode(self, z):
        return self.decoder(z)

    def reconstruct(self, x):
        return self.decoder(self.encoder(x))


@dataclass
class BoundaryNet:
    net: Mlp

    def __post_init__(self):
        if self.net.n_in != 1:
            raise ValueError("boundary net takes a single scalar input")

    def __call__(self, d):
        d = np.asarray(d, dtype=np.float64)
        return self.net(d.reshape(-1, 1) if d.ndim else d.reshape(1))


@dataclass
class CoordNet:
    net: Mlp
    trained_d: float

    def __call__(self, x, y):
        pts = np.column_stack([np.ravel(x), np.ravel(y)])
        return self.net(pts)[:, 0].reshape(np.shape(x))

    def predict(self, grid: GridSpec) -> np.ndarray:
        return self.net(grid.coordinates())[:, 0]


def _init_encdec(n: int, cfg: TrainConfig, rng) -> EncDec:
    enc = init_xavier([n, cfg.hidden, cfg.latent_dim], [TANH, TANH], rng)
    dec = init_xavier([cfg.latent_dim, cfg.hidden, n], [TANH, TANH], rng)
    return EncDec(enc, dec)


def _init_boundary(cfg: TrainConfig, rng) -> BoundaryNet:
    act = IDENTITY if cfg.boundary_linear else TANH
    return BoundaryNet(init_xavier([1, cfg.boundary_hidden, cfg.latent_dim], [act, act], rng))


def boundary_forward(bnet: BoundaryNet, dec: Mlp, d):
    """Decoded field for plate length(s) ``d``, in the scaled training units."""
    return dec(bnet(d))


def encdec_loss(model: EncDec, x):
    """Reconstruction SSE over the rows of ``x`` and gradients (encoder params + decoder params)."""
    z, tape_e = forward(model.encoder, x)
    y, tape_d = forward(model.decoder, z)
    diff = y - x
    g_dec, gz = backward(model.decoder, tape_d, 2.0 * diff)
    g_enc, _ = backward(model.encoder, tape_e, gz, need_input_grad=False)
    return float(np.sum(diff * diff)), g_enc + g_dec


def boundary_loss(bnet: BoundaryNet, dec: Mlp, d, x):
    """SSE of decoded boundary predictions against ``x``; gradients (boundary params + decoder params)."""
    z, tape_b = forward(bnet.net, np.asarray(d, dtype=np.float64).reshape(-1, 1))
    y, tape_d = forward(dec, z)
    diff = y - x
    g_dec, gz = backward(dec, tape_d, 2.0 * diff)
    g_b, _ = backward(bnet.net, tape_b, gz, need_input_grad=False)
    return float(np.sum(diff * diff)), g_b + g_dec


def joint_loss(model: EncDec, bnet: BoundaryNet, x_all, d_sup, x_sup, lam: float):
    """Reconstruction SSE over ``x_all`` (skipped when None) plus ``lam`` times the boundary SSE.

    Gradients are ordered encoder, decoder, boundary net.
    """
    n_enc = len(model.encoder.params())
    n_b = len(bnet.net.params())
    if x_all is not None:
        loss, g = encdec_loss(model, x_all)
        g_enc, g_dec = g[:n_enc], g[n_enc:]
    else:
        loss = 0.0
        g_enc = [np.zeros_like(p) for p in model.encoder.params()]
        g_dec = [np.zeros_like(p) for p in model.decoder.params()]
    g_b = [np.zeros_like(p) for p in bnet.net.params()]
    if lam > 0:
        lb, gb = boundary_loss(bnet, model.decoder, d_sup, x_sup)
        loss += lam * lb
        g_b = [lam * g for g in gb[:n_b]]
        g_dec = [gd + lam * g for gd, g in zip(g_dec, gb[n_b:])]
    return loss, g_enc + g_dec + g_b


def _check_finite(name, epoch, loss):
    if not np.isfinite(loss):
        raise TrainingDivergenceError(name, epoch, loss)


def train_encdec(ds: Dataset, cfg: TrainConfig):
    """Full-batch Adam on the autoencoder over every sample. Returns ``(model, loss_history)``."""
    x = ScaleTransform(cfg.scale).apply(ds.fields)
    model = _init_encdec(ds.grid.n, cfg, make_rng(cfg.seed))
    params = model.encoder.params() + model.decoder.params()
    opt = Adam(params, lr=cfg.lr)
    history = np.empty(cfg.epochs)
    for epoch in range(cfg.epochs):
        loss, grads = encdec_loss(model, x)
        _check_finite("enc-dec", epoch, loss)
        history[epoch] = loss
        opt.step(params, grads)
    return model, history


def train_joint(ds: Dataset, cfg: TrainConfig, use_encoder: bool = True):
    """Train encoder, decoder and boundary net on one summed objective.

    The loss is ``sum_all ||V - dec(enc(V))||^2 + lam * sum_sup ||V - dec(bnet(d))||^2``.
    With ``use_encoder=False`` only the boundary branch is trained (unit weight),
    on the supervised samples alone.  Returns ``(EncDec, BoundaryNet, history)``.
    """
    sup = ds.supervised_indices
    lam = cfg.lam if use_encoder else 1.0
    if lam > 0 and sup.size == 0:
        raise ValueError("boundary branch needs at least one supervised sample")
    scale = ScaleTransform(cfg.scale)
    x_all = scale.apply(ds.fields)
    x_sup = x_all[sup]
    d_sup = ds.d_values[sup]

    rng = make_rng(cfg.seed)
    model = _init_encdec(ds.grid.n, cfg, rng)
    bnet = _init_boundary(cfg, rng)
    params = model.encoder.params() + model.decoder.params() + bnet.net.params()
    opt = Adam(params, lr=cfg.lr)
    history = np.empty(cfg.epochs)
    for epoch in range(cfg.epochs):
        loss, grads = joint_loss(model, bnet, x_all if use_encoder else None, d_sup, x_sup, lam)
        _check_finite("enc-dec+bou-dec" if use_encoder else "bou-dec", epoch, loss)
        history[epoch] = loss
        opt.step(params, grads)
    return model, bnet, history


def train_boundary_decoder(ds: Dataset, cfg: TrainConfig):
    """Supervised-only boundary-decoder (no encoder term)."""
    return train_joint(ds, cfg, use_encoder=False)


# --- coordinate networks -------------------------------------------------


def pde_residual(fieldfn, points, h, bounds=(1.0, 1.0)) -> np.ndarray:
    """Five-point Laplacian of ``fieldfn(x, y)`` at each point.

    ``h`` is a scalar step or an ``(hx, hy)`` pair.  Every point must keep a
    margin of one step inside ``[0, bounds[0]] x [0, bounds[1]]``.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    hx, hy = (h, h) if np.ndim(h) == 0 else h
    slack = 1e-12 * max(bounds)
    x, y = pts[:, 0], pts[:, 1]
    if np.any(x - hx < -slack) or np.any(x + hx > bounds[0] + slack) or np.any(y - hy < -slack) or np.any(
        y + hy > bounds[1] + slack
    ):
        raise ValueError("collocation point closer than one step to the quadrant boundary")
    f = lambda px, py: np.asarray(fieldfn(px, py), dtype=np.float64)
    c = f(x, y)
    return (f(x + hx, y) + f(x - hx, y) - 2 * c) / hx**2 + (f(x, y + hy) + f(x, y - hy) - 2 * c) / hy**2


def stencil_loss(net: Mlp, points, offsets, coeffs, target=None):
    """Mean square of ``sum_s c_s * net(p + offset_s) - target`` over points, with gradients.

    Gradients flow through every shifted evaluation, so finite-difference
    operators (Laplacian, normal derivative) can be penalised directly.
    """
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    outs = []
    r = np.zeros(n) if target is None else -np.asarray(target, dtype=np.float64)
    for off, c in zip(offsets, coeffs):
        out, tape = forward(net, points + np.asarray(off))
        outs.append(tape)
        r = r + c * out[:, 0]
    dr = 2.0 * r / n
    grads = None
    for tape, c in zip(outs, coeffs):
        g, _ = backward(net, tape, (c * dr)[:, None], need_input_grad=False)
        grads = g if grads is None else [a + b for a, b in zip(grads, g)]
    return float(np.mean(r * r)), grads


def _laplace_stencil(hx, hy):
    offsets = [(0.0, 0.0), (hx, 0.0), (-hx, 0.0), (0.0, hy), (0.0, -hy)]
    coeffs = [-2.0 / hx**2 - 2.0 / hy**2, 1 / hx**2, 1 / hx**2, 1 / hy**2, 1 / hy**2]
    return offsets, coeffs


@dataclass
class PinnProblem:
    """Point sets and targets for one coordinate-net fit at fixed d."""

    data_points: np.ndarray
    data_values: np.ndarray
    collocation: np.ndarray
    neumann_x: np.ndarray
    neumann_y: np.ndarray
    hx: float
    hy: float

    def loss(self, net: Mlp, mu: float, nu: float):
        total, grads = stencil_loss(net, self.data_points, [(0.0, 0.0)], [1.0], self.data_values)
        terms = []
        if mu > 0 and len(self.collocation):
            terms.append((mu, self.collocation, *_laplace_stencil(self.hx, self.hy)))
        if nu > 0:
            c = 1.0 / (2 * self.hx)
            if len(self.neumann_x):
                terms.append((nu, self.neumann_x, [(self.hx, 0.0), (-self.hx, 0.0)], [c, -c]))
            c = 1.0 / (2 * self.hy)
            if len(self.neumann_y):
                terms.append((nu, self.neumann_y, [(0.0, self.hy), (0.0, -self.hy)], [c, -c]))
        for weight, pts, offs, coeffs in terms:
            val, g = stencil_loss(net, pts, offs, coeffs)
            total += weight * val
            grads = [a + weight * b for a, b in zip(grads, g)]
        return total, grads


def pinn_problem(spec: CapacitorSpec, grid: GridSpec, truth: np.ndarray, supervise_all: bool = False) -> PinnProblem:
    classes = classify_nodes(spec, grid)
    coords = grid.coordinates()
    dirichlet = (classes == NodeClass.INNER_PLATE) | (classes == NodeClass.OUTER_WALL)
    data = np.ones_like(dirichlet) if supervise_all else dirichlet
    return PinnProblem(
        data_points=coords[data],
        data_values=truth[data],
        collocation=coords[classes == NodeClass.INTERIOR],
        neumann_x=coords[classes == NodeClass.SYMMETRY_X],
        neumann_y=coords[classes == NodeClass.SYMMETRY_Y],
        hx=grid.hx,
        hy=grid.hy,
    )


def _init_coord(cfg: TrainConfig) -> Mlp:
    h = cfg.coord_hidden
    return init_xavier([2, h, h, 1], [TANH, TANH, IDENTITY], make_rng(cfg.seed))


def _fit_coord(name, problem: PinnProblem, cfg: TrainConfig, mu: float, nu: float):
    net = _init_coord(cfg)
    params = net.params()
    opt = Adam(params, lr=cfg.coord_lr)
    history = np.empty(cfg.coord_epochs)
    for epoch in range(cfg.coord_epochs):
        loss, grads = problem.loss(net, mu, nu)
        _check_finite(name, epoch, loss)
        history[epoch] = loss
        opt.step(params, grads)
    return net, history


def train_nn_fixed(spec: CapacitorSpec, grid: GridSpec, d_train: float, cfg: TrainConfig, solver_cfg=None):
    """Plain coordinate regression of the SOR field at ``d_train`` (mean squared error over all nodes)."""
    spec = spec.with_d(d_train)
    truth, _ = solve_sor(spec, grid, solver_cfg)
    problem = pinn_problem(spec, grid, truth.values, supervise_all=True)
    net, history = _fit_coord("nn", problem, cfg, 0.0, 0.0)
    return CoordNet(net, float(d_train)), history


def train_pinn(
    spec: CapacitorSpec,
    grid: GridSpec,
    d_train: float,
    cfg: TrainConfig,
    solver_cfg: SolverConfig | None = None,
    supervise_all: bool = False,
):
    """Coordinate net fitted to Dirichlet data plus Laplace and symmetry penalties.

    Data covers plate and outer-wall nodes only; interior nodes carry the
    five-point residual (weight ``pinn_mu``) and symmetry edges a central
    normal-derivative penalty (weight ``neumann_weight``).
    """
    spec = spec.with_d(d_train)
    truth, _ = solve_sor(spec, grid, solver_cfg)
    problem = pinn_problem(spec, grid, truth.values, supervise_all=supervise_all)
    net, history = _fit_coord("pinn", problem, cfg, cfg.pinn_mu, cfg.neumann_weight)
    return CoordNet(net, float(d_train)), history


def interior_residual_ms(model: CoordNet, spec: CapacitorSpec, grid: GridSpec) -> float:
    """Mean-square five-point residual over interior collocation nodes."""
    classes = classify_nodes(spec.with_d(model.trained_d), grid)
    pts = grid.coordinates()[classes == NodeClass.INTERIOR]
    r = pde_residual(model, pts, (grid.hx, grid.hy), bounds=(grid.a / 2, grid.b / 2))
    return float(np.mean(r * r))


# --- checkpoints ----------------------------------------------------------


def save_models(directory, **roles: Mlp) -> Path:
    """Write one checkpoint per role plus ``manifest.json`` mapping role -> file."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = {}
    for role, net in sorted(roles.items()):
        fname = f"{role}.capm"
        save_mlp(net, directory / fname)
        manifest[role] = fname
    (directory / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return directory / "manifest.json"


def load_models(directory) -> dict[str, Mlp]:
    directory = Path(directory)
    manifest = json.loads((directory / "manifest.json").read_text())
    return {role: load_mlp(directory / fname) for role, fname in manifest.items()}
