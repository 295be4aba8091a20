"""Error tables against fresh SOR solves, CSV reports and heatmap export."""
from __future__ import annotations

import dataclasses
import hashlib
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dataset as dsmod
from .dataset import Dataset, ScaleTransform, default_training_d, generate_dataset, split_supervised
from .geometry import CapacitorSpec, GridSpec
from .inverse import fit_latent_regression, fit_raw_regression, inverse_latent, inverse_raw_space
from .models import TrainConfig, boundary_forward, train_boundary_decoder, train_encdec, train_joint, train_nn_fixed, train_pinn
from .solver import Field, SolverConfig, solve_sor

log = logging.getLogger(__name__)

RAW, ENCDEC, BOUDEC, JOINT, NN, PINN = "raw space", "enc-dec", "bou-dec", "enc-dec+bou-dec", "NN", "PINN"
TABLE1_METHODS = (RAW, ENCDEC, BOUDEC, JOINT)
TABLE2_METHODS = (NN, PINN, JOINT)


class ConfigError(ValueError):
    pass


def sse(pred, truth) -> float:
    pred = np.asarray(pred, dtype=np.float64).reshape(-1)
    truth = np.asarray(truth, dtype=np.float64).reshape(-1)
    if pred.shape != truth.shape:
        raise ValueError(f"length mismatch: {pred.size} vs {truth.size}")
    diff = pred - truth
    return float(diff @ diff)


@dataclass
class SseReport:
    method: str
    d_values: list[float]
    seeds: list[int]
    per_seed: np.ndarray  # (len(seeds), len(d_values))

    @property
    def per_d(self) -> np.ndarray:
        return self.per_seed.mean(axis=0)

    @property
    def mean(self) -> float:
        return float(self.per_d.mean())


def _floats(text):
    return [float(t) for t in text.split(",") if t.strip()]


def _ints(text):
    return [int(t) for t in text.split(",") if t.strip()]


_LIST_PARSERS = {"seeds": _ints, "table1_d": _floats, "table2_d": _floats}


@dataclass
class ExperimentConfig:
    nx: int = 43  # 41 puts every test d exactly on a plate-edge node
    ny: int = 43
    a: float = 2.0
    b: float = 2.0
    v0: float = 1.0
    omega: float = 1.8
    tol: float = 1e-8
    max_iters: int = 100_000
    n_train: int = 81
    d_lo: float = 0.1
    d_hi: float = 0.9
    n_sup: int = 5
    offset: float = 0.2
    d_fixed: float = 0.55
    seeds: list[int] = field(default_factory=lambda: [1, 2, 3])
    table1_d: list[float] = field(default_factory=lambda: [0.3, 0.4, 0.5, 0.6, 0.7, 0.8])
    table2_d: list[float] = field(default_factory=lambda: [0.6, 0.65, 0.7])
    lam: float = 1.0
    lr: float = 3e-3
    epochs: int = 6000
    latent_dim: int = 8
    hidden: int = 64
    boundary_hidden: int = 16
    boundary_linear: bool = False
    scale: float = 0.9
    coord_hidden: int = 32
    coord_epochs: int = 5000
    coord_lr: float = 3e-3
    pinn_mu: float = 1.0
    neumann_weight: float = 1.0
    out_dir: str = ""

    @property
    def spec(self) -> CapacitorSpec:
        return CapacitorSpec(d=self.d_fixed, a=self.a, b=self.b, v0=self.v0)

    @property
    def grid(self) -> GridSpec:
        return GridSpec(self.nx, self.ny, self.a, self.b)

    @property
    def solver(self) -> SolverConfig:
        return SolverConfig(omega=self.omega, tol=self.tol, max_iters=self.max_iters)

    @property
    def held_out(self) -> list[float]:
        return sorted(set(self.table1_d) | set(self.table2_d))

    def train_config(self, seed: int) -> TrainConfig:
        names = {f.name for f in dataclasses.fields(TrainConfig)}
        kw = {k: v for k, v in dataclasses.asdict(self).items() if k in names}
        return TrainConfig(seed=seed, **kw)

    def training_d(self) -> list[float]:
        return default_training_d(self.held_out, self.n_train, self.d_lo, self.d_hi)

    def to_text(self, include_out_dir: bool = True) -> str:
        lines = []
        for f in dataclasses.fields(self):
            if f.name == "out_dir" and not include_out_dir:
                continue
            v = getattr(self, f.name)
            if isinstance(v, list):
                v = ",".join(repr(x) for x in v)
            lines.append(f"{f.name}={v}")
        return "\n".join(lines) + "\n"

    def config_hash(self) -> str:
        return hashlib.sha256(self.to_text(include_out_dir=False).encode()).hexdigest()[:16]

    @classmethod
    def from_text(cls, text: str, **overrides) -> "ExperimentConfig":
        """Parse ``key=value`` lines; ``#`` starts a comment."""
        types = {f.name: f.type for f in dataclasses.fields(cls)}
        kw = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in types:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            try:
                kw[key] = _parse_value(key, types[key], value)
            except ValueError as exc:
                raise ConfigError(f"line {lineno}: bad value for {key}: {value!r}") from exc
        kw.update(overrides)
        try:
            cfg = cls(**kw)
            cfg.validate()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return cfg

    @classmethod
    def load(cls, path, **overrides) -> "ExperimentConfig":
        return cls.from_text(Path(path).read_text(), **overrides)

    def validate(self) -> None:
        self.grid
        self.solver
        self.train_config(self.seeds[0] if self.seeds else 0)
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        overlap = set(self.training_d()) & set(self.held_out)
        if overlap:
            raise ConfigError(f"test plate lengths also in training set: {sorted(overlap)}")
        if not 0 <= self.n_sup <= len(self.training_d()):
            raise ConfigError(f"n_sup={self.n_sup} exceeds corpus size")


def _parse_value(key, typ, value):
    if key in _LIST_PARSERS:
        return _LIST_PARSERS[key](value)
    if typ in ("bool", bool):
        if value.lower() in ("1", "true", "yes"):
            return True
        if value.lower() in ("0", "false", "no"):
            return False
        raise ValueError(value)
    if typ in ("int", int):
        return int(value)
    if typ in ("float", float):
        return float(value)
    return value


class Experiment:
    """Corpus, ground-truth solves and trained models for one config, built lazily per seed."""

    def __init__(self, cfg: ExperimentConfig):
        cfg.validate()
        self.cfg = cfg
        self._corpus = None
        self._truth = {}
        self._latent = {}
        self._joint = {}
        self._coord = {}

    @property
    def corpus(self) -> Dataset:
        if self._corpus is None:
            c = self.cfg
            self._corpus = generate_dataset(c.spec, c.grid, c.training_d(), c.solver)
        return self._corpus

    def dataset(self, seed: int) -> Dataset:
        return split_supervised(self.corpus, self.cfg.n_sup, seed)

    def truth(self, d: float) -> np.ndarray:
        """Fresh SOR solve at exactly ``d`` (never a corpus member)."""
        if d not in self._truth:
            field, report = solve_sor(self.cfg.spec.with_d(d), self.cfg.grid, self.cfg.solver)
            if not report.converged:
                raise dsmod.SolverDivergenceError(d, report)
            self._truth[d] = field.values
        return self._truth[d]

    def joint(self, seed: int):
        if seed not in self._joint:
            model, bnet, _ = train_joint(self.dataset(seed), self.cfg.train_config(seed))
            self._joint[seed] = (model, bnet)
        return self._joint[seed]

    def joint_predict(self, seed: int, d: float) -> np.ndarray:
        model, bnet = self.joint(seed)
        return ScaleTransform(self.cfg.scale).invert(boundary_forward(bnet, model.decoder, d))

    def table1_predictors(self, seed: int) -> dict:
        ds = self.dataset(seed)
        tcfg = self.cfg.train_config(seed)
        c = self.cfg
        raw_model = fit_raw_regression(ds)
        encdec, _ = train_encdec(ds, tcfg)
        latent_model = fit_latent_regression(ds, encdec, c.scale)
        bmodel, bnet, _ = train_boundary_decoder(ds, tcfg)
        unscale = ScaleTransform(c.scale).invert
        return {
            RAW: lambda d: inverse_raw_space(ds, raw_model, d, c.offset, c.solver)[0],
            ENCDEC: lambda d: inverse_latent(ds, encdec, latent_model, d, c.offset, c.solver, c.scale)[0],
            BOUDEC: lambda d: unscale(boundary_forward(bnet, bmodel.decoder, d)),
            JOINT: lambda d: self.joint_predict(seed, d),
        }

    def coord_nets(self, seed: int):
        """(NN, PINN) coordinate nets fitted at ``d_fixed``, cached per seed."""
        if seed not in self._coord:
            c = self.cfg
            tcfg = c.train_config(seed)
            nn, _ = train_nn_fixed(c.spec, c.grid, c.d_fixed, tcfg, c.solver)
            pinn, _ = train_pinn(c.spec, c.grid, c.d_fixed, tcfg, c.solver)
            self._coord[seed] = (nn, pinn)
        return self._coord[seed]

    def table2_predictors(self, seed: int) -> dict:
        nn, pinn = self.coord_nets(seed)
        grid = self.cfg.grid
        return {
            NN: lambda d: nn.predict(grid),
            PINN: lambda d: pinn.predict(grid),
            JOINT: lambda d: self.joint_predict(seed, d),
        }

    def _run(self, methods, d_values, make_predictors, name):
        seeds = list(self.cfg.seeds)
        table = {m: np.zeros((len(seeds), len(d_values))) for m in methods}
        for si, seed in enumerate(seeds):
            log.info("%s: seed %d", name, seed)
            preds = make_predictors(seed)
            for m in methods:
                for di, d in enumerate(d_values):
                    table[m][si, di] = sse(preds[m](d), self.truth(d))
        reports = {m: SseReport(m, list(d_values), seeds, table[m]) for m in methods}
        if self.cfg.out_dir:
            out = Path(self.cfg.out_dir)
            out.mkdir(parents=True, exist_ok=True)
            write_csv(reports.values(), out / f"{name}.csv", self.cfg.config_hash())
        return reports


def run_table1(cfg: ExperimentConfig, experiment: Experiment | None = None) -> dict[str, SseReport]:
    """raw space / enc-dec / bou-dec / enc-dec+bou-dec SSE at each test d, per seed."""
    exp = experiment or Experiment(cfg)
    return exp._run(TABLE1_METHODS, cfg.table1_d, exp.table1_predictors, "table1")


def run_table2(cfg: ExperimentConfig, experiment: Experiment | None = None) -> dict[str, SseReport]:
    """Fixed-d coordinate nets (NN, PINN, both fitted at ``d_fixed``) against the joint model."""
    exp = experiment or Experiment(cfg)
    return exp._run(TABLE2_METHODS, cfg.table2_d, exp.table2_predictors, "table2")


def csv_text(reports, config_hash: str) -> str:
    lines = [f"# config_hash={config_hash}", "method,d,seed,sse"]
    for rep in reports:
        for si, seed in enumerate(rep.seeds):
            for di, d in enumerate(rep.d_values):
                lines.append(f"{rep.method},{float(d)!r},{seed},{rep.per_seed[si, di]:.12e}")
    return "\n".join(lines) + "\n"


def write_csv(reports, path, config_hash: str) -> Path:
    path = Path(path)
    with open(path, "w", newline="\n") as fh:
        fh.write(csv_text(reports, config_hash))
    return path


def read_csv(path) -> list[tuple[str, float, int, float]]:
    rows = []
    for line in Path(path).read_text().splitlines():
        if not line or line.startswith("#") or line == "method,d,seed,sse":
            continue
        method, d, seed, value = line.split(",")
        rows.append((method, float(d), int(seed), float(value)))
    return rows


def export_heatmap(field: Field, path, fmt: str = "pgm") -> Path:
    """Write a field as a binary PGM (min-max scaled, first row is y=0) or a full-precision CSV."""
    path = Path(path)
    v = field.as_grid()
    if fmt == "pgm":
        lo, hi = float(v.min()), float(v.max())
        scaled = np.zeros_like(v) if hi == lo else (v - lo) / (hi - lo) * 255.0
        pixels = np.clip(np.rint(scaled), 0, 255).astype(np.uint8)
        header = f"P5\n{field.grid.nx} {field.grid.ny}\n255\n".encode("ascii")
        path.write_bytes(header + pixels.tobytes())
    elif fmt == "csv":
        np.savetxt(path, v, fmt="%.17g", delimiter=",")
    else:
        raise ValueError(f"unknown heatmap format {fmt!r}")
    return path


def read_pgm(path) -> np.ndarray:
    """Inverse of the PGM writer; returns a (height, width) uint8 array."""
    buf = Path(path).read_bytes()
    magic, dims, maxval, rest = buf.split(b"\n", 3)
    if magic != b"P5" or maxval != b"255":
        raise ValueError("not an 8-bit binary PGM")
    w, h = (int(t) for t in dims.split())
    return np.frombuffer(rest, dtype=np.uint8, count=w * h).reshape(h, w)
