"""Corpora of solved fields indexed by plate length, and their binary file format.

File layout (little-endian)::

    header  "CAPD" | version u32 | nx u32 | ny u32 | m u32 | a f64 | b f64 | v0 f64
    record  d f64 | supervised u8 | N x f64 field values (row-major)
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from .geometry import CapacitorSpec, GridSpec
from .solver import Field, SolverConfig, solve_sor

MAGIC = b"CAPD"
VERSION = 1
HEADER = struct.Struct("<4sIIIIddd")
RECORD_HEAD = struct.Struct("<dB")


class DatasetFormatError(ValueError):
    pass


class BadMagicError(DatasetFormatError):
    pass


class VersionMismatchError(DatasetFormatError):
    pass


class TruncatedPayloadError(DatasetFormatError):
    pass


class SolverDivergenceError(RuntimeError):
    def __init__(self, d, report):
        super().__init__(f"SOR did not converge for d={d}: {report}")
        self.d = d
        self.report = report


@dataclass
class Sample:
    d: float
    field: Field


@dataclass
class Dataset:
    grid: GridSpec
    samples: list[Sample]
    a: float = 2.0
    b: float = 2.0
    v0: float = 1.0
    supervised_mask: np.ndarray = dc_field(default=None)

    def __post_init__(self):
        if not self.samples:
            raise ValueError("a dataset needs at least one sample")
        if self.supervised_mask is None:
            self.supervised_mask = np.zeros(len(self.samples), dtype=bool)
        self.supervised_mask = np.asarray(self.supervised_mask, dtype=bool)
        if self.supervised_mask.shape != (len(self.samples),):
            raise ValueError("supervised mask must have one entry per sample")
        for s in self.samples:
            if s.field.grid != self.grid:
                raise ValueError("all samples must share the dataset grid")

    @property
    def m(self) -> int:
        return len(self.samples)

    @property
    def d_values(self) -> np.ndarray:
        return np.array([s.d for s in self.samples])

    @property
    def fields(self) -> np.ndarray:
        """(m, N) matrix of field values."""
        return np.stack([s.field.values for s in self.samples])

    @property
    def supervised_indices(self) -> np.ndarray:
        return np.flatnonzero(self.supervised_mask)

    def spec_for(self, d: float) -> CapacitorSpec:
        return CapacitorSpec(d=d, a=self.a, b=self.b, v0=self.v0)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.grid == other.grid
            and (self.a, self.b, self.v0) == (other.a, other.b, other.v0)
            and np.array_equal(self.supervised_mask, other.supervised_mask)
            and np.array_equal(self.d_values, other.d_values)
            and np.array_equal(self.fields, other.fields)
        )


@dataclass(frozen=True)
class ScaleTransform:
    """Shrinks fields into the open tanh range before training."""

    scale: float = 0.9

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError("scale must be positive")

    def apply(self, x):
        return np.asarray(x) * self.scale

    def invert(self, x):
        return np.asarray(x) / self.scale


def generate_dataset(spec: CapacitorSpec, grid: GridSpec, d_values, solver_cfg: SolverConfig | None = None) -> Dataset:
    """Solve one field per plate length, in the order given."""
    samples = []
    for d in d_values:
        field, report = solve_sor(spec.with_d(float(d)), grid, solver_cfg)
        if not report.converged:
            raise SolverDivergenceError(float(d), report)
        samples.append(Sample(float(d), field))
    return Dataset(grid, samples, a=spec.a, b=spec.b, v0=spec.v0)


def split_supervised(ds: Dataset, n_sup: int, seed: int) -> Dataset:
    """Copy of ``ds`` with exactly ``n_sup`` samples drawn (without replacement) as labelled."""
    if not 0 <= n_sup <= ds.m:
        raise ValueError(f"cannot mark {n_sup} of {ds.m} samples as supervised")
    rng = np.random.default_rng(seed)
    mask = np.zeros(ds.m, dtype=bool)
    mask[rng.choice(ds.m, size=n_sup, replace=False)] = True
    return Dataset(ds.grid, list(ds.samples), a=ds.a, b=ds.b, v0=ds.v0, supervised_mask=mask)


def default_training_d(exclude=(0.3, 0.4, 0.5, 0.6, 0.65, 0.7, 0.8), n: int = 81, lo: float = 0.1, hi: float = 0.9):
    """Uniform grid on [lo, hi] with the held-out evaluation values removed."""
    grid = np.linspace(lo, hi, n)
    keep = np.all(np.abs(grid[:, None] - np.asarray(exclude)[None, :]) > 1e-9, axis=1)
    return [float(v) for v in grid[keep]]


def to_bytes(ds: Dataset) -> bytes:
    parts = [HEADER.pack(MAGIC, VERSION, ds.grid.nx, ds.grid.ny, ds.m, ds.a, ds.b, ds.v0)]
    for s, sup in zip(ds.samples, ds.supervised_mask):
        parts.append(RECORD_HEAD.pack(s.d, int(sup)))
        parts.append(s.field.values.astype("<f8").tobytes())
    return b"".join(parts)


def from_bytes(buf: bytes) -> Dataset:
    if len(buf) < 4 or buf[:4] != MAGIC:
        raise BadMagicError(f"not a dataset file (magic {buf[:4]!r})")
    if len(buf) < HEADER.size:
        raise TruncatedPayloadError("header truncated")
    _, version, nx, ny, m, a, b, v0 = HEADER.unpack_from(buf, 0)
    if version != VERSION:
        raise VersionMismatchError(f"dataset version {version}, expected {VERSION}")
    grid = GridSpec(nx=nx, ny=ny, a=a, b=b)
    rec_size = RECORD_HEAD.size + 8 * grid.n
    if len(buf) < HEADER.size + m * rec_size:
        raise TruncatedPayloadError(f"expected {HEADER.size + m * rec_size} bytes, got {len(buf)}")
    samples, mask = [], []
    off = HEADER.size
    for _ in range(m):
        d, sup = RECORD_HEAD.unpack_from(buf, off)
        off += RECORD_HEAD.size
        values = np.frombuffer(buf, dtype="<f8", count=grid.n, offset=off).astype(np.float64)
        off += 8 * grid.n
        samples.append(Sample(d, Field(grid, values)))
        mask.append(bool(sup))
    return Dataset(grid, samples, a=a, b=b, v0=v0, supervised_mask=np.array(mask))


def save(ds: Dataset, path) -> None:
    Path(path).write_bytes(to_bytes(ds))


def load(path) -> Dataset:
    return from_bytes(Path(path).read_bytes())
