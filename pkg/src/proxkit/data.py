"""Datasets: the correlated-Gaussian synthetic generator and regression CSV ingestion.

Randomness comes from numpy's PCG64 bit generator. The master seed is expanded
with :class:`numpy.random.SeedSequence` into three independent child streams,
one each for the planted solution, the design matrix and the noise, so that
changing ``m`` never perturbs the planted solution. Normal draws use numpy's
ziggurat sampler (``Generator.standard_normal``).
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import os
import struct
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

import numpy as np

from proxkit.core import ProxkitError
from proxkit.objective import LassoProblem

log = logging.getLogger(__name__)

MAGIC = b"PXG1"
_HEADER = struct.Struct("<4sQQQQ")


class DataError(ProxkitError):
    pass


class MissingFileError(DataError, FileNotFoundError):
    pass


class MissingColumnError(DataError, KeyError):
    def __str__(self):
        return str(self.args[0])


class NonNumericCellError(DataError, ValueError):
    def __init__(self, row: int, column: str, value: str, path=None):
        where = f"{path}: " if path else ""
        super().__init__(f"{where}non-numeric value {value!r} at row {row}, column {column!r}")
        self.row = row
        self.column = column


class ZeroVarianceError(DataError, ValueError):
    pass


@dataclass(frozen=True)
class SyntheticSpec:
    d: int
    m: int
    s: int
    seed: int
    rho: float = 0.5

    def __post_init__(self):
        if self.d < 1 or self.m < 1:
            raise ValueError("d and m must be positive")
        if not 0 <= self.s <= self.d:
            raise ValueError(f"sparsity s must satisfy 0 <= s <= d, got s={self.s}, d={self.d}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if not 0 <= self.rho < 1:
            raise ValueError("rho must lie in [0, 1)")
        if not (self.s <= self.d <= self.m):
            log.warning("spec %s is outside the intended regime s << d << m", self)

    def key(self) -> str:
        """Stable identity of the recipe, used for cache file names."""
        payload = json.dumps(
            {"d": self.d, "m": self.m, "s": self.s, "seed": self.seed, "rho": repr(float(self.rho))},
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    problem: LassoProblem
    ground_truth: Optional[np.ndarray] = None
    spec: Optional[SyntheticSpec] = None
    column_names: Optional[tuple] = None
    target_name: Optional[str] = None

    @property
    def A(self):
        return self.problem.A

    @property
    def b(self):
        return self.problem.b


def ar_correlation_cholesky(d: int, rho: float) -> np.ndarray:
    """Lower-triangular Q with Q Q^T = C, where C_ij = rho^|i-j|."""
    if not 0 <= rho < 1:
        raise ValueError("rho must lie in [0, 1)")
    idx = np.arange(d)
    C = rho ** np.abs(np.subtract.outer(idx, idx)).astype(np.float64)
    try:
        return np.linalg.cholesky(C)
    except np.linalg.LinAlgError as exc:
        raise DataError(f"correlation matrix is not positive definite (d={d}, rho={rho})") from exc


def _open_uniform(rng: np.random.Generator, n: int) -> np.ndarray:
    out = rng.random(n)
    while np.any(out == 0.0):
        zeros = out == 0.0
        out[zeros] = rng.random(int(zeros.sum()))
    return out


def generate_synthetic(spec: SyntheticSpec, alpha: float = 0.01) -> LabeledDataset:
    """Sparse planted solution, correlated Gaussian design, unit Gaussian noise."""
    x_stream, a_stream, noise_stream = (
        np.random.Generator(np.random.PCG64(s)) for s in np.random.SeedSequence(spec.seed).spawn(3)
    )
    x_star = np.zeros(spec.d)
    x_star[: spec.s] = _open_uniform(x_stream, spec.s)
    Q = ar_correlation_cholesky(spec.d, spec.rho)
    A = a_stream.standard_normal((spec.m, spec.d)) @ Q.T
    b = A @ x_star + noise_stream.standard_normal(spec.m)
    return LabeledDataset(LassoProblem(A, b, alpha), x_star, spec)


# -- binary cache -------------------------------------------------------------


def cache_dir() -> Path:
    return Path(os.environ.get("PROXKIT_CACHE", Path.home() / ".cache" / "proxkit"))


def write_binary(ds: LabeledDataset, path) -> Path:
    """Layout: b"PXG1", d, m, s, seed (uint64 LE), then A row-major, b, x* (float64 LE)."""
    spec = ds.spec
    if spec is None or ds.ground_truth is None:
        raise DataError("only synthetic datasets can be written to the binary cache format")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, spec.d, spec.m, spec.s, spec.seed))
        for arr in (ds.A, ds.b, ds.ground_truth):
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    return path


def read_binary(path, alpha: float = 0.01, rho: float = 0.5) -> LabeledDataset:
    path = Path(path)
    if not path.exists():
        raise MissingFileError(f"dataset file not found: {path}")
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise DataError(f"{path}: truncated header")
    magic, d, m, s, seed = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise DataError(f"{path}: bad magic {magic!r}")
    expected = _HEADER.size + 8 * (m * d + m + d)
    if len(raw) != expected:
        raise DataError(f"{path}: expected {expected} bytes, found {len(raw)}")
    body = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size).astype(np.float64)
    A = body[: m * d].reshape(m, d)
    b = body[m * d : m * d + m]
    x_star = body[m * d + m :]
    spec = SyntheticSpec(d, m, s, seed, rho)
    return LabeledDataset(LassoProblem(A, b, alpha), x_star.copy(), spec)


# -- CSV ingestion --------------------------------------------------------------


def load_csv(path, target_column: str, alpha: float = 0.01, log_target: bool = False) -> LabeledDataset:
    """Read a headed numeric CSV; ``target_column`` becomes b, every other column a feature.

    Row numbers in error messages count data rows from 1 (the header is not a row).
    """
    path = Path(path)
    if not path.exists():
        raise MissingFileError(f"CSV file not found: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if target_column not in header:
            raise MissingColumnError(f"{path}: target column {target_column!r} not in header {header}")
        rows = []
        for i, row in enumerate(reader, start=1):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"{path}: row {i} has {len(row)} fields, header has {len(header)}")
            values = []
            for name, cell in zip(header, row):
                try:
                    v = float(cell)
                except ValueError:
                    raise NonNumericCellError(i, name, cell, path) from None
                if not math.isfinite(v):
                    raise NonNumericCellError(i, name, cell, path)
                values.append(v)
            rows.append(values)
    if not rows:
        raise DataError(f"{path}: no data rows")
    table = np.array(rows, dtype=np.float64)
    t = header.index(target_column)
    features = [j for j in range(len(header)) if j != t]
    b = table[:, t]
    if log_target:
        if np.any(b <= 0):
            raise DataError("log transform needs a strictly positive target")
        b = np.log(b)
    A = table[:, features]
    return LabeledDataset(
        LassoProblem(A, b, alpha),
        column_names=tuple(header[j] for j in features),
        target_name=target_column,
    )


def write_csv(ds: LabeledDataset, path, target_column: Optional[str] = None) -> Path:
    """Inverse of :func:`load_csv`; floats are written with ``repr`` so they round-trip exactly."""
    path = Path(path)
    names = list(ds.column_names or [f"x{j + 1}" for j in range(ds.problem.d)])
    target = target_column or ds.target_name or "y"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(names + [target])
        for row, y in zip(ds.A, ds.b):
            w.writerow([repr(float(v)) for v in row] + [repr(float(y))])
    return path


@dataclass(frozen=True)
class StandardizationStats:
    feature_mean: np.ndarray
    feature_std: np.ndarray
    target_mean: float
    target_std: float


def standardize(ds: LabeledDataset, stats: Optional[StandardizationStats] = None):
    """Z-score every feature and the target with population (divisor m) statistics.

    Pass the ``stats`` returned for the training split to transform a test split
    with the same statistics.
    """
    A, b = ds.A, ds.b
    if stats is None:
        std = A.std(axis=0)
        names = ds.column_names or [f"x{j + 1}" for j in range(A.shape[1])]
        for j in np.flatnonzero(std == 0):
            raise ZeroVarianceError(f"feature column {names[j]!r} has zero variance")
        if b.std() == 0:
            raise ZeroVarianceError(f"target column {ds.target_name or 'b'!r} has zero variance")
        stats = StandardizationStats(A.mean(axis=0), std, float(b.mean()), float(b.std()))
    A_new = (A - stats.feature_mean) / stats.feature_std
    b_new = (b - stats.target_mean) / stats.target_std
    out = replace(ds, problem=LassoProblem(A_new, b_new, ds.problem.alpha))
    return out, stats


def train_test_split(ds: LabeledDataset, fraction: float, seed: int):
    """Random row partition; the train split gets floor(fraction * n) rows."""
    if not 0 < fraction < 1:
        raise ValueError("fraction must lie strictly between 0 and 1")
    n = ds.problem.m
    n_train = math.floor(fraction * n)
    if n_train == 0 or n_train == n:
        raise DataError(f"fraction {fraction} on {n} rows leaves an empty split")
    perm = np.random.default_rng(seed).permutation(n)
    parts = []
    for idx in (np.sort(perm[:n_train]), np.sort(perm[n_train:])):
        p = LassoProblem(ds.A[idx], ds.b[idx], ds.problem.alpha)
        parts.append(replace(ds, problem=p))
    return parts[0], parts[1]
