"""Tabular dataset handling: CSV ingestion, synthetic generation, scaling, splits.

The central type is :class:`Dataset`, an immutable bundle of a feature matrix,
binary labels and binomial denominators.  Synthetic data comes from
:class:`DgpSpec`, which pins the generating coefficients and the seed so every
draw is reproducible bit for bit.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .numerics import sigmoid

__all__ = [
    "Dataset",
    "DgpSpec",
    "Standardizer",
    "CsvFormatError",
    "ConstantColumnError",
    "load_csv",
    "generate_dgp",
    "fit_standardizer",
    "apply_standardizer",
    "invert_standardizer",
    "split",
    "save_dgp_spec",
    "load_dgp_spec",
]

FEATURE_LAWS = ("standard_normal",)


class CsvFormatError(ValueError):
    """Malformed CSV content; the message carries the 1-based row/column."""


class ConstantColumnError(ValueError):
    """A feature column has zero variance and cannot be standardized."""


@dataclass(frozen=True)
class Dataset:
    """Design matrix ``X`` (n x p), labels ``y`` in {0,1}, denominators ``m``.

    ``m`` holds the binomial denominators (all ones for Bernoulli rows).
    Instances are immutable and safe to share across threads.
    """

    X: np.ndarray
    y: np.ndarray
    m: np.ndarray = None  # type: ignore[assignment]
    feature_names: tuple[str, ...] | None = None

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        elif X.ndim != 2:
            raise ValueError(f"X must be 2-D, got shape {X.shape}")
        y = np.asarray(self.y)
        m = np.ones(len(y), dtype=int) if self.m is None else np.asarray(self.m)
        if not np.all(np.isfinite(X)):
            raise ValueError("X contains non-finite values")
        if X.shape[0] != y.shape[0]:
            raise ValueError(f"X has {X.shape[0]} rows but y has {y.shape[0]}")
        if y.ndim != 1 or not np.all((y == 0) | (y == 1)):
            raise ValueError("labels must all be exactly 0 or 1")
        if m.shape != y.shape or not np.all(m >= 1):
            raise ValueError("binomial denominators m must be >= 1, one per row")
        if self.feature_names is not None and len(self.feature_names) != X.shape[1]:
            raise ValueError("feature_names length does not match column count")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y.astype(int))
        object.__setattr__(self, "m", m.astype(int))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def take(self, idx: np.ndarray) -> "Dataset":
        """Row subset (used by split); preserves feature names."""
        return Dataset(self.X[idx], self.y[idx], self.m[idx], self.feature_names)


@dataclass(frozen=True)
class DgpSpec:
    """Data generating process: logistic labels over i.i.d. covariate draws.

    ``beta_true`` is the full coefficient vector, intercept first.
    """

    beta_true: np.ndarray
    n: int
    seed: int
    feature_law: str = "standard_normal"

    def __post_init__(self):
        beta = np.asarray(self.beta_true, dtype=float)
        if beta.ndim != 1 or beta.size < 1 or not np.all(np.isfinite(beta)):
            raise ValueError("beta_true must be a finite 1-D vector (intercept first)")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.feature_law not in FEATURE_LAWS:
            raise ValueError(f"unknown feature_law {self.feature_law!r}")
        object.__setattr__(self, "beta_true", beta)

    @property
    def p(self) -> int:
        return self.beta_true.size - 1


@dataclass(frozen=True)
class Standardizer:
    """Per-column affine transform to zero mean, unit population sd."""

    means: np.ndarray
    scales: np.ndarray

    def __post_init__(self):
        means = np.asarray(self.means, dtype=float)
        scales = np.asarray(self.scales, dtype=float)
        if means.shape != scales.shape or means.ndim != 1:
            raise ValueError("means and scales must be 1-D of equal length")
        if np.any(scales <= 0):
            raise ValueError("all scales must be > 0")
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "scales", scales)


def load_csv(path, label_column: int = -1, delimiter: str = ",",
             header: bool = False) -> Dataset:
    """Read a delimited text file into a Dataset with m_i = 1.

    The label column (default: last, the spambase convention) must contain
    only 0/1 values; every other column must parse as a finite float.  Rows
    of unequal arity, bad numbers and out-of-range labels raise
    CsvFormatError naming the 1-based row and column.
    """
    rows_X: list[list[float]] = []
    labels: list[int] = []
    header_row: list[str] | None = None
    arity = None
    label_idx = None
    with open(path, newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        for lineno, row in enumerate(reader, start=1):
            if not row:
                continue
            if header and header_row is None and not rows_X:
                header_row = [c.strip() for c in row]
                continue
            if arity is None:
                arity = len(row)
                if arity < 2:
                    raise CsvFormatError(f"row {lineno}: need at least 2 columns")
                label_idx = label_column if label_column >= 0 else arity + label_column
                if label_idx is None or not 0 <= label_idx < arity:
                    raise CsvFormatError(
                        f"label column {label_column} out of range for {arity} columns")
            elif len(row) != arity:
                raise CsvFormatError(
                    f"row {lineno}: expected {arity} fields, got {len(row)}")
            feats = []
            for col, cell in enumerate(row, start=1):
                try:
                    value = float(cell)
                except ValueError:
                    raise CsvFormatError(
                        f"row {lineno}, column {col}: cannot parse {cell!r}") from None
                if col - 1 == label_idx:
                    if value not in (0.0, 1.0):
                        raise CsvFormatError(
                            f"row {lineno}, column {col}: label {cell!r} not in {{0,1}}")
                    labels.append(int(value))
                else:
                    if not np.isfinite(value):
                        raise CsvFormatError(
                            f"row {lineno}, column {col}: non-finite value {cell!r}")
                    feats.append(value)
            rows_X.append(feats)
    if not rows_X:
        raise CsvFormatError("file contains no data rows")
    names = None
    if header_row is not None and len(header_row) == arity:
        names = tuple(c for i, c in enumerate(header_row) if i != label_idx)
    X = np.asarray(rows_X, dtype=float)
    return Dataset(X, np.asarray(labels), np.ones(len(labels), dtype=int), names)


def generate_dgp(spec: DgpSpec) -> Dataset:
    """Draw a Dataset from the spec: X from the feature law, labels Bernoulli.

    Deterministic for a fixed seed.
    """
    rng = np.random.default_rng(spec.seed)
    X = rng.standard_normal((spec.n, spec.p))
    eta = spec.beta_true[0] + X @ spec.beta_true[1:]
    y = (rng.random(spec.n) < sigmoid(eta)).astype(int)
    return Dataset(X, y, np.ones(spec.n, dtype=int))


def fit_standardizer(ds: Dataset) -> Standardizer:
    """Column means and population standard deviations of ds.X.

    Raises ConstantColumnError (naming the column) if any column has zero
    variance; such a column carries no signal and breaks the scaling.
    """
    means = ds.X.mean(axis=0) if ds.n else np.zeros(ds.p)
    scales = ds.X.std(axis=0)
    bad = np.flatnonzero(scales == 0.0)
    if bad.size:
        j = int(bad[0])
        name = ds.feature_names[j] if ds.feature_names else f"column {j}"
        raise ConstantColumnError(f"{name} is constant (zero variance)")
    return Standardizer(means, scales)


def apply_standardizer(s: Standardizer, ds: Dataset) -> Dataset:
    """Transform features to (x - mean) / scale."""
    if s.means.size != ds.p:
        raise ValueError(f"standardizer is for p={s.means.size}, dataset has p={ds.p}")
    return Dataset((ds.X - s.means) / s.scales, ds.y, ds.m, ds.feature_names)


def invert_standardizer(s: Standardizer, ds: Dataset) -> Dataset:
    """Undo apply_standardizer: x * scale + mean."""
    if s.means.size != ds.p:
        raise ValueError(f"standardizer is for p={s.means.size}, dataset has p={ds.p}")
    return Dataset(ds.X * s.scales + s.means, ds.y, ds.m, ds.feature_names)


def split(ds: Dataset, fractions, seed: int) -> list[Dataset]:
    """Disjoint row partition by uniform random permutation.

    Fractions must be positive and sum to 1 within 1e-9.  Subset sizes come
    from cumulative rounding, so (0.5, 0.5) on 10 rows gives exactly {5, 5};
    rows keep their original relative order inside each part.
    """
    fr = np.asarray(fractions, dtype=float)
    if fr.ndim != 1 or fr.size < 1 or np.any(fr <= 0):
        raise ValueError("fractions must be positive")
    if abs(fr.sum() - 1.0) > 1e-9:
        raise ValueError(f"fractions sum to {fr.sum()!r}, expected 1 within 1e-9")
    perm = np.random.default_rng(seed).permutation(ds.n)
    edges = np.round(np.cumsum(fr) * ds.n).astype(int)
    edges[-1] = ds.n
    parts = []
    start = 0
    for stop in edges:
        parts.append(ds.take(np.sort(perm[start:stop])))
        start = stop
    return parts


def save_dgp_spec(spec: DgpSpec, path) -> None:
    """Write the spec as a flat key = value config file."""
    beta = ",".join(repr(float(b)) for b in spec.beta_true)
    lines = [
        f"n = {spec.n}",
        f"seed = {spec.seed}",
        f"feature_law = {spec.feature_law}",
        f"beta_true = {beta}",
    ]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_dgp_spec(path) -> DgpSpec:
    """Read a flat key = value config file written by save_dgp_spec."""
    fields: dict[str, str] = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"line {lineno}: expected key = value")
            key, _, value = line.partition("=")
            fields[key.strip()] = value.strip()
    try:
        beta = np.asarray([float(v) for v in fields["beta_true"].split(",")])
        return DgpSpec(
            beta_true=beta,
            n=int(fields["n"]),
            seed=int(fields["seed"]),
            feature_law=fields.get("feature_law", "standard_normal"),
        )
    except KeyError as exc:
        raise ValueError(f"missing config key: {exc}") from None
