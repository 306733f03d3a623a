"""Mutation catalogs: CSV ingestion, synthetic generation and cross-validation splits."""

from __future__ import annotations

import csv
import io
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, DataError
from .network import atomic_write_bytes

N_CATEGORIES = 96
SUBSTITUTIONS = ("C>A", "C>G", "C>T", "T>A", "T>C", "T>G")
BASES = "ACGT"

FORMAT_CATALOG = "catalog"
FORMAT_MATRIX = "matrix"


def mutation_categories() -> list[str]:
    """The 96 single-base-substitution classes as ``5'[REF>ALT]3'`` labels."""
    return [f"{left}[{sub}]{right}" for sub in SUBSTITUTIONS for left in BASES for right in BASES]


@dataclass
class MutationCatalog:
    """Count matrix ``V`` (categories x samples) with optional ground truth.

    ``W`` is categories x signatures and ``H`` signatures x samples.
    """

    labels: list
    counts: np.ndarray
    sample_ids: list
    W: np.ndarray | None = None
    H: np.ndarray | None = None
    signature_ids: list | None = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.float64)
        f, n = self.counts.shape
        if len(self.labels) != f or len(set(self.labels)) != f:
            raise DataError("category labels must be unique and match the row count")
        if len(self.sample_ids) != n:
            raise DataError("sample id count does not match the column count")
        if self.W is not None and self.W.shape[0] != f:
            raise DataError(f"ground-truth W has {self.W.shape[0]} rows, catalog has {f}")
        if self.H is not None and self.H.shape[1] != n:
            raise DataError(f"ground-truth H has {self.H.shape[1]} columns, catalog has {n}")
        if self.signature_ids is None:
            k = self.W.shape[1] if self.W is not None else (self.H.shape[0] if self.H is not None else 0)
            self.signature_ids = [f"SIG{i + 1}" for i in range(k)]

    @property
    def shape(self):
        return self.counts.shape

    def subset(self, columns) -> "MutationCatalog":
        columns = np.asarray(columns)
        return MutationCatalog(
            list(self.labels), self.counts[:, columns], [self.sample_ids[i] for i in columns],
            self.W, None if self.H is None else self.H[:, columns], self.signature_ids, dict(self.metadata),
        )


def _read_table(path, what: str):
    """Parse a labelled CSV table into (row labels, column ids, values)."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise DataError(f"{path}: not valid UTF-8 ({exc})") from None
    rows = list(csv.reader(io.StringIO(text)))
    rows = [r for r in rows if r]
    if len(rows) < 2:
        raise DataError(f"{path}: {what} needs a header row and at least one data row")
    header = [c.strip() for c in rows[0]]
    columns = header[1:]
    if not columns:
        raise DataError(f"{path}: line 1: no data columns")
    labels, values = [], np.empty((len(rows) - 1, len(columns)))
    for r, row in enumerate(rows[1:]):
        line = r + 2
        if len(row) != len(header):
            raise DataError(f"{path}: line {line}: expected {len(header)} fields, got {len(row)}")
        labels.append(row[0].strip())
        for c, cell in enumerate(row[1:]):
            try:
                x = float(cell)
            except ValueError:
                raise DataError(f"{path}: line {line}, column {c + 2}: cannot parse {cell!r} as a number") from None
            if not np.isfinite(x):
                raise DataError(f"{path}: line {line}, column {c + 2}: non-finite value {cell!r}")
            if x < 0:
                raise DataError(
                    f"{path}: line {line}, column {c + 2} ({labels[-1]}, {columns[c]}): negative value {cell}"
                )
            values[r, c] = x
    return labels, columns, values


def _sidecar(path: Path, tag: str) -> Path:
    return path.with_name(f"{path.stem}.{tag}{path.suffix}")


def load_catalog(path, format: str = FORMAT_CATALOG, w_path=None, h_path=None) -> MutationCatalog:
    """Read a catalog CSV and any ground-truth sidecars.

    The file has a header row of sample ids and one row per category whose
    first field is the category label. ``format="catalog"`` requires exactly
    96 rows; ``format="matrix"`` accepts any row count. Sidecars default to
    ``<stem>.W.csv`` and ``<stem>.H.csv`` next to ``path`` when present, and
    ``<stem>.meta.json`` is loaded into ``metadata``. Explicitly given
    sidecar paths must exist.
    """
    if format not in (FORMAT_CATALOG, FORMAT_MATRIX):
        raise ConfigurationError(f"unknown catalog format {format!r}")
    path = Path(path)
    labels, samples, counts = _read_table(path, "catalog")
    if format == FORMAT_CATALOG and len(labels) != N_CATEGORIES:
        raise DataError(f"{path}: mutation catalog must have {N_CATEGORIES} category rows, found {len(labels)}")
    if len(set(labels)) != len(labels):
        raise DataError(f"{path}: duplicate category labels")
    W = H = sig_ids = None
    for given in (w_path, h_path):
        if given and not Path(given).exists():
            raise FileNotFoundError(f"sidecar file not found: {given}")
    w_path = Path(w_path) if w_path else _sidecar(path, "W")
    h_path = Path(h_path) if h_path else _sidecar(path, "H")
    if w_path.exists():
        w_labels, sig_ids, W = _read_table(w_path, "W sidecar")
        if w_labels != labels:
            raise DataError(f"{w_path}: category labels differ from the catalog")
    if h_path.exists():
        h_sigs, h_samples, H = _read_table(h_path, "H sidecar")
        if h_samples != samples:
            raise DataError(f"{h_path}: sample ids differ from the catalog")
        if sig_ids is not None and h_sigs != sig_ids:
            raise DataError(f"{h_path}: signature ids differ from the W sidecar")
        sig_ids = h_sigs
    meta_path = path.with_name(f"{path.stem}.meta.json")
    metadata = json.loads(meta_path.read_text()) if meta_path.exists() else {}
    return MutationCatalog(labels, counts, samples, W, H, sig_ids, metadata)


def _format_number(x: float) -> str:
    return str(int(x)) if float(x).is_integer() and abs(x) < 2**53 else repr(float(x))


def _table_bytes(row_labels, col_ids, values, corner="") -> bytes:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([corner, *col_ids])
    for label, row in zip(row_labels, values):
        writer.writerow([label, *(_format_number(x) for x in row)])
    return buf.getvalue().encode("utf-8")


def save_catalog(catalog: MutationCatalog, path) -> list[Path]:
    """Write the catalog CSV plus W/H sidecars and metadata; returns the files written."""
    path = Path(path)
    written = [path]
    atomic_write_bytes(path, _table_bytes(catalog.labels, catalog.sample_ids, catalog.counts, "category"))
    if catalog.W is not None:
        p = _sidecar(path, "W")
        atomic_write_bytes(p, _table_bytes(catalog.labels, catalog.signature_ids, catalog.W, "category"))
        written.append(p)
    if catalog.H is not None:
        p = _sidecar(path, "H")
        atomic_write_bytes(p, _table_bytes(catalog.signature_ids, catalog.sample_ids, catalog.H, "signature"))
        written.append(p)
    if catalog.metadata:
        p = path.with_name(f"{path.stem}.meta.json")
        atomic_write_bytes(p, (json.dumps(catalog.metadata, indent=2, sort_keys=True) + "\n").encode())
        written.append(p)
    return written


def generate_synthetic(k: int, n: int, seed: int = 0, noise: str = "none", f: int = N_CATEGORIES,
                       mutations_per_sample: float = 1000.0, alpha: float = 0.5) -> MutationCatalog:
    """Draw a catalog ``V = W H`` with known factors.

    Signatures (columns of ``W``) follow a symmetric Dirichlet(``alpha``) over
    the ``f`` categories, so each sums to one. Exposures are exponential with
    mean ``mutations_per_sample / k``, making the expected column total of
    ``V`` equal to ``mutations_per_sample``. ``noise="poisson"`` replaces each
    entry of ``W H`` by a Poisson draw with that mean.
    """
    if noise not in ("none", "poisson"):
        raise ConfigurationError(f"unknown noise model {noise!r}")
    if f < 1 or n < 1 or k < 1 or k > min(f, n):
        raise ConfigurationError(f"need 1 <= k <= min(f, n); got f={f}, k={k}, n={n}")
    if not alpha > 0 or not mutations_per_sample > 0:
        raise ConfigurationError("alpha and mutations_per_sample must be positive")
    rng = np.random.default_rng(seed)
    W = rng.dirichlet(np.full(f, alpha), size=k).T
    H = rng.exponential(mutations_per_sample / k, size=(k, n))
    V = W @ H
    if noise == "poisson":
        V = rng.poisson(V).astype(np.float64)
    labels = mutation_categories() if f == N_CATEGORIES else [f"CAT{i + 1}" for i in range(f)]
    metadata = {
        "generator": "dirichlet-exponential",
        "f": f, "k": k, "n": n, "seed": seed, "noise": noise,
        "alpha": alpha, "mutations_per_sample": mutations_per_sample,
    }
    return MutationCatalog(labels, V, [f"S{j + 1}" for j in range(n)], W, H, None, metadata)


@dataclass(frozen=True)
class SplitPlan:
    """Column partition into ``folds`` test sets; fold ``i`` trains on the rest."""

    seed: int
    folds: int
    test_indices: tuple

    @property
    def n(self) -> int:
        return sum(len(t) for t in self.test_indices)

    def train_indices(self, fold: int) -> np.ndarray:
        test = set(self.test_indices[fold].tolist())
        return np.array([j for j in range(self.n) if j not in test], dtype=int)

    def split(self, fold: int):
        return self.train_indices(fold), self.test_indices[fold]


def make_split_plan(n: int, folds: int = 5, seed: int = 0) -> SplitPlan:
    """Shuffle ``range(n)`` with ``seed`` and cut it into ``folds`` near-equal test sets."""
    if folds < 2:
        raise ConfigurationError("cross-validation needs at least 2 folds")
    if n < folds:
        raise ConfigurationError(f"cannot split {n} columns into {folds} folds")
    order = np.random.default_rng(seed).permutation(n)
    tests = tuple(np.sort(chunk) for chunk in np.array_split(order, folds))
    return SplitPlan(seed, folds, tests)


def ensure_dir(path) -> Path:
    path = Path(path)
    os.makedirs(path, exist_ok=True)
    return path
