"""Dataset ingestion, standardization, and seeded splitting.

CSV files are parsed into numeric matrices (rows with unparseable cells are
dropped and counted), split deterministically by seed into train/validation/
test partitions, and standardized with statistics computed on the train rows
only. A registry maps the benchmark UCI regression datasets to their expected
shapes so ingestion fails loudly on a mismatch.
"""

from __future__ import annotations

import csv
import logging
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

# Benchmark regression datasets: name -> (rows, features) after ingestion.
TABLE_SHAPES: dict[str, tuple[int, int]] = {
    "boston_housing": (506, 13),
    "concrete_strength": (1030, 8),
    "energy_efficiency": (768, 8),
    "kin8nm": (8192, 8),
    "naval_propulsion": (11934, 16),
    "cycle_power_plant": (9568, 4),
    "protein_structure": (45730, 9),
    "wine_quality_red": (1599, 11),
    "yacht_hydrodynamics": (308, 6),
}


class IngestionError(ValueError):
    """Raised when a dataset cannot be ingested or fails shape validation."""


@dataclass(frozen=True)
class RawDataset:
    name: str
    features: np.ndarray
    targets: np.ndarray
    feature_names: tuple[str, ...]
    dropped_rows: int = 0


@dataclass(frozen=True)
class SplitSpec:
    """Deterministic shuffle-split: fractions of the full dataset going to
    train and validation (the rest is test), with an optional cap on the
    number of training rows kept after the shuffle."""

    seed: int
    train_fraction: float = 0.81
    validation_fraction: float = 0.09
    trainset_cap: int | None = None

    def __post_init__(self):
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError(f"train_fraction out of range: {self.train_fraction}")
        if not 0.0 < self.validation_fraction < 1.0:
            raise ValueError(f"validation_fraction out of range: {self.validation_fraction}")
        if self.train_fraction + self.validation_fraction >= 1.0:
            raise ValueError("train and validation fractions must sum to < 1")


@dataclass(frozen=True)
class StandardizedView:
    """Train/validation/test partitions with train-only feature statistics."""

    x_train: np.ndarray
    y_train: np.ndarray
    x_validation: np.ndarray
    y_validation: np.ndarray
    x_test: np.ndarray
    y_test: np.ndarray
    feature_mean: np.ndarray
    feature_std: np.ndarray
    train_indices: np.ndarray
    validation_indices: np.ndarray
    test_indices: np.ndarray


def load_csv(
    path: str | Path,
    target_column: str | int,
    delimiter: str = ",",
    has_header: bool = True,
    name: str | None = None,
) -> RawDataset:
    """Parse a delimiter-separated numeric file into features and targets.

    Rows containing any unparseable cell are dropped (and counted); an empty
    result raises ``IngestionError``. ``target_column`` is a header name when
    ``has_header`` is true, otherwise a zero-based column index.
    """
    path = Path(path)
    if not path.exists():
        raise IngestionError(f"dataset file not found: {path}")

    with path.open(newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        rows = [r for r in reader if r and any(cell.strip() for cell in r)]
    if not rows:
        raise IngestionError(f"empty dataset file: {path}")

    if has_header:
        header = [c.strip() for c in rows[0]]
        rows = rows[1:]
    else:
        header = [f"f{i}" for i in range(len(rows[0]))]

    if isinstance(target_column, int):
        target_idx = target_column
        if not 0 <= target_idx < len(header):
            raise IngestionError(f"target column index {target_idx} out of range")
    else:
        if target_column not in header:
            raise IngestionError(f"target column {target_column!r} not in header {header}")
        target_idx = header.index(target_column)

    n_cols = len(header)
    parsed: list[list[float]] = []
    dropped = 0
    for row in rows:
        if len(row) != n_cols:
            dropped += 1
            continue
        try:
            values = [float(cell) for cell in row]
        except ValueError:
            dropped += 1
            continue
        if not all(np.isfinite(values)):
            dropped += 1
            continue
        parsed.append(values)
    if not parsed:
        raise IngestionError(f"no parseable numeric rows in {path}")
    if dropped:
        log.warning("dropped %d unparseable rows from %s", dropped, path)

    data = np.asarray(parsed, dtype=float)
    targets = data[:, target_idx]
    features = np.delete(data, target_idx, axis=1)
    feature_names = tuple(h for i, h in enumerate(header) if i != target_idx)
    return RawDataset(
        name=name or path.stem,
        features=features,
        targets=targets,
        feature_names=feature_names,
        dropped_rows=dropped,
    )


def split(raw: RawDataset, spec: SplitSpec) -> StandardizedView:
    """Seeded shuffle-split with train-statistics standardization.

    Deterministic for a fixed seed; partitions are disjoint and exhaustive
    before ``trainset_cap`` truncation. Constant feature columns map to
    all-zeros. Targets are left unscaled.
    """
    n = raw.features.shape[0]
    rng = np.random.default_rng(spec.seed)
    perm = rng.permutation(n)

    n_train = int(np.floor(spec.train_fraction * n))
    n_val = int(np.floor(spec.validation_fraction * n))
    train_idx = perm[:n_train]
    val_idx = perm[n_train : n_train + n_val]
    test_idx = perm[n_train + n_val :]

    if spec.trainset_cap is not None:
        if spec.trainset_cap > n_train:
            raise ValueError(
                f"trainset_cap {spec.trainset_cap} exceeds available training rows {n_train}"
            )
        train_idx = train_idx[: spec.trainset_cap]

    x_train = raw.features[train_idx]
    mean = x_train.mean(axis=0)
    std = x_train.std(axis=0)
    scale = np.where(std > 0.0, std, 1.0)

    def standardize(block: np.ndarray) -> np.ndarray:
        return (block - mean) / scale

    return StandardizedView(
        x_train=standardize(x_train),
        y_train=raw.targets[train_idx],
        x_validation=standardize(raw.features[val_idx]),
        y_validation=raw.targets[val_idx],
        x_test=standardize(raw.features[test_idx]),
        y_test=raw.targets[test_idx],
        feature_mean=mean,
        feature_std=scale,
        train_indices=train_idx,
        validation_indices=val_idx,
        test_indices=test_idx,
    )


@dataclass(frozen=True)
class RegistryEntry:
    name: str
    path: str
    target_column: str | int
    rows: int
    features: int
    delimiter: str = ","
    has_header: bool = True


def parse_manifest(path: str | Path) -> dict[str, RegistryEntry]:
    """Read a key-value manifest mapping dataset names to files.

    Each line reads ``name = relative/path.csv, target_column`` with the
    expected shape taken from the built-in registry. Lines starting with #
    are comments.
    """
    path = Path(path)
    entries: dict[str, RegistryEntry] = {}
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise IngestionError(f"{path}:{lineno}: expected 'name = path, target_column'")
        name, rhs = (part.strip() for part in line.split("=", 1))
        parts = [p.strip() for p in rhs.split(",")]
        if len(parts) != 2:
            raise IngestionError(f"{path}:{lineno}: expected 'path, target_column'")
        if name not in TABLE_SHAPES:
            raise IngestionError(f"{path}:{lineno}: unknown dataset {name!r}")
        rows, features = TABLE_SHAPES[name]
        target: str | int = parts[1]
        if target.lstrip("-").isdigit():
            target = int(target)
        entries[name] = RegistryEntry(
            name=name, path=parts[0], target_column=target, rows=rows, features=features
        )
    return entries


def load_registered(entry: RegistryEntry, root: str | Path = ".") -> RawDataset:
    """Load a registered dataset and validate its shape against the registry."""
    raw = load_csv(
        Path(root) / entry.path,
        entry.target_column,
        delimiter=entry.delimiter,
        has_header=entry.has_header,
        name=entry.name,
    )
    shape = (raw.features.shape[0], raw.features.shape[1])
    if shape != (entry.rows, entry.features):
        raise IngestionError(
            f"dataset {entry.name}: ingested shape {shape} does not match "
            f"registered shape {(entry.rows, entry.features)}"
        )
    return raw


def write_standin_csv(name: str, path: str | Path, seed: int = 0) -> Path:
    """Write a deterministic synthetic stand-in for a registered dataset.

    The real benchmark files are not bundled (no network access at build
    time); stand-ins reproduce the registered shape with a linear signal,
    mildly correlated heavy-tailed features, and noise whose scale grows
    with the row's distance from the bulk, so the hardest rows are both
    far from the training span and the noisiest.
    """
    if name not in TABLE_SHAPES:
        raise IngestionError(f"unknown dataset {name!r}")
    rows, n_features = TABLE_SHAPES[name]
    name_key = zlib.crc32(name.encode())
    rng = np.random.default_rng(np.random.SeedSequence([seed, name_key]))

    mixing = rng.normal(size=(n_features, n_features)) / np.sqrt(n_features)
    mixing += np.eye(n_features)
    scales = rng.uniform(0.5, 3.0, size=n_features)
    x = rng.standard_t(5, size=(rows, n_features)) @ mixing * scales
    weights = rng.normal(size=n_features)
    leverage = np.linalg.norm(x / np.abs(x).std(axis=0), axis=1)
    leverage /= np.sqrt(n_features)
    noise_scale = 0.3 + leverage**2
    y = x @ weights + rng.normal(size=rows) * noise_scale

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"f{i}" for i in range(n_features)] + ["target"])
        for xi, yi in zip(x, y):
            writer.writerow([f"{v:.12g}" for v in xi] + [f"{yi:.12g}"])
    return path
