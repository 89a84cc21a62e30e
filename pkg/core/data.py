"""
Dataset Service for STRADDLE_BENCH
Synthesis, IDX/CSV loading, min-max scaling and train/test splitting
"""

import hashlib
import json
import logging
import math
import os
import struct
from dataclasses import dataclass, field, replace
from itertools import combinations
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from .errors import DataFormatError, DatasetNotFoundError
from .numerics import Matrix, Rng, sample_uniform

logger = logging.getLogger(__name__)

PathLike = Union[str, os.PathLike]

MNIST_IMAGE_MAGIC = 0x00000803
MNIST_SIDE = 28
_IDX_HEADER = struct.Struct(">IIII")


@dataclass(frozen=True)
class Dataset:
    name: str
    features: Matrix
    feature_mins: Optional[np.ndarray] = None
    feature_maxs: Optional[np.ndarray] = None
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def shape(self):
        return self.features.shape

    def checksum(self) -> str:
        return _checksum(self.features)


@dataclass(frozen=True)
class Split:
    train: Matrix
    test: Matrix
    seed: int
    fraction: float

    def checksum(self) -> str:
        """Identifies the exact rows (and order) of both partitions"""
        digest = hashlib.sha256()
        digest.update(np.ascontiguousarray(self.train).tobytes())
        digest.update(b"|")
        digest.update(np.ascontiguousarray(self.test).tobytes())
        return digest.hexdigest()


def _checksum(values: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(values, dtype=np.float64).tobytes()).hexdigest()


def _require_file(path: PathLike) -> Path:
    path = Path(path)
    if not path.is_file():
        raise DatasetNotFoundError(path)
    return path


# ---------------------------------------------------------------------------
# Synthetic data
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SyntheticGenerator:
    """Fixed transform from a latent vector to the feature vector

    Columns are laid out as a linear block ``z @ mixing``, then pairwise
    products ``z_i * z_j``, then ``sin(2 pi z_i)``, then ``z_i ** 2``.
    """

    latent_dim: int
    mixing: Matrix
    pairs: np.ndarray
    sine_indices: np.ndarray
    square_indices: np.ndarray

    @property
    def features(self) -> int:
        return self.mixing.shape[1] + len(self.pairs) + len(self.sine_indices) + len(self.square_indices)

    @classmethod
    def from_rng(cls, rng: Rng, latent_dim: int = 20, features: int = 100) -> "SyntheticGenerator":
        if latent_dim < 1:
            raise ValueError(f"latent_dim must be positive, got {latent_dim}")
        if features < latent_dim:
            raise ValueError(f"features ({features}) must be at least latent_dim ({latent_dim})")

        n_linear = max(1, features // 2)
        n_pairs = (features - n_linear) * 3 // 5
        n_sine = (features - n_linear - n_pairs) // 2
        n_square = features - n_linear - n_pairs - n_sine

        mixing = sample_uniform(rng, latent_dim, n_linear, -1.0, 1.0)

        candidates = np.array(list(combinations(range(latent_dim), 2)) or [(0, 0)], dtype=np.int64)
        pair_rows = rng.choice(len(candidates), n_pairs, replace=n_pairs > len(candidates))
        sine_indices = rng.choice(latent_dim, n_sine, replace=n_sine > latent_dim)
        square_indices = rng.choice(latent_dim, n_square, replace=n_square > latent_dim)

        return cls(
            latent_dim=latent_dim,
            mixing=mixing,
            pairs=candidates[pair_rows].reshape(-1, 2),
            sine_indices=np.asarray(sine_indices, dtype=np.int64),
            square_indices=np.asarray(square_indices, dtype=np.int64),
        )

    def transform(self, latent: Matrix) -> Matrix:
        blocks = [
            latent @ self.mixing,
            latent[:, self.pairs[:, 0]] * latent[:, self.pairs[:, 1]],
            np.sin(2.0 * np.pi * latent[:, self.sine_indices]),
            latent[:, self.square_indices] ** 2,
        ]
        return np.hstack(blocks)

    def describe(self) -> Dict[str, Any]:
        return {
            "latent_dim": self.latent_dim,
            "linear_columns": int(self.mixing.shape[1]),
            "pairs": self.pairs.tolist(),
            "sine_indices": self.sine_indices.tolist(),
            "square_indices": self.square_indices.tolist(),
        }


def generate_synthetic(
    rng: Rng,
    records: int = 5000,
    latent_dim: int = 20,
    features: int = 100,
) -> Dataset:
    """Records driven by a U[0,1] latent vector through linear and non-linear maps"""
    if records < 1:
        raise ValueError(f"records must be positive, got {records}")

    generator = SyntheticGenerator.from_rng(rng, latent_dim, features)
    latent = sample_uniform(rng, records, latent_dim, 0.0, 1.0)
    values = generator.transform(latent)

    metadata = {
        "generator": "latent-mix-v1",
        "seed": rng.seed,
        "prng": rng.algorithm,
        "records": records,
        "features": features,
        **generator.describe(),
    }
    logger.info(f"Generated synthetic dataset: {records} records x {features} features (seed {rng.seed})")
    return Dataset(name="synthetic", features=values, metadata=metadata)


def export_dataset_csv(dataset: Dataset, path: PathLike) -> Dict[str, str]:
    """Write features as CSV plus a JSON metadata sidecar next to it"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    columns = [f"f{j}" for j in range(dataset.features.shape[1])]
    pd.DataFrame(dataset.features, columns=columns).to_csv(path, index=False, float_format="%.17g")

    sidecar = path.with_suffix(".json")
    with open(sidecar, "w", encoding="utf-8") as f:
        json.dump({"name": dataset.name, **dataset.metadata}, f, indent=2)

    logger.info(f"Dataset exported: {path} (+ {sidecar.name})")
    return {"csv": str(path), "metadata": str(sidecar)}


# ---------------------------------------------------------------------------
# MNIST (IDX image files)
# ---------------------------------------------------------------------------

def _parse_idx_images(path: Path) -> np.ndarray:
    raw = path.read_bytes()
    if len(raw) < _IDX_HEADER.size:
        raise DataFormatError(f"{path}: truncated IDX header ({len(raw)} bytes)")

    magic, count, rows, cols = _IDX_HEADER.unpack_from(raw)
    if magic != MNIST_IMAGE_MAGIC:
        raise DataFormatError(f"{path}: bad IDX magic 0x{magic:08x}, expected 0x{MNIST_IMAGE_MAGIC:08x}")

    expected = count * rows * cols
    pixels = raw[_IDX_HEADER.size:]
    if len(pixels) < expected:
        raise DataFormatError(
            f"{path}: truncated IDX payload, expected {expected} pixel bytes, found {len(pixels)}"
        )
    if (rows, cols) != (MNIST_SIDE, MNIST_SIDE):
        logger.warning(f"{path}: images are {rows}x{cols}, not {MNIST_SIDE}x{MNIST_SIDE}; using actual size")

    return np.frombuffer(pixels, dtype=np.uint8, count=expected).reshape(count, rows * cols)


def load_mnist_idx(
    images_path: Union[PathLike, Sequence[PathLike]],
    limit: Optional[int] = None,
) -> Dataset:
    """Flattened images scaled by 1/255; several files are stacked in order"""
    paths = [images_path] if isinstance(images_path, (str, os.PathLike)) else list(images_path)
    blocks = [_parse_idx_images(_require_file(p)) for p in paths]

    widths = {block.shape[1] for block in blocks}
    if len(widths) != 1:
        raise DataFormatError(f"IDX files disagree on image size: {sorted(widths)}")

    pixels = np.vstack(blocks)
    if limit is not None:
        pixels = pixels[:limit]

    logger.info(f"Loaded MNIST images: {pixels.shape[0]} x {pixels.shape[1]} from {len(paths)} file(s)")
    return Dataset(
        name="mnist",
        features=pixels.astype(np.float64) / 255.0,
        metadata={"sources": [str(p) for p in paths], "limit": limit},
    )


def write_mnist_idx(path: PathLike, images: np.ndarray) -> None:
    """Write (count, rows, cols) uint8 images, or a 2-D array of 28x28 rows, as an IDX file"""
    images = np.asarray(images)
    if images.ndim == 2:
        images = images.reshape(images.shape[0], MNIST_SIDE, -1)
    if images.dtype != np.uint8:
        images = np.rint(np.clip(images, 0, 255)).astype(np.uint8)

    count, rows, cols = images.shape
    with open(path, "wb") as f:
        f.write(_IDX_HEADER.pack(MNIST_IMAGE_MAGIC, count, rows, cols))
        f.write(np.ascontiguousarray(images).tobytes())


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

def load_csv(path: PathLike, drop_columns: Sequence[str] = ()) -> Dataset:
    """Numeric CSV with a header row; named columns are dropped"""
    path = _require_file(path)

    try:
        # header=None so the header line fixes the width; longer rows are a ParserError
        raw = pd.read_csv(
            path, header=None, index_col=False, dtype=str, keep_default_na=False, encoding="utf-8"
        )
    except pd.errors.ParserError as e:
        raise DataFormatError(f"{path}: ragged or malformed CSV: {e}") from e
    except pd.errors.EmptyDataError as e:
        raise DataFormatError(f"{path}: empty CSV") from e

    header = [str(name).strip() for name in raw.iloc[0]]
    frame = raw.iloc[1:].reset_index(drop=True)
    frame.columns = header

    missing = [c for c in drop_columns if c not in frame.columns]
    if missing:
        logger.warning(f"{path}: drop columns not present: {missing}")
    frame = frame.drop(columns=[c for c in drop_columns if c in frame.columns])

    if frame.shape[0] == 0 or frame.shape[1] == 0:
        raise DataFormatError(f"{path}: no numeric data after dropping {list(drop_columns)}")

    numeric = frame.apply(lambda column: pd.to_numeric(column.str.strip(), errors="coerce"))
    bad = numeric.isna().to_numpy()
    if bad.any():
        row, col = map(int, np.argwhere(bad)[0])
        cell = frame.iat[row, col]
        problem = f"non-numeric value {cell!r}" if isinstance(cell, str) and cell.strip() else "missing value"
        raise DataFormatError(f"{path}: {problem} at row {row + 1}, column '{frame.columns[col]}'")

    values = numeric.to_numpy(dtype=np.float64)
    if not np.all(np.isfinite(values)):
        row, col = map(int, np.argwhere(~np.isfinite(values))[0])
        raise DataFormatError(f"{path}: non-finite value at row {row + 1}, column '{frame.columns[col]}'")

    logger.info(f"Loaded CSV {path.name}: {values.shape[0]} x {values.shape[1]}")
    return Dataset(
        name=path.stem,
        features=values,
        metadata={"source": str(path), "dropped_columns": [c for c in drop_columns if c not in missing]},
    )


# ---------------------------------------------------------------------------
# Scaling and splitting
# ---------------------------------------------------------------------------

def minmax_scale(d: Dataset) -> Dataset:
    """Per-column (x - min) / (max - min); constant columns map to 0"""
    mins = d.features.min(axis=0)
    maxs = d.features.max(axis=0)
    spread = maxs - mins
    constant = spread == 0

    scaled = (d.features - mins) / np.where(constant, 1.0, spread)
    scaled[:, constant] = 0.0

    return replace(d, features=scaled, feature_mins=mins, feature_maxs=maxs)


def minmax_descale(d: Dataset) -> Dataset:
    """Undo ``minmax_scale`` with the recorded bounds (constant columns come back as their value)"""
    if d.feature_mins is None or d.feature_maxs is None:
        raise ValueError(f"Dataset '{d.name}' has no recorded scaling bounds")
    values = d.features * (d.feature_maxs - d.feature_mins) + d.feature_mins
    return replace(d, features=values, feature_mins=None, feature_maxs=None)


def split(d: Dataset, fraction: float = 0.8, seed: int = 0) -> Split:
    """Seeded row shuffle; the first floor(fraction * N) rows train, the rest test"""
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"Split fraction must be in (0, 1), got {fraction}")

    total = d.features.shape[0]
    n_train = int(math.floor(fraction * total + 1e-9))
    if n_train < 1 or n_train >= total:
        raise ValueError(f"Split of {total} rows at {fraction} leaves an empty partition")

    order = Rng(seed).permutation(total)
    return Split(
        train=d.features[order[:n_train]],
        test=d.features[order[n_train:]],
        seed=seed,
        fraction=fraction,
    )


def scale_pair(train: Dataset, test: Dataset) -> List[Dataset]:
    """Scale two datasets with bounds fitted on both together (original MNIST split)"""
    joined = minmax_scale(replace(train, features=np.vstack([train.features, test.features])))
    n_train = train.features.shape[0]
    return [
        replace(joined, name=train.name, features=joined.features[:n_train]),
        replace(joined, name=test.name, features=joined.features[n_train:]),
    ]
