"""
Numerics Service for STRADDLE_BENCH
Dense float64 matrices and seeded sampling shared by the whole suite
"""

import logging
import zlib
from typing import Any, Optional

import numpy as np
import numpy.typing as npt

from .errors import ShapeError

logger = logging.getLogger(__name__)

Matrix = npt.NDArray[np.float64]

PRNG_ALGORITHM = "PCG64"
_SEED_MASK = (1 << 64) - 1
_QR_MAX_ATTEMPTS = 10
_QR_RANK_TOL = 1e-12


def as_matrix(values: Any) -> Matrix:
    """Build a validated 2-D float64 matrix (non-empty, finite entries)"""
    matrix = np.array(values, dtype=np.float64)
    if matrix.ndim != 2:
        raise ShapeError(f"Matrix must be 2-D, got {matrix.ndim}-D array of shape {matrix.shape}")
    if matrix.shape[0] < 1 or matrix.shape[1] < 1:
        raise ShapeError(f"Matrix must have at least one row and one column, got {matrix.shape}")
    if not np.all(np.isfinite(matrix)):
        raise ValueError("Matrix entries must be finite")
    return matrix


class Rng:
    """Seeded PCG64 stream; equal (seed, stream) pairs give equal sample sequences"""

    algorithm = PRNG_ALGORITHM

    def __init__(self, seed: int, stream: Optional[str] = None):
        self.seed = int(seed) & _SEED_MASK
        self.stream = stream

        entropy = [self.seed]
        if stream is not None:
            entropy.append(zlib.crc32(stream.encode("utf-8")))

        self.generator = np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))

    @classmethod
    def derive(cls, seed: int, stream: str) -> "Rng":
        """Child stream of ``seed`` keyed by a stable hash of ``stream``"""
        return cls(seed, stream=stream)

    def uniform(self, size) -> np.ndarray:
        """Raw uniforms on [0, 1)"""
        return self.generator.random(size)

    def permutation(self, n: int) -> np.ndarray:
        return self.generator.permutation(n)

    def choice(self, n: int, size: int, replace: bool = False) -> np.ndarray:
        return self.generator.choice(n, size=size, replace=replace)

    def __repr__(self) -> str:
        return f"Rng(seed={self.seed}, stream={self.stream!r}, algorithm={self.algorithm})"


def _check_shape(rows: int, cols: int) -> None:
    if rows < 1 or cols < 1:
        raise ShapeError(f"Matrix shape must be at least 1x1, got ({rows}, {cols})")


def matmul(a: Matrix, b: Matrix) -> Matrix:
    """Standard matrix product"""
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"Cannot multiply {a.shape[0]}x{a.shape[1]} by {b.shape[0]}x{b.shape[1]}")
    return a @ b


def transpose(a: Matrix) -> Matrix:
    return np.ascontiguousarray(a.T)


def frobenius_norm(a: Matrix) -> float:
    return float(np.linalg.norm(a, ord="fro"))


def sample_uniform(rng: Rng, rows: int, cols: int, lo: float, hi: float) -> Matrix:
    """I.i.d. uniform entries on [lo, hi)"""
    _check_shape(rows, cols)
    if not lo < hi:
        raise ValueError(f"Uniform bounds require lo < hi, got lo={lo}, hi={hi}")
    return lo + (hi - lo) * rng.uniform((rows, cols))


def sample_normal(rng: Rng, rows: int, cols: int, mean: float, stddev: float) -> Matrix:
    """I.i.d. Gaussian entries from the Box-Muller transform of paired uniforms"""
    _check_shape(rows, cols)
    if not stddev > 0:
        raise ValueError(f"Normal stddev must be positive, got {stddev}")

    count = rows * cols
    pairs = (count + 1) // 2
    u = rng.uniform((2, pairs))
    # 1 - u keeps the log argument in (0, 1]
    radius = np.sqrt(-2.0 * np.log1p(-u[0]))
    angle = 2.0 * np.pi * u[1]
    z = np.concatenate([radius * np.cos(angle), radius * np.sin(angle)])[:count]

    return mean + stddev * z.reshape(rows, cols)


def qr_orthonormal(rng: Rng, rows: int, cols: int) -> Matrix:
    """Orthogonal matrix from the sign-corrected Householder QR of a Gaussian draw"""
    _check_shape(rows, cols)
    tall, short = max(rows, cols), min(rows, cols)

    for attempt in range(_QR_MAX_ATTEMPTS):
        gaussian = sample_normal(rng, tall, short, 0.0, 1.0)
        q, r = np.linalg.qr(gaussian, mode="reduced")
        diagonal = np.diag(r)
        if np.all(np.abs(diagonal) > _QR_RANK_TOL):
            break
        logger.warning(f"Degenerate Gaussian draw in qr_orthonormal (attempt {attempt + 1}), redrawing")
    else:
        raise RuntimeError(f"qr_orthonormal failed to draw a full-rank {tall}x{short} matrix")

    q = q * np.sign(diagonal)
    if rows < cols:
        q = q.T
    return np.ascontiguousarray(q)
