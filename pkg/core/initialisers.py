"""
Weight Initialiser Service for STRADDLE_BENCH
Builds initial (fan-in x fan-out) weight matrices for every compared scheme
"""

import logging
import math
from enum import Enum
from typing import Callable, Dict, List, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from .numerics import Matrix, Rng, qr_orthonormal, sample_normal, sample_uniform

logger = logging.getLogger(__name__)

DEFAULT_RANDOM_STDDEV = 0.05


class InitialiserKind(str, Enum):
    """Initialiser names as they appear in result tables"""

    STRADDLED = "straddled"
    IDENTITY = "identity"
    RECURRENT_IDENTITY = "recurrentidentity"
    GLOROT_UNIFORM = "glorotuniform"
    GLOROT_NORMAL = "glorotnormal"
    HE_NORMAL = "henormal"
    HE_UNIFORM = "heuniform"
    ORTHOGONAL = "orthogonal"
    RANDOM_NORMAL = "random"


DETERMINISTIC_KINDS = frozenset({
    InitialiserKind.STRADDLED,
    InitialiserKind.IDENTITY,
    InitialiserKind.RECURRENT_IDENTITY,
})


class InitialiserSpec(BaseModel):
    """Which initialiser to use, plus its parameters"""

    model_config = ConfigDict(frozen=True)

    kind: InitialiserKind
    random_stddev: float = Field(default=DEFAULT_RANDOM_STDDEV, gt=0)

    @field_validator("kind", mode="before")
    @classmethod
    def _normalise_kind(cls, value):
        if isinstance(value, str):
            return value.strip().lower()
        return value

    @property
    def name(self) -> str:
        return self.kind.value


def parse_initialiser(value: Union[str, dict, InitialiserSpec]) -> InitialiserSpec:
    """Accept a table name ("Straddled", "random", ...) or a mapping"""
    if isinstance(value, InitialiserSpec):
        return value
    if isinstance(value, str):
        return InitialiserSpec(kind=value)
    return InitialiserSpec.model_validate(value)


BENCHMARK_INITIALISERS: List[InitialiserSpec] = [
    InitialiserSpec(kind=kind) for kind in (
        InitialiserKind.STRADDLED,
        InitialiserKind.GLOROT_UNIFORM,
        InitialiserKind.GLOROT_NORMAL,
        InitialiserKind.IDENTITY,
        InitialiserKind.HE_NORMAL,
        InitialiserKind.HE_UNIFORM,
        InitialiserKind.ORTHOGONAL,
        InitialiserKind.RANDOM_NORMAL,
    )
]


def is_deterministic(kind: InitialiserKind) -> bool:
    return InitialiserKind(kind) in DETERMINISTIC_KINDS


def _check_fans(m: int, n: int) -> None:
    if m < 1 or n < 1:
        raise ValueError(f"Weight shape must be at least 1x1, got ({m}, {n})")


def straddled(m: int, n: int) -> Matrix:
    """One 1 per row at column (row mod n); m < n leaves the extra columns zero"""
    _check_fans(m, n)
    weights = np.zeros((m, n))
    rows = np.arange(m)
    weights[rows, rows % n] = 1.0
    return weights


def identity_padded(m: int, n: int) -> Matrix:
    _check_fans(m, n)
    return np.eye(m, n)


def recurrent_identity(m: int, n: int) -> Matrix:
    """Identity tiled down the rows as many whole times as it fits, rest zero"""
    _check_fans(m, n)
    if m < n:
        return identity_padded(m, n)

    weights = np.zeros((m, n))
    rows = np.arange(n * (m // n))
    weights[rows, rows % n] = 1.0
    return weights


def glorot_uniform(rng: Rng, m: int, n: int) -> Matrix:
    limit = math.sqrt(6.0 / (m + n))
    return sample_uniform(rng, m, n, -limit, limit)


def glorot_normal(rng: Rng, m: int, n: int) -> Matrix:
    return sample_normal(rng, m, n, 0.0, math.sqrt(2.0 / (m + n)))


def he_normal(rng: Rng, m: int, n: int) -> Matrix:
    return sample_normal(rng, m, n, 0.0, math.sqrt(2.0 / m))


def he_uniform(rng: Rng, m: int, n: int) -> Matrix:
    limit = math.sqrt(6.0 / m)
    return sample_uniform(rng, m, n, -limit, limit)


def orthogonal(rng: Rng, m: int, n: int) -> Matrix:
    return qr_orthonormal(rng, m, n)


def random_normal(rng: Rng, m: int, n: int, stddev: float = DEFAULT_RANDOM_STDDEV) -> Matrix:
    return sample_normal(rng, m, n, 0.0, stddev)


_CONSTRUCTORS: Dict[InitialiserKind, Callable[[InitialiserSpec, Rng, int, int], Matrix]] = {
    InitialiserKind.STRADDLED: lambda spec, rng, m, n: straddled(m, n),
    InitialiserKind.IDENTITY: lambda spec, rng, m, n: identity_padded(m, n),
    InitialiserKind.RECURRENT_IDENTITY: lambda spec, rng, m, n: recurrent_identity(m, n),
    InitialiserKind.GLOROT_UNIFORM: lambda spec, rng, m, n: glorot_uniform(rng, m, n),
    InitialiserKind.GLOROT_NORMAL: lambda spec, rng, m, n: glorot_normal(rng, m, n),
    InitialiserKind.HE_NORMAL: lambda spec, rng, m, n: he_normal(rng, m, n),
    InitialiserKind.HE_UNIFORM: lambda spec, rng, m, n: he_uniform(rng, m, n),
    InitialiserKind.ORTHOGONAL: lambda spec, rng, m, n: orthogonal(rng, m, n),
    InitialiserKind.RANDOM_NORMAL: lambda spec, rng, m, n: random_normal(rng, m, n, spec.random_stddev),
}


def make_weights(spec: InitialiserSpec, rng: Rng, m: int, n: int) -> Matrix:
    """Dispatch to the constructor named by ``spec``"""
    constructor = _CONSTRUCTORS[spec.kind]
    weights = constructor(spec, rng, m, n)
    logger.debug(f"Initialised {m}x{n} weights with {spec.name}")
    return weights
