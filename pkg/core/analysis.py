"""
Analysis Service for STRADDLE_BENCH
Epoch means, convergence detection, confidence bands and one-tailed Welch tests
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Literal, Optional, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import special, stats

from .experiment import RunLog

logger = logging.getLogger(__name__)

LossKind = Literal["train", "test"]
REFERENCE_INITIALISER = "straddled"
T_TEST_NAME = "welch-one-tailed"


@dataclass(frozen=True)
class LossSeries:
    values: np.ndarray
    runs: int
    diverged: bool


@dataclass(frozen=True)
class ConvergenceResult:
    converged: bool
    epoch: Optional[int] = None
    loss_at_convergence: Optional[float] = None


NOT_CONVERGED = ConvergenceResult(converged=False)


@dataclass(frozen=True)
class ConfidenceBand:
    mean: np.ndarray
    lo: np.ndarray
    hi: np.ndarray


@dataclass(frozen=True)
class ComparisonRow:
    initialiser: str
    convergence: ConvergenceResult
    final_loss_mean: float
    p_value: Optional[float]
    diverged: bool
    runs: int
    runs_converged: int
    mean_run_convergence_epoch: Optional[float]


def _losses(log: RunLog, which: LossKind) -> List[float]:
    if which == "train":
        return log.train_loss
    if which == "test":
        return log.test_loss
    raise ValueError(f"Loss kind must be 'train' or 'test', got {which!r}")


def group_by_initialiser(logs: Sequence[RunLog], which: LossKind = "train") -> Dict[str, np.ndarray]:
    """runs x epochs loss matrix per initialiser, in first-appearance order"""
    grouped: Dict[str, List[List[float]]] = {}
    for log in logs:
        grouped.setdefault(log.initialiser, []).append(_losses(log, which))

    matrices = {}
    for name, series in grouped.items():
        lengths = {len(s) for s in series}
        if len(lengths) != 1:
            raise ValueError(f"Runs of '{name}' have different epoch counts: {sorted(lengths)}")
        matrices[name] = np.asarray(series, dtype=np.float64)
    return matrices


def epoch_means(logs: Sequence[RunLog], which: LossKind = "train") -> Dict[str, LossSeries]:
    """Per-epoch mean across runs; any +inf sentinel flags the initialiser as diverged"""
    means = {}
    for name, matrix in group_by_initialiser(logs, which).items():
        diverged = not np.all(np.isfinite(matrix))
        means[name] = LossSeries(values=matrix.mean(axis=0), runs=matrix.shape[0], diverged=diverged)
    return means


def detect_convergence(series: Sequence[float], epsilon: float, alpha: int) -> ConvergenceResult:
    """Smallest t whose next alpha losses all lie in [l_t - epsilon, l_t + epsilon]"""
    values = np.asarray(series, dtype=np.float64)
    if alpha < 1:
        raise ValueError(f"alpha must be at least 1, got {alpha}")
    if alpha >= len(values):
        raise ValueError(f"alpha ({alpha}) must be smaller than the series length ({len(values)})")

    candidates = len(values) - alpha
    anchors = values[:candidates, None]
    windows = sliding_window_view(values[1:], alpha)[:candidates]
    inside = (windows >= anchors - epsilon) & (windows <= anchors + epsilon)
    qualifying = inside.all(axis=1) & np.isfinite(values[:candidates])

    if not qualifying.any():
        return NOT_CONVERGED
    t = int(np.argmax(qualifying))
    return ConvergenceResult(converged=True, epoch=t, loss_at_convergence=float(values[t]))


def welch_t_one_tailed(a: Sequence[float], b: Sequence[float]) -> float:
    """p-value of Welch's t-test for the alternative mean(a) < mean(b)

    Non-finite samples (diverged runs) decide the test outright: p is 0 when
    only ``b`` diverged, 1 when only ``a`` did and 0.5 when both did.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if len(a) < 2 or len(b) < 2:
        raise ValueError(f"Welch's t-test needs at least 2 samples per group, got {len(a)} and {len(b)}")

    a_bad, b_bad = not np.all(np.isfinite(a)), not np.all(np.isfinite(b))
    if a_bad or b_bad:
        return 0.5 if a_bad and b_bad else (1.0 if a_bad else 0.0)

    mean_a, mean_b = a.mean(), b.mean()
    se_a, se_b = a.var(ddof=1) / len(a), b.var(ddof=1) / len(b)
    se = se_a + se_b

    if se == 0.0:
        # Both samples constant: the statistic is 0 or infinite
        if mean_a == mean_b:
            return 0.5
        return 0.0 if mean_a < mean_b else 1.0

    t = (mean_a - mean_b) / math.sqrt(se)
    # Welch-Satterthwaite; a zero-variance sample drops out of the denominator
    df = se ** 2 / (se_a ** 2 / (len(a) - 1) + se_b ** 2 / (len(b) - 1))

    tail = 0.5 * special.betainc(df / 2.0, 0.5, df / (df + t * t))
    return float(tail if t < 0 else 1.0 - tail)


def confidence_band(runs: Sequence[Sequence[float]], level: float = 0.95) -> ConfidenceBand:
    """Per-epoch mean +/- t(df=R-1) * s / sqrt(R) over a runs x epochs matrix"""
    if not 0.0 < level < 1.0:
        raise ValueError(f"Confidence level must be in (0, 1), got {level}")

    matrix = np.atleast_2d(np.asarray(runs, dtype=np.float64))
    count = matrix.shape[0]
    mean = matrix.mean(axis=0)

    if count < 2:
        return ConfidenceBand(mean=mean, lo=mean.copy(), hi=mean.copy())

    with np.errstate(invalid="ignore"):
        spread = matrix.std(axis=0, ddof=1)
    critical = stats.t.ppf((1.0 + level) / 2.0, count - 1)
    half = critical * spread / math.sqrt(count)
    half = np.where(np.isfinite(half), half, 0.0)

    return ConfidenceBand(mean=mean, lo=mean - half, hi=mean + half)


def bands_by_initialiser(
    logs: Sequence[RunLog],
    which: LossKind = "train",
    level: float = 0.95,
) -> Dict[str, ConfidenceBand]:
    return {name: confidence_band(matrix, level) for name, matrix in group_by_initialiser(logs, which).items()}


def run_convergence(
    logs: Sequence[RunLog],
    epsilon: float,
    alpha: int,
    which: LossKind = "train",
) -> Dict[str, List[ConvergenceResult]]:
    """Convergence of every individual run, grouped by initialiser"""
    results: Dict[str, List[ConvergenceResult]] = {}
    for log in logs:
        results.setdefault(log.initialiser, []).append(detect_convergence(_losses(log, which), epsilon, alpha))
    return results


def summarise(
    logs: Sequence[RunLog],
    epsilon: float,
    alpha: int,
    which: LossKind = "train",
    reference: str = REFERENCE_INITIALISER,
) -> List[ComparisonRow]:
    """One row per initialiser: epoch-mean convergence plus the final-epoch t-test against ``reference``"""
    means = epoch_means(logs, which)
    finals = {name: matrix[:, -1] for name, matrix in group_by_initialiser(logs, which).items()}
    per_run = run_convergence(logs, epsilon, alpha, which)

    if reference not in finals:
        logger.warning(f"Reference initialiser '{reference}' not in logs; p-values omitted")

    rows = []
    for name, series in means.items():
        convergence = NOT_CONVERGED if series.diverged else detect_convergence(series.values, epsilon, alpha)

        p_value = None
        if name != reference and reference in finals:
            ref_final, other_final = finals[reference], finals[name]
            if len(ref_final) >= 2 and len(other_final) >= 2:
                if np.ptp(ref_final) == 0 and np.ptp(other_final) == 0:
                    logger.warning(f"Zero-variance final losses for {reference} vs {name}; t-test is degenerate")
                p_value = welch_t_one_tailed(ref_final, other_final)
            else:
                logger.warning(
                    f"Fewer than 2 runs for {reference} ({len(ref_final)}) or {name} ({len(other_final)}); "
                    f"p-value omitted"
                )

        converged_runs = [result.epoch for result in per_run[name] if result.converged]
        rows.append(ComparisonRow(
            initialiser=name,
            convergence=convergence,
            final_loss_mean=float(finals[name].mean()),
            p_value=p_value,
            diverged=series.diverged,
            runs=series.runs,
            runs_converged=len(converged_runs),
            mean_run_convergence_epoch=float(np.mean(converged_runs)) if converged_runs else None,
        ))

    return rows
