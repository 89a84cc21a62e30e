"""
Reporting Service for STRADDLE_BENCH
Runs CSV, summary/metadata JSON and loss-curve SVG figures
"""

import csv
import json
import logging
import math
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from .analysis import REFERENCE_INITIALISER, T_TEST_NAME, ComparisonRow, LossKind, bands_by_initialiser  # noqa: E402
from .errors import DataFormatError  # noqa: E402
from .experiment import RunLog  # noqa: E402

logger = logging.getLogger(__name__)

RUNS_HEADER = ["initialiser", "run", "seed", "epoch", "train_loss", "test_loss"]
RUNS_FILE = "runs.csv"
SUMMARY_FILE = "summary.json"
METADATA_FILE = "metadata.json"

# Fixed so figures from different experiments are comparable
INITIALISER_COLOURS = {
    "straddled": "#d62728",
    "glorotuniform": "#1f77b4",
    "glorotnormal": "#17becf",
    "identity": "#2ca02c",
    "henormal": "#9467bd",
    "heuniform": "#e377c2",
    "orthogonal": "#ff7f0e",
    "random": "#7f7f7f",
    "recurrentidentity": "#8c564b",
}
FALLBACK_COLOUR = "#000000"


def _format_float(value: float) -> str:
    """Shortest round-trip text; +inf becomes the literal ``inf``"""
    return repr(float(value))


def _json_float(value: Optional[float]) -> Union[float, str, None]:
    if value is None:
        return None
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return float(value)


def write_runs_csv(logs: Sequence[RunLog], path: Union[str, Path]) -> Path:
    """One line per (initialiser, run, epoch)"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(RUNS_HEADER)
        for log in logs:
            for epoch, (train, test) in enumerate(zip(log.train_loss, log.test_loss)):
                writer.writerow([log.initialiser, log.run, log.seed, epoch, _format_float(train), _format_float(test)])

    logger.info(f"Runs file written: {path}")
    return path


def read_runs_csv(path: Union[str, Path]) -> List[RunLog]:
    """Parse a runs file back into RunLogs, preserving row order"""
    path = Path(path)
    if not path.is_file():
        raise DataFormatError(f"Runs file not found: {path}")

    frame = pd.read_csv(path, float_precision="round_trip", dtype={"initialiser": str})
    if list(frame.columns) != RUNS_HEADER:
        raise DataFormatError(f"{path}: unexpected header {list(frame.columns)}, expected {RUNS_HEADER}")

    logs: List[RunLog] = []
    for (name, run), group in frame.groupby(["initialiser", "run"], sort=False):
        epochs = group["epoch"].to_numpy()
        if not np.array_equal(epochs, np.arange(len(epochs))):
            raise DataFormatError(f"{path}: epochs of {name} run {run} are not 0..{len(epochs) - 1} in order")
        logs.append(RunLog(
            initialiser=str(name),
            run=int(run),
            seed=int(group["seed"].iloc[0]),
            train_loss=[float(v) for v in group["train_loss"]],
            test_loss=[float(v) for v in group["test_loss"]],
        ))
    return logs


def summary_document(
    rows: Sequence[ComparisonRow],
    epsilon: float,
    alpha: int,
    which: LossKind,
    reference: str,
) -> Dict[str, Any]:
    """Everything in here is derivable from the runs file plus the analysis parameters"""
    return {
        "metadata": {
            "loss": which,
            "convergence_epsilon": epsilon,
            "convergence_alpha": alpha,
            "reference": reference,
            "t_test": T_TEST_NAME,
        },
        "rows": [
            {
                "initialiser": row.initialiser,
                "converged": row.convergence.converged,
                "converged_epoch": row.convergence.epoch,
                "converged_loss": _json_float(row.convergence.loss_at_convergence),
                "final_loss_mean": _json_float(row.final_loss_mean),
                "p_value": _json_float(row.p_value),
                "diverged": row.diverged,
                "runs": row.runs,
                "runs_converged": row.runs_converged,
                "mean_run_convergence_epoch": _json_float(row.mean_run_convergence_epoch),
            }
            for row in rows
        ],
    }


def write_json(document: Dict[str, Any], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(document, f, indent=2, allow_nan=False)
        f.write("\n")
    logger.info(f"JSON written: {path}")
    return path


def metadata_document(
    config: Dict[str, Any],
    logs: Sequence[RunLog],
    prng: str,
    version: str,
    dataset_checksum: str,
    split_checksum: str,
    started_at: datetime,
    loss: LossKind = "train",
    reference: str = REFERENCE_INITIALISER,
) -> Dict[str, Any]:
    """Provenance of a run; `loss` and `reference` are the analysis defaults for re-summarising"""
    return {
        "config": config,
        "loss": loss,
        "reference": reference,
        "prng": prng,
        "code_version": version,
        "numpy_version": np.__version__,
        "dataset_sha256": dataset_checksum,
        "split_sha256": split_checksum,
        "t_test": T_TEST_NAME,
        "started_at": started_at.isoformat(),
        "finished_at": datetime.now().isoformat(),
        "wall_seconds": [
            {"initialiser": log.initialiser, "run": log.run, "seed": log.seed, "seconds": round(log.wall_seconds, 3)}
            for log in logs
        ],
    }


def format_summary_table(rows: Sequence[ComparisonRow]) -> str:
    """Plain-text table in the layout of the published result tables"""
    lines = [f"{'Initialiser':>18} | {'Converged Epoch':>15} | {'Converged Loss':>14} | {'p-value':>8}"]
    for row in rows:
        epoch = str(row.convergence.epoch) if row.convergence.converged else "N/A"
        loss = f"{row.convergence.loss_at_convergence:.6f}" if row.convergence.converged else "N/A"
        if row.p_value is None:
            p_text = ""
        elif row.p_value < 0.001:
            p_text = "<0.001"
        else:
            p_text = f"{row.p_value:.3f}"
        lines.append(f"{row.initialiser:>18} | {epoch:>15} | {loss:>14} | {p_text:>8}")
    return "\n".join(lines)


def plot_loss_curves(
    logs: Sequence[RunLog],
    path: Union[str, Path],
    which: LossKind = "train",
    level: float = 0.95,
    title: Optional[str] = None,
) -> Path:
    """Epoch-mean loss per initialiser with a shaded confidence band, saved as SVG"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    bands = bands_by_initialiser(logs, which, level)

    with plt.rc_context({"svg.hashsalt": "straddle-bench", "svg.fonttype": "path"}):
        fig, ax = plt.subplots(figsize=(10, 6))
        for name, band in bands.items():
            colour = INITIALISER_COLOURS.get(name, FALLBACK_COLOUR)
            epochs = np.arange(len(band.mean))
            finite = np.isfinite(band.mean)
            ax.plot(epochs[finite], band.mean[finite], color=colour, linewidth=1.2, label=name)
            ax.fill_between(epochs[finite], band.lo[finite], band.hi[finite], color=colour, alpha=0.2, linewidth=0)

        ax.set_xlabel("Epoch")
        ax.set_ylabel(f"RMSE ({which})")
        ax.set_title(title or f"Loss as a function of training epoch ({int(level * 100)}% band)")
        ax.legend(loc="upper right")
        ax.grid(True, alpha=0.3)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)

    logger.info(f"Figure written: {path}")
    return path
