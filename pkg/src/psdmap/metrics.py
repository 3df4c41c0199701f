"""Evaluation: reconstruction error, fail rates, occupancy detection, ROC.

A reconstruction "fails" when its solver did not converge or its relative
MSE exceeds 1 (worse than reporting all zeros). Detection scores are mean
reconstructed subband powers; the ROC sweeps a global threshold over all
pooled scores and integrates by the trapezoid rule.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "TrialReport",
    "RocCurve",
    "FailSummary",
    "relative_mse",
    "fail_flags",
    "fail_rate",
    "five_number",
    "occupancy_scores",
    "roc",
    "write_roc_csv",
    "write_failrate_csv",
    "write_mse_time_csv",
]

FAIL_MSE_THRESHOLD = 1.0

METHODS = (
    "individual",
    "jsm",
    "known_common_jsm_zc",
    "known_common_opt_zc",
    "compensated",
    "uncompensated",
)


@dataclass
class TrialReport:
    """One method's outcome for one snapshot (all sensors pooled)."""

    snapshot: int
    method: str
    sensor_mse: np.ndarray
    converged: np.ndarray
    wall_time: float
    scores: np.ndarray = field(default_factory=lambda: np.zeros((0, 0)))
    labels: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"unknown method id {self.method!r}")
        self.sensor_mse = np.asarray(self.sensor_mse, dtype=float)
        self.converged = np.asarray(self.converged, dtype=bool)
        if self.sensor_mse.shape != self.converged.shape:
            raise ValueError("per-sensor MSE and convergence flags must align")


@dataclass(frozen=True)
class RocCurve:
    """Operating points from (0,0) to (1,1) plus the trapezoid AUC."""

    points: np.ndarray
    auc: float


@dataclass(frozen=True)
class FailSummary:
    """Overall fail fraction plus the five-number spread of per-trial fractions."""

    fraction: float
    minimum: float
    q1: float
    median: float
    q3: float
    maximum: float


def relative_mse(estimate, truth) -> float:
    """Squared error relative to the truth's power."""
    est = np.asarray(estimate, dtype=float)
    ref = np.asarray(truth, dtype=float)
    if est.shape != ref.shape:
        raise ValueError(f"shape mismatch: {est.shape} vs {ref.shape}")
    power = float(ref @ ref)
    if power == 0.0:
        raise ValueError("relative MSE is undefined for a zero-power truth")
    diff = est - ref
    return float(diff @ diff) / power


def fail_flags(report: TrialReport) -> np.ndarray:
    """Per-sensor fail indicator: diverged solver or worse than zero estimate."""
    return (~report.converged) | (report.sensor_mse > FAIL_MSE_THRESHOLD)


def five_number(values) -> tuple[float, float, float, float, float]:
    """Min, quartiles (linear interpolation) and max of a sample."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("cannot summarize an empty sample")
    q1, med, q3 = np.percentile(v, [25.0, 50.0, 75.0])
    return float(np.min(v)), float(q1), float(med), float(q3), float(np.max(v))


def fail_rate(reports: list[TrialReport]) -> dict[str, FailSummary]:
    """Per-method fail statistics over a pool of trial reports.

    The fraction counts failed (sensor, snapshot) reconstructions; the
    five-number summary spreads the per-trial fail fractions for boxplots.
    """
    if not reports:
        raise ValueError("no reports to summarize")
    by_method: dict[str, list[np.ndarray]] = {}
    for rep in reports:
        by_method.setdefault(rep.method, []).append(fail_flags(rep))
    out = {}
    for method, flags in by_method.items():
        pooled = np.concatenate(flags)
        per_trial = np.array([np.mean(f) for f in flags])
        mn, q1, med, q3, mx = five_number(per_trial)
        out[method] = FailSummary(float(np.mean(pooled)), mn, q1, med, q3, mx)
    return out


def occupancy_scores(psd, samples_per_subband: int) -> np.ndarray:
    """Detection score per subband: mean reconstructed power over its samples."""
    s = np.asarray(psd, dtype=float)
    if s.size % samples_per_subband != 0:
        raise ValueError(
            f"PSD length {s.size} is not a multiple of {samples_per_subband} samples per subband"
        )
    return s.reshape(-1, samples_per_subband).mean(axis=1)


def roc(scores, labels) -> RocCurve:
    """Empirical ROC over pooled scores.

    Sweeps the decision threshold across every distinct score; detection
    probability is counted over occupied entries, false alarms over vacant
    ones. Requires both classes to be present.
    """
    sc = np.asarray(scores, dtype=float).ravel()
    lb = np.asarray(labels, dtype=bool).ravel()
    if sc.shape != lb.shape:
        raise ValueError("scores and labels must align")
    positives = int(np.sum(lb))
    negatives = int(lb.size - positives)
    if positives == 0 or negatives == 0:
        raise ValueError("ROC needs both occupied and vacant examples")
    order = np.argsort(-sc, kind="stable")
    sorted_scores = sc[order]
    sorted_labels = lb[order]
    tp = np.cumsum(sorted_labels)
    fp = np.cumsum(~sorted_labels)
    # keep one operating point per distinct threshold value
    distinct = np.flatnonzero(np.diff(sorted_scores, append=-np.inf))
    p_d = tp[distinct] / positives
    p_fa = fp[distinct] / negatives
    points = np.vstack([[0.0, 0.0], np.column_stack([p_fa, p_d])])
    if points[-1, 0] != 1.0 or points[-1, 1] != 1.0:
        points = np.vstack([points, [1.0, 1.0]])
    auc = float(np.trapezoid(points[:, 1], points[:, 0]))
    return RocCurve(points=points, auc=auc)


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def write_roc_csv(rows: list[tuple], path: str | Path) -> None:
    """rows: (method, snr_db, p_fa, p_d) sorted by caller."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "snr_db", "p_fa", "p_d"])
        for method, snr_db, p_fa, p_d in rows:
            writer.writerow([method, _fmt(snr_db), _fmt(p_fa), _fmt(p_d)])


def write_failrate_csv(rows: list[tuple], path: str | Path) -> None:
    """rows: (method, snr_db, sensing_rate, min, q1, median, q3, max)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "snr_db", "sensing_rate", "min", "q1", "median", "q3", "max"])
        for method, snr_db, rate, mn, q1, med, q3, mx in rows:
            writer.writerow([method, _fmt(snr_db), _fmt(rate)] + [_fmt(v) for v in (mn, q1, med, q3, mx)])


def write_mse_time_csv(rows: list[tuple], path: str | Path) -> None:
    """rows: (method, sensing_rate, mean_mse, mean_seconds)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "sensing_rate", "mean_mse", "mean_seconds"])
        for method, rate, mse, seconds in rows:
            writer.writerow([method, _fmt(rate), _fmt(mse), _fmt(seconds)])
