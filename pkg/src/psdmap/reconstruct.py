"""Reconstruction engines run by the fusion center.

Four recovery paths over a group of sensors, all producing per-sensor PSDs:

* individual  — each sensor's report solved on its own,
* joint       — one stacked solve over the group's shared/innovation split,
* known-common — the common edges are known, only innovations are solved,
* compensated — like known-common, but the system is premultiplied by the
  block-diagonal circulant of the estimated reporting filters so the solve
  matches what the channel actually delivered.

Plus the extraction of the optimal common component from a set of PSDs and
the pilot-based estimation of the reporting filters.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from functools import lru_cache

from .numcore import circulant
from .solvers import BpdnOptions, SolveReport, bpdn, fit_filter, min_l1_equality
from .sparsity import (
    StackedSystem,
    assemble_cumsum_stack,
    assemble_stacked,
    edge_vector,
    psd_from_edges,
)


@lru_cache(maxsize=8)
def _edge_identity_stack(j: int, n: int) -> np.ndarray:
    """Stacked system with identity blocks: edge-domain form of the PSD stack."""
    eye = np.eye(n)
    out = np.zeros((n * j, n * (j + 1)))
    for k in range(j):
        out[k * n : (k + 1) * n, :n] = eye
        out[k * n : (k + 1) * n, (k + 1) * n : (k + 2) * n] = eye
    return out

__all__ = [
    "GroupMeasurements",
    "CommonKnowledge",
    "CompensationSet",
    "reconstruct_individual",
    "reconstruct_jsm",
    "optimal_common",
    "reconstruct_known_common",
    "estimate_filters",
    "reconstruct_compensated",
    "block_diag_circulant",
]


@dataclass
class GroupMeasurements:
    """Everything the fusion center holds for one group and one snapshot."""

    received: list[np.ndarray]
    phis: list[np.ndarray]
    pilots: list[np.ndarray] | None = None
    widths: list[int] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.widths:
            self.widths = [int(r.size) for r in self.received]
        if len(self.received) != len(self.phis):
            raise ValueError("one measurement matrix per received report required")
        for r, phi, w in zip(self.received, self.phis, self.widths):
            if r.size != w or phi.shape[0] != w:
                raise ValueError("report lengths, widths and matrix rows must agree")

    @property
    def group_size(self) -> int:
        return len(self.received)

    @property
    def stacked(self) -> np.ndarray:
        return np.concatenate(self.received)


@dataclass(frozen=True)
class CommonKnowledge:
    """Common edge vector shared by FC and sensors for a span of snapshots."""

    edges: np.ndarray
    valid_for: tuple[int, int] = (0, 1)


@dataclass(frozen=True)
class CompensationSet:
    """Estimated reporting filters and their block-diagonal circulant."""

    filters: list[np.ndarray]
    matrix: np.ndarray


def block_diag_circulant(tap_vectors: list[np.ndarray]) -> np.ndarray:
    """Block-diagonal matrix with one circulant block per tap vector."""
    blocks = [circulant(t) for t in tap_vectors]
    total = sum(b.shape[0] for b in blocks)
    out = np.zeros((total, total))
    row = 0
    for b in blocks:
        w = b.shape[0]
        out[row : row + w, row : row + w] = b
        row += w
    return out


def _psd_outputs(common: np.ndarray, innovations: list[np.ndarray]) -> list[np.ndarray]:
    return [psd_from_edges(common + inn) for inn in innovations]


def reconstruct_individual(
    received: np.ndarray, phi: np.ndarray, dictionary: np.ndarray, opts: BpdnOptions | None = None
) -> tuple[np.ndarray, SolveReport]:
    """Per-sensor recovery: solve the sensor's own compressed system.

    Assumes the report arrived unperturbed. Returns the PSD synthesized
    from the recovered edges plus the solver report.
    """
    report = bpdn(np.asarray(phi) @ np.asarray(dictionary), received, opts)
    return psd_from_edges(report.solution), report


def reconstruct_jsm(
    gm: GroupMeasurements, dictionary: np.ndarray, opts: BpdnOptions | None = None
) -> tuple[list[np.ndarray], SolveReport, StackedSystem]:
    """Joint recovery of the whole group through the stacked system.

    One solve finds the common edges and every sensor's innovations at
    once; each PSD is the running sum of common + own innovation.
    """
    system = assemble_stacked(gm.phis, dictionary)
    report = bpdn(system.matrix, gm.stacked, opts)
    common, innovations = system.split_solution(report.solution)
    return _psd_outputs(common, innovations), report, system


def optimal_common(
    psd_list: list[np.ndarray],
    mode: str = "innovation_only",
    feas_tol: float = 1e-6,
) -> tuple[np.ndarray, list[np.ndarray], SolveReport]:
    """Optimal common component of a set of PSDs.

    Stacks the PSDs and solves the equality-constrained weighted l1 problem
    over the stacked cumsum system. ``mode='jsm'`` penalizes all edges
    (common included); ``mode='innovation_only'`` leaves the common block
    free and minimizes the innovations' l1 norm alone, which maximizes
    their sparsity.
    """
    if mode not in ("jsm", "innovation_only"):
        raise ValueError(f"unknown mode {mode!r}")
    j = len(psd_list)
    if j < 1:
        raise ValueError("need at least one PSD")
    n = int(np.asarray(psd_list[0]).size)
    system = assemble_cumsum_stack(j, n)
    weights = np.ones(n * (j + 1))
    if mode == "innovation_only":
        weights[:n] = 0.0
    # Row-precondition by the block difference operator: the constraint
    # "stacked running sums equal the PSDs" becomes "common + innovation
    # edges equal each PSD's edge vector". Same feasible set (the operator
    # is invertible), but the system is perfectly conditioned, which the
    # penalized homotopy needs.
    edge_stack = _edge_identity_stack(j, n)
    edge_targets = np.concatenate([edge_vector(p) for p in psd_list])
    report = min_l1_equality(edge_stack, edge_targets, weights, feas_tol=feas_tol,
                             lipschitz=float(j + 1))
    common, innovations = system.split_solution(report.solution)
    return common, innovations, report


def reconstruct_known_common(
    gm: GroupMeasurements,
    ck: CommonKnowledge,
    dictionary: np.ndarray,
    opts: BpdnOptions | None = None,
) -> tuple[list[np.ndarray], SolveReport]:
    """Innovation-only recovery when the common edges are already known.

    Subtracts the common part's contribution from the stacked reports and
    solves the smaller block-diagonal system for the innovations only.
    """
    system = assemble_stacked(gm.phis, dictionary)
    r_inn = gm.stacked - system.common_block @ ck.edges
    report = bpdn(system.innovation_block, r_inn, opts)
    innovations = [
        report.solution[k * system.n : (k + 1) * system.n] for k in range(system.j)
    ]
    return _psd_outputs(ck.edges, innovations), report


def estimate_filters(
    gm: GroupMeasurements,
    ck: CommonKnowledge,
    dictionary: np.ndarray,
    ridge: float = 0.0,
) -> CompensationSet:
    """Estimate each sensor's reporting filter from its pilot.

    The fusion center knows the common edges and the measurement matrices,
    so it can regenerate what each sensor sent as pilot and deconvolve the
    received pilot through the circulant least-squares fit.
    """
    if gm.pilots is None:
        raise ValueError("group measurements carry no pilots")
    d = np.asarray(dictionary, dtype=float)
    taps = []
    for phi, pilot_rx in zip(gm.phis, gm.pilots):
        sent = np.asarray(phi) @ (d @ ck.edges)
        taps.append(fit_filter(circulant(sent), pilot_rx, ridge=ridge))
    return CompensationSet(filters=taps, matrix=block_diag_circulant(taps))


def reconstruct_compensated(
    gm: GroupMeasurements,
    ck: CommonKnowledge,
    comp: CompensationSet,
    dictionary: np.ndarray,
    opts: BpdnOptions | None = None,
    mode: str = "known_common",
) -> tuple[list[np.ndarray], SolveReport]:
    """Channel-aware recovery through the compensated system.

    Premultiplies the stacked system by the block-diagonal circulant of the
    estimated filters so the model matches the perturbed reports. The
    default solves the known-common innovation form; ``mode='jsm'`` is the
    full-joint ablation where the common edges are treated as unknown.
    """
    if mode not in ("known_common", "jsm"):
        raise ValueError(f"unknown mode {mode!r}")
    system = assemble_stacked(gm.phis, dictionary)
    if mode == "jsm":
        report = bpdn(comp.matrix @ system.matrix, gm.stacked, opts)
        common, innovations = system.split_solution(report.solution)
        return _psd_outputs(common, innovations), report
    r_inn = gm.stacked - comp.matrix @ (system.common_block @ ck.edges)
    report = bpdn(comp.matrix @ system.innovation_block, r_inn, opts)
    innovations = [
        report.solution[k * system.n : (k + 1) * system.n] for k in range(system.j)
    ]
    return _psd_outputs(ck.edges, innovations), report
