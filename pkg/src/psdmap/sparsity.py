"""Edge-domain representation and the structured sensing systems built on it.

A piecewise-constant power spectral density (PSD) has a sparse first
difference, its "edge vector". The cumulative-sum matrix maps edges back to
the PSD, and group-of-sensors recovery stacks per-sensor systems into one
block matrix whose first block column carries the common component and whose
block-diagonal remainder carries per-sensor innovations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "cumsum_matrix",
    "diff_operator",
    "edge_vector",
    "psd_from_edges",
    "StackedSystem",
    "assemble_stacked",
    "assemble_cumsum_stack",
]


def cumsum_matrix(n: int) -> np.ndarray:
    """Lower-triangular all-ones matrix: running sum of an edge vector."""
    if n < 1:
        raise ValueError("size must be at least 1")
    return np.tril(np.ones((n, n)))


def diff_operator(n: int) -> np.ndarray:
    """First-difference matrix, the exact inverse of ``cumsum_matrix``.

    Row 0 keeps the first sample (the signal is taken to start from zero),
    every later row is sample i minus sample i-1.
    """
    if n < 1:
        raise ValueError("size must be at least 1")
    gamma = np.eye(n)
    gamma[np.arange(1, n), np.arange(n - 1)] = -1.0
    return gamma


def edge_vector(psd) -> np.ndarray:
    """First differences of a PSD vector (onset at sample 0 counts)."""
    s = np.asarray(psd, dtype=float)
    return np.diff(s, prepend=0.0)


def psd_from_edges(edges) -> np.ndarray:
    """Running sum of an edge vector, reconstructing the PSD."""
    z = np.asarray(edges, dtype=float)
    return np.cumsum(z)


@dataclass(frozen=True)
class StackedSystem:
    """Stacked group sensing system for joint common/innovation recovery.

    ``matrix`` maps the concatenated unknown [common edges; innovations of
    sensor 1; ...; sensor J] to the concatenated measurements of the group.
    ``common_block`` holds its first N columns (all sensors observe the
    common edges), ``innovation_block`` the remaining N*J block-diagonal
    columns (each sensor observes only its own innovations).
    """

    matrix: np.ndarray
    sensor_blocks: list[np.ndarray]
    widths: list[int]
    row_offsets: list[int]
    n: int

    @property
    def j(self) -> int:
        return len(self.sensor_blocks)

    @property
    def total_rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def common_block(self) -> np.ndarray:
        return self.matrix[:, : self.n]

    @property
    def innovation_block(self) -> np.ndarray:
        return self.matrix[:, self.n :]

    def split_solution(self, z) -> tuple[np.ndarray, list[np.ndarray]]:
        """Split a stacked unknown into (common edges, per-sensor innovations)."""
        zv = np.asarray(z, dtype=float)
        expected = self.n * (self.j + 1)
        if zv.size != expected:
            raise ValueError(f"expected stacked vector of length {expected}, got {zv.size}")
        common = zv[: self.n]
        innovations = [zv[self.n * (k + 1) : self.n * (k + 2)] for k in range(self.j)]
        return common, innovations


def _assemble(blocks: list[np.ndarray]) -> StackedSystem:
    n = blocks[0].shape[1]
    widths = [int(b.shape[0]) for b in blocks]
    j = len(blocks)
    total = sum(widths)
    psi = np.zeros((total, n * (j + 1)))
    offsets = []
    row = 0
    for k, block in enumerate(blocks):
        offsets.append(row)
        w = widths[k]
        psi[row : row + w, :n] = block
        psi[row : row + w, n * (k + 1) : n * (k + 2)] = block
        row += w
    return StackedSystem(matrix=psi, sensor_blocks=list(blocks), widths=widths,
                         row_offsets=offsets, n=n)


def assemble_stacked(phi_list: list[np.ndarray], dictionary: np.ndarray) -> StackedSystem:
    """Build the stacked system from per-sensor measurement matrices.

    Each sensor contributes the block ``phi_j @ dictionary``; the first
    block column stacks all of them, the rest is their block diagonal.
    """
    if not phi_list:
        raise ValueError("need at least one measurement matrix")
    d = np.asarray(dictionary, dtype=float)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise ValueError(f"dictionary must be square, got shape {d.shape}")
    n = d.shape[0]
    blocks = []
    for k, phi in enumerate(phi_list):
        p = np.asarray(phi, dtype=float)
        if p.ndim != 2 or p.shape[1] != n:
            raise ValueError(
                f"measurement matrix {k} has {p.shape[1] if p.ndim == 2 else '?'} columns, "
                f"expected {n}"
            )
        blocks.append(p @ d)
    return _assemble(blocks)


def assemble_cumsum_stack(j: int, n: int) -> StackedSystem:
    """Stacked system whose per-sensor blocks are all the cumsum matrix.

    Maps a common/innovation edge split directly to the concatenated group
    PSDs; used to extract the optimal common component from known PSDs.
    """
    if j < 1:
        raise ValueError("group size must be at least 1")
    g = cumsum_matrix(n)
    return _assemble([g] * j)
