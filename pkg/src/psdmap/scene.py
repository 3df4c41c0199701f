"""Synthetic radio environment: primary users, sensors, ground-truth PSDs.

A scene is a square zone of grid points. Each frequency subband is either
vacant or holds a random set of primary users (PUs) at distinct grid points;
every sensor of the uniform lattice observes a piecewise-constant PSD whose
subband level is the distance-attenuated sum of the active PU powers. The
fusion center sits at the zone center, and the sensor lattice is partitioned
into groups of spatially adjacent sensors that share a common PSD component.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from pydantic import BaseModel, Field, model_validator

from .numcore import child_rng

__all__ = [
    "SceneConfig",
    "Scene",
    "GroupOfSensors",
    "generate_scene",
    "ground_truth_psd",
    "ground_truth_psds",
    "partition_groups",
    "group_common_truth",
    "occupancy_labels",
    "scene_to_json",
    "scene_from_json",
    "write_occupancy_csv",
]


class SceneConfig(BaseModel):
    """Scene geometry and randomness knobs.

    Defaults reproduce the full-size scenario: a 122x122 zone, 12x12
    sensors, 32 subbands of 8 samples each (N=256), up to 50 PUs per
    occupied subband, and groups of 4 adjacent sensors.
    """

    grid_side: int = Field(default=122, ge=2)
    sensors_per_side: int = Field(default=12, ge=1)
    subbands: int = Field(default=32, ge=1)
    samples_per_subband: int = Field(default=8, ge=1)
    max_pus_per_subband: int = Field(default=50, ge=1)
    occupancy_prob: float = Field(default=0.5, gt=0.0, le=1.0)
    pu_power_max: float = Field(default=1.0, gt=0.0)
    pathloss_exponent: float = Field(default=2.0, gt=0.0)
    group_size: int = Field(default=4, ge=1)
    holding_snapshots: int = Field(default=1, ge=1)
    seed: int = 0

    @property
    def n(self) -> int:
        """Total PSD length N."""
        return self.subbands * self.samples_per_subband

    @property
    def sensor_count(self) -> int:
        return self.sensors_per_side**2

    @model_validator(mode="after")
    def _check_geometry(self) -> "SceneConfig":
        if self.max_pus_per_subband > self.grid_side**2:
            raise ValueError(
                f"max_pus_per_subband={self.max_pus_per_subband} exceeds the "
                f"{self.grid_side**2} grid points available"
            )
        if self.sensors_per_side > self.grid_side:
            raise ValueError("sensor lattice does not fit the grid")
        if self.sensor_count % self.group_size != 0:
            raise ValueError(
                f"group_size={self.group_size} does not divide "
                f"{self.sensor_count} sensors"
            )
        return self


@dataclass(frozen=True)
class GroupOfSensors:
    """Indices of the sensors forming one group, row-major group id."""

    group_id: int
    sensor_indices: tuple[int, ...]


@dataclass
class Scene:
    """One realization of the radio environment.

    ``pu_positions[b]`` is a (k, 2) float array of grid coordinates for the
    active PUs of subband ``b`` (empty for a vacant subband) and
    ``pu_powers[b]`` their transmit powers in (0, pu_power_max].
    """

    config: SceneConfig
    pu_positions: list[np.ndarray]
    pu_powers: list[np.ndarray]
    sensor_positions: np.ndarray = field(repr=False)
    fc_position: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.config.n


def _sensor_lattice(cfg: SceneConfig) -> np.ndarray:
    # cell centers of an MxM partition of the zone, row-major ordering
    m = cfg.sensors_per_side
    coords = (np.arange(m) + 0.5) * cfg.grid_side / m
    xx, yy = np.meshgrid(coords, coords, indexing="ij")
    return np.column_stack([xx.ravel(), yy.ravel()])


def generate_scene(cfg: SceneConfig) -> Scene:
    """Draw a scene realization, deterministic given ``cfg.seed``.

    Each subband is occupied with probability ``occupancy_prob``; an
    occupied subband receives a PU count uniform on [1, max_pus_per_subband],
    distinct uniform grid positions, and powers uniform on (0, pu_power_max].
    """
    rng = child_rng(cfg.seed, 0)
    side = cfg.grid_side
    occupied = rng.random(cfg.subbands) < cfg.occupancy_prob
    while not occupied.any():
        # an all-vacant zone has no PSD to reconstruct; redraw
        occupied = rng.random(cfg.subbands) < cfg.occupancy_prob
    positions: list[np.ndarray] = []
    powers: list[np.ndarray] = []
    for b in range(cfg.subbands):
        if not occupied[b]:
            positions.append(np.zeros((0, 2)))
            powers.append(np.zeros(0))
            continue
        count = int(rng.integers(1, cfg.max_pus_per_subband + 1))
        flat = rng.choice(side * side, size=count, replace=False)
        pos = np.column_stack([flat // side, flat % side]).astype(float)
        pwr = (1.0 - rng.random(count)) * cfg.pu_power_max
        positions.append(pos)
        powers.append(pwr)
    return Scene(
        config=cfg,
        pu_positions=positions,
        pu_powers=powers,
        sensor_positions=_sensor_lattice(cfg),
        fc_position=np.array([side / 2.0, side / 2.0]),
    )


def _subband_levels(scene: Scene, sensor_xy: np.ndarray) -> np.ndarray:
    cfg = scene.config
    alpha = cfg.pathloss_exponent
    levels = np.zeros(cfg.subbands)
    for b in range(cfg.subbands):
        pos = scene.pu_positions[b]
        if pos.shape[0] == 0:
            continue
        dist = np.linalg.norm(pos - sensor_xy[None, :], axis=1)
        levels[b] = np.sum(scene.pu_powers[b] * (1.0 + dist) ** (-alpha))
    return levels


def ground_truth_psd(scene: Scene, sensor_index: int) -> np.ndarray:
    """True PSD seen by one sensor: constant within each subband.

    The subband level is the sum over its PUs of power * (1+d)^(-alpha)
    with d the Euclidean distance from the sensor; vacant subbands are
    exactly zero.
    """
    if not 0 <= sensor_index < scene.config.sensor_count:
        raise ValueError(f"sensor index {sensor_index} out of range")
    levels = _subband_levels(scene, scene.sensor_positions[sensor_index])
    return np.repeat(levels, scene.config.samples_per_subband)


def ground_truth_psds(scene: Scene) -> np.ndarray:
    """All sensors' true PSDs stacked into a (sensor_count, N) matrix."""
    cfg = scene.config
    out = np.zeros((cfg.sensor_count, cfg.n))
    for idx in range(cfg.sensor_count):
        out[idx] = ground_truth_psd(scene, idx)
    return out


def partition_groups(cfg: SceneConfig) -> list[GroupOfSensors]:
    """Partition the sensor lattice into groups of ``group_size`` sensors.

    Group size 4 uses 2x2 adjacent blocks of the lattice (requires an even
    lattice side); size 1 gives singleton groups. Other sizes that divide
    the sensor count fall back to row-major runs.
    """
    m = cfg.sensors_per_side
    j = cfg.group_size
    if m * m % j != 0:
        raise ValueError(f"cannot partition {m * m} sensors into groups of {j}")
    groups: list[GroupOfSensors] = []
    if j == 4:
        if m % 2 != 0:
            raise ValueError(f"2x2 grouping needs an even lattice side, got {m}")
        gid = 0
        for br in range(0, m, 2):
            for bc in range(0, m, 2):
                idx = (br * m + bc, br * m + bc + 1, (br + 1) * m + bc, (br + 1) * m + bc + 1)
                groups.append(GroupOfSensors(gid, idx))
                gid += 1
        return groups
    for gid in range(m * m // j):
        groups.append(GroupOfSensors(gid, tuple(range(gid * j, (gid + 1) * j))))
    return groups


def group_common_truth(scene: Scene, group: GroupOfSensors) -> tuple[np.ndarray, list[np.ndarray]]:
    """Canonical diagnostic split of a group's true PSDs.

    The common part is the element-wise minimum over the group (the largest
    non-negative component every sensor shares); innovations are the
    remainders, so common + innovation reproduces each PSD exactly.
    Reconstruction never consumes this split.
    """
    psds = [ground_truth_psd(scene, s) for s in group.sensor_indices]
    common = np.min(np.stack(psds), axis=0)
    return common, [p - common for p in psds]


def occupancy_labels(scene: Scene) -> np.ndarray:
    """Boolean per-subband truth: does any PU transmit in the subband."""
    return np.array([p.shape[0] > 0 for p in scene.pu_positions])


def scene_to_json(scene: Scene) -> str:
    """Serialize a scene (config, PU lists, lattice) to a JSON document."""
    doc = {
        "config": scene.config.model_dump(),
        "subbands": [
            {
                "positions": scene.pu_positions[b].tolist(),
                "powers": scene.pu_powers[b].tolist(),
            }
            for b in range(scene.config.subbands)
        ],
        "sensor_positions": scene.sensor_positions.tolist(),
        "fc_position": scene.fc_position.tolist(),
    }
    return json.dumps(doc, indent=2)


def scene_from_json(text: str) -> Scene:
    """Inverse of :func:`scene_to_json`."""
    doc = json.loads(text)
    cfg = SceneConfig(**doc["config"])
    positions = [np.asarray(sb["positions"], dtype=float).reshape(-1, 2) for sb in doc["subbands"]]
    powers = [np.asarray(sb["powers"], dtype=float) for sb in doc["subbands"]]
    return Scene(
        config=cfg,
        pu_positions=positions,
        pu_powers=powers,
        sensor_positions=np.asarray(doc["sensor_positions"], dtype=float),
        fc_position=np.asarray(doc["fc_position"], dtype=float),
    )


def write_occupancy_csv(scene: Scene, path: str | Path) -> None:
    """Ground-truth occupancy grid: one row per sensor, one column per subband.

    Every sensor sees the same global occupancy (any active PU reaches every
    sensor with nonzero power), so rows are identical by construction.
    """
    labels = occupancy_labels(scene).astype(int)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sensor"] + [f"subband_{b}" for b in range(scene.config.subbands)])
        for idx in range(scene.config.sensor_count):
            writer.writerow([idx] + labels.tolist())
