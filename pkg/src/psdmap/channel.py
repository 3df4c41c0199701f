"""Imperfect sensor-to-fusion-center reporting channel.

Each sensor's report passes through a short destructive filter (circular
convolution) plus additive white Gaussian noise. The filter has three taps
whose gains decay linearly with the sensor's normalized distance from the
fusion center, mimicking a 3-path Rician profile where the farthest sensors
see the weakest paths. Pilot transmissions of the known common component use
the same law and let the fusion center estimate the filters.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from pydantic import BaseModel, Field, model_validator

from .numcore import circular_convolve
from .scene import Scene

__all__ = [
    "ChannelConfig",
    "DestructiveFilter",
    "ChannelRealization",
    "realize_channel",
    "identity_realization",
    "transmit",
    "transmit_pilot",
    "channel_to_json",
    "write_path_gain_csv",
]


class ChannelConfig(BaseModel):
    """Three-path reporting-channel profile.

    ``path_gains_max`` are the tap gains seen right at the fusion center;
    a sensor at normalized distance d gets them scaled by
    ``1 - (1 - gain_floor) * d``, so the farthest sensor keeps a
    ``gain_floor`` fraction. ``snr_db`` is the default report SNR
    (``inf`` disables noise); sweeps override it per cell.
    """

    path_gains_max: tuple[float, float, float] = (1.0, 0.9, 0.8)
    tap_offsets: tuple[int, int, int] = (0, 1, 2)
    gain_floor: float = Field(default=0.1, gt=0.0, le=1.0)
    snr_db: float = math.inf
    seed: int = 0

    @model_validator(mode="after")
    def _check_profile(self) -> "ChannelConfig":
        gains = self.path_gains_max
        if any(g <= 0 for g in gains):
            raise ValueError("path gains must be positive")
        if any(gains[i] < gains[i + 1] for i in range(len(gains) - 1)):
            raise ValueError("path gains must be non-increasing")
        offsets = self.tap_offsets
        if any(o < 0 for o in offsets):
            raise ValueError("tap offsets must be non-negative")
        if any(offsets[i] >= offsets[i + 1] for i in range(len(offsets) - 1)):
            raise ValueError("tap offsets must be strictly increasing")
        return self


@dataclass(frozen=True)
class DestructiveFilter:
    """Tap vector of one sensor's reporting filter (length = report length)."""

    sensor: int
    taps: np.ndarray


@dataclass(frozen=True)
class ChannelRealization:
    """Per-sensor filters plus the noise level they are used with."""

    filters: list[DestructiveFilter]
    snr_db: float

    def filter_for(self, sensor: int) -> DestructiveFilter:
        for f in self.filters:
            if f.sensor == sensor:
                return f
        raise KeyError(f"no filter realized for sensor {sensor}")


def _tap_vector(length: int, offsets, gains) -> np.ndarray:
    if length <= max(offsets):
        raise ValueError(
            f"report length {length} cannot carry a tap at offset {max(offsets)}"
        )
    taps = np.zeros(length)
    for off, g in zip(offsets, gains):
        taps[off] = g
    return taps


def realize_channel(scene: Scene, cfg: ChannelConfig, w_list: list[int]) -> ChannelRealization:
    """Destructive filters for every sensor, scaled by distance to the FC.

    ``w_list[j]`` is sensor j's report length. The gain law is linear in
    normalized distance: the nearest-to-center geometry gets (almost) the
    maximum gains, the farthest sensor exactly ``gain_floor`` times them.
    """
    if len(w_list) != scene.config.sensor_count:
        raise ValueError("w_list must give one report length per sensor")
    dists = np.linalg.norm(scene.sensor_positions - scene.fc_position[None, :], axis=1)
    d_max = float(np.max(dists))
    scaled = dists / d_max if d_max > 0 else np.zeros_like(dists)
    gains_max = np.asarray(cfg.path_gains_max)
    filters = []
    for j, w in enumerate(w_list):
        scale = 1.0 - (1.0 - cfg.gain_floor) * scaled[j]
        filters.append(DestructiveFilter(j, _tap_vector(int(w), cfg.tap_offsets, gains_max * scale)))
    return ChannelRealization(filters=filters, snr_db=cfg.snr_db)


def identity_realization(w_list: list[int], snr_db: float = math.inf) -> ChannelRealization:
    """Perfect reporting channel: unit-impulse filters for every sensor."""
    filters = []
    for j, w in enumerate(w_list):
        taps = np.zeros(int(w))
        taps[0] = 1.0
        filters.append(DestructiveFilter(j, taps))
    return ChannelRealization(filters=filters, snr_db=snr_db)


def transmit(y, filt: DestructiveFilter, snr_db: float, rng: np.random.Generator) -> np.ndarray:
    """Send a report through the sensor's filter and AWGN.

    The noise variance is calibrated against the post-filter signal power
    so that the expected received SNR equals ``snr_db``; infinite SNR sends
    the filtered report unchanged.
    """
    signal = circular_convolve(y, filt.taps)
    if math.isinf(snr_db):
        return signal
    power = float(signal @ signal)
    if power == 0.0:
        raise ValueError("cannot calibrate noise for a zero-power report at finite SNR")
    noise_power = power * 10.0 ** (-snr_db / 10.0)
    sigma = np.sqrt(noise_power / signal.size)
    return signal + rng.normal(0.0, sigma, size=signal.size)


def transmit_pilot(y_common, filt: DestructiveFilter, snr_db: float,
                   rng: np.random.Generator) -> np.ndarray:
    """Pilot transmission of the known common-part measurement.

    Same physical channel as :func:`transmit`; kept separate because the
    fusion center knows what was sent and uses the pair to estimate the
    filter taps.
    """
    return transmit(y_common, filt, snr_db, rng)


def channel_to_json(realization: ChannelRealization) -> str:
    """Serialize per-sensor taps for reproduction of the spatial profile."""
    doc = {
        "snr_db": realization.snr_db,
        "sensors": [
            {
                "sensor": f.sensor,
                "nonzero_offsets": np.flatnonzero(f.taps).tolist(),
                "taps": f.taps[np.flatnonzero(f.taps)].tolist(),
                "length": int(f.taps.size),
            }
            for f in realization.filters
        ],
    }
    return json.dumps(doc, indent=2)


def write_path_gain_csv(scene: Scene, cfg: ChannelConfig, path: str | Path) -> None:
    """Spatial per-path gain table: one row per sensor, one column per path."""
    dists = np.linalg.norm(scene.sensor_positions - scene.fc_position[None, :], axis=1)
    d_max = float(np.max(dists))
    scaled = dists / d_max if d_max > 0 else np.zeros_like(dists)
    gains_max = np.asarray(cfg.path_gains_max)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sensor", "x", "y"] + [f"gain_path{p}" for p in range(gains_max.size)])
        for j in range(scene.config.sensor_count):
            scale = 1.0 - (1.0 - cfg.gain_floor) * scaled[j]
            row = [j, f"{scene.sensor_positions[j, 0]:.6g}", f"{scene.sensor_positions[j, 1]:.6g}"]
            row += [f"{g:.12g}" for g in gains_max * scale]
            writer.writerow(row)
