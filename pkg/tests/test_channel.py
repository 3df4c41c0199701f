"""Tests for the imperfect reporting channel."""

import json
import math

import numpy as np
import pytest
from pydantic import ValidationError

from psdmap.channel import (
    ChannelConfig,
    channel_to_json,
    identity_realization,
    realize_channel,
    transmit,
    transmit_pilot,
    write_path_gain_csv,
)
from psdmap.numcore import child_rng
from psdmap.scene import SceneConfig, generate_scene

DESK = dict(grid_side=40, sensors_per_side=4, subbands=8, samples_per_subband=8)


def desk_scene(seed=0):
    return generate_scene(SceneConfig(seed=seed, **DESK))


class TestConfig:
    def test_defaults(self):
        cfg = ChannelConfig()
        assert cfg.path_gains_max == (1.0, 0.9, 0.8)
        assert cfg.tap_offsets == (0, 1, 2)
        assert cfg.gain_floor == 0.1

    def test_increasing_gains_rejected(self):
        with pytest.raises(ValidationError):
            ChannelConfig(path_gains_max=(0.5, 0.9, 0.8))

    def test_non_increasing_offsets_rejected(self):
        with pytest.raises(ValidationError):
            ChannelConfig(tap_offsets=(0, 2, 2))


class TestRealize:
    def test_sensor_at_fc_gets_max_gains(self):
        scene = desk_scene()
        # move sensor 0 onto the fusion center
        scene.sensor_positions[0] = scene.fc_position.copy()
        realization = realize_channel(scene, ChannelConfig(), [16] * 16)
        taps = realization.filters[0].taps
        assert np.allclose(taps[[0, 1, 2]], [1.0, 0.9, 0.8])
        assert np.count_nonzero(taps) == 3

    def test_floor_one_gives_identical_filters(self):
        scene = desk_scene()
        realization = realize_channel(scene, ChannelConfig(gain_floor=1.0), [16] * 16)
        ref = realization.filters[0].taps
        for f in realization.filters[1:]:
            assert np.array_equal(f.taps, ref)

    def test_nearer_sensor_dominates_tapwise(self):
        scene = desk_scene()
        realization = realize_channel(scene, ChannelConfig(), [16] * 16)
        dists = np.linalg.norm(scene.sensor_positions - scene.fc_position, axis=1)
        near, far = int(np.argmin(dists)), int(np.argmax(dists))
        assert np.all(realization.filters[near].taps >= realization.filters[far].taps)

    def test_farthest_sensor_at_floor(self):
        scene = desk_scene()
        cfg = ChannelConfig()
        realization = realize_channel(scene, cfg, [16] * 16)
        dists = np.linalg.norm(scene.sensor_positions - scene.fc_position, axis=1)
        far = int(np.argmax(dists))
        expected = cfg.gain_floor * np.asarray(cfg.path_gains_max)
        assert np.allclose(realization.filters[far].taps[[0, 1, 2]], expected)

    def test_short_report_rejected(self):
        scene = desk_scene()
        with pytest.raises(ValueError, match="offset"):
            realize_channel(scene, ChannelConfig(), [2] * 16)


class TestTransmit:
    def test_identity_channel_noiseless(self):
        rng = child_rng(31, 0)
        y = rng.normal(size=12)
        filt = identity_realization([12]).filters[0]
        assert np.array_equal(transmit(y, filt, math.inf, rng), y)

    def test_cyclic_shift_filter(self):
        filt = identity_realization([4]).filters[0]
        taps = np.zeros(4)
        taps[1] = 1.0
        shifted = type(filt)(0, taps)
        out = transmit(np.array([1.0, 2.0, 3.0, 4.0]), shifted, math.inf, child_rng(31, 1))
        assert np.allclose(out, [4.0, 1.0, 2.0, 3.0])

    def test_noise_power_calibration(self):
        # empirical SNR over many trials within +-0.5 dB of the target
        rng = child_rng(32, 0)
        y = rng.normal(size=64)
        filt = identity_realization([64]).filters[0]
        signal_power = float(y @ y)
        noise_powers = []
        for trial in range(1000):
            r = transmit(y, filt, 0.0, child_rng(32, 1, trial))
            noise_powers.append(float((r - y) @ (r - y)))
        snr_emp = 10 * np.log10(signal_power / np.mean(noise_powers))
        assert abs(snr_emp) < 0.5

    def test_zero_signal_finite_snr_rejected(self):
        filt = identity_realization([8]).filters[0]
        with pytest.raises(ValueError, match="zero-power"):
            transmit(np.zeros(8), filt, 10.0, child_rng(33, 0))

    def test_deterministic_given_stream(self):
        rng_y = child_rng(34, 0)
        y = rng_y.normal(size=16)
        filt = identity_realization([16]).filters[0]
        a = transmit(y, filt, 5.0, child_rng(34, 1))
        b = transmit(y, filt, 5.0, child_rng(34, 1))
        assert np.array_equal(a, b)

    def test_pilot_same_contract(self):
        rng = child_rng(35, 0)
        y = rng.normal(size=16)
        filt = identity_realization([16]).filters[0]
        assert np.array_equal(transmit_pilot(y, filt, math.inf, rng), y)
        taps = np.zeros(16)
        taps[1] = 1.0
        shifted = type(filt)(0, taps)
        assert np.allclose(
            transmit_pilot(np.arange(16.0), shifted, math.inf, rng),
            np.roll(np.arange(16.0), 1),
        )


class TestExports:
    def test_channel_json(self):
        scene = desk_scene()
        realization = realize_channel(scene, ChannelConfig(), [16] * 16)
        doc = json.loads(channel_to_json(realization))
        assert len(doc["sensors"]) == 16
        assert doc["sensors"][0]["nonzero_offsets"] == [0, 1, 2]

    def test_path_gain_csv(self, tmp_path):
        scene = desk_scene()
        path = tmp_path / "gains.csv"
        write_path_gain_csv(scene, ChannelConfig(), path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "sensor,x,y,gain_path0,gain_path1,gain_path2"
        assert len(lines) == 17
