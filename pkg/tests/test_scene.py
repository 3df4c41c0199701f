"""Tests for scene generation and ground-truth PSDs."""

import numpy as np
import pytest
from pydantic import ValidationError

from psdmap.scene import (
    SceneConfig,
    generate_scene,
    ground_truth_psd,
    ground_truth_psds,
    group_common_truth,
    occupancy_labels,
    partition_groups,
    scene_from_json,
    scene_to_json,
    write_occupancy_csv,
)
from psdmap.sparsity import edge_vector

DESK = dict(grid_side=40, sensors_per_side=4, subbands=8, samples_per_subband=8)


class TestConfig:
    def test_defaults_match_scenario(self):
        cfg = SceneConfig()
        assert cfg.grid_side == 122
        assert cfg.sensors_per_side == 12
        assert cfg.n == 256
        assert cfg.max_pus_per_subband == 50
        assert cfg.group_size == 4

    def test_too_many_pus_rejected(self):
        with pytest.raises(ValidationError, match="grid points"):
            SceneConfig(grid_side=5, max_pus_per_subband=26)

    def test_group_size_must_divide(self):
        with pytest.raises(ValidationError):
            SceneConfig(sensors_per_side=3, group_size=4)


class TestGenerate:
    def test_counts_and_bounds(self):
        scene = generate_scene(SceneConfig(seed=1, occupancy_prob=1.0))
        assert len(scene.pu_positions) == 32
        for pos, pwr in zip(scene.pu_positions, scene.pu_powers):
            assert 1 <= pos.shape[0] <= 50
            assert np.all(pwr > 0) and np.all(pwr <= 1.0)
            assert np.all(pos >= 0) and np.all(pos <= 121)

    def test_positions_distinct_per_subband(self):
        scene = generate_scene(SceneConfig(seed=2, occupancy_prob=1.0))
        for pos in scene.pu_positions:
            flat = pos[:, 0] * 122 + pos[:, 1]
            assert len(np.unique(flat)) == pos.shape[0]

    def test_forced_single_pu(self):
        scene = generate_scene(SceneConfig(seed=3, max_pus_per_subband=1, occupancy_prob=1.0))
        assert all(p.shape[0] == 1 for p in scene.pu_positions)

    def test_deterministic(self):
        a = generate_scene(SceneConfig(seed=4))
        b = generate_scene(SceneConfig(seed=4))
        for pa, pb in zip(a.pu_positions, b.pu_positions):
            assert np.array_equal(pa, pb)
        for wa, wb in zip(a.pu_powers, b.pu_powers):
            assert np.array_equal(wa, wb)

    def test_at_least_one_occupied_subband(self):
        for seed in range(40):
            scene = generate_scene(SceneConfig(seed=seed, **DESK))
            assert occupancy_labels(scene).any()

    def test_fc_at_center(self):
        scene = generate_scene(SceneConfig(seed=5))
        assert np.array_equal(scene.fc_position, [61.0, 61.0])


class TestGroundTruth:
    def test_colocated_pu_gives_its_power(self):
        cfg = SceneConfig(seed=6, **DESK)
        scene = generate_scene(cfg)
        # place one PU exactly on sensor 0 in subband 0
        scene.pu_positions[0] = scene.sensor_positions[0][None, :].copy()
        scene.pu_powers[0] = np.array([0.7])
        psd = ground_truth_psd(scene, 0)
        assert np.allclose(psd[: cfg.samples_per_subband], 0.7)

    def test_vacant_subband_is_zero(self):
        cfg = SceneConfig(seed=7, **DESK)
        scene = generate_scene(cfg)
        labels = occupancy_labels(scene)
        psd = ground_truth_psd(scene, 3)
        for b in range(cfg.subbands):
            block = psd[b * 8 : (b + 1) * 8]
            if labels[b]:
                assert np.all(block > 0)
            else:
                assert np.all(block == 0)

    def test_monotone_decay_with_distance(self):
        cfg = SceneConfig(seed=8, **DESK)
        scene = generate_scene(cfg)
        pu = np.array([[0.0, 0.0]])
        scene.pu_positions = [pu] + [np.zeros((0, 2))] * (cfg.subbands - 1)
        scene.pu_powers = [np.array([1.0])] + [np.zeros(0)] * (cfg.subbands - 1)
        dists = np.linalg.norm(scene.sensor_positions, axis=1)
        near, far = int(np.argmin(dists)), int(np.argmax(dists))
        assert ground_truth_psd(scene, near)[0] > ground_truth_psd(scene, far)[0]

    def test_piecewise_constant_edge_budget(self):
        cfg = SceneConfig(seed=9, **DESK)
        scene = generate_scene(cfg)
        for s in range(cfg.sensor_count):
            z = edge_vector(ground_truth_psd(scene, s))
            breaks = np.flatnonzero(z)
            assert np.all(breaks % cfg.samples_per_subband == 0)

    def test_matrix_matches_per_sensor(self):
        cfg = SceneConfig(seed=10, **DESK)
        scene = generate_scene(cfg)
        mat = ground_truth_psds(scene)
        assert mat.shape == (16, 64)
        assert np.array_equal(mat[5], ground_truth_psd(scene, 5))


class TestGroups:
    def test_paper_scale_partition(self):
        groups = partition_groups(SceneConfig())
        assert len(groups) == 36
        seen = sorted(i for g in groups for i in g.sensor_indices)
        assert seen == list(range(144))
        assert all(len(g.sensor_indices) == 4 for g in groups)

    def test_blocks_are_adjacent(self):
        cfg = SceneConfig(**DESK, seed=0)
        scene = generate_scene(cfg)
        for g in partition_groups(cfg):
            pos = scene.sensor_positions[list(g.sensor_indices)]
            span = np.max(pos, axis=0) - np.min(pos, axis=0)
            assert np.all(span <= cfg.grid_side / cfg.sensors_per_side + 1e-9)

    def test_m2_single_group(self):
        groups = partition_groups(SceneConfig(sensors_per_side=2, **{k: v for k, v in DESK.items() if k != "sensors_per_side"}))
        assert len(groups) == 1
        assert groups[0].sensor_indices == (0, 1, 2, 3)

    def test_indivisible_rejected(self):
        with pytest.raises(Exception):
            partition_groups(SceneConfig(sensors_per_side=3, group_size=4))


class TestCommonTruth:
    def test_identical_psds(self):
        cfg = SceneConfig(seed=11, sensors_per_side=2, grid_side=40, subbands=4, samples_per_subband=4)
        scene = generate_scene(cfg)
        # identical PSDs by placing all sensors at the same point
        scene.sensor_positions = np.tile(scene.sensor_positions[0], (4, 1))
        group = partition_groups(cfg)[0]
        common, innovations = group_common_truth(scene, group)
        assert np.allclose(common, ground_truth_psd(scene, 0))
        for inn in innovations:
            assert np.allclose(inn, 0.0)

    def test_hand_built_min_split(self):
        # independent oracle: element-wise minimum
        s1 = np.array([1.0, 3.0])
        s2 = np.array([2.0, 3.0])
        common = np.minimum(s1, s2)
        assert np.array_equal(common, [1.0, 3.0])
        assert np.array_equal(s1 - common, [0.0, 0.0])
        assert np.array_equal(s2 - common, [1.0, 0.0])

    def test_split_reconstructs(self):
        cfg = SceneConfig(seed=12, **DESK)
        scene = generate_scene(cfg)
        for group in partition_groups(cfg):
            common, innovations = group_common_truth(scene, group)
            assert np.all(common >= 0)
            for inn, s in zip(innovations, group.sensor_indices):
                assert np.all(inn >= 0)
                # equal to rounding: innovation is computed by subtraction
                assert np.allclose(common + inn, ground_truth_psd(scene, s), rtol=1e-14, atol=0)


class TestSerialization:
    def test_json_round_trip(self):
        cfg = SceneConfig(seed=13, **DESK)
        scene = generate_scene(cfg)
        clone = scene_from_json(scene_to_json(scene))
        assert clone.config == scene.config
        for a, b in zip(scene.pu_positions, clone.pu_positions):
            assert np.array_equal(a, b)
        assert np.array_equal(clone.sensor_positions, scene.sensor_positions)

    def test_occupancy_csv(self, tmp_path):
        cfg = SceneConfig(seed=14, **DESK)
        scene = generate_scene(cfg)
        path = tmp_path / "occupancy.csv"
        write_occupancy_csv(scene, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "sensor," + ",".join(f"subband_{b}" for b in range(8))
        assert len(lines) == 1 + 16
        labels = occupancy_labels(scene).astype(int)
        first = [int(v) for v in lines[1].split(",")[1:]]
        assert first == labels.tolist()
