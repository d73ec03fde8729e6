import numpy as np
import pytest

from app.errors import InvalidArgumentError, DataIntegrityError
from app.gesture import (
    spine_center, pose_stats_normalize, pose_stats_denormalize, compute_pose_stats,
    prepare_pose, upsample_index, upsample_to, align_pose_to_audio, save_pose, load_pose,
)
from app.schemas import PoseSequence, GestureEmbedding, SPINE_INDEX, WRIST_INDICES
from conftest import random_pose


def _pose(joints) -> PoseSequence:
    return PoseSequence(joints=np.asarray(joints, dtype=np.float64))


class TestSpineCenter:
    def test_uniform_translation(self):
        pose = _pose(np.tile([1.0, 2.0, 3.0], (4, 10, 1)))
        np.testing.assert_array_equal(spine_center(pose).joints, np.zeros((4, 10, 3)))

    def test_direct_subtraction(self):
        joints = np.zeros((1, 10, 3))
        joints[0, SPINE_INDEX] = [1.0, 0.0, 0.0]
        joints[0, WRIST_INDICES[0]] = [2.0, 0.0, 0.0]
        centered = spine_center(_pose(joints))
        np.testing.assert_array_equal(centered.joints[0, WRIST_INDICES[0]], [1.0, 0.0, 0.0])
        assert centered.is_spine_centered

    def test_idempotent(self):
        pose = _pose(np.random.default_rng(0).standard_normal((6, 10, 3)))
        once = spine_center(pose)
        np.testing.assert_allclose(spine_center(once).joints, once.joints, atol=1e-12)

    def test_wrong_shape_rejected(self):
        with pytest.raises(ValueError):
            _pose(np.zeros((3, 9, 3)))


class TestNormalize:
    def test_identity_stats(self):
        pose = random_pose(np.random.default_rng(1), 5)
        out = pose_stats_normalize(pose, np.zeros((10, 3)), np.ones((10, 3)))
        np.testing.assert_array_equal(out.joints, pose.joints)

    def test_own_mean_gives_zero_mean(self):
        pose = random_pose(np.random.default_rng(2), 8)
        out = pose_stats_normalize(pose, pose.joints.mean(axis=0), np.ones((10, 3)))
        np.testing.assert_allclose(out.joints.mean(axis=0), 0.0, atol=1e-12)

    def test_hand_computed_z_scores(self):
        joints = np.zeros((2, 10, 3))
        joints[0, 8] = [1.0, 2.0, 3.0]
        joints[1, 8] = [3.0, 6.0, 9.0]
        mean = joints.mean(axis=0)
        std = np.ones((10, 3))
        std[8] = [1.0, 2.0, 3.0]
        out = pose_stats_normalize(_pose(joints), mean, std)
        np.testing.assert_allclose(out.joints[0, 8], [-1.0, -1.0, -1.0])
        np.testing.assert_allclose(out.joints[1, 8], [1.0, 1.0, 1.0])

    def test_zero_std_rejected(self):
        pose = random_pose(np.random.default_rng(3), 2)
        std = np.ones((10, 3))
        std[0, 0] = 0.0
        with pytest.raises(InvalidArgumentError):
            pose_stats_normalize(pose, np.zeros((10, 3)), std)

    def test_denormalize_inverts(self):
        rng = np.random.default_rng(4)
        pose = random_pose(rng, 4)
        mean, std = rng.standard_normal((10, 3)), rng.uniform(0.5, 2.0, (10, 3))
        back = pose_stats_denormalize(pose_stats_normalize(pose, mean, std), mean, std)
        np.testing.assert_allclose(back.joints, pose.joints, atol=1e-12)

    def test_compute_stats_keeps_spine_at_zero(self):
        rng = np.random.default_rng(5)
        poses = [_pose(rng.standard_normal((n, 10, 3))) for n in (3, 7)]
        mean, std = compute_pose_stats(poses)
        assert mean.shape == std.shape == (10, 3)
        np.testing.assert_array_equal(mean[SPINE_INDEX], 0.0)
        np.testing.assert_array_equal(std[SPINE_INDEX], 1.0)
        prepared = prepare_pose(poses[0], mean, std)
        assert prepared.is_spine_centered

    def test_compute_stats_empty(self):
        with pytest.raises(InvalidArgumentError):
            compute_pose_stats([])


class TestUpsample:
    def test_integer_factor(self):
        np.testing.assert_array_equal(upsample_index(3, 6), [0, 0, 1, 1, 2, 2])

    def test_non_integer_factor(self):
        np.testing.assert_array_equal(upsample_index(2, 5), [0, 0, 0, 1, 1])

    def test_identity(self):
        frames = np.random.default_rng(6).standard_normal((4, 3))
        out = upsample_to(GestureEmbedding(frames=frames, frame_rate=15.0), 4)
        np.testing.assert_array_equal(out.frames, frames)

    def test_endpoints_preserved(self):
        frames = np.random.default_rng(7).standard_normal((15, 8))
        out = upsample_to(GestureEmbedding(frames=frames, frame_rate=15.0), 799)
        assert out.num_frames == 799
        np.testing.assert_array_equal(out.frames[0], frames[0])
        np.testing.assert_array_equal(out.frames[-1], frames[-1])

    def test_downsampling_rejected(self):
        with pytest.raises(InvalidArgumentError):
            upsample_index(5, 4)


class TestAlign:
    def test_truncates_from_head(self):
        pose = random_pose(np.random.default_rng(8), 45)
        out = align_pose_to_audio(pose, 32000, 16000)
        assert out.num_frames == 30
        np.testing.assert_array_equal(out.joints, pose.joints[:30])

    def test_pose_too_short(self):
        pose = random_pose(np.random.default_rng(9), 10)
        with pytest.raises(DataIntegrityError):
            align_pose_to_audio(pose, 32000, 16000)


class TestPoseIO:
    def test_round_trip(self, tmp_path):
        pose = random_pose(np.random.default_rng(10), 12)
        loaded = load_pose(save_pose(pose, tmp_path / "p.npz"))
        np.testing.assert_array_equal(loaded.joints, pose.joints)
        assert loaded.frame_rate == 15

    def test_joint_order_mismatch(self, tmp_path):
        path = tmp_path / "bad.npz"
        np.savez(path, joints=np.zeros((2, 10, 3)), frame_rate=np.int64(15), joint_order_hash=np.array("deadbeef"))
        with pytest.raises(DataIntegrityError):
            load_pose(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataIntegrityError):
            load_pose(tmp_path / "none.npz")
