import numpy as np
import pytest

from app.errors import InvalidArgumentError
from app.synth import synth_pair, envelope_velocity_correlation, frame_rms, wrist_speed
from app.schemas import SPINE_INDEX


def test_rate_arithmetic():
    speech, pose = synth_pair(7, 4.0)
    assert speech.num_samples == 64000
    assert pose.num_frames == 60
    assert speech.sample_rate == 16000 and pose.frame_rate == 15


def test_same_seed_same_pair():
    a_speech, a_pose = synth_pair(3, 2.0)
    b_speech, b_pose = synth_pair(3, 2.0)
    np.testing.assert_array_equal(a_speech.samples, b_speech.samples)
    np.testing.assert_array_equal(a_pose.joints, b_pose.joints)


def test_different_seeds_differ():
    a, _ = synth_pair(1, 2.0)
    b, _ = synth_pair(2, 2.0)
    assert not np.allclose(a.samples, b.samples)


def test_pose_is_spine_centered():
    _, pose = synth_pair(5, 3.0)
    assert pose.is_spine_centered
    assert np.all(pose.joints[:, SPINE_INDEX] == 0.0)


@pytest.mark.parametrize("duration", [0.5, 15.5])
def test_duration_out_of_range(duration):
    with pytest.raises(InvalidArgumentError):
        synth_pair(0, duration)


def test_frame_features_align():
    speech, pose = synth_pair(11, 3.0)
    assert len(frame_rms(speech, pose.frame_rate)) == pose.num_frames
    assert len(wrist_speed(pose)) == pose.num_frames


def test_envelope_tracks_wrist_speed():
    correlations = [envelope_velocity_correlation(*synth_pair(seed, 4.0)) for seed in range(20)]
    assert min(correlations) >= 0.6


def test_paired_beats_unpaired_on_average():
    pairs = [synth_pair(seed, 4.0) for seed in range(10)]
    paired = np.mean([envelope_velocity_correlation(s, p) for s, p in pairs])
    unpaired = np.mean([
        envelope_velocity_correlation(pairs[i][0], pairs[(i + 1) % 10][1]) for i in range(10)
    ])
    assert paired > unpaired + 0.3


@pytest.mark.slow
def test_envelope_tracks_wrist_speed_over_many_seeds():
    correlations = [envelope_velocity_correlation(*synth_pair(seed, 4.0)) for seed in range(100)]
    assert min(correlations) >= 0.6
