import numpy as np
import pytest
import torch

from app.config import SegConfig, DprnnConfig
from app.errors import InvalidArgumentError
from app.networks import (
    SpeechEncoder, GestureEncoder, SegNet, DprnnNet, GsrNet, num_frames,
    speech_encode, gesture_encode, seg_forward, dprnn_forward, gsr_forward,
)
from app.schemas import Waveform, PoseSequence
from conftest import tiny_seg, tiny_dprnn, tiny_gsr, random_pose


def _wave(n: int, seed: int = 0) -> Waveform:
    return Waveform(samples=np.random.default_rng(seed).standard_normal(n))


def _pose_batch(batch: int, frames: int, seed: int = 0) -> torch.Tensor:
    gen = torch.Generator().manual_seed(seed)
    poses = torch.randn(batch, frames, 10, 3, generator=gen)
    poses[:, :, 3] = 0.0
    return poses


@pytest.fixture(autouse=True)
def _seed():
    torch.manual_seed(0)


class TestSpeechEncoder:
    def test_frame_count(self):
        assert num_frames(16000, 40, 20) == 799
        assert num_frames(40, 40, 20) == 1

    def test_stride_roughly_halves_frames(self):
        assert num_frames(16000, 40, 40) == 400

    def test_embedding_shape(self):
        embedding = speech_encode(_wave(16000), SpeechEncoder(40, 20, 8))
        assert embedding.frames.shape == (799, 8)
        assert embedding.frame_hop == 20
        assert np.all(embedding.frames >= 0)

    def test_too_short(self):
        with pytest.raises(InvalidArgumentError):
            speech_encode(_wave(39), SpeechEncoder(40, 20, 8))

    def test_config_validation(self):
        with pytest.raises(ValueError):
            SegConfig(encoder_kernel=20, encoder_stride=40)
        with pytest.raises(ValueError):
            SegConfig(gesture_layers=0)
        with pytest.raises(ValueError):
            SegConfig(gesture_dropout=1.0)
        with pytest.raises(ValueError):
            DprnnConfig(num_speakers=4)


class TestGestureEncoder:
    def test_upsampled_length(self):
        encoder = GestureEncoder(hidden=8, layers=2, dropout=0.3).eval()
        embedding = gesture_encode(random_pose(np.random.default_rng(1), 15), 799, encoder)
        assert embedding.frames.shape == (799, 16)

    def test_zero_pose_deterministic(self):
        encoder = GestureEncoder(hidden=8, layers=2, dropout=0.3).eval()
        pose = PoseSequence(joints=np.zeros((15, 10, 3)))
        a = gesture_encode(pose, 100, encoder)
        b = gesture_encode(pose, 100, encoder)
        assert np.all(np.isfinite(a.frames))
        np.testing.assert_array_equal(a.frames, b.frames)

    def test_different_gestures_differ(self):
        encoder = GestureEncoder(hidden=8, layers=1, dropout=0.0).eval()
        rng = np.random.default_rng(2)
        a = gesture_encode(random_pose(rng, 15), 100, encoder)
        b = gesture_encode(random_pose(rng, 15), 100, encoder)
        assert np.linalg.norm(a.frames - b.frames) > 1e-3

    def test_uncentered_rejected(self):
        encoder = GestureEncoder(hidden=8, layers=1, dropout=0.0)
        with pytest.raises(InvalidArgumentError):
            gesture_encode(PoseSequence(joints=np.ones((15, 10, 3))), 100, encoder)

    def test_downsampling_rejected(self):
        encoder = GestureEncoder(hidden=8, layers=1, dropout=0.0)
        with pytest.raises(InvalidArgumentError):
            gesture_encode(random_pose(np.random.default_rng(3), 15), 10, encoder)


class TestSeg:
    @pytest.mark.parametrize("length", [40, 4000, 16000, 16001])
    def test_length_preserved(self, length):
        cfg = tiny_seg().model_copy(update={"encoder_kernel": 40, "encoder_stride": 20})
        model = SegNet(cfg).eval()
        pose = random_pose(np.random.default_rng(length), 16)
        estimate = seg_forward(model, _wave(length), pose)
        assert estimate.num_samples == length
        assert np.all(np.isfinite(estimate.samples))

    def test_seg_forward_domain_types(self):
        model = SegNet(tiny_seg()).eval()
        x = _wave(16000)
        pose = random_pose(np.random.default_rng(4), 15)
        first = seg_forward(model, x, pose)
        second = seg_forward(model, x, pose)
        assert first.num_samples == 16000
        np.testing.assert_array_equal(first.samples, second.samples)

    def test_mask_non_negative(self):
        model = SegNet(tiny_seg()).eval()
        with torch.no_grad():
            mask, embeddings = model.estimate_mask(torch.randn(2, 8000), _pose_batch(2, 7))
        assert mask.shape == embeddings.shape
        assert bool((mask >= 0).all())

    def test_pose_must_cover_audio(self):
        model = SegNet(tiny_seg()).eval()
        with pytest.raises(InvalidArgumentError):
            seg_forward(model, _wave(32000), random_pose(np.random.default_rng(5), 15))


class TestDprnn:
    @pytest.mark.parametrize("n_speakers", [2, 3])
    def test_stream_count(self, n_speakers):
        model = DprnnNet(tiny_dprnn(n_speakers)).eval()
        streams = dprnn_forward(model, _wave(8000), n_speakers)
        assert len(streams) == n_speakers
        assert all(s.num_samples == 8000 for s in streams)

    @pytest.mark.parametrize("length", [40, 4000, 16000, 16001])
    def test_length_preserved(self, length):
        cfg = tiny_dprnn().model_copy(update={"encoder_kernel": 40, "encoder_stride": 20})
        streams = dprnn_forward(DprnnNet(cfg).eval(), _wave(length), 2)
        assert [s.num_samples for s in streams] == [length, length]

    def test_masks_non_negative(self):
        model = DprnnNet(tiny_dprnn(3)).eval()
        with torch.no_grad():
            masks, _ = model.estimate_masks(torch.randn(2, 4000))
        assert masks.shape[:2] == (2, 3)
        assert bool((masks >= 0).all())

    def test_unsupported_speaker_count(self):
        model = DprnnNet(tiny_dprnn()).eval()
        with pytest.raises(InvalidArgumentError):
            dprnn_forward(model, _wave(4000), 4)
        with pytest.raises(InvalidArgumentError):
            dprnn_forward(model, _wave(4000), 3)


class TestGsr:
    def test_probability_range(self):
        model = GsrNet(tiny_gsr()).eval()
        with torch.no_grad():
            probabilities = model(torch.randn(1000, 1600), _pose_batch(1000, 1))
        assert probabilities.shape == (1000,)
        assert bool(((probabilities >= 0) & (probabilities <= 1)).all())

    def test_gsr_forward_deterministic(self):
        model = GsrNet(tiny_gsr()).eval()
        speech = _wave(16000)
        pose = random_pose(np.random.default_rng(6), 15)
        a = gsr_forward(model, speech, pose)
        b = gsr_forward(model, speech, pose)
        assert 0.0 <= a.probability <= 1.0
        assert a.probability == b.probability

    def test_gsr_forward_shorter_than_pose_frame(self):
        model = GsrNet(tiny_gsr()).eval()
        score = gsr_forward(model, _wave(40), random_pose(np.random.default_rng(7), 15))
        assert 0.0 <= score.probability <= 1.0


def _step_changes_every_parameter(model: torch.nn.Module, loss_fn) -> None:
    before = {name: p.detach().clone() for name, p in model.named_parameters()}
    optimizer = torch.optim.Adam(model.parameters(), lr=1e-3)
    model.train()
    loss = loss_fn(model)
    optimizer.zero_grad()
    loss.backward()
    optimizer.step()
    unchanged = [name for name, p in model.named_parameters() if torch.equal(p.detach(), before[name])]
    assert unchanged == []


class TestGradientFlow:
    def test_seg(self):
        _step_changes_every_parameter(
            SegNet(tiny_seg()),
            lambda m: m(torch.randn(2, 4000), _pose_batch(2, 3)).pow(2).mean(),
        )

    def test_dprnn(self):
        _step_changes_every_parameter(
            DprnnNet(tiny_dprnn()),
            lambda m: (m(torch.randn(2, 4000)) - torch.randn(2, 2, 4000)).pow(2).mean(),
        )

    def test_gsr(self):
        _step_changes_every_parameter(
            GsrNet(tiny_gsr()),
            lambda m: torch.nn.functional.binary_cross_entropy(
                m(torch.randn(4, 4000), _pose_batch(4, 3)), torch.tensor([1.0, 0.0, 1.0, 0.0])
            ),
        )


class TestBatching:
    def test_seg_batch_of_one(self):
        model = SegNet(tiny_seg()).eval()
        x = torch.randn(2, 8000)
        poses = _pose_batch(2, 7)
        with torch.no_grad():
            batched = model(x, poses)
            for i in range(2):
                alone = model(x[i:i + 1], poses[i:i + 1])[0]
                torch.testing.assert_close(batched[i], alone, rtol=1e-5, atol=1e-5 * float(alone.abs().max()))

    def test_dprnn_batch_of_one(self):
        model = DprnnNet(tiny_dprnn()).eval()
        x = torch.randn(3, 6000)
        with torch.no_grad():
            batched = model(x)
            for i in range(3):
                alone = model(x[i:i + 1])[0]
                torch.testing.assert_close(batched[i], alone, rtol=1e-5, atol=1e-5 * float(alone.abs().max()))
