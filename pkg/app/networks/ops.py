"""
Операции над доменными типами поверх сетей: Waveform/PoseSequence на входе,
Waveform/эмбеддинги/GsrScore на выходе.
"""
from typing import List
import numpy as np
import torch

from app.errors import InvalidArgumentError
from app.gesture import align_pose_to_audio, upsample_index
from app.schemas import Waveform, PoseSequence, SpeechEmbedding, GestureEmbedding, GsrScore
from app.networks.encoder import SpeechEncoder, num_frames
from app.networks.gesture_encoder import GestureEncoder
from app.networks.seg import SegNet
from app.networks.dprnn import DprnnNet
from app.networks.gsr import GsrNet

SUPPORTED_SPEAKERS = (2, 3)


def wave_tensor(wave: Waveform) -> torch.Tensor:
    """Waveform -> тензор [1, L] float32"""
    return torch.tensor(wave.samples, dtype=torch.float32).unsqueeze(0)


def pose_tensor(pose: PoseSequence) -> torch.Tensor:
    """PoseSequence -> тензор [1, T_g, 10, 3] float32"""
    return torch.tensor(pose.joints, dtype=torch.float32).unsqueeze(0)


def _to_wave(tensor: torch.Tensor, sample_rate: int) -> Waveform:
    return Waveform(samples=tensor.detach().cpu().double().numpy(), sample_rate=sample_rate)


def _check_centered(pose: PoseSequence) -> None:
    if not pose.is_spine_centered:
        raise InvalidArgumentError("позы должны быть центрированы по позвоночнику")


def _aligned_pose(wave: Waveform, pose: PoseSequence) -> PoseSequence:
    # аудио короче одного кадра поз: остаётся первый кадр
    if wave.num_samples * pose.frame_rate < wave.sample_rate:
        return PoseSequence(joints=pose.joints[:1], frame_rate=pose.frame_rate)
    try:
        return align_pose_to_audio(pose, wave.num_samples, wave.sample_rate)
    except Exception as e:
        raise InvalidArgumentError(f"жесты не покрывают аудио: {e}") from e


@torch.no_grad()
def speech_encode(x: Waveform, encoder: SpeechEncoder) -> SpeechEmbedding:
    """X(t) = ReLU(conv1d(x)), форма T_x x C_x"""
    num_frames(x.num_samples, encoder.kernel, encoder.stride)
    frames = encoder(wave_tensor(x))[0].transpose(0, 1)
    return SpeechEmbedding(frames=frames.double().numpy(), frame_hop=encoder.stride)


@torch.no_grad()
def gesture_encode(v: PoseSequence, target_len: int, encoder: GestureEncoder) -> GestureEmbedding:
    """V(t): BLSTM по позам с апсемплингом до target_len кадров"""
    _check_centered(v)
    upsample_index(v.num_frames, target_len)
    frames = encoder(pose_tensor(v), target_len)[0].transpose(0, 1)
    rate = v.frame_rate * target_len / v.num_frames
    return GestureEmbedding(frames=frames.double().numpy(), frame_rate=rate)


@torch.no_grad()
def seg_forward(model: SegNet, x: Waveform, v: PoseSequence) -> Waveform:
    """Оценка целевой речи той же длины, что и смесь"""
    _check_centered(v)
    v = _aligned_pose(x, v)
    num_frames(x.num_samples, model.cfg.encoder_kernel, model.cfg.encoder_stride)
    estimate = model(wave_tensor(x), pose_tensor(v))[0]
    return _to_wave(estimate, x.sample_rate)


@torch.no_grad()
def dprnn_forward(model: DprnnNet, x: Waveform, n_speakers: int) -> List[Waveform]:
    """Разделение смеси на n_speakers потоков длины len(x)"""
    if n_speakers not in SUPPORTED_SPEAKERS:
        raise InvalidArgumentError(f"поддерживается 2 или 3 диктора, получено {n_speakers}")
    if n_speakers != model.num_speakers:
        raise InvalidArgumentError(
            f"модель обучена на {model.num_speakers} дикторов, запрошено {n_speakers}"
        )
    num_frames(x.num_samples, model.cfg.encoder_kernel, model.cfg.encoder_stride)
    streams = model(wave_tensor(x))[0]
    return [_to_wave(stream, x.sample_rate) for stream in streams]


@torch.no_grad()
def gsr_forward(model: GsrNet, speech: Waveform, v: PoseSequence) -> GsrScore:
    """Вероятность того, что речь и жесты принадлежат одному видео"""
    _check_centered(v)
    v = _aligned_pose(speech, v)
    num_frames(speech.num_samples, model.cfg.encoder_kernel, model.cfg.encoder_stride)
    probability = float(model(wave_tensor(speech), pose_tensor(v))[0])
    return GsrScore(probability=float(np.clip(probability, 0.0, 1.0)))
