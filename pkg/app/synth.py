"""
Синтетический корпус жест-речь для обучения и проверки на одной машине.

Речь: гармонический источник с частотой основного тона на seed,
формантная фильтрация и гладкая огибающая со слоговой частотой ~3 Гц.
Жесты: скорость запястий и локтей повторяет ту же огибающую с задержкой
до 200 мс, плюс небольшой шум суставов.
"""
from pathlib import Path
from typing import List, Optional, Tuple
import numpy as np
from scipy.signal import butter, filtfilt, iirpeak, lfilter
from loguru import logger
from tqdm import tqdm

from app.errors import InvalidArgumentError
from app.schemas import (
    Waveform, PoseSequence, UtteranceRecord,
    SPINE_INDEX, WRIST_INDICES, ELBOW_INDICES,
)
from app.signal import save_wav
from app.gesture import save_pose

CONTROL_RATE = 100
SYLLABIC_RATE_HZ = 3.0
MAX_LAG_S = 0.2
MAX_SPEED = 0.6  # единиц в секунду при огибающей = 1
MOTION_BOUND = 0.15
JOINT_NOISE_STD = 0.002

# Поза покоя, позвоночник в начале координат
REST_POSE = np.array([
    [0.00, 0.55, 0.00],   # head
    [0.00, 0.40, 0.00],   # neck
    [0.00, 0.50, 0.08],   # nose
    [0.00, 0.00, 0.00],   # spine
    [-0.18, 0.35, 0.00],  # l_shoulder
    [0.18, 0.35, 0.00],   # r_shoulder
    [-0.25, 0.10, 0.05],  # l_elbow
    [0.25, 0.10, 0.05],   # r_elbow
    [-0.20, -0.10, 0.20], # l_wrist
    [0.20, -0.10, 0.20],  # r_wrist
])


def _envelope(rng: np.random.Generator, duration_s: float) -> Tuple[np.ndarray, np.ndarray]:
    """Гладкая огибающая в [0.1, 1] на управляющей частоте и её временная ось"""
    n_ctrl = int(np.ceil(duration_s * CONTROL_RATE)) + 1
    noise = rng.standard_normal(n_ctrl + 2 * CONTROL_RATE)
    b, a = butter(2, SYLLABIC_RATE_HZ / (CONTROL_RATE / 2))
    smooth = filtfilt(b, a, noise)[CONTROL_RATE:CONTROL_RATE + n_ctrl]
    smooth = (smooth - smooth.min()) / (np.ptp(smooth) + 1e-12)
    return 0.1 + 0.9 * smooth, np.arange(n_ctrl) / CONTROL_RATE


def _voiced_source(rng: np.random.Generator, f0_hz: float, n_samples: int, sample_rate: int) -> np.ndarray:
    t = np.arange(n_samples) / sample_rate
    vibrato = 1.0 + 0.02 * np.sin(2 * np.pi * rng.uniform(0.3, 0.8) * t + rng.uniform(0, 2 * np.pi))
    phase = 2 * np.pi * np.cumsum(f0_hz * vibrato) / sample_rate
    n_harmonics = max(1, int(4000 // f0_hz))
    source = np.zeros(n_samples)
    for k in range(1, n_harmonics + 1):
        source += np.sin(k * phase + rng.uniform(0, 2 * np.pi)) / k
    f1 = rng.uniform(500.0, 800.0)
    f2 = rng.uniform(1200.0, 2200.0)
    b1, a1 = iirpeak(f1, Q=5.0, fs=sample_rate)
    b2, a2 = iirpeak(f2, Q=8.0, fs=sample_rate)
    voiced = lfilter(b1, a1, source) + 0.5 * lfilter(b2, a2, source) + 0.1 * source
    return voiced / (np.sqrt(np.mean(voiced ** 2)) + 1e-12)


def _arm_track(rng: np.random.Generator, speed: np.ndarray, frame_rate: int) -> np.ndarray:
    """Смещение руки вдоль случайного направления; модуль скорости равен speed"""
    direction = rng.standard_normal(3)
    direction /= np.linalg.norm(direction)
    offset = np.zeros(len(speed))
    sign = 1.0
    for f in range(1, len(speed)):
        step = sign * speed[f] / frame_rate
        if abs(offset[f - 1] + step) > MOTION_BOUND:
            sign = -sign
            step = -step
        offset[f] = offset[f - 1] + step
    return offset[:, None] * direction[None, :]


def synth_pair(
    seed: int,
    duration_s: float,
    sample_rate: int = 16000,
    frame_rate: int = 15,
    f0_hz: Optional[float] = None,
) -> Tuple[Waveform, PoseSequence]:
    """Сгенерировать коррелированную пару (речь, жесты)"""
    if not 1.0 <= duration_s <= 15.0:
        raise InvalidArgumentError(f"длительность вне [1, 15] с: {duration_s}")
    rng = np.random.default_rng(seed)
    f0 = float(f0_hz) if f0_hz is not None else rng.uniform(90.0, 220.0)
    lag_s = rng.uniform(0.0, MAX_LAG_S)
    n_samples = int(round(duration_s * sample_rate))
    n_frames = int(round(duration_s * frame_rate))

    envelope, t_ctrl = _envelope(rng, duration_s)

    t_audio = np.arange(n_samples) / sample_rate
    voiced = _voiced_source(rng, f0, n_samples, sample_rate)
    speech = np.interp(t_audio, t_ctrl, envelope) * voiced
    speech = 0.1 * speech / (np.sqrt(np.mean(speech ** 2)) + 1e-12)
    speech += 1e-3 * rng.standard_normal(n_samples)

    t_frames = np.arange(n_frames) / frame_rate
    speed = MAX_SPEED * np.interp(t_frames - lag_s, t_ctrl, envelope)
    joints = np.repeat(REST_POSE[None, :, :], n_frames, axis=0)
    for wrist, elbow, gain in zip(WRIST_INDICES, ELBOW_INDICES, (1.0, 0.8)):
        track = _arm_track(rng, gain * speed, frame_rate)
        joints[:, wrist] += track
        joints[:, elbow] += 0.5 * track
    joints += JOINT_NOISE_STD * rng.standard_normal(joints.shape)
    joints[:, SPINE_INDEX] = 0.0

    return (
        Waveform(samples=speech, sample_rate=sample_rate),
        PoseSequence(joints=joints, frame_rate=frame_rate),
    )


def frame_rms(speech: Waveform, frame_rate: int) -> np.ndarray:
    """RMS речи в окнах длиной в один кадр поз"""
    hop = speech.sample_rate // frame_rate
    n = speech.num_samples // hop
    frames = speech.samples[:n * hop].reshape(n, hop)
    return np.sqrt(np.mean(frames ** 2, axis=1))


def wrist_speed(pose: PoseSequence) -> np.ndarray:
    """Средняя по двум запястьям скорость между соседними кадрами"""
    wrists = pose.joints[:, list(WRIST_INDICES), :]
    step = np.linalg.norm(np.diff(wrists, axis=0), axis=-1).mean(axis=-1)
    return np.concatenate([[step[0] if len(step) else 0.0], step]) * pose.frame_rate


def envelope_velocity_correlation(speech: Waveform, pose: PoseSequence, max_lag_s: float = MAX_LAG_S) -> float:
    """
    Максимальная по задержкам корреляция Пирсона огибающей речи и скорости запястий

    Используется как эвристический оценщик пар без обучения.
    """
    rms = frame_rms(speech, pose.frame_rate)
    speed = wrist_speed(pose)
    n = min(len(rms), len(speed))
    rms, speed = rms[1:n], speed[1:n]
    best = -1.0
    for lag in range(int(round(max_lag_s * pose.frame_rate)) + 1):
        if len(rms) - lag < 3:
            break
        a = rms[:len(rms) - lag]
        b = speed[lag:]
        if np.std(a) < 1e-12 or np.std(b) < 1e-12:
            continue
        best = max(best, float(np.corrcoef(a, b)[0, 1]))
    return best


def write_synth_corpus(
    out_dir: str | Path,
    n_speakers: int,
    utterances_per_speaker: int,
    seed: int,
    min_duration_s: float = 2.0,
    max_duration_s: float = 6.0,
) -> List[UtteranceRecord]:
    """
    Записать синтетический корпус: out_dir/spkNNN/uttNNN.{wav,npz}

    Дикторы различаются диапазоном частоты основного тона.
    """
    if n_speakers < 2:
        raise InvalidArgumentError("нужно хотя бы два диктора")
    out_dir = Path(out_dir)
    rng = np.random.default_rng(seed)
    records: List[UtteranceRecord] = []
    total = n_speakers * utterances_per_speaker
    with tqdm(total=total, desc="synth-corpus", disable=None) as progress:
        for s in range(n_speakers):
            speaker = f"spk{s:03d}"
            f0_center = rng.uniform(90.0, 220.0)
            for u in range(utterances_per_speaker):
                duration = float(np.round(rng.uniform(min_duration_s, max_duration_s), 2))
                utt_seed = int(rng.integers(0, 2 ** 31 - 1))
                f0 = f0_center * rng.uniform(0.95, 1.05)
                speech, pose = synth_pair(utt_seed, duration, f0_hz=f0)
                audio_path = save_wav(speech, out_dir / speaker / f"utt{u:03d}.wav")
                pose_path = save_pose(pose, out_dir / speaker / f"utt{u:03d}.npz")
                records.append(UtteranceRecord(
                    id=f"{speaker}/utt{u:03d}",
                    audio_path=str(audio_path),
                    pose_path=str(pose_path),
                    speaker_id=speaker,
                    duration_s=speech.duration_s,
                ))
                progress.update(1)
    logger.info(f"Синтетический корпус: {n_speakers} дикторов, {total} высказываний в {out_dir}")
    return records
