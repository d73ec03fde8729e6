"""
Ядро жестов: центрирование по позвоночнику, нормализация, апсемплинг, I/O поз.
"""
from pathlib import Path
from typing import Iterable, Tuple
import hashlib
import numpy as np
from loguru import logger

from app.errors import InvalidArgumentError, DataIntegrityError
from app.schemas import PoseSequence, GestureEmbedding, JOINT_NAMES, SPINE_INDEX

POSE_FRAME_RATE = 15
JOINT_ORDER_HASH = hashlib.sha1(",".join(JOINT_NAMES).encode("utf-8")).hexdigest()


def spine_center(pose: PoseSequence) -> PoseSequence:
    """Вычесть координату позвоночника из всех суставов в каждом кадре"""
    joints = pose.joints
    if not np.all(np.isfinite(joints)):
        raise InvalidArgumentError("координаты суставов не конечны")
    centered = joints - joints[:, SPINE_INDEX:SPINE_INDEX + 1, :]
    centered[:, SPINE_INDEX, :] = 0.0
    return PoseSequence(joints=centered, frame_rate=pose.frame_rate)


def pose_stats_normalize(pose: PoseSequence, mean: np.ndarray, std: np.ndarray) -> PoseSequence:
    """Поэлементная z-нормализация (joints - mean) / std со статистиками 10 x 3"""
    mean = np.asarray(mean, dtype=np.float64)
    std = np.asarray(std, dtype=np.float64)
    if mean.shape != (10, 3) or std.shape != (10, 3):
        raise InvalidArgumentError("статистики должны иметь форму 10 x 3")
    if np.any(std <= 0):
        raise InvalidArgumentError("std должен быть строго положительным")
    return PoseSequence(joints=(pose.joints - mean) / std, frame_rate=pose.frame_rate)


def pose_stats_denormalize(pose: PoseSequence, mean: np.ndarray, std: np.ndarray) -> PoseSequence:
    """Обратное преобразование к pose_stats_normalize"""
    return PoseSequence(
        joints=pose.joints * np.asarray(std, dtype=np.float64) + np.asarray(mean, dtype=np.float64),
        frame_rate=pose.frame_rate,
    )


def compute_pose_stats(poses: Iterable[PoseSequence]) -> Tuple[np.ndarray, np.ndarray]:
    """
    Пер-суставные среднее и std по центрированным кадрам обучающей выборки

    Для вырожденных суставов (позвоночник после центрирования) std = 1,
    чтобы нормализация оставалась определённой и позвоночник оставался в нуле.
    """
    frames = [spine_center(p).joints for p in poses]
    if not frames:
        raise InvalidArgumentError("нет поз для расчёта статистик")
    stacked = np.concatenate(frames, axis=0)
    mean = stacked.mean(axis=0)
    std = stacked.std(axis=0)
    mean[SPINE_INDEX] = 0.0
    std = np.where(std < 1e-8, 1.0, std)
    return mean, std


def prepare_pose(pose: PoseSequence, mean: np.ndarray, std: np.ndarray) -> PoseSequence:
    """Предобработка для сетей: центрирование, затем нормализация"""
    return pose_stats_normalize(spine_center(pose), mean, std)


def upsample_index(src_len: int, target_len: int) -> np.ndarray:
    """Индексы ближайшего предшествующего кадра: floor(j * src_len / target_len)"""
    if src_len < 1:
        raise InvalidArgumentError("исходная длина должна быть >= 1")
    if target_len < src_len:
        raise InvalidArgumentError(
            f"даунсемплинг не поддерживается: {src_len} -> {target_len}"
        )
    return (np.arange(target_len, dtype=np.int64) * src_len) // target_len


def upsample_to(frames: GestureEmbedding, target_len: int) -> GestureEmbedding:
    """Повторить кадры эмбеддинга до target_len кадров"""
    index = upsample_index(frames.num_frames, target_len)
    rate = frames.frame_rate * target_len / frames.num_frames
    return GestureEmbedding(frames=frames.frames[index], frame_rate=rate)


def align_pose_to_audio(pose: PoseSequence, n_samples: int, sample_rate: int) -> PoseSequence:
    """Усечь позы с начала до floor(длительность аудио * frame_rate) кадров"""
    n_frames = (n_samples * pose.frame_rate) // sample_rate
    if n_frames < 1:
        raise InvalidArgumentError("аудио короче одного кадра поз")
    if n_frames > pose.num_frames:
        raise DataIntegrityError(
            f"поз меньше ({pose.num_frames}), чем требует аудио ({n_frames})"
        )
    if n_frames == pose.num_frames:
        return pose
    return PoseSequence(joints=pose.joints[:n_frames], frame_rate=pose.frame_rate)


def save_pose(pose: PoseSequence, path: str | Path) -> Path:
    """Записать позы в .npz с заголовком (частота кадров, хэш порядка суставов)"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        np.savez(
            fh,
            joints=pose.joints,
            frame_rate=np.int64(pose.frame_rate),
            joint_order_hash=np.array(JOINT_ORDER_HASH),
        )
    return path


def load_pose(path: str | Path) -> PoseSequence:
    """Прочитать позы из .npz и проверить порядок суставов"""
    path = Path(path)
    if not path.is_file():
        raise DataIntegrityError("файл поз не найден", str(path))
    try:
        with np.load(str(path), allow_pickle=False) as data:
            joints = np.array(data["joints"], dtype=np.float64)
            frame_rate = int(data["frame_rate"])
            order_hash = str(data["joint_order_hash"])
    except Exception as e:
        logger.error(f"Не удалось прочитать {path}: {e}")
        raise DataIntegrityError("файл поз повреждён", str(path)) from e
    if order_hash != JOINT_ORDER_HASH:
        raise DataIntegrityError("порядок суставов не совпадает", str(path))
    try:
        return PoseSequence(joints=joints, frame_rate=frame_rate)
    except ValueError as e:
        raise DataIntegrityError(f"некорректные позы ({e})", str(path)) from e
