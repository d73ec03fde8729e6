"""
Torch-датасеты для обучения: смеси для SEG/DPRNN и пары для GSR,
бакетирование по длине и паддинг батчей с масками длин.
"""
from typing import Dict, List, Optional, Sequence, Tuple
import numpy as np
import torch
from torch.utils.data import Dataset, DataLoader

from app.errors import InvalidArgumentError
from app.schemas import MixtureExample, PoseSequence
from app.gesture import prepare_pose
from app.corpus import GsrPair

PoseStats = Tuple[np.ndarray, np.ndarray]


def _float_tensor(array: np.ndarray) -> torch.Tensor:
    return torch.tensor(np.array(array), dtype=torch.float32)


class MixtureDataset(Dataset):
    """
    Материализованные смеси: x, цель s, источники [s, b_1, ..., b_I]
    и нормализованные позы цели (если заданы статистики)
    """

    def __init__(
        self,
        examples: Sequence[Tuple[MixtureExample, PoseSequence]],
        pose_stats: Optional[PoseStats] = None,
    ):
        if not examples:
            raise InvalidArgumentError("набор смесей пуст")
        counts = {example.num_interferers for example, _ in examples}
        if len(counts) != 1:
            raise InvalidArgumentError(f"в наборе смеси с разным числом помех: {sorted(counts)}")
        self.examples = list(examples)
        self.pose_stats = pose_stats

    def __len__(self) -> int:
        return len(self.examples)

    @property
    def lengths(self) -> List[int]:
        return [example.mixture.num_samples for example, _ in self.examples]

    def __getitem__(self, index: int) -> Dict[str, torch.Tensor]:
        example, pose = self.examples[index]
        item = {
            "mixture": _float_tensor(example.mixture.samples),
            "target": _float_tensor(example.target.samples),
            "sources": _float_tensor(np.stack([w.samples for w in example.sources])),
        }
        if self.pose_stats is not None:
            item["pose"] = _float_tensor(prepare_pose(pose, *self.pose_stats).joints)
        return item


class PairDataset(Dataset):
    """Пары (речь, жесты, метка) для GSR"""

    def __init__(self, pairs: Sequence[GsrPair], pose_stats: PoseStats):
        if not pairs:
            raise InvalidArgumentError("набор пар пуст")
        self.pairs = list(pairs)
        self.pose_stats = pose_stats

    def __len__(self) -> int:
        return len(self.pairs)

    @property
    def lengths(self) -> List[int]:
        return [pair.speech.num_samples for pair in self.pairs]

    def __getitem__(self, index: int) -> Dict[str, torch.Tensor]:
        pair = self.pairs[index]
        return {
            "speech": _float_tensor(pair.speech.samples),
            "pose": _float_tensor(prepare_pose(pair.pose, *self.pose_stats).joints),
            "y": torch.tensor(float(pair.y)),
        }


def bucket_batches(lengths: Sequence[int], batch_size: int, seed: Optional[int] = None) -> List[List[int]]:
    """
    Батчи из соседних по длине примеров

    Индексы сортируются по длине (при равенстве по индексу) и режутся
    на батчи; порядок батчей перемешивается, если задан seed.
    """
    if batch_size < 1:
        raise InvalidArgumentError("batch_size должен быть >= 1")
    order = sorted(range(len(lengths)), key=lambda i: (lengths[i], i))
    batches = [order[i:i + batch_size] for i in range(0, len(order), batch_size)]
    if seed is not None:
        permutation = np.random.default_rng(seed).permutation(len(batches))
        batches = [batches[i] for i in permutation]
    return batches


def _pad_stack(tensors: Sequence[torch.Tensor]) -> Tuple[torch.Tensor, torch.Tensor]:
    """Паддинг нулями по первой оси; возвращает (батч, длины)"""
    lengths = torch.tensor([t.shape[0] for t in tensors], dtype=torch.long)
    total = int(lengths.max())
    batch = tensors[0].new_zeros((len(tensors), total, *tensors[0].shape[1:]))
    for i, t in enumerate(tensors):
        batch[i, :t.shape[0]] = t
    return batch, lengths


def collate(items: Sequence[Dict[str, torch.Tensor]]) -> Dict[str, torch.Tensor]:
    """Собрать батч с паддингом; lengths по аудио, pose_lengths по позам"""
    batch: Dict[str, torch.Tensor] = {}
    audio_key = "mixture" if "mixture" in items[0] else "speech"
    batch[audio_key], batch["lengths"] = _pad_stack([item[audio_key] for item in items])
    if "target" in items[0]:
        batch["target"], _ = _pad_stack([item["target"] for item in items])
    if "sources" in items[0]:
        # [n, L] -> паддинг по L
        padded, _ = _pad_stack([item["sources"].transpose(0, 1) for item in items])
        batch["sources"] = padded.transpose(1, 2)
    if "pose" in items[0]:
        batch["pose"], batch["pose_lengths"] = _pad_stack([item["pose"] for item in items])
    if "y" in items[0]:
        batch["y"] = torch.stack([item["y"] for item in items])
    return batch


def make_loader(
    dataset,
    batch_size: int,
    seed: Optional[int] = None,
    num_workers: int = 0,
) -> DataLoader:
    """DataLoader с фиксированным списком бакетированных батчей"""
    return DataLoader(
        dataset,
        batch_sampler=bucket_batches(dataset.lengths, batch_size, seed),
        collate_fn=collate,
        num_workers=num_workers,
    )
