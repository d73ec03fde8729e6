"""
Энкодер жестов: N-слойный BLSTM по 30 признакам кадра (10 суставов x 3)
с апсемплингом до частоты кадров речевого эмбеддинга.
"""
from typing import Optional
import numpy as np
import torch
import torch.nn as nn
from torch.nn.utils.rnn import pack_padded_sequence, pad_packed_sequence

from app.gesture import upsample_index

POSE_FEATURES = 30


def upsample_frames(
    frames: torch.Tensor,
    target_len: int,
    src_lengths: Optional[torch.Tensor] = None,
    target_lengths: Optional[torch.Tensor] = None,
) -> torch.Tensor:
    """
    [B, T_v, C] -> [B, target_len, C] повторением ближайшего предшествующего кадра

    Для батча с паддингом каждая запись отображает свои src_lengths[i]
    кадров на target_lengths[i]; хвост повторяет последний валидный кадр.
    """
    b, t_v, c = frames.shape
    rows = []
    for i in range(b):
        src = int(src_lengths[i]) if src_lengths is not None else t_v
        tgt = int(target_lengths[i]) if target_lengths is not None else target_len
        index = upsample_index(src, tgt)
        if tgt < target_len:
            index = np.concatenate([index, np.full(target_len - tgt, index[-1])])
        rows.append(index)
    index = torch.as_tensor(np.stack(rows), device=frames.device)
    return frames.gather(1, index.unsqueeze(-1).expand(-1, -1, c))


class GestureEncoder(nn.Module):
    """BLSTM по позам; dropout только между рекуррентными слоями"""

    def __init__(self, hidden: int = 128, layers: int = 5, dropout: float = 0.3):
        super().__init__()
        self.out_channels = 2 * hidden
        self.rnn = nn.LSTM(
            POSE_FEATURES,
            hidden,
            num_layers=layers,
            batch_first=True,
            bidirectional=True,
            dropout=dropout if layers > 1 else 0.0,
        )

    def encode(self, poses: torch.Tensor, pose_lengths: Optional[torch.Tensor] = None) -> torch.Tensor:
        """[B, T_g, 10, 3] -> [B, T_g, 2H] без апсемплинга"""
        b, t = poses.shape[:2]
        features = poses.reshape(b, t, POSE_FEATURES)
        if pose_lengths is None:
            out, _ = self.rnn(features)
            return out
        packed = pack_padded_sequence(features, pose_lengths.cpu(), batch_first=True, enforce_sorted=False)
        out, _ = self.rnn(packed)
        out, _ = pad_packed_sequence(out, batch_first=True, total_length=t)
        return out

    def forward(
        self,
        poses: torch.Tensor,
        target_len: int,
        pose_lengths: Optional[torch.Tensor] = None,
        target_lengths: Optional[torch.Tensor] = None,
    ) -> torch.Tensor:
        """Возвращает V(t) в форме [B, 2H, target_len]"""
        encoded = self.encode(poses, pose_lengths)
        upsampled = upsample_frames(encoded, target_len, pose_lengths, target_lengths)
        return upsampled.transpose(1, 2)
