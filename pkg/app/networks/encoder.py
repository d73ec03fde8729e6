"""
Речевой энкодер (1-D свёртка + ReLU) и декодер (транспонированная свёртка).
"""
import math
import torch
import torch.nn as nn
import torch.nn.functional as F

from app.errors import InvalidArgumentError


def num_frames(n_samples: int, kernel: int, stride: int) -> int:
    """T_x = ceil((L - kernel) / stride) + 1"""
    if n_samples < kernel:
        raise InvalidArgumentError(
            f"сигнал короче ядра энкодера: {n_samples} < {kernel} отсчётов"
        )
    return math.ceil((n_samples - kernel) / stride) + 1


class SpeechEncoder(nn.Module):
    """Переводит волну [B, L] в неотрицательные эмбеддинги [B, C, T_x]"""

    def __init__(self, kernel: int, stride: int, channels: int):
        super().__init__()
        self.kernel = kernel
        self.stride = stride
        self.channels = channels
        self.conv = nn.Conv1d(1, channels, kernel_size=kernel, stride=stride, bias=False)

    def frame_lengths(self, lengths: torch.Tensor) -> torch.Tensor:
        lengths = lengths.clamp_min(self.kernel)
        return torch.div(lengths - self.kernel + self.stride - 1, self.stride, rounding_mode="floor") + 1

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        length = x.shape[-1]
        frames = num_frames(length, self.kernel, self.stride)
        # хвост дополняется нулями, чтобы последний кадр покрыл конец сигнала
        pad = (frames - 1) * self.stride + self.kernel - length
        x = F.pad(x, (0, pad))
        return F.relu(self.conv(x.unsqueeze(1)))


class SpeechDecoder(nn.Module):
    """Overlap-add декодер, зеркальный энкодеру; возвращает ровно length отсчётов"""

    def __init__(self, kernel: int, stride: int, channels: int):
        super().__init__()
        self.deconv = nn.ConvTranspose1d(channels, 1, kernel_size=kernel, stride=stride, bias=False)

    def forward(self, embeddings: torch.Tensor, length: int) -> torch.Tensor:
        wave = self.deconv(embeddings).squeeze(1)
        if wave.shape[-1] >= length:
            return wave[..., :length]
        return F.pad(wave, (0, length - wave.shape[-1]))
