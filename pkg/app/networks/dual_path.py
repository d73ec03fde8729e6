"""
Двухпутевой рекуррентный оценщик масок: сегментация на чанки,
чередование внутричанковых и межчанковых BLSTM, overlap-add.
"""
from typing import Tuple
import torch
import torch.nn as nn
import torch.nn.functional as F


def segment(x: torch.Tensor, chunk: int) -> Tuple[torch.Tensor, int]:
    """[B, N, T] -> [B, N, K, S] чанки длины K с шагом K // 2"""
    length = x.shape[-1]
    hop = chunk // 2
    padded = length + 2 * hop
    extra = (hop - (padded - chunk) % hop) % hop
    x = F.pad(x, (hop, hop + extra))
    chunks = x.unfold(-1, chunk, hop)
    return chunks.transpose(2, 3).contiguous(), length


def overlap_add(chunks: torch.Tensor, length: int) -> torch.Tensor:
    """[B, N, K, S] -> [B, N, T], обратно к segment"""
    b, n, chunk, s = chunks.shape
    hop = chunk // 2
    total = (s - 1) * hop + chunk
    columns = chunks.reshape(b, n * chunk, s)
    out = F.fold(columns, output_size=(1, total), kernel_size=(1, chunk), stride=(1, hop))
    return out.squeeze(2)[..., hop:hop + length]


class DualPathBlock(nn.Module):
    """Один двухпутевой блок с резидуальными связями"""

    def __init__(self, channels: int, hidden: int):
        super().__init__()
        self.intra_rnn = nn.LSTM(channels, hidden, batch_first=True, bidirectional=True)
        self.intra_fc = nn.Linear(2 * hidden, channels)
        self.intra_norm = nn.GroupNorm(1, channels, eps=1e-8)
        self.inter_rnn = nn.LSTM(channels, hidden, batch_first=True, bidirectional=True)
        self.inter_fc = nn.Linear(2 * hidden, channels)
        self.inter_norm = nn.GroupNorm(1, channels, eps=1e-8)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        b, n, k, s = x.shape

        intra = x.permute(0, 3, 2, 1).reshape(b * s, k, n)
        intra, _ = self.intra_rnn(intra)
        intra = self.intra_fc(intra).reshape(b, s, k, n).permute(0, 3, 2, 1)
        x = x + self.intra_norm(intra)

        inter = x.permute(0, 2, 3, 1).reshape(b * k, s, n)
        inter, _ = self.inter_rnn(inter)
        inter = self.inter_fc(inter).reshape(b, k, s, n).permute(0, 3, 1, 2)
        return x + self.inter_norm(inter)


class DualPathMaskEstimator(nn.Module):
    """
    Оценщик n_masks неотрицательных масок [B, n_masks, out_channels, T]
    по признакам [B, in_channels, T]
    """

    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        bottleneck: int,
        hidden: int,
        blocks: int,
        chunk_size: int,
        n_masks: int = 1,
    ):
        super().__init__()
        self.chunk_size = chunk_size
        self.n_masks = n_masks
        self.bottleneck_channels = bottleneck
        self.out_channels = out_channels
        self.norm = nn.GroupNorm(1, in_channels, eps=1e-8)
        self.bottleneck = nn.Conv1d(in_channels, bottleneck, kernel_size=1, bias=False)
        self.blocks = nn.ModuleList(DualPathBlock(bottleneck, hidden) for _ in range(blocks))
        self.prelu = nn.PReLU()
        self.mask_conv = nn.Conv2d(bottleneck, bottleneck * n_masks, kernel_size=1)
        self.output = nn.Conv1d(bottleneck, out_channels, kernel_size=1)

    def forward(self, features: torch.Tensor) -> torch.Tensor:
        b = features.shape[0]
        y = self.bottleneck(self.norm(features))
        chunks, length = segment(y, self.chunk_size)
        for block in self.blocks:
            chunks = block(chunks)
        chunks = self.mask_conv(self.prelu(chunks))
        _, _, k, s = chunks.shape
        chunks = chunks.reshape(b * self.n_masks, self.bottleneck_channels, k, s)
        y = overlap_add(chunks, length)
        masks = F.relu(self.output(y))
        return masks.reshape(b, self.n_masks, self.out_channels, length)
