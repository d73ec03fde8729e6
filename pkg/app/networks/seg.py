from typing import Optional, Tuple
import torch
import torch.nn as nn

from app.config import SegConfig
from app.networks.encoder import SpeechEncoder, SpeechDecoder
from app.networks.dual_path import DualPathMaskEstimator
from app.networks.gesture_encoder import GestureEncoder


class SegNet(nn.Module):
    """
    Извлечение целевого диктора по жестам

    X(t) и V(t) конкатенируются по каналам, оценщик выдаёт одну маску,
    маскированные эмбеддинги декодируются обратно в волну.
    """

    def __init__(self, cfg: SegConfig):
        super().__init__()
        self.cfg = cfg
        self.encoder = SpeechEncoder(cfg.encoder_kernel, cfg.encoder_stride, cfg.encoder_channels)
        self.gesture_encoder = GestureEncoder(cfg.gesture_hidden, cfg.gesture_layers, cfg.gesture_dropout)
        self.mask_estimator = DualPathMaskEstimator(
            in_channels=cfg.encoder_channels + self.gesture_encoder.out_channels,
            out_channels=cfg.encoder_channels,
            bottleneck=cfg.bottleneck_channels,
            hidden=cfg.hidden_channels,
            blocks=cfg.mask_blocks,
            chunk_size=cfg.chunk_size,
            n_masks=1,
        )
        self.decoder = SpeechDecoder(cfg.encoder_kernel, cfg.encoder_stride, cfg.encoder_channels)

    def estimate_mask(
        self,
        mixture: torch.Tensor,
        poses: torch.Tensor,
        lengths: Optional[torch.Tensor] = None,
        pose_lengths: Optional[torch.Tensor] = None,
    ) -> Tuple[torch.Tensor, torch.Tensor]:
        """Возвращает (маска [B, C, T_x], X(t) [B, C, T_x])"""
        embeddings = self.encoder(mixture)
        frame_lengths = self.encoder.frame_lengths(lengths) if lengths is not None else None
        cue = self.gesture_encoder(poses, embeddings.shape[-1], pose_lengths, frame_lengths)
        mask = self.mask_estimator(torch.cat([embeddings, cue], dim=1))[:, 0]
        return mask, embeddings

    def forward(
        self,
        mixture: torch.Tensor,
        poses: torch.Tensor,
        lengths: Optional[torch.Tensor] = None,
        pose_lengths: Optional[torch.Tensor] = None,
    ) -> torch.Tensor:
        """[B, L] смесь + [B, T_g, 10, 3] позы -> [B, L] оценка цели"""
        mask, embeddings = self.estimate_mask(mixture, poses, lengths, pose_lengths)
        return self.decoder(mask * embeddings, mixture.shape[-1])
