from typing import Optional
import torch
import torch.nn as nn

from app.config import GsrConfig
from app.networks.encoder import SpeechEncoder
from app.networks.gesture_encoder import GestureEncoder


class GsrNet(nn.Module):
    """
    Классификатор пар жест-речь

    Речевая ветка: свёрточный фронтенд и стек дилатированных свёрток на
    частоте кадров эмбеддинга. Ветка жестов: BLSTM с апсемплингом.
    Признаки конкатенируются покадрово, усредняются по времени и через
    сигмоиду дают вероятность того, что пара из одного видео.
    """

    def __init__(self, cfg: GsrConfig):
        super().__init__()
        self.cfg = cfg
        channels = cfg.speech_channels
        self.encoder = SpeechEncoder(cfg.encoder_kernel, cfg.encoder_stride, channels)
        layers = []
        for i in range(cfg.speech_layers):
            dilation = 2 ** i
            layers += [
                nn.Conv1d(channels, channels, kernel_size=3, padding=dilation, dilation=dilation),
                nn.GroupNorm(1, channels, eps=1e-8),
                nn.ReLU(),
            ]
        self.speech_stack = nn.Sequential(*layers)
        self.gesture_encoder = GestureEncoder(cfg.gesture_hidden, cfg.gesture_layers, cfg.gesture_dropout)
        self.fusion = nn.Sequential(
            nn.Conv1d(channels + self.gesture_encoder.out_channels, cfg.fusion_channels, kernel_size=1),
            nn.ReLU(),
            nn.Conv1d(cfg.fusion_channels, cfg.fusion_channels, kernel_size=1),
            nn.ReLU(),
        )
        self.classifier = nn.Linear(cfg.fusion_channels, 1)

    def forward(
        self,
        speech: torch.Tensor,
        poses: torch.Tensor,
        lengths: Optional[torch.Tensor] = None,
        pose_lengths: Optional[torch.Tensor] = None,
    ) -> torch.Tensor:
        """[B, L] речь + [B, T_g, 10, 3] позы -> [B] вероятность пары"""
        embeddings = self.speech_stack(self.encoder(speech))
        total = embeddings.shape[-1]
        frame_lengths = self.encoder.frame_lengths(lengths) if lengths is not None else None
        cue = self.gesture_encoder(poses, total, pose_lengths, frame_lengths)
        fused = self.fusion(torch.cat([embeddings, cue], dim=1))

        if frame_lengths is None:
            pooled = fused.mean(dim=-1)
        else:
            mask = (torch.arange(total, device=fused.device) < frame_lengths.unsqueeze(-1)).to(fused.dtype)
            pooled = (fused * mask.unsqueeze(1)).sum(dim=-1) / mask.sum(dim=-1, keepdim=True)
        return torch.sigmoid(self.classifier(pooled).squeeze(-1))
