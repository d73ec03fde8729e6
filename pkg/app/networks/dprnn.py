import torch
import torch.nn as nn

from app.config import DprnnConfig
from app.networks.encoder import SpeechEncoder, SpeechDecoder
from app.networks.dual_path import DualPathMaskEstimator


class DprnnNet(nn.Module):
    """Слепой сепаратор: общий энкодер, маска на каждого диктора, общий декодер"""

    def __init__(self, cfg: DprnnConfig):
        super().__init__()
        self.cfg = cfg
        self.num_speakers = cfg.num_speakers
        self.encoder = SpeechEncoder(cfg.encoder_kernel, cfg.encoder_stride, cfg.encoder_channels)
        self.mask_estimator = DualPathMaskEstimator(
            in_channels=cfg.encoder_channels,
            out_channels=cfg.encoder_channels,
            bottleneck=cfg.bottleneck_channels,
            hidden=cfg.hidden_channels,
            blocks=cfg.mask_blocks,
            chunk_size=cfg.chunk_size,
            n_masks=cfg.num_speakers,
        )
        self.decoder = SpeechDecoder(cfg.encoder_kernel, cfg.encoder_stride, cfg.encoder_channels)

    def estimate_masks(self, mixture: torch.Tensor):
        embeddings = self.encoder(mixture)
        return self.mask_estimator(embeddings), embeddings

    def forward(self, mixture: torch.Tensor) -> torch.Tensor:
        """[B, L] -> [B, n_speakers, L]"""
        masks, embeddings = self.estimate_masks(mixture)
        b, n, c, t = masks.shape
        masked = (masks * embeddings.unsqueeze(1)).reshape(b * n, c, t)
        return self.decoder(masked, mixture.shape[-1]).reshape(b, n, -1)
