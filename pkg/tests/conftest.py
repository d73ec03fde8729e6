from pathlib import Path
from typing import List, Tuple
import numpy as np
import pytest

from app.config import Settings, SegConfig, DprnnConfig, GsrConfig, TrainingConfig, EvaluationConfig
from app.corpus import simulate_manifest, materialize, load_pool
from app.schemas import (
    Waveform, PoseSequence, MixtureExample, UtteranceRecord, UtteranceScore, EvaluationReport, SPINE_INDEX,
)
from app.metrics import breakdown_report
from app.signal import simulate_mixture
from app.synth import write_synth_corpus


def tiny_seg() -> SegConfig:
    return SegConfig(
        encoder_kernel=32, encoder_stride=16, encoder_channels=16,
        gesture_layers=1, gesture_hidden=8, gesture_dropout=0.0,
        bottleneck_channels=16, hidden_channels=16, mask_blocks=1, chunk_size=20,
    )


def tiny_dprnn(num_speakers: int = 2) -> DprnnConfig:
    return DprnnConfig(
        encoder_kernel=32, encoder_stride=16, encoder_channels=16,
        bottleneck_channels=16, hidden_channels=16, mask_blocks=1, chunk_size=20,
        num_speakers=num_speakers,
    )


def tiny_gsr() -> GsrConfig:
    return GsrConfig(
        encoder_kernel=32, encoder_stride=16, speech_channels=16, speech_layers=2,
        gesture_layers=1, gesture_hidden=8, gesture_dropout=0.0, fusion_channels=16,
    )


def make_settings(tmp_dir: Path, **training) -> Settings:
    return Settings(
        _env_file=None,
        out_dir=str(tmp_dir / "runs"),
        log_dir=str(tmp_dir / "logs"),
        database_url=f"sqlite:///{tmp_dir / 'scores.db'}",
        seg=tiny_seg(),
        dprnn=tiny_dprnn(),
        gsr=tiny_gsr(),
        training=TrainingConfig(batch_size=2, max_epochs=1, **training),
    )


def random_pose(rng: np.random.Generator, n_frames: int) -> PoseSequence:
    """Случайные позы с позвоночником в нуле"""
    joints = rng.standard_normal((n_frames, 10, 3))
    joints[:, SPINE_INDEX] = 0.0
    return PoseSequence(joints=joints)


def noise_example(rng: np.random.Generator, n_samples: int = 400, n_interferers: int = 1) -> MixtureExample:
    target = Waveform(samples=rng.standard_normal(n_samples))
    interferers = [Waveform(samples=rng.standard_normal(n_samples)) for _ in range(n_interferers)]
    snrs = rng.uniform(-10.0, 10.0, size=n_interferers)
    return simulate_mixture(target, interferers, snrs, seed=int(rng.integers(1000)))


@pytest.fixture
def settings(tmp_path) -> Settings:
    return make_settings(tmp_path)


@pytest.fixture(scope="session")
def synth_records(tmp_path_factory) -> List[UtteranceRecord]:
    """Маленький синтетический корпус: 6 дикторов по 3 высказывания 1.0-1.5 с"""
    root = tmp_path_factory.mktemp("corpus")
    return write_synth_corpus(root, 6, 3, seed=0, min_duration_s=1.0, max_duration_s=1.5)


@pytest.fixture(scope="session")
def train_examples(synth_records) -> List[Tuple[MixtureExample, PoseSequence]]:
    entries = simulate_manifest(synth_records, 4, 1, seed=0, split="train")
    return [materialize(entry) for entry in entries]


@pytest.fixture(scope="session")
def synth_pool(synth_records):
    return load_pool(synth_records)


def sample_report(n: int = 12, system: str = "cascade") -> EvaluationReport:
    """Отчёт по синтетическим оценкам с парой отрицательных SI-SDRi"""
    rng = np.random.default_rng(7)
    scores = [
        UtteranceScore(
            mixture_id=f"mix{i:03d}",
            system=system,
            si_sdri=float(rng.uniform(-12.0, 18.0)),
            sdri=float(rng.uniform(-12.0, 18.0)),
            utterance_len_s=float(rng.uniform(1.0, 12.0)),
            target_interference_snr_db=float(rng.uniform(-10.0, 10.0)),
            selected_index=int(rng.integers(2)),
        )
        for i in range(n)
    ]
    cfg = EvaluationConfig()
    return breakdown_report(scores, cfg.length_bins, cfg.snr_bins, cfg.histogram_bins, system=system)
