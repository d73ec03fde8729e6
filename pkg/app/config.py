from pydantic import BaseModel, ValidationError, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict
from functools import lru_cache
from pathlib import Path
from typing import Optional, List
import json

from app.errors import InvalidArgumentError


def _check_increasing(values: List[float]) -> List[float]:
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ValueError(f"границы бинов должны строго возрастать: {values}")
    return values


class SegConfig(BaseModel):
    """Гиперпараметры сети SEG (речевой энкодер, энкодер жестов, маска)"""
    encoder_kernel: int = 40
    encoder_stride: int = 20
    encoder_channels: int = 64
    gesture_layers: int = 5  # N_ge
    gesture_hidden: int = 128
    gesture_dropout: float = 0.3
    bottleneck_channels: int = 64
    hidden_channels: int = 128
    mask_blocks: int = 2
    chunk_size: int = 50

    @field_validator('gesture_layers', 'mask_blocks')
    @classmethod
    def check_positive(cls, v):
        if v < 1:
            raise ValueError("число слоёв должно быть >= 1")
        return v

    @field_validator('gesture_dropout')
    @classmethod
    def check_dropout(cls, v):
        if not 0.0 <= v < 1.0:
            raise ValueError("dropout должен лежать в [0, 1)")
        return v

    @field_validator('chunk_size')
    @classmethod
    def check_chunk(cls, v):
        if v < 2:
            raise ValueError("chunk_size должен быть >= 2")
        return v

    @model_validator(mode='after')
    def check_stride(self):
        if self.encoder_stride > self.encoder_kernel:
            raise ValueError("stride не может превышать kernel")
        return self


class DprnnConfig(BaseModel):
    """Гиперпараметры сепаратора DPRNN"""
    encoder_kernel: int = 40
    encoder_stride: int = 20
    encoder_channels: int = 64
    bottleneck_channels: int = 64
    hidden_channels: int = 128
    mask_blocks: int = 2
    chunk_size: int = 50
    num_speakers: int = 2

    @field_validator('num_speakers')
    @classmethod
    def check_speakers(cls, v):
        if v not in (2, 3):
            raise ValueError("поддерживается 2 или 3 диктора")
        return v

    @field_validator('mask_blocks')
    @classmethod
    def check_blocks(cls, v):
        if v < 1:
            raise ValueError("mask_blocks должен быть >= 1")
        return v

    @model_validator(mode='after')
    def check_stride(self):
        if self.encoder_stride > self.encoder_kernel:
            raise ValueError("stride не может превышать kernel")
        return self


class GsrConfig(BaseModel):
    """Гиперпараметры классификатора пар жест-речь"""
    encoder_kernel: int = 40
    encoder_stride: int = 20
    speech_channels: int = 64
    speech_layers: int = 3
    gesture_layers: int = 2
    gesture_hidden: int = 64
    gesture_dropout: float = 0.3
    fusion_channels: int = 64

    @field_validator('gesture_dropout')
    @classmethod
    def check_dropout(cls, v):
        if not 0.0 <= v < 1.0:
            raise ValueError("dropout должен лежать в [0, 1)")
        return v

    @model_validator(mode='after')
    def check_stride(self):
        if self.encoder_stride > self.encoder_kernel:
            raise ValueError("stride не может превышать kernel")
        return self


class TrainingConfig(BaseModel):
    """Оптимизатор, расписание learning rate и батчи"""
    seg_lr: float = 5e-4
    dprnn_lr: float = 1e-3
    gsr_lr: float = 1e-4
    halve_patience: int = 6
    stop_patience: int = 10
    gsr_decay: float = 0.9
    gsr_stop_patience: int = 5
    grad_clip: float = 5.0
    batch_size: int = 4
    max_epochs: int = 100
    num_workers: int = 0
    validation_fraction: float = 0.1
    single_thread: bool = True


class EvaluationConfig(BaseModel):
    """Бины для разбивки отчёта (длина в секундах, SNR в дБ, гистограмма SI-SDRi)"""
    length_bins: List[float] = [2.0, 4.0, 6.0, 8.0, 10.0]
    snr_bins: List[float] = [-10.0, -5.0, 0.0, 5.0, 10.0]
    histogram_bins: List[float] = [-20.0, -15.0, -10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0]

    @field_validator('length_bins', 'snr_bins', 'histogram_bins')
    @classmethod
    def check_bins(cls, v):
        return _check_increasing(v)


class Settings(BaseSettings):
    """Настройки приложения: .env, файл конфигурации запуска и переменные окружения"""
    seed: int = 0
    sample_rate: int = 16000
    pose_frame_rate: int = 15
    out_dir: str = "runs"
    log_dir: str = "logs"
    log_level: str = "INFO"
    database_url: str = "sqlite:///runs/scores.db"

    # Внешние оценщики PESQ/STOI в виде "module:function"
    pesq_scorer: Optional[str] = None
    stoi_scorer: Optional[str] = None

    seg: SegConfig = SegConfig()
    dprnn: DprnnConfig = DprnnConfig()
    gsr: GsrConfig = GsrConfig()
    training: TrainingConfig = TrainingConfig()
    evaluation: EvaluationConfig = EvaluationConfig()

    model_config = SettingsConfigDict(
        env_file=".env",
        env_nested_delimiter="__",
        case_sensitive=False,
        extra="ignore",
    )


def load_settings(config_path: Optional[str] = None) -> Settings:
    """Прочитать настройки; файл конфигурации запуска перекрывает .env"""
    env_files = (".env",)
    if config_path is not None:
        path = Path(config_path)
        if not path.is_file():
            raise InvalidArgumentError(f"файл конфигурации не найден: {config_path}")
        env_files = (".env", str(path))
    try:
        return Settings(_env_file=env_files)
    except ValidationError as e:
        raise InvalidArgumentError(f"некорректная конфигурация: {e}") from e


@lru_cache()
def get_settings(config_path: Optional[str] = None) -> Settings:
    """Получить настройки приложения (кешируется по пути конфигурации)"""
    return load_settings(config_path)


def _flatten(prefix: str, value, out: dict) -> None:
    if isinstance(value, dict):
        for key, inner in value.items():
            _flatten(f"{prefix}__{key}" if prefix else key, inner, out)
        return
    out[prefix.upper()] = value


def dump_settings(settings: Settings, path: str | Path) -> Path:
    """
    Записать разрешённую конфигурацию в формате KEY=value

    Вложенные группы разделяются "__", списки пишутся в JSON,
    незаданные (None) значения пропускаются.
    """
    flat: dict = {}
    _flatten("", settings.model_dump(), flat)
    lines = []
    for key in sorted(flat):
        value = flat[key]
        if value is None:
            continue
        if isinstance(value, bool):
            text = "true" if value else "false"
        elif isinstance(value, (list, tuple)):
            text = json.dumps(list(value))
        else:
            text = str(value)
        lines.append(f"{key}={text}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
