from pydantic import BaseModel, ConfigDict, computed_field, field_validator, model_validator
from typing import Optional, List, Literal, Tuple
import numpy as np


JOINT_NAMES: Tuple[str, ...] = (
    "head", "neck", "nose", "spine",
    "l_shoulder", "r_shoulder",
    "l_elbow", "r_elbow",
    "l_wrist", "r_wrist",
)
SPINE_INDEX = JOINT_NAMES.index("spine")
WRIST_INDICES = (JOINT_NAMES.index("l_wrist"), JOINT_NAMES.index("r_wrist"))
ELBOW_INDICES = (JOINT_NAMES.index("l_elbow"), JOINT_NAMES.index("r_elbow"))

Split = Literal["train", "validation", "test"]


def _frozen_array(value, dtype=np.float64) -> np.ndarray:
    array = np.array(value, dtype=dtype, copy=True)
    array.flags.writeable = False
    return array


# Сигналы и жесты
class Waveform(BaseModel):
    """Моно сигнал во временной области"""
    samples: np.ndarray
    sample_rate: int = 16000

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    @field_validator('samples', mode='before')
    @classmethod
    def parse_samples(cls, v):
        array = _frozen_array(v)
        if array.ndim != 1:
            raise ValueError(f"ожидается одномерный сигнал, получено {array.shape}")
        if array.size < 1:
            raise ValueError("сигнал должен содержать хотя бы один отсчёт")
        if not np.all(np.isfinite(array)):
            raise ValueError("сигнал содержит не конечные значения")
        return array

    @field_validator('sample_rate')
    @classmethod
    def check_rate(cls, v):
        if v <= 0:
            raise ValueError("sample_rate должен быть положительным")
        return v

    @property
    def num_samples(self) -> int:
        return int(self.samples.shape[0])

    @property
    def duration_s(self) -> float:
        return self.num_samples / self.sample_rate


class PoseSequence(BaseModel):
    """Последовательность 3D поз верхней части тела: T_g x 10 x 3"""
    joints: np.ndarray
    frame_rate: int = 15
    joint_names: Tuple[str, ...] = JOINT_NAMES

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    @field_validator('joints', mode='before')
    @classmethod
    def parse_joints(cls, v):
        array = _frozen_array(v)
        if array.ndim != 3 or array.shape[1:] != (10, 3):
            raise ValueError(f"ожидается форма T x 10 x 3, получено {array.shape}")
        if array.shape[0] < 1:
            raise ValueError("последовательность поз пуста")
        if not np.all(np.isfinite(array)):
            raise ValueError("координаты суставов содержат не конечные значения")
        return array

    @field_validator('joint_names')
    @classmethod
    def check_names(cls, v):
        if tuple(v) != JOINT_NAMES:
            raise ValueError(f"порядок суставов должен быть {JOINT_NAMES}")
        return tuple(v)

    @property
    def num_frames(self) -> int:
        return int(self.joints.shape[0])

    @property
    def duration_s(self) -> float:
        return self.num_frames / self.frame_rate

    @property
    def is_spine_centered(self) -> bool:
        return bool(np.all(np.abs(self.joints[:, SPINE_INDEX, :]) < 1e-9))


class SpeechEmbedding(BaseModel):
    """Эмбеддинг смеси X(t): T_x x C_x"""
    frames: np.ndarray
    frame_hop: int

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    @field_validator('frames', mode='before')
    @classmethod
    def parse_frames(cls, v):
        array = _frozen_array(v)
        if array.ndim != 2 or array.shape[0] < 1:
            raise ValueError(f"ожидается матрица T_x x C_x, получено {array.shape}")
        if not np.all(np.isfinite(array)):
            raise ValueError("эмбеддинг содержит не конечные значения")
        return array

    @property
    def num_frames(self) -> int:
        return int(self.frames.shape[0])


class GestureEmbedding(BaseModel):
    """Латентное представление жестов V(t): T_v x C_v"""
    frames: np.ndarray
    frame_rate: float

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    @field_validator('frames', mode='before')
    @classmethod
    def parse_frames(cls, v):
        array = _frozen_array(v)
        if array.ndim != 2 or array.shape[0] < 1:
            raise ValueError(f"ожидается матрица T_v x C_v, получено {array.shape}")
        if not np.all(np.isfinite(array)):
            raise ValueError("эмбеддинг содержит не конечные значения")
        return array

    @property
    def num_frames(self) -> int:
        return int(self.frames.shape[0])


class MixtureExample(BaseModel):
    """Смесь x = s + sum(b_i); помехи хранятся уже отмасштабированными"""
    target: Waveform
    interferers: List[Waveform]
    snrs_db: List[float]
    mixture: Waveform
    num_interferers: int
    seed: int

    model_config = ConfigDict(frozen=True)

    @model_validator(mode='after')
    def check_closure(self):
        if self.num_interferers < 1:
            raise ValueError("нужна хотя бы одна помеха")
        if not (len(self.interferers) == len(self.snrs_db) == self.num_interferers):
            raise ValueError("число помех, SNR и num_interferers не совпадает")
        n = self.mixture.num_samples
        if any(w.num_samples != n for w in [self.target, *self.interferers]):
            raise ValueError("все составляющие должны иметь длину смеси")
        rebuilt = self.target.samples + sum(b.samples for b in self.interferers)
        scale = max(np.linalg.norm(self.mixture.samples), 1e-12)
        if np.linalg.norm(rebuilt - self.mixture.samples) / scale > 1e-6:
            raise ValueError("смесь не равна сумме составляющих")
        return self

    @property
    def sources(self) -> List[Waveform]:
        """Цель и помехи в порядке [s, b_1, ..., b_I]"""
        return [self.target, *self.interferers]


# Лоссы
class PairLabel(BaseModel):
    """Метка пары жест-речь и предсказанная вероятность"""
    y: int
    y_hat: float

    @field_validator('y')
    @classmethod
    def check_label(cls, v):
        if v not in (0, 1):
            raise ValueError("метка должна быть 0 или 1")
        return v

    @field_validator('y_hat')
    @classmethod
    def clamp_probability(cls, v):
        if not np.isfinite(v):
            raise ValueError("вероятность должна быть конечной")
        return float(min(max(v, 1e-7), 1.0 - 1e-7))


class PermutationAssignment(BaseModel):
    """Назначение оценок референсам: mapping[j] это индекс референса для оценки j"""
    mapping: Tuple[int, ...]
    per_pair_scores: List[float]

    @model_validator(mode='after')
    def check_bijection(self):
        if sorted(self.mapping) != list(range(len(self.mapping))):
            raise ValueError(f"mapping не является перестановкой: {self.mapping}")
        if len(self.per_pair_scores) != len(self.mapping):
            raise ValueError("число оценок пар не совпадает с размером перестановки")
        return self


# Корпус
class UtteranceRecord(BaseModel):
    """Высказывание корпуса: аудио + позы одного диктора"""
    id: str
    audio_path: str
    pose_path: str
    speaker_id: str
    duration_s: float

    @field_validator('duration_s')
    @classmethod
    def check_duration(cls, v):
        if v <= 0:
            raise ValueError("длительность должна быть положительной")
        return v


class MixtureManifestEntry(BaseModel):
    """Одна строка манифеста смесей"""
    mixture_id: str
    split: Split
    target: UtteranceRecord
    interferers: List[UtteranceRecord]
    snrs_db: List[float]
    seed: int

    @model_validator(mode='after')
    def check_entry(self):
        if not self.interferers or len(self.interferers) != len(self.snrs_db):
            raise ValueError("число помех и SNR должно совпадать и быть >= 1")
        if any(not -10.0 <= snr <= 10.0 for snr in self.snrs_db):
            raise ValueError(f"SNR вне диапазона [-10, 10]: {self.snrs_db}")
        if self.target.speaker_id in {r.speaker_id for r in self.interferers}:
            raise ValueError("диктор цели совпадает с диктором помехи")
        return self


class ManifestHeader(BaseModel):
    """Заголовочная строка манифеста"""
    format_version: int = 1
    generator_seed: int
    split: Split
    n_interferers: int
    duration_bias: str = "inverse-duration"


# Оценка
class UtteranceScore(BaseModel):
    """Метрики одного тестового высказывания"""
    mixture_id: str
    system: str
    si_sdri: float
    sdri: float
    pesqi: Optional[float] = None
    stoii: Optional[float] = None
    utterance_len_s: float
    target_interference_snr_db: float
    selected_index: Optional[int] = None

    model_config = ConfigDict(frozen=True)

    @model_validator(mode='before')
    @classmethod
    def check_correct(cls, data):
        if isinstance(data, dict) and 'correct' in data:
            data = dict(data)
            flag = data.pop('correct')
            if flag is not None and data.get('si_sdri') is not None and bool(flag) != (float(data['si_sdri']) > 0):
                raise ValueError("correct должен совпадать с (si_sdri > 0)")
        return data

    @computed_field
    @property
    def correct(self) -> bool:
        return self.si_sdri > 0


class BinStat(BaseModel):
    """Статистика одного бина; пустой бин хранит None вместо средних"""
    lower: Optional[float] = None
    upper: Optional[float] = None
    count: int
    mean_si_sdri: Optional[float] = None
    accuracy_pct: Optional[float] = None


class ReportBins(BaseModel):
    """Границы бинов и разбивки отчёта"""
    length_edges: List[float]
    snr_edges: List[float]
    histogram_edges: List[float]
    by_length: List[BinStat]
    by_snr: List[BinStat]
    histogram: List[BinStat]


class EvaluationReport(BaseModel):
    """Отчёт оценки системы извлечения"""
    system: str
    sdr_variant: str = "fixed-scale"
    n_utterances: int
    si_sdri_db: float
    sdri_db: float
    pesqi: Optional[float] = None
    stoii: Optional[float] = None
    accuracy_pct: float
    bins: ReportBins
    per_utterance: List[UtteranceScore]


class GsrEvaluation(BaseModel):
    """Точность GSR в одном из режимов проверки"""
    mode: Literal["verify", "select-2", "select-3"]
    n_trials: int
    accuracy_pct: float


# Обучение и инференс
class ScheduleState(BaseModel):
    """Состояние расписания learning rate и ранней остановки"""
    lr: float
    best_val_loss: float = float("inf")
    epochs_since_improvement: int = 0
    epoch: int = 0
    policy: Literal["halve-on-plateau", "decay"] = "halve-on-plateau"
    halve_patience: int = 6
    stop_patience: int = 10
    decay_factor: float = 0.9

    model_config = ConfigDict(frozen=True)

    @field_validator('lr')
    @classmethod
    def check_lr(cls, v):
        if not v > 0:
            raise ValueError("learning rate должен быть положительным")
        return v

    @field_validator('epochs_since_improvement')
    @classmethod
    def check_counter(cls, v):
        if v < 0:
            raise ValueError("счётчик эпох без улучшения не может быть отрицательным")
        return v


class GsrScore(BaseModel):
    """Вероятность того, что речь и жесты из одного видео"""
    probability: float

    @field_validator('probability')
    @classmethod
    def check_range(cls, v):
        if not 0.0 <= v <= 1.0:
            raise ValueError("вероятность вне [0, 1]")
        return v


class CascadeResult(BaseModel):
    """Результат каскада DPRNN-GSR"""
    selected_index: int
    scores: List[float]
    separated: List[Waveform]
    extracted: Waveform

    model_config = ConfigDict(frozen=True)

    @model_validator(mode='after')
    def check_selection(self):
        if len(self.scores) != len(self.separated):
            raise ValueError("число оценок не совпадает с числом потоков")
        if self.selected_index != int(np.argmax(self.scores)):
            raise ValueError("selected_index должен быть argmax оценок")
        if self.extracted.samples is not self.separated[self.selected_index].samples:
            raise ValueError("extracted должен быть выбранным потоком")
        return self
