"""
Чекпоинты: сохранение и загрузка сетей вместе с конфигурацией,
состоянием оптимизатора, статистиками поз и расписанием.
"""
from pathlib import Path
from typing import Any, Dict, Literal, Optional, Tuple, Type, Union
import numpy as np
import torch
from pydantic import BaseModel, ConfigDict
from loguru import logger

from app.config import SegConfig, DprnnConfig, GsrConfig
from app.errors import CheckpointError
from app.schemas import ScheduleState
from app.networks import SegNet, DprnnNet, GsrNet

CHECKPOINT_VERSION = 1

ModelKind = Literal["seg", "dprnn", "gsr"]
ModelConfig = Union[SegConfig, DprnnConfig, GsrConfig]

MODEL_TYPES: Dict[str, Tuple[Type[BaseModel], Type[torch.nn.Module]]] = {
    "seg": (SegConfig, SegNet),
    "dprnn": (DprnnConfig, DprnnNet),
    "gsr": (GsrConfig, GsrNet),
}

# Сети, которым на входе нужны нормализованные позы
POSE_KINDS = ("seg", "gsr")


class Checkpoint(BaseModel):
    """Загруженный чекпоинт с уже собранной сетью в режиме eval"""
    kind: ModelKind
    config: Any
    model: Any
    optimizer_state: Optional[dict] = None
    pose_mean: Optional[np.ndarray] = None
    pose_std: Optional[np.ndarray] = None
    schedule: Optional[ScheduleState] = None
    path: str

    model_config = ConfigDict(arbitrary_types_allowed=True)

    @property
    def pose_stats(self) -> Tuple[np.ndarray, np.ndarray]:
        if self.pose_mean is None or self.pose_std is None:
            raise CheckpointError(f"в чекпоинте нет статистик нормализации поз: {self.path}")
        return self.pose_mean, self.pose_std


def build_model(kind: str, config: BaseModel) -> torch.nn.Module:
    if kind not in MODEL_TYPES:
        raise CheckpointError(f"неизвестный тип сети: {kind}")
    return MODEL_TYPES[kind][1](config)


def save_checkpoint(
    path: str | Path,
    kind: ModelKind,
    config: ModelConfig,
    model: torch.nn.Module,
    optimizer: Optional[torch.optim.Optimizer] = None,
    pose_stats: Optional[Tuple[np.ndarray, np.ndarray]] = None,
    schedule: Optional[ScheduleState] = None,
) -> Path:
    """Сохранить чекпоинт через torch.save"""
    if kind in POSE_KINDS and pose_stats is None:
        raise CheckpointError(f"для {kind} нужны статистики нормализации поз")
    payload = {
        "format_version": CHECKPOINT_VERSION,
        "kind": kind,
        "config": config.model_dump(),
        "state_dict": model.state_dict(),
        "optimizer": optimizer.state_dict() if optimizer is not None else None,
        "pose_stats": None if pose_stats is None else {
            "mean": torch.tensor(np.asarray(pose_stats[0]), dtype=torch.float64),
            "std": torch.tensor(np.asarray(pose_stats[1]), dtype=torch.float64),
        },
        "schedule": schedule.model_dump() if schedule is not None else None,
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    torch.save(payload, str(tmp))
    tmp.replace(path)
    return path


def load_checkpoint(
    path: str | Path,
    kind: ModelKind,
    expected_config: Optional[ModelConfig] = None,
) -> Checkpoint:
    """
    Загрузить чекпоинт и собрать сеть

    Любое расхождение (версия, тип сети, конфигурация, отсутствие
    статистик поз у SEG/GSR) приводит к CheckpointError.
    """
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"чекпоинт не найден: {path}")
    try:
        payload = torch.load(str(path), map_location="cpu", weights_only=True)
    except Exception as e:
        logger.error(f"Не удалось прочитать чекпоинт {path}: {e}")
        raise CheckpointError(f"чекпоинт повреждён: {path}") from e

    if not isinstance(payload, dict) or payload.get("format_version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"неподдерживаемая версия чекпоинта: {path}")
    if payload.get("kind") != kind:
        raise CheckpointError(f"ожидался чекпоинт {kind}, получен {payload.get('kind')}: {path}")

    config_type = MODEL_TYPES[kind][0]
    try:
        config = config_type.model_validate(payload["config"])
    except ValueError as e:
        raise CheckpointError(f"конфигурация в чекпоинте некорректна ({e}): {path}") from e
    if expected_config is not None and expected_config.model_dump() != config.model_dump():
        raise CheckpointError(
            f"конфигурация чекпоинта не совпадает с ожидаемой: {path}\n"
            f"  в чекпоинте: {config.model_dump()}\n  ожидалась: {expected_config.model_dump()}"
        )

    model = build_model(kind, config)
    try:
        model.load_state_dict(payload["state_dict"])
    except (RuntimeError, KeyError) as e:
        raise CheckpointError(f"веса не подходят к архитектуре ({e}): {path}") from e
    model.eval()

    stats = payload.get("pose_stats")
    if kind in POSE_KINDS and not stats:
        raise CheckpointError(f"в чекпоинте нет статистик нормализации поз: {path}")
    schedule = payload.get("schedule")
    return Checkpoint(
        kind=kind,
        config=config,
        model=model,
        optimizer_state=payload.get("optimizer"),
        pose_mean=stats["mean"].numpy() if stats else None,
        pose_std=stats["std"].numpy() if stats else None,
        schedule=ScheduleState.model_validate(schedule) if schedule else None,
        path=str(path),
    )
