"""
Расписание learning rate и ранняя остановка по лучшему валидационному лоссу.
"""
from typing import Literal, Tuple
import math

from app.config import TrainingConfig
from app.errors import TrainingDivergedError, InvalidArgumentError
from app.schemas import ScheduleState

Action = Literal["continue", "halve", "stop"]


def initial_schedule(kind: str, cfg: TrainingConfig) -> ScheduleState:
    """Начальное состояние для сети: halve-on-plateau для SEG и DPRNN, decay для GSR"""
    if kind == "seg":
        return ScheduleState(lr=cfg.seg_lr, halve_patience=cfg.halve_patience, stop_patience=cfg.stop_patience)
    if kind == "dprnn":
        return ScheduleState(lr=cfg.dprnn_lr, halve_patience=cfg.halve_patience, stop_patience=cfg.stop_patience)
    if kind == "gsr":
        return ScheduleState(
            lr=cfg.gsr_lr,
            policy="decay",
            decay_factor=cfg.gsr_decay,
            stop_patience=cfg.gsr_stop_patience,
        )
    raise InvalidArgumentError(f"неизвестный тип сети: {kind}")


def step_schedule(state: ScheduleState, val_loss: float) -> Tuple[ScheduleState, Action]:
    """
    Один шаг расписания после эпохи

    Улучшение строгое (val_loss < best). halve-on-plateau: lr делится
    пополам при счётчике, кратном halve_patience, остановка при
    счётчике = stop_patience. decay: lr умножается на decay_factor
    каждую эпоху, остановка при счётчике = stop_patience.
    """
    if not math.isfinite(val_loss):
        raise TrainingDivergedError(
            f"валидационный лосс не конечен ({val_loss}) на эпохе {state.epoch + 1}, lr={state.lr:g}"
        )
    epoch = state.epoch + 1
    if val_loss < state.best_val_loss:
        best, counter = float(val_loss), 0
    else:
        best, counter = state.best_val_loss, state.epochs_since_improvement + 1

    lr = state.lr
    action: Action = "continue"
    if counter >= state.stop_patience:
        action = "stop"
    elif state.policy == "halve-on-plateau" and counter > 0 and counter % state.halve_patience == 0:
        lr = lr / 2.0
        action = "halve"
    if state.policy == "decay" and action != "stop":
        lr = lr * state.decay_factor

    new_state = state.model_copy(update={
        "lr": lr,
        "best_val_loss": best,
        "epochs_since_improvement": counter,
        "epoch": epoch,
    })
    return new_state, action
