"""
Обучение SEG, DPRNN и GSR: Adam, клиппинг градиента, расписание lr,
ранняя остановка, лучший и последний чекпоинты.
"""
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple
import numpy as np
import torch
from pydantic import BaseModel
from loguru import logger
from tqdm import tqdm

from app.config import Settings, dump_settings
from app.errors import InvalidArgumentError, TrainingDivergedError, CheckpointError
from app.schemas import MixtureExample, PoseSequence, ScheduleState
from app.gesture import compute_pose_stats
from app.objectives import neg_si_sdr_batch, pit_loss_batch, bce_loss_batch, si_sdr
from app.schedule import initial_schedule, step_schedule
from app.checkpoint import Checkpoint, build_model, save_checkpoint, load_checkpoint
from app.datasets import MixtureDataset, PairDataset, make_loader
from app.corpus import GsrPair
from app.networks import dprnn_forward

BEST_CHECKPOINT = "best.pt"
LAST_CHECKPOINT = "last.pt"
RESOLVED_CONFIG = "resolved_config.env"

LossFn = Callable[[torch.nn.Module, Dict[str, torch.Tensor]], torch.Tensor]


class EpochLog(BaseModel):
    epoch: int
    train_loss: float
    val_loss: float
    lr: float
    action: str


class TrainResult(BaseModel):
    """Итог обучения: пути чекпоинтов и кривая лоссов"""
    kind: str
    best_checkpoint: str
    last_checkpoint: str
    best_val_loss: float
    history: List[EpochLog]
    stopped_early: bool


def seed_everything(seed: int, single_thread: bool = True) -> None:
    """Детерминизм: seed для torch и numpy, один поток при single_thread"""
    torch.manual_seed(seed)
    np.random.seed(seed % (2 ** 32))
    if single_thread:
        torch.set_num_threads(1)


# Лоссы на батч
def seg_batch_loss(model: torch.nn.Module, batch: Dict[str, torch.Tensor]) -> torch.Tensor:
    estimate = model(batch["mixture"], batch["pose"], batch["lengths"], batch["pose_lengths"])
    return neg_si_sdr_batch(estimate, batch["target"], batch["lengths"])


def dprnn_batch_loss(model: torch.nn.Module, batch: Dict[str, torch.Tensor]) -> torch.Tensor:
    estimates = model(batch["mixture"])
    loss, _ = pit_loss_batch(estimates, batch["sources"], batch["lengths"])
    return loss


def gsr_batch_loss(model: torch.nn.Module, batch: Dict[str, torch.Tensor]) -> torch.Tensor:
    y_hat = model(batch["speech"], batch["pose"], batch["lengths"], batch["pose_lengths"])
    return bce_loss_batch(y_hat, batch["y"])


BATCH_LOSSES: Dict[str, LossFn] = {
    "seg": seg_batch_loss,
    "dprnn": dprnn_batch_loss,
    "gsr": gsr_batch_loss,
}


@torch.no_grad()
def evaluate_loss(kind: str, model: torch.nn.Module, dataset, batch_size: int = 4) -> float:
    """Средний по примерам лосс в режиме eval, батчи в фиксированном порядке"""
    if kind not in BATCH_LOSSES:
        raise InvalidArgumentError(f"неизвестный тип сети: {kind}")
    was_training = model.training
    model.eval()
    total, count = 0.0, 0
    for batch in make_loader(dataset, batch_size):
        n = int(batch["lengths"].shape[0])
        total += float(BATCH_LOSSES[kind](model, batch)) * n
        count += n
    model.train(was_training)
    return total / count


def _check_finite(loss: torch.Tensor, kind: str, epoch: int, step: int) -> None:
    if not torch.isfinite(loss):
        raise TrainingDivergedError(
            f"лосс {kind} не конечен ({float(loss)}) на эпохе {epoch}, шаг {step}"
        )


def _fit(
    kind: str,
    model: torch.nn.Module,
    train_set,
    val_set,
    settings: Settings,
    out_dir: Path,
    seed: int,
    pose_stats: Optional[Tuple[np.ndarray, np.ndarray]],
    schedule: ScheduleState,
    optimizer_state: Optional[dict] = None,
    max_epochs: Optional[int] = None,
    max_steps: Optional[int] = None,
) -> TrainResult:
    cfg = settings.training
    config = getattr(settings, kind)
    loss_fn = BATCH_LOSSES[kind]
    out_dir.mkdir(parents=True, exist_ok=True)
    dump_settings(settings, out_dir / RESOLVED_CONFIG)
    best_path = out_dir / BEST_CHECKPOINT
    last_path = out_dir / LAST_CHECKPOINT

    optimizer = torch.optim.Adam(model.parameters(), lr=schedule.lr)
    if optimizer_state is not None:
        optimizer.load_state_dict(optimizer_state)
    for group in optimizer.param_groups:
        group["lr"] = schedule.lr

    limit = max_epochs if max_epochs is not None else cfg.max_epochs
    history: List[EpochLog] = []
    stopped_early = False
    step = 0
    logger.info(
        f"Обучение {kind}: {len(train_set)} примеров, валидация {len(val_set)}, "
        f"lr={schedule.lr:g}, эпоха {schedule.epoch}, политика {schedule.policy}"
    )

    while schedule.epoch < limit:
        epoch = schedule.epoch + 1
        model.train()
        running, seen = 0.0, 0
        loader = make_loader(train_set, cfg.batch_size, seed=seed + epoch, num_workers=cfg.num_workers)
        for batch in tqdm(loader, desc=f"{kind} эпоха {epoch}", leave=False, disable=None):
            loss = loss_fn(model, batch)
            _check_finite(loss, kind, epoch, step)
            optimizer.zero_grad()
            loss.backward()
            torch.nn.utils.clip_grad_norm_(model.parameters(), cfg.grad_clip)
            optimizer.step()
            n = int(batch["lengths"].shape[0])
            running += float(loss) * n
            seen += n
            step += 1
            if max_steps is not None and step >= max_steps:
                break

        val_loss = evaluate_loss(kind, model, val_set, cfg.batch_size)
        schedule, action = step_schedule(schedule, val_loss)
        for group in optimizer.param_groups:
            group["lr"] = schedule.lr

        if schedule.epochs_since_improvement == 0:
            save_checkpoint(best_path, kind, config, model, optimizer, pose_stats, schedule)
        save_checkpoint(last_path, kind, config, model, optimizer, pose_stats, schedule)

        record = EpochLog(
            epoch=schedule.epoch,
            train_loss=running / max(seen, 1),
            val_loss=val_loss,
            lr=schedule.lr,
            action=action,
        )
        history.append(record)
        logger.info(
            f"{kind} эпоха {record.epoch}: train {record.train_loss:.4f}, val {record.val_loss:.4f}, "
            f"lr {record.lr:.3g}, {action}"
        )
        if action == "stop":
            stopped_early = True
            logger.info(f"Ранняя остановка {kind}: {schedule.epochs_since_improvement} эпох без улучшения")
            break
        if max_steps is not None and step >= max_steps:
            break

    if not history:
        raise InvalidArgumentError(f"эпоха {schedule.epoch} уже достигла предела {limit}, обучать нечего")
    if not best_path.exists():
        # при продолжении в новый каталог без улучшений лучшая модель осталась в исходном запуске
        logger.warning(f"Улучшений {kind} не было, лучшим считается последний чекпоинт")
        best_path = last_path
    logger.success(f"Обучение {kind} завершено, лучший валидационный лосс {schedule.best_val_loss:.4f}")
    return TrainResult(
        kind=kind,
        best_checkpoint=str(best_path),
        last_checkpoint=str(last_path),
        best_val_loss=schedule.best_val_loss,
        history=history,
        stopped_early=stopped_early,
    )


def _resume(kind: str, resume_from: Optional[str | Path], config) -> Optional[Checkpoint]:
    if resume_from is None:
        return None
    checkpoint = load_checkpoint(resume_from, kind, expected_config=config)
    if checkpoint.schedule is None:
        raise CheckpointError(f"в чекпоинте нет состояния расписания: {resume_from}")
    logger.info(f"Продолжение {kind} с эпохи {checkpoint.schedule.epoch}: {resume_from}")
    return checkpoint


def _split_validation(items: Sequence, fraction: float, seed: int) -> Tuple[list, list]:
    """Отделить валидацию; для очень малых наборов валидация = обучение"""
    n_val = int(round(fraction * len(items)))
    if n_val < 1 or n_val >= len(items):
        return list(items), list(items)
    order = np.random.default_rng(seed).permutation(len(items))
    val = [items[i] for i in sorted(order[:n_val])]
    train = [items[i] for i in sorted(order[n_val:])]
    return train, val


def _check_speakers(examples: Sequence[Tuple[MixtureExample, PoseSequence]], n_speakers: int) -> None:
    for example, _ in examples:
        if example.num_interferers + 1 != n_speakers:
            raise InvalidArgumentError(
                f"смесь с {example.num_interferers + 1} дикторами, сеть обучается на {n_speakers}"
            )


def train_seg(
    train_examples: Sequence[Tuple[MixtureExample, PoseSequence]],
    settings: Settings,
    out_dir: str | Path,
    seed: int,
    val_examples: Optional[Sequence[Tuple[MixtureExample, PoseSequence]]] = None,
    resume_from: Optional[str | Path] = None,
    max_epochs: Optional[int] = None,
    max_steps: Optional[int] = None,
) -> TrainResult:
    """Минимизация -SI-SDR(SEG(x, v), s), lr 5e-4 с halve-on-plateau"""
    if not train_examples:
        raise InvalidArgumentError("обучающий набор SEG пуст")
    if val_examples is None:
        train_examples, val_examples = _split_validation(
            list(train_examples), settings.training.validation_fraction, seed
        )
    seed_everything(seed, settings.training.single_thread)
    model = build_model("seg", settings.seg)
    checkpoint = _resume("seg", resume_from, settings.seg)
    if checkpoint is not None:
        model.load_state_dict(checkpoint.model.state_dict())
        pose_stats = checkpoint.pose_stats
        schedule = checkpoint.schedule
    else:
        pose_stats = compute_pose_stats(pose for _, pose in train_examples)
        schedule = initial_schedule("seg", settings.training)
    return _fit(
        "seg", model,
        MixtureDataset(train_examples, pose_stats),
        MixtureDataset(val_examples, pose_stats),
        settings, Path(out_dir), seed, pose_stats, schedule,
        optimizer_state=checkpoint.optimizer_state if checkpoint else None,
        max_epochs=max_epochs, max_steps=max_steps,
    )


def train_dprnn(
    train_examples: Sequence[Tuple[MixtureExample, PoseSequence]],
    settings: Settings,
    out_dir: str | Path,
    seed: int,
    val_examples: Optional[Sequence[Tuple[MixtureExample, PoseSequence]]] = None,
    resume_from: Optional[str | Path] = None,
    max_epochs: Optional[int] = None,
    max_steps: Optional[int] = None,
) -> TrainResult:
    """PIT по всем выходам сепаратора, lr 1e-3 с halve-on-plateau"""
    if not train_examples:
        raise InvalidArgumentError("обучающий набор DPRNN пуст")
    _check_speakers(train_examples, settings.dprnn.num_speakers)
    if val_examples is None:
        train_examples, val_examples = _split_validation(
            list(train_examples), settings.training.validation_fraction, seed
        )
    _check_speakers(val_examples, settings.dprnn.num_speakers)
    seed_everything(seed, settings.training.single_thread)
    model = build_model("dprnn", settings.dprnn)
    checkpoint = _resume("dprnn", resume_from, settings.dprnn)
    if checkpoint is not None:
        model.load_state_dict(checkpoint.model.state_dict())
        schedule = checkpoint.schedule
    else:
        schedule = initial_schedule("dprnn", settings.training)
    return _fit(
        "dprnn", model,
        MixtureDataset(train_examples),
        MixtureDataset(val_examples),
        settings, Path(out_dir), seed, None, schedule,
        optimizer_state=checkpoint.optimizer_state if checkpoint else None,
        max_epochs=max_epochs, max_steps=max_steps,
    )


def train_gsr(
    train_pairs: Sequence[GsrPair],
    settings: Settings,
    out_dir: str | Path,
    seed: int,
    val_pairs: Optional[Sequence[GsrPair]] = None,
    resume_from: Optional[str | Path] = None,
    init_from: Optional[Checkpoint] = None,
    max_epochs: Optional[int] = None,
    max_steps: Optional[int] = None,
) -> TrainResult:
    """
    BCE на сбалансированных парах, lr 1e-4 с затуханием 10% за эпоху

    init_from задаёт стартовые веса и статистики поз (дообучение);
    resume_from продолжает прерванный запуск вместе с расписанием.
    """
    if not train_pairs:
        raise InvalidArgumentError("обучающий набор GSR пуст")
    if val_pairs is None:
        train_pairs, val_pairs = _split_validation(
            list(train_pairs), settings.training.validation_fraction, seed
        )
    seed_everything(seed, settings.training.single_thread)
    model = build_model("gsr", settings.gsr)
    checkpoint = _resume("gsr", resume_from, settings.gsr)
    if checkpoint is not None:
        model.load_state_dict(checkpoint.model.state_dict())
        pose_stats = checkpoint.pose_stats
        schedule = checkpoint.schedule
    else:
        if init_from is not None:
            model.load_state_dict(init_from.model.state_dict())
            pose_stats = init_from.pose_stats
        else:
            pose_stats = compute_pose_stats(pair.pose for pair in train_pairs if pair.y == 1)
        schedule = initial_schedule("gsr", settings.training)
    return _fit(
        "gsr", model,
        PairDataset(train_pairs, pose_stats),
        PairDataset(val_pairs, pose_stats),
        settings, Path(out_dir), seed, pose_stats, schedule,
        optimizer_state=checkpoint.optimizer_state if checkpoint else None,
        max_epochs=max_epochs, max_steps=max_steps,
    )


def separated_pairs(
    dprnn: Checkpoint,
    examples: Sequence[Tuple[MixtureExample, PoseSequence]],
) -> List[GsrPair]:
    """
    Пары на выходах сепаратора: поток, ближайший к цели по SI-SDR, получает 1,
    остальные потоки 0
    """
    pairs = []
    for i, (example, pose) in enumerate(tqdm(examples, desc="separate", disable=None)):
        streams = dprnn_forward(dprnn.model, example.mixture, example.num_interferers + 1)
        scores = [si_sdr(stream, example.target) for stream in streams]
        best = int(np.argmax(scores))
        for k, stream in enumerate(streams):
            pairs.append(GsrPair(
                pose=pose,
                speech=stream,
                y=int(k == best),
                pose_id=f"mix{i:06d}",
                speech_id=f"mix{i:06d}/stream{k}",
            ))
    return pairs


def fine_tune_gsr_on_separated(
    gsr: Checkpoint,
    dprnn: Checkpoint,
    examples: Sequence[Tuple[MixtureExample, PoseSequence]],
    settings: Settings,
    out_dir: str | Path,
    seed: int,
    max_epochs: Optional[int] = None,
) -> TrainResult:
    """Дообучение GSR на разделённой (а не чистой) речи"""
    if not examples:
        raise InvalidArgumentError("набор смесей для дообучения пуст")
    pairs = separated_pairs(dprnn, examples)
    logger.info(f"Дообучение GSR на {len(pairs)} парах из разделённой речи")
    return train_gsr(pairs, settings, out_dir, seed, init_from=gsr, max_epochs=max_epochs)
