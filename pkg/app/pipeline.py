"""
Инференс и оценка: каскад DPRNN-GSR, SEG, базовые линии DPRNN
и режимы проверки GSR.
"""
from pathlib import Path
from typing import Callable, List, Literal, Optional, Sequence, Tuple, Union
import numpy as np
from loguru import logger
from tqdm import tqdm

from app.config import Settings
from app.errors import InvalidArgumentError, DataIntegrityError
from app.schemas import (
    Waveform, PoseSequence, MixtureExample, MixtureManifestEntry,
    CascadeResult, EvaluationReport, GsrEvaluation, UtteranceScore,
)
from app.gesture import prepare_pose
from app.objectives import si_sdr
from app.metrics import score_extraction, breakdown_report, load_external_scorer, ExternalScorer
from app.checkpoint import Checkpoint, load_checkpoint
from app.corpus import PoolItem, align_pair, gsr_pairs, materialize
from app.synth import envelope_velocity_correlation
from app.networks import seg_forward, dprnn_forward, gsr_forward

System = Literal["seg", "cascade", "dprnn-random", "dprnn-pit"]
SYSTEMS: Tuple[str, ...] = ("seg", "cascade", "dprnn-random", "dprnn-pit")
GsrMode = Literal["verify", "select-2", "select-3"]

# (смесь, число дикторов) -> разделённые потоки
Separator = Callable[[Waveform, int], List[Waveform]]
# (речь, сырые позы) -> оценка соответствия, чем больше, тем лучше
Scorer = Callable[[Waveform, PoseSequence], float]
CheckpointRef = Union[str, Path, Checkpoint]


def _checkpoint(ref: CheckpointRef, kind: str, expected_config=None) -> Checkpoint:
    if isinstance(ref, Checkpoint):
        return ref
    return load_checkpoint(ref, kind, expected_config)


def dprnn_separator(checkpoint: CheckpointRef, expected_config=None) -> Separator:
    model = _checkpoint(checkpoint, "dprnn", expected_config).model
    return lambda x, n_speakers: dprnn_forward(model, x, n_speakers)


def gsr_scorer(checkpoint: CheckpointRef, expected_config=None) -> Scorer:
    """Оценщик GSR: позы нормализуются статистиками из чекпоинта"""
    loaded = _checkpoint(checkpoint, "gsr", expected_config)
    mean, std = loaded.pose_stats

    def score(speech: Waveform, pose: PoseSequence) -> float:
        pose, speech = align_pair(pose, speech)
        return gsr_forward(loaded.model, speech, prepare_pose(pose, mean, std)).probability

    return score


def envelope_scorer(speech: Waveform, pose: PoseSequence) -> float:
    """Эвристика без обучения: корреляция огибающей речи и скорости запястий"""
    pose, speech = align_pair(pose, speech)
    return envelope_velocity_correlation(speech, pose)


def oracle_scorer(target: Waveform) -> Scorer:
    """Оракул: SI-SDR потока относительно известной цели"""
    return lambda speech, pose: si_sdr(speech, target)


def select_stream(scores: Sequence[float]) -> int:
    """argmax оценок; при равенстве берётся наименьший индекс"""
    if not scores:
        raise InvalidArgumentError("нет оценок для выбора потока")
    if not all(np.isfinite(scores)):
        raise InvalidArgumentError(f"оценки потоков не конечны: {list(scores)}")
    return int(np.argmax(np.asarray(scores, dtype=np.float64)))


def cascade_extract(
    x: Waveform,
    v: PoseSequence,
    separator: Separator,
    scorer: Scorer,
    n_speakers: int,
) -> CascadeResult:
    """Разделить смесь, оценить каждый поток по жестам, оставить лучший"""
    separated = separator(x, n_speakers)
    if len(separated) != n_speakers:
        raise InvalidArgumentError(f"сепаратор вернул {len(separated)} потоков вместо {n_speakers}")
    scores = [float(scorer(stream, v)) for stream in separated]
    index = select_stream(scores)
    return CascadeResult(
        selected_index=index,
        scores=scores,
        separated=separated,
        extracted=separated[index],
    )


def cascade_extract_from_checkpoints(
    x: Waveform,
    v: PoseSequence,
    dprnn_ckpt: CheckpointRef,
    gsr_ckpt: CheckpointRef,
    n_speakers: int,
    dprnn_config=None,
    gsr_config=None,
) -> CascadeResult:
    """Каскад по путям чекпоинтов; конфигурации сверяются с сохранёнными"""
    separator = dprnn_separator(dprnn_ckpt, dprnn_config)
    return cascade_extract(x, v, separator, gsr_scorer(gsr_ckpt, gsr_config), n_speakers)


def seg_extract(x: Waveform, v: PoseSequence, seg_ckpt: CheckpointRef, expected_config=None) -> Waveform:
    """Извлечение SEG; позы нормализуются статистиками из чекпоинта"""
    checkpoint = _checkpoint(seg_ckpt, "seg", expected_config)
    mean, std = checkpoint.pose_stats
    return seg_forward(checkpoint.model, x, prepare_pose(v, mean, std))


# Оценка
def evaluate_examples(
    items: Sequence[Tuple[str, MixtureExample, PoseSequence]],
    system: System,
    seed: int,
    bins: Tuple[Sequence[float], Sequence[float], Sequence[float]],
    seg: Optional[CheckpointRef] = None,
    separator: Optional[Separator] = None,
    scorer: Union[Scorer, Literal["oracle"], None] = None,
    pesq: Optional[ExternalScorer] = None,
    stoi: Optional[ExternalScorer] = None,
) -> EvaluationReport:
    """
    Оценить систему на материализованных смесях (mixture_id, смесь, позы)

    dprnn-random выбирает поток равновероятно (rng от seed), dprnn-pit
    берёт лучший по SI-SDR поток, то есть верхнюю границу каскада.
    """
    if system not in SYSTEMS:
        raise InvalidArgumentError(f"неизвестная система: {system}")
    if not items:
        raise InvalidArgumentError("нет смесей для оценки")
    if system == "seg" and seg is None:
        raise InvalidArgumentError("для seg нужен чекпоинт SEG")
    if system != "seg" and separator is None:
        raise InvalidArgumentError(f"для {system} нужен сепаратор")
    if system == "cascade" and scorer is None:
        raise InvalidArgumentError("для cascade нужен оценщик потоков")

    seg_checkpoint = _checkpoint(seg, "seg") if seg is not None else None
    rng = np.random.default_rng(seed)
    scores: List[UtteranceScore] = []
    for mixture_id, example, pose in tqdm(sorted(items, key=lambda it: it[0]), desc=system, disable=None):
        n_speakers = example.num_interferers + 1
        selected: Optional[int] = None
        if system == "seg":
            estimate = seg_extract(example.mixture, pose, seg_checkpoint)
        elif system == "cascade":
            item_scorer = oracle_scorer(example.target) if scorer == "oracle" else scorer
            result = cascade_extract(example.mixture, pose, separator, item_scorer, n_speakers)
            estimate, selected = result.extracted, result.selected_index
        else:
            streams = separator(example.mixture, n_speakers)
            if system == "dprnn-random":
                selected = int(rng.integers(len(streams)))
            else:
                selected = select_stream([si_sdr(s, example.target) for s in streams])
            estimate = streams[selected]
        scores.append(score_extraction(
            mixture_id, system, estimate, example, selected, pesq, stoi,
        ))

    length_bins, snr_bins, histogram_bins = bins
    report = breakdown_report(scores, length_bins, snr_bins, histogram_bins, system=system)
    logger.info(
        f"Оценка {system}: {report.n_utterances} смесей, SI-SDRi {report.si_sdri_db:.2f} дБ, "
        f"SDRi {report.sdri_db:.2f} дБ, точность {report.accuracy_pct:.2f}%"
    )
    return report


def check_test_split(entries: Sequence[MixtureManifestEntry], allow_non_test: bool = False) -> None:
    misused = sorted({e.split for e in entries if e.split != "test"})
    if misused and not allow_non_test:
        raise DataIntegrityError(
            f"оценка разрешена только на test, в манифесте есть {misused} (флаг --allow-non-test)"
        )
    if misused:
        logger.warning(f"Оценка на не тестовых смесях: {misused}")


def evaluate_system(
    entries: Sequence[MixtureManifestEntry],
    system: System,
    settings: Settings,
    seed: int,
    seg_ckpt: Optional[CheckpointRef] = None,
    dprnn_ckpt: Optional[CheckpointRef] = None,
    gsr_ckpt: Optional[CheckpointRef] = None,
    scorer: Literal["gsr", "oracle", "envelope"] = "gsr",
    allow_non_test: bool = False,
) -> EvaluationReport:
    """Оценка системы по тестовому манифесту с загрузкой чекпоинтов"""
    check_test_split(entries, allow_non_test)
    separator = dprnn_separator(dprnn_ckpt, settings.dprnn) if system != "seg" and dprnn_ckpt else None
    stream_scorer: Union[Scorer, str, None] = None
    if system == "cascade":
        if scorer == "gsr":
            if gsr_ckpt is None:
                raise InvalidArgumentError("для cascade с GSR нужен чекпоинт GSR")
            stream_scorer = gsr_scorer(gsr_ckpt, settings.gsr)
        elif scorer == "envelope":
            stream_scorer = envelope_scorer
        else:
            stream_scorer = "oracle"
    seg = _checkpoint(seg_ckpt, "seg", settings.seg) if system == "seg" and seg_ckpt else None

    items = []
    for entry in tqdm(entries, desc="materialize", disable=None):
        example, pose = materialize(entry, settings.sample_rate)
        items.append((entry.mixture_id, example, pose))

    ev = settings.evaluation
    return evaluate_examples(
        items, system, seed,
        bins=(ev.length_bins, ev.snr_bins, ev.histogram_bins),
        seg=seg,
        separator=separator,
        scorer=stream_scorer,
        pesq=load_external_scorer(settings.pesq_scorer),
        stoi=load_external_scorer(settings.stoi_scorer),
    )


def evaluate_gsr(
    scorer: Scorer,
    pool: Sequence[PoolItem],
    mode: GsrMode,
    seed: int,
    threshold: float = 0.5,
) -> GsrEvaluation:
    """
    Проверка GSR на чистой речи

    verify: бинарная точность на сбалансированных парах при пороге 0.5.
    select-2 / select-3: для жестов выбрать свою речь среди 2 или 3
    кандидатов (остальные берутся из других высказываний пула).
    """
    if mode == "verify":
        pairs = list(gsr_pairs(pool, seed))
        correct = sum(
            int((scorer(pair.speech, pair.pose) >= threshold) == bool(pair.y)) for pair in pairs
        )
        trials = len(pairs)
    elif mode in ("select-2", "select-3"):
        k = int(mode[-1])
        if len(pool) < k:
            raise InvalidArgumentError(f"для {mode} нужно хотя бы {k} высказываний")
        rng = np.random.default_rng(seed)
        correct, trials = 0, 0
        for i in range(len(pool)):
            others = [j for j in range(len(pool)) if j != i]
            candidates = [i, *(int(j) for j in rng.choice(others, size=k - 1, replace=False))]
            order = rng.permutation(k)
            candidates = [candidates[o] for o in order]
            scores = [scorer(pool[c].speech, pool[i].pose) for c in candidates]
            correct += int(candidates[select_stream(scores)] == i)
            trials += 1
    else:
        raise InvalidArgumentError(f"неизвестный режим проверки GSR: {mode}")
    result = GsrEvaluation(mode=mode, n_trials=trials, accuracy_pct=100.0 * correct / trials)
    logger.info(f"GSR {mode}: {result.accuracy_pct:.2f}% на {trials} испытаниях")
    return result
