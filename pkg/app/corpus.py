"""
Корпус: индекс высказываний, манифесты смесей, материализация примеров
и генерация пар для обучения GSR.
"""
from collections import defaultdict
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple
import numpy as np
import soundfile as sf
from pydantic import BaseModel, ConfigDict
from loguru import logger

from app.errors import InvalidArgumentError, DataIntegrityError
from app.schemas import (
    Waveform, PoseSequence, MixtureExample, UtteranceRecord,
    MixtureManifestEntry, ManifestHeader, Split,
)
from app.signal import load_wav, truncate_to_shortest, simulate_mixture
from app.gesture import load_pose, align_pose_to_audio

SPLITS: Tuple[str, ...] = ("train", "validation", "test")
SNR_RANGE_DB = (-10.0, 10.0)


class PoolItem(BaseModel):
    """Чистое высказывание с жестами для генерации пар GSR"""
    id: str
    speech: Waveform
    pose: PoseSequence

    model_config = ConfigDict(frozen=True)


class GsrPair(BaseModel):
    """Пара (жесты, речь) с меткой: 1 если из одного видео, иначе 0"""
    pose: PoseSequence
    speech: Waveform
    y: int
    pose_id: str
    speech_id: str

    model_config = ConfigDict(frozen=True)


# Индекс высказываний
def scan_corpus(directory: str | Path) -> List[UtteranceRecord]:
    """
    Собрать записи из каталога: пары <speaker>/<name>.wav + <speaker>/<name>.npz
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise DataIntegrityError("каталог корпуса не найден", str(directory))
    records = []
    for wav in sorted(directory.rglob("*.wav")):
        pose_path = wav.with_suffix(".npz")
        if not pose_path.is_file():
            raise DataIntegrityError("нет файла поз для аудио", str(wav))
        try:
            info = sf.info(str(wav))
        except Exception as e:
            raise DataIntegrityError("аудиофайл повреждён", str(wav)) from e
        speaker = wav.parent.name
        records.append(UtteranceRecord(
            id=f"{speaker}/{wav.stem}",
            audio_path=str(wav),
            pose_path=str(pose_path),
            speaker_id=speaker,
            duration_s=info.frames / info.samplerate,
        ))
    logger.info(f"Найдено {len(records)} высказываний в {directory}")
    return records


def write_records(records: Sequence[UtteranceRecord], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(r.model_dump_json() + "\n" for r in records), encoding="utf-8")
    return path


def read_records(path: str | Path) -> List[UtteranceRecord]:
    path = Path(path)
    if not path.is_file():
        raise DataIntegrityError("индекс высказываний не найден", str(path))
    return [
        UtteranceRecord.model_validate_json(line)
        for line in path.read_text(encoding="utf-8").splitlines()
        if line.strip()
    ]


def _group_by_speaker(records: Iterable[UtteranceRecord]) -> Dict[str, List[UtteranceRecord]]:
    groups: Dict[str, List[UtteranceRecord]] = defaultdict(list)
    for record in records:
        groups[record.speaker_id].append(record)
    return groups


def split_by_speaker(
    records: Sequence[UtteranceRecord],
    fractions: Tuple[float, float, float] = (0.7, 0.15, 0.15),
    seed: int = 0,
) -> Dict[str, List[UtteranceRecord]]:
    """Разбить записи на train/validation/test с непересекающимися дикторами"""
    speakers = sorted(_group_by_speaker(records))
    if len(speakers) < 3:
        raise InvalidArgumentError("для разбиения нужно хотя бы три диктора")
    order = [speakers[i] for i in np.random.default_rng(seed).permutation(len(speakers))]
    n_val = max(1, int(round(fractions[1] * len(order))))
    n_test = max(1, int(round(fractions[2] * len(order))))
    n_train = len(order) - n_val - n_test
    if n_train < 1:
        raise InvalidArgumentError("после разбиения в train не осталось дикторов")
    assigned = {
        "train": set(order[:n_train]),
        "validation": set(order[n_train:n_train + n_val]),
        "test": set(order[n_train + n_val:]),
    }
    return {
        split: [r for r in records if r.speaker_id in speakers_of]
        for split, speakers_of in assigned.items()
    }


# Манифесты
def simulate_manifest(
    records: Sequence[UtteranceRecord],
    n_mixtures: int,
    n_interferers: int,
    seed: int,
    split: Split,
) -> List[MixtureManifestEntry]:
    """
    Разыграть n_mixtures смесей: цель и помехи от разных дикторов

    SNR каждой помехи равномерен на [-10, 10] дБ. Веса выбора цели
    пропорциональны 1 / длительность, чтобы коротких было больше.
    """
    if n_interferers < 1:
        raise InvalidArgumentError("нужна хотя бы одна помеха")
    by_speaker = _group_by_speaker(records)
    if len(by_speaker) < n_interferers + 1:
        raise InvalidArgumentError(
            f"нужно хотя бы {n_interferers + 1} дикторов, найдено {len(by_speaker)}"
        )
    rng = np.random.default_rng(seed)
    weights = 1.0 / np.array([r.duration_s for r in records])
    weights /= weights.sum()

    entries = []
    for i in range(n_mixtures):
        target = records[int(rng.choice(len(records), p=weights))]
        others = sorted(s for s in by_speaker if s != target.speaker_id)
        chosen = rng.choice(len(others), size=n_interferers, replace=False)
        interferers = []
        for c in chosen:
            pool = by_speaker[others[int(c)]]
            interferers.append(pool[int(rng.integers(len(pool)))])
        snrs = rng.uniform(*SNR_RANGE_DB, size=n_interferers)
        entries.append(MixtureManifestEntry(
            mixture_id=f"{split}-{i:06d}",
            split=split,
            target=target,
            interferers=interferers,
            snrs_db=[float(s) for s in snrs],
            seed=int(rng.integers(0, 2 ** 31 - 1)),
        ))
    logger.info(f"Сгенерировано {len(entries)} смесей ({split}, помех: {n_interferers})")
    return entries


def check_speaker_disjoint(manifests: Dict[str, Sequence[MixtureManifestEntry]]) -> None:
    """Проверить, что множества дикторов разных сплитов не пересекаются"""
    speakers = {
        split: {r.speaker_id for e in entries for r in [e.target, *e.interferers]}
        for split, entries in manifests.items()
    }
    names = sorted(speakers)
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            shared = speakers[a] & speakers[b]
            if shared:
                raise DataIntegrityError(f"дикторы {sorted(shared)} встречаются в {a} и {b}")


def serialize_manifest(header: ManifestHeader, entries: Sequence[MixtureManifestEntry]) -> str:
    lines = [header.model_dump_json()] + [e.model_dump_json() for e in entries]
    return "\n".join(lines) + "\n"


def parse_manifest(text: str) -> Tuple[ManifestHeader, List[MixtureManifestEntry]]:
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines:
        raise DataIntegrityError("манифест пуст")
    try:
        header = ManifestHeader.model_validate_json(lines[0])
        entries = [MixtureManifestEntry.model_validate_json(line) for line in lines[1:]]
    except ValueError as e:
        raise DataIntegrityError(f"манифест повреждён ({e})") from e
    if header.format_version != 1:
        raise DataIntegrityError(f"неизвестная версия манифеста {header.format_version}")
    return header, entries


def write_manifest(path: str | Path, header: ManifestHeader, entries: Sequence[MixtureManifestEntry]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(serialize_manifest(header, entries), encoding="utf-8")
    return path


def read_manifest(path: str | Path) -> Tuple[ManifestHeader, List[MixtureManifestEntry]]:
    path = Path(path)
    if not path.is_file():
        raise DataIntegrityError("манифест не найден", str(path))
    return parse_manifest(path.read_text(encoding="utf-8"))


# Материализация
def load_utterance(record: UtteranceRecord, sample_rate: int = 16000) -> Tuple[Waveform, PoseSequence]:
    """Загрузить аудио и позы высказывания и сверить их длительности"""
    speech = load_wav(record.audio_path, expected_rate=sample_rate)
    pose = load_pose(record.pose_path)
    if abs(speech.duration_s - pose.duration_s) > 1.0 / pose.frame_rate + 1e-9:
        raise DataIntegrityError(
            f"длительность аудио {speech.duration_s:.3f} с и поз {pose.duration_s:.3f} с расходятся",
            record.audio_path,
        )
    return speech, pose


def materialize(entry: MixtureManifestEntry, sample_rate: int = 16000) -> Tuple[MixtureExample, PoseSequence]:
    """Собрать смесь и выровненные позы цели по строке манифеста"""
    target, pose = load_utterance(entry.target, sample_rate)
    pose, target = align_pair(pose, target)
    interferers = [load_wav(r.audio_path, expected_rate=sample_rate) for r in entry.interferers]
    target, *interferers = truncate_to_shortest([target, *interferers])
    pose = align_pose_to_audio(pose, target.num_samples, target.sample_rate)
    example = simulate_mixture(target, interferers, entry.snrs_db, entry.seed)
    return example, pose


def align_pair(pose: PoseSequence, speech: Waveform) -> Tuple[PoseSequence, Waveform]:
    """Усечь речь и позы с начала до общей длительности"""
    n_samples = min(speech.num_samples, pose.num_frames * speech.sample_rate // pose.frame_rate)
    if n_samples < speech.num_samples:
        speech = Waveform(samples=speech.samples[:n_samples], sample_rate=speech.sample_rate)
    return align_pose_to_audio(pose, n_samples, speech.sample_rate), speech


# Пары для GSR
def _make_pair(pose_item: PoolItem, speech_item: PoolItem, y: int) -> GsrPair:
    pose, speech = align_pair(pose_item.pose, speech_item.speech)
    return GsrPair(pose=pose, speech=speech, y=y, pose_id=pose_item.id, speech_id=speech_item.id)


def gsr_pairs(pool: Sequence[PoolItem], seed: int, n_pairs: Optional[int] = None) -> Iterator[GsrPair]:
    """
    Сбалансированный поток пар: (v_k, s_k, 1) и (v_k, s_j, 0), j != k

    Негативы берутся по всему пулу. Без n_pairs выдаётся одна эпоха
    (2 * len(pool) пар), иначе эпохи повторяются до n_pairs пар.
    """
    if len(pool) < 2:
        raise InvalidArgumentError("для пар нужно хотя бы два высказывания")
    if len({item.id for item in pool}) != len(pool):
        raise InvalidArgumentError("идентификаторы высказываний в пуле повторяются")
    rng = np.random.default_rng(seed)
    emitted = 0
    while True:
        for k in rng.permutation(len(pool)):
            j = int(rng.integers(len(pool) - 1))
            if j >= k:
                j += 1
            for pair in (_make_pair(pool[k], pool[k], 1), _make_pair(pool[k], pool[j], 0)):
                yield pair
                emitted += 1
                if n_pairs is not None and emitted >= n_pairs:
                    return
        if n_pairs is None:
            return


def mixture_pairs(example: MixtureExample, pose: PoseSequence, mixture_id: str = "mix") -> List[GsrPair]:
    """Пары внутри одной смеси: жесты цели с целью (1) и с каждой помехой (0)"""
    target = PoolItem(id=f"{mixture_id}/target", speech=example.target, pose=pose)
    pairs = [_make_pair(target, target, 1)]
    for i, interferer in enumerate(example.interferers):
        other = PoolItem(id=f"{mixture_id}/interferer{i}", speech=interferer, pose=pose)
        pairs.append(_make_pair(target, other, 0))
    return pairs


def shuffle_labels(pairs: Sequence[GsrPair], seed: int) -> List[GsrPair]:
    """Случайно переставить метки между парами (негативный контроль)"""
    labels = np.random.default_rng(seed).permutation([p.y for p in pairs])
    return [p.model_copy(update={"y": int(y)}) for p, y in zip(pairs, labels)]


def load_pool(records: Sequence[UtteranceRecord], sample_rate: int = 16000) -> List[PoolItem]:
    """Загрузить чистые высказывания для генерации пар"""
    pool = []
    for record in records:
        speech, pose = load_utterance(record, sample_rate)
        pool.append(PoolItem(id=record.id, speech=speech, pose=pose))
    return pool
