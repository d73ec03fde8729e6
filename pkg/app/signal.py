"""
Сигнальное ядро: представление волны, смешивание по SNR, усечение, I/O WAV.
"""
from pathlib import Path
from typing import List, Sequence
import numpy as np
import soundfile as sf
from loguru import logger

from app.errors import InvalidArgumentError, DegenerateSignalError, DataIntegrityError
from app.schemas import Waveform, MixtureExample

CORPUS_SAMPLE_RATE = 16000


def power(wave: Waveform) -> float:
    """Средний квадрат амплитуды по всему сигналу"""
    return float(np.mean(np.square(wave.samples)))


def truncate_to_shortest(waveforms: Sequence[Waveform]) -> List[Waveform]:
    """
    Усечь все сигналы до длины самого короткого

    Сохраняется начало каждого сигнала, чтобы аудио и жесты
    оставались выровнены в t = 0.
    """
    if not waveforms:
        raise InvalidArgumentError("список сигналов пуст")
    rates = {w.sample_rate for w in waveforms}
    if len(rates) != 1:
        raise InvalidArgumentError(f"разные частоты дискретизации: {sorted(rates)}")
    length = min(w.num_samples for w in waveforms)
    return [
        w if w.num_samples == length else Waveform(samples=w.samples[:length], sample_rate=w.sample_rate)
        for w in waveforms
    ]


def snr_gain(reference: Waveform, signal: Waveform, snr_db: float) -> float:
    """
    Коэффициент g, при котором 10*log10(P(reference) / P(g*signal)) = snr_db
    """
    p_ref = power(reference)
    p_sig = power(signal)
    if p_ref <= 0.0 or p_sig <= 0.0:
        raise DegenerateSignalError("сигнал с нулевой мощностью нельзя смешать по SNR")
    return float(np.sqrt(p_ref / (p_sig * 10.0 ** (snr_db / 10.0))))


def simulate_mixture(
    target: Waveform,
    interferers: Sequence[Waveform],
    snrs_db: Sequence[float],
    seed: int,
) -> MixtureExample:
    """
    Смешать цель с помехами: x = s + sum(g_i * b_i)

    Помехи сохраняются после масштабирования, поэтому смесь
    собирается из составляющих с единичными коэффициентами.
    """
    if len(interferers) < 1:
        raise InvalidArgumentError("нужна хотя бы одна помеха")
    if len(interferers) != len(snrs_db):
        raise InvalidArgumentError("число помех и значений SNR не совпадает")

    target, *rest = truncate_to_shortest([target, *interferers])
    scaled = []
    for interferer, snr in zip(rest, snrs_db):
        gain = snr_gain(target, interferer, float(snr))
        scaled.append(Waveform(samples=gain * interferer.samples, sample_rate=target.sample_rate))

    mixture = target.samples.copy()
    for interferer in scaled:
        mixture = mixture + interferer.samples

    return MixtureExample(
        target=target,
        interferers=scaled,
        snrs_db=[float(s) for s in snrs_db],
        mixture=Waveform(samples=mixture, sample_rate=target.sample_rate),
        num_interferers=len(scaled),
        seed=int(seed),
    )


def target_interference_snr(example: MixtureExample) -> float:
    """
    SNR цель/помеха для разбивки отчёта

    Для двух дикторов это разыгранный SNR, иначе отношение энергии цели
    к энергии суммы отмасштабированных помех.
    """
    if example.num_interferers == 1:
        return float(example.snrs_db[0])
    interference = sum(b.samples for b in example.interferers)
    p_int = float(np.mean(np.square(interference)))
    if p_int <= 0.0:
        raise DegenerateSignalError("суммарная помеха имеет нулевую энергию")
    return float(10.0 * np.log10(power(example.target) / p_int))


def load_wav(path: str | Path, expected_rate: int = CORPUS_SAMPLE_RATE) -> Waveform:
    """Прочитать моно WAV (16-bit int или 32-bit float) как float64"""
    path = Path(path)
    if not path.is_file():
        raise DataIntegrityError("аудиофайл не найден", str(path))
    try:
        samples, rate = sf.read(str(path), dtype="float64", always_2d=False)
    except Exception as e:
        logger.error(f"Не удалось прочитать {path}: {e}")
        raise DataIntegrityError("аудиофайл повреждён", str(path)) from e
    if samples.ndim != 1:
        raise DataIntegrityError("ожидается моно аудио", str(path))
    if rate != expected_rate:
        raise DataIntegrityError(f"частота {rate} Гц вместо {expected_rate} Гц", str(path))
    try:
        return Waveform(samples=samples, sample_rate=rate)
    except ValueError as e:
        raise DataIntegrityError(f"некорректный сигнал ({e})", str(path)) from e


def save_wav(wave: Waveform, path: str | Path, subtype: str = "FLOAT") -> Path:
    """Записать сигнал в WAV (по умолчанию 32-bit float)"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    sf.write(str(path), wave.samples, wave.sample_rate, subtype=subtype)
    return path
