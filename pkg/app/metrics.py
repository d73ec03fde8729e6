"""
Метрики оценки: SDR, улучшения относительно смеси, точность извлечения
и разбивки по длине высказывания и SNR цель/помеха.
"""
from importlib import import_module
from typing import Callable, List, Optional, Sequence
import math
import numpy as np
from loguru import logger

from app.errors import InvalidArgumentError, DegenerateSignalError
from app.schemas import (
    Waveform, MixtureExample, UtteranceScore, BinStat, ReportBins, EvaluationReport,
)
from app.objectives import si_sdr, SI_SDR_CLAMP_DB
from app.signal import target_interference_snr

SDR_VARIANT = "fixed-scale"

# (reference, estimate, sample_rate) -> значение метрики
ExternalScorer = Callable[[np.ndarray, np.ndarray, int], float]


def sdr(estimate: Waveform, reference: Waveform, clamp_db: Optional[float] = SI_SDR_CLAMP_DB) -> float:
    """Fixed-scale SDR: 10*log10(||s||^2 / ||s_hat - s||^2) без проекции"""
    if estimate.num_samples != reference.num_samples:
        raise InvalidArgumentError(
            f"длины различаются: {estimate.num_samples} vs {reference.num_samples}"
        )
    num = float(np.sum(np.square(reference.samples)))
    if num <= 0.0:
        raise DegenerateSignalError("референс имеет нулевую энергию")
    den = float(np.sum(np.square(estimate.samples - reference.samples)))
    tiny = np.finfo(np.float64).tiny
    if clamp_db is None:
        return 10.0 * math.log10(num / max(den, tiny))
    eps = 10.0 ** (-clamp_db / 10.0)
    ratio = max(num / max(den, eps * num, tiny), eps)
    return 10.0 * math.log10(ratio)


def improvement(
    metric_fn: Callable[[Waveform, Waveform], float],
    estimate: Waveform,
    reference: Waveform,
    mixture: Waveform,
) -> float:
    """metric_fn(estimate, reference) - metric_fn(mixture, reference)"""
    if not estimate.num_samples == reference.num_samples == mixture.num_samples:
        raise InvalidArgumentError("оценка, референс и смесь должны иметь одну длину")
    return metric_fn(estimate, reference) - metric_fn(mixture, reference)


def extraction_accuracy(scores: Sequence[UtteranceScore]) -> float:
    """Доля высказываний со строго положительным SI-SDRi, %"""
    if not scores:
        raise InvalidArgumentError("список оценок пуст")
    correct = sum(1 for s in scores if s.si_sdri > 0)
    return 100.0 * correct / len(scores)


def load_external_scorer(path: Optional[str]) -> Optional[ExternalScorer]:
    """Импортировать внешний оценщик PESQ/STOI по строке "module:function" """
    if not path:
        return None
    module_name, _, attr = path.partition(":")
    if not module_name or not attr:
        raise InvalidArgumentError(f"оценщик должен иметь вид module:function, получено {path!r}")
    try:
        scorer = getattr(import_module(module_name), attr)
    except (ImportError, AttributeError) as e:
        raise InvalidArgumentError(f"не удалось импортировать оценщик {path}: {e}") from e
    if not callable(scorer):
        raise InvalidArgumentError(f"оценщик {path} не вызываемый")
    return scorer


def _external_improvement(
    scorer: Optional[ExternalScorer],
    estimate: Waveform,
    reference: Waveform,
    mixture: Waveform,
) -> Optional[float]:
    if scorer is None:
        return None
    rate = reference.sample_rate
    return float(scorer(reference.samples, estimate.samples, rate)) - float(
        scorer(reference.samples, mixture.samples, rate)
    )


def score_extraction(
    mixture_id: str,
    system: str,
    estimate: Waveform,
    example: MixtureExample,
    selected_index: Optional[int] = None,
    pesq_scorer: Optional[ExternalScorer] = None,
    stoi_scorer: Optional[ExternalScorer] = None,
) -> UtteranceScore:
    """Метрики одного извлечения относительно цели смеси"""
    reference = example.target
    mixture = example.mixture
    return UtteranceScore(
        mixture_id=mixture_id,
        system=system,
        si_sdri=improvement(si_sdr, estimate, reference, mixture),
        sdri=improvement(sdr, estimate, reference, mixture),
        pesqi=_external_improvement(pesq_scorer, estimate, reference, mixture),
        stoii=_external_improvement(stoi_scorer, estimate, reference, mixture),
        utterance_len_s=reference.duration_s,
        target_interference_snr_db=target_interference_snr(example),
        selected_index=selected_index,
    )


# Бины
def _check_edges(edges: Sequence[float]) -> List[float]:
    edges = [float(e) for e in edges]
    if not edges:
        raise InvalidArgumentError("нужна хотя бы одна граница бина")
    if any(b <= a for a, b in zip(edges, edges[1:])):
        raise InvalidArgumentError(f"границы бинов должны строго возрастать: {edges}")
    return edges


def bin_index(value: float, edges: Sequence[float]) -> int:
    """
    Номер бина: 0 для (-inf, e0), i для [e_{i-1}, e_i), len(edges) для [e_last, inf)
    """
    return int(np.searchsorted(np.asarray(edges, dtype=np.float64), value, side="right"))


def _bin_bounds(edges: List[float]) -> List[tuple]:
    lowers = [None, *edges]
    uppers = [*edges, None]
    return list(zip(lowers, uppers))


def histogram(values: Sequence[float], edges: Sequence[float]) -> List[int]:
    """Число значений в каждом из len(edges) + 1 бинов с открытыми краями"""
    edges = _check_edges(edges)
    counts = [0] * (len(edges) + 1)
    for value in values:
        counts[bin_index(value, edges)] += 1
    return counts


def _binned(scores: Sequence[UtteranceScore], keys: Sequence[float], edges: List[float]) -> List[BinStat]:
    groups: List[List[UtteranceScore]] = [[] for _ in range(len(edges) + 1)]
    for score, key in zip(scores, keys):
        groups[bin_index(key, edges)].append(score)
    stats = []
    for (lower, upper), group in zip(_bin_bounds(edges), groups):
        if group:
            stats.append(BinStat(
                lower=lower,
                upper=upper,
                count=len(group),
                mean_si_sdri=math.fsum(s.si_sdri for s in group) / len(group),
                accuracy_pct=extraction_accuracy(group),
            ))
        else:
            stats.append(BinStat(lower=lower, upper=upper, count=0))
    return stats


def _optional_mean(values: Sequence[Optional[float]]) -> Optional[float]:
    if not values or any(v is None for v in values):
        return None
    return math.fsum(values) / len(values)


def breakdown_report(
    scores: Sequence[UtteranceScore],
    length_bins: Sequence[float],
    snr_bins: Sequence[float],
    histogram_bins: Optional[Sequence[float]] = None,
    system: Optional[str] = None,
) -> EvaluationReport:
    """
    Сводный отчёт: средние метрики, точность, разбивки по длине и SNR,
    гистограмма SI-SDRi. Пустые бины хранят None вместо средних.
    """
    if not scores:
        raise InvalidArgumentError("список оценок пуст")
    length_edges = _check_edges(length_bins)
    snr_edges = _check_edges(snr_bins)
    hist_edges = _check_edges(histogram_bins if histogram_bins is not None else [-20, -10, 0, 10, 20])

    ordered = sorted(scores, key=lambda s: s.mixture_id)
    systems = {s.system for s in ordered}
    if system is None:
        if len(systems) != 1:
            raise InvalidArgumentError(f"оценки разных систем в одном отчёте: {sorted(systems)}")
        system = next(iter(systems))

    counts = histogram([s.si_sdri for s in ordered], hist_edges)
    hist = [
        BinStat(lower=lower, upper=upper, count=count)
        for (lower, upper), count in zip(_bin_bounds(hist_edges), counts)
    ]
    bins = ReportBins(
        length_edges=length_edges,
        snr_edges=snr_edges,
        histogram_edges=hist_edges,
        by_length=_binned(ordered, [s.utterance_len_s for s in ordered], length_edges),
        by_snr=_binned(ordered, [s.target_interference_snr_db for s in ordered], snr_edges),
        histogram=hist,
    )
    report = EvaluationReport(
        system=system,
        sdr_variant=SDR_VARIANT,
        n_utterances=len(ordered),
        si_sdri_db=math.fsum(s.si_sdri for s in ordered) / len(ordered),
        sdri_db=math.fsum(s.sdri for s in ordered) / len(ordered),
        pesqi=_optional_mean([s.pesqi for s in ordered]),
        stoii=_optional_mean([s.stoii for s in ordered]),
        accuracy_pct=extraction_accuracy(ordered),
        bins=bins,
        per_utterance=ordered,
    )
    logger.debug(
        f"Отчёт {system}: {report.n_utterances} высказываний, "
        f"SI-SDRi {report.si_sdri_db:.2f} дБ, точность {report.accuracy_pct:.2f}%"
    )
    return report
