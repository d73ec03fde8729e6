"""
Функции потерь: SI-SDR, утт-уровневый PIT и бинарная кросс-энтропия.

Скалярные версии принимают Waveform и считают во float64; батчевые
версии работают с тензорами и используются в обучении.
"""
from itertools import permutations
from typing import List, Optional, Sequence, Tuple
import math
import numpy as np
import torch

from app.errors import InvalidArgumentError, UnsupportedSizeError, DegenerateSignalError
from app.schemas import Waveform, PairLabel, PermutationAssignment

SI_SDR_CLAMP_DB = 80.0
PROB_EPS = 1e-7
MAX_PIT_SPEAKERS = 4


def _valid_mask(lengths: torch.Tensor, total: int, ndim: int) -> torch.Tensor:
    mask = torch.arange(total, device=lengths.device) < lengths.unsqueeze(-1)
    while mask.dim() < ndim:
        mask = mask.unsqueeze(-2)
    return mask


def si_sdr_batch(
    estimate: torch.Tensor,
    reference: torch.Tensor,
    lengths: Optional[torch.Tensor] = None,
    clamp_db: Optional[float] = SI_SDR_CLAMP_DB,
) -> torch.Tensor:
    """
    SI-SDR (дБ) по последней оси с вычитанием среднего

    lengths: валидные длины по первой оси батча; хвост за ними
    (паддинг) в расчёт не входит. Знаменатель ограничен снизу
    eps * ||alpha s||^2, поэтому результат лежит в [-clamp_db, clamp_db].
    """
    if estimate.shape != reference.shape:
        raise InvalidArgumentError(
            f"формы оценки и референса различаются: {tuple(estimate.shape)} vs {tuple(reference.shape)}"
        )
    total = estimate.shape[-1]
    if lengths is None:
        mask = torch.ones_like(estimate, dtype=torch.bool)
    else:
        mask = _valid_mask(lengths, total, estimate.dim()).expand_as(estimate)
    mask = mask.to(estimate.dtype)
    count = mask.sum(dim=-1, keepdim=True).clamp_min(1.0)

    est = estimate * mask
    ref = reference * mask
    est = (est - est.sum(dim=-1, keepdim=True) / count) * mask
    ref = (ref - ref.sum(dim=-1, keepdim=True) / count) * mask

    tiny = torch.finfo(estimate.dtype).tiny
    dot = (est * ref).sum(dim=-1, keepdim=True)
    ref_energy = (ref * ref).sum(dim=-1, keepdim=True).clamp_min(tiny)
    projection = dot / ref_energy * ref
    noise = est - projection

    num = (projection * projection).sum(dim=-1)
    den = (noise * noise).sum(dim=-1)
    if clamp_db is None:
        return 10.0 * torch.log10(num / den.clamp_min(tiny))
    eps = 10.0 ** (-clamp_db / 10.0)
    den = torch.maximum(den, eps * num).clamp_min(tiny)
    ratio = (num / den).clamp_min(eps)
    return 10.0 * torch.log10(ratio)


def neg_si_sdr_batch(
    estimate: torch.Tensor,
    reference: torch.Tensor,
    lengths: Optional[torch.Tensor] = None,
) -> torch.Tensor:
    """Средний по батчу отрицательный SI-SDR"""
    return -si_sdr_batch(estimate, reference, lengths).mean()


def _check_pair(estimate: Waveform, reference: Waveform) -> Tuple[torch.Tensor, torch.Tensor]:
    if estimate.num_samples != reference.num_samples:
        raise InvalidArgumentError(
            f"длины различаются: {estimate.num_samples} vs {reference.num_samples}"
        )
    if reference.num_samples < 2:
        raise InvalidArgumentError("для SI-SDR нужна длина >= 2")
    ref = reference.samples - reference.samples.mean()
    if not np.any(ref != 0.0):
        raise DegenerateSignalError("референс имеет нулевую энергию после вычитания среднего")
    return (
        torch.as_tensor(np.array(estimate.samples), dtype=torch.float64),
        torch.as_tensor(np.array(reference.samples), dtype=torch.float64),
    )


def si_sdr(estimate: Waveform, reference: Waveform, clamp_db: Optional[float] = SI_SDR_CLAMP_DB) -> float:
    """SI-SDR оценки относительно референса, дБ"""
    est, ref = _check_pair(estimate, reference)
    return float(si_sdr_batch(est, ref, clamp_db=clamp_db))


def neg_si_sdr_loss(estimate: Waveform, reference: Waveform) -> float:
    """Отрицательный SI-SDR"""
    return -si_sdr(estimate, reference)


def _check_pit_sizes(n_est: int, n_ref: int) -> None:
    if n_est != n_ref:
        raise InvalidArgumentError(f"число оценок ({n_est}) и референсов ({n_ref}) различается")
    if n_est < 1:
        raise InvalidArgumentError("пустой список для PIT")
    if n_est > MAX_PIT_SPEAKERS:
        raise UnsupportedSizeError(
            f"PIT перебором поддерживает до {MAX_PIT_SPEAKERS} источников, получено {n_est}"
        )


def pit_loss(
    estimates: Sequence[Waveform],
    references: Sequence[Waveform],
) -> Tuple[float, PermutationAssignment]:
    """
    Утт-уровневый PIT: минимум среднего -SI-SDR по всем n! назначениям

    При равенстве выбирается лексикографически наименьшая перестановка.
    """
    n = len(estimates)
    _check_pit_sizes(n, len(references))
    lengths = {w.num_samples for w in [*estimates, *references]}
    if len(lengths) != 1:
        raise InvalidArgumentError(f"длины сигналов различаются: {sorted(lengths)}")

    pair_loss = [[neg_si_sdr_loss(est, ref) for ref in references] for est in estimates]

    best_loss = math.inf
    best_perm: Tuple[int, ...] = tuple(range(n))
    for perm in permutations(range(n)):
        value = math.fsum(pair_loss[j][perm[j]] for j in range(n)) / n
        if value < best_loss:
            best_loss = value
            best_perm = perm

    assignment = PermutationAssignment(
        mapping=best_perm,
        per_pair_scores=[-pair_loss[j][best_perm[j]] for j in range(n)],
    )
    return best_loss, assignment


def pit_loss_batch(
    estimates: torch.Tensor,
    references: torch.Tensor,
    lengths: Optional[torch.Tensor] = None,
) -> Tuple[torch.Tensor, torch.Tensor]:
    """
    Батчевый PIT для обучения

    estimates, references: [B, n, L]. Возвращает средний по батчу лосс
    и выбранные перестановки [B, n] (оценка j -> референс perm[j]).
    """
    n = estimates.shape[1]
    _check_pit_sizes(n, references.shape[1])
    # pair[b, j, k] = -SI-SDR(estimate_j, reference_k)
    pair = -si_sdr_batch(
        estimates.unsqueeze(2).expand(-1, -1, n, -1),
        references.unsqueeze(1).expand(-1, n, -1, -1),
        lengths,
    )
    perms = torch.tensor(list(permutations(range(n))), device=estimates.device)
    per_perm = pair[:, torch.arange(n, device=estimates.device), perms].mean(dim=-1)
    best = torch.argmin(per_perm, dim=1)
    loss = per_perm.gather(1, best.unsqueeze(1)).squeeze(1).mean()
    return loss, perms[best]


def bce_loss(label: PairLabel) -> float:
    """Бинарная кросс-энтропия -y*log(y_hat) - (1-y)*log(1-y_hat)"""
    y_hat = min(max(label.y_hat, PROB_EPS), 1.0 - PROB_EPS)
    return float(-label.y * math.log(y_hat) - (1 - label.y) * math.log(1.0 - y_hat))


def bce_loss_batch(y_hat: torch.Tensor, y: torch.Tensor) -> torch.Tensor:
    """Средняя BCE по батчу с ограничением вероятностей в [1e-7, 1 - 1e-7]"""
    y_hat = y_hat.clamp(PROB_EPS, 1.0 - PROB_EPS)
    y = y.to(y_hat.dtype)
    return (-y * torch.log(y_hat) - (1.0 - y) * torch.log(1.0 - y_hat)).mean()


def pit_permute(streams: List[Waveform], assignment: PermutationAssignment) -> List[Waveform]:
    """Переставить оценки в порядок референсов согласно назначению"""
    ordered: List[Optional[Waveform]] = [None] * len(streams)
    for j, k in enumerate(assignment.mapping):
        ordered[k] = streams[j]
    return ordered  # type: ignore[return-value]
