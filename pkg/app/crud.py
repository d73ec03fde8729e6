from sqlalchemy.orm import Session
from typing import Optional, List
import json
from loguru import logger

from app.errors import DataIntegrityError
from app.models import EvaluationRun, UtteranceScoreRow
from app.schemas import EvaluationReport, UtteranceScore
from app.metrics import breakdown_report

SCORE_FIELDS = (
    "mixture_id", "system", "si_sdri", "sdri", "pesqi", "stoii", "correct",
    "utterance_len_s", "target_interference_snr_db", "selected_index",
)


def save_evaluation(
    db: Session,
    report: EvaluationReport,
    seed: int,
    manifest: Optional[str] = None,
) -> EvaluationRun:
    """
    Сохранить запуск оценки и все оценки высказываний
    """
    run = EvaluationRun(
        system=report.system,
        sdr_variant=report.sdr_variant,
        manifest=manifest,
        seed=seed,
        length_bins=json.dumps(report.bins.length_edges),
        snr_bins=json.dumps(report.bins.snr_edges),
        histogram_bins=json.dumps(report.bins.histogram_edges),
        n_utterances=report.n_utterances,
        si_sdri_db=report.si_sdri_db,
        accuracy_pct=report.accuracy_pct,
    )
    run.scores = [
        UtteranceScoreRow(**{field: getattr(score, field) for field in SCORE_FIELDS})
        for score in report.per_utterance
    ]
    db.add(run)
    db.commit()
    db.refresh(run)
    logger.info(f"Сохранён запуск оценки ID: {run.id} ({run.system}, {run.n_utterances} высказываний)")
    return run


def get_run(db: Session, run_id: int) -> Optional[EvaluationRun]:
    return db.query(EvaluationRun).filter(EvaluationRun.id == run_id).first()


def list_runs(db: Session, system: Optional[str] = None) -> List[EvaluationRun]:
    """
    Получить запуски оценки, новые первыми
    """
    query = db.query(EvaluationRun)
    if system:
        query = query.filter(EvaluationRun.system == system)
    return query.order_by(EvaluationRun.id.desc()).all()


def get_run_scores(db: Session, run_id: int) -> List[UtteranceScore]:
    rows = (
        db.query(UtteranceScoreRow)
        .filter(UtteranceScoreRow.run_id == run_id)
        .order_by(UtteranceScoreRow.mixture_id)
        .all()
    )
    return [UtteranceScore(**{field: getattr(row, field) for field in SCORE_FIELDS}) for row in rows]


def regenerate_report(db: Session, run_id: int) -> EvaluationReport:
    """
    Пересобрать отчёт из сохранённых оценок высказываний
    """
    run = get_run(db, run_id)
    if run is None:
        logger.error(f"Запуск оценки ID {run_id} не найден")
        raise DataIntegrityError(f"запуск оценки {run_id} не найден")
    scores = get_run_scores(db, run_id)
    if not scores:
        raise DataIntegrityError(f"у запуска оценки {run_id} нет оценок высказываний")
    return breakdown_report(
        scores,
        json.loads(run.length_bins),
        json.loads(run.snr_bins),
        json.loads(run.histogram_bins),
        system=run.system,
    )
