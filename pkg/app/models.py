from sqlalchemy import Column, Integer, String, DateTime, Boolean, Float, Text, ForeignKey
from sqlalchemy.orm import relationship
from datetime import datetime
from app.database import Base


class EvaluationRun(Base):
    """Запуск оценки одной системы на тестовом манифесте"""
    __tablename__ = "evaluation_runs"

    id = Column(Integer, primary_key=True, index=True)
    system = Column(String, nullable=False, index=True)  # seg, cascade, dprnn-random, dprnn-pit
    sdr_variant = Column(String, nullable=False, default="fixed-scale")
    manifest = Column(String, nullable=True)  # путь к манифесту
    seed = Column(Integer, nullable=False)

    # Границы бинов в JSON
    length_bins = Column(Text, nullable=False)
    snr_bins = Column(Text, nullable=False)
    histogram_bins = Column(Text, nullable=False)

    # Сводка (для list_runs без загрузки строк)
    n_utterances = Column(Integer, nullable=False)
    si_sdri_db = Column(Float, nullable=False)
    accuracy_pct = Column(Float, nullable=False)

    created_at = Column(DateTime, default=datetime.utcnow)

    scores = relationship(
        "UtteranceScoreRow",
        back_populates="run",
        cascade="all, delete-orphan",
        order_by="UtteranceScoreRow.mixture_id",
    )

    def __repr__(self):
        return f"<EvaluationRun(id={self.id}, system={self.system}, n={self.n_utterances})>"


class UtteranceScoreRow(Base):
    """Метрики одного высказывания в запуске оценки"""
    __tablename__ = "utterance_scores"

    id = Column(Integer, primary_key=True, index=True)
    run_id = Column(Integer, ForeignKey("evaluation_runs.id", ondelete="CASCADE"), nullable=False, index=True)
    mixture_id = Column(String, nullable=False)
    system = Column(String, nullable=False)

    si_sdri = Column(Float, nullable=False)
    sdri = Column(Float, nullable=False)
    pesqi = Column(Float, nullable=True)
    stoii = Column(Float, nullable=True)
    correct = Column(Boolean, nullable=False)

    utterance_len_s = Column(Float, nullable=False)
    target_interference_snr_db = Column(Float, nullable=False)
    selected_index = Column(Integer, nullable=True)

    run = relationship("EvaluationRun", back_populates="scores")

    def __repr__(self):
        return f"<UtteranceScoreRow(run={self.run_id}, mixture={self.mixture_id}, si_sdri={self.si_sdri:.2f})>"
