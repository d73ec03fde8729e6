from functools import lru_cache
from pathlib import Path
from typing import Iterator, Optional
from contextlib import contextmanager
from sqlalchemy import create_engine
from sqlalchemy.engine import Engine, make_url
from sqlalchemy.orm import declarative_base, sessionmaker, Session
from app.config import get_settings

# Базовый класс для моделей
Base = declarative_base()


@lru_cache()
def get_engine(database_url: Optional[str] = None) -> Engine:
    """Engine для базы оценок (по умолчанию SQLite из настроек)"""
    url = make_url(database_url or get_settings().database_url)
    if url.get_backend_name() == "sqlite" and url.database and url.database != ":memory:":
        Path(url.database).parent.mkdir(parents=True, exist_ok=True)
    return create_engine(url, pool_pre_ping=True)


@contextmanager
def get_db(database_url: Optional[str] = None) -> Iterator[Session]:
    """Сессия БД; закрывается при выходе из блока"""
    SessionLocal = sessionmaker(autocommit=False, autoflush=False, bind=get_engine(database_url))
    db = SessionLocal()
    try:
        yield db
    finally:
        db.close()


def init_db(database_url: Optional[str] = None) -> None:
    """Инициализация базы данных - создание всех таблиц"""
    import app.models  # noqa: F401  регистрирует таблицы в Base.metadata
    Base.metadata.create_all(bind=get_engine(database_url))
