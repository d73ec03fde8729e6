import argparse
import sys
from pathlib import Path
from typing import Optional, Sequence
from loguru import logger

from app.commands import register_data, register_train, register_infer, register_evaluate
from app.config import get_settings
from app.errors import SegError

LOG_FILE = "seg.log"


def configure_logging(log_dir: str = "logs", level: str = "INFO") -> None:
    """Настройка логирования через loguru"""
    logger.remove()  # Удаляем стандартный обработчик
    logger.add(
        sys.stderr,
        colorize=True,
        format="<green>{time:YYYY-MM-DD HH:mm:ss}</green> | <level>{level: <8}</level> | <cyan>{name}</cyan>:<cyan>{function}</cyan> - <level>{message}</level>",
        level=level,
    )
    logger.add(
        str(Path(log_dir) / LOG_FILE),
        rotation="10 MB",
        retention="30 days",
        compression="zip",
        format="{time:YYYY-MM-DD HH:mm:ss} | {level: <8} | {name}:{function} - {message}",
        level="DEBUG",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seg",
        description="Извлечение целевого диктора по жестам: SEG и каскад DPRNN-GSR",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    register_data(subparsers)
    register_train(subparsers)
    register_infer(subparsers)
    register_evaluate(subparsers)
    return parser


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Разбор аргументов, запуск подкоманды и перевод ошибок в код выхода"""
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        settings = get_settings(getattr(args, "config", None))
        configure_logging(settings.log_dir, settings.log_level)
    except SegError as e:
        configure_logging()
        logger.error(f"Ошибка конфигурации: {e}")
        return e.exit_code

    logger.info("=" * 50)
    logger.info(f"Команда: {args.command}")
    logger.info("=" * 50)

    try:
        return args.handler(args)
    except SegError as e:
        logger.error("=" * 80)
        logger.error(f"ОШИБКА КОМАНДЫ {args.command} (код {e.exit_code})")
        logger.error(f"Тип: {type(e).__name__}")
        logger.error(f"Сообщение: {e}")
        logger.error(f"Аргументы: {vars(args)}")
        logger.error("=" * 80)
        return e.exit_code
    except Exception:
        logger.exception(f"Непредвиденная ошибка команды {args.command}")
        return 1


if __name__ == "__main__":
    sys.exit(run())
