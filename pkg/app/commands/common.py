"""
Общие флаги подкоманд и сборка настроек запуска из --config и флагов CLI.
"""
import argparse
from pathlib import Path
from typing import List, Optional

from app.config import Settings, get_settings
from app.errors import InvalidArgumentError


def parse_bins(text: str) -> List[float]:
    """'2,4,6' -> [2.0, 4.0, 6.0]"""
    try:
        values = [float(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"границы бинов должны быть числами: {text}") from e
    if not values:
        raise argparse.ArgumentTypeError("пустой список границ бинов")
    return values


def add_common_args(parser: argparse.ArgumentParser, bins: bool = False) -> None:
    parser.add_argument("--config", help="файл конфигурации запуска (KEY=value)")
    parser.add_argument("--seed", type=int, help="seed всех случайных решений")
    parser.add_argument("--out-dir", help="каталог результатов")
    if bins:
        parser.add_argument("--bins-length", type=parse_bins, help="границы бинов длины, с: 2,4,6")
        parser.add_argument("--bins-snr", type=parse_bins, help="границы бинов SNR, дБ: -5,0,5")


def resolve_settings(args: argparse.Namespace) -> Settings:
    """Настройки из --config с перекрытием явными флагами CLI"""
    settings = get_settings(getattr(args, "config", None))
    update = {}
    if getattr(args, "seed", None) is not None:
        update["seed"] = args.seed
    if getattr(args, "out_dir", None):
        update["out_dir"] = args.out_dir
    evaluation = {}
    if getattr(args, "bins_length", None):
        evaluation["length_bins"] = args.bins_length
    if getattr(args, "bins_snr", None):
        evaluation["snr_bins"] = args.bins_snr
    if evaluation:
        try:
            update["evaluation"] = type(settings.evaluation).model_validate(
                {**settings.evaluation.model_dump(), **evaluation}
            )
        except ValueError as e:
            raise InvalidArgumentError(f"некорректные бины: {e}") from e
    return settings.model_copy(update=update) if update else settings


def require(value: Optional[str], flag: str) -> str:
    if not value:
        raise InvalidArgumentError(f"не задан обязательный флаг {flag}")
    return value


def out_path(settings: Settings, *parts: str) -> Path:
    path = Path(settings.out_dir, *parts)
    path.mkdir(parents=True, exist_ok=True)
    return path
