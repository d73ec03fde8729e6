"""
Подкоманды обучения: train-seg, train-dprnn, train-gsr, fine-tune-gsr.
"""
import argparse
from typing import List, Optional, Tuple
from loguru import logger
from tqdm import tqdm

from app.commands.common import add_common_args, resolve_settings, require, out_path
from app.commands.data import load_records
from app.checkpoint import load_checkpoint
from app.corpus import read_manifest, read_records, materialize, load_pool, gsr_pairs, shuffle_labels
from app.errors import DataIntegrityError
from app.schemas import MixtureExample, PoseSequence
from app.training import train_seg, train_dprnn, train_gsr, fine_tune_gsr_on_separated, TrainResult


def load_examples(path: str, sample_rate: int, split: Optional[str] = None) -> List[Tuple[MixtureExample, PoseSequence]]:
    _, entries = read_manifest(path)
    if split is not None:
        wrong = sorted({e.split for e in entries if e.split != split})
        if wrong:
            raise DataIntegrityError(f"ожидался сплит {split}, в манифесте есть {wrong}", path)
    return [materialize(entry, sample_rate) for entry in tqdm(entries, desc="materialize", disable=None)]


def _report(result: TrainResult) -> int:
    print(result.best_checkpoint)
    return 0


def _mixture_trainer(train_fn, kind: str):
    def handler(args: argparse.Namespace) -> int:
        settings = resolve_settings(args)
        train = load_examples(require(args.manifest, "--manifest"), settings.sample_rate, "train")
        val = (
            load_examples(args.validation_manifest, settings.sample_rate, "validation")
            if args.validation_manifest else None
        )
        result = train_fn(
            train, settings, out_path(settings, kind), settings.seed,
            val_examples=val, resume_from=args.resume, max_epochs=args.max_epochs,
        )
        return _report(result)
    return handler


def train_gsr_command(args: argparse.Namespace) -> int:
    settings = resolve_settings(args)
    pool = load_pool(load_records(args), settings.sample_rate)
    pairs = list(gsr_pairs(pool, settings.seed, args.n_pairs))
    if args.shuffle_labels:
        logger.warning("Метки пар перемешаны: негативный контроль")
        pairs = shuffle_labels(pairs, settings.seed)
    val_pairs = None
    if args.validation_records:
        val_pool = load_pool(read_records(args.validation_records), settings.sample_rate)
        val_pairs = list(gsr_pairs(val_pool, settings.seed + 1))
    result = train_gsr(
        pairs, settings, out_path(settings, "gsr"), settings.seed,
        val_pairs=val_pairs, resume_from=args.resume, max_epochs=args.max_epochs,
    )
    return _report(result)


def fine_tune_gsr_command(args: argparse.Namespace) -> int:
    settings = resolve_settings(args)
    gsr = load_checkpoint(require(args.gsr_checkpoint, "--gsr-checkpoint"), "gsr", settings.gsr)
    dprnn = load_checkpoint(require(args.dprnn_checkpoint, "--dprnn-checkpoint"), "dprnn", settings.dprnn)
    examples = load_examples(require(args.manifest, "--manifest"), settings.sample_rate, "train")
    result = fine_tune_gsr_on_separated(
        gsr, dprnn, examples, settings, out_path(settings, "gsr-separated"), settings.seed,
        max_epochs=args.max_epochs,
    )
    return _report(result)


def _training_args(parser: argparse.ArgumentParser, resume: bool = True) -> None:
    add_common_args(parser)
    if resume:
        parser.add_argument("--resume", help="продолжить с чекпоинта (last.pt)")
    parser.add_argument("--max-epochs", type=int, help="перекрыть TRAINING__MAX_EPOCHS")


def register(subparsers) -> None:
    for name, fn, kind in (("train-seg", train_seg, "seg"), ("train-dprnn", train_dprnn, "dprnn")):
        parser = subparsers.add_parser(name, help=f"обучение {kind.upper()}")
        _training_args(parser)
        parser.add_argument("--manifest", required=True, help="манифест train")
        parser.add_argument("--validation-manifest", help="манифест validation")
        parser.set_defaults(handler=_mixture_trainer(fn, kind))

    parser = subparsers.add_parser("train-gsr", help="обучение GSR на чистой речи")
    _training_args(parser)
    parser.add_argument("--records", help="индекс высказываний train (JSONL)")
    parser.add_argument("--corpus", help="каталог корпуса train")
    parser.add_argument("--validation-records", help="индекс высказываний validation")
    parser.add_argument("--n-pairs", type=int, help="число пар (по умолчанию одна эпоха пула)")
    parser.add_argument("--shuffle-labels", action="store_true", help="негативный контроль")
    parser.set_defaults(handler=train_gsr_command)

    parser = subparsers.add_parser("fine-tune-gsr", help="дообучение GSR на выходах DPRNN")
    _training_args(parser, resume=False)
    parser.add_argument("--gsr-checkpoint", required=True)
    parser.add_argument("--dprnn-checkpoint", required=True)
    parser.add_argument("--manifest", required=True, help="манифест train")
    parser.set_defaults(handler=fine_tune_gsr_command)
