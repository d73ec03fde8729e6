"""
Подкоманды данных: synth-corpus, simulate-manifest, materialize.
"""
import argparse
from pathlib import Path
from loguru import logger
from tqdm import tqdm

from app.commands.common import add_common_args, resolve_settings, require, out_path
from app.corpus import (
    scan_corpus, read_records, write_records, split_by_speaker, simulate_manifest,
    check_speaker_disjoint, write_manifest, read_manifest, materialize,
)
from app.errors import InvalidArgumentError
from app.gesture import save_pose
from app.schemas import ManifestHeader
from app.signal import save_wav
from app.synth import write_synth_corpus

RECORDS_FILE = "records.jsonl"
SPLIT_SEED_OFFSETS = {"train": 0, "validation": 1, "test": 2}


def load_records(args: argparse.Namespace):
    """Записи корпуса из --records (JSONL) или сканированием --corpus"""
    if getattr(args, "records", None):
        return read_records(args.records)
    if getattr(args, "corpus", None):
        return scan_corpus(args.corpus)
    raise InvalidArgumentError("нужен --records или --corpus")


def synth_corpus(args: argparse.Namespace) -> int:
    settings = resolve_settings(args)
    out_dir = out_path(settings)
    records = write_synth_corpus(
        out_dir,
        args.speakers,
        args.utterances,
        settings.seed,
        args.min_duration,
        args.max_duration,
    )
    index = write_records(records, out_dir / RECORDS_FILE)
    logger.success(f"Корпус записан: {len(records)} высказываний, индекс {index}")
    print(index)
    return 0


def simulate(args: argparse.Namespace) -> int:
    settings = resolve_settings(args)
    records = load_records(args)
    splits = split_by_speaker(records, seed=settings.seed)
    counts = {"train": args.n_mixtures, "validation": args.n_validation, "test": args.n_test}
    manifests = {}
    out_dir = out_path(settings)
    for split, count in counts.items():
        if count <= 0:
            continue
        split_seed = settings.seed + SPLIT_SEED_OFFSETS[split]
        entries = simulate_manifest(splits[split], count, args.interferers, split_seed, split)
        header = ManifestHeader(generator_seed=split_seed, split=split, n_interferers=args.interferers)
        path = write_manifest(out_dir / f"{split}.jsonl", header, entries)
        manifests[split] = entries
        # чистые высказывания сплита нужны для train-gsr и evaluate-gsr
        write_records(splits[split], out_dir / f"records_{split}.jsonl")
        logger.info(f"Манифест {split}: {len(entries)} смесей -> {path}")
        print(path)
    check_speaker_disjoint(manifests)
    logger.success("Манифесты сгенерированы, дикторы сплитов не пересекаются")
    return 0


def materialize_manifest(args: argparse.Namespace) -> int:
    settings = resolve_settings(args)
    _, entries = read_manifest(require(args.manifest, "--manifest"))
    out_dir = out_path(settings)
    for entry in tqdm(entries, desc="materialize", disable=None):
        example, pose = materialize(entry, settings.sample_rate)
        folder = Path(out_dir, entry.mixture_id)
        save_wav(example.mixture, folder / "mixture.wav")
        save_wav(example.target, folder / "target.wav")
        for i, interferer in enumerate(example.interferers):
            save_wav(interferer, folder / f"interferer{i}.wav")
        save_pose(pose, folder / "pose.npz")
    logger.success(f"Материализовано {len(entries)} смесей в {out_dir}")
    return 0


def register(subparsers) -> None:
    parser = subparsers.add_parser("synth-corpus", help="синтетический корпус речь + жесты")
    add_common_args(parser)
    parser.add_argument("--speakers", type=int, default=8)
    parser.add_argument("--utterances", type=int, default=20, help="высказываний на диктора")
    parser.add_argument("--min-duration", type=float, default=2.0)
    parser.add_argument("--max-duration", type=float, default=6.0)
    parser.set_defaults(handler=synth_corpus)

    parser = subparsers.add_parser("simulate-manifest", help="манифесты смесей train/validation/test")
    add_common_args(parser)
    parser.add_argument("--records", help="индекс высказываний (JSONL)")
    parser.add_argument("--corpus", help="каталог корпуса <speaker>/<name>.{wav,npz}")
    parser.add_argument("--n-mixtures", type=int, default=1000, help="смесей в train")
    parser.add_argument("--n-validation", type=int, default=100)
    parser.add_argument("--n-test", type=int, default=100)
    parser.add_argument("--interferers", type=int, default=1, choices=(1, 2))
    parser.set_defaults(handler=simulate)

    parser = subparsers.add_parser("materialize", help="записать смеси манифеста в WAV/NPZ")
    add_common_args(parser)
    parser.add_argument("--manifest", required=True)
    parser.set_defaults(handler=materialize_manifest)
