"""
Подкоманды инференса: extract, score-pair.
"""
import argparse
import json
from pathlib import Path
from loguru import logger

from app.commands.common import add_common_args, resolve_settings, require, out_path
from app.gesture import load_pose
from app.pipeline import seg_extract, cascade_extract_from_checkpoints, gsr_scorer
from app.signal import load_wav, save_wav


def extract(args: argparse.Namespace) -> int:
    settings = resolve_settings(args)
    mixture = load_wav(require(args.mixture, "--mixture"), settings.sample_rate)
    pose = load_pose(require(args.pose, "--pose"))
    output = Path(args.output) if args.output else out_path(settings) / "extracted.wav"

    if args.system == "seg":
        estimate = seg_extract(mixture, pose, require(args.checkpoint, "--checkpoint"), settings.seg)
        save_wav(estimate, output)
        logger.success(f"SEG: извлечённая речь записана в {output}")
        print(output)
        return 0

    result = cascade_extract_from_checkpoints(
        mixture,
        pose,
        require(args.dprnn_checkpoint, "--dprnn-checkpoint"),
        require(args.gsr_checkpoint, "--gsr-checkpoint"),
        args.n_speakers,
        dprnn_config=settings.dprnn,
        gsr_config=settings.gsr,
    )
    save_wav(result.extracted, output)
    logger.success(
        f"Каскад: выбран поток {result.selected_index} из {len(result.scores)}, записан в {output}"
    )
    print(json.dumps({"output": str(output), "selected_index": result.selected_index, "scores": result.scores}))
    return 0


def score_pair(args: argparse.Namespace) -> int:
    settings = resolve_settings(args)
    speech = load_wav(require(args.speech, "--speech"), settings.sample_rate)
    pose = load_pose(require(args.pose, "--pose"))
    probability = gsr_scorer(require(args.gsr_checkpoint, "--gsr-checkpoint"), settings.gsr)(speech, pose)
    logger.info(f"GSR: вероятность пары {probability:.4f}")
    print(f"{probability:.6f}")
    return 0


def register(subparsers) -> None:
    parser = subparsers.add_parser("extract", help="извлечь целевую речь из смеси по жестам")
    add_common_args(parser)
    parser.add_argument("--system", choices=("seg", "cascade"), required=True)
    parser.add_argument("--mixture", required=True, help="WAV смеси, 16 кГц моно")
    parser.add_argument("--pose", required=True, help="позы цели (.npz)")
    parser.add_argument("--checkpoint", help="чекпоинт SEG")
    parser.add_argument("--dprnn-checkpoint")
    parser.add_argument("--gsr-checkpoint")
    parser.add_argument("--n-speakers", type=int, choices=(2, 3), default=2)
    parser.add_argument("--output", help="WAV результата")
    parser.set_defaults(handler=extract)

    parser = subparsers.add_parser("score-pair", help="вероятность GSR для пары речь/жесты")
    add_common_args(parser)
    parser.add_argument("--speech", required=True)
    parser.add_argument("--pose", required=True)
    parser.add_argument("--gsr-checkpoint", required=True)
    parser.set_defaults(handler=score_pair)
