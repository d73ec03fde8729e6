"""
Подкоманды оценки: evaluate, evaluate-gsr, report.
"""
import argparse
from loguru import logger

from app.commands.common import add_common_args, resolve_settings, require, out_path
from app.commands.data import load_records
from app.corpus import read_manifest, load_pool
from app.crud import save_evaluation, regenerate_report, list_runs
from app.database import get_db, init_db
from app.errors import InvalidArgumentError
from app.pipeline import SYSTEMS, evaluate_system, evaluate_gsr, gsr_scorer, envelope_scorer
from app.reports import write_report_bundle, render_report_text


def evaluate(args: argparse.Namespace) -> int:
    settings = resolve_settings(args)
    manifest = require(args.manifest, "--manifest")
    _, entries = read_manifest(manifest)
    report = evaluate_system(
        entries,
        args.system,
        settings,
        settings.seed,
        seg_ckpt=args.checkpoint,
        dprnn_ckpt=args.dprnn_checkpoint,
        gsr_ckpt=args.gsr_checkpoint,
        scorer=args.scorer,
        allow_non_test=args.allow_non_test,
    )
    init_db(settings.database_url)
    with get_db(settings.database_url) as db:
        run = save_evaluation(db, report, settings.seed, manifest)
        run_id = run.id
    paths = write_report_bundle(report, out_path(settings, f"eval-{run_id:04d}-{report.system}"), run_id)
    logger.success(f"Оценка {report.system} сохранена: запуск {run_id}, отчёт {paths['json']}")
    print(render_report_text(report, run_id))
    return 0


def evaluate_gsr_command(args: argparse.Namespace) -> int:
    settings = resolve_settings(args)
    pool = load_pool(load_records(args), settings.sample_rate)
    if args.scorer == "envelope":
        scorer = envelope_scorer
    else:
        scorer = gsr_scorer(require(args.gsr_checkpoint, "--gsr-checkpoint"), settings.gsr)
    result = evaluate_gsr(scorer, pool, args.mode, settings.seed)
    path = out_path(settings) / f"gsr-{args.mode}.json"
    path.write_text(result.model_dump_json(indent=2), encoding="utf-8")
    print(result.model_dump_json())
    return 0


def report(args: argparse.Namespace) -> int:
    settings = resolve_settings(args)
    init_db(settings.database_url)
    with get_db(settings.database_url) as db:
        if args.list:
            for run in list_runs(db, args.system):
                print(
                    f"{run.id}\t{run.system}\t{run.n_utterances}\t"
                    f"{run.si_sdri_db:.3f}\t{run.accuracy_pct:.3f}\t{run.created_at:%Y-%m-%d %H:%M}"
                )
            return 0
        if args.run_id is None:
            raise InvalidArgumentError("нужен --run-id или --list")
        regenerated = regenerate_report(db, args.run_id)
    write_report_bundle(regenerated, out_path(settings, f"eval-{args.run_id:04d}-{regenerated.system}"), args.run_id)
    print(render_report_text(regenerated, args.run_id))
    return 0


def register(subparsers) -> None:
    parser = subparsers.add_parser("evaluate", help="оценка системы на тестовом манифесте")
    add_common_args(parser, bins=True)
    parser.add_argument("--system", choices=SYSTEMS, required=True)
    parser.add_argument("--manifest", required=True, help="манифест test")
    parser.add_argument("--checkpoint", help="чекпоинт SEG")
    parser.add_argument("--dprnn-checkpoint")
    parser.add_argument("--gsr-checkpoint")
    parser.add_argument(
        "--scorer", choices=("gsr", "oracle", "envelope"), default="gsr",
        help="оценщик потоков каскада",
    )
    parser.add_argument("--allow-non-test", action="store_true", help="разрешить не тестовые смеси")
    parser.set_defaults(handler=evaluate)

    parser = subparsers.add_parser("evaluate-gsr", help="точность GSR на чистой речи")
    add_common_args(parser)
    parser.add_argument("--records", help="индекс высказываний (JSONL)")
    parser.add_argument("--corpus", help="каталог корпуса")
    parser.add_argument("--mode", choices=("verify", "select-2", "select-3"), default="verify")
    parser.add_argument("--gsr-checkpoint")
    parser.add_argument("--scorer", choices=("gsr", "envelope"), default="gsr")
    parser.set_defaults(handler=evaluate_gsr_command)

    parser = subparsers.add_parser("report", help="пересобрать отчёт из сохранённых оценок")
    add_common_args(parser, bins=False)
    parser.add_argument("--run-id", type=int)
    parser.add_argument("--list", action="store_true", help="список запусков")
    parser.add_argument("--system", choices=SYSTEMS)
    parser.set_defaults(handler=report)
