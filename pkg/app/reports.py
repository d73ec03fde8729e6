"""
Сериализация отчётов: JSON, текст по шаблону Jinja2 и Excel.
"""
from pathlib import Path
from typing import Optional
from jinja2 import Environment, FileSystemLoader
from openpyxl import Workbook
from openpyxl.styles import Font, Alignment, PatternFill, Border, Side
from loguru import logger

from app.errors import DataIntegrityError
from app.schemas import EvaluationReport, BinStat

TEMPLATES_DIR = Path(__file__).parent / "templates"

templates = Environment(
    loader=FileSystemLoader(str(TEMPLATES_DIR)),
    keep_trailing_newline=True,
    trim_blocks=False,
)


def _fmt(value: Optional[float]) -> str:
    return "—" if value is None else f"{value:.3f}"


def _interval(stat: BinStat) -> str:
    lower = "-inf" if stat.lower is None else f"{stat.lower:g}"
    upper = "inf" if stat.upper is None else f"{stat.upper:g}"
    return f"[{lower}, {upper})"


templates.globals["fmt"] = _fmt
templates.globals["interval"] = _interval


def write_report_json(report: EvaluationReport, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(report.model_dump_json(indent=2), encoding="utf-8")
    return path


def read_report_json(path: str | Path) -> EvaluationReport:
    path = Path(path)
    if not path.is_file():
        raise DataIntegrityError("отчёт не найден", str(path))
    try:
        return EvaluationReport.model_validate_json(path.read_text(encoding="utf-8"))
    except ValueError as e:
        raise DataIntegrityError(f"отчёт повреждён ({e})", str(path)) from e


def render_report_text(report: EvaluationReport, run_id: Optional[int] = None) -> str:
    """Текстовый отчёт: ключ = значение и таблицы разбивок"""
    return templates.get_template("report.txt.j2").render(report=report, run_id=run_id)


def write_report_text(report: EvaluationReport, path: str | Path, run_id: Optional[int] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_report_text(report, run_id), encoding="utf-8")
    return path


def export_report_xlsx(report: EvaluationReport, path: str | Path) -> Path:
    """Excel: лист сводки с разбивками и лист по высказываниям"""
    wb = Workbook()
    ws = wb.active
    ws.title = "Сводка"

    # Стили
    header_fill = PatternFill(start_color="F5F5F5", end_color="F5F5F5", fill_type="solid")
    header_font = Font(bold=True, size=11)
    border = Border(
        left=Side(style='thin'),
        right=Side(style='thin'),
        top=Side(style='thin'),
        bottom=Side(style='thin')
    )
    center_align = Alignment(horizontal="center", vertical="center", wrap_text=True)

    def header_row(sheet, row: int, values) -> None:
        for col_num, value in enumerate(values, start=1):
            cell = sheet.cell(row=row, column=col_num, value=value)
            cell.fill = header_fill
            cell.font = header_font
            cell.alignment = center_align
            cell.border = border

    def data_row(sheet, row: int, values) -> None:
        for col_num, value in enumerate(values, start=1):
            cell = sheet.cell(row=row, column=col_num, value=value)
            cell.border = border

    header_row(ws, 1, ["Показатель", "Значение"])
    summary = [
        ("system", report.system),
        ("sdr_variant", report.sdr_variant),
        ("n_utterances", report.n_utterances),
        ("si_sdri_db", report.si_sdri_db),
        ("sdri_db", report.sdri_db),
        ("pesqi", report.pesqi),
        ("stoii", report.stoii),
        ("accuracy_pct", report.accuracy_pct),
    ]
    row = 2
    for key, value in summary:
        data_row(ws, row, [key, value])
        row += 1

    sections = [
        ("По длине, с", report.bins.by_length),
        ("По SNR, дБ", report.bins.by_snr),
        ("Гистограмма SI-SDRi, дБ", report.bins.histogram),
    ]
    for title, stats in sections:
        row += 1
        ws.cell(row=row, column=1, value=title).font = header_font
        row += 1
        header_row(ws, row, ["Нижняя", "Верхняя", "n", "SI-SDRi, дБ", "Точность, %"])
        for stat in stats:
            row += 1
            data_row(ws, row, [stat.lower, stat.upper, stat.count, stat.mean_si_sdri, stat.accuracy_pct])
        row += 1

    # Высказывания
    ws_utt = wb.create_sheet("Высказывания")
    columns = [
        "mixture_id", "system", "si_sdri", "sdri", "pesqi", "stoii", "correct",
        "utterance_len_s", "target_interference_snr_db", "selected_index",
    ]
    header_row(ws_utt, 1, columns)
    for row_num, score in enumerate(report.per_utterance, start=2):
        data_row(ws_utt, row_num, [getattr(score, c) for c in columns])

    for sheet in (ws, ws_utt):
        for col in sheet.columns:
            sheet.column_dimensions[col[0].column_letter].width = 18

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    wb.save(str(path))
    logger.info(f"Отчёт Excel сохранён: {path}")
    return path


def write_report_bundle(report: EvaluationReport, out_dir: str | Path, run_id: Optional[int] = None) -> dict:
    """report.json, report.txt, report.xlsx и scores.jsonl в out_dir"""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    scores_path = out_dir / "scores.jsonl"
    scores_path.write_text(
        "".join(s.model_dump_json() + "\n" for s in report.per_utterance), encoding="utf-8"
    )
    return {
        "json": write_report_json(report, out_dir / "report.json"),
        "text": write_report_text(report, out_dir / "report.txt", run_id),
        "xlsx": export_report_xlsx(report, out_dir / "report.xlsx"),
        "scores": scores_path,
    }
