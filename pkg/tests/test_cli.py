import numpy as np
import pytest
from loguru import logger

from app.checkpoint import build_model, save_checkpoint
from app.config import dump_settings
from app.gesture import save_pose
from app.main import run
from app.signal import save_wav
from app.synth import synth_pair
from conftest import make_settings, tiny_seg


@pytest.fixture(autouse=True)
def _drop_log_sinks():
    yield
    logger.remove()


@pytest.fixture
def config(tmp_path) -> str:
    return str(dump_settings(make_settings(tmp_path), tmp_path / "run.env"))


def test_synth_corpus(config, tmp_path):
    out = tmp_path / "corpus"
    code = run([
        "synth-corpus", "--config", config, "--out-dir", str(out),
        "--speakers", "3", "--utterances", "1", "--min-duration", "1.0", "--max-duration", "1.2",
    ])
    assert code == 0
    assert len((out / "records.jsonl").read_text(encoding="utf-8").splitlines()) == 3
    assert (tmp_path / "logs" / "seg.log").exists()


def test_report_needs_run_id(config):
    assert run(["report", "--config", config]) == 2


def test_unknown_system_is_usage_error(config):
    with pytest.raises(SystemExit):
        run(["evaluate", "--config", config, "--system", "beamformer", "--manifest", "m.jsonl"])


def test_extract_with_missing_checkpoint(config, tmp_path):
    speech, pose = synth_pair(0, 1.0)
    mixture = save_wav(speech, tmp_path / "mix.wav")
    pose_path = save_pose(pose, tmp_path / "pose.npz")
    code = run([
        "extract", "--config", config, "--system", "seg", "--mixture", str(mixture),
        "--pose", str(pose_path), "--checkpoint", str(tmp_path / "absent.pt"),
    ])
    assert code == 4


def test_end_to_end(config, tmp_path, capsys):
    corpus = tmp_path / "corpus"
    manifests = tmp_path / "manifests"
    assert run([
        "synth-corpus", "--config", config, "--out-dir", str(corpus),
        "--speakers", "10", "--utterances", "2", "--min-duration", "1.0", "--max-duration", "1.5",
    ]) == 0
    assert run([
        "simulate-manifest", "--config", config, "--out-dir", str(manifests),
        "--records", str(corpus / "records.jsonl"),
        "--n-mixtures", "4", "--n-validation", "2", "--n-test", "3",
    ]) == 0
    for split in ("train", "validation", "test"):
        assert (manifests / f"{split}.jsonl").exists()

    # оценка на обучающем манифесте запрещена
    assert run([
        "evaluate", "--config", config, "--system", "dprnn-pit",
        "--manifest", str(manifests / "train.jsonl"),
    ]) == 3

    assert run([
        "train-dprnn", "--config", config, "--manifest", str(manifests / "train.jsonl"),
        "--validation-manifest", str(manifests / "validation.jsonl"), "--max-epochs", "1",
    ]) == 0
    checkpoint = tmp_path / "runs" / "dprnn" / "best.pt"
    assert checkpoint.exists()

    capsys.readouterr()
    assert run([
        "evaluate", "--config", config, "--system", "dprnn-pit",
        "--manifest", str(manifests / "test.jsonl"), "--dprnn-checkpoint", str(checkpoint),
        "--bins-length", "1.2,1.4", "--bins-snr=-5,0,5",
    ]) == 0
    evaluated = capsys.readouterr().out
    assert "Высказываний: 3" in evaluated
    assert (tmp_path / "runs" / "eval-0001-dprnn-pit" / "report.json").exists()

    assert run(["report", "--config", config, "--run-id", "1"]) == 0
    regenerated = capsys.readouterr().out
    assert regenerated == evaluated

    assert run(["report", "--config", config, "--run-id", "2"]) == 3


@pytest.mark.parametrize("kernel, expected", [(32, 0), (40, 4)])
def test_extract_checks_checkpoint_config(config, tmp_path, kernel, expected):
    seg_config = tiny_seg().model_copy(update={"encoder_kernel": kernel, "encoder_stride": kernel // 2})
    checkpoint = save_checkpoint(
        tmp_path / "seg.pt", "seg", seg_config, build_model("seg", seg_config),
        pose_stats=(np.zeros((10, 3)), np.ones((10, 3))),
    )
    speech, pose = synth_pair(0, 1.0)
    code = run([
        "extract", "--config", config, "--system", "seg",
        "--mixture", str(save_wav(speech, tmp_path / "mix.wav")),
        "--pose", str(save_pose(pose, tmp_path / "pose.npz")),
        "--checkpoint", str(checkpoint), "--output", str(tmp_path / "out.wav"),
    ])
    assert code == expected
    assert (tmp_path / "out.wav").exists() == (expected == 0)
