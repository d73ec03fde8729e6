import pytest

from app.config import Settings, load_settings, dump_settings, SegConfig
from app.errors import InvalidArgumentError
from conftest import make_settings


def test_dump_and_load_round_trip(tmp_path):
    settings = make_settings(tmp_path).model_copy(update={"seed": 17})
    path = dump_settings(settings, tmp_path / "resolved.env")
    assert "SEG__ENCODER_KERNEL=32" in path.read_text(encoding="utf-8").splitlines()
    assert load_settings(str(path)).model_dump() == settings.model_dump()


def test_defaults():
    settings = Settings(_env_file=None)
    assert settings.sample_rate == 16000
    assert settings.training.seg_lr == 5e-4
    assert settings.seg == SegConfig()


def test_missing_file(tmp_path):
    with pytest.raises(InvalidArgumentError):
        load_settings(str(tmp_path / "absent.env"))


def test_invalid_value(tmp_path):
    path = tmp_path / "bad.env"
    path.write_text("SEG__ENCODER_KERNEL=ten\n", encoding="utf-8")
    with pytest.raises(InvalidArgumentError):
        load_settings(str(path))
