import math
import pytest

from app.config import TrainingConfig
from app.errors import TrainingDivergedError, InvalidArgumentError
from app.schedule import initial_schedule, step_schedule


def _run(state, losses):
    actions = []
    for loss in losses:
        state, action = step_schedule(state, loss)
        actions.append(action)
    return state, actions


def test_initial_learning_rates():
    cfg = TrainingConfig()
    assert initial_schedule("seg", cfg).lr == 5e-4
    assert initial_schedule("dprnn", cfg).lr == 1e-3
    gsr = initial_schedule("gsr", cfg)
    assert gsr.lr == 1e-4 and gsr.policy == "decay" and gsr.stop_patience == 5
    with pytest.raises(InvalidArgumentError):
        initial_schedule("unet", cfg)


def test_halves_after_six_flat_epochs():
    state, actions = _run(initial_schedule("seg", TrainingConfig()), [1.0] + [1.0] * 6)
    assert actions == ["continue"] * 6 + ["halve"]
    assert state.lr == 2.5e-4
    assert state.epochs_since_improvement == 6


def test_stops_after_ten_flat_epochs():
    state, actions = _run(initial_schedule("seg", TrainingConfig()), [1.0] + [1.5] * 10)
    assert actions[-1] == "stop"
    assert actions.count("halve") == 1
    assert state.lr == 2.5e-4
    assert state.epoch == 11


def test_improvement_resets_counter():
    state, _ = _run(initial_schedule("dprnn", TrainingConfig()), [1.0, 1.0, 1.0, 0.5])
    assert state.epochs_since_improvement == 0
    assert state.best_val_loss == 0.5


def test_equal_loss_is_not_improvement():
    state, _ = _run(initial_schedule("seg", TrainingConfig()), [2.0, 2.0])
    assert state.epochs_since_improvement == 1


def test_gsr_decays_every_epoch():
    state, actions = _run(initial_schedule("gsr", TrainingConfig()), [3.0, 2.0, 1.0])
    assert actions == ["continue"] * 3
    assert state.lr == pytest.approx(7.29e-5, rel=1e-12)


def test_gsr_stops_after_five_flat_epochs():
    _, actions = _run(initial_schedule("gsr", TrainingConfig()), [1.0] + [1.0] * 5)
    assert actions == ["continue"] * 5 + ["stop"]


@pytest.mark.parametrize("k", [1, 2, 3, 5])
def test_repeated_halvings_are_exact(k):
    cfg = TrainingConfig(stop_patience=1000)
    state, actions = _run(initial_schedule("seg", cfg), [1.0] + [1.0] * (6 * k))
    assert actions.count("halve") == k
    assert state.lr == 5e-4 / 2 ** k


@pytest.mark.parametrize("loss", [math.nan, math.inf])
def test_non_finite_loss_diverges(loss):
    with pytest.raises(TrainingDivergedError):
        step_schedule(initial_schedule("seg", TrainingConfig()), loss)


def test_state_is_immutable():
    state = initial_schedule("seg", TrainingConfig())
    step_schedule(state, 1.0)
    assert state.epoch == 0 and state.best_val_loss == math.inf
