import os

import numpy as np
import pytest

from ddn.autodiff import functional as F
from ddn.autodiff.tensor import Tensor
from ddn.data.dataset import Dataset
from ddn.data.toy import generate_toy_dataset
from ddn.exceptions import DdnConfigError, DdnDataError, DdnNumericError
from ddn.model.checkpoint import load_checkpoint
from ddn.training.config import TrainConfig
from ddn.training.optimizer import Adam
from ddn.training.trainer import FINAL_CHECKPOINT, METRICS_FILE, Trainer, train


def weight(value):
    return Tensor(np.array([value], dtype=np.float64), requires_grad=True, dtype=np.float64)


class TestAdam:
    def test_first_step_moves_by_the_learning_rate(self):
        w = weight(1.0)
        optimizer = Adam([("w", w)], lr=0.01)
        F.sum(F.square(w)).backward()
        optimizer.step()
        assert w.data[0] == pytest.approx(0.99, abs=1e-6)

    def test_missing_gradient_leaves_parameter_alone(self):
        w, u = weight(1.0), weight(2.0)
        optimizer = Adam([("w", w), ("u", u)], lr=0.1)
        F.sum(F.square(w)).backward()
        optimizer.step()
        assert u.data[0] == 2.0

    def test_zero_gradient_is_a_no_op(self):
        w = weight(1.0)
        optimizer = Adam([("w", w)], lr=0.1)
        w.grad = np.zeros(1)
        optimizer.step()
        assert w.data[0] == 1.0

    def test_minimizes_a_quadratic(self):
        w = weight(1.0)
        optimizer = Adam([("w", w)], lr=0.01)
        for _ in range(2000):
            optimizer.zero_grad()
            F.sum(F.square(w)).backward()
            optimizer.step()
        assert abs(w.data[0]) < 1e-3

    def test_non_finite_gradient(self):
        w = weight(1.0)
        optimizer = Adam([("w", w)])
        w.grad = np.array([np.nan])
        with pytest.raises(DdnNumericError, match="'w'"):
            optimizer.step()
        assert optimizer.t == 0

    def test_grad_norm_and_clipping(self):
        w = weight(0.0)
        w.grad = np.array([3.0])
        u = weight(0.0)
        u.grad = np.array([4.0])
        optimizer = Adam([("w", w), ("u", u)], lr=0.1, clip_norm=1.0)
        assert optimizer.grad_norm() == pytest.approx(5.0)
        optimizer.step()
        # clipping scales both moments equally, so the first step is still lr-sized
        assert w.data[0] == pytest.approx(-0.1, abs=1e-6)

    def test_state_round_trip(self):
        w = weight(1.0)
        optimizer = Adam([("w", w)])
        F.sum(F.square(w)).backward()
        optimizer.step()
        resumed = Adam([("w", weight(1.0))])
        resumed.load_state_arrays(optimizer.state_arrays(), optimizer.t)
        assert resumed.t == 1
        np.testing.assert_array_equal(resumed.m["w"], optimizer.m["w"])
        with pytest.raises(DdnConfigError, match="adam.v.w"):
            resumed.load_state_arrays({"adam.m.w": np.zeros(1)}, 1)


class TestTrainConfig:
    def test_defaults(self):
        config = TrainConfig()
        assert (config.learning_rate, config.batch_size) == (3e-4, 256)
        assert config.record_timing is False

    @pytest.mark.parametrize("overrides", [{"batch_size": 1}, {"learning_rate": 0.0}, {"epochs": -1}, {"beta": -0.5}])
    def test_invalid(self, overrides):
        with pytest.raises(DdnConfigError):
            TrainConfig.from_overrides({}, **overrides)

    def test_unknown_key(self):
        with pytest.raises(DdnConfigError, match="unknown"):
            TrainConfig.from_overrides({"momentum": 0.9})

    def test_none_overrides_keep_base_values(self):
        assert TrainConfig.from_overrides({"epochs": 7}, epochs=None).epochs == 7


@pytest.fixture
def line_data():
    return generate_toy_dataset("linear_gaussian", 200, seed=0)


def quick_config(**overrides):
    base = {"learning_rate": 1e-2, "batch_size": 64, "epochs": 2, "record_timing": False}
    return TrainConfig.from_overrides(base, **overrides)


class TestTrainer:
    def test_zero_epochs_still_writes_a_model(self, tmp_path, make_model, line_data):
        result = train(make_model(target_dim=1), line_data, quick_config(epochs=0), output_dir=str(tmp_path))
        assert result.history == []
        assert os.path.exists(tmp_path / FINAL_CHECKPOINT)
        assert (tmp_path / METRICS_FILE).read_text().splitlines() == ["epoch\tnll\tkl\ttotal\tseconds"]

    def test_loss_decreases(self, make_model, line_data):
        result = train(make_model(target_dim=1), line_data, quick_config(epochs=40))
        assert len(result.history) == 40
        assert result.history[-1].nll < result.history[0].nll
        assert result.history[0].batches == 4

    def test_training_is_deterministic(self, make_model, line_data):
        first = train(make_model(target_dim=1, seed=3), line_data, quick_config(seed=5)).model
        second = train(make_model(target_dim=1, seed=3), line_data, quick_config(seed=5)).model
        for name, value in first.state_dict().items():
            np.testing.assert_array_equal(second.state_dict()[name], value)

    def test_metrics_without_kl(self, tmp_path, make_model, line_data):
        train(make_model(target_dim=1, variant="mlp"), line_data, quick_config(), output_dir=str(tmp_path))
        lines = (tmp_path / METRICS_FILE).read_text().splitlines()
        assert lines[0] == "epoch\tnll\ttotal\tseconds"
        assert len(lines) == 3
        assert lines[1].startswith("1\t")
        assert lines[1].endswith("\t0.000")

    def test_out_of_range_samples_are_dropped(self, make_model):
        data = Dataset(x=np.zeros((5, 1)), y=np.array([0.0, 1.0, 2.0, 50.0, -3.0]))
        trainer = Trainer(make_model(target_dim=1), quick_config())
        assert len(trainer.in_range(data)) == 4

    def test_too_few_samples(self, make_model):
        data = Dataset(x=np.zeros((2, 1)), y=np.array([0.0, 50.0]))
        with pytest.raises(DdnDataError):
            train(make_model(target_dim=1), data, quick_config())

    def test_dimension_mismatch(self, make_model, line_data):
        with pytest.raises(DdnConfigError):
            train(make_model(target_dim=2), line_data, quick_config())

    def test_periodic_checkpoints(self, tmp_path, make_model, line_data):
        result = train(make_model(target_dim=1), line_data, quick_config(epochs=4, checkpoint_every=2), output_dir=str(tmp_path))
        names = [os.path.basename(p) for p in result.checkpoints]
        assert names == ["checkpoint_epoch00002.ddn", "checkpoint_epoch00004.ddn", FINAL_CHECKPOINT]

    def test_restore_resumes_optimizer_state(self, tmp_path, make_model, line_data):
        trainer = Trainer(make_model(target_dim=1), quick_config(), output_dir=str(tmp_path))
        trainer.train(line_data)
        checkpoint = load_checkpoint(str(tmp_path / FINAL_CHECKPOINT))
        assert checkpoint.metadata["epoch"] == 2
        resumed = Trainer(checkpoint.model, quick_config())
        resumed.restore(checkpoint)
        assert resumed.epoch == 2
        assert resumed.optimizer.t == trainer.optimizer.t == 8
        np.testing.assert_array_equal(
            resumed.optimizer.state_arrays()["adam.m.expand.weight"], trainer.optimizer.state_arrays()["adam.m.expand.weight"]
        )

    def test_model_is_left_in_eval_mode(self, make_model, line_data):
        assert not train(make_model(target_dim=1), line_data, quick_config()).model.training

    def test_beta_override(self, make_model):
        assert Trainer(make_model(target_dim=1), quick_config(beta=0.5)).beta == 0.5
        assert Trainer(make_model(target_dim=1), quick_config()).beta == 0.1


class TestKlWeight:
    def test_larger_beta_shrinks_the_kl_term(self, make_model, line_data):
        free = train(make_model(target_dim=1, seed=2), line_data, quick_config(epochs=40, beta=0.0))
        pressed = train(make_model(target_dim=1, seed=2), line_data, quick_config(epochs=40, beta=0.5))
        assert pressed.history[-1].kl < free.history[-1].kl
        assert pressed.history[-1].kl < pressed.history[0].kl
