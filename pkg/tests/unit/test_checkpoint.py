import numpy as np
import pytest

from ddn.exceptions import DdnConfigError, DdnIOError
from ddn.model.checkpoint import MAGIC, dumps, load_checkpoint, loads, save_checkpoint


@pytest.fixture
def trained_looking_model(make_model, rng):
    model = make_model(target_dim=2)
    # one training-mode pass moves the batch-norm running statistics off their defaults
    model.forward(rng.uniform(-1, 1, size=(8, 1)), rng.uniform(-5, 5, size=(8, 2)), model.mask_set.sample(8, rng), rng)
    return model.eval()


def test_round_trip_preserves_eval_outputs(trained_looking_model, rng):
    restored = loads(dumps(trained_looking_model)).model
    x = rng.uniform(-1, 1, size=(5, 1))
    y = rng.uniform(-5, 5, size=(5, 2))
    mask = np.array([[1, 0]] * 5)
    np.testing.assert_array_equal(restored.predict(x, y, mask), trained_looking_model.predict(x, y, mask))


def test_round_trip_preserves_buffers_and_paths(trained_looking_model):
    restored = loads(dumps(trained_looking_model)).model
    for name, value in trained_looking_model.state_dict().items():
        np.testing.assert_array_equal(restored.state_dict()[name], value)
    assert restored.paths == trained_looking_model.paths
    assert restored.config == trained_looking_model.config


def test_three_target_paths_survive(make_model):
    model = make_model(target_dim=3, paths_seed=11)
    assert loads(dumps(model)).model.paths.paths == model.paths.paths


def test_extra_arrays_and_metadata(trained_looking_model):
    extra = {"adam.m.encoder.hidden.0.weight": np.ones((8, 8), dtype=np.float32)}
    checkpoint = loads(dumps(trained_looking_model, extra, {"epoch": 3}))
    np.testing.assert_array_equal(checkpoint.extra_arrays["adam.m.encoder.hidden.0.weight"], extra["adam.m.encoder.hidden.0.weight"])
    assert checkpoint.metadata == {"epoch": 3}


def test_serialization_is_byte_stable(trained_looking_model):
    assert dumps(trained_looking_model, metadata={"epoch": 1}) == dumps(trained_looking_model, metadata={"epoch": 1})


def test_extra_array_name_collision(trained_looking_model):
    with pytest.raises(DdnConfigError):
        dumps(trained_looking_model, {"expand.weight": np.zeros(1)})


def test_bad_magic():
    with pytest.raises(DdnConfigError, match="magic"):
        loads(b"NOPE" + bytes(16))


def test_truncated_payload(trained_looking_model):
    payload = dumps(trained_looking_model)
    assert payload.startswith(MAGIC)
    with pytest.raises(DdnIOError, match="truncated"):
        loads(payload[:-10])


def test_file_round_trip(tmp_path, trained_looking_model):
    path = str(tmp_path / "model.ddn")
    save_checkpoint(path, trained_looking_model, metadata={"epoch": 2})
    checkpoint = load_checkpoint(path)
    assert checkpoint.metadata["epoch"] == 2
    assert checkpoint.model.config == trained_looking_model.config


def test_missing_file(tmp_path):
    with pytest.raises(DdnIOError):
        load_checkpoint(str(tmp_path / "absent.ddn"))
