import numpy as np
import pytest

from ddn.model.factory import build_model

# small enough to train in a unit test: 16 bins = 1 x 4^2
TINY_MODEL = {
    "bins_per_dim": 16,
    "latent_dim": 3,
    "hidden_width": 8,
    "branch_width": 4,
    "channels": [4, 2, 1],
    "initial_length": 1,
    "kernel_size": 3,
}


def pytest_addoption(parser):
    parser.addoption("--run-slow", action="store_true", default=False, help="run slow end-to-end tests")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--run-slow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --run-slow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def make_model():
    def factory(target_dim=2, input_dim=1, seed=0, **overrides):
        return build_model(dict(TINY_MODEL, **overrides), input_dim, target_dim, seed=seed)

    return factory


@pytest.fixture
def uniform_model(make_model):
    """A model whose every head is exactly uniform: all parameters are zero."""

    def factory(target_dim=2, **overrides):
        model = make_model(target_dim=target_dim, **overrides)
        for _, parameter in model.named_parameters():
            parameter.data = np.zeros_like(parameter.data)
        return model.eval()

    return factory


@pytest.fixture
def write_csv(tmp_path):
    def writer(name, header, rows):
        path = tmp_path / name
        lines = [",".join(header)] + [",".join(str(v) for v in row) for row in rows]
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return str(path)

    return writer


@pytest.fixture
def tiny_overrides():
    return dict(TINY_MODEL)
