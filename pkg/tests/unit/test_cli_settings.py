import numpy as np
import pytest
from dbt.events.functions import cleanup_event_logger, fire_event
from dbt.events.types import Note
from dbt.exceptions import DbtRuntimeError

from ddn.cli.commands import parse_columns, parse_ranges
from ddn.cli.manifest import MANIFEST_FILE, RunManifest, read_manifest
from ddn.cli.recipes import load_recipe, recipe_names
from ddn.cli.settings import DATA_DIR_ENV, Settings, data_dir
from ddn.events import setup_logging
from ddn.exceptions import (
    DdnConfigError,
    DdnDataError,
    DdnDimensionError,
    DdnIOError,
    DdnNumericError,
    DdnRuntimeError,
    describe,
    exception_handler,
    exit_code_for,
    logger,
)


class TestSettings:
    def test_packaged_defaults(self):
        settings = Settings.load()
        assert settings.model["bins_per_dim"] == 256
        assert settings.model["variant"] == "ddn"
        assert settings.train["learning_rate"] == 3e-4

    def test_config_file_overlays_defaults(self, tmp_path):
        path = tmp_path / "run.yml"
        path.write_text("model:\n  beta: 0.02\ntrain:\n  epochs: 5\n")
        settings = Settings.load(str(path))
        assert settings.model["beta"] == 0.02
        assert settings.model["latent_dim"] == 16
        assert settings.train["epochs"] == 5

    def test_flag_overrides_skip_none(self):
        settings = Settings.load()
        assert settings.model_with(beta=0.5, bins_per_dim=None)["bins_per_dim"] == 256
        assert settings.train_with(epochs=3)["epochs"] == 3

    def test_unknown_section(self, tmp_path):
        path = tmp_path / "bad.yml"
        path.write_text("optimizer:\n  lr: 1\n")
        with pytest.raises(DdnConfigError, match="optimizer"):
            Settings.load(str(path))

    def test_invalid_yaml(self, tmp_path):
        path = tmp_path / "broken.yml"
        path.write_text("model: [unclosed\n")
        with pytest.raises(DdnConfigError, match="not valid YAML"):
            Settings.load(str(path))

    def test_not_a_mapping(self, tmp_path):
        path = tmp_path / "list.yml"
        path.write_text("- model\n")
        with pytest.raises(DdnConfigError):
            Settings.load(str(path))

    def test_missing_file(self, tmp_path):
        with pytest.raises(DdnIOError):
            Settings.load(str(tmp_path / "absent.yml"))

    def test_data_dir(self, monkeypatch, tmp_path):
        monkeypatch.setenv(DATA_DIR_ENV, str(tmp_path))
        assert data_dir() == str(tmp_path)
        assert data_dir("/elsewhere") == "/elsewhere"


class TestRecipes:
    def test_names(self):
        names = recipe_names()
        assert {"toy-2d", "ablation-ring", "beta-sweep", "uci-energy"} <= set(names)
        assert "uci" not in names

    def test_ablation_runs(self):
        recipe = load_recipe("ablation-ring")
        assert [r.label for r in recipe.runs] == ["ddn", "ddn_no_vl", "mlp", "mlp_vl", "mlp_10x"]
        assert recipe.runs[-1].samples_factor == 10
        assert recipe.metric == "sses"

    def test_uci_recipe(self, tmp_path):
        recipe = load_recipe("uci-energy")
        assert recipe.kind == "tabular"
        assert recipe.trials == 10
        assert recipe.dataset.targets == 2
        assert [r.label for r in recipe.runs] == ["ddn_beta_0.5", "ddn_beta_0.1", "ddn_beta_0.02", "ddn_no_vl"]
        assert recipe.runs[-1].model == {"variant": "ddn_no_vl"}
        with pytest.raises(DdnIOError, match="energy.csv"):
            recipe.dataset_path(str(tmp_path))
        (tmp_path / "energy.csv").write_text("a,b\n")
        assert recipe.dataset_path(str(tmp_path)).endswith("energy.csv")

    @pytest.mark.parametrize("name", ["uci", "uci-iris", "toy-5d"])
    def test_unknown(self, name):
        with pytest.raises(DdnConfigError, match="unknown recipe"):
            load_recipe(name)

    def test_toy_recipe_has_no_dataset(self):
        with pytest.raises(DdnConfigError):
            load_recipe("toy-2d").dataset_path(".")


class TestManifest:
    def test_write_and_read(self, tmp_path):
        manifest = RunManifest(command="train", argv=["train", "--data", "d.csv", "--out", str(tmp_path)])
        manifest.seeds["model"] = 3
        manifest.add_artifact("a.ddn")
        manifest.add_artifact("a.ddn")
        manifest.finish()
        path = manifest.write(str(tmp_path))
        assert path.endswith(MANIFEST_FILE)
        restored = read_manifest(str(tmp_path))
        assert restored.argv == manifest.argv
        assert restored.artifacts == ["a.ddn"]
        assert restored.seeds == {"model": 3}
        assert restored.finished_at is not None

    def test_not_a_manifest(self, tmp_path):
        path = tmp_path / "other.yml"
        path.write_text("just: text\n")
        with pytest.raises(DdnConfigError):
            read_manifest(str(path))


class TestArgumentParsing:
    def test_ranges(self):
        assert parse_ranges(None) is None
        assert parse_ranges("-10:10") == [(-10.0, 10.0)]
        assert parse_ranges("-1:1,0:5") == [(-1.0, 1.0), (0.0, 5.0)]
        with pytest.raises(DdnConfigError):
            parse_ranges("-1..1")

    def test_columns(self):
        assert parse_columns(None) is None
        assert parse_columns("y1, y2,") == ["y1", "y2"]


class TestExceptionHandler:
    @pytest.mark.parametrize(
        "raised, expected, exit_code",
        [
            (FileNotFoundError("gone"), DdnIOError, 3),
            (FloatingPointError("overflow"), DdnNumericError, 4),
            (ValueError("odd"), DdnRuntimeError, 1),
        ],
    )
    def test_foreign_errors_are_wrapped(self, raised, expected, exit_code):
        with pytest.raises(expected) as info:
            with exception_handler("doing work"):
                raise raised
        assert info.value.exit_code == exit_code

    def test_own_errors_pass_through(self):
        error = DdnDimensionError("shapes")
        with pytest.raises(DdnDimensionError) as info:
            with exception_handler():
                raise error
        assert info.value is error

    def test_exit_codes(self):
        assert [e.exit_code for e in (DdnConfigError(), DdnDataError(), DdnIOError(), DdnNumericError())] == [2, 3, 3, 4]
        assert exit_code_for(DbtRuntimeError("plain")) == 1
        assert exit_code_for(DdnConfigError("bad")) == 2

    def test_errors_are_dbt_runtime_errors(self):
        error = DdnDataError("bad row")
        assert isinstance(error, DbtRuntimeError)
        assert error.msg == "bad row"
        assert str(error).splitlines() == ["Data Error", "  bad row"]
        assert describe(error) == "Data Error: bad row"
        assert describe(DbtRuntimeError("plain")) == "Runtime Error: plain"
        assert describe(ValueError("odd")) == "odd"

    def test_dbt_errors_pass_through(self):
        error = DbtRuntimeError("from dbt")
        with pytest.raises(DbtRuntimeError) as info:
            with exception_handler():
                raise error
        assert info.value is error

    def test_numpy_floating_point_errors(self):
        with pytest.raises(DdnNumericError):
            with np.errstate(over="raise"), exception_handler("exp"):
                np.exp(np.array([1000.0]))


class TestLogging:
    @pytest.fixture(autouse=True)
    def reset_event_logger(self):
        yield
        cleanup_event_logger()

    def test_events_go_to_stderr(self, capsys):
        setup_logging("info")
        fire_event(Note(msg="trial 0 finished: LL=-1.2345"))
        logger.warning(f"dataset has {np.int64(7)} rows")
        logger.debug("hidden at info")
        captured = capsys.readouterr()
        assert captured.out == ""
        assert "trial 0 finished: LL=-1.2345" in captured.err
        assert "DDN adapter: dataset has 7 rows" in captured.err
        assert "hidden at info" not in captured.err

    def test_debug_level_shows_debug_lines(self, capsys):
        setup_logging("debug")
        logger.debug("shown at debug")
        assert "shown at debug" in capsys.readouterr().err
