import pytest

from nilm_threshold.config import DEFAULTS, KEYS, RunConfig, field_key, load_config, parse_value
from nilm_threshold.errors import ConfigurationError
from nilm_threshold.thresholding import AT_DEFAULTS, Method


def test_defaults():
    c = RunConfig()
    assert c.eval_stride == 480 and c.train_stride == 480
    assert c.methods() == [Method.MP, Method.VS, Method.AT]
    assert c.at_specs() == AT_DEFAULTS
    assert (c.train_epochs, c.train_batch_size, c.train_learning_rate) == (50, 32, 1e-4)
    assert (c.loss_w, c.loss_k, c.normalization_reference_watts) == (1.0, 0.0066, 2000.0)


def test_field_keys():
    assert field_key("data_paths") == "data.paths"
    assert field_key("seed") == "seed"
    assert field_key("threshold_native_resolution") == "threshold.native_resolution"
    assert KEYS["window.train_stride"] == "window_train_stride"


def test_parse_values():
    assert parse_value("loss.w", "0.5") == 0.5
    assert parse_value("train.epochs", "3") == 3
    assert parse_value("sweep.weights", "0, 0.5,1") == (0.0, 0.5, 1.0)
    assert parse_value("threshold.native_resolution", "yes") is True
    assert parse_value("data.paths", "") == ()
    with pytest.raises(ConfigurationError):
        parse_value("train.epochs", "2.5")
    with pytest.raises(ConfigurationError):
        parse_value("threshold.native_resolution", "maybe")


def test_file_and_overrides(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\nseed = 4\ndata.paths = a.csv  # trailing\ntrain.epochs = 2\n")
    c = load_config(cfg, ["train.epochs=5"], out="elsewhere")
    assert c.seed == 4 and c.train_epochs == 5 and c.output_dir == "elsewhere"
    assert c.data_paths == (str((tmp_path / "a.csv").resolve()),)
    assert load_config(cfg, seed=9).seed == 9


@pytest.mark.parametrize(
    "text",
    ["bogus.key = 1", "seed", "window.input_length = 500", "loss.w = 2", "split.mode = shuffled", "loss.k = 0",
     "threshold.methods = MP,XX", "threshold.at = fridge:50:1", "train.batch_size = 0"],
)
def test_invalid_config(tmp_path, text):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text(text + "\n")
    with pytest.raises(ConfigurationError):
        load_config(cfg)


def test_missing_file(tmp_path):
    with pytest.raises(ConfigurationError):
        load_config(tmp_path / "none.cfg")


def test_text_round_trip(tmp_path):
    c = DEFAULTS.replace(seed=3, loss_w=0.25, sweep_weights=(0.0, 1.0))
    path = tmp_path / "c.cfg"
    path.write_text(c.to_text())
    assert load_config(path) == c


def test_hash_ignores_output_and_workers():
    c = RunConfig()
    assert c.hash() == c.replace(output_dir="x", sweep_workers=4).hash()
    assert c.hash() != c.replace(seed=1).hash()
    assert len(c.hash()) == 64
