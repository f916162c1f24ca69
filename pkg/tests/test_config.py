import pytest

from sesemi.config import ExperimentConfig, load_config, parse_config
from sesemi.exceptions import ConfigError


def test_defaults_roundtrip():
    cfg = ExperimentConfig()
    assert parse_config(cfg.to_text()) == cfg


def test_custom_roundtrip():
    cfg = ExperimentConfig(mode="asl", w=0.25, hidden=(7, 5), aug_hflip=False, dataset="cifar10",
                           arch="convnet", data_path="/data/c10", base_lr=1e-3)
    text = cfg.to_text()
    assert parse_config(text) == cfg
    assert parse_config(text).to_text() == text


def test_comments_and_blanks():
    cfg = parse_config("# header\n\nmode = supervised  # inline\n  epochs=3\n")
    assert cfg.mode == "supervised" and cfg.epochs == 3


def test_unknown_key_cites_line():
    with pytest.raises(ConfigError, match=r"line 3: unknown key 'consistency_weight'") as info:
        parse_config("mode = ssl\n# x\nconsistency_weight = 1\n")
    assert info.value.line == 3


@pytest.mark.parametrize("text,fragment", [
    ("epochs = ten\n", "line 1: bad value for 'epochs'"),
    ("mode\n", "line 1: expected"),
    ("w = 1\nw = 2\n", "line 2: duplicate key 'w'"),
    ("aug_hflip = maybe\n", "line 1: bad value"),
])
def test_bad_lines(text, fragment):
    with pytest.raises(ConfigError, match=fragment):
        parse_config(text)


def test_invalid_value_raises_config_error():
    with pytest.raises(ConfigError, match="mode"):
        parse_config("mode = fancy\n")


def test_load_config(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("dataset = three_spirals\n", encoding="utf-8")
    assert load_config(p).dataset == "three_spirals"
