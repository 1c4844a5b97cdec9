import pytest

from snapscore.config import Config, ConfigError


def test_defaults_validate():
    cfg = Config()
    assert cfg.max_dim == 1000
    assert cfg.comb_spacings == tuple(range(10, 31))


def test_dump_load_dump_round_trip():
    text = Config().dump_json()
    again = Config.load_json(text).dump_json()
    assert text == again


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError, match="unknown config keys: bogus"):
        Config.load_json('{"bogus": 3}')
    with pytest.raises(ConfigError, match="unknown"):
        Config().replace(nope=1)


def test_partial_file_overrides_defaults():
    cfg = Config.load_json('{"max_dim": 800, "seed": 7}')
    assert cfg.max_dim == 800
    assert cfg.seed == 7
    assert cfg.blur_half_width == Config().blur_half_width


def test_out_of_range_values_rejected():
    with pytest.raises(ConfigError):
        Config(blob_min_area=100.0, blob_max_area=50.0)
    with pytest.raises(ConfigError):
        Config(crop_size=20)  # must be odd
    with pytest.raises(ConfigError):
        Config(comb_spacing_min=1)
    with pytest.raises(ConfigError):
        Config(simultaneity_tol=0.0)


def test_hash_tracks_values():
    assert Config().config_hash == Config().config_hash
    assert Config().config_hash != Config(seed=1).config_hash
    assert len(Config().config_hash) == 64


def test_non_json_rejected():
    with pytest.raises(ConfigError, match="not valid JSON"):
        Config.load_json("max_dim: 1000")
    with pytest.raises(ConfigError, match="must be an object"):
        Config.load_json("[1, 2]")
