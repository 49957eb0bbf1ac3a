import pytest

from sempe.config import Settings, clear_settings_cache, get_settings, load_config


def test_settings_read_prefixed_environment(monkeypatch):
    monkeypatch.setenv("SEMPE_DRAIN_PENALTY", "3")
    clear_settings_cache()

    assert get_settings().drain_penalty == 3
    assert get_settings() is get_settings()


def test_defaults_match_documented_machine():
    settings = Settings()

    assert settings.register_count == 16
    assert settings.base_cpi == 1
    assert settings.spm_bandwidth == 64
    assert settings.cache_enabled is False


def test_load_config_reads_key_value_file(tmp_path):
    path = tmp_path / "machine.cfg"
    path.write_text("jbtable_capacity=4\ndrain_penalty=2\ncache_enabled=true\n", encoding="utf-8")

    settings = load_config(path)

    assert settings.jbtable_capacity == 4
    assert settings.drain_penalty == 2
    assert settings.cache_enabled is True
    assert settings.spm_bandwidth == 64


def test_load_config_rejects_unknown_keys(tmp_path):
    path = tmp_path / "machine.cfg"
    path.write_text("warp_drive=1\n", encoding="utf-8")

    with pytest.raises(ValueError, match="warp_drive"):
        load_config(path)


def test_load_config_rejects_out_of_range_values(tmp_path):
    path = tmp_path / "machine.cfg"
    path.write_text("register_count=4\n", encoding="utf-8")

    with pytest.raises(ValueError):
        load_config(path)


def test_load_config_missing_file(tmp_path):
    with pytest.raises(ValueError, match="not found"):
        load_config(tmp_path / "absent.cfg")
