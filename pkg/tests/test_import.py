from vbdiar import baseline, cli, config, der, initialization, plda, preprocess, storage, synth, systems, vb


def test_imports():
    """Проверка того, что основные модули проекта успешно импортируются."""
    assert plda
    assert preprocess
    assert vb
    assert initialization
    assert baseline
    assert der
    assert synth
    assert storage
    assert systems
    assert cli
    assert config


def test_settings_defaults():
    """Значения по умолчанию соответствуют протоколу оценки."""
    assert config.settings.default_collar == 0.25
    assert config.settings.workers >= 1
    assert config.settings.format_version == config.FORMAT_VERSION
