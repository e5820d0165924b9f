"""
Конфигурация vbdiar.

Использует Pydantic Settings для загрузки окружения с валидацией
и значениями по умолчанию. Настройки влияют только на логирование,
параллелизм и значения по умолчанию, которые также доступны как флаги CLI;
численные результаты от окружения не зависят.
"""

import logging
from functools import lru_cache

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

FORMAT_VERSION = "1.0"


class Settings(BaseSettings):
    """Настройки приложения, загружаемые из переменных окружения VBDIAR_*."""

    model_config = SettingsConfigDict(
        env_prefix="VBDIAR_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    # Настройки логирования
    log_level: str = Field(default="INFO", description="Уровень логирования")
    log_format: str = Field(
        default="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        description="Формат строк лога",
    )

    # Параллелизм
    workers: int = Field(
        default=1,
        ge=1,
        description="Размер пула потоков для покомпонентной обработки разговоров",
    )

    # Значения по умолчанию для численных процедур
    default_collar: float = Field(
        default=0.25, ge=0.0, description="Ширина полуворотника DER в секундах"
    )
    ridge_scale: float = Field(
        default=1e-6,
        gt=0.0,
        description="Масштаб гребневой поправки: ridge_scale * trace / D",
    )
    format_version: str = Field(
        default=FORMAT_VERSION, description="Версия формата JSON-документов"
    )

    @field_validator("log_level")
    @classmethod
    def validate_log_level(cls, v: str) -> str:
        """Валидация уровня логирования."""
        level = v.upper()
        if not isinstance(logging.getLevelName(level), int):
            raise ValueError(f"Неизвестный уровень логирования: {v}")
        return level


@lru_cache
def get_settings() -> Settings:
    """Получить singleton настроек."""
    return Settings()


# Глобальный экземпляр настроек
settings = get_settings()
