"""Инициализация модуля команд."""

from .benchmark import register_benchmark_command
from .diarize import register_diarize_command
from .score import register_score_command
from .synth import register_synth_command
from .train import register_train_command

__all__ = [
    "register_synth_command",
    "register_train_command",
    "register_diarize_command",
    "register_score_command",
    "register_benchmark_command",
]
