"""
Исключения vbdiar.

Каждое исключение несёт код выхода CLI: 1 — ошибка использования,
2 — ошибка данных или формата, 3 — численный сбой.
"""


class DiarizationError(Exception):
    """Базовое исключение пакета."""

    kind = "data"

    def __init__(self, message: str, exit_code: int = 2):
        super().__init__(message)
        self.exit_code = exit_code


class UsageError(DiarizationError):
    """Некорректные аргументы или флаги."""

    kind = "usage"

    def __init__(self, message: str):
        super().__init__(message, exit_code=1)


class DataFormatError(DiarizationError):
    """Некорректные входные данные или файл."""

    kind = "data"

    def __init__(self, message: str):
        super().__init__(message, exit_code=2)


class DimensionError(DataFormatError, ValueError):
    """Несогласованные размерности векторов и матриц."""


class NumericalError(DiarizationError, ArithmeticError):
    """Численный сбой: разложение Холецкого, нечисловые значения, вырожденность."""

    kind = "numerical"

    def __init__(self, message: str):
        super().__init__(message, exit_code=3)
