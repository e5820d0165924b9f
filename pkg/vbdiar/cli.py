"""
vbdiar — командная строка.

Команды: synth, train-plda, diarize, score, benchmark. Отчёты пишутся
в stdout, лог — в stderr. Ошибка выводится одной строкой
`error: <kind>: <message>` с кодом выхода 1 (usage), 2 (data) или 3 (numerical).
"""

import argparse
import logging
import sys

from pydantic import ValidationError

from .commands import (
    register_benchmark_command,
    register_diarize_command,
    register_score_command,
    register_synth_command,
    register_train_command,
)
from .config import settings
from .errors import DiarizationError, UsageError

logger = logging.getLogger(__name__)


class ArgumentParser(argparse.ArgumentParser):
    """Парсер, сообщающий об ошибке исключением UsageError."""

    def error(self, message: str):
        raise UsageError(message)


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(prog="vbdiar", description="VB-диаризация с двухковариационной PLDA")
    subparsers = parser.add_subparsers(dest="command", required=True, metavar="command")
    register_synth_command(subparsers)
    register_train_command(subparsers)
    register_diarize_command(subparsers)
    register_score_command(subparsers)
    register_benchmark_command(subparsers)
    return parser


def _report(kind: str, message: str) -> None:
    text = " ".join(str(message).split())
    print(f"error: {kind}: {text}", file=sys.stderr)


def main(argv: list[str] | None = None) -> int:
    """Точка входа CLI; возвращает код выхода."""
    logging.basicConfig(
        level=settings.log_level,
        format=settings.log_format,
        handlers=[logging.StreamHandler(sys.stderr)],
    )
    try:
        args = build_parser().parse_args(argv)
        return args.handler(args)
    except DiarizationError as e:
        logger.debug("Ошибка выполнения команды", exc_info=True)
        _report(e.kind, str(e))
        return e.exit_code
    except ValidationError as e:
        err = e.errors()[0]
        _report("usage", f"{'.'.join(map(str, err['loc']))}: {err['msg']}")
        return 1
    except OSError as e:
        _report("data", f"{e.filename or ''}: {e.strerror or e}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
