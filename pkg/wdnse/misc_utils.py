"""Inevitable hodge-podge of odds and ends functions"""

from __future__ import annotations

import sys


def print_debug(enabled: bool, msg: str) -> None:
    if enabled:
        print(msg, file=sys.stderr)


def print_warning(msg: str) -> None:
    print(f"warning: {msg}", file=sys.stderr)


def brief_float(value: float, digits: int = 6) -> str:
    return f"{value:.{digits}g}"
