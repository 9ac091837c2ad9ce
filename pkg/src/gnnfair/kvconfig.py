"""Plain-text ``key = value`` configuration files.

Lines starting with ``#`` or ``;`` are comments, keys are case-sensitive and
may be dotted (``pfr.alpha = 0.3``). Section headers are not used.
"""

from __future__ import annotations

import configparser
from pathlib import Path

from .errors import GnnFairError

_SECTION = "__root__"


def parse_kv(text: str) -> dict:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",),
                                   delimiters=("=",))
    cp.optionxform = str
    try:
        cp.read_string(f"[{_SECTION}]\n" + text)
    except configparser.Error as exc:
        raise GnnFairError(f"malformed configuration: {exc}") from exc
    return dict(cp[_SECTION])


def read_kv(path) -> dict:
    return parse_kv(Path(path).read_text())


def write_kv(path, values: dict) -> None:
    lines = [f"{k} = {v}" for k, v in values.items()]
    Path(path).write_text("\n".join(lines) + "\n")


def as_list(value, cast=str, sep=","):
    if value is None:
        return []
    if isinstance(value, (list, tuple)):
        return [cast(v) for v in value]
    return [cast(v.strip()) for v in str(value).split(sep) if v.strip()]


def as_bool(value) -> bool:
    v = str(value).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise GnnFairError(f"not a boolean: {value!r}")
