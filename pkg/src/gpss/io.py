"""Atomic file output, number formatting and the on-disk result cache."""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path

CACHE_ENV = "GPSS_CACHE_DIR"


def format_float(x) -> str:
    """17 significant digits, the round-trip precision of a double."""
    return format(float(x), ".17g")


def atomic_write_text(path: Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path: Path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(v if isinstance(v, str) else _cell(v) for v in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def _cell(v) -> str:
    if isinstance(v, (int,)) and not isinstance(v, bool):
        return str(v)
    return format_float(v)


def write_json(path: Path, obj) -> None:
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def cache_dir() -> Path:
    env = os.environ.get(CACHE_ENV)
    if env:
        return Path(env)
    return Path.home() / ".cache" / "gpss"


def cache_key(**fields) -> str:
    blob = json.dumps({k: fields[k] for k in sorted(fields)}, sort_keys=True, default=repr)
    return hashlib.sha256(blob.encode()).hexdigest()[:32]


def cache_load(key: str):
    path = cache_dir() / f"{key}.json"
    if not path.exists():
        return None
    try:
        return json.loads(path.read_text())
    except (OSError, json.JSONDecodeError):
        return None


def cache_store(key: str, payload: dict) -> Path:
    path = cache_dir() / f"{key}.json"
    write_json(path, payload)
    return path
