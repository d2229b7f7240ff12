# src/sandbox.py
from pathlib import Path

from . import config


def must_be_allowed(path_str: str) -> Path:
    """Resuelve la ruta y exige que cuelgue de alguno de config.ALLOWED_DIRS."""
    p = Path(path_str).expanduser().resolve()
    for base in config.ALLOWED_DIRS:
        base = base.expanduser().resolve()
        try:
            p.relative_to(base)
            return p
        except ValueError:
            continue
    raise PermissionError(f"Path not allowed: {p}")


def guard_size(data: bytes):
    if len(data) > config.MAX_BYTES:
        raise ValueError(f"File too large: {len(data)} bytes > {config.MAX_BYTES}")
