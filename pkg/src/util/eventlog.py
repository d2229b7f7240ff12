# src/util/eventlog.py
# Log de eventos JSONL (una línea por evento) compartido por el server, la CLI y el harness.
import datetime
import sys
import time
from pathlib import Path

import numpy as np
import orjson
import pandas as pd

from .. import config

STATUS_PREFIX = "[se23-nav]"


def _json_default(obj):
    if isinstance(obj, pd.Timestamp):
        return obj.to_pydatetime().isoformat()
    if isinstance(obj, (datetime.datetime, datetime.date, datetime.time)):
        return obj.isoformat()
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        v = float(obj)
        return v if np.isfinite(v) else None
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (np.ndarray,)):
        return obj.tolist()
    if isinstance(obj, Path):
        return str(obj)
    return str(obj)


def _rotate_log_if_needed(path: Path):
    try:
        if path.exists() and path.stat().st_size > config.LOG_MAX_BYTES:
            backup = path.with_suffix(path.suffix + ".1")
            if backup.exists():
                backup.unlink(missing_ok=True)
            path.rename(backup)
    except Exception:
        # un problema de log nunca tumba una corrida
        pass


def _redact(value):
    """Acorta strings largos (>1k) y no serializa binarios."""
    try:
        if isinstance(value, (bytes, bytearray)):
            return f"<{type(value).__name__}:{len(value)} bytes>"
        if isinstance(value, str) and len(value) > 1000:
            return value[:1000] + "…"
        if isinstance(value, dict):
            return {k: _redact(v) for k, v in value.items()}
        if isinstance(value, list):
            return [_redact(v) for v in value]
        return value
    except Exception:
        return "<unserializable>"


def now_iso() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%S")


def log_event(event: dict):
    """Agrega `event` como una línea JSON a config.LOG_PATH; añade `ts` si falta."""
    try:
        path = Path(config.LOG_PATH)
        path.parent.mkdir(parents=True, exist_ok=True)
        _rotate_log_if_needed(path)
        event = {"ts": now_iso(), **event}
        with path.open("ab") as f:
            f.write(orjson.dumps(event, default=_json_default, option=orjson.OPT_SERIALIZE_NUMPY))
            f.write(b"\n")
    except Exception:
        pass


def status(message: str):
    print(f"{STATUS_PREFIX} {message}", file=sys.stderr)
