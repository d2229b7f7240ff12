# src/tools/_common.py
# Helpers compartidos por los tools nav_*: armado de RunConfig desde args y directorio de salida.
from pathlib import Path
from typing import Any, Dict, List

from .. import config
from ..nav.settings import RunConfig, load_config
from ..sandbox import must_be_allowed

CONFIG_PROPERTIES = {
    "config": {"type": "string"},                          # archivo key=value
    "set": {"type": "array", "items": {"type": "string"}},  # overrides seccion.clave=valor
    "seed": {"type": "integer"},
    "out": {"type": "string"},                              # directorio de salida
}


def build_config(args: Dict[str, Any], mode: str) -> RunConfig:
    path = args.get("config")
    if path:
        path = must_be_allowed(path)
    overrides: List[str] = [f"run.mode={mode}", *(args.get("set") or [])]
    if args.get("seed") is not None:
        overrides.append(f"run.seed={int(args['seed'])}")
    return load_config(path, overrides)


def out_dir(args: Dict[str, Any], cfg: RunConfig, name: str) -> Path:
    raw = args.get("out") or cfg.run.out or str(config.REPORTS_DIR / f"{name}-{cfg.run.seed}")
    p = must_be_allowed(raw)
    p.mkdir(parents=True, exist_ok=True)
    return p
