# src/config.py
# Constantes de proceso. Se leen del entorno (.env vía python-dotenv en los entrypoints).
import os
from pathlib import Path

from dotenv import load_dotenv

load_dotenv()

ROOT = Path(__file__).resolve().parent.parent

REPORTS_DIR = Path(os.getenv("NAV_REPORTS_DIR") or (ROOT / "reports"))
LOG_PATH = Path(os.getenv("NAV_LOG_PATH") or (REPORTS_DIR / "nav.log.jsonl"))
LOG_MAX_BYTES = int(os.getenv("NAV_LOG_MAX_BYTES", "5242880"))  # 5MB aprox.

_allowed_env = os.getenv("NAV_ALLOWED_DIRS")
if _allowed_env:
    ALLOWED_DIRS = [Path(p) for p in _allowed_env.split(os.pathsep) if p.strip()]
else:
    ALLOWED_DIRS = [Path.cwd(), ROOT / "samples", REPORTS_DIR]

MAX_BYTES = int(os.getenv("NAV_MAX_BYTES", str(64 * 1024 * 1024)))  # lectura segura de CSV
MC_WORKERS = int(os.getenv("NAV_MC_WORKERS", "0")) or min(8, os.cpu_count() or 1)
