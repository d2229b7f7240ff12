import sys
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parent.parent
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from src import config  # noqa: E402
from src.nav.settings import load_config  # noqa: E402


@pytest.fixture(autouse=True)
def isolated_env(tmp_path, monkeypatch):
    """Log de eventos, reportes y sandbox apuntando a tmp_path."""
    monkeypatch.setattr(config, "LOG_PATH", tmp_path / "nav.log.jsonl")
    monkeypatch.setattr(config, "REPORTS_DIR", tmp_path / "reports")
    monkeypatch.setattr(config, "ALLOWED_DIRS", [tmp_path, ROOT / "samples"])
    monkeypatch.setattr(config, "MC_WORKERS", 2)
    return tmp_path


@pytest.fixture
def short_cfg():
    """Escenario por defecto recortado a 2 s (400 pasos IMU, 40 frames)."""
    return load_config(None, ["trajectory.duration=2"])


@pytest.fixture
def quiet_cfg():
    """Sin ruido, con error inicial moderado."""
    return load_config(None, [
        "trajectory.duration=2",
        "noise.std_omega=0", "noise.std_accel=0", "noise.std_feature=0",
        "initial.rotvec=0.9,0.3,0.6", "initial.position=1.5,0.5,1",
    ])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
