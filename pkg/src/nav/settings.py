# src/nav/settings.py
# Configuración de corrida: archivo plano key=value con prefijos de sección (gains.k_w=3, ...).
from __future__ import annotations

from pathlib import Path
from typing import Dict, Iterable, Literal, Mapping, Optional, Tuple

from pydantic import (
    BaseModel, ConfigDict, Field, NonNegativeFloat, PositiveFloat, PositiveInt,
    ValidationError, model_validator,
)

from .errors import NavConfigError
from .filter import DIVERGENCE_LIMIT, FilterGains
from .measurements import NoiseSpec, TrajectorySpec
from .ppf import PpfConfig

Vec3 = Tuple[float, float, float]

AUTO = "auto"
# secciones cuyos valores nunca se parten por comas (rutas)
_SCALAR_SECTIONS = {"replay"}


# ---- Secciones ----
class _Section(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class RunSection(_Section):
    mode: Literal["simulate", "replay"] = "simulate"
    seed: int = 42
    steady_fraction: float = Field(0.25, gt=0.0, le=1.0)
    divergence_limit: PositiveFloat = DIVERGENCE_LIMIT
    out: Optional[str] = None


class RatesSection(_Section):
    imu: PositiveFloat = 200.0
    frame: PositiveFloat = 20.0

    @model_validator(mode="after")
    def _check(self):
        if self.imu < self.frame:
            raise ValueError(f"rates.imu ({self.imu}) debe ser >= rates.frame ({self.frame})")
        ratio = self.imu / self.frame
        if abs(ratio - round(ratio)) > 1e-9:
            raise ValueError(f"rates.imu/rates.frame debe ser entero, recibió {ratio}")
        return self

    @property
    def ratio(self) -> int:
        return int(round(self.imu / self.frame))


class NoiseSection(_Section):
    std_omega: NonNegativeFloat = 0.11
    std_accel: NonNegativeFloat = 0.1
    std_feature: NonNegativeFloat = 0.01

    def spec(self, seed: int = 0) -> NoiseSpec:
        return NoiseSpec(std_omega=self.std_omega, std_accel=self.std_accel,
                         std_feature=self.std_feature, seed=seed)


class LandmarkSection(_Section):
    count: int = Field(30, ge=3)
    box: PositiveFloat = 10.0
    seed: Optional[int] = None          # auto: derivado de run.seed
    weight: Optional[PositiveFloat] = None

    @property
    def resolved_weight(self) -> float:
        return self.weight if self.weight is not None else 1.0 / self.count


class InitialSection(_Section):
    """Estimación inicial: R̂(0) = exp([rotvec]x), P̂(0), V̂(0); `perfect` copia la verdad en t0."""
    perfect: bool = False
    rotvec: Vec3 = (0.0, 0.0, 0.0)
    position: Vec3 = (0.0, 0.0, 0.0)
    velocity: Vec3 = (0.0, 0.0, 0.0)


class FilterSection(_Section):
    form: Literal["matrix", "quaternion"] = "matrix"


class ReplaySection(_Section):
    imu: Optional[str] = None
    features: Optional[str] = None
    observations: Optional[str] = None
    truth: Optional[str] = None
    t0: Optional[float] = None


class RunConfig(_Section):
    run: RunSection = RunSection()
    trajectory: TrajectorySpec = TrajectorySpec()
    rates: RatesSection = RatesSection()
    noise: NoiseSection = NoiseSection()
    landmarks: LandmarkSection = LandmarkSection()
    initial: InitialSection = InitialSection()
    ppf: PpfConfig = PpfConfig()
    gains: FilterGains = FilterGains()
    filter: FilterSection = FilterSection()
    replay: ReplaySection = ReplaySection()

    @model_validator(mode="after")
    def _check_replay(self):
        if self.run.mode == "replay":
            missing = [k for k in ("imu", "features", "observations") if getattr(self.replay, k) is None]
            if missing:
                raise ValueError(f"modo replay requiere replay.{', replay.'.join(missing)}")
        return self

    @property
    def steps(self) -> int:
        return int(round(self.trajectory.duration * self.rates.imu))

    def with_seed(self, seed: int) -> "RunConfig":
        return self.model_copy(update={"run": self.run.model_copy(update={"seed": int(seed)})})

    def with_mode(self, mode: str) -> "RunConfig":
        return _validate(_merge(self.model_dump(), {"run": {"mode": mode}}))


# ---- Parser key=value ----
def _parse_value(section: str, raw: str):
    raw = raw.strip()
    if raw.lower() == AUTO:
        return None
    if section not in _SCALAR_SECTIONS and "," in raw:
        return [p.strip() for p in raw.split(",")]
    return raw


def parse_lines(lines: Iterable[str], source: str = "<config>") -> Dict[str, Dict[str, object]]:
    out: Dict[str, Dict[str, object]] = {}
    for n, line in enumerate(lines, start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise NavConfigError(f"{source}: línea {n}: se esperaba key=value, recibió {line!r}")
        section, dot, name = key.partition(".")
        if not dot or not name or "." in name:
            raise NavConfigError(f"{source}: línea {n}: clave sin sección o con más de un punto: {key!r}")
        out.setdefault(section, {})[name] = _parse_value(section, value)
    return out


def _merge(base: Mapping, extra: Mapping) -> Dict:
    merged = {k: dict(v) if isinstance(v, Mapping) else v for k, v in base.items()}
    for section, values in extra.items():
        merged.setdefault(section, {}).update(values)
    return merged


def _validate(data: Mapping) -> RunConfig:
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        errs = "; ".join(f"{'.'.join(str(p) for p in x['loc'])}: {x['msg']}" for x in e.errors())
        raise NavConfigError(f"configuración inválida: {errs}") from e


def load_config(path: str | Path | None = None, overrides: Iterable[str] = ()) -> RunConfig:
    """Lee el archivo (opcional) y aplica overrides `seccion.clave=valor` en orden."""
    data: Dict[str, Dict[str, object]] = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise NavConfigError(f"no existe el archivo de configuración: {p}")
        data = parse_lines(p.read_text(encoding="utf-8").splitlines(), source=p.name)
    extra = parse_lines(list(overrides), source="--set")
    return _validate(_merge(data, extra))


def config_from_text(text: str) -> RunConfig:
    return _validate(parse_lines(text.splitlines()))


__all__ = [
    "RunConfig", "RunSection", "RatesSection", "NoiseSection", "LandmarkSection",
    "InitialSection", "FilterSection", "ReplaySection",
    "parse_lines", "load_config", "config_from_text",
]
