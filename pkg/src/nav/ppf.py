# src/nav/ppf.py
# Envolventes de desempeño prescrito y la transformación error acotado -> error libre.
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from .errors import NavConfigError

Vec4 = Tuple[float, float, float, float]

EPSILON_SCALE = 0.01   # ε por defecto = 0.01·δ·ξ∞


class PpfConfig(BaseModel):
    """ξ⁰, ξ∞, ℓ, δ por componente (1 = actitud, 2..4 = posición).

    `xi0` y `delta` en None significan "auto": se fijan con el primer frame (ver resolve_ppf).
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    xi0: Optional[Vec4] = None
    xi_inf: Vec4 = (0.03, 0.1, 0.1, 0.1)
    ell: Vec4 = (1.0, 1.0, 1.0, 1.0)
    delta: Optional[Vec4] = None
    epsilon: Optional[Vec4] = None

    @model_validator(mode="after")
    def _check(self):
        xi_inf = np.asarray(self.xi_inf)
        if np.any(xi_inf <= 0):
            raise ValueError(f"xi_inf debe ser > 0: {self.xi_inf}")
        if np.any(np.asarray(self.ell) <= 0):
            raise ValueError(f"ell debe ser > 0: {self.ell}")
        if self.xi0 is not None and np.any(np.asarray(self.xi0) <= xi_inf):
            raise ValueError(f"xi0 debe ser > xi_inf por componente: {self.xi0} vs {self.xi_inf}")
        if self.delta is not None and np.any(np.asarray(self.delta) <= 0):
            raise ValueError(f"delta debe ser > 0: {self.delta}")
        if self.epsilon is not None and np.any(np.asarray(self.epsilon) <= 0):
            raise ValueError(f"epsilon debe ser > 0: {self.epsilon}")
        return self

    @property
    def resolved(self) -> bool:
        return self.xi0 is not None and self.delta is not None

    def epsilon_inflate(self) -> np.ndarray:
        if self.epsilon is not None:
            return np.asarray(self.epsilon, dtype=float)
        return EPSILON_SCALE * np.asarray(self.delta, dtype=float) * np.asarray(self.xi_inf, dtype=float)


@dataclass(frozen=True)
class PpfEval:
    e: np.ndarray
    xi: np.ndarray
    E: np.ndarray
    Delta: np.ndarray
    inflated: np.ndarray

    @property
    def E_R(self) -> float:
        return float(self.E[0])

    @property
    def E_P(self) -> np.ndarray:
        return self.E[1:]

    @property
    def Delta_R(self) -> float:
        return float(self.Delta[0])

    @property
    def Delta_P(self) -> np.ndarray:
        return np.diag(self.Delta[1:])

    @property
    def inflation_mask(self) -> int:
        return int(sum(1 << i for i, f in enumerate(self.inflated) if f))


def xi_at(config: PpfConfig, t: float) -> np.ndarray:
    if not config.resolved:
        raise NavConfigError("xi_at: la envolvente no está inicializada (xi0/delta = auto)")
    if t < 0:
        raise ValueError(f"xi_at requiere t >= 0, recibió {t}")
    xi0 = np.asarray(config.xi0, dtype=float)
    xi_inf = np.asarray(config.xi_inf, dtype=float)
    ell = np.asarray(config.ell, dtype=float)
    return (xi0 - xi_inf) * np.exp(-ell * t) + xi_inf


def transform(e, xi, delta, epsilon_inflate) -> PpfEval:
    e = np.asarray(e, dtype=float)
    if not np.all(np.isfinite(e)):
        raise ValueError(f"transform: error no finito {e.tolist()}")
    xi = np.array(xi, dtype=float)
    delta = np.broadcast_to(np.asarray(delta, dtype=float), e.shape)
    eps = np.broadcast_to(np.asarray(epsilon_inflate, dtype=float), e.shape)
    if np.any(xi <= 0):
        raise ValueError(f"transform: xi debe ser > 0, recibió {xi.tolist()}")

    # guarda de tiempo discreto: si e se sale de la envolvente, se infla ξ para ese paso
    inflated = np.abs(e / xi) >= delta
    if inflated.any():
        xi[inflated] = np.abs(e[inflated]) / delta[inflated] + eps[inflated]

    x = e / xi
    E = np.arctanh(x / delta)                   # ½ ln((δ+x)/(δ−x))
    Delta = delta / (xi * (delta * delta - x * x))
    return PpfEval(e=e, xi=xi, E=E, Delta=Delta, inflated=inflated)


def smooth_map(E, delta):
    return delta * np.tanh(E)


def resolve_ppf(config: PpfConfig, e0, t0: float = 0.0) -> PpfConfig:
    """Completa ξ⁰/δ en modo auto y valida el dominio de la transformación en t0.

    Auto: ξ⁰ = δ = [1.2·e₁(0) + 0.5, 2·|e₂:₄(0)| + 2].
    """
    e0 = np.asarray(e0, dtype=float)
    auto = np.concatenate(([1.2 * abs(e0[0]) + 0.5], 2.0 * np.abs(e0[1:]) + 2.0))
    xi0 = config.xi0 if config.xi0 is not None else tuple(float(v) for v in auto)
    delta = config.delta if config.delta is not None else tuple(float(v) for v in auto)
    try:
        resolved = config.model_copy(update={"xi0": xi0, "delta": delta})
        resolved = PpfConfig.model_validate(resolved.model_dump())
    except ValueError as e:
        raise NavConfigError(f"ppf: configuración inválida tras inicializar: {e}") from e

    ratio = np.abs(e0) / xi_at(resolved, t0)
    bad = ratio >= np.asarray(resolved.delta)
    if bad.any():
        raise NavConfigError(
            f"ppf: delta debe superar |e(0)|/xi(0) en las componentes {np.flatnonzero(bad).tolist()} "
            f"(|e|/xi = {ratio.round(6).tolist()}, delta = {list(resolved.delta)})")
    return resolved


def sensitivity_fd(e: float, xi: float, delta: float, h: float = 1e-6) -> float:
    """Derivada numérica de E respecto de e (diferencias centrales)."""
    lo = transform([e - h], [xi], [delta], [1.0]).E[0]
    hi = transform([e + h], [xi], [delta], [1.0]).E[0]
    return float((hi - lo) / (2.0 * h))


def as_vec4(values: Sequence[float]) -> Vec4:
    v = tuple(float(x) for x in values)
    if len(v) != 4:
        raise ValueError(f"se esperaban 4 componentes, recibió {len(v)}")
    return v  # type: ignore[return-value]
