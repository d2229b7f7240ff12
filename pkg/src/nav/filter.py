# src/nav/filter.py
# Filtro estocástico no lineal sobre SE2(3): términos de corrección, estimación adaptativa de σ,
# ciclo discreto predicción/actualización, forma en cuaterniones y RHS continuo para verificación.
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, PositiveFloat

from .errors import DivergenceError, LandmarkError
from .liegroup import (
    NavState, TangentElement, exp_um, quat_exp, quat_multiply, quat_to_rot,
    reorthonormalize, skew, upsilon,
)
from .measurements import GRAVITY, Aggregates, Feature, FeatureObservation, ImuSample, aggregate
from .ppf import PpfConfig, PpfEval, resolve_ppf, transform, xi_at

DIVERGENCE_LIMIT = 1e3


class FilterGains(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    k_w: PositiveFloat = 3.0
    k_v: PositiveFloat = 3.0
    k_a: PositiveFloat = 20.0
    gamma_sigma: PositiveFloat = 3.0
    k_sigma: PositiveFloat = 0.1
    mu: PositiveFloat = 0.8
    eps: PositiveFloat = 0.8
    ell_P: PositiveFloat = 1.0


@dataclass(frozen=True)
class FilterState:
    X_hat: NavState
    sigma_hat: np.ndarray = field(default_factory=lambda: np.zeros(3))


@dataclass(frozen=True)
class QuatFilterState:
    Q: np.ndarray
    P: np.ndarray
    V: np.ndarray
    sigma_hat: np.ndarray = field(default_factory=lambda: np.zeros(3))

    @property
    def R(self) -> np.ndarray:
        return quat_to_rot(self.Q)

    def nav_state(self) -> NavState:
        return NavState(self.R, self.P, self.V)


@dataclass(frozen=True)
class CorrectionTerms:
    w_omega: np.ndarray
    w_v: np.ndarray
    w_a: np.ndarray          # incluye −g
    k_R: float
    upsilon: np.ndarray


@dataclass(frozen=True)
class StepInfo:
    """Diagnóstico de un paso: si hubo actualización, el error e y la evaluación del PPF."""
    updated: bool
    e: Optional[np.ndarray] = None
    ppf: Optional[PpfEval] = None
    ppf_cfg: Optional[PpfConfig] = None
    reason: str = ""


@dataclass(frozen=True)
class StateDerivative:
    R_dot: np.ndarray
    P_dot: np.ndarray
    V_dot: np.ndarray
    sigma_dot: np.ndarray


# ---- Términos de corrección ----
def error_vector(agg: Aggregates) -> np.ndarray:
    # e₁ = ¼Tr(M − MR̃) ≥ 0 sin ruido; con ruido puede quedar marginalmente negativo
    e1 = 0.25 * float(np.trace(agg.M) - np.trace(agg.MRt))
    return np.concatenate(([max(e1, 0.0)], agg.RtPe))


def corrections(agg: Aggregates, ppf: PpfEval, sigma_hat, R_hat, p_c=None,
                gains: FilterGains | None = None, gravity=GRAVITY) -> CorrectionTerms:
    gains = gains or FilterGains()
    R_hat = np.asarray(R_hat, dtype=float)
    sigma_hat = np.asarray(sigma_hat, dtype=float)
    p_c = agg.p_c if p_c is None else np.asarray(p_c, dtype=float)

    ups = upsilon(agg.MRt)
    d1 = float(error_vector(agg)[0])
    E_R, D_R = ppf.E_R, ppf.Delta_R
    DE_P = ppf.Delta[1:] * ppf.E_P                 # Δ_P·E_P con Δ_P diagonal
    D_P = ppf.Delta[1:]

    w_omega = (-gains.k_w * (D_R * E_R + 1.0) * ups
               - (D_R / 4.0) * ((d1 + 2.0) / (d1 + 1.0)) * (R_hat @ ((R_hat.T @ ups) * sigma_hat)))
    w_v = skew(p_c) @ w_omega - (gains.k_v / gains.eps) * DE_P - gains.ell_P * agg.RtPe
    w_a = -np.asarray(gravity, dtype=float) - gains.k_a * ((gains.k_v / gains.mu) * D_P + 1.0) * DE_P
    k_R = gains.gamma_sigma * ((d1 + 2.0) / 8.0) * D_R * D_R * np.exp(E_R)
    return CorrectionTerms(w_omega, w_v, w_a, float(k_R), ups)


def sigma_update(sigma_hat, k_R: float, R_hat, Upsilon, gains: FilterGains, dt: float) -> np.ndarray:
    if dt <= 0:
        raise ValueError(f"sigma_update requiere dt > 0, recibió {dt}")
    sigma_hat = np.asarray(sigma_hat, dtype=float)
    b = np.asarray(R_hat, dtype=float).T @ np.asarray(Upsilon, dtype=float)
    return sigma_hat + dt * (k_R * b * b - gains.k_sigma * gains.gamma_sigma * sigma_hat)


# ---- Predicción / actualización ----
def predict(X_hat: NavState, imu: ImuSample, dt: float, gravity=GRAVITY) -> NavState:
    """X⁺ = exp(−𝒢dt)·X·exp(U_m dt), U_m = u(Ω_m, 0, a_m, 1), 𝒢 = u(0, 0, −g, 1).

    Los κ = 1 de U_m y 𝒢 se cancelan en la fila inferior. Por defecto aplica la
    gravedad; la forma literal X⁺ = X·exp(U_m dt), la de los ejemplos de
    velocidad constante, pide gravity = 0 explícito.
    """
    if dt <= 0:
        raise ValueError(f"predict requiere dt > 0, recibió {dt}")
    g = np.asarray(gravity, dtype=float)
    U = TangentElement(np.asarray(imu.omega_m, dtype=float), np.zeros(3), np.asarray(imu.a_m, dtype=float), 1.0)
    G = TangentElement(np.zeros(3), np.zeros(3), -g, 1.0)
    X = exp_um(-G, dt) @ X_hat.matrix() @ exp_um(U, dt)
    nxt = NavState.from_matrix(X)
    return NavState(reorthonormalize(nxt.R), nxt.P, nxt.V)


def update(X_hat: NavState, w: CorrectionTerms, dt: float, gravity=GRAVITY) -> NavState:
    """X⁺ = exp(−W dt)·X con W = u(w_Ω, w_V, w_a + g, 0).

    `gravity` debe coincidir con el de predict; con gravity = 0 la ranura a es w_a tal cual.
    """
    if dt <= 0:
        raise ValueError(f"update requiere dt > 0, recibió {dt}")
    W = TangentElement(w.w_omega, w.w_v, w.w_a + np.asarray(gravity, dtype=float), 0.0)
    X = exp_um(-W, dt) @ X_hat.matrix()
    nxt = NavState.from_matrix(X)
    return NavState(reorthonormalize(nxt.R), nxt.P, nxt.V)


def zero_corrections(gravity=GRAVITY) -> CorrectionTerms:
    z = np.zeros(3)
    return CorrectionTerms(z, z, -np.asarray(gravity, dtype=float), 0.0, z)


# ---- Paso completo ----
def _evaluate_frame(R_pred, P_pred, frame, features, ppf_cfg: PpfConfig, t: float,
                    divergence_limit: float):
    """Agregados + error + PPF; devuelve None si el frame no sirve para actualizar."""
    try:
        agg = aggregate(features, frame, R_pred, P_pred)
    except LandmarkError as e:
        return None, str(e)
    e = error_vector(agg)
    if np.any(np.abs(e) > divergence_limit):
        raise DivergenceError(f"error de estimación fuera de rango en t={t:.4f}: {e.tolist()}")
    if not ppf_cfg.resolved:
        ppf_cfg = resolve_ppf(ppf_cfg, e, t)
    ev = transform(e, xi_at(ppf_cfg, t), ppf_cfg.delta, ppf_cfg.epsilon_inflate())
    return (agg, e, ev, ppf_cfg), ""


def step_with_info(state: FilterState, imu: ImuSample, frame: Optional[Sequence[FeatureObservation]],
                   features: Mapping[int, Feature] | Sequence[Feature], ppf_cfg: PpfConfig,
                   gains: FilterGains, t: float, dt: float,
                   divergence_limit: float = DIVERGENCE_LIMIT) -> Tuple[FilterState, StepInfo]:
    X_pred = predict(state.X_hat, imu, dt)
    if not frame:
        return FilterState(X_pred, state.sigma_hat), StepInfo(False, ppf_cfg=ppf_cfg, reason="no-frame")

    evaluated, reason = _evaluate_frame(X_pred.R, X_pred.P, frame, features, ppf_cfg, t, divergence_limit)
    if evaluated is None:
        # menos de 3 landmarks útiles: solo predicción, σ̂ congelado
        return FilterState(X_pred, state.sigma_hat), StepInfo(False, ppf_cfg=ppf_cfg, reason=reason)
    agg, e, ev, ppf_cfg = evaluated

    terms = corrections(agg, ev, state.sigma_hat, X_pred.R, agg.p_c, gains)
    sigma = sigma_update(state.sigma_hat, terms.k_R, X_pred.R, terms.upsilon, gains, dt)
    X_new = update(X_pred, terms, dt)
    return FilterState(X_new, sigma), StepInfo(True, e=e, ppf=ev, ppf_cfg=ppf_cfg)


def step(state: FilterState, imu: ImuSample, frame, features, ppf_cfg: PpfConfig,
         gains: FilterGains, t: float, dt: float) -> FilterState:
    return step_with_info(state, imu, frame, features, ppf_cfg, gains, t, dt)[0]


# ---- Forma en cuaterniones ----
def _series_coeffs(theta: float) -> Tuple[float, float, float]:
    """(1−cosθ)/θ², (θ−sinθ)/θ³, (θ²/2+cosθ−1)/θ⁴ con serie para θ pequeño."""
    if theta < 0.1:
        t2 = theta * theta
        a = 0.5 - t2 / 24.0 + t2 * t2 / 720.0 - t2 ** 3 / 40320.0
        b = 1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0 - t2 ** 3 / 362880.0
        c = 1.0 / 24.0 - t2 / 720.0 + t2 * t2 / 40320.0 - t2 ** 3 / 3628800.0
        return a, b, c
    t2 = theta * theta
    return ((1.0 - np.cos(theta)) / t2,
            (theta - np.sin(theta)) / (t2 * theta),
            (0.5 * t2 + np.cos(theta) - 1.0) / (t2 * t2))


def _jacobians(phi) -> Tuple[np.ndarray, np.ndarray]:
    """J(φ) = Σ φx^k/(k+1)!  y  N(φ) = Σ φx^k/(k+2)!"""
    theta = float(np.linalg.norm(phi))
    a, b, c = _series_coeffs(theta)
    K = skew(phi)
    K2 = K @ K
    I = np.eye(3)
    return I + a * K + b * K2, 0.5 * I + b * K + c * K2


def quat_predict(state: QuatFilterState, imu: ImuSample, dt: float, gravity=GRAVITY) -> QuatFilterState:
    g = np.asarray(gravity, dtype=float)
    R = state.R
    phi = np.asarray(imu.omega_m, dtype=float) * dt
    J, N = _jacobians(phi)
    a = np.asarray(imu.a_m, dtype=float)
    Q = quat_multiply(state.Q, quat_exp(phi))            # ½Θ_m Q  ->  Q ⊗ exp(Ω dt)
    P = state.P + state.V * dt + R @ (N @ a) * dt * dt + 0.5 * g * dt * dt
    V = state.V + R @ (J @ a) * dt + g * dt
    return QuatFilterState(Q / np.linalg.norm(Q), P, V, state.sigma_hat)


def quat_update(state: QuatFilterState, w: CorrectionTerms, dt: float, gravity=GRAVITY) -> QuatFilterState:
    psi = -np.asarray(w.w_omega, dtype=float) * dt
    J, _ = _jacobians(psi)
    dq = quat_exp(psi)                                    # −½ΨQ  ->  exp(−w dt) ⊗ Q
    Rinc = quat_to_rot(dq)
    Q = quat_multiply(dq, state.Q)
    P = Rinc @ state.P - J @ w.w_v * dt
    V = Rinc @ state.V - J @ (w.w_a + np.asarray(gravity, dtype=float)) * dt
    return QuatFilterState(Q / np.linalg.norm(Q), P, V, state.sigma_hat)


def quat_step_with_info(state: QuatFilterState, imu: ImuSample, frame, features,
                        ppf_cfg: PpfConfig, gains: FilterGains, t: float, dt: float,
                        divergence_limit: float = DIVERGENCE_LIMIT) -> Tuple[QuatFilterState, StepInfo]:
    if abs(float(np.linalg.norm(state.Q)) - 1.0) > 1e-6:
        raise ValueError(f"quat_step: cuaternión no unitario (|Q| = {np.linalg.norm(state.Q):.9f})")
    pred = quat_predict(state, imu, dt)
    if not frame:
        return pred, StepInfo(False, ppf_cfg=ppf_cfg, reason="no-frame")
    R_pred = pred.R
    evaluated, reason = _evaluate_frame(R_pred, pred.P, frame, features, ppf_cfg, t, divergence_limit)
    if evaluated is None:
        return pred, StepInfo(False, ppf_cfg=ppf_cfg, reason=reason)
    agg, e, ev, ppf_cfg = evaluated

    terms = corrections(agg, ev, pred.sigma_hat, R_pred, agg.p_c, gains)
    sigma = sigma_update(pred.sigma_hat, terms.k_R, R_pred, terms.upsilon, gains, dt)
    nxt = quat_update(pred, terms, dt)
    return QuatFilterState(nxt.Q, nxt.P, nxt.V, sigma), StepInfo(True, e=e, ppf=ev, ppf_cfg=ppf_cfg)


def quat_step(state: QuatFilterState, imu: ImuSample, frame, features, ppf_cfg: PpfConfig,
              gains: FilterGains, t: float, dt: float) -> QuatFilterState:
    return quat_step_with_info(state, imu, frame, features, ppf_cfg, gains, t, dt)[0]


# ---- Forma continua (solo para verificación) ----
def continuous_rhs(state: FilterState, imu: ImuSample, agg: Optional[Aggregates],
                   ppf: Optional[PpfEval], gains: FilterGains, gravity=GRAVITY) -> StateDerivative:
    """Derivadas de (R̂, P̂, V̂, σ̂) según X̂̇ = X̂U_m − WX̂, con W de κ = 1 y w_a incluyendo −g.

    Sin agregados (frame ausente) las correcciones son nulas y σ̂ queda congelado.
    """
    R, P, V = state.X_hat.R, state.X_hat.P, state.X_hat.V
    if agg is None or ppf is None:
        terms = zero_corrections(gravity)
        sigma_dot = np.zeros(3)
    else:
        terms = corrections(agg, ppf, state.sigma_hat, R, agg.p_c, gains, gravity)
        b = R.T @ terms.upsilon
        sigma_dot = terms.k_R * b * b - gains.k_sigma * gains.gamma_sigma * state.sigma_hat
    W = skew(terms.w_omega)
    return StateDerivative(
        R_dot=R @ skew(imu.omega_m) - W @ R,
        P_dot=V - W @ P - terms.w_v,
        V_dot=R @ np.asarray(imu.a_m, dtype=float) - W @ V - terms.w_a,
        sigma_dot=sigma_dot,
    )


def integrate_continuous(state: FilterState, t0: float, t1: float, h: float,
                         imu_fn: Callable[[float], ImuSample],
                         frame_fn: Callable[[float, NavState], Optional[Sequence[FeatureObservation]]],
                         features, ppf_cfg: PpfConfig, gains: FilterGains) -> FilterState:
    """RK4 de paso fijo del filtro continuo entre t0 y t1.

    `frame_fn(t, X_hat)` devuelve las observaciones en t (o None). R̂ se proyecta a SO(3) tras cada paso.
    """
    if not ppf_cfg.resolved:
        raise ValueError("integrate_continuous requiere un PpfConfig con xi0/delta fijados")
    n = max(1, int(round((t1 - t0) / h)))
    h = (t1 - t0) / n

    def rhs(t: float, s: FilterState) -> StateDerivative:
        frame = frame_fn(t, s.X_hat)
        agg = ev = None
        if frame:
            try:
                agg = aggregate(features, frame, s.X_hat.R, s.X_hat.P)
            except LandmarkError:
                agg = None
            if agg is not None:
                e = error_vector(agg)
                ev = transform(e, xi_at(ppf_cfg, t), ppf_cfg.delta, ppf_cfg.epsilon_inflate())
        return continuous_rhs(s, imu_fn(t), agg, ev, gains)

    def shift(s: FilterState, d: StateDerivative, k: float) -> FilterState:
        X = s.X_hat
        return FilterState(NavState(X.R + k * d.R_dot, X.P + k * d.P_dot, X.V + k * d.V_dot),
                           s.sigma_hat + k * d.sigma_dot)

    s, t = state, t0
    for _ in range(n):
        k1 = rhs(t, s)
        k2 = rhs(t + 0.5 * h, shift(s, k1, 0.5 * h))
        k3 = rhs(t + 0.5 * h, shift(s, k2, 0.5 * h))
        k4 = rhs(t + h, shift(s, k3, h))
        X = s.X_hat
        R = X.R + h / 6.0 * (k1.R_dot + 2 * k2.R_dot + 2 * k3.R_dot + k4.R_dot)
        P = X.P + h / 6.0 * (k1.P_dot + 2 * k2.P_dot + 2 * k3.P_dot + k4.P_dot)
        V = X.V + h / 6.0 * (k1.V_dot + 2 * k2.V_dot + 2 * k3.V_dot + k4.V_dot)
        sig = s.sigma_hat + h / 6.0 * (k1.sigma_dot + 2 * k2.sigma_dot + 2 * k3.sigma_dot + k4.sigma_dot)
        s = FilterState(NavState(reorthonormalize(R), P, V), sig)
        t += h
    return s
