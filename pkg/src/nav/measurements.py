# src/nav/measurements.py
# Modelo de observación de landmarks, agregados del filtro, ruido IMU, trayectorias sintéticas
# y lectura de los CSV de replay.
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, Literal, Mapping, NamedTuple, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, NonNegativeFloat, PositiveFloat

from .errors import CsvSchemaError, LandmarkError
from .liegroup import NavState, quat_to_rot, rot_to_quat, rot_x, rot_z, upsilon
from ..util.io import read_table, write_table

GRAVITY = np.array([0.0, 0.0, -9.81])   # m/s², marco inercial z-up
LANDMARK_EIG_TOL = 1e-9
MIN_FEATURES = 3

IMU_COLUMNS = ["t", "wx", "wy", "wz", "ax", "ay", "az"]
FEATURE_COLUMNS = ["id", "px", "py", "pz"]
OBSERVATION_COLUMNS = ["t", "id", "yx", "yy", "yz", "s"]
TRUTH_COLUMNS = ["t", "px", "py", "pz", "vx", "vy", "vz", "qw", "qx", "qy", "qz"]


# ---- Tipos ----
@dataclass(frozen=True)
class Feature:
    id: int
    p_inertial: np.ndarray


@dataclass(frozen=True)
class FeatureObservation:
    id: int
    y_body: np.ndarray
    s: float = 1.0


@dataclass(frozen=True)
class Aggregates:
    p_c: np.ndarray
    s_T: float
    M: np.ndarray
    MRt: np.ndarray      # M·R̃
    RtPe: np.ndarray     # R̃ᵀ·P̃_ε
    count: int = 0


@dataclass(frozen=True)
class ImuSample:
    t: float
    omega_m: np.ndarray
    a_m: np.ndarray


@dataclass(frozen=True)
class TruthPoint:
    t: float
    X: NavState
    omega: np.ndarray
    a: np.ndarray


class NoiseSpec(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    std_omega: NonNegativeFloat = 0.11
    std_accel: NonNegativeFloat = 0.1
    std_feature: NonNegativeFloat = 0.01
    seed: int = 0


class TrajectorySpec(BaseModel):
    """Perfil analítico de verdad; todas las magnitudes en SI."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    profile: Literal["hover", "circle", "figure8"] = "circle"
    duration: PositiveFloat = 60.0
    radius: PositiveFloat = 2.0
    rate: PositiveFloat = 0.5          # rad/s
    center: Tuple[float, float, float] = (0.0, 0.0, 1.5)
    yaw0: float = 0.8
    tilt: float = 0.2


class LandmarkCondition(NamedTuple):
    eigenvalues: np.ndarray   # λ(M̄) ascendentes
    ok: bool

    @property
    def lam_min(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def lam_max(self) -> float:
        return float(self.eigenvalues[-1])


Frame = List[FeatureObservation]


# ---- Observación y agregados ----
def observe_features(X: NavState, features: Sequence[Feature], noise: NoiseSpec,
                     rng: np.random.Generator | None = None, weight: float = 1.0) -> Frame:
    if not features:
        raise LandmarkError("observe_features: lista de features vacía")
    if rng is None:
        rng = np.random.default_rng(noise.seed)
    p = np.array([f.p_inertial for f in features], dtype=float)
    y = (p - X.P) @ X.R                      # filas: Rᵀ(p_i − P)
    if noise.std_feature > 0.0:
        y = y + rng.normal(0.0, noise.std_feature, size=y.shape)
    return [FeatureObservation(int(f.id), y[i], float(weight)) for i, f in enumerate(features)]


def landmark_condition(M) -> LandmarkCondition:
    M = np.asarray(M, dtype=float)
    Mbar = np.trace(M) * np.eye(3) - M
    eig = np.linalg.eigvalsh(0.5 * (Mbar + Mbar.T))
    return LandmarkCondition(eig, bool(eig[0] > LANDMARK_EIG_TOL))


def _feature_index(features) -> Mapping[int, Feature]:
    if isinstance(features, Mapping):
        return features
    return {int(f.id): f for f in features}


def aggregate(features, observations: Iterable[FeatureObservation],
              R_hat, P_hat) -> Aggregates:
    index = _feature_index(features)
    matched = [(index[o.id].p_inertial, o.y_body, o.s) for o in observations if o.id in index]
    if len(matched) < MIN_FEATURES:
        raise LandmarkError(f"aggregate: {len(matched)} observaciones emparejadas (< {MIN_FEATURES})")

    p = np.array([m[0] for m in matched], dtype=float)
    y = np.array([m[1] for m in matched], dtype=float)
    s = np.array([m[2] for m in matched], dtype=float)
    if np.any(s <= 0.0):
        raise LandmarkError("aggregate: pesos de confianza s_i deben ser > 0")

    R_hat = np.asarray(R_hat, dtype=float)
    P_hat = np.asarray(P_hat, dtype=float)
    s_T = float(s.sum())
    p_c = (s @ p) / s_T
    d = p - p_c
    M = (d * s[:, None]).T @ d
    M = 0.5 * (M + M.T)
    MRt = ((d * s[:, None]).T @ y) @ R_hat.T
    RtPe = (s @ (p - y @ R_hat.T - P_hat)) / s_T

    cond = landmark_condition(M)
    if not cond.ok:
        raise LandmarkError(f"aggregate: landmarks degenerados, λmin(M̄) = {cond.lam_min:.3e}")
    return Aggregates(p_c=p_c, s_T=s_T, M=M, MRt=MRt, RtPe=RtPe, count=len(matched))


def upsilon_bounds(M, R_tilde) -> Tuple[float, float, float]:
    """(cota inferior, ||Υ(MR̃)||², cota superior) de la doble desigualdad de Υ."""
    M = np.asarray(M, dtype=float)
    R_tilde = np.asarray(R_tilde, dtype=float)
    cond = landmark_condition(M)
    dist = 0.25 * float(np.trace(M @ (np.eye(3) - R_tilde)))
    ups = upsilon(M @ R_tilde)
    value = float(ups @ ups)
    lower = 0.5 * cond.lam_min * (1.0 + float(np.trace(R_tilde))) * dist
    upper = 2.0 * cond.lam_max * dist
    return lower, value, upper


def sample_landmarks(count: int, box: float, center, rng: np.random.Generator) -> List[Feature]:
    center = np.asarray(center, dtype=float)
    pts = center + rng.uniform(-0.5 * box, 0.5 * box, size=(count, 3))
    return [Feature(i, pts[i]) for i in range(count)]


# ---- Trayectorias de verdad ----
def _attitude(psi: float, phi: float, psi_dot: float, phi_dot: float) -> Tuple[np.ndarray, np.ndarray]:
    # R = Rz(ψ)·Rx(φ)  =>  Ω = ψ̇·Rx(φ)ᵀ e_z + φ̇·e_x
    R = rot_z(psi) @ rot_x(phi)
    omega = psi_dot * np.array([0.0, np.sin(phi), np.cos(phi)]) + phi_dot * np.array([1.0, 0.0, 0.0])
    return R, omega


def synth_trajectory(t: float, profile: str | TrajectorySpec) -> TruthPoint:
    if t < 0:
        raise ValueError(f"synth_trajectory requiere t >= 0, recibió {t}")
    if isinstance(profile, str):
        if profile not in ("hover", "circle", "figure8"):
            raise ValueError(f"perfil de trayectoria desconocido: {profile!r}")
        spec = TrajectorySpec(profile=profile)
    else:
        spec = profile

    c = np.asarray(spec.center, dtype=float)
    r, w = spec.radius, spec.rate

    if spec.profile == "hover":
        P, V, Vdot = c.copy(), np.zeros(3), np.zeros(3)
        R, omega = _attitude(spec.yaw0, spec.tilt, 0.0, 0.0)
    elif spec.profile == "circle":
        cw, sw = np.cos(w * t), np.sin(w * t)
        P = c + r * np.array([cw, sw, 0.0])
        V = r * w * np.array([-sw, cw, 0.0])
        Vdot = -r * w * w * np.array([cw, sw, 0.0])
        R, omega = _attitude(spec.yaw0 + w * t, spec.tilt, w, 0.0)
    elif spec.profile == "figure8":
        h = 0.25 * r
        s1, c1 = np.sin(w * t), np.cos(w * t)
        s2, c2 = np.sin(2 * w * t), np.cos(2 * w * t)
        P = c + np.array([r * s1, 0.5 * r * s2, h * s1])
        V = w * np.array([r * c1, r * c2, h * c1])
        Vdot = -w * w * np.array([r * s1, 2.0 * r * s2, h * s1])
        psi = spec.yaw0 + 0.5 * s1
        phi = spec.tilt + 0.2 * s2
        R, omega = _attitude(psi, phi, 0.5 * w * c1, 0.4 * w * c2)
    else:
        raise ValueError(f"perfil de trayectoria desconocido: {spec.profile!r}")

    a = R.T @ (Vdot - GRAVITY)
    return TruthPoint(float(t), NavState(R, P, V), omega, a)


def imu_sample(truth: TruthPoint, noise: NoiseSpec,
               rng: np.random.Generator | None = None) -> ImuSample:
    if rng is None:
        rng = np.random.default_rng(noise.seed)
    omega_m = truth.omega.copy()
    a_m = truth.a.copy()
    if noise.std_omega > 0.0:
        omega_m = omega_m + rng.normal(0.0, noise.std_omega, size=3)
    if noise.std_accel > 0.0:
        a_m = a_m + rng.normal(0.0, noise.std_accel, size=3)
    return ImuSample(truth.t, omega_m, a_m)


# ---- CSV ----
def load_imu_csv(path: str | Path) -> List[ImuSample]:
    df = read_table(path, IMU_COLUMNS)
    arr = df.to_numpy()
    return [ImuSample(float(r[0]), r[1:4].copy(), r[4:7].copy()) for r in arr]


def load_features_csv(path: str | Path) -> List[Feature]:
    df = read_table(path, FEATURE_COLUMNS, int_columns=("id",), time_col=None)
    if df["id"].duplicated().any():
        dup = int(df["id"][df["id"].duplicated()].iloc[0])
        raise CsvSchemaError(f"{Path(path).name}: id de feature duplicado: {dup}")
    xyz = df[["px", "py", "pz"]].to_numpy()
    return [Feature(int(i), xyz[k].copy()) for k, i in enumerate(df["id"].to_numpy())]


def load_observations_csv(path: str | Path) -> List[Tuple[float, Frame]]:
    """Frames ordenados por tiempo; filas consecutivas con el mismo t forman un frame."""
    df = read_table(path, OBSERVATION_COLUMNS, int_columns=("id",), strictly_increasing=False)
    if df.empty:
        return []
    if (df["s"] <= 0).any():
        first = int((df["s"] <= 0).to_numpy().nonzero()[0][0])
        raise CsvSchemaError(f"{Path(path).name}: línea {first + 2}: s debe ser > 0")
    frames: List[Tuple[float, Frame]] = []
    for t, grp in df.groupby("t", sort=True):
        y = grp[["yx", "yy", "yz"]].to_numpy()
        obs = [FeatureObservation(int(i), y[k].copy(), float(s))
               for k, (i, s) in enumerate(zip(grp["id"].to_numpy(), grp["s"].to_numpy()))]
        frames.append((float(t), obs))
    return frames


def load_truth_csv(path: str | Path) -> List[TruthPoint]:
    df = read_table(path, TRUTH_COLUMNS)
    out = []
    for r in df.to_numpy():
        q = r[7:11] / np.linalg.norm(r[7:11])
        out.append(TruthPoint(float(r[0]), NavState(quat_to_rot(q), r[1:4].copy(), r[4:7].copy()),
                              np.full(3, np.nan), np.full(3, np.nan)))
    return out


def imu_frame(samples: Sequence[ImuSample]) -> pd.DataFrame:
    if not samples:
        return pd.DataFrame(columns=IMU_COLUMNS)
    data = np.array([np.concatenate(([s.t], s.omega_m, s.a_m)) for s in samples])
    return pd.DataFrame(data, columns=IMU_COLUMNS)


def features_frame(features: Sequence[Feature]) -> pd.DataFrame:
    df = pd.DataFrame([f.p_inertial for f in features], columns=FEATURE_COLUMNS[1:])
    df.insert(0, "id", [int(f.id) for f in features])
    return df


def observations_frame(frames: Sequence[Tuple[float, Frame]]) -> pd.DataFrame:
    rows = [(t, o.id, *o.y_body, o.s) for t, obs in frames for o in obs]
    df = pd.DataFrame(rows, columns=OBSERVATION_COLUMNS)
    return df.astype({"id": np.int64})


def truth_frame(points: Sequence[TruthPoint]) -> pd.DataFrame:
    rows = [np.concatenate(([p.t], p.X.P, p.X.V, rot_to_quat(p.X.R))) for p in points]
    return pd.DataFrame(rows, columns=TRUTH_COLUMNS)


def export_inputs(out_dir: Path, samples, features, frames, truth) -> dict:
    """Escribe los cuatro CSV de entrada que replay necesita para reproducir una corrida."""
    out_dir = Path(out_dir)
    return {
        "imu": str(write_table(imu_frame(samples), out_dir / "imu.csv")),
        "features": str(write_table(features_frame(features), out_dir / "features.csv")),
        "observations": str(write_table(observations_frame(frames), out_dir / "observations.csv")),
        "truth": str(write_table(truth_frame(truth), out_dir / "truth.csv")),
    }


__all__ = [
    "GRAVITY", "Feature", "FeatureObservation", "Aggregates", "ImuSample", "TruthPoint",
    "NoiseSpec", "TrajectorySpec", "LandmarkCondition", "Frame",
    "observe_features", "aggregate", "landmark_condition", "upsilon_bounds", "sample_landmarks",
    "synth_trajectory", "imu_sample", "load_imu_csv", "load_features_csv",
    "load_observations_csv", "load_truth_csv", "export_inputs",
]
