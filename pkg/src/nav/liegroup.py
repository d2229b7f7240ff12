# src/nav/liegroup.py
# Primitivas de SO(3), SE2(3) y del conjunto tangente U_m. Todo es puro: entra numpy, sale numpy.
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm
from scipy.spatial.transform import Rotation as _ScipyRotation

from .errors import DivergenceError

ANTISYM_TOL = 1e-9
QUAT_NORM_TOL = 1e-6
REORTHO_MAX_DIST = 0.1

_I3 = np.eye(3)


# ---- so(3) ----
def skew(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (3,):
        raise ValueError(f"skew espera un vector de 3 componentes, recibió shape {x.shape}")
    return np.array([
        [0.0, -x[2], x[1]],
        [x[2], 0.0, -x[0]],
        [-x[1], x[0], 0.0],
    ])


def vex(M, tol: float = ANTISYM_TOL) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.shape != (3, 3):
        raise ValueError(f"vex espera una matriz 3x3, recibió shape {M.shape}")
    asym = float(np.abs(M + M.T).max())
    if asym > tol:
        raise ValueError(f"vex: la matriz no es antisimétrica (|M+M^T|max={asym:.3e} > {tol:.1e})")
    return np.array([M[2, 1], M[0, 2], M[1, 0]])


def antisym_project(M) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    return 0.5 * (M - M.T)


def upsilon(M) -> np.ndarray:
    """Υ(M) = vex(Pa(M)). Pa(M) es antisimétrica por construcción, no hace falta tolerancia."""
    A = antisym_project(M)
    return np.array([A[2, 1], A[0, 2], A[1, 0]])


def attitude_distance(R) -> float:
    """||R||_I = ¼ Tr(I - R), en [0, 1] para rotaciones válidas."""
    R = np.asarray(R, dtype=float)
    return 0.25 * float(3.0 - np.trace(R))


def in_unstable_set(R, tol: float = 1e-9) -> bool:
    # Tr R = -1  <=>  error de actitud de exactamente pi
    return abs(float(np.trace(np.asarray(R, dtype=float))) + 1.0) <= tol


def rodrigues(axis, angle: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    n = np.linalg.norm(axis)
    if n == 0.0:
        return _I3.copy()
    K = skew(axis / n)
    return _I3 + np.sin(angle) * K + (1.0 - np.cos(angle)) * (K @ K)


def rot_x(angle: float) -> np.ndarray:
    return rodrigues([1.0, 0.0, 0.0], angle)


def rot_z(angle: float) -> np.ndarray:
    return rodrigues([0.0, 0.0, 1.0], angle)


# ---- SE2(3) ----
@dataclass(frozen=True)
class NavState:
    """Elemento de SE2(3): actitud R, posición P (m) y velocidad V (m/s)."""
    R: np.ndarray
    P: np.ndarray
    V: np.ndarray

    @classmethod
    def identity(cls) -> "NavState":
        return cls(np.eye(3), np.zeros(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, X, tol: float = 1e-9) -> "NavState":
        X = np.asarray(X, dtype=float)
        if X.shape != (5, 5):
            raise ValueError(f"NavState.from_matrix espera 5x5, recibió {X.shape}")
        bottom = X[3:, :]
        expected = np.array([[0, 0, 0, 1, 0], [0, 0, 0, 0, 1]], dtype=float)
        if np.abs(bottom - expected).max() > tol:
            raise ValueError(f"filas inferiores inválidas para SE2(3): {bottom.tolist()}")
        return cls(X[:3, :3].copy(), X[:3, 3].copy(), X[:3, 4].copy())

    def matrix(self) -> np.ndarray:
        X = np.eye(5)
        X[:3, :3] = self.R
        X[:3, 3] = self.P
        X[:3, 4] = self.V
        return X


@dataclass(frozen=True)
class TangentElement:
    """u([Ω]x, V, a, κ) ∈ U_m."""
    omega: np.ndarray
    v_slot: np.ndarray
    a_slot: np.ndarray
    kappa: float = 0.0

    def matrix(self) -> np.ndarray:
        U = np.zeros((5, 5))
        U[:3, :3] = skew(self.omega)
        U[:3, 3] = self.v_slot
        U[:3, 4] = self.a_slot
        U[4, 3] = self.kappa
        return U

    def __neg__(self) -> "TangentElement":
        return TangentElement(-np.asarray(self.omega), -np.asarray(self.v_slot),
                              -np.asarray(self.a_slot), -self.kappa)


def nav_compose(A: NavState, B: NavState) -> NavState:
    return NavState(A.R @ B.R, A.R @ B.P + A.P, A.R @ B.V + A.V)


def nav_inverse(X: NavState) -> NavState:
    Rt = X.R.T
    return NavState(Rt, -Rt @ X.P, -Rt @ X.V)


def exp_um(U: TangentElement, dt: float) -> np.ndarray:
    """exp(U·dt) sobre el embebido 5x5 (no siempre pertenece a SE2(3): κ≠0 deja la fila 5 abierta)."""
    if dt < 0:
        raise ValueError(f"exp_um requiere dt >= 0, recibió {dt}")
    A = U.matrix() * dt
    if not np.any(A[:3, :3]):
        # parte de rotación nula: A es nilpotente (A^3 = 0), la serie termina
        return np.eye(5) + A + 0.5 * (A @ A)
    return expm(A)


# ---- Cuaterniones (Hamilton, escalar primero) ----
def quat_multiply(q1, q2) -> np.ndarray:
    a0, a = q1[0], np.asarray(q1[1:], dtype=float)
    b0, b = q2[0], np.asarray(q2[1:], dtype=float)
    return np.concatenate(([a0 * b0 - a @ b], a0 * b + b0 * a + np.cross(a, b)))


def quat_to_rot(Q, tol: float = QUAT_NORM_TOL) -> np.ndarray:
    Q = np.asarray(Q, dtype=float)
    if Q.shape != (4,):
        raise ValueError(f"quat_to_rot espera 4 componentes, recibió shape {Q.shape}")
    norm = float(np.linalg.norm(Q))
    if abs(norm - 1.0) > tol:
        raise ValueError(f"cuaternión no unitario (|Q| = {norm:.9f})")
    q0, q = Q[0], Q[1:]
    return (q0 * q0 - q @ q) * _I3 + 2.0 * np.outer(q, q) + 2.0 * q0 * skew(q)


def canonical_quat(Q) -> np.ndarray:
    """Representante con q0 >= 0; si q0 == 0, la primera componente no nula del vector es positiva."""
    Q = np.asarray(Q, dtype=float).copy()
    if Q[0] < 0.0:
        Q = -Q
    elif Q[0] == 0.0:
        nz = np.flatnonzero(Q[1:])
        if nz.size and Q[1 + nz[0]] < 0.0:
            Q = -Q
    return Q


def rot_to_quat(R) -> np.ndarray:
    x, y, z, w = _ScipyRotation.from_matrix(np.asarray(R, dtype=float)).as_quat()
    Q = np.array([w, x, y, z])
    return canonical_quat(Q / np.linalg.norm(Q))


def quat_exp(phi) -> np.ndarray:
    """Cuaternión de la rotación exp([phi]x)."""
    phi = np.asarray(phi, dtype=float)
    theta = float(np.linalg.norm(phi))
    half = 0.5 * theta
    if theta < 1e-8:
        # sin(x/2)/x ≈ 1/2 - x²/48
        k = 0.5 - theta * theta / 48.0
    else:
        k = np.sin(half) / theta
    return np.concatenate(([np.cos(half)], k * phi))


# ---- Control de deriva numérica ----
def reorthonormalize(R, max_dist: float = REORTHO_MAX_DIST) -> np.ndarray:
    R = np.asarray(R, dtype=float)
    if not np.all(np.isfinite(R)):
        raise DivergenceError("reorthonormalize: la matriz contiene valores no finitos")
    U, _, Vt = np.linalg.svd(R)
    D = np.eye(3)
    D[2, 2] = np.sign(np.linalg.det(U @ Vt)) or 1.0
    Rn = U @ D @ Vt
    dist = float(np.linalg.norm(R - Rn))
    if dist > max_dist:
        raise DivergenceError(f"reorthonormalize: distancia a SO(3) {dist:.3e} > {max_dist}")
    return Rn
