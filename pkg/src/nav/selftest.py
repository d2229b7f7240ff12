# src/nav/selftest.py
# Suite de propiedades que corre dentro del proceso (verbo `selftest`).
from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, List, Tuple

import numpy as np
from scipy.spatial.transform import Rotation

from .liegroup import (
    NavState, TangentElement, attitude_distance, exp_um, nav_compose, nav_inverse,
    quat_multiply, quat_to_rot, skew, vex,
)
from .measurements import landmark_condition, upsilon_bounds
from .ppf import sensitivity_fd, smooth_map, transform

UPSILON_INSTANCES = 1000


@dataclass(frozen=True)
class CheckResult:
    name: str
    ok: bool
    detail: str
    duration_ms: float


def _random_state(rng: np.random.Generator) -> NavState:
    R = Rotation.random(random_state=rng).as_matrix()
    return NavState(R, rng.normal(size=3), rng.normal(size=3))


def _close(A: NavState, B: NavState) -> float:
    return max(float(np.abs(A.R - B.R).max()), float(np.abs(A.P - B.P).max()),
               float(np.abs(A.V - B.V).max()))


def check_group_axioms(rng) -> Tuple[bool, str]:
    worst = 0.0
    for _ in range(100):
        A, B, C = (_random_state(rng) for _ in range(3))
        worst = max(worst,
                    _close(nav_compose(nav_compose(A, B), C), nav_compose(A, nav_compose(B, C))),
                    _close(nav_compose(A, nav_inverse(A)), NavState.identity()),
                    _close(nav_compose(A, NavState.identity()), A))
    return worst < 1e-12, f"max dif = {worst:.2e}"


def check_vex_skew(rng) -> Tuple[bool, str]:
    worst = 0.0
    for _ in range(100):
        x = rng.normal(size=3)
        S = skew(x)
        worst = max(worst, float(np.abs(vex(S) - x).max()), float(np.abs(skew(vex(S)) - S).max()))
    return worst < 1e-15, f"max dif = {worst:.2e}"


def check_attitude_distance(rng) -> Tuple[bool, str]:
    worst = 0.0
    for _ in range(100):
        R = Rotation.random(random_state=rng).as_matrix()
        d = attitude_distance(R)
        worst = max(worst, abs(d - 0.125 * float(np.linalg.norm(np.eye(3) - R) ** 2)))
    return worst < 1e-12, f"max dif = {worst:.2e}"


def check_upsilon_bounds(rng) -> Tuple[bool, str]:
    fails = 0
    done = 0
    while done < UPSILON_INSTANCES:
        n = int(rng.integers(3, 12))
        p = rng.normal(scale=2.0, size=(n, 3))
        s = rng.uniform(0.1, 1.0, size=n)
        pc = (s @ p) / s.sum()
        d = p - pc
        M = (d * s[:, None]).T @ d
        if not landmark_condition(M).ok:
            continue
        Rt = Rotation.random(random_state=rng).as_matrix()
        if np.trace(Rt) <= -1.0 + 1e-9:
            continue
        lo, val, hi = upsilon_bounds(M, Rt)
        slack = 1e-9 * max(1.0, hi)
        fails += int(not (lo - slack <= val <= hi + slack))
        done += 1
    return fails == 0, f"{fails}/{UPSILON_INSTANCES} instancias fuera de cota"


def check_ppf(rng) -> Tuple[bool, str]:
    worst_rt, worst_d = 0.0, 0.0
    for _ in range(200):
        delta = rng.uniform(0.5, 3.0)
        xi = rng.uniform(0.05, 2.0)
        e = rng.uniform(-0.95, 0.95) * delta * xi
        ev = transform([e], [xi], [delta], [1.0])
        worst_rt = max(worst_rt, abs(float(smooth_map(ev.E[0], delta)) - e / xi))
        fd = sensitivity_fd(e, xi, delta, h=1e-6 * xi)
        worst_d = max(worst_d, abs(fd - ev.Delta[0]) / abs(ev.Delta[0]))
    ok = worst_rt < 1e-12 and worst_d < 1e-5
    return ok, f"ida/vuelta {worst_rt:.2e}, derivada rel {worst_d:.2e}"


def check_quaternion(rng) -> Tuple[bool, str]:
    worst = 0.0
    for _ in range(100):
        q1 = rng.normal(size=4)
        q2 = rng.normal(size=4)
        q1 /= np.linalg.norm(q1)
        q2 /= np.linalg.norm(q2)
        lhs = quat_to_rot(quat_multiply(q1, q2))
        worst = max(worst, float(np.abs(lhs - quat_to_rot(q1) @ quat_to_rot(q2)).max()))
    return worst < 1e-12, f"max dif = {worst:.2e}"


def check_exp_subgroup(rng) -> Tuple[bool, str]:
    worst = 0.0
    for _ in range(50):
        U = TangentElement(rng.normal(size=3), rng.normal(size=3), rng.normal(size=3), float(rng.normal()))
        s, t = rng.uniform(0.0, 0.5, size=2)
        lhs = exp_um(U, s + t)
        worst = max(worst, float(np.abs(lhs - exp_um(U, s) @ exp_um(U, t)).max()))
    return worst < 1e-10, f"max dif = {worst:.2e}"


CHECKS: List[Tuple[str, Callable[[np.random.Generator], Tuple[bool, str]]]] = [
    ("group_axioms", check_group_axioms),
    ("vex_skew", check_vex_skew),
    ("attitude_distance", check_attitude_distance),
    ("upsilon_bounds", check_upsilon_bounds),
    ("ppf_transform", check_ppf),
    ("quaternion_homomorphism", check_quaternion),
    ("exp_subgroup", check_exp_subgroup),
]


def run_selftest(seed: int = 0) -> List[CheckResult]:
    rng = np.random.default_rng(seed)
    out: List[CheckResult] = []
    for name, fn in CHECKS:
        t0 = time.perf_counter()
        try:
            ok, detail = fn(rng)
        except Exception as e:
            ok, detail = False, f"{type(e).__name__}: {e}"
        out.append(CheckResult(name, bool(ok), detail, round((time.perf_counter() - t0) * 1000, 3)))
    return out
