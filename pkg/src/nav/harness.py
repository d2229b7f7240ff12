# src/nav/harness.py
# Drivers de simulación y replay, Monte Carlo, métricas de error y emisión de reportes.
from __future__ import annotations

import asyncio
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.spatial.transform import Rotation

from .. import config
from ..util.eventlog import log_event, status
from ..util.io import write_key_values, write_table
from .errors import DivergenceError, NavConfigError
from .filter import FilterState, QuatFilterState, quat_step_with_info, step_with_info
from .liegroup import NavState, attitude_distance, in_unstable_set, rot_to_quat
from .measurements import (
    Feature, Frame, ImuSample, TruthPoint, export_inputs, imu_sample, load_features_csv,
    load_imu_csv, load_observations_csv, load_truth_csv, observe_features, sample_landmarks,
    synth_trajectory,
)
from .ppf import PpfConfig, xi_at
from .settings import RunConfig

REPORT_COLUMNS = ["t", "e1", "e2", "e3", "e4", "xi1", "xi2", "xi3", "xi4",
                  "att_err", "pos_err", "vel_err", "sig1", "sig2", "sig3", "inflated"]
SUMMARY_KEYS = ["steady_att_mse", "steady_pos_mse", "steady_vel_mse", "inflation_count",
                "diverged", "wall_ms"]
INFLATION_GRACE = 1.0   # s; las inflaciones tempranas se reportan aparte
THIRDS_BATCHES = 10     # lotes por tercio para el error estándar de la media
THIRDS_SE_FACTOR = 2.0  # margen admitido, en errores estándar de la diferencia


# ---- Tipos ----
@dataclass(frozen=True)
class Scenario:
    """Entradas de una corrida alineadas a la grilla IMU: paso k cubre (times[k-1], times[k]]."""
    times: np.ndarray
    samples: List[ImuSample]
    frames: Dict[int, Frame]
    features: List[Feature]
    truth: List[Optional[NavState]]
    frames_skipped: int = 0


@dataclass
class RunReport:
    records: pd.DataFrame
    summary: Dict[str, Any]
    exported: Dict[str, str] = field(default_factory=dict)
    ppf: Optional[PpfConfig] = None      # envolvente efectiva (auto ya resuelto)

    @property
    def diverged(self) -> bool:
        return bool(self.summary.get("diverged", 0))


@dataclass
class MonteCarloResult:
    trials: pd.DataFrame
    summary: Dict[str, Any]


# ---- Escenarios ----
def _streams(cfg: RunConfig) -> Tuple[np.random.Generator, np.random.Generator, np.random.Generator]:
    lm, imu, feat = np.random.SeedSequence(cfg.run.seed).spawn(3)
    if cfg.landmarks.seed is not None:
        lm = np.random.SeedSequence(cfg.landmarks.seed)
    return np.random.default_rng(lm), np.random.default_rng(imu), np.random.default_rng(feat)


def build_synthetic(cfg: RunConfig) -> Tuple[Scenario, List[TruthPoint]]:
    rng_lm, rng_imu, rng_feat = _streams(cfg)
    n = cfg.steps
    if n < 1:
        raise NavConfigError(f"trajectory.duration·rates.imu debe dar al menos un paso, da {n}")
    times = np.arange(n + 1) / cfg.rates.imu
    noise = cfg.noise.spec(cfg.run.seed)
    weight = cfg.landmarks.resolved_weight
    features = sample_landmarks(cfg.landmarks.count, cfg.landmarks.box, cfg.trajectory.center, rng_lm)

    truth_pts = [synth_trajectory(float(t), cfg.trajectory) for t in times]
    samples, frames = [], {}
    for k in range(1, n + 1):
        samples.append(imu_sample(truth_pts[k], noise, rng_imu))
        if k % cfg.rates.ratio == 0:
            frames[k] = observe_features(truth_pts[k].X, features, noise, rng_feat, weight)
    scenario = Scenario(times, samples, frames, features, [p.X for p in truth_pts])
    return scenario, truth_pts


def _nearest(times: np.ndarray, t: float) -> int:
    i = int(np.searchsorted(times, t))
    if i <= 0:
        return 0
    if i >= len(times):
        return len(times) - 1
    return i if abs(times[i] - t) < abs(t - times[i - 1]) else i - 1


def build_replay(cfg: RunConfig) -> Scenario:
    rp = cfg.replay
    samples = load_imu_csv(rp.imu)
    if not samples:
        raise NavConfigError(f"replay.imu sin muestras: {rp.imu}")
    features = load_features_csv(rp.features)
    observed = load_observations_csv(rp.observations)

    stamps = np.array([s.t for s in samples])
    if rp.t0 is not None:
        t0 = float(rp.t0)
    elif len(stamps) >= 2:
        t0 = stamps[0] - (stamps[1] - stamps[0])
    else:
        raise NavConfigError("replay.t0=auto necesita al menos dos muestras IMU")
    if t0 >= stamps[0]:
        raise NavConfigError(f"replay.t0 ({t0}) debe ser anterior a la primera muestra ({stamps[0]})")
    times = np.concatenate(([t0], stamps))
    dts = np.diff(times)

    frames: Dict[int, Frame] = {}
    skipped = 0
    for tf, obs in observed:
        k = _nearest(times, tf)
        half = 0.5 * dts[max(k, 1) - 1]
        if k == 0 or abs(times[k] - tf) > half:
            skipped += 1
            status(f"frame t={tf:.6f} sin muestra IMU a menos de dt/2; se descarta")
            log_event({"event": "frame_skipped", "t": tf, "nearest_imu_t": times[k],
                       "offset": abs(times[k] - tf)})
            continue
        frames[k] = obs

    truth: List[Optional[NavState]] = [None] * len(times)
    if rp.truth is not None:
        for p in load_truth_csv(rp.truth):
            k = _nearest(times, p.t)
            half = 0.5 * dts[max(k, 1) - 1]
            if abs(times[k] - p.t) <= half:
                truth[k] = p.X
    return Scenario(times, samples, frames, features, truth, skipped)


def initial_estimate(cfg: RunConfig, truth0: Optional[NavState]) -> NavState:
    ini = cfg.initial
    if ini.perfect:
        if truth0 is None:
            raise NavConfigError("initial.perfect=true requiere verdad en t0")
        return NavState(truth0.R.copy(), truth0.P.copy(), truth0.V.copy())
    R0 = Rotation.from_rotvec(np.asarray(ini.rotvec, dtype=float)).as_matrix()
    X0 = NavState(R0, np.asarray(ini.position, dtype=float), np.asarray(ini.velocity, dtype=float))
    if truth0 is not None and in_unstable_set(truth0.R @ X0.R.T):
        raise NavConfigError("la estimación inicial cae en el conjunto inestable (Tr R̃(0) = -1)")
    return X0


# ---- Métricas ----
def _popcount(mask: int) -> int:
    return bin(int(mask)).count("1")


def _mean(x: np.ndarray) -> float:
    x = x[np.isfinite(x)]
    return float(x.mean()) if x.size else float("nan")


def _batch_se(x: np.ndarray) -> float:
    # medias por lotes: e1² está autocorrelado paso a paso
    b = min(THIRDS_BATCHES, x.size)
    if b < 2:
        return 0.0
    means = np.array([c.mean() for c in np.array_split(x, b)])
    return float(means.std(ddof=1) / np.sqrt(b))


def _thirds_flags(e1: np.ndarray) -> Tuple[int, int]:
    """(estricto, con margen) para e1² medio no creciente entre tercios de la corrida.

    El flag con margen acepta un aumento de hasta THIRDS_SE_FACTOR errores estándar
    de la diferencia entre tercios consecutivos.
    """
    if e1.size < 3:
        return 0, 0
    chunks = [c * c for c in np.array_split(e1, 3)]
    ms = [float(c.mean()) for c in chunks]
    se = [_batch_se(c) for c in chunks]
    strict = ms[1] <= ms[0] and ms[2] <= ms[1]
    tolerant = all(
        ms[i + 1] <= ms[i] + THIRDS_SE_FACTOR * float(np.hypot(se[i], se[i + 1]))
        for i in range(2)
    )
    return int(strict), int(tolerant)


def steady_metrics(records: pd.DataFrame, steady_fraction: float, t_start: float = 0.0) -> Dict[str, Any]:
    """Métricas de estado estacionario sobre la fracción final de los registros."""
    n = len(records)
    win = records.iloc[n - max(1, int(round(steady_fraction * n))):] if n else records
    att = win["att_err"].to_numpy(dtype=float)
    pos = win["pos_err"].to_numpy(dtype=float)
    vel = win["vel_err"].to_numpy(dtype=float)
    e1_win = win["e1"].to_numpy(dtype=float)
    e1_win = e1_win[np.isfinite(e1_win)]

    e1_all = records["e1"].to_numpy(dtype=float)
    e1_all = e1_all[np.isfinite(e1_all)]
    thirds_ok, thirds_se_ok = _thirds_flags(e1_all)

    masks = records["inflated"].to_numpy(dtype=np.int64) if n else np.zeros(0, dtype=np.int64)
    tt = records["t"].to_numpy(dtype=float) if n else np.zeros(0)
    late = masks[(tt - t_start) > INFLATION_GRACE]
    return {
        "steady_att_mse": _mean(att * att),
        "steady_pos_mse": _mean(pos * pos),
        "steady_vel_mse": _mean(vel * vel),
        "inflation_count": int(sum(_popcount(m) for m in masks)),
        "steady_att_mean": _mean(att),
        "steady_pos_mean": _mean(pos),
        "steady_vel_mean": _mean(vel),
        "steady_e1_mean": float(e1_win.mean()) if e1_win.size else float("nan"),
        "steady_e1_ms": float(np.mean(e1_win * e1_win)) if e1_win.size else float("nan"),
        "e1_thirds_nonincreasing": thirds_ok,
        "e1_thirds_nonincreasing_se": thirds_se_ok,
        "inflations_after_1s": int(sum(_popcount(m) for m in late)),
        "records": n,
        "updates": int(np.isfinite(records["e1"].to_numpy(dtype=float)).sum()) if n else 0,
    }


# ---- Driver común ----
def _drive(cfg: RunConfig, scenario: Scenario, X0: NavState) -> RunReport:
    t_wall = time.perf_counter()
    times = scenario.times
    t_start = float(times[0])
    limit = cfg.run.divergence_limit
    quat = cfg.filter.form == "quaternion"
    if quat:
        state: Any = QuatFilterState(rot_to_quat(X0.R), X0.P.copy(), X0.V.copy(), np.zeros(3))
        stepper = quat_step_with_info
    else:
        state = FilterState(X0, np.zeros(3))
        stepper = step_with_info
    ppf_cfg = cfg.ppf
    index = {f.id: f for f in scenario.features}

    rows: List[List[float]] = []
    diverged, reason = 0, ""
    for k in range(1, len(times)):
        t = float(times[k])
        dt = float(times[k] - times[k - 1])
        t_rel = t - t_start
        try:
            state, info = stepper(state, scenario.samples[k - 1], scenario.frames.get(k), index,
                                  ppf_cfg, cfg.gains, t_rel, dt, limit)
        except DivergenceError as e:
            diverged, reason = 1, str(e)
            break
        if info.ppf_cfg is not None:
            ppf_cfg = info.ppf_cfg
        X = state.nav_state() if quat else state.X_hat

        if info.ppf is not None:
            e, xi, mask = info.ppf.e, info.ppf.xi, info.ppf.inflation_mask
        else:
            e = np.full(4, np.nan)
            xi = xi_at(ppf_cfg, t_rel) if ppf_cfg.resolved else np.full(4, np.nan)
            mask = 0

        truth = scenario.truth[k]
        if truth is not None:
            errs = [attitude_distance(truth.R @ X.R.T),
                    float(np.linalg.norm(truth.P - X.P)), float(np.linalg.norm(truth.V - X.V))]
        else:
            errs = [np.nan, np.nan, np.nan]

        finite = bool(np.all(np.isfinite(X.P)) and np.all(np.isfinite(X.V)))
        if not finite or (truth is not None and max(errs[1], errs[2]) > limit):
            diverged, reason = 1, f"error de estado fuera de rango en t={t:.4f}"
            break
        rows.append([t, *e, *xi, *errs, *state.sigma_hat, mask])

    records = pd.DataFrame(rows, columns=REPORT_COLUMNS)
    records["inflated"] = records["inflated"].astype(np.int64)

    summary = steady_metrics(records, cfg.run.steady_fraction, t_start)
    summary["diverged"] = diverged
    summary["frames_skipped"] = scenario.frames_skipped
    summary["wall_ms"] = round((time.perf_counter() - t_wall) * 1000.0, 3)
    if diverged:
        summary["divergence_reason"] = reason
    return RunReport(records, summary, ppf=ppf_cfg)


def _order_summary(summary: Dict[str, Any]) -> Dict[str, Any]:
    head = {k: summary[k] for k in SUMMARY_KEYS if k in summary}
    return {**head, **{k: v for k, v in summary.items() if k not in head}}


def _finish(cfg: RunConfig, report: RunReport, mode: str) -> RunReport:
    report.summary = _order_summary(report.summary)
    if report.diverged:
        log_event({"event": "divergence", "mode": mode, "seed": cfg.run.seed,
                   "records": report.summary["records"], "reason": report.summary.get("divergence_reason")})
    log_event({"event": "run_end", "mode": mode, "seed": cfg.run.seed, **report.summary})
    return report


# ---- Operaciones públicas ----
def run_simulate(cfg: RunConfig, export_dir: str | Path | None = None, log: bool = True) -> RunReport:
    if log:
        log_event({"event": "run_start", "mode": "simulate", "seed": cfg.run.seed,
                   "profile": cfg.trajectory.profile, "form": cfg.filter.form, "steps": cfg.steps})
    scenario, truth_pts = build_synthetic(cfg)
    X0 = initial_estimate(cfg, scenario.truth[0])
    report = _drive(cfg, scenario, X0)
    if export_dir is not None:
        frames = [(float(scenario.times[k]), obs) for k, obs in sorted(scenario.frames.items())]
        report.exported = export_inputs(Path(export_dir), scenario.samples, scenario.features,
                                        frames, truth_pts)
    if not log:
        report.summary = _order_summary(report.summary)
        return report
    return _finish(cfg, report, "simulate")


def run_replay(cfg: RunConfig) -> RunReport:
    log_event({"event": "run_start", "mode": "replay", "imu": cfg.replay.imu,
               "observations": cfg.replay.observations, "truth": cfg.replay.truth})
    scenario = build_replay(cfg)
    X0 = initial_estimate(cfg, scenario.truth[0])
    report = _drive(cfg, scenario, X0)
    return _finish(cfg, report, "replay")


def emit_report(report: RunReport, out_dir: str | Path) -> Dict[str, str]:
    out = Path(out_dir)
    csv_path = write_table(report.records, out / "report.csv")
    summary_path = write_key_values(report.summary, out / "summary.txt")
    return {"report": str(csv_path), "summary": str(summary_path)}


def load_report(path: str | Path) -> pd.DataFrame:
    df = pd.read_csv(path, float_precision="round_trip")
    missing = [c for c in REPORT_COLUMNS if c not in df.columns]
    if missing:
        raise ValueError(f"{Path(path).name}: faltan columnas de reporte: {missing}")
    return df


# ---- Monte Carlo ----
def _trial(cfg: RunConfig, seed: int) -> Dict[str, Any]:
    report = run_simulate(cfg.with_seed(seed), log=False)
    return {"seed": seed, **{k: v for k, v in report.summary.items() if k != "wall_ms"}}


async def run_monte_carlo_async(cfg: RunConfig, trials: int, workers: int | None = None) -> MonteCarloResult:
    if trials < 1:
        raise NavConfigError(f"montecarlo requiere trials >= 1, recibió {trials}")
    t_wall = time.perf_counter()
    seeds = [cfg.run.seed + i for i in range(trials)]
    log_event({"event": "run_start", "mode": "montecarlo", "seed": cfg.run.seed, "trials": trials})

    loop = asyncio.get_running_loop()
    # cada trial en su proceso; _trial no escribe log
    with ProcessPoolExecutor(max_workers=workers or config.MC_WORKERS) as pool:
        futures = [loop.run_in_executor(pool, _trial, cfg, s) for s in seeds]
        rows = await asyncio.gather(*futures)

    for row in rows:
        log_event({"event": "trial_done", **row})
    df = pd.DataFrame(rows)
    summary = monte_carlo_summary(df, float(cfg.ppf.xi_inf[0]))
    summary["wall_ms"] = round((time.perf_counter() - t_wall) * 1000.0, 3)
    log_event({"event": "run_end", "mode": "montecarlo", **summary})
    return MonteCarloResult(df, summary)


def run_monte_carlo(cfg: RunConfig, trials: int, workers: int | None = None) -> MonteCarloResult:
    return asyncio.run(run_monte_carlo_async(cfg, trials, workers))


def monte_carlo_summary(df: pd.DataFrame, xi_inf_att: float, bound_factor: float = 1.5) -> Dict[str, Any]:
    ok = df["diverged"] == 0
    out: Dict[str, Any] = {"trials": int(len(df)), "diverged_trials": int((~ok).sum())}
    for key in ("steady_att_mse", "steady_pos_mse", "steady_vel_mse", "steady_e1_ms"):
        vals = df.loc[ok, key].to_numpy(dtype=float)
        vals = vals[np.isfinite(vals)]
        out[f"mean_{key}"] = float(vals.mean()) if vals.size else float("nan")
        out[f"max_{key}"] = float(vals.max()) if vals.size else float("nan")
    bound = bound_factor * xi_inf_att ** 2
    e1_ms = df["steady_e1_ms"].to_numpy(dtype=float)
    out["e1_ms_bound"] = bound
    out["frac_e1_ms_bound"] = float(np.mean(ok.to_numpy() & (e1_ms < bound)))
    out["frac_thirds_nonincreasing"] = float(np.mean(ok.to_numpy() & (df["e1_thirds_nonincreasing"] == 1)))
    out["frac_thirds_nonincreasing_se"] = float(
        np.mean(ok.to_numpy() & (df["e1_thirds_nonincreasing_se"] == 1)))
    return out


def emit_monte_carlo(result: MonteCarloResult, out_dir: str | Path) -> Dict[str, str]:
    out = Path(out_dir)
    return {
        "trials": str(write_table(result.trials, out / "montecarlo.csv")),
        "summary": str(write_key_values(result.summary, out / "summary.txt")),
    }


__all__ = [
    "REPORT_COLUMNS", "Scenario", "RunReport", "MonteCarloResult",
    "build_synthetic", "build_replay", "initial_estimate", "steady_metrics",
    "run_simulate", "run_replay", "emit_report", "load_report",
    "run_monte_carlo", "run_monte_carlo_async", "monte_carlo_summary", "emit_monte_carlo",
]
