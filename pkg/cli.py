#!/usr/bin/env python3
# cli.py : Harness de línea de comandos del filtro SE2(3)
#           simulate | replay | montecarlo | selftest

import argparse
import sys
import time
from pathlib import Path
from typing import List, Optional

from dotenv import load_dotenv

PROJ_ROOT = Path(__file__).resolve().parent
if str(PROJ_ROOT) not in sys.path:
    sys.path.insert(0, str(PROJ_ROOT))

from src import config
from src.nav.errors import CsvSchemaError, NavConfigError
from src.nav.harness import (
    emit_monte_carlo, emit_report, run_monte_carlo, run_replay, run_simulate,
)
from src.nav.selftest import run_selftest
from src.nav.settings import RunConfig, load_config
from src.util.eventlog import log_event, status

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DIVERGED = 2
EXIT_IO = 3
EXIT_SELFTEST = 4


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="se23-nav", description="Filtro de navegación SE2(3) con desempeño prescrito")
    sub = p.add_subparsers(dest="verb", required=True)

    def common(sp: argparse.ArgumentParser):
        sp.add_argument("--config", help="archivo key=value (seccion.clave=valor)")
        sp.add_argument("--seed", type=int, help="semilla base (run.seed)")
        sp.add_argument("--out", help="directorio de salida (default: reports/<verbo>-<seed>)")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override de configuración, repetible")

    common(sub.add_parser("simulate", help="trayectoria sintética + filtro"))
    common(sub.add_parser("replay", help="filtro sobre CSV grabados"))
    mc = sub.add_parser("montecarlo", help="lote de simulaciones con semillas base+i")
    common(mc)
    mc.add_argument("--trials", type=int, default=50)
    mc.add_argument("--workers", type=int, default=None)
    st = sub.add_parser("selftest", help="suite de propiedades")
    st.add_argument("--seed", type=int, default=0)
    return p


def _config(args, mode: str) -> RunConfig:
    overrides: List[str] = [f"run.mode={mode}", *args.set]
    if args.seed is not None:
        overrides.append(f"run.seed={args.seed}")
    return load_config(args.config, overrides)


def _out(args, cfg: RunConfig, verb: str) -> Path:
    out = Path(args.out or cfg.run.out or (config.REPORTS_DIR / f"{verb}-{cfg.run.seed}"))
    out.mkdir(parents=True, exist_ok=True)
    return out


def _print_summary(summary: dict):
    for k, v in summary.items():
        print(f"{k}={v}")


def cmd_run(args) -> int:
    cfg = _config(args, args.verb)
    out = _out(args, cfg, args.verb)
    if args.verb == "simulate":
        report = run_simulate(cfg, export_dir=out)
    else:
        report = run_replay(cfg)
    files = emit_report(report, out)
    _print_summary(report.summary)
    status(f"reporte en {files['report']}")
    if report.diverged:
        status(f"divergencia: {report.summary.get('divergence_reason', '')}")
        return EXIT_DIVERGED
    return EXIT_OK


def cmd_montecarlo(args) -> int:
    cfg = _config(args, "simulate")
    out = _out(args, cfg, "montecarlo")
    result = run_monte_carlo(cfg, args.trials, args.workers)
    files = emit_monte_carlo(result, out)
    _print_summary(result.summary)
    status(f"montecarlo en {files['trials']}")
    return EXIT_OK


def cmd_selftest(args) -> int:
    t0 = time.perf_counter()
    results = run_selftest(args.seed)
    for r in results:
        print(f"{'PASS' if r.ok else 'FAIL'} {r.name}: {r.detail} ({r.duration_ms} ms)")
    failed = [r.name for r in results if not r.ok]
    log_event({"event": "selftest", "failed": failed,
               "duration_ms": round((time.perf_counter() - t0) * 1000, 3)})
    return EXIT_SELFTEST if failed else EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv()
    args = build_parser().parse_args(argv)
    try:
        if args.verb in ("simulate", "replay"):
            return cmd_run(args)
        if args.verb == "montecarlo":
            return cmd_montecarlo(args)
        return cmd_selftest(args)
    except NavConfigError as e:
        status(f"error de configuración: {e}")
        return EXIT_CONFIG
    except (CsvSchemaError, OSError) as e:
        status(f"error de E/S: {e}")
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
