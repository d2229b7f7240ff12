# src/tools/nav_simulate.py
from typing import Any, Dict

from ..nav.harness import emit_report, run_simulate
from ._common import CONFIG_PROPERTIES, build_config, out_dir

tool_spec = {
    "name": "nav_simulate",
    "description": "Corre el filtro SE2(3) sobre una trayectoria sintética y escribe report.csv, "
                   "summary.txt y los CSV de entrada para replay.",
    "input_schema": {
        "type": "object",
        "properties": {**CONFIG_PROPERTIES, "export": {"type": "boolean"}},
    },
    "output_schema": {"type": "object"},
}


def run(args: Dict[str, Any]) -> Dict[str, Any]:
    cfg = build_config(args, "simulate")
    out = out_dir(args, cfg, "simulate")
    export = args.get("export", True)
    report = run_simulate(cfg, export_dir=out if export else None)
    files = {**emit_report(report, out), **report.exported}
    return {
        "meta": {
            "mode": "simulate",
            "seed": cfg.run.seed,
            "profile": cfg.trajectory.profile,
            "form": cfg.filter.form,
            "out": str(out),
            "diverged": report.diverged,
        },
        "summary": report.summary,
        "files": files,
    }
