# src/tools/nav_replay.py
from typing import Any, Dict

from ..nav.harness import emit_report, run_replay
from ..sandbox import must_be_allowed
from ._common import CONFIG_PROPERTIES, build_config, out_dir

tool_spec = {
    "name": "nav_replay",
    "description": "Corre el filtro SE2(3) sobre CSV grabados (imu, features, observations y truth opcional).",
    "input_schema": {
        "type": "object",
        "properties": {
            **CONFIG_PROPERTIES,
            "imu": {"type": "string"},
            "features": {"type": "string"},
            "observations": {"type": "string"},
            "truth": {"type": "string"},
        },
    },
    "output_schema": {"type": "object"},
}


def run(args: Dict[str, Any]) -> Dict[str, Any]:
    extra = []
    for key in ("imu", "features", "observations", "truth"):
        if args.get(key):
            extra.append(f"replay.{key}={must_be_allowed(args[key])}")
    cfg = build_config({**args, "set": [*(args.get("set") or []), *extra]}, "replay")
    for key in ("imu", "features", "observations", "truth"):
        value = getattr(cfg.replay, key)
        if value is not None:
            must_be_allowed(value)

    out = out_dir(args, cfg, "replay")
    report = run_replay(cfg)
    return {
        "meta": {
            "mode": "replay",
            "out": str(out),
            "diverged": report.diverged,
            "frames_skipped": report.summary.get("frames_skipped", 0),
        },
        "summary": report.summary,
        "files": emit_report(report, out),
    }
