# src/tools/nav_montecarlo.py
from typing import Any, Dict

from ..nav.harness import emit_monte_carlo, run_monte_carlo_async
from ._common import CONFIG_PROPERTIES, build_config, out_dir

tool_spec = {
    "name": "nav_montecarlo",
    "description": "Monte Carlo del escenario sintético: semillas base+i, estadísticas de error "
                   "cuadrático medio en estado estacionario.",
    "input_schema": {
        "type": "object",
        "properties": {
            **CONFIG_PROPERTIES,
            "trials": {"type": "integer"},
            "workers": {"type": "integer"},
        },
        "required": ["trials"],
    },
    "output_schema": {"type": "object"},
}


async def run(args: Dict[str, Any]) -> Dict[str, Any]:
    cfg = build_config(args, "simulate")
    trials = int(args["trials"])
    out = out_dir(args, cfg, "montecarlo")
    result = await run_monte_carlo_async(cfg, trials, args.get("workers"))
    return {
        "meta": {"trials": trials, "seed": cfg.run.seed, "out": str(out)},
        "summary": result.summary,
        "files": emit_monte_carlo(result, out),
    }
