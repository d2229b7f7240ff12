# src/tools/nav_selftest.py
from dataclasses import asdict
from typing import Any, Dict

from ..nav.selftest import run_selftest

tool_spec = {
    "name": "nav_selftest",
    "description": "Suite de propiedades: axiomas de grupo, vex/skew, distancia de actitud, "
                   "cotas de Υ, transformación PPF, cuaterniones y exponencial.",
    "input_schema": {
        "type": "object",
        "properties": {"seed": {"type": "integer"}},
    },
    "output_schema": {"type": "object"},
}


def run(args: Dict[str, Any]) -> Dict[str, Any]:
    results = run_selftest(int(args.get("seed") or 0))
    failed = [r.name for r in results if not r.ok]
    return {
        "meta": {"checks": len(results), "failed": len(failed)},
        "ok": not failed,
        "failed": failed,
        "checks": [asdict(r) for r in results],
    }
