# src/tools/report_profile.py
from typing import Any, Dict

import numpy as np
import pandas as pd

from ..nav.harness import load_report, steady_metrics
from ..sandbox import guard_size, must_be_allowed

tool_spec = {
    "name": "report_profile",
    "description": "Perfilado de un report.csv existente: métricas de estado estacionario, "
                   "contención en la envolvente y estadísticas por columna.",
    "input_schema": {
        "type": "object",
        "properties": {
            "path": {"type": "string"},
            "steady_fraction": {"type": "number"},
            "delta": {"type": "array", "items": {"type": "number"}},   # δ por componente
            "limit_rows": {"type": "integer"},
        },
        "required": ["path"]
    },
    "output_schema": {"type": "object"}
}


def _envelope(df: pd.DataFrame, delta) -> Dict[str, Any]:
    """Filas de actualización donde |e_i| >= δ_i·ξ_i (post guarda debería ser 0)."""
    e = df[["e1", "e2", "e3", "e4"]].to_numpy(dtype=float)
    xi = df[["xi1", "xi2", "xi3", "xi4"]].to_numpy(dtype=float)
    upd = np.isfinite(e).all(axis=1)
    out = np.abs(e[upd]) >= np.asarray(delta, dtype=float) * xi[upd]
    return {
        "update_rows": int(upd.sum()),
        "violations": int(out.any(axis=1).sum()),
        "per_component": out.sum(axis=0).astype(int).tolist(),
    }


def run(args: Dict[str, Any]) -> Dict[str, Any]:
    p = must_be_allowed(args["path"])
    if not p.exists():
        raise FileNotFoundError(f"No existe el archivo: {p}")
    guard_size(p.read_bytes())

    df = load_report(p)
    limit_rows = args.get("limit_rows")
    if limit_rows:
        df = df.head(int(limit_rows))
    fraction = float(args.get("steady_fraction") or 0.25)
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"steady_fraction debe estar en (0, 1], recibió {fraction}")

    # el reporte empieza en t_1: t_0 se reconstruye con el primer paso, como en replay
    t = df["t"].to_numpy(dtype=float)
    t_start = float(t[0] - (t[1] - t[0])) if t.size >= 2 else (float(t[0]) if t.size else 0.0)
    summary = steady_metrics(df, fraction, t_start)

    describe = {} if df.empty else (df.drop(columns=["inflated"]).describe().transpose()
                                    .astype(object).where(lambda d: d.notna(), None).to_dict(orient="index"))
    result = {
        "meta": {
            "path": str(p),
            "rows": int(df.shape[0]),
            "cols": int(df.shape[1]),
            "steady_fraction": fraction,
        },
        "summary": summary,
        "describe": describe,
        "nulls": {c: int(n) for c, n in df.isna().sum().items()},
    }
    if args.get("delta") is not None:
        delta = [float(d) for d in args["delta"]]
        if len(delta) != 4:
            raise ValueError(f"delta debe tener 4 componentes, recibió {len(delta)}")
        result["envelope"] = _envelope(df, delta)
    return result
