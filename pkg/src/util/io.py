# src/util/io.py
# Lectura/escritura de las tablas CSV del harness (IMU, features, observaciones, verdad, reporte).
from __future__ import annotations

from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from ..sandbox import guard_size
from ..nav.errors import CsvSchemaError

FLOAT_FORMAT = "%.17g"   # 17 dígitos: ida y vuelta exacta de float64


def _parse_float(text: str) -> float:
    # lectura exacta de los 17 dígitos escritos con FLOAT_FORMAT
    try:
        return float(text)
    except ValueError:
        return float("nan")


def read_table(path: str | Path, columns: Sequence[str], int_columns: Sequence[str] = (),
               time_col: str | None = "t", strictly_increasing: bool = True) -> pd.DataFrame:
    """Carga un CSV con cabecera exacta `columns` y valida filas y orden temporal.

    Los números de línea de los errores cuentan la cabecera como línea 1.
    """
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"No existe el archivo: {p}")
    guard_size(p.read_bytes())

    try:
        raw = pd.read_csv(p, dtype=str, keep_default_na=False, skip_blank_lines=True)
    except pd.errors.EmptyDataError as e:
        raise CsvSchemaError(f"{p.name}: archivo vacío, falta la cabecera {','.join(columns)}") from e
    except pd.errors.ParserError as e:
        raise CsvSchemaError(f"{p.name}: fila mal formada ({e})") from e

    header = [c.strip() for c in raw.columns]
    if header != list(columns):
        raise CsvSchemaError(f"{p.name}: cabecera {header} != esperada {list(columns)}")
    raw.columns = header

    out = pd.DataFrame(index=raw.index)
    for c in columns:
        col = raw[c].str.strip().map(_parse_float).astype(float)
        bad = col.isna() | ~np.isfinite(col.astype(float))
        if bad.any():
            first = int(bad.to_numpy().nonzero()[0][0])
            raise CsvSchemaError(
                f"{p.name}: línea {first + 2}: valor inválido en columna '{c}': {raw[c].iloc[first]!r}")
        if c in int_columns:
            if (col != np.floor(col)).any():
                first = int((col != np.floor(col)).to_numpy().nonzero()[0][0])
                raise CsvSchemaError(f"{p.name}: línea {first + 2}: '{c}' debe ser entero")
            out[c] = col.astype(np.int64)
        else:
            out[c] = col.astype(float)

    if time_col is not None and len(out) > 1:
        dt = np.diff(out[time_col].to_numpy())
        bad = dt <= 0 if strictly_increasing else dt < 0
        if bad.any():
            first = int(bad.nonzero()[0][0]) + 1
            raise CsvSchemaError(
                f"{p.name}: línea {first + 2}: tiempo no monótono "
                f"({out[time_col].iloc[first - 1]} -> {out[time_col].iloc[first]})")
    return out.reset_index(drop=True)


def write_table(df: pd.DataFrame, path: str | Path) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(p, index=False, float_format=FLOAT_FORMAT, lineterminator="\n", na_rep="")
    return p


def write_key_values(values: dict, path: str | Path) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    lines = []
    for k, v in values.items():
        if isinstance(v, (bool, np.bool_)):
            v = int(v)
        if isinstance(v, (float, np.floating)):
            v = repr(float(v))
        lines.append(f"{k}={v}")
    p.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return p


def read_key_values(path: str | Path) -> dict[str, str]:
    p = Path(path)
    out: dict[str, str] = {}
    for line in p.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        k, _, v = line.partition("=")
        out[k.strip()] = v.strip()
    return out
