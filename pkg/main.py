# main.py
# Server JSON-RPC 2.0 por stdin/stdout que expone las corridas del filtro como tools.
import sys
import asyncio
import orjson
import traceback
import time
from pathlib import Path
from dotenv import load_dotenv

# --- Carga .env y asegura sys.path ---
load_dotenv()
ROOT = Path(__file__).resolve().parent
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from src.util.registry import build_registry
from src.util.eventlog import _json_default, _redact, log_event, now_iso, status

SERVER_NAME = "se23-nav"


# ---- Helpers JSON-RPC 2.0 ----
def ok(mid, result):
    return {"jsonrpc": "2.0", "id": mid, "result": result}


def err(mid, code, message, data=None):
    e = {"code": code, "message": message}
    if data is not None:
        e["data"] = data
    return {"jsonrpc": "2.0", "id": mid, "error": e}


async def handle(registry, msg: dict):
    """Despacha un mensaje ya parseado. Devuelve (respuesta, ok, resultado_para_log, error_para_log)."""
    mid = msg.get("id")
    method = msg.get("method")
    params = msg.get("params", {}) or {}

    if not isinstance(params, dict):
        return err(mid, -32602, "Invalid params: expected object"), False, None, "Invalid params"
    if method == "initialize":
        result = {"serverName": SERVER_NAME, "protocol": "jsonrpc2"}
        return ok(mid, result), True, result, None
    if method == "tools/list":
        result = registry.list_tools()
        return ok(mid, result), True, result, None
    if method == "tools/call":
        name = params.get("name")
        if not name:
            return err(mid, -32602, "Missing 'name' in params"), False, None, "Missing 'name'"
        args = params.get("args", {}) or {}
        try:
            result = await registry.call(name, args)
            return ok(mid, result), True, result, None
        except Exception as call_e:
            tb = traceback.format_exc()
            return err(mid, -32000, str(call_e), {"trace": tb}), False, None, str(call_e)
    if method == "shutdown":
        result = {"ok": True}
        return ok(mid, result), True, result, None
    return err(mid, -32601, f"Method not found: {method}"), False, None, "Method not found"


def _event(msg, okflag, result_for_log, error_for_log, t0, ts) -> dict:
    method = msg.get("method") if isinstance(msg, dict) else "<parse>"
    params = msg.get("params", {}) if isinstance(msg, dict) else None
    event = {
        "ts": ts,
        "method": method or "<unknown>",
        "ok": okflag,
        "duration_ms": round((time.perf_counter() - t0) * 1000, 3),
    }
    if isinstance(params, dict):
        # para tools/call deja nombre de tool y args redactados
        if method == "tools/call":
            event["tool"] = params.get("name")
            event["args"] = _redact(params.get("args", {}))
        else:
            event["params"] = _redact(params)
    if okflag and result_for_log is not None:
        try:
            event["result_size"] = len(orjson.dumps(result_for_log, default=_json_default))
        except Exception:
            event["result_size"] = None
    if not okflag and error_for_log:
        event["error"] = error_for_log
    return event


# ---- Lectura asíncrona de STDIN ----
async def ainput():
    loop = asyncio.get_running_loop()
    return await loop.run_in_executor(None, sys.stdin.buffer.readline)


def _write(resp: dict):
    sys.stdout.buffer.write(orjson.dumps(resp, default=_json_default,
                                         option=orjson.OPT_SERIALIZE_NUMPY) + b"\n")
    sys.stdout.flush()


async def main():
    registry = build_registry()
    status("server ready")
    while True:
        raw = await ainput()
        if not raw:
            break
        if raw.strip() == b"":
            continue

        t0 = time.perf_counter()
        ts = now_iso()
        try:
            msg = orjson.loads(raw)
        except Exception:
            _write(err(None, -32700, "Parse error"))
            log_event(_event(None, False, None, "Parse error", t0, ts))
            continue
        if not isinstance(msg, dict):
            _write(err(None, -32600, "Invalid Request"))
            log_event(_event(None, False, None, "Invalid Request", t0, ts))
            continue

        try:
            resp, okflag, result_for_log, error_for_log = await handle(registry, msg)
        except Exception as e:
            tb = traceback.format_exc()
            resp = err(msg.get("id"), -32000, str(e), {"trace": tb})
            okflag, result_for_log, error_for_log = False, None, str(e)

        _write(resp)
        log_event(_event(msg, okflag, result_for_log, error_for_log, t0, ts))
        if msg.get("method") == "shutdown":
            break


if __name__ == "__main__":
    try:
        asyncio.run(main())
    except KeyboardInterrupt:
        pass
