# src/util/registry.py
# Registro de tools del server de navegación: spec + handler por módulo de src/tools.
import asyncio
import importlib
from typing import Any, Callable, Dict, List, Tuple

TOOL_MODULES = [
    "src.tools.nav_simulate",
    "src.tools.nav_replay",
    "src.tools.nav_montecarlo",
    "src.tools.nav_selftest",
    "src.tools.report_profile",
]

Handler = Callable[[dict], Any]


class ToolRegistry:
    """Tools por nombre. Los handlers sync corren en el executor por defecto del loop."""

    def __init__(self) -> None:
        self._specs: Dict[str, dict] = {}
        self._handlers: Dict[str, Handler] = {}

    def register(self, spec: dict, handler: Handler) -> None:
        name = spec["name"]
        if name in self._specs:
            raise ValueError(f"tool duplicado: {name}")
        self._specs[name] = spec
        if asyncio.iscoroutinefunction(handler):
            self._handlers[name] = handler
            return

        async def _in_executor(args: dict) -> dict:
            # corridas CPU-bound: el loop del server sigue leyendo stdin
            return await asyncio.get_running_loop().run_in_executor(None, handler, args)
        self._handlers[name] = _in_executor

    def list_tools(self) -> dict:
        return {"tools": [self._specs[n] for n in self._specs]}

    def names(self) -> List[str]:
        return sorted(self._specs)

    def missing_args(self, name: str, args: dict) -> List[str]:
        required = self._specs[name].get("input_schema", {}).get("required", [])
        return [k for k in required if args.get(k) is None]

    async def call(self, name: str, args: dict) -> dict:
        if name not in self._handlers:
            raise ValueError(f"tool not found: {name}")
        missing = self.missing_args(name, args)
        if missing:
            raise ValueError(f"{name}: faltan argumentos requeridos: {', '.join(missing)}")
        return await self._handlers[name](args)


def _load(modname: str) -> Tuple[dict, Handler]:
    m = importlib.import_module(modname)
    spec = getattr(m, "tool_spec", None)
    handler = getattr(m, "run", None)
    if spec is None or handler is None:
        raise ValueError(f"{modname}: un módulo de tool necesita tool_spec y run(args)")
    return spec, handler


def build_registry(modules: List[str] = TOOL_MODULES) -> ToolRegistry:
    reg = ToolRegistry()
    for modname in modules:
        reg.register(*_load(modname))
    return reg
