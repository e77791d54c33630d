"""Diagnostic tool registry with schema-checked arguments."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping

from opsassist.textutil import canonical_json

_TYPES = {"string": str, "integer": int, "number": (int, float), "boolean": bool}


@dataclass(frozen=True)
class ToolSpec:
    name: str
    description: str
    params: Mapping[str, str] = field(default_factory=dict)  # arg -> type name
    required: tuple[str, ...] = ()
    handler: Callable[..., str] | None = None

    def __post_init__(self) -> None:
        for arg, type_name in self.params.items():
            if type_name not in _TYPES:
                raise ValueError(f"tool {self.name}: unknown arg type {type_name!r}")
        for arg in self.required:
            if arg not in self.params:
                raise ValueError(f"tool {self.name}: required arg {arg!r} not declared")

    def signature(self) -> str:
        args = ", ".join(
            f"{name}: {type_name}" + ("" if name in self.required else "?")
            for name, type_name in sorted(self.params.items())
        )
        return f"{self.name}({args})"


def _error_observation(code: str, detail: str) -> str:
    return canonical_json({"error": code, "detail": detail})


class ToolRegistry:
    def __init__(self, specs: Mapping[str, ToolSpec] | None = None):
        self._specs: dict[str, ToolSpec] = dict(specs or {})

    def register(self, spec: ToolSpec) -> None:
        if spec.name in self._specs:
            raise ValueError(f"tool {spec.name!r} already registered")
        self._specs[spec.name] = spec

    def names(self) -> tuple[str, ...]:
        return tuple(sorted(self._specs))

    def get(self, name: str) -> ToolSpec | None:
        return self._specs.get(name)

    def describe(self) -> str:
        if not self._specs:
            return "(no tools available)"
        lines = []
        for name in sorted(self._specs):
            spec = self._specs[name]
            lines.append(f"- {spec.signature()}: {spec.description}")
        return "\n".join(lines)

    def execute(self, name: str, args: Mapping[str, Any]) -> tuple[str, tuple[str, ...]]:
        """Run a tool; every failure mode becomes a structured observation."""
        spec = self._specs.get(name)
        if spec is None:
            return _error_observation("unknown_tool", f"no tool named {name!r}"), ("unknown_tool",)
        problems: list[str] = []
        for arg in spec.required:
            if arg not in args:
                problems.append(f"missing argument {arg!r}")
        for arg, value in args.items():
            if arg not in spec.params:
                problems.append(f"unexpected argument {arg!r}")
                continue
            expected = _TYPES[spec.params[arg]]
            if expected is int and isinstance(value, bool):
                problems.append(f"argument {arg!r} must be integer")
            elif not isinstance(value, expected):
                problems.append(f"argument {arg!r} must be {spec.params[arg]}")
        if problems:
            return _error_observation("bad_tool_args", "; ".join(problems)), ("bad_tool_args",)
        assert spec.handler is not None
        try:
            return spec.handler(**dict(args)), ()
        except Exception as exc:
            return _error_observation("tool_failed", str(exc)), ("tool_failed",)


def platform_tools(fixture_dir: str | Path | None) -> ToolRegistry:
    """Log, metric, and config lookups backed by a directory of fixtures."""
    root = Path(fixture_dir) if fixture_dir else None

    def _read(sub: str, name: str, missing: str) -> str:
        if root is None:
            return missing
        safe = "".join(c for c in name if c.isalnum() or c in "-_.")
        path = root / sub / f"{safe}.txt"
        if not path.exists():
            return missing
        return path.read_text(encoding="utf-8").strip()

    def fetch_logs(task_id: str) -> str:
        return _read("logs", task_id, f"no logs found for task {task_id}")

    def fetch_metrics(task_id: str) -> str:
        return _read("metrics", task_id, f"no metrics found for task {task_id}")

    def fetch_config(component: str) -> str:
        return _read("configs", component, f"no configuration found for {component}")

    registry = ToolRegistry()
    registry.register(
        ToolSpec(
            name="fetch_logs",
            description="Fetch the recent execution log of a platform task.",
            params={"task_id": "string"},
            required=("task_id",),
            handler=fetch_logs,
        )
    )
    registry.register(
        ToolSpec(
            name="fetch_metrics",
            description="Fetch runtime metrics recorded for a platform task.",
            params={"task_id": "string"},
            required=("task_id",),
            handler=fetch_metrics,
        )
    )
    registry.register(
        ToolSpec(
            name="fetch_config",
            description="Fetch the active configuration of a platform component.",
            params={"component": "string"},
            required=("component",),
            handler=fetch_config,
        )
    )
    return registry


def parse_tool_args(raw: Any) -> dict:
    """Accept args as a mapping or a JSON object string."""
    if raw is None:
        return {}
    if isinstance(raw, Mapping):
        return dict(raw)
    if isinstance(raw, str):
        try:
            parsed = json.loads(raw)
        except json.JSONDecodeError:
            return {}
        if isinstance(parsed, dict):
            return parsed
    return {}
