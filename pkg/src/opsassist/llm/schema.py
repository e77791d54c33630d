"""Schema-checked parsing of model output into plain dict records."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Sequence

from opsassist.errors import SchemaViolation
from opsassist.textutil import extract_json_object

Validator = Callable[[Mapping[str, Any]], Sequence[str]]


@dataclass(frozen=True)
class SchemaDescriptor:
    """Declarative shape for a structured reply.

    types maps field name to an allowed type or tuple of types; enums maps
    field name to the closed set of accepted values; validator may add
    cross-field problems and returns a list of human-readable strings.
    """

    name: str
    required: tuple[str, ...]
    types: Mapping[str, Any] = field(default_factory=dict)
    enums: Mapping[str, tuple] = field(default_factory=dict)
    validator: Validator | None = None

    def describe(self) -> str:
        bits = [f"required fields: {', '.join(self.required) or '(none)'}"]
        for name, allowed in self.enums.items():
            bits.append(f"{name} must be one of: {', '.join(map(str, allowed))}")
        return "; ".join(bits)


def _type_ok(value: Any, expected: Any) -> bool:
    if isinstance(expected, tuple):
        return any(_type_ok(value, t) for t in expected)
    if expected is bool:
        return isinstance(value, bool)
    if expected is int:
        # bool is an int subclass; keep them apart
        return isinstance(value, int) and not isinstance(value, bool)
    if expected is float:
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    return isinstance(value, expected)


def check_record(record: Mapping[str, Any], schema: SchemaDescriptor) -> list[str]:
    problems: list[str] = []
    for name in schema.required:
        if name not in record:
            problems.append(f"missing required field '{name}'")
            continue
        value = record[name]
        if value is None or (isinstance(value, str) and not value.strip()):
            problems.append(f"field '{name}' is empty")
    for name, expected in schema.types.items():
        if name in record and record[name] is not None and not _type_ok(record[name], expected):
            problems.append(f"field '{name}' has wrong type {type(record[name]).__name__}")
    for name, allowed in schema.enums.items():
        if name in record and record[name] is not None and record[name] not in allowed:
            problems.append(f"field '{name}' must be one of {list(allowed)}, got {record[name]!r}")
    if not problems and schema.validator is not None:
        problems.extend(schema.validator(record))
    return problems


def parse_object(text: str, schema: SchemaDescriptor) -> dict:
    """Single-attempt parse; raises SchemaViolation with all problems found."""
    try:
        record = extract_json_object(text)
    except ValueError as exc:
        raise SchemaViolation([f"no JSON object found: {exc}"]) from exc
    problems = check_record(record, schema)
    if problems:
        raise SchemaViolation(problems)
    return record
