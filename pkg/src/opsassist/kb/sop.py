"""Structured troubleshooting procedures.

A procedure names one problem and holds one branch per root cause; each
branch carries numbered investigation steps whose observations either
confirm the cause or jump to a later step, then numbered resolution steps.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Any, Mapping

from opsassist.errors import ValidationFailed
from opsassist.kb.types import Provenance

_GOTO = re.compile(r"^goto\s+(\d+)$")

OUTCOME_CONFIRMED = "confirmed"


@dataclass(frozen=True)
class Observation:
    condition: str
    outcome: str  # "confirmed" or "goto <step>"

    def goto_target(self) -> int | None:
        match = _GOTO.match(self.outcome.strip())
        return int(match.group(1)) if match else None


@dataclass(frozen=True)
class InvestigationStep:
    step_no: int
    target: str
    action: str
    observations: tuple[Observation, ...]


@dataclass(frozen=True)
class ResolutionStep:
    step_no: int
    action: str


@dataclass(frozen=True)
class RootCauseBranch:
    root_cause: str
    investigation_steps: tuple[InvestigationStep, ...]
    resolution_steps: tuple[ResolutionStep, ...]


@dataclass(frozen=True)
class SOPRecord:
    problem_desc: str
    branches: tuple[RootCauseBranch, ...]
    provenance: tuple[Provenance, ...] = ()


def validate_sop(record: SOPRecord) -> list[str]:
    problems: list[str] = []
    if not record.problem_desc.strip():
        problems.append("problem_desc is empty")
    if not record.branches:
        problems.append("procedure needs at least one root cause branch")
    for bi, branch in enumerate(record.branches):
        where = f"branch {bi + 1}"
        if not branch.root_cause.strip():
            problems.append(f"{where}: root_cause is empty")
        if not branch.investigation_steps:
            problems.append(f"{where}: needs at least one investigation step")
        if not branch.resolution_steps:
            problems.append(f"{where}: needs at least one resolution step")
        inv_numbers = [s.step_no for s in branch.investigation_steps]
        if inv_numbers != list(range(1, len(inv_numbers) + 1)):
            problems.append(f"{where}: investigation steps must be numbered 1..n in order")
        res_numbers = [s.step_no for s in branch.resolution_steps]
        if res_numbers != list(range(1, len(res_numbers) + 1)):
            problems.append(f"{where}: resolution steps must be numbered 1..n in order")
        known = set(inv_numbers)
        confirmed = False
        for step in branch.investigation_steps:
            if not step.observations:
                problems.append(f"{where} step {step.step_no}: needs at least one observation")
            for obs in step.observations:
                outcome = obs.outcome.strip()
                if outcome == OUTCOME_CONFIRMED:
                    confirmed = True
                    continue
                target = obs.goto_target()
                if target is None:
                    problems.append(
                        f"{where} step {step.step_no}: outcome must be "
                        f"'confirmed' or 'goto <step>', got {obs.outcome!r}"
                    )
                elif target not in known:
                    problems.append(
                        f"{where} step {step.step_no}: goto target {target} does not exist"
                    )
        if branch.investigation_steps and not confirmed:
            problems.append(f"{where}: no observation ever confirms the root cause")
    return problems


def sop_to_dict(record: SOPRecord) -> dict:
    out: dict[str, Any] = {
        "problem_desc": record.problem_desc,
        "content": [
            {
                "root_cause": branch.root_cause,
                "investigation_steps": [
                    {
                        "step": str(step.step_no),
                        "target": step.target,
                        "action": step.action,
                        "observations": [
                            {"condition": obs.condition, "outcome": obs.outcome}
                            for obs in step.observations
                        ],
                    }
                    for step in branch.investigation_steps
                ],
                "resolution_steps": [
                    {"step": str(step.step_no), "action": step.action}
                    for step in branch.resolution_steps
                ],
            }
            for branch in record.branches
        ],
    }
    if record.provenance:
        out["provenance"] = [p.to_dict() for p in record.provenance]
    return out


def _step_no(raw: Any, where: str, problems: list[str]) -> int:
    try:
        return int(raw)
    except (TypeError, ValueError):
        problems.append(f"{where}: step number {raw!r} is not an integer")
        return 0


def sop_from_dict(raw: Mapping[str, Any]) -> SOPRecord:
    problems: list[str] = []
    if not isinstance(raw, Mapping):
        raise ValidationFailed(["procedure must be a JSON object"])
    problem_desc = raw.get("problem_desc")
    if not isinstance(problem_desc, str) or not problem_desc.strip():
        problems.append("problem_desc must be a non-empty string")
        problem_desc = ""
    content = raw.get("content")
    if not isinstance(content, list) or not content:
        raise ValidationFailed(problems + ["content must be a non-empty list of branches"])
    branches: list[RootCauseBranch] = []
    for bi, braw in enumerate(content):
        where = f"branch {bi + 1}"
        if not isinstance(braw, Mapping):
            problems.append(f"{where}: must be an object")
            continue
        inv_steps: list[InvestigationStep] = []
        for sraw in braw.get("investigation_steps", ()):
            if not isinstance(sraw, Mapping):
                problems.append(f"{where}: investigation step must be an object")
                continue
            observations = tuple(
                Observation(
                    condition=str(oraw.get("condition", "")),
                    outcome=str(oraw.get("outcome", "")),
                )
                for oraw in sraw.get("observations", ())
                if isinstance(oraw, Mapping)
            )
            inv_steps.append(
                InvestigationStep(
                    step_no=_step_no(sraw.get("step"), where, problems),
                    target=str(sraw.get("target", "")),
                    action=str(sraw.get("action", "")),
                    observations=observations,
                )
            )
        res_steps = tuple(
            ResolutionStep(
                step_no=_step_no(sraw.get("step"), where, problems),
                action=str(sraw.get("action", "")),
            )
            for sraw in braw.get("resolution_steps", ())
            if isinstance(sraw, Mapping)
        )
        branches.append(
            RootCauseBranch(
                root_cause=str(braw.get("root_cause", "")),
                investigation_steps=tuple(inv_steps),
                resolution_steps=res_steps,
            )
        )
    provenance = tuple(
        Provenance.from_dict(p) for p in raw.get("provenance", ()) if isinstance(p, Mapping)
    )
    record = SOPRecord(
        problem_desc=problem_desc, branches=tuple(branches), provenance=provenance
    )
    problems.extend(validate_sop(record))
    if problems:
        raise ValidationFailed(problems)
    return record


def render_sop(record: SOPRecord) -> str:
    """Human-readable rendering used for evidence snippets and answers."""
    lines = [f"Problem: {record.problem_desc}"]
    for branch in record.branches:
        lines.append(f"Root cause: {branch.root_cause}")
        lines.append("Investigation:")
        for step in branch.investigation_steps:
            lines.append(f"  {step.step_no}. [{step.target}] {step.action}")
            for obs in step.observations:
                lines.append(f"     - if {obs.condition}: {obs.outcome}")
        lines.append("Resolution:")
        for step in branch.resolution_steps:
            lines.append(f"  {step.step_no}. {step.action}")
    return "\n".join(lines)
