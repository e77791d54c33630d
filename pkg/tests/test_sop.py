"""Procedure validation, wire round-trips, and rendering."""

from __future__ import annotations

import pytest

from opsassist.errors import ValidationFailed
from opsassist.kb.sop import (
    InvestigationStep,
    Observation,
    ResolutionStep,
    RootCauseBranch,
    SOPRecord,
    render_sop,
    sop_from_dict,
    sop_to_dict,
    validate_sop,
)
from opsassist.kb.types import Provenance


def _branch(root_cause="disk quota exhausted", confirm_at=1, steps=2):
    inv = []
    for no in range(1, steps + 1):
        if no == confirm_at:
            obs = (Observation("quota at 100%", "confirmed"),)
        else:
            obs = (Observation("quota below limit", f"goto {min(no + 1, steps)}"),)
        inv.append(
            InvestigationStep(
                step_no=no,
                target="staging volume",
                action=f"check quota usage, step {no}",
                observations=obs,
            )
        )
    return RootCauseBranch(
        root_cause=root_cause,
        investigation_steps=tuple(inv),
        resolution_steps=(ResolutionStep(1, "purge orphaned temporary files"),),
    )


def _record(**kwargs):
    defaults = dict(
        problem_desc="job fails with quota exceeded",
        branches=(_branch(),),
        provenance=(Provenance(kind="manual", ref="runbook"),),
    )
    defaults.update(kwargs)
    return SOPRecord(**defaults)


def test_valid_record_has_no_problems():
    assert validate_sop(_record()) == []


def test_validation_catches_structural_problems():
    bad_numbering = RootCauseBranch(
        root_cause="cause",
        investigation_steps=(
            InvestigationStep(1, "t", "a", (Observation("c", "confirmed"),)),
            InvestigationStep(3, "t", "a", (Observation("c", "confirmed"),)),
        ),
        resolution_steps=(ResolutionStep(1, "fix"),),
    )
    problems = validate_sop(_record(branches=(bad_numbering,)))
    assert any("numbered 1..n" in p for p in problems)


def test_validation_requires_existing_goto_target():
    branch = RootCauseBranch(
        root_cause="cause",
        investigation_steps=(
            InvestigationStep(1, "t", "a", (Observation("c", "goto 9"),)),
        ),
        resolution_steps=(ResolutionStep(1, "fix"),),
    )
    problems = validate_sop(_record(branches=(branch,)))
    assert any("goto target 9 does not exist" in p for p in problems)
    assert any("no observation ever confirms" in p for p in problems)


def test_validation_rejects_free_text_outcome():
    branch = RootCauseBranch(
        root_cause="cause",
        investigation_steps=(
            InvestigationStep(1, "t", "a", (Observation("c", "maybe fixed"),)),
        ),
        resolution_steps=(ResolutionStep(1, "fix"),),
    )
    problems = validate_sop(_record(branches=(branch,)))
    assert any("'confirmed' or 'goto <step>'" in p for p in problems)


def test_validation_requires_branches_steps_and_observations():
    assert "procedure needs at least one root cause branch" in validate_sop(
        SOPRecord(problem_desc="p", branches=())
    )
    sparse = RootCauseBranch(
        root_cause="cause",
        investigation_steps=(InvestigationStep(1, "t", "a", ()),),
        resolution_steps=(),
    )
    problems = validate_sop(_record(branches=(sparse,)))
    assert any("needs at least one observation" in p for p in problems)
    assert any("needs at least one resolution step" in p for p in problems)


def test_wire_round_trip_preserves_record():
    record = _record(branches=(_branch(), _branch(root_cause="second cause")))
    assert sop_from_dict(sop_to_dict(record)) == record


def test_step_numbers_serialize_as_strings():
    raw = sop_to_dict(_record())
    step = raw["content"][0]["investigation_steps"][0]
    assert step["step"] == "1"
    assert raw["content"][0]["resolution_steps"][0]["step"] == "1"


def test_from_dict_accepts_integer_step_numbers():
    raw = sop_to_dict(_record())
    raw["content"][0]["investigation_steps"][0]["step"] = 1
    record = sop_from_dict(raw)
    assert record.branches[0].investigation_steps[0].step_no == 1


def test_from_dict_collects_all_problems():
    raw = {
        "problem_desc": " ",
        "content": [
            {
                "root_cause": "",
                "investigation_steps": [
                    {"step": "1", "target": "t", "action": "a", "observations": []}
                ],
                "resolution_steps": [],
            }
        ],
    }
    with pytest.raises(ValidationFailed) as err:
        sop_from_dict(raw)
    assert len(err.value.problems) >= 3


def test_from_dict_requires_content_list():
    with pytest.raises(ValidationFailed, match="content"):
        sop_from_dict({"problem_desc": "p", "content": []})


def test_render_layout():
    text = render_sop(_record())
    lines = text.splitlines()
    assert lines[0] == "Problem: job fails with quota exceeded"
    assert "Root cause: disk quota exhausted" in lines
    assert "  1. [staging volume] check quota usage, step 1" in lines
    assert any(line.startswith("     - if ") for line in lines)
    assert "  1. purge orphaned temporary files" in lines


def test_goto_target_parsing():
    assert Observation("c", "goto 3").goto_target() == 3
    assert Observation("c", " goto 12 ").goto_target() == 12
    assert Observation("c", "confirmed").goto_target() is None
    assert Observation("c", "goto x").goto_target() is None
