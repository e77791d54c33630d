"""Value-type validation and budget accounting."""

from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from opsassist.errors import BudgetExceeded, DimensionMismatch
from opsassist.llm.types import (
    Budget,
    ChatRequest,
    ChatResponse,
    EmbeddingVector,
    Message,
    estimate_tokens,
    messages_from_dicts,
    request,
)


def test_message_rejects_unknown_role():
    with pytest.raises(ValueError):
        Message("operator", "hi")


def test_chat_request_validates_knobs():
    msg = (Message("user", "hi"),)
    with pytest.raises(ValueError):
        ChatRequest(messages=())
    with pytest.raises(ValueError):
        ChatRequest(messages=msg, temperature=3.0)
    with pytest.raises(ValueError):
        ChatRequest(messages=msg, top_p=0.0)
    with pytest.raises(ValueError):
        ChatRequest(messages=msg, max_tokens=0)
    with pytest.raises(ValueError):
        ChatRequest(messages=msg, tag="")


def test_request_helper_builds_messages():
    req = request("stage", ("system", "s"), ("user", "u"))
    assert req.tag == "stage"
    assert [m.role for m in req.messages] == ["system", "user"]


def test_messages_from_dicts():
    msgs = messages_from_dicts([{"role": "user", "text": "hi"}])
    assert msgs == (Message("user", "hi"),)


def test_estimate_tokens_floor():
    assert estimate_tokens("") == 1
    assert estimate_tokens("x" * 4) == 1
    assert estimate_tokens("x" * 41) == 10


def test_chat_response_total():
    resp = ChatResponse(text="ok", token_usage=(7, 5), provider_id="p")
    assert resp.total_tokens == 12


def test_cosine_identity_and_mismatch():
    v = EmbeddingVector((1.0, 0.0))
    assert v.cosine(v) == pytest.approx(1.0)
    with pytest.raises(DimensionMismatch):
        v.cosine(EmbeddingVector((1.0, 0.0, 0.0)))


def test_zero_vector_cosine_is_zero():
    z = EmbeddingVector((0.0, 0.0))
    assert z.cosine(EmbeddingVector((1.0, 1.0))) == 0.0


def test_budget_blocks_after_max_calls():
    budget = Budget(max_chat_calls=2, max_total_tokens=1000)
    budget.check_can_call()
    budget.charge(10, 10)
    budget.check_can_call()
    budget.charge(10, 10)
    with pytest.raises(BudgetExceeded):
        budget.check_can_call()
    assert budget.exhausted


def test_budget_token_clamp_blocks_next_call():
    budget = Budget(max_chat_calls=10, max_total_tokens=100)
    budget.charge(90, 30)
    # counters never overshoot; the flag blocks the following call
    assert budget.total_tokens == 100
    assert budget.exhausted
    with pytest.raises(BudgetExceeded):
        budget.check_can_call()


def test_budget_rejects_negative_charge():
    budget = Budget(max_chat_calls=1, max_total_tokens=10)
    with pytest.raises(ValueError):
        budget.charge(-1, 0)


def test_budget_snapshot_shape():
    budget = Budget(max_chat_calls=3, max_total_tokens=50)
    budget.charge(5, 5)
    assert budget.snapshot() == {
        "chat_calls": 1,
        "max_chat_calls": 3,
        "total_tokens": 10,
        "max_total_tokens": 50,
    }


@given(
    st.lists(
        st.tuples(st.integers(0, 400), st.integers(0, 400)), min_size=1, max_size=30
    )
)
def test_budget_counters_never_exceed_limits(charges):
    budget = Budget(max_chat_calls=len(charges) + 1, max_total_tokens=500)
    for prompt, completion in charges:
        try:
            budget.check_can_call()
        except BudgetExceeded:
            break
        budget.charge(prompt, completion)
        assert budget.total_tokens <= budget.max_total_tokens
        assert budget.chat_calls <= budget.max_chat_calls
