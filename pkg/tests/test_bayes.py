"""Cause-model estimation, scoring, and threshold-gated assignment."""

import json
import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from opsassist.config import DEFAULT_CAUSES
from opsassist.errors import EmptyTrainingSet
from opsassist.tickets.bayes import (
    CauseModel,
    assign,
    fit,
    joint_scores,
    log_joint_scores,
    model_from_dict,
    model_to_dict,
    posterior,
)
from opsassist.tickets.types import AssignmentResult


def _two_cause_model() -> CauseModel:
    return CauseModel(
        causes=("config_error", "capacity"),
        priors={"config_error": 0.3, "capacity": 0.7},
        likelihoods={
            "module:export": {"config_error": 0.8, "capacity": 0.5},
            "action:schema_change": {"config_error": 0.3, "capacity": 0.5},
            "system:reporting": {"config_error": 0.25, "capacity": 0.5},
        },
    )


def test_joint_score_worked_example():
    model = _two_cause_model()
    features = ["module:export", "action:schema_change", "system:reporting"]
    scores = joint_scores(model, features)
    # 0.3 * 0.8 * 0.3 * 0.25
    assert scores["config_error"] == pytest.approx(0.018, abs=1e-12)
    assert scores["capacity"] == pytest.approx(0.7 * 0.5**3, abs=1e-12)


def test_unknown_features_are_dropped():
    model = _two_cause_model()
    with_unknown = joint_scores(model, ["module:export", "module:unheard-of"])
    without = joint_scores(model, ["module:export"])
    assert with_unknown == without


def test_duplicate_features_count_once():
    model = _two_cause_model()
    doubled = joint_scores(model, ["module:export", "module:export"])
    single = joint_scores(model, ["module:export"])
    assert doubled == single


def test_log_space_matches_direct_product_on_random_models():
    rng = random.Random(1108)
    for _ in range(100):
        causes = tuple(f"cause{i}" for i in range(rng.randint(2, 5)))
        features = [f"f{i}" for i in range(rng.randint(1, 6))]
        model = CauseModel(
            causes=causes,
            priors={c: rng.uniform(0.05, 1.0) for c in causes},
            likelihoods={
                f: {c: rng.uniform(0.05, 1.0) for c in causes} for f in features
            },
        )
        observed = [f for f in features if rng.random() < 0.6]
        got = joint_scores(model, observed)
        for cause in causes:
            direct = model.priors[cause]
            for feature in observed:
                direct *= model.likelihoods[feature][cause]
            assert got[cause] == pytest.approx(direct, rel=1e-12)


def _laplace_examples() -> list[tuple[list[str], str]]:
    # cause A on 6 tickets, cause B on 4; f1 appears in 5 A / 1 B,
    # f2 in 2 A / 3 B, f3 in 0 A / 4 B
    return [
        (["f1", "f2"], "A"),
        (["f1", "f2"], "A"),
        (["f1"], "A"),
        (["f1"], "A"),
        (["f1"], "A"),
        ([], "A"),
        (["f1", "f2", "f3"], "B"),
        (["f2", "f3"], "B"),
        (["f2", "f3"], "B"),
        (["f3"], "B"),
    ]


def test_fit_applies_additive_smoothing():
    model = fit(_laplace_examples(), causes=("A", "B"), alpha=1.0)
    assert model.priors["A"] == 7 / 12
    assert model.priors["B"] == 5 / 12
    assert model.likelihoods["f1"]["A"] == 0.75
    assert model.likelihoods["f2"]["A"] == 0.375
    assert model.likelihoods["f3"]["A"] == 0.125
    assert model.likelihoods["f1"]["B"] == 1 / 3
    assert model.likelihoods["f2"]["B"] == 2 / 3
    assert model.likelihoods["f3"]["B"] == 5 / 6
    assert model.vocabulary == ("f1", "f2", "f3")


def test_fit_dedupes_features_within_one_example():
    model = fit([(["f1", "f1"], "A"), (["f2"], "B")], causes=("A", "B"))
    # one occurrence of f1 under A: (1 + 1) / (1 + 2)
    assert model.likelihoods["f1"]["A"] == pytest.approx(2 / 3)


def test_fit_rejects_bad_input():
    with pytest.raises(EmptyTrainingSet):
        fit([], causes=("A",))
    with pytest.raises(ValueError, match="alpha"):
        fit([(["f1"], "A")], causes=("A",), alpha=0.0)
    with pytest.raises(ValueError, match="unknown cause"):
        fit([(["f1"], "C")], causes=("A", "B"))


def test_fit_normalizes_prior_override():
    examples = [(["f1"], "A"), (["f1"], "B")]
    model = fit(examples, causes=("A", "B"), priors_override={"A": 2.0, "B": 2.0})
    assert model.priors == {"A": 0.5, "B": 0.5}
    with pytest.raises(ValueError, match="cover exactly"):
        fit(examples, causes=("A", "B"), priors_override={"A": 1.0})
    with pytest.raises(ValueError, match="positive mass"):
        fit(examples, causes=("A", "B"), priors_override={"A": 0.0, "B": 0.0})


def test_model_validation():
    with pytest.raises(ValueError, match="at least one cause"):
        CauseModel(causes=(), priors={}, likelihoods={})
    with pytest.raises(ValueError, match="cover exactly"):
        CauseModel(causes=("A",), priors={"B": 1.0}, likelihoods={})
    with pytest.raises(ValueError, match="priors"):
        CauseModel(causes=("A",), priors={"A": 0.0}, likelihoods={})
    with pytest.raises(ValueError, match="cover every cause"):
        CauseModel(
            causes=("A", "B"),
            priors={"A": 0.5, "B": 0.5},
            likelihoods={"f1": {"A": 0.5}},
        )
    with pytest.raises(ValueError, match="out of"):
        CauseModel(
            causes=("A",),
            priors={"A": 1.0},
            likelihoods={"f1": {"A": 1.5}},
        )


def test_posterior_normalizes_joint_scores():
    model = _two_cause_model()
    features = ["module:export", "system:reporting"]
    post = posterior(model, features)
    joint = joint_scores(model, features)
    mass = sum(joint.values())
    assert sum(post.values()) == pytest.approx(1.0, rel=1e-12)
    for cause in model.causes:
        assert post[cause] == pytest.approx(joint[cause] / mass, rel=1e-9)


def test_assign_auto_above_threshold():
    model = CauseModel(
        causes=("A", "B"),
        priors={"A": 0.9, "B": 0.1},
        likelihoods={},
    )
    result = assign(model, [], threshold=0.8)
    assert result.decision == "auto"
    assert result.cause == "A"
    assert result.confidence == pytest.approx(0.9, rel=1e-9)
    assert result.posterior["A"] == result.confidence


def test_assign_defers_below_threshold():
    model = CauseModel(
        causes=("A", "B"),
        priors={"A": 0.6, "B": 0.4},
        likelihoods={},
    )
    result = assign(model, [], threshold=0.8)
    assert result.decision == "manual_review"
    assert result.cause is None
    assert result.confidence == pytest.approx(0.6, rel=1e-9)


def test_assign_defers_exact_ties_even_when_confident():
    model = CauseModel(
        causes=("A", "B"),
        priors={"A": 0.5, "B": 0.5},
        likelihoods={},
    )
    result = assign(model, [], threshold=0.4)
    assert result.decision == "manual_review"
    assert result.cause is None
    assert result.confidence == pytest.approx(0.5)


def test_assign_threshold_straddle_table():
    # 50 prior tables from 0.50 to 0.99; auto only above the 0.8 gate
    for i in range(50):
        top = (50 + i) / 100
        model = CauseModel(
            causes=("A", "B"),
            priors={"A": top, "B": 1.0 - top},
            likelihoods={},
        )
        result = assign(model, [], threshold=0.8)
        best = max(result.posterior.values())
        assert result.posterior["A"] == pytest.approx(top, rel=1e-9)
        if top <= 0.79:
            assert result.decision == "manual_review"
        elif top >= 0.81:
            assert result.decision == "auto"
            assert result.cause == "A"
        else:
            # at the boundary the decision must agree with the computed mass
            assert (result.decision == "auto") == (best >= 0.8)
        if result.decision == "auto":
            assert best >= 0.8


def test_assignment_result_validation():
    with pytest.raises(ValueError, match="unknown decision"):
        AssignmentResult(cause="A", confidence=0.9, decision="maybe")
    with pytest.raises(ValueError, match="carry a cause"):
        AssignmentResult(cause=None, confidence=0.9, decision="auto")


def test_model_dict_round_trip():
    model = fit(_laplace_examples(), causes=("A", "B"), alpha=2.0)
    raw = model_to_dict(model)
    clone = model_from_dict(json.loads(json.dumps(raw)))
    assert clone == model
    assert list(raw["likelihoods"]) == sorted(raw["likelihoods"])


def test_default_causes_are_distinct():
    assert len(DEFAULT_CAUSES) == len(set(DEFAULT_CAUSES))
    assert "missing_knowledge" in DEFAULT_CAUSES
    assert "user_error" in DEFAULT_CAUSES


@st.composite
def _random_models(draw):
    n_causes = draw(st.integers(min_value=2, max_value=5))
    causes = tuple(f"c{i}" for i in range(n_causes))
    features = [f"f{i}" for i in range(draw(st.integers(min_value=1, max_value=5)))]
    probs = st.floats(min_value=0.05, max_value=1.0)
    model = CauseModel(
        causes=causes,
        priors={c: draw(probs) for c in causes},
        likelihoods={f: {c: draw(probs) for c in causes} for f in features},
    )
    observed = draw(st.lists(st.sampled_from(features + ["f-unseen"]), max_size=8))
    return model, observed


@settings(max_examples=60, deadline=None)
@given(_random_models())
def test_posterior_and_assign_are_consistent(case):
    model, observed = case
    post = posterior(model, observed)
    assert sum(post.values()) == pytest.approx(1.0, rel=1e-9)
    assert all(0.0 <= p <= 1.0 + 1e-12 for p in post.values())
    result = assign(model, observed, threshold=0.8)
    assert result.confidence == pytest.approx(max(post.values()), rel=1e-12)
    log_scores = log_joint_scores(model, observed)
    for cause, score in joint_scores(model, observed).items():
        assert score == pytest.approx(math.exp(log_scores[cause]), rel=1e-12)
    if result.decision == "auto":
        assert result.cause is not None
        assert post[result.cause] == max(post.values())
