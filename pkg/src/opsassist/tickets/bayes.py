"""Smoothed naive-Bayes cause attribution over categorical ticket features.

Probabilities are estimated with additive smoothing and evaluated in log
space; features outside the training vocabulary are ignored at scoring
time. Assignment is automatic only above a confidence threshold, with ties
always deferred to manual review.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from opsassist.errors import EmptyTrainingSet
from opsassist.tickets.types import AssignmentResult

_TIE_EPS = 1e-12


@dataclass(frozen=True)
class CauseModel:
    causes: tuple[str, ...]
    priors: Mapping[str, float]
    likelihoods: Mapping[str, Mapping[str, float]]  # feature -> cause -> P(f|c)
    alpha: float = 1.0

    def __post_init__(self) -> None:
        if not self.causes:
            raise ValueError("model needs at least one cause")
        if set(self.priors) != set(self.causes):
            raise ValueError("priors must cover exactly the causes")
        for prob in self.priors.values():
            if not (0.0 < prob <= 1.0):
                raise ValueError("priors must be in (0, 1]")
        for feature, row in self.likelihoods.items():
            if set(row) != set(self.causes):
                raise ValueError(f"likelihood row {feature!r} must cover every cause")
            for prob in row.values():
                if not (0.0 < prob <= 1.0):
                    raise ValueError(f"likelihood for {feature!r} out of (0, 1]")

    @property
    def vocabulary(self) -> tuple[str, ...]:
        return tuple(sorted(self.likelihoods))


def fit(
    examples: Sequence[tuple[Sequence[str], str]],
    causes: Sequence[str],
    alpha: float = 1.0,
    priors_override: Mapping[str, float] | None = None,
) -> CauseModel:
    """Estimate the probability tables from (features, cause) examples."""
    if not examples:
        raise EmptyTrainingSet("cannot fit a cause model with no labeled tickets")
    if alpha <= 0:
        raise ValueError("smoothing alpha must be positive")
    causes = tuple(causes)
    cause_set = set(causes)
    cause_counts: Counter[str] = Counter()
    feature_counts: dict[str, Counter[str]] = {}
    for features, cause in examples:
        if cause not in cause_set:
            raise ValueError(f"example labeled with unknown cause {cause!r}")
        cause_counts[cause] += 1
        for feature in set(features):
            feature_counts.setdefault(feature, Counter())[cause] += 1

    total = sum(cause_counts.values())
    if priors_override is not None:
        if set(priors_override) != cause_set:
            raise ValueError("prior override must cover exactly the causes")
        mass = sum(priors_override.values())
        if mass <= 0:
            raise ValueError("prior override must have positive mass")
        priors = {c: priors_override[c] / mass for c in causes}
    else:
        denom = total + alpha * len(causes)
        priors = {c: (cause_counts[c] + alpha) / denom for c in causes}

    likelihoods = {
        feature: {
            c: (counts[c] + alpha) / (cause_counts[c] + 2.0 * alpha) for c in causes
        }
        for feature, counts in feature_counts.items()
    }
    return CauseModel(causes=causes, priors=priors, likelihoods=likelihoods, alpha=alpha)


def _known_features(model: CauseModel, features: Iterable[str]) -> list[str]:
    # unseen features carry no signal under this model and are dropped
    return [f for f in dict.fromkeys(features) if f in model.likelihoods]


def log_joint_scores(model: CauseModel, features: Iterable[str]) -> dict[str, float]:
    known = _known_features(model, features)
    scores: dict[str, float] = {}
    for cause in model.causes:
        score = math.log(model.priors[cause])
        for feature in known:
            score += math.log(model.likelihoods[feature][cause])
        scores[cause] = score
    return scores


def joint_scores(model: CauseModel, features: Iterable[str]) -> dict[str, float]:
    """Unnormalized P(c) * prod P(f|c), evaluated in log space."""
    return {c: math.exp(s) for c, s in log_joint_scores(model, features).items()}


def posterior(model: CauseModel, features: Iterable[str]) -> dict[str, float]:
    log_scores = log_joint_scores(model, features)
    peak = max(log_scores.values())
    shifted = {c: math.exp(s - peak) for c, s in log_scores.items()}
    mass = sum(shifted.values())
    return {c: v / mass for c, v in shifted.items()}


def assign(
    model: CauseModel, features: Iterable[str], threshold: float = 0.8
) -> AssignmentResult:
    """Pick a cause automatically only when the posterior is confident."""
    post = posterior(model, features)
    ordered = sorted(post.items(), key=lambda kv: (-kv[1], kv[0]))
    best_cause, best_prob = ordered[0]
    tied = len(ordered) > 1 and abs(ordered[1][1] - best_prob) <= _TIE_EPS
    if best_prob >= threshold and not tied:
        return AssignmentResult(
            cause=best_cause, confidence=best_prob, decision="auto", posterior=post
        )
    return AssignmentResult(
        cause=None, confidence=best_prob, decision="manual_review", posterior=post
    )


def model_to_dict(model: CauseModel) -> dict:
    return {
        "causes": list(model.causes),
        "alpha": model.alpha,
        "priors": {c: model.priors[c] for c in model.causes},
        "likelihoods": {
            f: {c: row[c] for c in model.causes}
            for f, row in sorted(model.likelihoods.items())
        },
    }


def model_from_dict(raw: Mapping) -> CauseModel:
    return CauseModel(
        causes=tuple(raw["causes"]),
        priors=dict(raw["priors"]),
        likelihoods={f: dict(row) for f, row in raw["likelihoods"].items()},
        alpha=float(raw.get("alpha", 1.0)),
    )
