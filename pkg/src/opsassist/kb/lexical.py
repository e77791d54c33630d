"""TF-IDF lexical scoring over small in-memory corpora."""

from __future__ import annotations

import math
from collections import Counter
from typing import Sequence

from opsassist.textutil import tokenize


class LexicalIndex:
    def __init__(self, docs: Sequence[str]):
        self._n = len(docs)
        self._doc_weights: list[dict[str, float]] = []
        df: Counter[str] = Counter()
        doc_tfs: list[Counter[str]] = []
        for doc in docs:
            tf = Counter(tokenize(doc))
            doc_tfs.append(tf)
            df.update(tf.keys())
        self._idf = {
            term: math.log((self._n + 1) / (count + 1)) + 1.0 for term, count in df.items()
        }
        for tf in doc_tfs:
            weights = {term: count * self._idf[term] for term, count in tf.items()}
            norm = math.sqrt(sum(w * w for w in weights.values()))
            if norm > 0:
                weights = {t: w / norm for t, w in weights.items()}
            self._doc_weights.append(weights)

    def __len__(self) -> int:
        return self._n

    def score(self, query: str) -> list[float]:
        qtf = Counter(tokenize(query))
        qweights = {t: c * self._idf.get(t, 0.0) for t, c in qtf.items()}
        qnorm = math.sqrt(sum(w * w for w in qweights.values()))
        if qnorm == 0:
            return [0.0] * self._n
        qweights = {t: w / qnorm for t, w in qweights.items() if w != 0.0}
        scores: list[float] = []
        for weights in self._doc_weights:
            if len(qweights) < len(weights):
                small, big = qweights, weights
            else:
                small, big = weights, qweights
            scores.append(sum(w * big.get(t, 0.0) for t, w in small.items()))
        return scores

    def top(self, query: str, n: int) -> list[tuple[int, float]]:
        """Indices of the n best positive-scoring docs; ties break on index."""
        scores = self.score(query)
        hits = [(i, s) for i, s in enumerate(scores) if s > 0.0]
        hits.sort(key=lambda pair: (-pair[1], pair[0]))
        return hits[:n]
