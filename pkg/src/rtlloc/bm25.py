"""Okapi BM25 baseline with identifier-aware tokenization."""
from __future__ import annotations

import math
import re
from collections import Counter

_WORD_RE = re.compile(r"[A-Za-z0-9_$]+")
_CAMEL_RE = re.compile(r"[A-Z]?[a-z0-9$]+|[A-Z]+(?![a-z])")


def tokenize_identifier_aware(text: str) -> list[str]:
    """Words plus their underscore/camel-case splits, lowercased."""
    out: list[str] = []
    for word in _WORD_RE.findall(text):
        out.append(word.lower())
        parts: list[str] = []
        for chunk in word.split("_"):
            if chunk:
                parts.extend(m.lower() for m in _CAMEL_RE.findall(chunk))
        if len(parts) > 1 or (parts and parts[0] != word.lower()):
            out.extend(parts)
    return out


class Bm25Index:
    """Okapi BM25 with idf = ln(1 + (N - n + 0.5) / (n + 0.5))."""

    def __init__(self, doc_ids: list[str], texts: list[str],
                 k1: float = 1.2, b: float = 0.75):
        self.doc_ids = list(doc_ids)
        self.k1, self.b = k1, b
        self.docs = [Counter(tokenize_identifier_aware(t)) for t in texts]
        self.doc_lens = [sum(c.values()) for c in self.docs]
        n_docs = max(1, len(self.docs))
        self.avgdl = sum(self.doc_lens) / n_docs if self.doc_lens else 1.0
        df = Counter()
        for c in self.docs:
            df.update(c.keys())
        self.idf = {t: math.log(1.0 + (len(self.docs) - n + 0.5) / (n + 0.5))
                    for t, n in df.items()}

    def scores(self, query: str) -> list[float]:
        q_terms = tokenize_identifier_aware(query)
        out = []
        for tf, dl in zip(self.docs, self.doc_lens):
            norm = self.k1 * (1.0 - self.b + self.b * dl / max(self.avgdl, 1e-12))
            s = 0.0
            for t in q_terms:
                f = tf.get(t, 0)
                if f:
                    s += self.idf[t] * f * (self.k1 + 1.0) / (f + norm)
            out.append(s)
        return out

    def rank(self, query: str) -> list[str]:
        sc = self.scores(query)
        order = sorted(range(len(self.doc_ids)),
                       key=lambda i: (-sc[i], self.doc_ids[i]))
        return [self.doc_ids[i] for i in order]


def bm25_rank(query: str, block_ids: list[str], texts: list[str],
              k1: float = 1.2, b: float = 0.75) -> list[str]:
    return Bm25Index(block_ids, texts, k1, b).rank(query)
