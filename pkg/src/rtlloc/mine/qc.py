"""Ordered quality-control rules over mined change instances.

Rules run in a fixed order and a rejection carries exactly the first
failing rule's code, so tests can pin both the verdict and the reason.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

from ..bm25 import tokenize_identifier_aware
from .core import ChangeInstance
from .extract import (EDIT_VERBS, scrub_paths_and_lines, split_sentences)

# Common words that never count as technical entities when checking that
# the extracted text stays grounded in the commit message.
_STOPWORDS = frozenset("""
the a an and or of to in for on with that this is are was were be been has
have had not now when while under after before into from by as at it its
module design behavior change request does did
""".split())

RULE_ORDER = ("schema", "label", "summary_format", "context_edit_verb",
              "entity_grounding", "oversized", "low_confidence")


@dataclass(frozen=True)
class QcResult:
    accepted: bool
    reason: str | None  # first failing rule code, None when accepted
    instance: ChangeInstance | None  # normalized copy when accepted


def _technical_tokens(text: str) -> set[str]:
    return {t for t in tokenize_identifier_aware(text)
            if len(t) >= 3 and t not in _STOPWORDS and not t.isdigit()}


def qc_filter(instance: ChangeInstance, message: str,
              min_confidence: float = 0.6, max_blocks: int = 25,
              grounding_threshold: float = 0.5) -> QcResult:
    ds = instance.delta_spec

    if not (isinstance(ds.confidence, float)
            and 0.0 <= ds.confidence <= 1.0
            and instance.affected_block_ids):
        return QcResult(False, "schema", None)

    if ds.label != "Functional":
        return QcResult(False, "label", None)

    scrubbed = {}
    for name, text in (("s_old", ds.s_old), ("s_new", ds.s_new)):
        clean = scrub_paths_and_lines(text)
        if not clean or len(split_sentences(clean)) > 2:
            return QcResult(False, "summary_format", None)
        scrubbed[name] = clean
    ds = replace(ds, s_old=scrubbed["s_old"], s_new=scrubbed["s_new"])

    if set(w.lower() for w in ds.context.split()) & EDIT_VERBS:
        return QcResult(False, "context_edit_verb", None)

    claimed = _technical_tokens(ds.context) | _technical_tokens(ds.intention)
    if claimed:
        supported = claimed & _technical_tokens(message)
        if len(supported) / len(claimed) < grounding_threshold:
            return QcResult(False, "entity_grounding", None)

    blocks = sorted(set(instance.affected_block_ids))
    if len(blocks) > max_blocks:
        return QcResult(False, "oversized", None)

    if ds.confidence < min_confidence:
        return QcResult(False, "low_confidence", None)

    normalized = ChangeInstance(delta_spec=ds, affected_block_ids=blocks,
                                commit_id=instance.commit_id,
                                ip_name=instance.ip_name)
    return QcResult(True, None, normalized)
