"""Change-intent extraction from commit messages.

Two interchangeable extractors produce the same structured record: a
remote JSON-over-HTTP completion endpoint driven by the embedded system
prompt, and a deterministic keyword-rule fallback for offline runs.
"""
from __future__ import annotations

import json
import re
import urllib.error
import urllib.request
from dataclasses import dataclass

EXTRACTION_PROMPT = """\
You are an expert hardware specification analysis assistant.
Your input is a Git commit message describing RTL or hardware design changes.
Your task is to analyze it and return a structured JSON object.

Classification criteria:
- "Functional": The change affects externally observable or software-visible behavior
  (e.g., new modes, states, interrupts, alerts, thresholds, bit-widths, register fields,
  handshake protocols, clock/reset/idle/timing semantics, or architectural functionality).
- "Non-Functional": The change is purely refactoring, code movement, renaming, formatting,
  CI/scripts, comments, documentation, or testbench-only fixes.
- "Unclear": The message is too short or lacks sufficient behavioral detail
  to generate a reliable before/after summary.

Confidence score (0-1):
- Behavioral Clarity (0-0.8): How clearly the message describes what changed,
  what module or signal it affects, and under what condition.
- Consistency (0-0.2): Whether the message is internally consistent and unambiguous.
confidence = Clarity + Consistency.

Your tasks are:
1. Classify the message as "Functional", "Non-Functional", or "Unclear".
2. Provide a "confidence" score from 0 to 1.
3. Provide a concise "rationale" for the classification and score.
4. Generate concise "S_old" and "S_new" summaries (max 2 sentences each).
   - They should describe the module behavior before and after the change.
   - Do NOT include file paths or line numbers.
5. Extract "Context"
   - Summarize only the functional points or behavioral aspects of the affected module or its submodules that are explicitly mentioned in the commit message.
   - Do NOT infer or assume any functionality based on module names, signal names, or general domain knowledge. If the commit message does not explicitly describe any internal functionality or behavior, set this field to an empty string ("").
   - Do NOT describe what was changed, added, or fixed; those belong in "S_old" and "S_new".
6. Extract "Intention" - the design motivation or purpose of the change,
   such as fixing timing issues, adding safety logic, improving coverage, or enabling new functionality.

You MUST output only a single valid JSON object in the exact format below:

{
  "label": "",
  "confidence": 0.0,
  "rationale": "",
  "Context": "",
  "Intention": "",
  "S_old": "",
  "S_new": ""
}
"""

LABELS = ("Functional", "NonFunctional", "Unclear")


class MalformedOutput(ValueError):
    pass


class RemoteUnavailable(RuntimeError):
    pass


@dataclass(frozen=True)
class DeltaSpec:
    label: str
    confidence: float
    rationale: str
    context: str
    intention: str
    s_old: str
    s_new: str

    def to_json_dict(self) -> dict:
        return {"label": self.label, "confidence": self.confidence,
                "rationale": self.rationale, "context": self.context,
                "intention": self.intention, "s_old": self.s_old,
                "s_new": self.s_new}

    @classmethod
    def from_json_dict(cls, d: dict) -> "DeltaSpec":
        return cls(d["label"], float(d["confidence"]), d["rationale"],
                   d["context"], d["intention"], d["s_old"], d["s_new"])


class RemoteExtractor:
    """Completion endpoint: POST {prompt, message}, read {completion}."""

    def __init__(self, endpoint: str, timeout: float = 30.0):
        self.endpoint = endpoint
        self.timeout = timeout

    def extract(self, message: str) -> str:
        body = json.dumps({"prompt": EXTRACTION_PROMPT,
                           "message": message}).encode()
        req = urllib.request.Request(
            self.endpoint, data=body,
            headers={"Content-Type": "application/json"})
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                payload = json.loads(resp.read().decode())
        except (urllib.error.URLError, OSError, ValueError) as exc:
            raise RemoteUnavailable(str(exc)) from exc
        if "completion" not in payload:
            raise MalformedOutput("endpoint response lacks 'completion'")
        return payload["completion"]


# Verbs that signal a behavioral edit and nouns naming hardware behavior.
# Both chosen to be conservative: a message must hit one of each to be
# called Functional by the offline classifier.
EDIT_VERBS = frozenset("""
add adds added fix fixes fixed correct corrects corrected change changes
changed remove removes removed extend extends extended widen widens widened
invert inverts inverted enable enables enabled disable disables disabled
implement implements implemented handle handles handled support supports
supported increase increases increased decrease decreases decreased gate
gates gated prevent prevents prevented
""".split())

BEHAVIOR_NOUNS = frozenset("""
reset clock clocks interrupt interrupts fifo counter counters state states
register registers threshold thresholds overflow underflow parity alert
alerts mode modes handshake width depth timing flag flags signal signals
output outputs input inputs edge edges bit bits field fields mask saturation
wrap latch glitch arbitration priority strobe valid ready enable back
pressure
""".split())

NONFUNCTIONAL_TERMS = frozenset("""
rename renames renamed renaming format formats formatted formatting lint
whitespace indent indentation typo typos comment comments copyright license
licensing doc docs documentation readme changelog ci style styles refactor
refactors refactored refactoring cleanup reorder reorders reordered move
moves moved header headers testbench
""".split())

_WORD_RE = re.compile(r"[a-z][a-z_]*")
_SENT_SPLIT_RE = re.compile(r"(?<=[.!?])\s+")
_PATH_RE = re.compile(
    r"\S*[/\\]\S+|\b\w+\.(?:sv|svh|v|vh|py|md|txt|json|yaml|yml)\b(?::\d+)?"
    r"|\bline\s+\d+\b", re.IGNORECASE)


def _first_sentence(message: str) -> str:
    line = message.strip().splitlines()[0] if message.strip() else ""
    line = _PATH_RE.sub("", line).strip(" .:,-")
    return re.sub(r"\s+", " ", line)


class FallbackExtractor:
    """Keyword-rule classifier with templated summaries.

    Deterministic by construction: the same message always yields the
    same record, which keeps mining reruns byte-identical.
    """

    def extract(self, message: str) -> str:
        words = set(_WORD_RE.findall(message.lower()))
        verbs = words & EDIT_VERBS
        nouns = words & BEHAVIOR_NOUNS
        nonfunc = words & NONFUNCTIONAL_TERMS
        head = _first_sentence(message)
        if nonfunc and not nouns:
            record = {
                "label": "Non-Functional", "confidence": 0.9,
                "rationale": "Message only mentions non-behavioral work: "
                             + ", ".join(sorted(nonfunc)) + ".",
                "Context": "", "Intention": head, "S_old": "", "S_new": "",
            }
        elif verbs and nouns:
            record = {
                "label": "Functional", "confidence": 0.75,
                "rationale": "Edit verbs (" + ", ".join(sorted(verbs))
                             + ") target behavioral terms ("
                             + ", ".join(sorted(nouns)) + ").",
                "Context": "",
                "Intention": head,
                "S_old": "The design did not yet reflect the request: "
                         + head + ".",
                "S_new": "The design now reflects the request: " + head + ".",
            }
        else:
            record = {
                "label": "Unclear", "confidence": 0.3,
                "rationale": "Message lacks a clear behavioral description.",
                "Context": "", "Intention": head, "S_old": "", "S_new": "",
            }
        return json.dumps(record)


def _repair(raw: str) -> str:
    """One lightweight pass: strip text around the JSON object."""
    start, end = raw.find("{"), raw.rfind("}")
    if start < 0 or end <= start:
        return raw
    return raw[start:end + 1]


def _parse_record(raw: str) -> DeltaSpec:
    try:
        d = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise MalformedOutput(f"not valid JSON: {exc}") from exc
    if not isinstance(d, dict):
        raise MalformedOutput("output is not a JSON object")
    required = ("label", "confidence", "rationale", "Context", "Intention",
                "S_old", "S_new")
    missing = [k for k in required if k not in d]
    if missing:
        raise MalformedOutput(f"missing keys: {missing}")
    label = str(d["label"]).replace("-", "")
    if label not in LABELS:
        raise MalformedOutput(f"unknown label {d['label']!r}")
    try:
        confidence = float(d["confidence"])
    except (TypeError, ValueError) as exc:
        raise MalformedOutput("confidence is not numeric") from exc
    return DeltaSpec(label=label, confidence=confidence,
                     rationale=str(d["rationale"]), context=str(d["Context"]),
                     intention=str(d["Intention"]), s_old=str(d["S_old"]),
                     s_new=str(d["S_new"]))


def extract_delta_spec(message: str, extractor) -> DeltaSpec:
    """Run an extractor and validate its output, repairing once."""
    raw = extractor.extract(message)
    try:
        return _parse_record(raw)
    except MalformedOutput:
        repaired = _repair(raw)
        if repaired == raw:
            raise
        return _parse_record(repaired)


def split_sentences(text: str) -> list[str]:
    return [s for s in _SENT_SPLIT_RE.split(text.strip()) if s]


def scrub_paths_and_lines(text: str) -> str:
    return re.sub(r"\s+", " ", _PATH_RE.sub("", text)).strip()
