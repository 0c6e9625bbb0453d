"""Total parsers for model replies carrying an answer and a confidence.

Replies are expected to end with an ``Answer and Confidence (0-100): B, 80``
line, but models drift: the range annotation disappears, case wobbles, the
letter picks up brackets, the whole anchor goes missing, or the model talks
itself into answering twice. The parsers here never raise on text input;
instead every reply maps to a :class:`ParsedPrediction` whose ``status`` says
how much was recovered:

* ``ok``: both an answer letter and a confidence percentage were read.
* ``no_answer``: no usable answer letter was found.
* ``no_confidence``: an answer was found but no number for it.
* ``ambiguous``: the reply committed to nothing parseable (two different
  letters at one anchor, or a confidence above 100, which is never clamped).

When several anchors appear the last one wins, on the theory that a model
revising itself settles on its final line. Without any anchor a fallback scan
looks for ``B, 80``-style pairs, then for ``answer is B`` / ``confidence: 80``
phrasings. Confidence values written as a decimal proportion strictly between
0 and 1 (``0.9``) are read as percentages (90); whole numbers stay as given.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from typing import Collection

STATUS_OK = "ok"
STATUS_NO_ANSWER = "no_answer"
STATUS_NO_CONFIDENCE = "no_confidence"
STATUS_AMBIGUOUS = "ambiguous"
STATUSES = (STATUS_OK, STATUS_NO_ANSWER, STATUS_NO_CONFIDENCE, STATUS_AMBIGUOUS)

_ANCHOR_RE = re.compile(
    r"answer\s+and\s+confidence(?:\s*\(\s*\d+\s*-\s*\d+\s*\))?\s*:?", re.IGNORECASE
)
_EXPLANATION_RE = re.compile(r"explanation\s*:\s*", re.IGNORECASE)
_NUMBER_RE = re.compile(r"\d+(?:\.\d+)?")
_UPPER_LETTER_RE = re.compile(r"(?<![A-Za-z])([A-Z])(?![A-Za-z])")
_LOWER_LETTER_RE = re.compile(r"(?<![A-Za-z])([a-z])(?![A-Za-z])")
_LETTER_COMMA_NUMBER_RE = re.compile(
    r"(?<![A-Za-z])([A-Za-z])[\)\]]?\s*,\s*(\d+(?:\.\d+)?)\s*%?"
)
_ANSWER_PHRASE_RE = re.compile(
    r"(?:answer|option|choice)\s*(?:is|:|-)?\s*[\(\[]?([A-Za-z])[\)\]]?(?![A-Za-z])",
    re.IGNORECASE,
)
_CONFIDENCE_PHRASE_RE = re.compile(
    r"confidence(?:\s*(?:level|score))?\s*(?:is|:|=|of)?\s*[\(\[]?(\d+(?:\.\d+)?)\s*%?",
    re.IGNORECASE,
)
_PERCENT_RE = re.compile(r"(\d+(?:\.\d+)?)\s*%")

# A lowercase letter only counts as an answer when punctuation follows it,
# so the article in "a good film" never reads as option A.
_LOWER_FOLLOWERS = set(",.:;)]%!?")


@dataclass(frozen=True)
class ParsedPrediction:
    """What one reply yielded: answer letter, confidence percent, status."""

    answer_label: str | None
    confidence_pct: int | None
    explanation: str | None
    status: str


def _normalize_ws(text: str) -> str:
    return " ".join(text.split())


def _candidate_letters(text: str, labels: Collection[str]) -> list[tuple[int, str]]:
    """Standalone letters that are valid labels, as (position, LETTER) pairs."""
    found = [
        (m.start(1), m.group(1))
        for m in _UPPER_LETTER_RE.finditer(text)
        if m.group(1) in labels
    ]
    if found:
        return found
    lowered = []
    for m in _LOWER_LETTER_RE.finditer(text):
        letter = m.group(1).upper()
        if letter not in labels:
            continue
        nxt = text[m.end(1) : m.end(1) + 1]
        if nxt == "" or nxt in _LOWER_FOLLOWERS:
            lowered.append((m.start(1), letter))
    return lowered


def _read_confidence(token: str) -> tuple[int | None, bool]:
    """Map a numeric token to a percentage; (None, True) marks it unusable."""
    value = float(token)
    if "." in token and 0 < value < 1:
        value *= 100
    if value > 100:
        return None, True
    return int(value + 0.5), False


def _parse_after_anchor(tail: str, labels: Collection[str]) -> ParsedPrediction:
    letters = _candidate_letters(tail, labels)
    if not letters:
        number = _NUMBER_RE.search(tail)
        confidence = None
        if number:
            confidence, overflow = _read_confidence(number.group(0))
            if overflow:
                return ParsedPrediction(None, None, None, STATUS_AMBIGUOUS)
        return ParsedPrediction(None, confidence, None, STATUS_NO_ANSWER)

    first_pos, first_letter = letters[0]
    number = None
    for m in _NUMBER_RE.finditer(tail):
        if m.start() > first_pos:
            number = m
            break

    span_end = number.start() if number else len(tail)
    distinct = {letter for pos, letter in letters if pos < span_end}
    if len(distinct) > 1:
        confidence = None
        if number:
            confidence, overflow = _read_confidence(number.group(0))
            if overflow:
                confidence = None
        return ParsedPrediction(None, confidence, None, STATUS_AMBIGUOUS)

    if number is None:
        return ParsedPrediction(first_letter, None, None, STATUS_NO_CONFIDENCE)
    confidence, overflow = _read_confidence(number.group(0))
    if overflow:
        return ParsedPrediction(first_letter, None, None, STATUS_AMBIGUOUS)
    return ParsedPrediction(first_letter, confidence, None, STATUS_OK)


def _parse_unanchored(raw: str, labels: Collection[str]) -> tuple[ParsedPrediction, int]:
    """Fallback parse when no anchor exists; returns (prediction, answer position)."""
    pair = None
    for m in _LETTER_COMMA_NUMBER_RE.finditer(raw):
        if m.group(1).upper() in labels:
            pair = m
    if pair is not None:
        confidence, overflow = _read_confidence(pair.group(2))
        if overflow:
            return ParsedPrediction(pair.group(1).upper(), None, None, STATUS_AMBIGUOUS), pair.start()
        return (
            ParsedPrediction(pair.group(1).upper(), confidence, None, STATUS_OK),
            pair.start(),
        )

    answer = None
    answer_pos = len(raw)
    for m in _ANSWER_PHRASE_RE.finditer(raw):
        if m.group(1).upper() in labels:
            answer = m.group(1).upper()
            answer_pos = m.start()
    if answer is None:
        letters = _candidate_letters(raw, labels)
        if letters:
            answer_pos, answer = letters[-1]

    confidence = None
    overflow = False
    conf_match = None
    for m in _CONFIDENCE_PHRASE_RE.finditer(raw):
        conf_match = m
    if conf_match is None:
        for m in _PERCENT_RE.finditer(raw):
            conf_match = m
    if conf_match is not None:
        confidence, overflow = _read_confidence(conf_match.group(1))

    if overflow:
        return ParsedPrediction(answer, None, None, STATUS_AMBIGUOUS), answer_pos
    if answer is not None and confidence is not None:
        return ParsedPrediction(answer, confidence, None, STATUS_OK), answer_pos
    if answer is not None:
        return ParsedPrediction(answer, None, None, STATUS_NO_CONFIDENCE), answer_pos
    return ParsedPrediction(None, confidence, None, STATUS_NO_ANSWER), answer_pos


def _parse(raw: str, labels: Collection[str]) -> tuple[ParsedPrediction, int]:
    """Shared parse; the int is where the answer section starts in ``raw``."""
    anchors = list(_ANCHOR_RE.finditer(raw))
    if anchors:
        last = anchors[-1]
        return _parse_after_anchor(raw[last.end() :], labels), last.start()
    return _parse_unanchored(raw, labels)


def parse_prediction(raw: str, valid_labels: Collection[str]) -> ParsedPrediction:
    """Parse an answer/confidence reply; total over any text input."""
    prediction, _ = _parse(raw, set(valid_labels))
    return prediction


def parse_cot_reply(raw: str, valid_labels: Collection[str]) -> tuple[str, ParsedPrediction]:
    """Parse a teacher reply into (explanation, prediction).

    The explanation is the whitespace-normalized text between the first
    ``Explanation:`` marker and the answer section; without a marker it is
    everything before the answer section.
    """
    prediction, boundary = _parse(raw, set(valid_labels))
    marker = None
    for m in _EXPLANATION_RE.finditer(raw[:boundary]):
        marker = m
        break
    if marker is not None:
        explanation = _normalize_ws(raw[marker.end() : boundary])
    else:
        explanation = _normalize_ws(raw[:boundary])
    return explanation, replace(prediction, explanation=explanation)
