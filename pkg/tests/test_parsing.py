from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cotkt.parsing import (
    STATUS_AMBIGUOUS,
    STATUS_NO_ANSWER,
    STATUS_NO_CONFIDENCE,
    STATUS_OK,
    STATUSES,
    parse_cot_reply,
    parse_prediction,
)

AB = ("A", "B")
ABCD = ("A", "B", "C", "D")


def check(raw, labels, answer, confidence, status):
    got = parse_prediction(raw, labels)
    assert (got.answer_label, got.confidence_pct, got.status) == (answer, confidence, status)


class TestAnchoredReplies:
    def test_canonical_line(self):
        check("Answer and Confidence (0-100): A, 90", AB, "A", 90, STATUS_OK)

    @pytest.mark.parametrize(
        "raw",
        [
            "answer and confidence (0-100): B, 75",
            "ANSWER AND CONFIDENCE (0-100): B, 75",
            "Answer and Confidence: B, 75",
            "Answer and Confidence (0 - 100): B, 75",
            "Answer and Confidence (1-100): B, 75",
            "Answer and Confidence (0-100) B, 75",
        ],
    )
    def test_anchor_variants(self, raw):
        check(raw, AB, "B", 75, STATUS_OK)

    @pytest.mark.parametrize(
        "raw",
        [
            "Answer and Confidence (0-100): (B), 75",
            "Answer and Confidence (0-100): [B], 75",
            "Answer and Confidence (0-100): B, 75%",
            "Answer and Confidence (0-100): **B**, 75",
            "Answer and Confidence (0-100):B,75",
        ],
    )
    def test_letter_decorations(self, raw):
        check(raw, AB, "B", 75, STATUS_OK)

    def test_last_anchor_wins(self):
        raw = (
            "Answer and Confidence (0-100): A, 40\n"
            "Wait, on reflection...\n"
            "Answer and Confidence (0-100): B, 85"
        )
        check(raw, AB, "B", 85, STATUS_OK)

    def test_answer_without_number(self):
        check("Answer and Confidence (0-100): B", AB, "B", None, STATUS_NO_CONFIDENCE)

    def test_number_without_valid_letter(self):
        check("Answer and Confidence (0-100): E, 70", AB, None, 70, STATUS_NO_ANSWER)

    def test_two_distinct_letters_before_number(self):
        check("Answer and Confidence (0-100): A or B, 60", AB, None, 60, STATUS_AMBIGUOUS)

    def test_same_letter_twice_is_not_ambiguous(self):
        check("Answer and Confidence (0-100): B (B), 60", AB, "B", 60, STATUS_OK)

    def test_overflow_confidence_never_clamped(self):
        check("Answer and Confidence (0-100): A, 900", AB, "A", None, STATUS_AMBIGUOUS)

    def test_empty_tail(self):
        check("Answer and Confidence (0-100):", AB, None, None, STATUS_NO_ANSWER)


class TestConfidenceNumbers:
    def test_decimal_proportion_scales_up(self):
        check("Answer and Confidence (0-100): A, 0.9", AB, "A", 90, STATUS_OK)

    def test_decimal_percentage_rounds_half_up(self):
        check("Answer and Confidence (0-100): A, 87.5", AB, "A", 88, STATUS_OK)

    def test_zero_and_hundred_stay(self):
        check("Answer and Confidence (0-100): A, 0", AB, "A", 0, STATUS_OK)
        check("Answer and Confidence (0-100): A, 100", AB, "A", 100, STATUS_OK)

    def test_one_point_zero_is_not_a_proportion(self):
        # 1.0 is not strictly inside (0, 1); it reads as 1 percent.
        check("Answer and Confidence (0-100): A, 1.0", AB, "A", 1, STATUS_OK)


class TestUnanchoredReplies:
    def test_bare_letter_comma_number(self):
        check("B, 80", AB, "B", 80, STATUS_OK)

    def test_last_pair_wins(self):
        check("A, 10 ... final: B, 80", AB, "B", 80, STATUS_OK)

    def test_answer_phrase_with_confidence_phrase(self):
        check("My answer is B with confidence 80.", AB, "B", 80, STATUS_OK)

    def test_reversed_order_phrases(self):
        check("Confidence: 90. Answer: B.", AB, "B", 90, STATUS_OK)

    def test_option_phrase(self):
        check("Option B.", AB, "B", None, STATUS_NO_CONFIDENCE)

    def test_percent_alone(self):
        check("I'd put it at 85%", AB, None, 85, STATUS_NO_ANSWER)

    def test_lone_standalone_letter(self):
        check("B", AB, "B", None, STATUS_NO_CONFIDENCE)

    def test_lowercase_letter_needs_following_punctuation(self):
        check("b.", AB, "B", None, STATUS_NO_CONFIDENCE)
        check("I saw b yesterday", AB, None, None, STATUS_NO_ANSWER)

    def test_article_a_is_not_an_answer(self):
        check("It was a good film overall.", AB, None, None, STATUS_NO_ANSWER)

    def test_plain_refusal(self):
        check("I am not sure about this one.", AB, None, None, STATUS_NO_ANSWER)

    def test_letters_outside_label_set_ignored(self):
        # Without an anchor a bare number is not trusted as a confidence.
        check("D, 70", AB, None, None, STATUS_NO_ANSWER)
        check("D, 70", ABCD, "D", 70, STATUS_OK)


class TestCotReplies:
    def test_explanation_extracted_and_normalized(self):
        raw = (
            "Explanation: The tone is warm.\n"
            "It praises   the film.\n"
            "Answer and Confidence (0-100): A, 90"
        )
        explanation, prediction = parse_cot_reply(raw, AB)
        assert explanation == "The tone is warm. It praises the film."
        assert prediction.explanation == explanation
        assert (prediction.answer_label, prediction.confidence_pct) == ("A", 90)
        assert prediction.status == STATUS_OK

    def test_without_marker_everything_before_anchor_is_explanation(self):
        raw = "The film drags badly. Answer and Confidence (0-100): B, 70"
        explanation, _ = parse_cot_reply(raw, AB)
        assert explanation == "The film drags badly."

    def test_explanation_stops_at_last_anchor(self):
        raw = (
            "Explanation: first pass. Answer and Confidence (0-100): A, 40 "
            "Explanation: second pass. Answer and Confidence (0-100): B, 80"
        )
        explanation, prediction = parse_cot_reply(raw, AB)
        assert explanation.startswith("first pass.")
        assert "second pass." in explanation
        assert prediction.answer_label == "B"

    def test_unparseable_reply_keeps_explanation(self):
        raw = "Explanation: It reads favorably, though nothing stands out."
        explanation, prediction = parse_cot_reply(raw, AB)
        assert explanation == "It reads favorably, though nothing stands out."
        assert prediction.status == STATUS_NO_ANSWER


class TestTotality:
    @settings(max_examples=400, deadline=None)
    @given(raw=st.text(max_size=300))
    def test_never_raises_and_stays_in_contract(self, raw):
        got = parse_prediction(raw, ABCD)
        assert got.status in STATUSES
        assert got.answer_label in (None, *ABCD)
        assert got.confidence_pct is None or 0 <= got.confidence_pct <= 100
        if got.status == STATUS_OK:
            assert got.answer_label is not None and got.confidence_pct is not None
        if got.status == STATUS_NO_CONFIDENCE:
            assert got.answer_label is not None and got.confidence_pct is None

    @settings(max_examples=200, deadline=None)
    @given(
        prefix=st.text(max_size=80),
        label=st.sampled_from(ABCD),
        confidence=st.integers(min_value=0, max_value=100),
    )
    def test_trailing_anchor_always_wins(self, prefix, label, confidence):
        raw = f"{prefix}\nAnswer and Confidence (0-100): {label}, {confidence}"
        got = parse_prediction(raw, ABCD)
        assert (got.answer_label, got.confidence_pct, got.status) == (
            label,
            confidence,
            STATUS_OK,
        )

    @settings(max_examples=200, deadline=None)
    @given(raw=st.text(max_size=200))
    def test_cot_parse_is_total_too(self, raw):
        explanation, prediction = parse_cot_reply(raw, AB)
        assert isinstance(explanation, str)
        assert prediction.explanation == explanation
        assert prediction.status in STATUSES
