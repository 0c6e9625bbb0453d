#!/usr/bin/env python3
"""Regenerate the checked-in replay fixtures under tests/data/.

Fixtures key on request fingerprints, which cover the exact prompt bytes, so
any change to the templates, the toy datasets, or the generation defaults
requires rerunning this script:

    python3 scripts/make_fixtures.py
"""

from __future__ import annotations

import sys
from pathlib import Path

REPO = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(REPO / "src"))

from cotkt.backend import fingerprint, write_replay_fixture  # noqa: E402
from cotkt.config import load_config  # noqa: E402
from cotkt.datasets import load_dataset  # noqa: E402
from cotkt.prompting import render_cot_prompt, render_inference_prompt  # noqa: E402

DATA = REPO / "tests" / "data"

# Teacher replies, keyed by toy_sentiment row order. Six answer correctly,
# one answers wrongly, one never commits to a letter.
TEACHER_REPLIES = [
    "Explanation: The phrase 'rollicking good time' signals enjoyment and fun, so the"
    " speaker is praising the experience. Answer and Confidence (0-100): A, 95",
    "Explanation: Recognizable, relatable everyday drama is framed as a strength here;"
    " the sentence admires what the film shows. Answer and Confidence (0-100): A, 90",
    "Explanation: Words like 'bleak', 'cynical' and 'tedium' are strongly negative"
    " descriptors of the experience. Answer and Confidence (0-100): B, 85",
    "Explanation: 'Charming' is a compliment and 'uniformly' extends it to the whole"
    " cast. Answer and Confidence (0-100): A, 80",
    "Explanation: Calling a film an 'utterly forgettable mess' condemns it outright."
    " Answer and Confidence (0-100): B, 90",
    "Explanation: 'Moving' and 'beautifully shot' both praise the film's emotional and"
    " visual quality. Answer and Confidence (0-100): A, 85",
    "Explanation: The plot carries real weight and substance, which reads as praise of"
    " the storytelling. Answer and Confidence (0-100): A, 75",
    "Explanation: The writing is praised for sharpness and warmth alike. Overall this"
    " reads favorably, though no single option stands out to me.",
]

# Student replies for the same items: five right, two confidently wrong, one
# unparseable.
STUDENT_REPLIES = [
    "Answer and Confidence (0-100): A, 90",
    "Answer and Confidence (0-100): A, 85",
    "Answer and Confidence (0-100): A, 90",
    "Answer and Confidence (0-100): A, 70",
    "Answer and Confidence (0-100): B, 60",
    "Answer and Confidence (0-100): B, 95",
    "Answer and Confidence (0-100): B, 55",
    "I am not sure about this one.",
]


def main() -> None:
    cfg = load_config(DATA / "config.json")
    items = load_dataset(cfg.datasets["toy_sentiment"])
    assert len(items) == len(TEACHER_REPLIES) == len(STUDENT_REPLIES)

    teacher_model = cfg.backends["teacher_replay"].model
    student_model = cfg.backends["student_replay"].model

    teacher_entries = []
    student_entries = []
    for item, teacher_reply, student_reply in zip(items, TEACHER_REPLIES, STUDENT_REPLIES):
        cot_prompt = render_cot_prompt(item)
        teacher_entries.append(
            {
                "fingerprint": fingerprint(cot_prompt, cfg.generation, teacher_model),
                "raw_text": teacher_reply,
            }
        )
        inf_prompt = render_inference_prompt(item)
        student_entries.append(
            {
                "fingerprint": fingerprint(inf_prompt, cfg.generation, student_model),
                "raw_text": student_reply,
            }
        )

    write_replay_fixture(DATA / "replay_teacher.jsonl", teacher_entries)
    write_replay_fixture(DATA / "replay_student.jsonl", student_entries)
    print(f"wrote {DATA / 'replay_teacher.jsonl'} ({len(teacher_entries)} entries)")
    print(f"wrote {DATA / 'replay_student.jsonl'} ({len(student_entries)} entries)")


if __name__ == "__main__":
    main()
