from __future__ import annotations

import pytest

from cotkt.errors import FileMissing
from cotkt.prompting import (
    ANCHOR,
    render_cot_prompt,
    render_inference_prompt,
    render_options,
)

from conftest import make_item


def test_render_options_single_line():
    item = make_item(0, n_options=3)
    assert render_options(item.options) == "A. option a B. option b C. option c"


def test_cot_prompt_contains_question_options_and_anchor():
    item = make_item(1, question="was the film good?")
    prompt = render_cot_prompt(item)
    assert "was the film good?" in prompt.text
    assert "A. option a B. option b" in prompt.text
    assert ANCHOR in prompt.text
    assert "Explanation:" in prompt.text
    assert prompt.template_id == "cot_extraction"
    assert prompt.item_id == item.id


def test_inference_prompt_asks_for_answer_line_only():
    item = make_item(2, question="fun for everyone")
    prompt = render_inference_prompt(item)
    assert ANCHOR in prompt.text
    assert "Sentence: [fun for everyone]" in prompt.text
    assert "step by step" not in prompt.text
    assert prompt.template_id == "confidence_inference"


def test_task_kinds_use_different_templates():
    sent = render_cot_prompt(make_item(0, task_kind="sentiment"))
    mc = render_cot_prompt(make_item(0, task_kind="multiple_choice", n_options=4))
    assert "sentiment" in sent.text
    assert "sentiment" not in mc.text
    mc_inf = render_inference_prompt(make_item(0, task_kind="multiple_choice", n_options=4))
    assert "Question: [" in mc_inf.text


def test_rendering_is_deterministic():
    item = make_item(5)
    assert render_cot_prompt(item).text == render_cot_prompt(item).text
    assert render_inference_prompt(item).text == render_inference_prompt(item).text


def test_prompt_has_no_leftover_placeholders():
    for kind, n in (("sentiment", 2), ("multiple_choice", 4)):
        item = make_item(0, task_kind=kind, n_options=n)
        for prompt in (render_cot_prompt(item), render_inference_prompt(item)):
            assert "{question}" not in prompt.text
            assert "{options}" not in prompt.text


def test_templates_dir_override(tmp_path):
    custom = tmp_path / "templates"
    custom.mkdir()
    (custom / "cot_extraction_sentiment.txt").write_text(
        "Q={question} O={options}\n", encoding="utf-8"
    )
    item = make_item(0, question="short one")
    prompt = render_cot_prompt(item, templates_dir=custom)
    assert prompt.text == "Q=short one O=A. option a B. option b"


def test_templates_dir_missing_file(tmp_path):
    with pytest.raises(FileMissing):
        render_cot_prompt(make_item(0), templates_dir=tmp_path)


def test_braces_in_question_survive():
    item = make_item(0, question="what does {x} mean?")
    prompt = render_cot_prompt(item)
    assert "what does {x} mean?" in prompt.text
