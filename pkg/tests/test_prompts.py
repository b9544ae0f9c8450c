from __future__ import annotations

from pathlib import Path

import pytest

from laybench.prompts import (
    TEMPLATE_IDS,
    PromptBindingError,
    PromptError,
    PromptRegistry,
    prompt_version,
    render,
)

GOLDEN_DIR = Path(__file__).parent / "golden"

GOLDEN_FILES = {
    "Explain": "explain.golden.txt",
    "ZeroShotLS": "zeroshot_ls.golden.txt",
    "Rater": "rater.golden.txt",
    "ScorePrefix": "score_prefix.golden.txt",
}


def _golden(template_id: str) -> str:
    raw = (GOLDEN_DIR / GOLDEN_FILES[template_id]).read_text(encoding="utf-8")
    return raw[:-1] if raw.endswith("\n") else raw


@pytest.mark.parametrize("template_id", TEMPLATE_IDS)
def test_slot_excision_recovers_source_text(template_id: str) -> None:
    registry = PromptRegistry()
    assert registry.excised(template_id) == _golden(template_id)


@pytest.mark.parametrize("template_id, slot", [
    ("Explain", "Abstract"),
    ("ZeroShotLS", "Article"),
    ("Rater", "Summary"),
    ("ScorePrefix", "Article"),
])
def test_render_then_removal_recovers_source_text(template_id: str, slot: str) -> None:
    marker = "XX-SLOT-CONTENT-XX"
    rendered = render(template_id, {slot: marker})
    assert rendered.count(marker) == 1
    assert rendered.replace(marker, "") == _golden(template_id)


def test_explain_render_shape() -> None:
    text = render("Explain", {"Abstract": "X"})
    assert text.startswith("Generate a thorough background explanation")
    assert "Text: X" in text


def test_rater_render_shape() -> None:
    text = render("Rater", {"Summary": "S"})
    assert "Score the layness of the following summary from 1 to 10" in text
    assert text.endswith("Marks:")


def test_zeroshot_render_shape() -> None:
    text = render("ZeroShotLS", {"Article": "A"})
    assert text.startswith("Summarise the following article for a non-expert audience.")
    assert "Article: A" in text


def test_score_prefix_ends_at_summary() -> None:
    text = render("ScorePrefix", {"Article": "A"})
    assert text.endswith("Summary:")


def test_missing_binding_rejected() -> None:
    with pytest.raises(PromptBindingError):
        render("ZeroShotLS", {})


def test_extra_binding_rejected() -> None:
    with pytest.raises(PromptBindingError):
        render("Explain", {"Abstract": "X", "Article": "Y"})


def test_unknown_template_rejected() -> None:
    with pytest.raises(PromptError):
        render("Nope", {})


def test_render_is_pure() -> None:
    first = render("Explain", {"Abstract": "same"})
    second = render("Explain", {"Abstract": "same"})
    assert first == second


def test_override_directory_wins(tmp_path) -> None:
    (tmp_path / "rater.txt").write_text(
        "Rate it. Summary: {Summary} Marks:", encoding="utf-8")
    registry = PromptRegistry(override_dir=tmp_path)
    assert registry.render("Rater", {"Summary": "S"}) == "Rate it. Summary: S Marks:"
    # untouched templates still come from the packaged assets
    assert registry.body("Explain") == PromptRegistry().body("Explain")


def test_override_must_keep_declared_slots(tmp_path) -> None:
    (tmp_path / "rater.txt").write_text("no slots here", encoding="utf-8")
    with pytest.raises(PromptError):
        PromptRegistry(override_dir=tmp_path)


def test_version_is_stable_and_changes_with_overrides(tmp_path) -> None:
    assert prompt_version() == PromptRegistry().version()
    (tmp_path / "rater.txt").write_text("Alt {Summary}", encoding="utf-8")
    assert PromptRegistry(override_dir=tmp_path).version() != prompt_version()
