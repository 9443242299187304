"""Summarization prompt construction, LLM invocation, and output guards.

The prompt is assembled from fixed template spans toggled by PromptVariant
flags; golden-file tests pin the exact bytes. Candidates are formatted one
per line as ``N. "caption"`` with 1-based numbering.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Optional, Sequence

from capcommittee.coverage import UNCERTAINTY_LEXICON
from capcommittee.gateway import ModelGateway


class PromptError(ValueError):
    pass


@dataclass(frozen=True)
class PromptVariant:
    hard_problem_prefix: bool = True
    uncertainty_language: bool = True
    capitalized_one: bool = True
    target_language: Optional[str] = None
    extra_instruction: Optional[str] = None

    def describe(self) -> dict:
        return {
            "hard_problem_prefix": self.hard_problem_prefix,
            "uncertainty_language": self.uncertainty_language,
            "capitalized_one": self.capitalized_one,
            "target_language": self.target_language,
            "extra_instruction": self.extra_instruction,
        }


@dataclass(frozen=True)
class GuardConfig:
    max_commas: int = 7
    max_regen: int = 2

    def __post_init__(self):
        if self.max_commas < 0 or self.max_regen < 0:
            raise ValueError("guard limits must be >= 0")


@dataclass(frozen=True)
class SummaryResult:
    image_id: str
    summary_text: str
    variant: PromptVariant
    raw_completion: str
    guard_retries: int
    uncertain_language_present: bool
    comma_guard_exhausted: bool

    def flags(self) -> dict:
        return {
            "uncertain_language_present": self.uncertain_language_present,
            "comma_guard_exhausted": self.comma_guard_exhausted,
        }


def format_candidates(candidates: Sequence[str]) -> str:
    return "\n".join(f'{i}. "{text}"' for i, text in enumerate(candidates, start=1))


def build_prompt(candidates: Sequence[str], variant: PromptVariant = PromptVariant()) -> str:
    """Pure function of (candidates, variant); see the golden fixtures for the
    exact default bytes."""
    if not candidates:
        raise PromptError("candidates must be non-empty")

    lang = variant.target_language
    prefix = "This is a hard problem. " if variant.hard_problem_prefix else ""
    in_lang = f"in {lang} " if lang else ""
    one = "ONE" if variant.capitalized_one else "one"
    people = (
        "different (possibly incorrect) people"
        if variant.uncertainty_language
        else "different people"
    )
    instruction = variant.extra_instruction or "Be sure to describe everything"
    identify = (
        ", and identify when you're not sure."
        if variant.uncertainty_language
        else "."
    )
    summary_label = f"Summary (in {lang}):" if lang else "Summary:"
    seed = (
        " I'm not sure, but the image is likely of"
        if variant.uncertainty_language
        else " the image is of"
    )
    return (
        f"{prefix}Carefully summarize {in_lang}in {one} detailed sentence the "
        f"following captions by {people} describing the same scene. "
        f"{instruction}{identify} For example:\n"
        f"Captions:\n{format_candidates(candidates)}\n"
        f"{summary_label}{seed}"
    )


def comma_count(text: str) -> int:
    return text.count(",")


def postprocess_completion(raw: str) -> str:
    """Trim, strip an echoed leading "Summary:", collapse newlines to spaces.

    The prompt's example seed ("I'm not sure, but the image is likely of") is
    never prepended to the output.
    """
    text = raw.strip()
    if text.lower().startswith("summary:"):
        text = text[len("summary:") :].strip()
    text = re.sub(r"\s*\n\s*", " ", text)
    if not text:
        raise PromptError("completion is empty after post-processing")
    return text


def _has_uncertain_language(text: str) -> bool:
    return any(
        re.search(r"\b" + re.escape(term) + r"\b", text, re.IGNORECASE)
        for term in UNCERTAINTY_LEXICON
    )


def summarize(
    candidates,
    gateway: ModelGateway,
    model: str,
    variant: PromptVariant = PromptVariant(),
    guard: GuardConfig = GuardConfig(),
    max_tokens: int = 256,
    llm_temperature: float = 1.0,
    seed: int = 0,
) -> SummaryResult:
    """Summarize a CandidateSet into one caption, re-requesting when the
    completion trips the comma guard.

    Issues at most ``1 + guard.max_regen`` LLM calls. When every attempt fails
    the guard, the last attempt is kept and ``comma_guard_exhausted`` is set;
    guard exhaustion is never an error.
    """
    prompt = build_prompt(candidates.texts(), variant)
    raw = ""
    text = ""
    attempts = 0
    exhausted = False
    for attempt in range(guard.max_regen + 1):
        attempts = attempt
        raw = gateway.complete(
            prompt,
            model=model,
            max_tokens=max_tokens,
            temperature=llm_temperature,
            seed=seed,
            image_id=candidates.image_id,
            attempt=attempt,
        )
        text = postprocess_completion(raw)
        if comma_count(text) <= guard.max_commas:
            exhausted = False
            break
        exhausted = True
    return SummaryResult(
        image_id=candidates.image_id,
        summary_text=text,
        variant=variant,
        raw_completion=raw,
        guard_retries=attempts,
        uncertain_language_present=_has_uncertain_language(text),
        comma_guard_exhausted=exhausted,
    )
