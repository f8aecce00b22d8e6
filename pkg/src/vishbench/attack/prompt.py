from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import yaml

from ..corpus import Transcript
from ..errors import PromptInputError, TemplateError

PLACEHOLDER = "{transcript}"
DEFAULT_SLOT = "<transcript>\n{transcript}\n</transcript>"


@dataclass(frozen=True)
class PromptTemplate:
    """Two instruction blocks followed by a slot holding the transcript.

    The rendered prompt is ``rephrase + sep + noise + sep + slot`` with the
    placeholder in ``transcript_slot`` replaced by the transcript text.
    """

    rephrase_instruction: str
    noise_instruction: str
    transcript_slot: str = DEFAULT_SLOT
    separator: str = "\n\n"
    placeholder: str = PLACEHOLDER

    def __post_init__(self):
        if not self.rephrase_instruction.strip() or not self.noise_instruction.strip():
            raise TemplateError("both instructions must be non-empty")
        total = sum(s.count(self.placeholder) for s in
                    (self.rephrase_instruction, self.noise_instruction, self.transcript_slot))
        if self.transcript_slot.count(self.placeholder) != 1 or total != 1:
            raise TemplateError(f"template must contain exactly one {self.placeholder} placeholder, in the slot")

    @classmethod
    def from_file(cls, path: str | Path) -> "PromptTemplate":
        obj = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
        if not isinstance(obj, dict):
            raise TemplateError(f"{path}: expected a mapping")
        try:
            return cls(**obj)
        except TypeError as exc:
            raise TemplateError(f"{path}: {exc}") from None

    def to_dict(self) -> dict:
        return {
            "rephrase_instruction": self.rephrase_instruction,
            "noise_instruction": self.noise_instruction,
            "transcript_slot": self.transcript_slot,
            "separator": self.separator,
            "placeholder": self.placeholder,
        }


def skeleton_template_path() -> Path:
    return Path(__file__).resolve().parent.parent / "data" / "template_skeleton.yaml"


def build_prompt(template: PromptTemplate, transcript: Transcript | str) -> str:
    text = transcript.text if isinstance(transcript, Transcript) else transcript
    if not text or not text.strip():
        raise PromptInputError("transcript text is empty")
    slot = template.transcript_slot.replace(template.placeholder, text)
    return template.separator.join([template.rephrase_instruction, template.noise_instruction, slot])


def prompt_hash(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


def extract_transcript(prompt: str) -> str:
    """Recover the transcript from a rendered prompt.

    Uses the default ``<transcript>`` tags when present, otherwise the
    last blank-line-separated block.
    """
    start, end = prompt.rfind("<transcript>"), prompt.rfind("</transcript>")
    if 0 <= start < end:
        return prompt[start + len("<transcript>"):end].strip()
    return prompt.rsplit("\n\n", 1)[-1].strip()
