"""Explicitation and repair prompts, reproduced character for character."""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass
from typing import Literal, Optional

from ..errors import MissingField

INPUT_SLOT = "{{Input Text Here}}"
BROKEN_SLOT = "{{Broken HTML Table Here}}"

_INSTRUCTIONS = (
    "Instructions:\n"
    "-Analyze the given ''Raw Input **unstructured** Text'' and html table to accurately "
    "identify rows, columns, and data cells.\n"
    "-Ensure that the output table maintains the same row and column structure as the "
    "given ''Raw Input Text''.\n"
    "-Keep the table rows and columns in the same order and structure as they appear in "
    "the given ''Raw Input Text''.\n"
    "-Include all content from the current given ''Raw Input Text'' without omission.\n"
    "-Do not add any content in the fixed HTML table if it is not present in the given "
    "''Raw Input Text''. \n"
    "-Ensure that the fixed HTML table is well-formed and valid, and enclosed inside "
    "<table></table> tags.\n"
)

REPAIR_SYSTEM = (
    "You are an expert in interpreting various table formats. Your task is to generate "
    "fixed HTML tables from unstructured text, and optionally a table that may or may not "
    "contain errors. "
)
REPAIR_USER = (
    "I have an unstructured text representation of a table and an html representation of "
    "the same table.\n"
    + _INSTRUCTIONS
    + "''Raw Input Text'':\n"
    + INPUT_SLOT
    + "\n\n''HTML Table'':\n"
    + BROKEN_SLOT
)

EXPLICITATION_SYSTEM = (
    "You are an expert in interpreting various table formats. Your task is to generate "
    "fixed HTML tables from unstructured text. "
)
EXPLICITATION_USER = (
    "I have an unstructured text representation of a table.\n"
    + _INSTRUCTIONS
    + "''Raw Input Text'':\n"
    + INPUT_SLOT
)

_SLOT = re.compile(re.escape(INPUT_SLOT) + "|" + re.escape(BROKEN_SLOT))

PromptKind = Literal["explicitation", "repair"]


@dataclass(frozen=True)
class PromptPair:
    system: str
    user: str

    def messages(self) -> list[dict[str, str]]:
        return [
            {"role": "system", "content": self.system},
            {"role": "user", "content": self.user},
        ]

    def key(self) -> str:
        """Stable content hash, used to look up recorded responses."""
        h = hashlib.sha256()
        h.update(self.system.encode("utf-8"))
        h.update(b"\x00")
        h.update(self.user.encode("utf-8"))
        return h.hexdigest()


def render_prompt(
    kind: PromptKind, raw_text: str, broken_html: Optional[str] = None
) -> PromptPair:
    if kind == "explicitation":
        system, template, values = EXPLICITATION_SYSTEM, EXPLICITATION_USER, {INPUT_SLOT: raw_text}
    elif kind == "repair":
        if broken_html is None:
            raise MissingField("repair prompt needs broken_html")
        system, template = REPAIR_SYSTEM, REPAIR_USER
        values = {INPUT_SLOT: raw_text, BROKEN_SLOT: broken_html}
    else:
        raise ValueError(f"unknown prompt kind {kind!r}")
    # one pass, so slot-like text inside the inputs is left alone
    user = _SLOT.sub(lambda m: values[m.group(0)], template)
    return PromptPair(system, user)
