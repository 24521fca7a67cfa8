"""Deterministic identifier anonymization.

Every user-defined identifier in a file is remapped to VAR_<i> in
first-occurrence order. Keywords, system tasks, literals, operators,
comments and whitespace are preserved byte-for-byte, so the token-kind
sequence and all data-flow structure survive the rewrite.
"""
from __future__ import annotations

from .blocks import SourceFile
from .tokens import TokenKind, tokenize


def anonymize_text(content: str) -> str:
    toks = tokenize(content, keep_trivia=True)
    mapping: dict[str, str] = {}
    out: list[str] = []
    for t in toks:
        if t.kind == TokenKind.IDENT:
            if t.text not in mapping:
                mapping[t.text] = f"VAR_{len(mapping)}"
            out.append(mapping[t.text])
        else:
            out.append(t.text)
    return "".join(out)


def anonymize(file: SourceFile) -> SourceFile:
    return SourceFile(path=file.path, content=anonymize_text(file.content))
