"""Pragmatic SystemVerilog tokenizer.

Covers the subset needed for block segmentation, def/use extraction and
identifier anonymization: keywords, identifiers, sized/based literals,
strings, comments, directives and punctuation. No preprocessing.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

KEYWORDS = frozenset("""
module endmodule macromodule input output inout wire logic reg bit byte int
integer shortint longint real shortreal realtime time signed unsigned
parameter localparam assign always always_ff always_comb always_latch initial
final begin end if else case casez casex endcase default for while do foreach
repeat forever posedge negedge edge or and not nand nor xor xnor buf generate
endgenerate genvar function endfunction task endtask return typedef enum
struct packed union unique unique0 priority interface endinterface modport
package endpackage import export const static automatic ref void iff inside
fork join join_any join_none disable wait assert assume cover property
endproperty sequence endsequence string event supply0 supply1 tri tri0 tri1
triand trior wand wor var localparam defparam specify endspecify timeunit
timeprecision
""".split())

class TokenKind:
    KEYWORD = "keyword"
    IDENT = "ident"
    SYSTEM = "system"        # $display, $clog2, ...
    NUMBER = "number"
    STRING = "string"
    OP = "op"
    COMMENT = "comment"
    WS = "ws"
    DIRECTIVE = "directive"  # `include, `define, ...


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    pos: int   # 0-based byte offset into the source
    line: int  # 1-based


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comment>//[^\n]*|/\*.*?\*/)
  | (?P<string>"(?:[^"\\]|\\.)*")
  | (?P<directive>`\w+)
  | (?P<system>\$[a-zA-Z_][a-zA-Z0-9_$]*)
  | (?P<number>
        \d[\d_]*\s*'\s*[sS]?[bodhBODH][0-9a-fA-F_xXzZ?]+   # sized based
      | '\s*[sS]?[bodhBODH][0-9a-fA-F_xXzZ?]+              # unsized based
      | '[01xXzZ](?![a-zA-Z0-9_$])                         # fill literal '0

      | \d[\d_]*\.\d[\d_]*([eE][+-]?\d+)?                  # real
      | \d[\d_]*
    )
  | (?P<ident>\\\S+|[a-zA-Z_][a-zA-Z0-9_$]*)
  | (?P<op><<<=|>>>=|<<=|>>=|<<<|>>>|===|!==|==\?|!=\?|<->|->>
      |\+=|-=|\*=|/=|%=|&=|\|=|\^=|==|!=|<=|>=|&&|\|\||<<|>>|\*\*
      |\+\+|--|->|::|\+:|-:|[~!&|^*/%<>=?:;,.()\[\]{}#@+-])
    """,
    re.VERBOSE | re.DOTALL,
)


def tokenize(content: str, keep_trivia: bool = False) -> list[Token]:
    """Tokenize SystemVerilog source. Unknown bytes become 1-char OP tokens."""
    toks: list[Token] = []
    pos = 0
    line = 1
    n = len(content)
    while pos < n:
        m = _TOKEN_RE.match(content, pos)
        if m is None:
            toks.append(Token(TokenKind.OP, content[pos], pos, line))
            pos += 1
            continue
        kind = m.lastgroup
        text = m.group()
        if kind == "ident":
            tk = TokenKind.KEYWORD if text in KEYWORDS else TokenKind.IDENT
        elif kind == "ws":
            tk = TokenKind.WS
        else:
            tk = kind
        if tk in (TokenKind.WS, TokenKind.COMMENT) and not keep_trivia:
            pass
        else:
            toks.append(Token(tk, text, pos, line))
        line += text.count("\n")
        pos = m.end()
    return toks


def line_offsets(content: str) -> list[int]:
    """Byte offset of the start of each 1-based line (index 0 unused)."""
    offs = [0, 0]
    for i, ch in enumerate(content):
        if ch == "\n":
            offs.append(i + 1)
    return offs
