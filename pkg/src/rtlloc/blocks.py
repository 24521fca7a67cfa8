"""Block segmentation and def/use analysis for SystemVerilog sources.

The retrieval unit is the atomic syntactic block: one continuous `assign`
statement or one always procedure. Segmentation is tolerant and purely
lexical; no elaboration or macro expansion is performed.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

from . import parse as P
from .tokens import Token, TokenKind, tokenize


class UnbalancedDelimiters(Exception):
    """Raised when begin/end or bracket nesting cannot be recovered."""


class EncodingError(Exception):
    pass


class BlockKind:
    ASSIGN = "assign"
    ALWAYS_FF = "always_ff"
    ALWAYS_COMB = "always_comb"
    ALWAYS_GENERIC = "always_generic"

    ALL = (ASSIGN, ALWAYS_FF, ALWAYS_COMB, ALWAYS_GENERIC)


_ALWAYS_KINDS = {
    "always_ff": BlockKind.ALWAYS_FF,
    "always_comb": BlockKind.ALWAYS_COMB,
    "always_latch": BlockKind.ALWAYS_GENERIC,
    "always": BlockKind.ALWAYS_GENERIC,
}


@dataclass(frozen=True)
class SourceFile:
    path: str
    content: str

    @property
    def ip_name(self) -> str:
        return self.path.replace("\\", "/").lstrip("/").split("/", 1)[0]


@dataclass
class RtlBlock:
    block_id: str
    kind: str
    span: tuple[int, int, int, int]  # (start_line, end_line, start_byte, end_byte)
    text: str
    module_name: str
    path: str
    defined: set[str] = field(default_factory=set)
    used: set[str] = field(default_factory=set)
    # role-classified uses, feeding DTG edge typing
    used_clock: set[str] = field(default_factory=set)
    used_reset: set[str] = field(default_factory=set)
    used_event: set[str] = field(default_factory=set)
    used_pred: set[str] = field(default_factory=set)
    used_data: set[str] = field(default_factory=set)
    edge_sensitive: bool = False

    def to_json_dict(self) -> dict:
        return {
            "block_id": self.block_id,
            "kind": self.kind,
            "span": list(self.span),
            "text": self.text,
            "module_name": self.module_name,
            "path": self.path,
            "defined": sorted(self.defined),
            "used": sorted(self.used),
        }


@dataclass
class Decl:
    name: str
    category: str  # "port" | "parameter" | "local_signal"
    width: int | None


@dataclass
class Passthrough:
    """Module instantiation: bridges parent-scope signals to child ports.

    Not a retrieval candidate; only contributes define/use connectivity.
    """
    parent_module: str
    child_module: str
    instance_name: str
    connections: list[tuple[str | None, set[str]]]  # (port name, parent signals)


@dataclass
class ModuleInfo:
    name: str
    decls: dict[str, Decl] = field(default_factory=dict)
    port_dirs: dict[str, str] = field(default_factory=dict)  # name -> input/output/inout


@dataclass
class Snapshot:
    snapshot_id: str
    files: list[SourceFile]
    blocks: list[RtlBlock]
    modules: dict[str, ModuleInfo] = field(default_factory=dict)
    passthroughs: list[Passthrough] = field(default_factory=list)


def is_testbench_or_generated(path: str, content: str = "") -> bool:
    p = "/" + path.replace("\\", "/").lstrip("/")
    if "/dv/" in p or "/tb/" in p:
        return True
    fname = p.rsplit("/", 1)[-1]
    if fname.endswith("_tb.sv") or fname.endswith("_tb.svh"):
        return True
    head = "\n".join(content.splitlines()[:10]).lower()
    for marker in ("autogenerated", "auto-generated", "generated by", "do not edit"):
        if marker in head:
            return True
    return False


# ------------------------------------------------------------- segmentation

_OPEN = {"(": ")", "[": "]", "{": "}"}
_CLOSE = {")", "]", "}"}


def _skip_balanced(toks: list[Token], i: int) -> int:
    """Skip past the balanced group opening at toks[i]."""
    opener = toks[i].text
    closer = _OPEN[opener]
    depth = 0
    while i < len(toks):
        t = toks[i].text
        if t == opener:
            depth += 1
        elif t == closer:
            depth -= 1
            if depth == 0:
                return i + 1
        i += 1
    raise UnbalancedDelimiters(
        f"unclosed {opener!r} near line {toks[min(i, len(toks) - 1)].line}")


def _skip_to_semicolon(toks: list[Token], i: int) -> int:
    depth = 0
    while i < len(toks):
        t = toks[i].text
        if t in _OPEN:
            depth += 1
        elif t in _CLOSE:
            depth -= 1
        elif t == ";" and depth <= 0:
            return i + 1
        i += 1
    raise UnbalancedDelimiters("statement missing ';'")


def _consume_statement(toks: list[Token], i: int) -> int:
    """Return index just past the statement starting at toks[i]."""
    if i >= len(toks):
        return i
    t = toks[i].text
    if t == "begin":
        depth = 0
        while i < len(toks):
            w = toks[i].text
            if w in ("begin", "fork"):
                depth += 1
            elif w in ("end", "join", "join_any", "join_none"):
                depth -= 1
                if depth == 0:
                    i += 1
                    if i + 1 < len(toks) and toks[i].text == ":":
                        i += 2  # trailing block label
                    return i
            i += 1
        raise UnbalancedDelimiters("unmatched 'begin'")
    if t == "if":
        i = _skip_balanced(toks, i + 1)
        i = _consume_statement(toks, i)
        if i < len(toks) and toks[i].text == "else":
            i = _consume_statement(toks, i + 1)
        return i
    if t in ("case", "casez", "casex"):
        depth = 0
        while i < len(toks):
            w = toks[i].text
            if w in ("case", "casez", "casex"):
                depth += 1
            elif w == "endcase":
                depth -= 1
                if depth == 0:
                    return i + 1
            i += 1
        raise UnbalancedDelimiters("unmatched 'case'")
    if t in ("for", "while", "repeat"):
        i = _skip_balanced(toks, i + 1)
        return _consume_statement(toks, i)
    if t == "forever":
        return _consume_statement(toks, i + 1)
    if t in ("unique", "unique0", "priority"):
        return _consume_statement(toks, i + 1)
    return _skip_to_semicolon(toks, i)


def _token_end(tok: Token) -> int:
    return tok.pos + len(tok.text)


def _byte_offset_map(content: str):
    """char offset -> byte offset mapper; identity for pure-ASCII content."""
    encoded = content.encode("utf-8")
    if len(encoded) == len(content):
        return lambda c: c
    offs = [0]
    for ch in content:
        offs.append(offs[-1] + len(ch.encode("utf-8")))
    return lambda c: offs[c]


_RANGE_RE = re.compile(r"^\d+$")

_DECL_KEYWORDS = {
    "input", "output", "inout", "wire", "logic", "reg", "bit", "byte",
    "integer", "int", "genvar", "parameter", "localparam", "supply0",
    "supply1", "tri", "wand", "wor", "var", "time", "real", "shortint",
    "longint",
}


def _parse_decl(toks: list[Token], i: int, mod: ModuleInfo) -> int:
    """Parse a declaration starting at toks[i]; returns index past its ';'."""
    direction = None
    category = "local_signal"
    j = i
    while j < len(toks) and toks[j].text in _DECL_KEYWORDS | {"signed", "unsigned"}:
        w = toks[j].text
        if w in ("input", "output", "inout"):
            direction = w
            category = "port"
        elif w in ("parameter", "localparam"):
            category = "parameter"
        j += 1
    width = None
    if j < len(toks) and toks[j].text == "[":
        k = _skip_balanced(toks, j)
        inner = [t.text for t in toks[j + 1:k - 1]]
        if len(inner) == 3 and inner[1] == ":" and all(
                _RANGE_RE.match(x) for x in (inner[0], inner[2])):
            width = abs(int(inner[0]) - int(inner[2])) + 1
        j = k
    # names separated by commas; skip initializers and per-name ranges
    end = _skip_to_semicolon(toks, j)
    depth = 0
    expect_name = True
    for k in range(j, end - 1):
        t = toks[k]
        if t.text in _OPEN:
            depth += 1
        elif t.text in _CLOSE:
            depth -= 1
        elif depth == 0 and t.text == ",":
            expect_name = True
        elif depth == 0 and t.text == "=":
            expect_name = False
        elif depth == 0 and expect_name and t.kind == TokenKind.IDENT:
            mod.decls[t.text] = Decl(t.text, category, width)
            if direction:
                mod.port_dirs[t.text] = direction
            expect_name = False
    return end


def _parse_instantiation(toks: list[Token], i: int, mod: ModuleInfo):
    """Try to parse `Child #(...)? inst ( .port(expr), ... );` at toks[i].

    Returns (Passthrough | None, next index). Only named connections carry
    port labels; positional connections keep port=None.
    """
    child = toks[i].text
    j = i + 1
    if j < len(toks) and toks[j].text == "#":
        if j + 1 < len(toks) and toks[j + 1].text == "(":
            j = _skip_balanced(toks, j + 1)
        else:
            return None, i
    if j >= len(toks) or toks[j].kind != TokenKind.IDENT:
        return None, i
    inst = toks[j].text
    j += 1
    if j < len(toks) and toks[j].text == "[":  # instance array range
        j = _skip_balanced(toks, j)
    if j >= len(toks) or toks[j].text != "(":
        return None, i
    end = _skip_balanced(toks, j)
    conns: list[tuple[str | None, set[str]]] = []
    k = j + 1
    while k < end - 1:
        port = None
        if toks[k].text == "." and k + 1 < end and toks[k + 1].kind == TokenKind.IDENT:
            port = toks[k + 1].text
            k += 2
            if k < end and toks[k].text == "(":
                grp = _skip_balanced(toks, k)
                sigs = {t.text for t in toks[k + 1:grp - 1]
                        if t.kind == TokenKind.IDENT}
                conns.append((port, sigs))
                k = grp
            else:
                conns.append((port, {port}))  # .name shorthand
        else:
            # positional argument: collect until ',' at depth 0
            depth = 0
            sigs: set[str] = set()
            while k < end - 1:
                t = toks[k]
                if t.text in _OPEN:
                    depth += 1
                elif t.text in _CLOSE:
                    depth -= 1
                elif t.text == "," and depth == 0:
                    break
                if t.kind == TokenKind.IDENT:
                    sigs.add(t.text)
                k += 1
            if sigs:
                conns.append((None, sigs))
        if k < end - 1 and toks[k].text == ",":
            k += 1
    j = end
    if j < len(toks) and toks[j].text == ";":
        j += 1
    return Passthrough(mod.name, child, inst, conns), j


def segment_file(file: SourceFile):
    """Segment one source file.

    Returns (blocks, modules, passthroughs). Blocks carry def/use sets.
    """
    try:
        toks = tokenize(file.content)
    except UnicodeError as e:  # pragma: no cover - str input rarely fails
        raise EncodingError(str(e)) from e
    to_byte = _byte_offset_map(file.content)

    blocks: list[RtlBlock] = []
    modules: dict[str, ModuleInfo] = {}
    passthroughs: list[Passthrough] = []
    mod: ModuleInfo | None = None
    kind_counters: dict[str, int] = {}

    i = 0
    n = len(toks)
    while i < n:
        t = toks[i]
        w = t.text
        if w in ("module", "macromodule"):
            name = ""
            j = i + 1
            if j < n and toks[j].kind == TokenKind.IDENT:
                name = toks[j].text
            mod = ModuleInfo(name)
            modules[name] = mod
            kind_counters = {}
            i = _skip_to_semicolon(toks, i)
            # port directions may appear in the ANSI header
            _scan_header_ports(toks, t, i, mod)
            continue
        if w == "endmodule":
            mod = None
            i += 1
            continue
        if mod is None:
            i += 1
            continue
        if w in ("function", "task"):
            ender = "endfunction" if w == "function" else "endtask"
            while i < n and toks[i].text != ender:
                i += 1
            i += 1
            continue
        if w in ("initial", "final"):
            i = _consume_statement(toks, i + 1)
            continue
        if w == "assign":
            end = _skip_to_semicolon(toks, i)
            blocks.append(_make_block(file, toks, i, end, BlockKind.ASSIGN,
                                      mod.name, kind_counters, to_byte))
            i = end
            continue
        if w in _ALWAYS_KINDS and toks[i].kind == TokenKind.KEYWORD:
            kind = _ALWAYS_KINDS[w]
            j = i + 1
            if j < n and toks[j].text == "@":
                j += 1
                if j < n and toks[j].text == "*":
                    j += 1
                elif j < n and toks[j].text == "(":
                    j = _skip_balanced(toks, j)
            end = _consume_statement(toks, j)
            blocks.append(_make_block(file, toks, i, end, kind,
                                      mod.name, kind_counters, to_byte))
            i = end
            continue
        if w in _DECL_KEYWORDS and toks[i].kind == TokenKind.KEYWORD:
            i = _parse_decl(toks, i, mod)
            continue
        if toks[i].kind == TokenKind.IDENT:
            pt, j = _parse_instantiation(toks, i, mod)
            if pt is not None:
                passthroughs.append(pt)
                i = j
                continue
        i += 1

    for blk in blocks:
        _analyze_block(blk)
    return blocks, modules, passthroughs


def _scan_header_ports(toks: list[Token], start_tok: Token, end: int,
                       mod: ModuleInfo):
    """Lift directions and widths from an ANSI-style module header."""
    # re-scan tokens between 'module' and its ';'
    i = 0
    while i < len(toks) and toks[i] is not start_tok:
        i += 1
    direction = None
    width = None
    while i < end:
        t = toks[i]
        if t.text in ("input", "output", "inout"):
            direction = t.text
            width = None
        elif t.text == "[" and direction:
            k = _skip_balanced(toks, i)
            inner = [x.text for x in toks[i + 1:k - 1]]
            if len(inner) == 3 and inner[1] == ":" and all(
                    _RANGE_RE.match(x) for x in (inner[0], inner[2])):
                width = abs(int(inner[0]) - int(inner[2])) + 1
            i = k
            continue
        elif t.kind == TokenKind.IDENT and direction:
            nxt = toks[i + 1].text if i + 1 < end else ";"
            if nxt in (",", ")", ";", "["):
                mod.port_dirs[t.text] = direction
                mod.decls[t.text] = Decl(t.text, "port", width)
        elif t.text in (",",):
            pass
        i += 1


def _make_block(file: SourceFile, toks: list[Token], start: int, end: int,
                kind: str, module_name: str, counters: dict[str, int],
                to_byte) -> RtlBlock:
    ordinal = counters.get(kind, 0)
    counters[kind] = ordinal + 1
    first, last = toks[start], toks[end - 1]
    start_c, end_c = first.pos, _token_end(last)
    text = file.content[start_c:end_c]
    span = (first.line, last.line + last.text.count("\n"),
            to_byte(start_c), to_byte(end_c))
    block_id = f"{file.path}::{module_name}::{kind}::{ordinal}"
    return RtlBlock(block_id=block_id, kind=kind, span=span, text=text,
                    module_name=module_name, path=file.path)


def segment_blocks(file: SourceFile) -> list[RtlBlock]:
    """All atomic syntactic blocks of one file, in source order."""
    blocks, _, _ = segment_file(file)
    return blocks


# ------------------------------------------------------------ def/use walk

def _expr_idents(e, out: set[str]):
    if isinstance(e, P.Ident):
        out.add(e.name)
    elif isinstance(e, P.Unary):
        _expr_idents(e.operand, out)
    elif isinstance(e, P.Binary):
        _expr_idents(e.left, out)
        _expr_idents(e.right, out)
    elif isinstance(e, P.Ternary):
        _expr_idents(e.cond, out)
        _expr_idents(e.then, out)
        _expr_idents(e.other, out)
    elif isinstance(e, P.Concat):
        if e.repeat is not None:
            _expr_idents(e.repeat, out)
        for item in e.items:
            _expr_idents(item, out)
    elif isinstance(e, P.Index):
        _expr_idents(e.base, out)
        for idx in e.indices:
            _expr_idents(idx, out)
    elif isinstance(e, P.Member):
        _expr_idents(e.base, out)
    elif isinstance(e, P.Call):
        for a in e.args:
            _expr_idents(a, out)


def lhs_targets(lhs) -> tuple[set[str], set[str]]:
    """(defined base signals, signals read inside LHS index expressions)."""
    defined: set[str] = set()
    reads: set[str] = set()

    def walk(e):
        if isinstance(e, P.Ident):
            defined.add(e.name)
        elif isinstance(e, P.Index):
            walk(e.base)
            for idx in e.indices:
                _expr_idents(idx, reads)
        elif isinstance(e, P.Member):
            walk(e.base)
        elif isinstance(e, P.Concat):
            for item in e.items:
                walk(item)
        elif isinstance(e, (P.Unary, P.Binary, P.Ternary, P.Call)):
            _expr_idents(e, reads)

    walk(lhs)
    return defined, reads


def _analyze_block(blk: RtlBlock):
    events, stmts = P.parse_block_body(blk.text)
    blk.edge_sensitive = any(ev.edge for ev in events)
    for ev in events:
        names: set[str] = set()
        _expr_idents(ev.expr, names)
        if ev.edge == "posedge":
            blk.used_clock |= names
        elif ev.edge == "negedge":
            for nm in names:
                if re.search(r"rst|reset", nm, re.IGNORECASE):
                    blk.used_reset.add(nm)
                else:
                    blk.used_clock.add(nm)
        else:
            blk.used_event |= names

    def walk(stmt):
        if isinstance(stmt, P.Assign):
            d, lhs_reads = lhs_targets(stmt.lhs)
            blk.defined |= d
            blk.used_data |= lhs_reads
            rhs: set[str] = set()
            _expr_idents(stmt.rhs, rhs)
            blk.used_data |= rhs
        elif isinstance(stmt, P.If):
            cond: set[str] = set()
            _expr_idents(stmt.cond, cond)
            blk.used_pred |= cond
            for s in stmt.then:
                walk(s)
            for s in stmt.other:
                walk(s)
        elif isinstance(stmt, P.Case):
            subj: set[str] = set()
            _expr_idents(stmt.subject, subj)
            blk.used_pred |= subj
            for item in stmt.items:
                for lab in item.labels:
                    labs: set[str] = set()
                    _expr_idents(lab, labs)
                    blk.used_pred |= labs
                for s in item.body:
                    walk(s)
        elif isinstance(stmt, P.For):
            for sub in (stmt.init, stmt.step):
                if isinstance(sub, P.Assign):
                    walk(sub)
            if stmt.cond is not None:
                cond = set()
                _expr_idents(stmt.cond, cond)
                blk.used_pred |= cond
            for s in stmt.body:
                walk(s)
        elif isinstance(stmt, P.ExprStmt):
            args: set[str] = set()
            _expr_idents(stmt.expr, args)
            blk.used_data |= args

    for s in stmts:
        walk(s)
    blk.used = (blk.used_data | blk.used_pred | blk.used_clock
                | blk.used_reset | blk.used_event)


def extract_def_use(block: RtlBlock) -> tuple[set[str], set[str]]:
    """Defined and used signal sets for a segmented block."""
    if not block.used and not block.defined:
        _analyze_block(block)
    return set(block.defined), set(block.used)


def build_snapshot(snapshot_id: str, files: list[SourceFile]) -> Snapshot:
    blocks: list[RtlBlock] = []
    modules: dict[str, ModuleInfo] = {}
    passthroughs: list[Passthrough] = []
    for f in files:
        b, m, p = segment_file(f)
        blocks.extend(b)
        modules.update(m)
        passthroughs.extend(p)
    return Snapshot(snapshot_id, list(files), blocks, modules, passthroughs)
