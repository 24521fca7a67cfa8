"""Block-local data-flow graph construction.

One graph per atomic block: a Signal node per distinct signal, an Operator
node per operator occurrence, Data edges along expression evaluation into
assignment targets, plus Clock/Reset/Event edges from the sensitivity list
and Predicate edges from enclosing guards.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

from . import parse as P
from .blocks import BlockKind, Decl, RtlBlock, lhs_targets


class DomainError(ValueError):
    pass


class NodeKind:
    SIGNAL = "signal"
    OPERATOR = "operator"


class Category:
    PARAMETER = "parameter"
    PORT = "port"
    LOCAL_SIGNAL = "local_signal"
    CONSTANT = "constant"
    OPERATOR = "operator"

    ALL = (PARAMETER, PORT, LOCAL_SIGNAL, CONSTANT, OPERATOR)


class OperatorType:
    MEMBER_ACCESS = "member_access"
    UNARY_OP = "unary_op"
    BINARY_OP = "binary_op"
    TERNARY_OP = "ternary_op"
    CONCAT = "concat"
    INDEX = "index"
    CALL = "call"
    NONE = "none"

    ALL = (MEMBER_ACCESS, UNARY_OP, BINARY_OP, TERNARY_OP, CONCAT, INDEX,
           CALL, NONE)


class Role:
    DATA = "data"
    CLOCK = "clock"
    EVENT = "event"
    PREDICATE = "predicate"
    RESET = "reset"

    ALL = (DATA, CLOCK, EVENT, PREDICATE, RESET)


class Timing:
    COMBINATIONAL = "combinational"
    SEQUENTIAL = "sequential"


FNV_OFFSET = 14695981039346656037
FNV_PRIME = 1099511628211
_U64 = (1 << 64) - 1


def hash_identifier(name: str, vocab: int) -> int:
    """Stable 64-bit FNV-1a of the name, reduced modulo the vocabulary size."""
    h = FNV_OFFSET
    for b in name.encode("utf-8"):
        h = ((h ^ b) * FNV_PRIME) & _U64
    return h % vocab


def normalize_bitwidth(w: int, w_max: int = 256) -> float:
    """log-compressed width in [0, 1], saturating at w_max."""
    if w < 1:
        raise DomainError(f"bit width must be >= 1, got {w}")
    if w_max < 1:
        raise DomainError(f"w_max must be >= 1, got {w_max}")
    import math
    if w_max == 1:
        return 1.0
    return math.log2(1 + min(w, w_max)) / math.log2(1 + w_max)


@dataclass(frozen=True)
class DfgNode:
    node_id: int
    kind: str
    category: str
    operator_type: str
    bit_width: int | None
    hashed_name: int
    label: str  # signal name / operator symbol / literal text

    def to_json_dict(self) -> dict:
        return {
            "node_id": self.node_id, "kind": self.kind,
            "category": self.category, "operator_type": self.operator_type,
            "bit_width": self.bit_width, "hashed_name": self.hashed_name,
            "label": self.label,
        }


@dataclass(frozen=True)
class DfgEdge:
    src: int
    dst: int
    role: str
    timing: str

    def to_json_dict(self) -> dict:
        return {"src": self.src, "dst": self.dst,
                "role": self.role, "timing": self.timing}


@dataclass
class BlockDfg:
    block_id: str
    nodes: list[DfgNode] = field(default_factory=list)
    edges: list[DfgEdge] = field(default_factory=list)

    def to_json_dict(self) -> dict:
        return {
            "block_id": self.block_id,
            "nodes": [n.to_json_dict() for n in self.nodes],
            "edges": [e.to_json_dict() for e in self.edges],
        }


DEFAULT_VOCAB = 4096


class _Builder:
    def __init__(self, block: RtlBlock, decls, vocab: int):
        self.block = block
        self.decls = decls or {}
        self.vocab = vocab
        self.nodes: list[DfgNode] = []
        self.edges: list[DfgEdge] = []
        self.signal_ids: dict[str, int] = {}

    def _decl(self, name: str) -> Decl | None:
        d = self.decls.get(name)
        if isinstance(d, int):
            return Decl(name, Category.LOCAL_SIGNAL, d)
        return d

    def signal(self, name: str) -> int:
        if name in self.signal_ids:
            return self.signal_ids[name]
        d = self._decl(name)
        category = d.category if d else Category.LOCAL_SIGNAL
        width = d.width if d else None
        nid = len(self.nodes)
        self.nodes.append(DfgNode(nid, NodeKind.SIGNAL, category,
                                  OperatorType.NONE, width,
                                  hash_identifier(name, self.vocab), name))
        self.signal_ids[name] = nid
        return nid

    def operator(self, op_type: str, label: str) -> int:
        nid = len(self.nodes)
        self.nodes.append(DfgNode(nid, NodeKind.OPERATOR, Category.OPERATOR,
                                  op_type, None,
                                  hash_identifier(label, self.vocab), label))
        return nid

    def constant(self, text: str, width: int | None) -> int:
        nid = len(self.nodes)
        self.nodes.append(DfgNode(nid, NodeKind.SIGNAL, Category.CONSTANT,
                                  OperatorType.NONE, width,
                                  hash_identifier(text, self.vocab), text))
        return nid

    def edge(self, src: int, dst: int, role: str, timing: str):
        if src == dst:
            return
        self.edges.append(DfgEdge(src, dst, role, timing))

    def build_expr(self, e, timing: str) -> int | None:
        """Return the node producing e's value (None for empty concat etc.)."""
        if isinstance(e, P.Ident):
            return self.signal(e.name)
        if isinstance(e, P.Number):
            return self.constant(e.text, e.width)
        if isinstance(e, P.StringLit):
            return self.constant(e.text, None)
        if isinstance(e, P.Unary):
            op = self.operator(OperatorType.UNARY_OP, e.op)
            src = self.build_expr(e.operand, timing)
            if src is not None:
                self.edge(src, op, Role.DATA, timing)
            return op
        if isinstance(e, P.Binary):
            op = self.operator(OperatorType.BINARY_OP, e.op)
            for sub in (e.left, e.right):
                src = self.build_expr(sub, timing)
                if src is not None:
                    self.edge(src, op, Role.DATA, timing)
            return op
        if isinstance(e, P.Ternary):
            op = self.operator(OperatorType.TERNARY_OP, "?:")
            cond = self.build_expr(e.cond, timing)
            if cond is not None:
                self.edge(cond, op, Role.PREDICATE, timing)
            for sub in (e.then, e.other):
                src = self.build_expr(sub, timing)
                if src is not None:
                    self.edge(src, op, Role.DATA, timing)
            return op
        if isinstance(e, P.Concat):
            op = self.operator(OperatorType.CONCAT, "{}")
            items = list(e.items) + ([e.repeat] if e.repeat is not None else [])
            for sub in items:
                src = self.build_expr(sub, timing)
                if src is not None:
                    self.edge(src, op, Role.DATA, timing)
            return op
        if isinstance(e, P.Index):
            op = self.operator(OperatorType.INDEX, "[]")
            for sub in [e.base] + e.indices:
                src = self.build_expr(sub, timing)
                if src is not None:
                    self.edge(src, op, Role.DATA, timing)
            return op
        if isinstance(e, P.Member):
            op = self.operator(OperatorType.MEMBER_ACCESS, "." + e.name)
            src = self.build_expr(e.base, timing)
            if src is not None:
                self.edge(src, op, Role.DATA, timing)
            return op
        if isinstance(e, P.Call):
            op = self.operator(OperatorType.CALL, e.name)
            for a in e.args:
                src = self.build_expr(a, timing)
                if src is not None:
                    self.edge(src, op, Role.DATA, timing)
            return op
        return None


def build_block_dfg(block: RtlBlock, decls=None,
                    vocab: int = DEFAULT_VOCAB) -> BlockDfg:
    """Data-flow graph for one block.

    `decls` maps signal names to Decl records (or plain widths); it may be
    incomplete, in which case categories default to local signals and widths
    stay unset (embedded later via the learnable default).
    """
    b = _Builder(block, decls, vocab)
    events, stmts = P.parse_block_body(block.text)
    edge_sensitive = any(ev.edge for ev in events)

    event_nodes: list[tuple[str, int]] = []  # (role, node_id)
    for ev in events:
        names: set[str] = set()
        from .blocks import _expr_idents
        _expr_idents(ev.expr, names)
        for nm in sorted(names):
            if ev.edge == "posedge":
                role = Role.CLOCK
            elif ev.edge == "negedge":
                role = (Role.RESET if re.search(r"rst|reset", nm, re.IGNORECASE)
                        else Role.CLOCK)
            else:
                role = Role.EVENT
            event_nodes.append((role, b.signal(nm)))

    def assign_timing(nonblocking: bool) -> str:
        if nonblocking and edge_sensitive:
            return Timing.SEQUENTIAL
        return Timing.COMBINATIONAL

    def walk(stmt, guards: list[int]):
        if isinstance(stmt, P.Assign):
            timing = assign_timing(stmt.nonblocking)
            rhs_root = b.build_expr(stmt.rhs, timing)
            targets, lhs_reads = lhs_targets(stmt.lhs)
            for name in sorted(targets):
                dst = b.signal(name)
                if rhs_root is not None:
                    b.edge(rhs_root, dst, Role.DATA, timing)
                for rname in sorted(lhs_reads):
                    b.edge(b.signal(rname), dst, Role.DATA, timing)
                for g in guards:
                    b.edge(g, dst, Role.PREDICATE, timing)
                for role, ev_node in event_nodes:
                    b.edge(ev_node, dst, role, timing)
        elif isinstance(stmt, P.If):
            g = b.build_expr(stmt.cond, Timing.COMBINATIONAL)
            inner = guards + ([g] if g is not None else [])
            for s in stmt.then:
                walk(s, inner)
            for s in stmt.other:
                walk(s, inner)
        elif isinstance(stmt, P.Case):
            g = b.build_expr(stmt.subject, Timing.COMBINATIONAL)
            inner = guards + ([g] if g is not None else [])
            for item in stmt.items:
                for s in item.body:
                    walk(s, inner)
        elif isinstance(stmt, P.For):
            inner = guards
            if stmt.cond is not None:
                g = b.build_expr(stmt.cond, Timing.COMBINATIONAL)
                if g is not None:
                    inner = guards + [g]
            for sub in (stmt.init, stmt.step):
                if isinstance(sub, P.Assign):
                    walk(sub, inner)
            for s in stmt.body:
                walk(s, inner)
        elif isinstance(stmt, P.ExprStmt):
            b.build_expr(stmt.expr, Timing.COMBINATIONAL)

    for s in stmts:
        walk(s, [])
    return BlockDfg(block.block_id, b.nodes, b.edges)
