import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rtlloc.anonymize import anonymize
from rtlloc.blocks import SourceFile, build_snapshot, segment_blocks
from rtlloc.dfg import (Category, DomainError, OperatorType, Role, Timing,
                        build_block_dfg, hash_identifier, normalize_bitwidth)
from rtlloc.dtg import build_dtg


def fnv1a_oracle(name: str) -> int:
    """Independent FNV-1a 64 for cross-checking the hashing used in DFGs."""
    h = 0xcbf29ce484222325
    for byte in name.encode("utf-8"):
        h ^= byte
        h = (h * 0x100000001b3) % (1 << 64)
    return h


class TestHashing:
    def test_empty_string(self):
        # raw FNV-1a offset basis for the empty input
        assert fnv1a_oracle("") == 14695981039346656037
        assert hash_identifier("", 1 << 64) == 14695981039346656037

    @given(st.text(max_size=40))
    @settings(max_examples=200, deadline=None)
    def test_matches_oracle(self, name):
        assert hash_identifier(name, 4096) == fnv1a_oracle(name) % 4096

    def test_deterministic_across_calls(self):
        assert hash_identifier("clk_i", 4096) == hash_identifier("clk_i", 4096)


class TestWidthNormalization:
    def test_endpoints(self):
        assert normalize_bitwidth(1, 256) == pytest.approx(
            math.log2(2) / math.log2(257))
        assert normalize_bitwidth(256, 256) == 1.0
        assert normalize_bitwidth(10_000, 256) == 1.0  # saturates

    def test_monotone(self):
        vals = [normalize_bitwidth(w, 256) for w in range(1, 257)]
        assert all(a < b for a, b in zip(vals, vals[1:]))

    def test_domain_errors(self):
        with pytest.raises(DomainError):
            normalize_bitwidth(0, 256)
        with pytest.raises(DomainError):
            normalize_bitwidth(8, 0)


def _dfg_for(src, block_index=0, module_index=None):
    snap = build_snapshot("s", [SourceFile("ip/m.sv", src)])
    blk = snap.blocks[block_index]
    mod = snap.modules.get(blk.module_name)
    return build_block_dfg(blk, mod.decls if mod else None)


class TestBlockDfg:
    def test_simple_assign(self):
        dfg = _dfg_for("module m(input logic [3:0] a, b,"
                       " output logic [3:0] y);\n"
                       "assign y = a + b;\nendmodule\n")
        by_label = {n.label: n for n in dfg.nodes}
        assert by_label["a"].category == Category.PORT
        assert by_label["y"].category == Category.PORT
        plus = [n for n in dfg.nodes
                if n.operator_type == OperatorType.BINARY_OP]
        assert len(plus) == 1
        # a -> +, b -> +, + -> y, all combinational data edges
        assert all(e.timing == Timing.COMBINATIONAL for e in dfg.edges)
        assert all(e.role == Role.DATA for e in dfg.edges)
        assert len(dfg.edges) == 3

    def test_signal_nodes_unique_operators_not(self):
        dfg = _dfg_for("module m(input logic a, output logic y);\n"
                       "assign y = (a & a) | (a & a);\nendmodule\n")
        sig = [n for n in dfg.nodes if n.label == "a"]
        ops = [n for n in dfg.nodes
               if n.operator_type == OperatorType.BINARY_OP]
        assert len(sig) == 1
        assert len(ops) == 3  # two & occurrences plus one |

    def test_sequential_roles(self):
        src = ("module m(input logic clk, rst_n, d, en,"
               " output logic q);\n"
               "always_ff @(posedge clk or negedge rst_n)\n"
               "  if (!rst_n) q <= 1'b0;\n"
               "  else if (en) q <= d;\n"
               "endmodule\n")
        dfg = _dfg_for(src)
        roles = {}
        label = {n.node_id: n.label for n in dfg.nodes}
        for e in dfg.edges:
            roles.setdefault(label[e.src], set()).add(e.role)
        assert Role.CLOCK in roles["clk"]
        assert Role.RESET in roles["rst_n"]
        assert any(e.timing == Timing.SEQUENTIAL for e in dfg.edges)

    def test_predicate_edges(self):
        src = ("module m(input logic c, a, b, output logic y);\n"
               "always_comb begin\n  if (c) y = a; else y = b;\nend\n"
               "endmodule\n")
        dfg = _dfg_for(src)
        label = {n.node_id: n.label for n in dfg.nodes}
        pred_sources = {label[e.src] for e in dfg.edges
                        if e.role == Role.PREDICATE}
        assert "c" in pred_sources

    def test_constant_node(self):
        dfg = _dfg_for("module m(output logic [3:0] y);\n"
                       "assign y = 4'd7;\nendmodule\n")
        consts = [n for n in dfg.nodes if n.category == Category.CONSTANT]
        assert len(consts) == 1
        assert consts[0].label == "4'd7"


MULTI_MODULE = """\
module child (
  input logic clk,
  input logic [7:0] d_i,
  output logic [7:0] q_o
);
  always_ff @(posedge clk) q_o <= d_i;
endmodule

module top (
  input logic clk,
  input logic [7:0] in_a,
  input logic [7:0] in_b,
  output logic [7:0] out_y
);
  logic [7:0] stage1;
  logic [7:0] stage2;
  assign stage1 = in_a ^ in_b;
  child u_child (.clk(clk), .d_i(stage1), .q_o(stage2));
  assign out_y = stage2 & in_a;
endmodule
"""


def dtg_edges_oracle(snapshot):
    """Brute force: every (definer, user) pair of the same in-scope signal.

    Scope is lexical per module; instantiation ports bridge parent and
    child signals. Self-edges are excluded. Matches the constructive
    builder only if both agree on define/use analysis, which is the point.
    """
    defs = {}
    for blk in snapshot.blocks:
        for sig in blk.defined:
            defs.setdefault((blk.module_name, sig), []).append(blk.block_id)
    # port bridges: child port name <-> parent signals, direction from the
    # child module's port declaration
    bridges = []
    for pt in snapshot.passthroughs:
        child = snapshot.modules.get(pt.child_module)
        for port, parent_sigs in pt.connections:
            if port is None or child is None:
                continue
            direction = child.port_dirs.get(port)
            for sig in parent_sigs:
                bridges.append((pt.parent_module, pt.child_module, port,
                                sig, direction))
    edges = set()
    changed = True
    # close define-use over bridges by translating definitions across them
    sigdefs = dict(defs)
    while changed:
        changed = False
        for parent_mod, child_mod, port, sig, direction in bridges:
            child_key = (child_mod, port)
            parent_key = (parent_mod, sig)
            src_key, dst_key = ((parent_key, child_key)
                                if direction == "input"
                                else (child_key, parent_key))
            for d in sigdefs.get(src_key, []):
                if d not in sigdefs.setdefault(dst_key, []):
                    sigdefs[dst_key].append(d)
                    changed = True
    for blk in snapshot.blocks:
        for sig in blk.used:
            for d in sigdefs.get((blk.module_name, sig), []):
                if d != blk.block_id:
                    edges.add((d, blk.block_id, sig))
    return edges


class TestDtg:
    def test_edges_match_brute_force_oracle(self):
        snap = build_snapshot("s", [SourceFile("ip/top.sv", MULTI_MODULE)])
        dtg = build_dtg(snap)
        got = {(e.src, e.dst, e.via_signal) for e in dtg.edges}
        assert got == dtg_edges_oracle(snap)

    def test_crosses_module_boundary(self):
        snap = build_snapshot("s", [SourceFile("ip/top.sv", MULTI_MODULE)])
        dtg = build_dtg(snap)
        mods = {(e.src.split("::")[1], e.dst.split("::")[1])
                for e in dtg.edges}
        assert ("top", "child") in mods  # stage1 feeds the child register
        assert ("child", "top") in mods  # q_o comes back as stage2

    def test_no_self_edges(self):
        src = ("module m(input logic clk, output logic [3:0] q);\n"
               "always_ff @(posedge clk) q <= q + 1;\nendmodule\n")
        snap = build_snapshot("s", [SourceFile("ip/m.sv", src)])
        assert all(e.src != e.dst for e in build_dtg(snap).edges)

    def test_anonymization_preserves_structure(self):
        """Edge multiset must be identical up to the block-id renaming."""
        orig = build_snapshot("s", [SourceFile("ip/top.sv", MULTI_MODULE)])
        anon = build_snapshot("s", [anonymize(f) for f in orig.files])
        id_map = {a.block_id: b.block_id
                  for a, b in zip(anon.blocks, orig.blocks)}
        orig_edges = sorted((e.src, e.dst, e.role, e.timing)
                            for e in build_dtg(orig).edges)
        anon_edges = sorted((id_map[e.src], id_map[e.dst], e.role, e.timing)
                            for e in build_dtg(anon).edges)
        assert anon_edges == orig_edges

    def test_stats_shape(self):
        snap = build_snapshot("s", [SourceFile("ip/top.sv", MULTI_MODULE)])
        stats = build_dtg(snap).stats()
        assert stats["num_nodes"] == len(snap.blocks)
        assert stats["num_edges"] == len(build_dtg(snap).edges)
