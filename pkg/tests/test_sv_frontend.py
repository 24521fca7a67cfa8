import string

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rtlloc.anonymize import anonymize_text
from rtlloc.blocks import (SourceFile, build_snapshot,
                           is_testbench_or_generated, segment_blocks)
from rtlloc.tokens import TokenKind, tokenize


class TestTokenize:
    def test_kinds_and_keywords(self):
        toks = tokenize("assign foo = 8'hFF; // done")
        kinds = [(t.kind, t.text) for t in toks]
        assert (TokenKind.KEYWORD, "assign") in kinds
        assert (TokenKind.IDENT, "foo") in kinds
        assert any(t.kind == TokenKind.NUMBER and t.text == "8'hFF"
                   for t in toks)
        assert all(t.kind != TokenKind.COMMENT for t in toks)

    def test_trivia_roundtrip(self, two_block_source):
        toks = tokenize(two_block_source, keep_trivia=True)
        assert "".join(t.text for t in toks) == two_block_source

    def test_fill_literal_and_operators(self):
        toks = tokenize("q <= '0; r = a <<< 2;")
        texts = [t.text for t in toks]
        assert "'0" in texts
        assert "<=" in texts
        assert "<<<" in texts

    @given(st.text(alphabet=string.printable, max_size=200))
    @settings(max_examples=200, deadline=None)
    def test_trivia_roundtrip_any_text(self, text):
        toks = tokenize(text, keep_trivia=True)
        assert "".join(t.text for t in toks) == text


class TestSegmentation:
    def test_two_blocks(self, two_block_source):
        blocks = segment_blocks(SourceFile("chip/rtl/x.sv",
                                           two_block_source))
        assert [b.kind for b in blocks] == ["assign", "always_ff"]
        assert blocks[0].module_name == "two_blocks"

    def test_spans_reconstruct_verbatim(self, two_block_source):
        f = SourceFile("chip/rtl/x.sv", two_block_source)
        raw = two_block_source.encode()
        for b in segment_blocks(f):
            assert raw[b.span[2]:b.span[3]].decode() == b.text

    def test_def_use(self, two_block_source):
        blocks = segment_blocks(SourceFile("chip/rtl/x.sv",
                                           two_block_source))
        assign, ff = blocks
        assert assign.defined == {"nxt"}
        assert assign.used == {"a", "b"}
        assert ff.defined == {"q"}
        assert "nxt" in ff.used and "clk" in ff.used_clock
        assert "rst_n" in ff.used_reset

    def test_functions_and_initial_skipped(self):
        src = """module m(input logic c, output logic o);
  function automatic logic f(logic x);
    return ~x;
  endfunction
  initial o = 0;
  assign o = f(c);
endmodule
"""
        blocks = segment_blocks(SourceFile("ip/m.sv", src))
        assert [b.kind for b in blocks] == ["assign"]

    def test_ordinals_reset_per_module(self):
        src = """module a(); assign x = 1; endmodule
module b(); assign y = 2; endmodule
"""
        blocks = segment_blocks(SourceFile("ip/m.sv", src))
        assert blocks[0].block_id.endswith("::a::assign::0")
        assert blocks[1].block_id.endswith("::b::assign::0")

    def test_block_id_format(self, two_block_source):
        snap = build_snapshot("s", [SourceFile("chip/rtl/x.sv",
                                               two_block_source)])
        for blk in snap.blocks:
            path, module, kind, ordinal = blk.block_id.rsplit("::", 3)
            assert path == "chip/rtl/x.sv"
            assert module == "two_blocks"
            assert kind == blk.kind
            assert ordinal.isdigit()


class TestTestbenchPredicate:
    @pytest.mark.parametrize("path,excluded", [
        ("chip/dv/driver.sv", True),
        ("chip/tb/top.sv", True),
        ("chip/rtl/foo_tb.sv", True),
        ("chip/rtl/foo.sv", False),
        ("tbx/rtl/foo.sv", False),
    ])
    def test_paths(self, path, excluded):
        assert is_testbench_or_generated(path) is excluded

    def test_autogen_marker(self):
        content = "// This file is auto-generated, do not edit\nmodule m();"
        assert is_testbench_or_generated("chip/rtl/gen.sv", content)
        assert not is_testbench_or_generated("chip/rtl/gen.sv", "module m();")


class TestAnonymize:
    def test_first_occurrence_order(self):
        out = anonymize_text("assign foo = bar & foo;")
        assert out == "assign VAR_0 = VAR_1 & VAR_0;"

    def test_keywords_and_literals_kept(self, two_block_source):
        out = anonymize_text(two_block_source)
        assert "always_ff" in out and "posedge" in out and "'0" in out
        assert "rst_n" not in out

    def test_idempotent(self, two_block_source):
        once = anonymize_text(two_block_source)
        assert anonymize_text(once) == once

    def test_token_kind_sequence_preserved(self, two_block_source):
        before = [t.kind for t in tokenize(two_block_source)]
        after = [t.kind for t in tokenize(anonymize_text(two_block_source))]
        assert before == after

    @given(st.lists(st.sampled_from(
        ["alpha", "beta", "gamma", "delta", "assign", "=", ";", "&", "42"]),
        min_size=1, max_size=30))
    @settings(max_examples=100, deadline=None)
    def test_idempotent_generated(self, parts):
        src = " ".join(parts)
        once = anonymize_text(src)
        assert anonymize_text(once) == once
