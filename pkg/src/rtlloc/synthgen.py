"""Synthetic corpus with three planted retrieval cue families.

Each design is one IP with one module of roughly thirty blocks. Three
families of (query, block) supervision are planted so that each family
is solvable by a different evidence source:

- lexical: the query cites an identifier that appears in exactly one
  block, so surface text matching suffices.
- structural: the query names a dataflow motif (counter, shift register,
  parity tree, mux chain) whose block uses only throwaway identifiers,
  so only block-local graph structure can identify it.
- topology: the query cites a beacon identifier that appears only in a
  producer block; the targets are the consumers of the producer's output
  and share no text with the query, so only message passing over the
  design topology can reach them.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .blocks import Snapshot, SourceFile, build_snapshot
from .data import TrainingExample

FAMILIES = ("lexical", "structural", "topology")

_SYLLABLES = ["ka", "zo", "mi", "ru", "ta", "ve", "lo", "ni", "su", "ge",
              "ba", "dy", "fo", "qu", "xe", "pi"]

_LEXICAL_TEMPLATES = [
    "Update the expression that drives {uid} so the request is honored.",
    "Correct the gating condition feeding {uid} in this design.",
    "The value of {uid} is wrong under load, fix its driver.",
    "Rework how {uid} gets computed from its source operands.",
]

_STRUCTURAL_TEMPLATES = {
    "counter": [
        "Fix the counter that increments by one every clock cycle.",
        "The free running counter wraps too early, correct its update.",
        "Adjust the increment logic of the cycle counter register.",
    ],
    "shift": [
        "Fix the shift register that moves bits along each cycle.",
        "The serial shift chain drops a bit, repair the shifting update.",
        "Correct the shift register stage ordering on each clock.",
    ],
    "parity": [
        "Fix the parity tree that xors the data inputs together.",
        "The xor reduction computing parity gives the wrong result.",
        "Correct the combinational parity computed over the inputs.",
    ],
    "mux": [
        "Fix the priority mux chain selecting between the sources.",
        "The nested select chain picks the wrong source, fix it.",
        "Correct the cascaded conditional selection of the output.",
    ],
}

_TOPOLOGY_TEMPLATES = [
    "Adjust the blocks consuming the output of the {beacon} stage.",
    "Fix the downstream logic fed by the {beacon} stage result.",
    "The consumers of the {beacon} stage output need correcting.",
]


def _name(rng: np.random.Generator, n_syll: int = 3) -> str:
    return "".join(rng.choice(_SYLLABLES) for _ in range(n_syll))


@dataclass
class SyntheticCorpus:
    snapshots: list[Snapshot]
    dataset: list[TrainingExample]
    family_of: dict[str, str]  # query_id -> cue family


def _design_source(rng: np.random.Generator, design: str
                   ) -> tuple[str, dict]:
    """Module text plus the cue bookkeeping needed to write queries."""
    ins = [_name(rng) for _ in range(6)]
    uids = [f"{_name(rng)}_{design}_{i}" for i in range(8)]
    beacon = f"{_name(rng)}_beacon_{design}"
    link = _name(rng, 4)  # producer-to-consumer wire, deliberately bland

    lines = [f"module mod_{design} ("]
    lines.append("  input logic clk,")
    lines.append("  input logic rst_n,")
    for p in ins:
        lines.append(f"  input logic [7:0] {p},")
    lines.append(f"  input logic [7:0] {beacon},")
    lines.append("  output logic [7:0] out_bus")
    lines.append(");")

    sig: list[str] = []

    def decl(width: int = 8) -> str:
        s = _name(rng, 4)
        sig.append(s)
        lines.append(f"  logic [{width - 1}:0] {s};")
        return s

    regs = [decl() for _ in range(14)]
    lines.append(f"  logic [7:0] {link};")

    body: list[str] = []
    kinds: list[str] = []  # parallel list naming each block's cue role

    # lexical cue blocks: one unique identifier per block
    for uid in uids:
        lines.append(f"  logic [7:0] {uid};")
        a, b = rng.choice(ins, 2, replace=False)
        body.append(f"  assign {uid} = {a} & {b};")
        kinds.append("lexical")

    # structural motif blocks, all identifiers throwaway
    cnt = regs[0]
    body.append(f"  always_ff @(posedge clk) {cnt} <= {cnt} + 1;")
    kinds.append("motif:counter")
    sh, d0 = regs[1], rng.choice(ins)
    body.append(f"  always_ff @(posedge clk) {sh} <= "
                f"{{{sh}[6:0], {d0}[0]}};")
    kinds.append("motif:shift")
    pa = regs[2]
    a, b, c, d = rng.choice(ins, 4, replace=False)
    body.append(f"  assign {pa} = {a} ^ {b} ^ {c} ^ {d};")
    kinds.append("motif:parity")
    mx = regs[3]
    s0, s1 = rng.choice(ins, 2, replace=False)
    a, b, c = rng.choice(ins, 3, replace=False)
    body.append(f"  assign {mx} = {s0}[0] ? {a} : {s1}[0] ? {b} : {c};")
    kinds.append("motif:mux")

    # beacon producer and its consumers; consumers never mention the beacon
    x = rng.choice(ins)
    body.append(f"  assign {link} = {beacon} ^ {x};")
    kinds.append("beacon")
    for i in range(3):
        r = regs[4 + i]
        y = rng.choice(ins)
        body.append(f"  always_ff @(posedge clk) {r} <= {link} + {y};")
        kinds.append("downstream")

    # filler blocks with no planted cue; some consume local signals so the
    # beacon consumers are not the only blocks reading module-internal wires
    for i in range(13):
        r = regs[7 + i % 7]
        a = rng.choice(ins)
        b = regs[int(rng.integers(7, 14))] if i % 2 else rng.choice(ins)
        op = rng.choice(["|", "&", "+"])
        if rng.random() < 0.5:
            body.append(f"  assign out_bus = {a} {op} {b};")
        else:
            body.append(f"  always_ff @(posedge clk) {r} <= {a} {op} {b};")
        kinds.append("filler")

    lines.extend(body)
    lines.append("endmodule")
    info = {"uids": uids, "beacon": beacon, "kinds": kinds}
    return "\n".join(lines) + "\n", info


def generate_corpus(num_designs: int = 40, seed: int = 36,
                    lexical_queries: int = 3) -> SyntheticCorpus:
    rng = np.random.default_rng(seed)
    snapshots: list[Snapshot] = []
    dataset: list[TrainingExample] = []
    family_of: dict[str, str] = {}

    for di in range(num_designs):
        design = f"ip{di:02d}"
        src, info = _design_source(rng, design)
        path = f"{design}/rtl/{design}.sv"
        snap = build_snapshot(design, [SourceFile(path=path, content=src)])
        snapshots.append(snap)

        by_role: dict[str, list[str]] = {}
        for blk, role in zip(snap.blocks, info["kinds"]):
            by_role.setdefault(role, []).append(blk.block_id)

        def add(qid: str, text: str, positives: list[str], family: str):
            dataset.append(TrainingExample(
                query_id=qid, text=text, snapshot_id=design,
                ip_name=design, positives=tuple(positives)))
            family_of[qid] = family

        picks = rng.choice(len(info["uids"]), lexical_queries, replace=False)
        for qi, ui in enumerate(sorted(int(i) for i in picks)):
            tmpl = _LEXICAL_TEMPLATES[int(rng.integers(len(_LEXICAL_TEMPLATES)))]
            add(f"{design}:lex{qi}", tmpl.format(uid=info["uids"][ui]),
                [by_role["lexical"][ui]], "lexical")

        for motif in ("counter", "shift", "parity", "mux"):
            tmpl = _STRUCTURAL_TEMPLATES[motif][
                int(rng.integers(len(_STRUCTURAL_TEMPLATES[motif])))]
            add(f"{design}:str:{motif}", tmpl,
                by_role[f"motif:{motif}"], "structural")

        for qi in range(2):
            tmpl = _TOPOLOGY_TEMPLATES[int(rng.integers(len(_TOPOLOGY_TEMPLATES)))]
            add(f"{design}:top{qi}", tmpl.format(beacon=info["beacon"]),
                by_role["downstream"], "topology")

    return SyntheticCorpus(snapshots, dataset, family_of)
