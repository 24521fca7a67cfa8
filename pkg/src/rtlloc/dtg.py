"""Design-wide topology graph: typed directed multigraph over blocks.

Edges follow define-use relations: u -> v when u assigns a signal v reads.
Resolution is lexical per module scope; instantiation port connections
bridge scopes when they are textually resolvable.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .blocks import BlockKind, RtlBlock, Snapshot
from .dfg import Role, Timing


@dataclass(frozen=True)
class DtgEdge:
    src: str
    dst: str
    via_signal: str
    role: str
    timing: str

    def to_json_dict(self) -> dict:
        return {"src": self.src, "dst": self.dst, "via_signal": self.via_signal,
                "role": self.role, "timing": self.timing}


@dataclass
class DesignTopologyGraph:
    snapshot_id: str
    nodes: list[str] = field(default_factory=list)
    edges: list[DtgEdge] = field(default_factory=list)

    def to_json_dict(self) -> dict:
        return {
            "snapshot_id": self.snapshot_id,
            "nodes": list(self.nodes),
            "edges": [e.to_json_dict() for e in self.edges],
        }

    def stats(self) -> dict:
        return {"snapshot_id": self.snapshot_id,
                "num_nodes": len(self.nodes), "num_edges": len(self.edges)}


def use_role(block: RtlBlock, signal: str) -> str:
    """How the consuming block reads the signal (role of the inbound edge)."""
    if signal in block.used_clock:
        return Role.CLOCK
    if signal in block.used_reset:
        return Role.RESET
    if signal in block.used_pred and signal not in block.used_data:
        return Role.PREDICATE
    if signal in block.used_event and signal not in block.used_data:
        return Role.EVENT
    return Role.DATA


def use_timing(block: RtlBlock) -> str:
    if block.kind == BlockKind.ALWAYS_FF:
        return Timing.SEQUENTIAL
    if block.kind == BlockKind.ALWAYS_GENERIC and block.edge_sensitive:
        return Timing.SEQUENTIAL
    return Timing.COMBINATIONAL


def build_dtg(snapshot: Snapshot) -> DesignTopologyGraph:
    """Build the topology graph from per-block def/use sets.

    Self-edges are excluded; parallel edges through distinct signals are
    preserved as distinct edges.
    """
    # scoped signal -> defining block ids
    definers: dict[tuple[str, str], set[str]] = {}
    for blk in snapshot.blocks:
        for s in blk.defined:
            definers.setdefault((blk.module_name, s), set()).add(blk.block_id)

    # instantiation bridges, iterated to a fixpoint for hierarchy chains
    bridges: list[tuple[tuple[str, str], tuple[str, str]]] = []  # from -> to
    for pt in snapshot.passthroughs:
        child = snapshot.modules.get(pt.child_module)
        if child is None:
            continue
        for port, sigs in pt.connections:
            if port is None:
                continue  # positional: not textually resolvable
            direction = child.port_dirs.get(port)
            if direction == "input":
                for s in sigs:
                    bridges.append(((pt.parent_module, s), (pt.child_module, port)))
            elif direction == "output":
                for s in sigs:
                    bridges.append(((pt.child_module, port), (pt.parent_module, s)))

    for _ in range(len(bridges) + 1):
        changed = False
        for src_key, dst_key in bridges:
            add = definers.get(src_key, set())
            if add and not add <= definers.get(dst_key, set()):
                definers.setdefault(dst_key, set()).update(add)
                changed = True
        if not changed:
            break

    edge_set: set[DtgEdge] = set()
    for blk in snapshot.blocks:
        timing = use_timing(blk)
        for s in blk.used:
            for u in definers.get((blk.module_name, s), ()):
                if u == blk.block_id:
                    continue
                edge_set.add(DtgEdge(u, blk.block_id, s, use_role(blk, s), timing))

    nodes = [b.block_id for b in snapshot.blocks]
    edges = sorted(edge_set, key=lambda e: (e.src, e.dst, e.via_signal, e.role))
    return DesignTopologyGraph(snapshot.snapshot_id, nodes, edges)
