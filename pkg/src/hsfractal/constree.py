"""Consensus tree: nodes grouped by the face that generated them.

A consensus node is identified by a face label (a tuple of pairs); the root
is the empty tuple and stands for the group of tier-1 nodes.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

from ._core import FractalError, check_budget, check_params, node_count
from .labeling import NODE, Pair, PairLabel, format_pairs, is_node_pairs, iter_face_pairs

ConsensusId = tuple[Pair, ...]
ROOT: ConsensusId = ()


def format_id(cid: ConsensusId) -> str:
    return "(0,0)" if cid == ROOT else format_pairs(cid)


def parse_id(text: str) -> ConsensusId:
    from .labeling import parse_pairs

    pairs = parse_pairs(text)
    return ROOT if pairs == ((0, 0),) else pairs


def layer_of(cid: ConsensusId) -> int:
    return len(cid) + 1


@dataclass(frozen=True)
class ConsensusNode:
    id: ConsensusId
    members: tuple[PairLabel, ...]
    layer: int

    @property
    def name(self) -> str:
        return format_id(self.id)


def members_of(cid: ConsensusId, n: int) -> tuple[PairLabel, ...]:
    return tuple(PairLabel(cid + ((i, 0),), NODE) for i in range(1, n + 1))


def project(node_label: PairLabel, n: int | None = None) -> ConsensusId:
    """The quotient map: drop the final pair (tier-1 nodes map to the root)."""
    if node_label.kind != NODE:
        raise FractalError(f"{node_label} is not a node label")
    if n is not None and not is_node_pairs(node_label.pairs, n):
        raise FractalError(f"{node_label} is not a valid node label for N={n}")
    return node_label.pairs[:-1]


@dataclass
class ConsensusTree:
    n: int
    m: int
    nodes: dict[ConsensusId, ConsensusNode] = field(default_factory=dict)
    children: dict[ConsensusId, tuple[ConsensusId, ...]] = field(default_factory=dict)
    parent: dict[ConsensusId, ConsensusId] = field(default_factory=dict)

    @property
    def root(self) -> ConsensusNode:
        return self.nodes[ROOT]

    def __len__(self) -> int:
        return len(self.nodes)

    def __contains__(self, cid) -> bool:
        return cid in self.nodes

    def layer_sizes(self) -> list[int]:
        sizes = [0] * self.m
        for node in self.nodes.values():
            sizes[node.layer - 1] += 1
        return sizes

    def ancestors(self, cid: ConsensusId) -> list[ConsensusId]:
        """Walk the explicit parent map up to (and including) the root."""
        out = []
        while cid != ROOT:
            cid = self.parent[cid]
            out.append(cid)
        return out

    def iter_subtree(self, cid: ConsensusId):
        stack = [cid]
        while stack:
            cur = stack.pop()
            yield cur
            stack.extend(reversed(self.children[cur]))

    def subtree_members(self, cid: ConsensusId) -> set[PairLabel]:
        if cid not in self.nodes:
            raise FractalError(f"unknown consensus node {format_id(cid)}")
        out: set[PairLabel] = set()
        for sub in self.iter_subtree(cid):
            out.update(self.nodes[sub].members)
        return out

    def to_json(self, cid: ConsensusId = ROOT) -> dict:
        node = self.nodes[cid]
        return {
            "id": node.name,
            "layer": node.layer,
            "members": [str(v) for v in node.members],
            "children": [self.to_json(c) for c in self.children[cid]],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json())

    def to_dot(self) -> str:
        lines = [f"digraph consensus_tree_N{self.n}_m{self.m} {{"]
        for cid, node in self.nodes.items():
            lines.append(f'  "{node.name}" [label="{node.name}\\nlayer {node.layer}"];')
        for cid, kids in self.children.items():
            for kid in kids:
                lines.append(f'  "{format_id(cid)}" -> "{format_id(kid)}";')
        lines.append("}")
        return "\n".join(lines) + "\n"


def child_ids(cid: ConsensusId, n: int) -> list[ConsensusId]:
    """Direct subordinates, sorted by the final pair."""
    if cid == ROOT:
        return [((i, 0),) for i in range(1, n + 1)]
    k = cid[-1][0]
    return [cid + ((j, s),) for j in range(1, n + 1) if j != k for s in (0, 1)]


def build(n: int, m: int, budget: int | None = None) -> ConsensusTree:
    check_params(n, m)
    check_budget(node_count(n, m), budget, f"consensus tree T_{{{n},{m}}}")
    tree = ConsensusTree(n, m)
    tree.nodes[ROOT] = ConsensusNode(ROOT, members_of(ROOT, n), 1)
    ids = [ROOT]
    for t in range(1, m):
        ids.extend(iter_face_pairs(n, t))
    for cid in ids:
        if cid != ROOT:
            tree.nodes[cid] = ConsensusNode(cid, members_of(cid, n), layer_of(cid))
            tree.parent[cid] = cid[:-1]
        tree.children[cid] = tuple(child_ids(cid, n)) if len(cid) < m - 1 else ()
    return tree
