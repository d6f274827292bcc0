"""Score-driven assignment of peers to network positions.

Positions are ranked by criticality: the root group first, then each deeper
layer, and within a layer by the depth-first update order.  The best-scoring
peers fill the most critical layers.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

from ._core import FractalError
from .constree import ConsensusTree, layer_of, project
from .labeling import NODE, PairLabel
from .ordering import dfs_reference_order

COMPONENTS = ("processing", "storage", "uptime", "connectivity")
DEFAULT_WEIGHTS = {name: 0.25 for name in COMPONENTS}
EXPELLED = "expelled"


class RebalanceError(FractalError):
    pass


@dataclass(frozen=True)
class PeerRecord:
    peer_id: str
    score_components: Mapping[str, float]
    composite_score: float | None = None
    position: PairLabel | None = None

    def to_json(self) -> dict:
        doc = {
            "peer_id": self.peer_id,
            "metrics": dict(self.score_components),
            "position": None if self.position is None else str(self.position),
        }
        if self.composite_score is not None:
            doc["composite_score"] = self.composite_score
        return doc

    @classmethod
    def from_json(cls, doc: Mapping) -> "PeerRecord":
        try:
            pid = doc["peer_id"]
            metrics = doc["metrics"]
        except (KeyError, TypeError):
            raise RebalanceError(f"roster entry needs peer_id and metrics: {doc!r}") from None
        pos = doc.get("position")
        return cls(str(pid), {k: float(v) for k, v in metrics.items()},
                   doc.get("composite_score"),
                   None if pos is None else PairLabel.parse(pos, NODE))


def load_roster(path) -> list[PeerRecord]:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise RebalanceError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(doc, list):
        raise RebalanceError(f"{path}: roster must be a JSON list")
    return [PeerRecord.from_json(d) for d in doc]


def _check_weights(weights: Mapping[str, float]) -> None:
    if not weights:
        raise RebalanceError("no weights given")
    if any(w < 0 for w in weights.values()):
        raise RebalanceError("weights must be non-negative")
    if not math.isclose(math.fsum(weights.values()), 1.0, abs_tol=1e-9):
        raise RebalanceError("weights must sum to 1")


def composite_scores(components: Sequence[Mapping[str, float]],
                     weights: Mapping[str, float] = DEFAULT_WEIGHTS) -> list[float]:
    """Weighted sum of components min-max normalized across all peers.

    A component with no spread normalizes to 0.5 for everyone.
    """
    _check_weights(weights)
    if not components:
        raise RebalanceError("empty component set")
    for comp in components:
        missing = set(weights) - set(comp)
        if missing:
            raise RebalanceError(f"missing score components {sorted(missing)}")
        if "uptime" in comp and not 0.0 <= comp["uptime"] <= 1.0:
            raise RebalanceError(f"uptime must lie in [0, 1], got {comp['uptime']}")
    scores = [0.0] * len(components)
    for name, w in weights.items():
        col = [float(c[name]) for c in components]
        lo, hi = min(col), max(col)
        for i, x in enumerate(col):
            norm = 0.5 if hi == lo else (x - lo) / (hi - lo)
            scores[i] += w * norm
    return scores


def composite(components: Mapping[str, float], peers: Sequence[Mapping[str, float]],
              weights: Mapping[str, float] = DEFAULT_WEIGHTS) -> float:
    """Score of one component map, normalized against ``peers`` (which should contain it)."""
    return composite_scores([components, *peers], weights)[0]


@dataclass(frozen=True)
class Move:
    peer_id: str
    source: PairLabel | None
    target: PairLabel | str  # a position or EXPELLED

    def to_json(self) -> dict:
        return {"peer_id": self.peer_id,
                "from": None if self.source is None else str(self.source),
                "to": self.target if isinstance(self.target, str) else str(self.target)}


@dataclass(frozen=True)
class RebalancePlan:
    moves: tuple[Move, ...]
    scores: Mapping[str, float] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.moves)

    def to_json(self) -> list[dict]:
        return [m.to_json() for m in self.moves]

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2) + "\n"


def criticality_order(tree: ConsensusTree) -> list[PairLabel]:
    order = dfs_reference_order(tree)
    rank = {lab: k for k, lab in enumerate(order)}
    return sorted(order, key=lambda lab: (layer_of(project(lab)), rank[lab]))


def position_layer(label: PairLabel) -> int:
    return layer_of(project(label))


def _check_roster(peers: Sequence[PeerRecord], valid: set[PairLabel]) -> None:
    ids = [p.peer_id for p in peers]
    if len(set(ids)) != len(ids):
        raise RebalanceError("duplicate peer_id in roster")
    held = [p.position for p in peers if p.position is not None]
    if len(set(held)) != len(held):
        raise RebalanceError("two peers hold the same position")
    for pos in held:
        if pos not in valid:
            raise RebalanceError(f"position {pos} is not a node of the network")


def plan_rebalance(peers: Iterable[PeerRecord], tree: ConsensusTree, expel_threshold: float,
                   weights: Mapping[str, float] = DEFAULT_WEIGHTS) -> RebalancePlan:
    peers = list(peers)
    positions = criticality_order(tree)
    _check_roster(peers, set(positions))
    scores = dict(zip((p.peer_id for p in peers),
                      composite_scores([p.score_components for p in peers], weights)))

    moves: list[Move] = []
    eligible = [p for p in peers if scores[p.peer_id] >= expel_threshold]
    for p in peers:
        if scores[p.peer_id] < expel_threshold and p.position is not None:
            moves.append(Move(p.peer_id, p.position, EXPELLED))
    if len(eligible) > len(positions):
        raise RebalanceError(
            f"{len(eligible)} peers above threshold exceed capacity {len(positions)}")

    ranked = sorted(eligible, key=lambda p: (-scores[p.peer_id], p.peer_id))
    target_layer = {p.peer_id: position_layer(positions[k]) for k, p in enumerate(ranked)}
    kept = {p.peer_id for p in ranked
            if p.position is not None and position_layer(p.position) == target_layer[p.peer_id]}
    taken = {p.position for p in ranked if p.peer_id in kept}
    vacated = {p.position for p in peers if p.position is not None} - taken

    rank = {q: k for k, q in enumerate(positions)}
    free: dict[int, list[PairLabel]] = {}
    for pos in sorted((q for q in positions if q not in taken),
                      key=lambda q: (q not in vacated, rank[q])):
        free.setdefault(position_layer(pos), []).append(pos)
    cursor = {layer: 0 for layer in free}
    for p in ranked:
        if p.peer_id in kept:
            continue
        layer = target_layer[p.peer_id]
        dest = free[layer][cursor[layer]]
        cursor[layer] += 1
        moves.append(Move(p.peer_id, p.position, dest))
    return RebalancePlan(tuple(moves), scores)


def apply(plan: RebalancePlan, peers: Iterable[PeerRecord]) -> list[PeerRecord]:
    """Return updated records; raises if the plan does not match ``peers``."""
    peers = list(peers)
    by_id = {p.peer_id: p for p in peers}
    if len(by_id) != len(peers):
        raise RebalanceError("duplicate peer_id in roster")
    new_pos = {p.peer_id: p.position for p in peers}
    seen: set[str] = set()
    for mv in plan.moves:
        if mv.peer_id not in by_id:
            raise RebalanceError(f"stale plan: unknown peer {mv.peer_id}")
        if mv.peer_id in seen:
            raise RebalanceError(f"peer {mv.peer_id} moved twice")
        seen.add(mv.peer_id)
        if by_id[mv.peer_id].position != mv.source:
            raise RebalanceError(f"stale plan: {mv.peer_id} is not at {mv.source}")
        new_pos[mv.peer_id] = None if mv.target == EXPELLED else mv.target
    held = [pos for pos in new_pos.values() if pos is not None]
    if len(held) != len(set(held)):
        raise RebalanceError("plan assigns two peers to one position")
    return [replace(p, position=new_pos[p.peer_id],
                    composite_score=plan.scores.get(p.peer_id, p.composite_score))
            for p in peers]
