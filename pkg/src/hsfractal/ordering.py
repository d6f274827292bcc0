"""Ouroboros-like update order: the successor map B over all node labels.

The traversal is a depth-first walk of the consensus tree.  Inside a
non-root consensus node ``X`` with apex digit ``a`` the walk

* enters at member ``e`` (``1``, or ``2`` when ``a == 1``);
* from member ``i != a`` descends into the child pair ``p`` given by the
  rotation with ``a`` skipped (``p = sigma(i)``, or ``sigma^2(i)`` when
  ``sigma(i) == a``): first ``X,(p,0)``, then its sibling ``X,(p,1)``;
* returns from that pair to member ``p``, except that the pair ``p == e``
  (the last one visited) returns to the apex ``a``;
* leaves ``X`` from the apex.

Leaf consensus nodes (tier-m members) are walked in rotation order from the
entry member and left from the member preceding the entry.

Two variants are provided.  ``"consistent"`` (the default) is the closed
Hamiltonian cycle described above.  ``"printed"`` evaluates the case
analysis literally, including the branches that do not close the cycle;
``audit_printed`` reports which branches those are.  Every step is tagged
with the name of the case branch that produced it, e.g. ``leaf-outer-return``.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Iterable

from ._core import FractalError, check_budget, check_params, node_count
from .constree import ROOT, ConsensusId, ConsensusTree, format_id
from .labeling import NODE, Pair, PairLabel, is_face_pairs, is_node_pairs, iter_node_pairs

CONSISTENT = "consistent"
PRINTED = "printed"


class CycleError(FractalError):
    """The successor map failed to produce a closed Hamiltonian cycle."""

    def __init__(self, message: str, branch: str | None = None):
        super().__init__(message if branch is None else f"{message} [branch {branch}]")
        self.branch = branch


@dataclass(frozen=True)
class Rotation:
    """A cyclic permutation of ``1..N``; ``images[i-1]`` is ``sigma(i)``."""

    images: tuple[int, ...]

    def __post_init__(self):
        n = len(self.images)
        if sorted(self.images) != list(range(1, n + 1)):
            raise FractalError(f"{self.images} is not a permutation of 1..{n}")
        i, steps = 1, 0
        while True:
            i = self.images[i - 1]
            steps += 1
            if i == 1:
                break
        if steps != n:
            raise FractalError(f"{self.images} is not a single {n}-cycle")

    @classmethod
    def standard(cls, n: int) -> "Rotation":
        return cls(tuple(list(range(2, n + 1)) + [1]))

    @classmethod
    def from_cycle(cls, cycle: Iterable[int]) -> "Rotation":
        """Build from cycle notation, e.g. ``(1, 3, 2)``."""
        cyc = list(cycle)
        images = [0] * len(cyc)
        for pos, x in enumerate(cyc):
            images[x - 1] = cyc[(pos + 1) % len(cyc)]
        return cls(tuple(images))

    @property
    def n(self) -> int:
        return len(self.images)

    def __call__(self, i: int) -> int:
        return self.images[i - 1]

    def cycle(self) -> tuple[int, ...]:
        out, i = [1], self.images[0]
        while i != 1:
            out.append(i)
            i = self.images[i - 1]
        return tuple(out)


def _rotation(n: int, sigma: Rotation | None) -> Rotation:
    if sigma is None:
        return Rotation.standard(n)
    if sigma.n != n:
        raise FractalError(f"rotation acts on 1..{sigma.n}, network has N={n}")
    return sigma


def _entry(face: tuple[Pair, ...]) -> int:
    return 1 if face[-1][0] != 1 else 2


def _skip(sigma: Rotation, i: int, a: int) -> int:
    j = sigma(i)
    return sigma(j) if j == a else j


# -- consistent variant ----------------------------------------------------------

def _exit(face: tuple[Pair, ...], leaf: bool) -> tuple[tuple[Pair, ...], str]:
    if len(face) == 1:
        return ((face[0][0], 0),), "root-return"
    parent, (k, s) = face[:-1], face[-1]
    if s == 0:
        sib = parent + ((k, 1),)
        return sib + ((_entry(sib), 0),), "leaf-inner-exit" if leaf else "inner-to-sibling"
    if k == _entry(parent):
        return parent + ((parent[-1][0], 0),), "leaf-outer-return-apex" if leaf else "outer-return-apex"
    return parent + ((k, 0),), "leaf-outer-return" if leaf else "outer-return"


def _next_consistent(pairs, n, m, sigma):
    t = len(pairs)
    if t == 1:
        j = sigma(pairs[0][0])
        if m == 1:
            return ((j, 0),), "root-rotate"
        return ((j, 0), (1 if j != 1 else 2, 0)), "root-descend"
    face, i = pairs[:-1], pairs[-1][0]
    a, s = face[-1]
    if t < m:
        if i == a:
            return _exit(face, leaf=False)
        p = _skip(sigma, i, a)
        child = face + ((p, 0),)
        if t == 2:
            branch = "tier2-descend"
        elif s == 0:
            branch = "inner-descend" if sigma(i) != a else "inner-descend-skip"
        else:
            branch = "outer-descend" if sigma(i) != a else "outer-descend-skip"
        return child + ((_entry(child), 0),), branch
    if m == 2:
        # tier-2 leaves hang off the root: apex-last walk so the apex returns to the root
        if i == a:
            return _exit(face, leaf=False)
        p = _skip(sigma, i, a)
        if p == _entry(face):
            return face + ((a, 0),), "tier2-leaf-step"
        return face + ((p, 0),), "tier2-leaf-step"
    nxt = sigma(i)
    if nxt != _entry(face):
        return face + ((nxt, 0),), "leaf-inner-step" if s == 0 else "leaf-outer-step"
    return _exit(face, leaf=True)


# -- printed variant -------------------------------------------------------------

def _next_printed(pairs, n, m, sigma):
    t = len(pairs)
    sig2 = lambda x: sigma(sigma(x))  # noqa: E731

    def inside(x) -> bool:
        return is_face_pairs(x, n, max_len=m)

    if t == 1:
        j = sigma(pairs[0][0])
        if m == 1:
            return ((j, 0),), "root-rotate"
        return (((j, 0), (1, 0)), "root-descend/a") if j != 1 else (((j, 0), (2, 0)), "root-descend/b")
    if t == 2:
        k, i = pairs[0][0], pairs[1][0]
        if i == k:
            return ((k, 0),), "root-return"
        if sigma(i) != k:
            d, tag = sigma(i), "tier2-descend"
            sub = "a" if inside(((k, 0), (d, 0), (1, 0))) else "b"
        else:
            d, tag = sig2(i), "tier2-descend"
            sub = "c" if inside(((k, 0), (d, 0), (1, 0))) else "d"
        last = 1 if sub in "ac" else 2
        return ((k, 0), (d, 0), (last, 0)), tag + "/" + sub

    lab1, (k, s), i = pairs[:-2], pairs[-2], pairs[-1][0]

    def k0() -> int:
        for cand in range(1, n + 1):
            if not inside(lab1 + ((cand, 0),)):
                return cand
        raise CycleError(f"no k0 exists for {pairs}", "outer-return-apex" if t < m else "leaf-outer-return-apex")

    if t < m:
        here = lab1 + ((k, s),)
        if inside(here + ((i, 0),)) and inside(here + ((sigma(i), 0),)):
            eq = "inner-descend" if s == 0 else "outer-descend"
            d = sigma(i)
            if inside(here + ((d, 0), (1, 0))):
                return lab1 + ((k, 1), (d, 0), (1, 0)), eq + "/a"
            d2 = d if s == 0 else sig2(i)  # outer faces take sigma^2 in this branch
            return lab1 + ((k, 1), (d2, 0), (2, 0)), eq + "/b"
        if inside(here + ((i, 0),)):
            eq = "inner-descend-skip" if s == 0 else "outer-descend-skip"
            d = sig2(i)
            last = 1 if inside(here + ((d, 0), (1, 0))) else 2
            return lab1 + ((k, 1), (d, 0), (last, 0)), eq + ("/a" if last == 1 else "/b")
        if s == 0:
            if inside(lab1 + ((k, 0), (1, 0))):
                return lab1 + ((k, 1), (1, 0)), "inner-to-sibling/a"
            return lab1 + ((k, 1), (2, 0)), "inner-to-sibling/b"
        if k not in (1, n):
            return lab1 + ((k, 0),), "outer-return"
        return lab1 + ((k0(), 0),), "outer-return-apex"

    if s == 0:
        if i != n:
            return lab1 + ((k, 0), (sigma(i), 0)), "leaf-inner-step"
        return lab1 + ((k, 1), (1, 0)), "leaf-inner-exit"
    if i != n:
        return lab1 + ((k, 1), (sigma(i), 0)), "leaf-outer-step"
    if k not in (1, n):
        return lab1 + ((k, 0),), "leaf-outer-return"
    return lab1 + ((k0(), 0),), "leaf-outer-return-apex"


_VARIANTS = {CONSISTENT: _next_consistent, PRINTED: _next_printed}


def successor_with_branch(label: PairLabel, n: int, m: int, sigma: Rotation | None = None,
                          variant: str = CONSISTENT) -> tuple[PairLabel, str]:
    check_params(n, m)
    if label.kind != NODE or not is_node_pairs(label.pairs, n, m):
        raise FractalError(f"{label} is not a node of V_{{{n},{m}}}")
    try:
        step = _VARIANTS[variant]
    except KeyError:
        raise FractalError(f"unknown successor variant {variant!r}") from None
    pairs, branch = step(label.pairs, n, m, _rotation(n, sigma))
    return PairLabel(pairs, NODE), branch


def successor(label: PairLabel, n: int, m: int, sigma: Rotation | None = None,
              variant: str = CONSISTENT) -> PairLabel:
    """B(label): the node updated right after ``label``."""
    return successor_with_branch(label, n, m, sigma, variant)[0]


# -- cycles ------------------------------------------------------------------------

@dataclass
class UpdateCycle:
    order: list[PairLabel]
    skipped: frozenset[PairLabel] = field(default_factory=frozenset)

    def __len__(self) -> int:
        return len(self.order)

    def to_json(self) -> str:
        return json.dumps([str(v) for v in self.order])

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["index", "label", "consensus_node"])
        for idx, lab in enumerate(self.order):
            writer.writerow([idx, str(lab), format_id(lab.pairs[:-1])])
        return buf.getvalue()


def iterate_successor(n: int, m: int, sigma: Rotation | None = None,
                      start: PairLabel | None = None, variant: str = CONSISTENT,
                      budget: int | None = None) -> list[tuple[PairLabel, str]]:
    """Follow B from ``start`` until it returns; each entry is (node, branch that left it).

    Raises CycleError naming the branch responsible when the walk leaves
    ``V_{N,m}``, revisits a node other than the start, or closes early.
    """
    check_params(n, m)
    total = node_count(n, m)
    check_budget(total, budget, f"update cycle of V_{{{n},{m}}}")
    sig = _rotation(n, sigma)
    step = _VARIANTS.get(variant)
    if step is None:
        raise FractalError(f"unknown successor variant {variant!r}")
    first = (start or PairLabel(((1, 0),))).pairs
    if not is_node_pairs(first, n, m):
        raise FractalError(f"start {format_id(first)} is not a node of V_{{{n},{m}}}")
    seen = {first}
    walk = []
    cur = first
    while True:
        nxt, branch = step(cur, n, m, sig)
        walk.append((PairLabel(cur, NODE), branch))
        if nxt == first:
            break
        if not is_node_pairs(nxt, n, m):
            raise CycleError(f"B({format_id(cur)}) = {format_id(nxt)} is not in V_{{{n},{m}}}", branch)
        if nxt in seen:
            raise CycleError(f"B({format_id(cur)}) = {format_id(nxt)} revisits a node after "
                             f"{len(walk)} steps", branch)
        seen.add(nxt)
        cur = nxt
    if len(walk) != total:
        raise CycleError(f"cycle closed after {len(walk)} of {total} nodes", walk[-1][1])
    return walk


def build_cycle(n: int, m: int, sigma: Rotation | None = None,
                skipped: Iterable[PairLabel] = (), start: PairLabel | None = None,
                variant: str = CONSISTENT, budget: int | None = None) -> UpdateCycle:
    skip = frozenset(skipped)
    walk = iterate_successor(n, m, sigma, start, variant, budget)
    order = [lab for lab, _ in walk if lab not in skip]
    if not order:
        raise FractalError("every node is skipped; nothing to update")
    return UpdateCycle(order, skip)


# -- depth-first reference ---------------------------------------------------------

def _child_order(cid: ConsensusId, n: int, sigma: Rotation) -> list[ConsensusId]:
    if cid == ROOT:
        out, j = [], 1
        for _ in range(n):
            j = sigma(j)
            out.append(((j, 0),))
        return out
    a, e = cid[-1][0], _entry(cid)
    out, p = [], e
    while True:
        p = _skip(sigma, p, a)
        out.extend([cid + ((p, 0),), cid + ((p, 1),)])
        if p == e:
            return out


def dfs_blocks(tree: ConsensusTree, sigma: Rotation | None = None) -> list[ConsensusId]:
    """Consensus nodes in depth-first preorder, children in traversal order."""
    sig = _rotation(tree.n, sigma)
    out, stack = [], [ROOT]
    while stack:
        cid = stack.pop()
        out.append(cid)
        kids = _child_order(cid, tree.n, sig) if tree.children[cid] else []
        if set(kids) != set(tree.children[cid]):
            raise FractalError(f"traversal children of {format_id(cid)} disagree with the tree")
        stack.extend(reversed(kids))
    return out


def dfs_reference_order(tree: ConsensusTree, sigma: Rotation | None = None) -> list[PairLabel]:
    """Each consensus node's members as one block, blocks in DFS preorder."""
    order = []
    for cid in dfs_blocks(tree, sigma):
        order.extend(tree.nodes[cid].members)
    return order


def first_visit_order(order: list[PairLabel]) -> list[ConsensusId]:
    seen, out = set(), []
    for lab in order:
        cid = lab.pairs[:-1]
        if cid not in seen:
            seen.add(cid)
            out.append(cid)
    return out


def non_contiguous_subtrees(order: list[PairLabel], tree: ConsensusTree) -> list[ConsensusId]:
    """Consensus nodes whose subtree members do not form one cyclic arc of ``order``."""
    pos = {lab: idx for idx, lab in enumerate(order)}
    size = len(order)
    bad = []
    for cid in tree.nodes:
        idx = sorted(pos[v] for v in tree.subtree_members(cid) if v in pos)
        if len(idx) <= 1:
            continue
        gaps = sum(1 for x, y in zip(idx, idx[1:]) if y - x > 1)
        gaps += 1 if (idx[0] + size - idx[-1]) > 1 else 0
        if gaps > 1:
            bad.append(cid)
    return bad


@dataclass
class PrintedAudit:
    n: int
    m: int
    hamiltonian: bool
    failure: str | None
    branch_uses: dict[str, int]
    branch_disagreements: dict[str, int]
    invalid_targets: dict[str, int]

    def summary(self) -> str:
        status = "closes" if self.hamiltonian else f"fails ({self.failure})"
        diffs = ", ".join(f"{b}:{c}" for b, c in sorted(self.branch_disagreements.items())) or "none"
        return f"printed B on V_{self.n},{self.m}: {status}; branches differing from consistent B: {diffs}"


def audit_printed(n: int, m: int, sigma: Rotation | None = None,
                  budget: int | None = None) -> PrintedAudit:
    """Evaluate the literal case analysis on every node and compare with the closed cycle."""
    check_budget(node_count(n, m), budget, f"audit of V_{{{n},{m}}}")
    sig = _rotation(n, sigma)
    uses: dict[str, int] = {}
    diffs: dict[str, int] = {}
    invalid: dict[str, int] = {}
    for pairs in iter_node_pairs(n, m):
        try:
            got, branch = _next_printed(pairs, n, m, sig)
        except CycleError as exc:
            branch = exc.branch or "?"
            invalid[branch] = invalid.get(branch, 0) + 1
            uses[branch] = uses.get(branch, 0) + 1
            diffs[branch] = diffs.get(branch, 0) + 1
            continue
        uses[branch] = uses.get(branch, 0) + 1
        if not is_node_pairs(got, n, m):
            invalid[branch] = invalid.get(branch, 0) + 1
        if got != _next_consistent(pairs, n, m, sig)[0]:
            diffs[branch] = diffs.get(branch, 0) + 1
    try:
        iterate_successor(n, m, sig, variant=PRINTED, budget=budget)
        ok, failure = True, None
    except CycleError as exc:
        ok, failure = False, str(exc)
    return PrintedAudit(n, m, ok, failure, uses, diffs, invalid)
