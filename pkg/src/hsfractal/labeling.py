"""Subscript-pair labels and the fixed-width tier locator.

A node or face is identified by its generation lineage, a sequence of
``(digit, bit)`` pairs.  Face labels are the members of ``Label_{N,t}``:

* the first pair is ``(i, 0)``;
* every later pair is ``(j, s)`` with ``s in {0, 1}``;
* consecutive first digits differ.

A node label is either a tier-1 pair ``(i, 0)`` or a face label followed by
``(i, 0)`` for any ``i`` (so ``(1,0),(1,0)`` is the apex node of face
``(1,0)``).  Second digits follow the normalized convention: ``0`` marks the
inner corner face of a subdivision, ``1`` the outer one (through the apex).
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator, Sequence

from ._core import FractalError, check_budget, check_params, face_count, node_count

Pair = tuple[int, int]

NODE = "node"
FACE = "face"


class LabelError(FractalError):
    pass


class LocatorError(FractalError):
    pass


@dataclass(frozen=True, order=True)
class PairLabel:
    """Immutable label; ``kind`` is ``"node"`` or ``"face"``."""

    pairs: tuple[Pair, ...]
    kind: str = NODE

    def __post_init__(self):
        if not self.pairs:
            raise LabelError("a label needs at least one subscript pair")
        if self.kind not in (NODE, FACE):
            raise LabelError(f"unknown label kind {self.kind!r}")

    @classmethod
    def node(cls, *pairs: Pair) -> "PairLabel":
        return cls(tuple(tuple(p) for p in pairs), NODE)

    @classmethod
    def face(cls, *pairs: Pair) -> "PairLabel":
        return cls(tuple(tuple(p) for p in pairs), FACE)

    @property
    def tier(self) -> int:
        return len(self.pairs)

    @property
    def last_digit(self) -> int:
        return self.pairs[-1][0]

    @property
    def prefix(self) -> tuple[Pair, ...]:
        return self.pairs[:-1]

    def child(self, digit: int, bit: int = 0, kind: str = NODE) -> "PairLabel":
        return PairLabel(self.pairs + ((digit, bit),), kind)

    def as_kind(self, kind: str) -> "PairLabel":
        return self if kind == self.kind else PairLabel(self.pairs, kind)

    def __str__(self) -> str:
        return format_pairs(self.pairs)

    def to_json(self) -> dict:
        return {"kind": self.kind, "pairs": [list(p) for p in self.pairs]}

    @classmethod
    def from_json(cls, doc: dict) -> "PairLabel":
        try:
            pairs = tuple((int(a), int(b)) for a, b in doc["pairs"])
            return cls(pairs, doc.get("kind", NODE))
        except (KeyError, TypeError, ValueError) as exc:
            raise LabelError(f"malformed label document {doc!r}") from exc

    @classmethod
    def parse(cls, text: str, kind: str = NODE) -> "PairLabel":
        return cls(parse_pairs(text), kind)


_PAIR_RE = re.compile(r"\(\s*(\d+)\s*,\s*(\d+)\s*\)")


def format_pairs(pairs: Sequence[Pair]) -> str:
    return ",".join(f"({a},{b})" for a, b in pairs)


def parse_pairs(text: str) -> tuple[Pair, ...]:
    """Parse ``"(1,0),(2,1),(3,0)"`` (``v_{...}`` / ``e_{...}`` wrappers allowed)."""
    body = text.strip()
    m = re.fullmatch(r"[ve]_?\{(.*)\}", body)
    if m:
        body = m.group(1)
    pairs = [(int(a), int(b)) for a, b in _PAIR_RE.findall(body)]
    residue = _PAIR_RE.sub("", body).replace(",", "").strip()
    if not pairs or residue:
        raise LabelError(f"cannot parse label {text!r}")
    return tuple(pairs)


# -- validity predicates ------------------------------------------------------

def is_face_pairs(pairs: Sequence[Pair], n: int, max_len: int | None = None) -> bool:
    """Membership in the union of ``Label_{N,t}`` for ``1 <= t <= max_len``."""
    if not pairs or (max_len is not None and len(pairs) > max_len):
        return False
    prev = None
    for idx, (digit, bit) in enumerate(pairs):
        if not 1 <= digit <= n or bit not in (0, 1):
            return False
        if idx == 0 and bit != 0:
            return False
        if digit == prev:
            return False
        prev = digit
    return True


def is_node_pairs(pairs: Sequence[Pair], n: int, m: int | None = None) -> bool:
    if not pairs or (m is not None and len(pairs) > m):
        return False
    digit, bit = pairs[-1]
    if bit != 0 or not 1 <= digit <= n:
        return False
    return len(pairs) == 1 or is_face_pairs(pairs[:-1], n)


def validate_node(label: PairLabel, n: int, m: int) -> None:
    if label.kind != NODE:
        raise LabelError(f"{label} is a face label; only nodes are addressable")
    if not is_node_pairs(label.pairs, n, m):
        raise LabelError(f"{label} is not a node of V_{{{n},{m}}}")


def generation_tier(label: PairLabel) -> int:
    return len(label.pairs)


# -- enumeration ---------------------------------------------------------------

def iter_face_pairs(n: int, t: int) -> Iterator[tuple[Pair, ...]]:
    """All members of ``Label_{N,t}`` in lexicographic order."""
    if t == 1:
        for i in range(1, n + 1):
            yield ((i, 0),)
        return
    for head in iter_face_pairs(n, t - 1):
        last = head[-1][0]
        for j in range(1, n + 1):
            if j == last:
                continue
            for s in (0, 1):
                yield head + ((j, s),)


def enumerate_face_labels(n: int, m: int, budget: int | None = None) -> list[PairLabel]:
    check_params(n, m)
    check_budget(face_count(n, m), budget, f"Label_{{{n},{m}}}")
    return [PairLabel(p, FACE) for p in iter_face_pairs(n, m)]


def iter_node_pairs(n: int, m: int) -> Iterator[tuple[Pair, ...]]:
    for i in range(1, n + 1):
        yield ((i, 0),)
    for t in range(1, m):
        for head in iter_face_pairs(n, t):
            for i in range(1, n + 1):
                yield head + ((i, 0),)


def enumerate_node_labels(n: int, m: int, budget: int | None = None) -> list[PairLabel]:
    """Nodes of ``V_{N,m}`` ordered by generation tier, then lexicographically."""
    check_params(n, m)
    check_budget(node_count(n, m), budget, f"V_{{{n},{m}}}")
    return [PairLabel(p, NODE) for p in iter_node_pairs(n, m)]


# -- tier locator --------------------------------------------------------------

def digit_width(n: int) -> int:
    """ceil(log2 N) for N >= 2."""
    return (n - 1).bit_length()


def locator_bit_length(n: int, m: int) -> int:
    check_params(n, m)
    return (m + 1) * digit_width(n) + m


@dataclass(frozen=True)
class TierLocator:
    """Fixed-width address of a node: header ``N-1`` then ``m`` pair fields."""

    bits: str
    n: int
    m: int

    def __post_init__(self):
        if set(self.bits) - {"0", "1"}:
            raise LocatorError("locator bits must be 0/1 characters")
        if len(self.bits) != locator_bit_length(self.n, self.m):
            raise LocatorError(
                f"width {len(self.bits)} does not match N={self.n}, m={self.m}")

    @property
    def fields(self) -> list[str]:
        w = digit_width(self.n)
        out = [self.bits[:w]]
        for k in range(self.m):
            start = w + k * (w + 1)
            out.append(self.bits[start:start + w + 1])
        return out

    def __str__(self) -> str:
        return ":".join(self.fields)

    def to_bytes(self) -> bytes:
        """MSB-first packing, zero-padded to a whole byte."""
        nbytes = (len(self.bits) + 7) // 8
        return int(self.bits.ljust(nbytes * 8, "0"), 2).to_bytes(nbytes, "big")

    @classmethod
    def from_bytes(cls, data: bytes, n: int, m: int) -> "TierLocator":
        nbits = locator_bit_length(n, m)
        if nbits > 8 * len(data):
            raise LocatorError(f"{len(data)} bytes cannot hold a {nbits}-bit locator")
        raw = bin(int.from_bytes(data, "big"))[2:].zfill(8 * len(data))[:nbits]
        w = digit_width(n)
        fields = [raw[w + k * (w + 1): w + (k + 1) * (w + 1)] for k in range(m)]
        return cls.parse(":".join([raw[:w], *fields]))

    @classmethod
    def parse(cls, text: str) -> "TierLocator":
        n, m, _ = decode_locator(text)
        return cls(text.replace(":", "").strip(), n, m)

    def decode(self) -> tuple[int, int, PairLabel]:
        return decode_locator(self)


def encode_locator(label: PairLabel, n: int, m: int) -> TierLocator:
    check_params(n, m)
    validate_node(label, n, m)
    w = digit_width(n)
    parts = [format(n - 1, f"0{w}b")]
    for digit, bit in label.pairs:
        parts.append(format(digit - 1, f"0{w}b") + str(bit))
    parts.extend("1" * (w + 1) for _ in range(m - len(label.pairs)))
    return TierLocator("".join(parts), n, m)


def _shapes(text: str) -> list[tuple[int, int, list[str]]]:
    """Candidate ``(N, m, fields)`` splits of a locator string."""
    text = text.strip()
    if not text or set(text) - {"0", "1", ":"}:
        raise LocatorError(f"malformed locator {text!r}")
    if ":" in text:
        header, *fields = text.split(":")
        w = len(header)
        n = int(header, 2) + 1 if header else 0
        if w < 2 or digit_width(n) != w:
            raise LocatorError(f"header {header!r} does not encode a valid N")
        if not fields or any(len(f) != w + 1 for f in fields):
            raise LocatorError(f"pair fields of {text!r} must be {w + 1} bits wide")
        return [(n, len(fields), fields)]
    # width scan: header value + 1 = N must satisfy ceil(log2 N) = w
    length = len(text)
    found = []
    for w in range(2, (length - 1) // 2 + 1):
        n = int(text[:w], 2) + 1
        if digit_width(n) != w or (length - w) % (w + 1):
            continue
        m = (length - w) // (w + 1)
        found.append((n, m, [text[w + k * (w + 1): w + (k + 1) * (w + 1)] for k in range(m)]))
    if not found:
        raise LocatorError(f"no (N, m) is consistent with {length}-bit locator {text}")
    return found


def _decode_fields(n: int, m: int, fields: list[str], text: str) -> PairLabel:
    tier = 0
    for idx, f in enumerate(fields, start=1):
        if "0" in f:
            tier = idx
    if tier == 0:
        raise LocatorError(f"locator {text} has no zero bit: no generation tier")
    pairs = []
    for f in fields[:tier]:
        digit = int(f[:-1], 2) + 1
        if digit > n:
            raise LocatorError(f"field {f} encodes digit {digit} > N={n}")
        pairs.append((digit, int(f[-1])))
    if not is_node_pairs(pairs, n, m):
        raise LocatorError(f"locator {text} decodes to an invalid node label {format_pairs(pairs)}")
    return PairLabel(tuple(pairs), NODE)


def decode_locator(bits: "str | TierLocator") -> tuple[int, int, PairLabel]:
    """Return ``(N, m, label)``; the tier is the last field containing a zero.

    Colon-free input is split by scanning header widths; when more than one
    width fits, only splits that decode to a valid node survive, and any
    remaining ambiguity is an error.
    """
    text = str(bits)
    decoded, errors = [], []
    for n, m, fields in _shapes(text):
        try:
            decoded.append((n, m, _decode_fields(n, m, fields, text)))
        except LocatorError as exc:
            errors.append(exc)
    if len(decoded) == 1:
        return decoded[0]
    if decoded:
        shapes = [(n, m) for n, m, _ in decoded]
        raise LocatorError(f"ambiguous locator {text}: valid for (N, m) in {shapes}")
    raise errors[0]


# -- routing -------------------------------------------------------------------

def route(a: "TierLocator | str", b: "TierLocator | str") -> list[PairLabel]:
    """Label path from ``a`` to ``b`` through their lowest common consensus node.

    Consensus node ``P,(j,s)`` hangs off member ``v_{P,(j,0)}`` of its parent
    ``P``; the path climbs those attachment members up to the common ancestor
    and descends the same way to ``b``.
    """
    na, ma, la = decode_locator(a)
    nb, mb, lb = decode_locator(b)
    if (na, ma) != (nb, mb):
        raise LocatorError(f"locators belong to different networks: V_{na},{ma} vs V_{nb},{mb}")
    if la == lb:
        return [la]
    ca, cb = la.prefix, lb.prefix
    common = 0
    while common < min(len(ca), len(cb)) and ca[common] == cb[common]:
        common += 1
    up = [PairLabel(ca[:d] + ((ca[d][0], 0),)) for d in range(len(ca) - 1, common - 1, -1)]
    down = [PairLabel(cb[:d] + ((cb[d][0], 0),)) for d in range(common, len(cb))]
    path: list[PairLabel] = []
    for hop in [la, *up, *down, lb]:
        if not path or path[-1] != hop:
            path.append(hop)
    return path
