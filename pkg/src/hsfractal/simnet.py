"""Monte Carlo simulator of layered PBFT over the consensus tree.

Groups are evaluated at the outcome level: a group of ``g`` populated members
agrees iff at most ``g // 3`` of them failed.  A consensus node is live iff its
group agrees and enough of its populated children are live (see
:func:`hsfractal.analytics.child_tolerance`).  Trials are vectorized in chunks;
chunk ``k`` draws from ``SeedSequence(seed, spawn_key=(k,))`` so results depend
only on the config.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from functools import cached_property

import numpy as np

from ._core import ParameterError, check_params, face_count, node_count
from .analytics import FLOOR_QUORUM, child_tolerance, group_tolerance
from .constree import ROOT, ConsensusId, child_ids, format_id, members_of
from .labeling import PairLabel

FPD = "fpd"
FND = "fnd"
# uniforms held in memory per chunk (trials * population)
_CHUNK_CELLS = 1 << 22
_MAX_CHUNK_TRIALS = 4096


@dataclass(frozen=True)
class FaultModel:
    type: str = FPD
    p: float = 0.0
    f: int = 0

    def __post_init__(self):
        if self.type == FPD:
            if not 0.0 <= self.p <= 1.0:
                raise ParameterError(f"P_f must lie in [0, 1], got {self.p}")
        elif self.type == FND:
            if self.f < 0:
                raise ParameterError(f"faulty count must be >= 0, got {self.f}")
        else:
            raise ParameterError(f"unknown fault model {self.type!r}")

    @classmethod
    def fpd(cls, p: float) -> "FaultModel":
        return cls(FPD, p=float(p))

    @classmethod
    def fnd(cls, f: int) -> "FaultModel":
        return cls(FND, f=int(f))

    def to_json(self) -> dict:
        return {"type": FPD, "p": self.p} if self.type == FPD else {"type": FND, "f": self.f}

    @classmethod
    def from_json(cls, doc: dict) -> "FaultModel":
        kind = str(doc.get("type", FPD)).lower()
        if kind == FPD:
            return cls.fpd(doc.get("p", 0.0))
        if kind == FND:
            return cls.fnd(doc.get("f", 0))
        raise ParameterError(f"unknown fault model {kind!r}")


@dataclass(frozen=True)
class SimConfig:
    n: int
    m: int
    population: int | None = None
    fault_model: FaultModel = field(default_factory=FaultModel)
    seed: int = 0xF5AC7A1
    phase_multiplier: int = 1
    t_ave: float = 1.0
    trials: int = 1
    quorum: str = FLOOR_QUORUM

    def __post_init__(self):
        check_params(self.n, self.m)
        cap = node_count(self.n, self.m)
        if self.population is None:
            object.__setattr__(self, "population", cap)
        if self.population < 1:
            raise ParameterError("population must be positive")
        if self.population > cap:
            raise ParameterError(
                f"population {self.population} exceeds capacity {cap} of N={self.n}, m={self.m}")
        if self.fault_model.type == FND and self.fault_model.f > self.population:
            raise ParameterError("more faulty nodes than population")
        if self.trials < 1:
            raise ParameterError("trials must be >= 1")
        if self.phase_multiplier < 1:
            raise ParameterError("phase_multiplier must be a positive integer")
        if not 0 <= self.seed < 2 ** 64:
            raise ParameterError("seed must be a 64-bit unsigned integer")
        if self.t_ave < 0:
            raise ParameterError("t_ave must be non-negative")
        child_tolerance(2, True, self.quorum)

    def to_json(self) -> dict:
        doc = asdict(self)
        doc["fault_model"] = self.fault_model.to_json()
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "SimConfig":
        known = {"n", "m", "population", "seed", "phase_multiplier", "t_ave", "trials", "quorum"}
        extra = set(doc) - known - {"fault_model"}
        if extra:
            raise ParameterError(f"unknown config keys: {sorted(extra)}")
        if "n" not in doc or "m" not in doc:
            raise ParameterError("config needs 'n' and 'm'")
        kwargs = {k: doc[k] for k in known if k in doc and doc[k] is not None}
        for key in ("n", "m", "population", "seed", "phase_multiplier", "trials"):
            if key in kwargs:
                kwargs[key] = _as_int(kwargs[key], key)
        if "t_ave" in kwargs:
            kwargs["t_ave"] = float(kwargs["t_ave"])
        fm = FaultModel.from_json(doc.get("fault_model") or {})
        return cls(fault_model=fm, **kwargs)

    @classmethod
    def load(cls, path) -> "SimConfig":
        with open(path, encoding="utf-8") as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ParameterError(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(doc, dict):
            raise ParameterError(f"{path}: config must be a JSON object")
        return cls.from_json(doc)


def _as_int(value, key: str) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, str)):
        if isinstance(value, float) and value.is_integer():
            return int(value)
        raise ParameterError(f"{key} must be an integer")
    try:
        return int(value, 0) if isinstance(value, str) else value
    except ValueError:
        raise ParameterError(f"{key} must be an integer") from None


# -- population layout -------------------------------------------------------------

@dataclass
class Layout:
    """Populated consensus groups in breadth-first order."""

    n: int
    groups: list[ConsensusId]
    sizes: np.ndarray
    parent: np.ndarray  # index into groups, -1 for the root
    depth: int

    @cached_property
    def starts(self) -> np.ndarray:
        return np.concatenate(([0], np.cumsum(self.sizes)[:-1])).astype(np.int64)

    @property
    def population(self) -> int:
        return int(self.sizes.sum())

    @cached_property
    def layers(self) -> np.ndarray:
        return np.array([len(g) + 1 for g in self.groups], dtype=np.int64)

    def members(self, index: int) -> tuple[PairLabel, ...]:
        """Populated members of a group: the lowest digits come first."""
        return members_of(self.groups[index], self.n)[: int(self.sizes[index])]

    def node_labels(self) -> list[PairLabel]:
        out: list[PairLabel] = []
        for k in range(len(self.groups)):
            out.extend(self.members(k))
        return out


def populated_layers(n: int, population: int) -> int:
    k = 1
    while population > node_count(n, k):
        k += 1
    return k


def layout(n: int, population: int) -> Layout:
    """Fill layers bottom-up; the top layer's remainder is spread evenly over its groups."""
    depth = populated_layers(n, population)
    groups: list[ConsensusId] = []
    sizes: list[int] = []
    parent: list[int] = []
    if depth == 1:
        return Layout(n, [ROOT], np.array([population]), np.array([-1]), 1)
    frontier = [ROOT]
    groups.append(ROOT)
    sizes.append(n)
    parent.append(-1)
    index = {ROOT: 0}
    for layer in range(2, depth + 1):
        nxt = [c for cid in frontier for c in child_ids(cid, n)]
        if layer < depth:
            counts = [n] * len(nxt)
        else:
            leaves = face_count(n, depth - 1)
            f, extra = divmod(population - node_count(n, depth - 1), leaves)
            counts = [f + ((k + 1) * extra // leaves - k * extra // leaves) for k in range(leaves)]
        for cid, g in zip(nxt, counts):
            if g:
                index[cid] = len(groups)
                groups.append(cid)
                sizes.append(g)
                parent.append(index[cid[:-1]])
        frontier = nxt
    return Layout(n, groups, np.array(sizes, dtype=np.int64), np.array(parent, dtype=np.int64),
                  depth)


class _Evaluator:
    """Vectorized bottom-up liveness for one layout."""

    def __init__(self, lay: Layout, quorum: str):
        self.lay = lay
        self.tol = np.array([group_tolerance(int(g)) for g in lay.sizes], dtype=np.int64)
        self.steps = []
        layers = lay.layers
        for layer in range(lay.depth, 1, -1):
            kids = np.flatnonzero(layers == layer)
            if kids.size == 0:
                continue
            par = lay.parent[kids]
            # children of one parent are contiguous in BFS order
            cut = np.flatnonzero(np.r_[True, par[1:] != par[:-1]])
            parents = par[cut]
            counts = np.diff(np.r_[cut, kids.size])
            ctol = np.array([child_tolerance(int(c), p == 0, quorum)
                             for p, c in zip(parents, counts)], dtype=np.int64)
            self.steps.append((kids[0], kids[-1] + 1, cut, parents, ctol))

    def live(self, failed: np.ndarray) -> np.ndarray:
        """Root liveness per row of a (trials, population) fault mask."""
        lay = self.lay
        bad = np.add.reduceat(failed.astype(np.int32), lay.starts, axis=1)
        alive = bad <= self.tol
        for lo, hi, cut, parents, ctol in self.steps:
            dead = np.add.reduceat((~alive[:, lo:hi]).astype(np.int32), cut, axis=1)
            alive[:, parents] &= dead <= ctol
        return alive[:, 0]


# -- running -------------------------------------------------------------------------

@dataclass
class SimReport:
    messages_total: int
    messages_intra: int
    messages_inter: int
    rounds: int
    consensus_reached: np.ndarray
    failure_rate_estimate: float
    standard_error: float
    simulated_delay: float
    config: SimConfig | None = None

    @property
    def trials(self) -> int:
        return int(self.consensus_reached.size)

    @property
    def failures(self) -> int:
        return int(self.trials - np.count_nonzero(self.consensus_reached))

    def to_json(self) -> dict:
        doc = {
            "messages_total": self.messages_total,
            "messages_intra": self.messages_intra,
            "messages_inter": self.messages_inter,
            "rounds": self.rounds,
            "trials": self.trials,
            "failures": self.failures,
            "failure_rate_estimate": self.failure_rate_estimate,
            "standard_error": self.standard_error,
            "simulated_delay": self.simulated_delay,
            # one bit per trial, MSB first
            "consensus_reached_bits": np.packbits(self.consensus_reached).tobytes().hex(),
        }
        if self.config is not None:
            doc["config"] = self.config.to_json()
        return doc

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, indent=2) + "\n"

    CSV_COLUMNS = ("n", "m", "population", "fault", "trials", "failures",
                   "failure_rate_estimate", "standard_error", "messages_total",
                   "messages_intra", "messages_inter", "rounds", "simulated_delay")

    def csv_row(self) -> dict:
        cfg = self.config
        fault = ""
        if cfg is not None:
            fm = cfg.fault_model
            fault = f"fpd:{fm.p!r}" if fm.type == FPD else f"fnd:{fm.f}"
        return {
            "n": cfg.n if cfg else "", "m": cfg.m if cfg else "",
            "population": cfg.population if cfg else "", "fault": fault,
            "trials": self.trials, "failures": self.failures,
            "failure_rate_estimate": repr(self.failure_rate_estimate),
            "standard_error": repr(self.standard_error),
            "messages_total": self.messages_total, "messages_intra": self.messages_intra,
            "messages_inter": self.messages_inter, "rounds": self.rounds,
            "simulated_delay": repr(self.simulated_delay),
        }


def message_counts(lay: Layout, phase_multiplier: int = 1) -> tuple[int, int]:
    """(intra, inter) for one fault-free pass: g^2 per group round, one relay per node."""
    intra = sum(int(g) * int(g) for g in lay.sizes) * phase_multiplier
    return intra, lay.population


def chunk_trials(population: int) -> int:
    return max(1, min(_MAX_CHUNK_TRIALS, _CHUNK_CELLS // population))


def _rng(seed: int, chunk: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(chunk,))))


def _chunks(trials: int, population: int):
    size = chunk_trials(population)
    for k, lo in enumerate(range(0, trials, size)):
        yield k, min(size, trials - lo)


def _fail_smallest(u: np.ndarray, f: int) -> np.ndarray:
    failed = np.zeros(u.shape, dtype=bool)
    if f >= u.shape[1]:
        failed[:] = True
    elif f > 0:
        idx = np.argpartition(u, f - 1, axis=1)[:, :f]
        np.put_along_axis(failed, idx, True, axis=1)
    return failed


def _fault_mask(u: np.ndarray, model: FaultModel) -> np.ndarray:
    if model.type == FPD:
        return u < model.p
    return _fail_smallest(u, model.f)


def _estimate(reached: np.ndarray) -> tuple[float, float]:
    t = reached.size
    rate = float(t - np.count_nonzero(reached)) / t
    return rate, math.sqrt(rate * (1.0 - rate) / t)


def run(config: SimConfig) -> SimReport:
    lay = layout(config.n, config.population)
    ev = _Evaluator(lay, config.quorum)
    reached = np.empty(config.trials, dtype=bool)
    pos = 0
    for k, size in _chunks(config.trials, lay.population):
        u = _rng(config.seed, k).random((size, lay.population))
        reached[pos:pos + size] = ev.live(_fault_mask(u, config.fault_model))
        pos += size
    intra, inter = message_counts(lay, config.phase_multiplier)
    rate, se = _estimate(reached)
    return SimReport(
        messages_total=intra + inter,
        messages_intra=intra,
        messages_inter=inter,
        rounds=lay.depth,
        consensus_reached=reached,
        failure_rate_estimate=rate,
        standard_error=se,
        simulated_delay=lay.depth * config.t_ave,
        config=config,
    )


def evaluate_faults(n: int, population: int, failed: set[PairLabel] | np.ndarray,
                    quorum: str = FLOOR_QUORUM) -> bool:
    """Deterministic single-trial outcome for an explicit set of failed nodes."""
    lay = layout(n, population)
    if isinstance(failed, np.ndarray):
        mask = np.asarray(failed, dtype=bool).reshape(1, -1)
    else:
        labels = lay.node_labels()
        unknown = set(failed) - set(labels)
        if unknown:
            raise ParameterError(f"not populated: {sorted(map(str, unknown))[:3]}")
        mask = np.array([[lab in failed for lab in labels]])
    if mask.shape[1] != lay.population:
        raise ParameterError("fault mask length differs from the population")
    return bool(_Evaluator(lay, quorum).live(mask)[0])


def leaders(n: int, population: int, failed: set[PairLabel] = frozenset()) -> dict[str, str | None]:
    """Per group: the lowest-label live member, or None if all members failed."""
    lay = layout(n, population)
    out = {}
    for k, cid in enumerate(lay.groups):
        alive = [v for v in lay.members(k) if v not in failed]
        out[format_id(cid)] = str(min(alive)) if alive else None
    return out


@dataclass(frozen=True)
class FaultComparison:
    fpd_estimate: float
    fpd_se: float
    fnd_estimate: float
    fnd_se: float
    faulty: int

    @property
    def divergence(self) -> float:
        return abs(self.fpd_estimate - self.fnd_estimate)


def compare_fpd_fnd(n: int, m: int, population: int | None, matched_rate: float,
                    trials: int, seed: int = 0xF5AC7A1,
                    quorum: str = FLOOR_QUORUM) -> FaultComparison:
    """FPD at ``P_f = rate`` vs FND with ``round(rate * V)`` faults, on common random numbers."""
    if not 0.0 <= matched_rate <= 1.0:
        raise ParameterError("matched_rate must lie in [0, 1]")
    cfg = SimConfig(n, m, population, FaultModel.fpd(matched_rate), seed, trials=trials,
                    quorum=quorum)
    lay = layout(n, cfg.population)
    ev = _Evaluator(lay, quorum)
    f = round(matched_rate * lay.population)
    fpd = np.empty(trials, dtype=bool)
    fnd = np.empty(trials, dtype=bool)
    pos = 0
    for k, size in _chunks(trials, lay.population):
        u = _rng(seed, k).random((size, lay.population))
        fpd[pos:pos + size] = ev.live(u < matched_rate)
        fnd[pos:pos + size] = ev.live(_fail_smallest(u, f))
        pos += size
    (a, sa), (b, sb) = _estimate(fpd), _estimate(fnd)
    return FaultComparison(a, sa, b, sb, f)


def measure_delay(config: SimConfig) -> float:
    return populated_layers(config.n, config.population) * config.t_ave
