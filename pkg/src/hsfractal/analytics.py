"""Closed-form cost and reliability models for the fractal consensus network."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, NamedTuple

from ._core import ParameterError, check_params, face_count, node_count

FLOOR_QUORUM = "floor"
STRICT_QUORUM = "strict"


@dataclass(frozen=True)
class ComplexityReport:
    total: int
    intra_layer: int
    inter_layer: int
    tier_m: int
    fill_ratio_r: Fraction | None = None
    # top layer weighted by the unswapped interpolation; None for filled networks
    literal_total: int | None = None

    @property
    def literal_deviation(self) -> int | None:
        return None if self.literal_total is None else self.literal_total - self.total


class FillPlan(NamedTuple):
    m: int
    r: Fraction | None

    @property
    def degenerate(self) -> bool:
        return self.r is None


class DelayEstimate(NamedTuple):
    exact: float
    approx: float
    layers: int


def complexity_filled(n: int, m: int) -> ComplexityReport:
    v = node_count(n, m)
    return ComplexityReport(total=(n + 1) * v, intra_layer=n * v, inter_layer=v, tier_m=m)


def fill_plan(n: int, v: int, filled: bool = False) -> FillPlan:
    """Least ``m`` with ``V < |V_{N,m}|`` and the top-layer occupancy ``r``.

    With ``filled=True`` the inequality is ``<=``, so a population equal to a
    filled network keeps that network's ``m`` (and ``r == N``).
    """
    if n < 3:
        raise ParameterError(f"N must be >= 3, got {n}")
    if v < 1:
        raise ParameterError(f"population must be positive, got {v}")
    if v <= n:
        return FillPlan(1, None)
    m = 2
    while not (v <= node_count(n, m) if filled else v < node_count(n, m)):
        m += 1
    r = Fraction(v - node_count(n, m - 1), face_count(n, m - 1))
    return FillPlan(m, r)


def populated_depth(n: int, v: int) -> int:
    """Number of consensus layers holding at least one node."""
    plan = fill_plan(n, v)
    if plan.degenerate:
        return 1
    return plan.m if plan.r > 0 else plan.m - 1


def _top_layer_terms(leaves: int, remainder: int) -> tuple[int, int]:
    """(corrected, literal) intra-layer cost of ``remainder`` nodes over ``leaves`` groups."""
    f, extra = divmod(remainder, leaves)
    # `extra` groups hold f+1 nodes and the rest hold f
    corrected = f * f * (leaves - extra) + (f + 1) ** 2 * extra
    literal = f * f * extra + (f + 1) ** 2 * (leaves - extra)
    return corrected, literal


def complexity_partial(n: int, v: int) -> ComplexityReport:
    """Cost of a partially filled network; ``total`` uses the size-weighted top layer.

    ``literal_total`` keeps the literal weighting ``f^2 (r - f) + (f+1)^2 (f+1-r)``.
    """
    plan = fill_plan(n, v)
    if plan.degenerate:
        return ComplexityReport(total=v * v + v, intra_layer=v * v, inter_layer=v, tier_m=1,
                                literal_total=v * v + v)
    m, r = plan
    lower = node_count(n, m - 1)
    leaves = face_count(n, m - 1)
    corrected, literal = _top_layer_terms(leaves, v - lower)
    intra_lower = n * lower
    return ComplexityReport(
        total=intra_lower + corrected + v,
        intra_layer=intra_lower + corrected,
        inter_layer=v,
        tier_m=m,
        fill_ratio_r=r,
        literal_total=intra_lower + literal + v,
    )


def approx_complexity(n: int, v: float) -> float:
    """``V ** (1 + log2(2N) / log2(V))``, algebraically ``2 N V``."""
    if v <= 1:
        raise ParameterError("approximation needs V > 1")
    value = v ** (1.0 + math.log2(2 * n) / math.log2(v))
    if not math.isclose(value, 2.0 * n * v, rel_tol=1e-9):
        raise ArithmeticError(f"identity C = 2NV violated: {value} vs {2 * n * v}")
    return value


def approx_delay(n: int, v: int, t_ave: float) -> DelayEstimate:
    depth = populated_depth(n, v)
    return DelayEstimate(exact=depth * t_ave,
                         approx=math.log2(v) / math.log2(2 * n) * t_ave,
                         layers=depth)


# -- reliability -------------------------------------------------------------------

def _binom_cdf(k: int, trials: int, p):
    """P[X <= k] for X ~ Bin(trials, p); exact for Fraction input."""
    if k < 0:
        return 0 * p
    if k >= trials:
        return 1 + 0 * p
    if isinstance(p, Fraction):
        return sum(math.comb(trials, i) * (1 - p) ** (trials - i) * p ** i for i in range(k + 1))
    if p <= 0.0:
        return 1.0
    if p >= 1.0:
        return 0.0
    if trials <= 128:
        return math.fsum(math.comb(trials, i) * (1 - p) ** (trials - i) * p ** i
                         for i in range(k + 1))
    lp, lq = math.log(p), math.log1p(-p)
    logs = [math.lgamma(trials + 1) - math.lgamma(i + 1) - math.lgamma(trials - i + 1)
            + (trials - i) * lq + i * lp for i in range(k + 1)]
    top = max(logs)
    return min(1.0, math.exp(top) * math.fsum(math.exp(x - top) for x in logs))


def group_tolerance(size: int) -> int:
    return size // 3


def child_tolerance(children: int, root: bool, quorum: str = FLOOR_QUORUM) -> int:
    """Largest number of failed children a consensus node survives.

    Non-root nodes need strictly fewer than half failed.  At the root the
    ``floor`` quorum admits up to ``floor(c/2)`` failures;
    ``strict`` applies the strict-majority rule there too.
    """
    if quorum not in (FLOOR_QUORUM, STRICT_QUORUM):
        raise ParameterError(f"unknown quorum rule {quorum!r}")
    if root and quorum == FLOOR_QUORUM:
        return children // 2
    return (children - 1) // 2


@dataclass(frozen=True)
class ReliabilityInput:
    n: int
    m: int
    p_f: float

    def __post_init__(self):
        check_params(self.n, self.m)
        if not 0 <= self.p_f <= 1:
            raise ParameterError(f"P_f must lie in [0, 1], got {self.p_f}")


def layer_failure_probabilities(inp: ReliabilityInput, quorum: str = FLOOR_QUORUM) -> list:
    """``[P_1, ..., P_m]``: failure probability of a consensus node per layer (P_1 is the root)."""
    n, m, p = inp.n, inp.m, inp.p_f
    one = 1 + 0 * p
    p_group = one - _binom_cdf(group_tolerance(n), n, p)
    probs = [p_group] * m
    for k in range(m - 1, 1, -1):
        survive = _binom_cdf(child_tolerance(2 * n - 2, False, quorum), 2 * n - 2, probs[k])
        probs[k - 1] = one - survive * (one - p_group)
    if m >= 2:
        survive = _binom_cdf(child_tolerance(n, True, quorum), n, probs[1])
        probs[0] = one - survive * (one - p_group)
    return probs


def analytic_failure(inp: ReliabilityInput, quorum: str = FLOOR_QUORUM):
    """Probability that the root consensus node fails (consensus is not reached)."""
    return layer_failure_probabilities(inp, quorum)[0]


def expanded_recursion_step(survive, p_leaf):
    """Unsimplified form ``1 - S + P_m - P_m (1 - S)``; equals ``1 - S (1 - P_m)``."""
    return 1 - survive + p_leaf - p_leaf * (1 - survive)


# -- sweeps --------------------------------------------------------------------------

def parse_sweep(text: str) -> tuple[float, float, int]:
    try:
        lo, hi, steps = text.split(":")
        lo_f, hi_f, k = float(lo), float(hi), int(steps)
    except ValueError:
        raise ParameterError(f"sweep must look like vmin:vmax:steps, got {text!r}") from None
    if not (0 < lo_f <= hi_f) or k < 1:
        raise ParameterError(f"bad sweep bounds {text!r}")
    return lo_f, hi_f, k


def geometric_points(lo: float, hi: float, steps: int) -> list[int]:
    """Strictly increasing integers spread geometrically over ``[lo, hi]``."""
    if steps == 1:
        return [round(lo)]
    ratio = (hi / lo) ** (1.0 / (steps - 1))
    return sorted({round(lo * ratio ** k) for k in range(steps)})


SWEEP_COLUMNS = ["V", "m", "r", "C_corrected", "C_literal", "C_2NV", "C_approx",
                 "D_exact", "D_approx"]


def complexity_sweep(n: int, points: Iterable[int], t_ave: float = 1.0) -> list[dict]:
    rows = []
    for v in points:
        if v <= 1:
            continue
        rep = complexity_partial(n, v)
        delay = approx_delay(n, v, t_ave)
        rows.append({
            "V": v,
            "m": rep.tier_m,
            "r": "" if rep.fill_ratio_r is None else float(rep.fill_ratio_r),
            "C_corrected": rep.total,
            "C_literal": rep.literal_total,
            "C_2NV": 2 * n * v,
            "C_approx": approx_complexity(n, v),
            "D_exact": delay.exact,
            "D_approx": delay.approx,
        })
    return rows


def reliability_curve(n: int, m: int, pfs: Iterable[float],
                      quorum: str = FLOOR_QUORUM) -> list[dict]:
    return [{"P_f": pf, "P_fail": analytic_failure(ReliabilityInput(n, m, pf), quorum)}
            for pf in pfs]


def rows_to_csv(rows: list[dict], columns: list[str] | None = None) -> str:
    buf = io.StringIO()
    cols = columns or (list(rows[0]) if rows else [])
    writer = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()
