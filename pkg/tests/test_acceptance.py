"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the lines inline; they
are also repeated in the terminal summary.
"""
import itertools
import json
import math
import random
import subprocess
import sys
import time

import pytest

from hsfractal import analytics as an
from hsfractal import constree, labeling, ordering, rebalance, simnet, topology
from hsfractal._core import node_count
from hsfractal.labeling import PairLabel

VERDICTS = {}


def verdict(num, ok, detail, started):
    line = f"criterion {num}: {'PASS' if ok else 'FAIL'} ({time.perf_counter() - started:.1f}s) {detail}"
    VERDICTS[num] = line
    print("\n" + line)
    assert ok, line


def recurrence(n, m):
    v, f = n, n
    for _ in range(m - 1):
        v, f = v + n * f, 2 * (n - 1) * f
    return v, f


# -- 1 ------------------------------------------------------------------------------

def test_criterion_1_counts():
    t0 = time.perf_counter()
    bad = []
    for n, m in itertools.product(range(3, 11), range(1, 7)):
        if (topology.count_nodes(n, m), topology.count_faces(n, m)) != recurrence(n, m):
            bad.append(("formula", n, m))
    for n, m in itertools.product(range(3, 7), range(1, 4)):
        mesh = topology.construct(n, m)
        v, f = recurrence(n, m)
        sizes = (len(mesh.vertices), len(mesh.faces),
                 len(labeling.enumerate_node_labels(n, m)), len(labeling.enumerate_face_labels(n, m)))
        if sizes != (v, f, v, f):
            bad.append(("enumeration", n, m, sizes))
    ok = not bad and time.perf_counter() - t0 < 10
    verdict(1, ok, f"48 formula cases, 12 enumeration cases; mismatches={bad[:3]}", t0)


# -- 2 ------------------------------------------------------------------------------

GOLDEN = [
    ("(2,0)", 3, 3, "10:010:111:111"),
    ("(1,0),(2,1),(3,0)", 3, 3, "10:000:011:100"),
    ("(1,0),(2,1),(3,0)", 4, 4, "11:000:011:100:111"),
]


def test_criterion_2_locators():
    t0 = time.perf_counter()
    bad = []
    for text, n, m, bits in GOLDEN:
        label = PairLabel.parse(text)
        if str(labeling.encode_locator(label, n, m)) != bits:
            bad.append(("encode", bits))
        if labeling.decode_locator(bits) != (n, m, label):
            bad.append(("decode", bits))
    checked = 0
    for n, m in [(3, 3), (4, 3), (5, 2)]:
        for label in labeling.enumerate_node_labels(n, m):
            loc = labeling.encode_locator(label, n, m)
            raw = str(loc).replace(":", "")
            if (labeling.decode_locator(str(loc)) != (n, m, label)
                    or labeling.TierLocator(raw, n, m).decode() != (n, m, label)
                    or len(raw) != labeling.locator_bit_length(n, m)):
                bad.append(("round-trip", n, m, str(label)))
            checked += 1
    ok = not bad and time.perf_counter() - t0 < 5
    verdict(2, ok, f"3 golden locators, {checked} round trips; failures={bad[:3]}", t0)


# -- 3 ------------------------------------------------------------------------------

def test_criterion_3_update_cycle():
    t0 = time.perf_counter()
    bad = []
    cases = 0
    for n, m in itertools.product(range(3, 7), range(2, 5)):
        if node_count(n, m) > 10 ** 5:
            continue
        cases += 1
        tree = constree.build(n, m)
        try:
            cycle = ordering.build_cycle(n, m, budget=10 ** 5)
        except ordering.CycleError as exc:
            bad.append(f"V_{n},{m} branch {exc.branch}: {exc}")
            continue
        if len(cycle.order) != node_count(n, m) or len(set(cycle.order)) != len(cycle.order):
            bad.append(f"V_{n},{m} not a permutation")
        split = ordering.non_contiguous_subtrees(cycle.order, tree)
        if split:
            bad.append(f"V_{n},{m} split subtrees {[constree.format_id(c) for c in split[:2]]}")
        if ordering.first_visit_order(cycle.order) != ordering.dfs_blocks(tree):
            bad.append(f"V_{n},{m} differs from the depth-first order")
    ok = not bad and time.perf_counter() - t0 < 60
    verdict(3, ok, f"{cases} networks closed; violations={bad[:3]}", t0)


# -- 4 ------------------------------------------------------------------------------

def test_criterion_4_complexity():
    t0 = time.perf_counter()
    rng = random.Random(4)
    bad = []
    partial = 0
    worst_literal = 0
    for n, m in itertools.product(range(3, 9), range(1, 5)):
        full = simnet.run(simnet.SimConfig(n, m))
        if full.messages_total != an.complexity_filled(n, m).total:
            bad.append(("filled", n, m))
        lo = node_count(n, m - 1) + 1 if m > 1 else 1
        hi = node_count(n, m) - 1
        if hi < lo:
            continue
        for v in (rng.randint(lo, hi) for _ in range(20)):
            rep = an.complexity_partial(n, v)
            sim = simnet.run(simnet.SimConfig(n, m, v))
            if sim.messages_total != rep.total:
                bad.append(("partial", n, v, sim.messages_total, rep.total))
            if rep.literal_total - rep.total != rep.literal_deviation:
                bad.append(("deviation", n, v))
            worst_literal = max(worst_literal, abs(rep.literal_deviation))
            partial += 1
    ok = not bad and time.perf_counter() - t0 < 30
    verdict(4, ok, f"32 filled, {partial} partial populations; largest literal deviation "
                   f"{worst_literal} messages; mismatches={bad[:3]}", t0)


# -- 5 ------------------------------------------------------------------------------

def test_criterion_5_scaling_shape():
    t0 = time.perf_counter()
    factor_bad, identity_bad, delay_bad, layer_ok = [], [], [], True
    points = an.geometric_points(1e2, 1e6, 60)
    for n in (8, 24, 48, 96):
        for m in range(1, 8):
            v = node_count(n, m)
            if 1e2 <= v <= 1e6:
                ratio = simnet.run(simnet.SimConfig(n, m)).messages_total / (2 * n * v)
                if not 1 / 1.02 <= ratio <= 1.02:
                    factor_bad.append((n, m, round(ratio, 4)))
        for row in an.complexity_sweep(n, points):
            if abs(row["C_approx"] - row["C_2NV"]) > 1e-12 * row["C_2NV"]:
                identity_bad.append((n, row["V"]))
            gap = row["D_exact"] - row["D_approx"]
            if abs(gap) > 1.0:
                delay_bad.append((n, row["V"], round(gap, 3)))
            layer_ok &= 0 <= row["D_exact"] - math.ceil(row["D_approx"]) <= 1
    ok = not (factor_bad or identity_bad or delay_bad) and time.perf_counter() - t0 < 10
    verdict(5, ok, f"C/2NV outside 1.02: {len(factor_bad)} {factor_bad[:3]}; "
                   f"identity misses: {len(identity_bad)}; delay gaps over 1 layer: "
                   f"{len(delay_bad)} {delay_bad[:2]}; integer layer counts within 1: {layer_ok}", t0)


# -- 6 ------------------------------------------------------------------------------

def test_criterion_6_reliability():
    t0 = time.perf_counter()
    trials = 10 ** 5
    bad = []
    worst = 0.0
    for k, (n, m, pf) in enumerate(itertools.product((4, 7, 10), (2, 3), (0.01, 0.05, 0.1, 0.2))):
        exact = an.analytic_failure(an.ReliabilityInput(n, m, pf))
        rep = simnet.run(simnet.SimConfig(n, m, fault_model=simnet.FaultModel.fpd(pf),
                                          seed=6000 + k, trials=trials))
        se = max(math.sqrt(exact * (1 - exact) / trials), rep.standard_error)
        diff = abs(rep.failure_rate_estimate - exact)
        z = diff / se if se else (0.0 if diff == 0 else math.inf)
        worst = max(worst, z)
        if not z <= 3:
            bad.append((n, m, pf, rep.failure_rate_estimate, exact))
    for n, m, pf in itertools.product((4, 7, 10), (2, 3), (0.0, 1.0)):
        rep = simnet.run(simnet.SimConfig(n, m, fault_model=simnet.FaultModel.fpd(pf), trials=1000))
        if not rep.failure_rate_estimate == an.analytic_failure(an.ReliabilityInput(n, m, pf)) == pf:
            bad.append(("boundary", n, m, pf))
    div = [simnet.compare_fpd_fnd(7, m, None, 0.2, trials, seed=7000 + m).divergence for m in (2, 3, 4)]
    trend = div[0] > div[1] > div[2]
    ok = not bad and trend and time.perf_counter() - t0 < 300
    verdict(6, ok, f"24 grid points, worst |z|={worst:.2f}; boundary exact; "
                   f"FND/FPD divergence at N=7: {[round(d, 5) for d in div]}; failures={bad[:3]}", t0)


# -- 7 ------------------------------------------------------------------------------

def test_criterion_7_rebalance():
    t0 = time.perf_counter()
    tree = constree.build(5, 3)
    positions = rebalance.criticality_order(tree)
    bad = []
    for seed in range(50):
        rng = random.Random(seed)
        slots = rng.sample(positions, 100)
        peers = [rebalance.PeerRecord(
            f"peer{k:03d}",
            {"processing": rng.uniform(1, 64), "storage": rng.lognormvariate(5, 1),
             "uptime": rng.random(), "connectivity": rng.randint(1, 200)},
            position=slots[k] if rng.random() < 0.8 else None) for k in range(100)]
        threshold = rng.uniform(0.2, 0.5)
        plan = rebalance.plan_rebalance(peers, tree, threshold)
        after = rebalance.apply(plan, peers)
        placed = [p for p in after if p.position is not None]
        if any(p.composite_score < threshold for p in placed):
            bad.append((seed, "expulsion"))
        by_layer = {}
        for p in placed:
            by_layer.setdefault(rebalance.position_layer(p.position), []).append(p.composite_score)
        layers = sorted(by_layer)
        if any(min(by_layer[a]) < max(by_layer[b]) for a, b in zip(layers, layers[1:])):
            bad.append((seed, "monotonicity"))
        if len(rebalance.plan_rebalance(after, tree, threshold)):
            bad.append((seed, "second plan"))
    ok = not bad and time.perf_counter() - t0 < 5
    verdict(7, ok, f"50 rosters of 100 peers on V_5,3; violations={bad[:3]}", t0)


# -- 8 ------------------------------------------------------------------------------

def cli_invocations(tmp):
    sim = tmp / "sim.json"
    sim.write_text('{"n": 5, "m": 3, "fault_model": {"type": "fpd", "p": 0.1}, "trials": 10000}')
    roster = tmp / "roster.json"
    rng = random.Random(8)
    positions = rebalance.criticality_order(constree.build(4, 2))
    roster.write_text(json.dumps([
        rebalance.PeerRecord(f"p{k}", {"processing": rng.random(), "storage": rng.random(),
                                       "uptime": rng.random(), "connectivity": rng.random()},
                             position=positions[k] if k % 2 else None).to_json()
        for k in range(12)]))
    return [
        ["generate", "--n", "4", "--m", "2"],
        ["generate", "--n", "3", "--m", "3", "--csv"],
        ["counts", "--n", "7", "--m", "5"],
        ["locator-encode", "--n", "3", "--m", "3", "--label", "(2,0)", "--label", "(1,0),(2,1),(3,0)"],
        ["locator-decode", "--locator", "11:000:011:100:111"],
        ["route", "--locator", "10:010:111:111", "--locator", "10:000:011:100"],
        ["tree", "--n", "4", "--m", "3"],
        ["cycle", "--n", "5", "--m", "3", "--csv"],
        ["analyze", "--n", "24", "--sweep", "100:1000000:30", "--csv"],
        ["analyze", "--n", "7", "--m", "3", "--pf", "0.01,0.05,0.1,0.2"],
        ["simulate", "--config", str(sim)],
        ["simulate", "--n", "7", "--m", "3", "--fnd-f", "60", "--trials", "10000", "--seed", "42"],
        ["rebalance-plan", "--n", "4", "--m", "2", "--config", str(roster), "--threshold", "0.3"],
    ]


def test_criterion_8_determinism(tmp_path):
    t0 = time.perf_counter()
    bad = []
    cmds = cli_invocations(tmp_path)
    for argv in cmds:
        outs = [subprocess.run([sys.executable, "-m", "hsfractal", *argv], capture_output=True)
                for _ in range(2)]
        if any(o.returncode for o in outs) or outs[0].stdout != outs[1].stdout or not outs[0].stdout:
            bad.append((argv[0], [o.returncode for o in outs], outs[0].stderr[-200:]))
    covered = {argv[0] for argv in cmds}
    missing = set(["generate", "counts", "locator-encode", "locator-decode", "route", "tree",
                   "cycle", "analyze", "simulate", "rebalance-plan"]) - covered
    ok = not bad and not missing
    verdict(8, ok, f"{len(cmds)} invocations run twice, byte-identical; "
                   f"differences={bad[:2]} uncovered={sorted(missing)}", t0)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q", "-s"]))
