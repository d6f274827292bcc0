"""Command-line entry point: ``hsfractal <command> [flags]``.

Exit status: 0 on success, 1 for domain errors, 2 for usage errors.  Output
goes to stdout unless ``--out`` names a file, which is written atomically.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile

from . import analytics, constree, labeling, ordering, rebalance, simnet, topology
from ._core import FractalError

DEFAULT_SEED = 0xF5AC7A1


def _int(text: str) -> int:
    try:
        return int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _dump(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _need(args, *names):
    missing = [f"--{n}" for n in names if getattr(args, n) is None]
    if missing:
        raise UsageError(f"{args.command} needs {', '.join(missing)}")


class UsageError(Exception):
    pass


# -- commands ---------------------------------------------------------------------

def cmd_generate(args) -> str:
    _need(args, "n", "m")
    mesh = topology.construct(args.n, args.m)
    if args.csv:
        rows = [[str(lab), *(repr(float(x)) for x in xyz)] for lab, xyz in mesh.vertices.items()]
        return _csv_text(["label", *(f"x{k}" for k in range(args.n))], rows)
    return _dump(mesh.to_json())


def cmd_counts(args) -> str:
    _need(args, "n", "m")
    nodes, faces = topology.count_nodes(args.n, args.m), topology.count_faces(args.n, args.m)
    if args.csv:
        return _csv_text(["n", "m", "nodes", "faces"], [[args.n, args.m, nodes, faces]])
    return json.dumps({"nodes": nodes, "faces": faces}) + "\n"


def cmd_locator_encode(args) -> str:
    _need(args, "n", "m")
    if not args.label:
        raise UsageError("locator-encode needs --label")
    lines = [str(labeling.encode_locator(labeling.PairLabel.parse(text), args.n, args.m))
             for text in args.label]
    return "\n".join(lines) + "\n"


def _decode(text: str, n, m):
    if n is not None and m is not None:
        loc = labeling.TierLocator(text.replace(":", "").strip(), n, m)
        return labeling.decode_locator(str(loc))
    return labeling.decode_locator(text)


def cmd_locator_decode(args) -> str:
    if not args.locator:
        raise UsageError("locator-decode needs --locator")
    docs = []
    for text in args.locator:
        n, m, label = _decode(text, args.n, args.m)
        docs.append({"locator": text, "n": n, "m": m, "label": str(label),
                     "tier": labeling.generation_tier(label)})
    if args.csv:
        return _csv_text(["locator", "n", "m", "label", "tier"],
                         [[d[k] for k in ("locator", "n", "m", "label", "tier")] for d in docs])
    return _dump(docs[0] if len(docs) == 1 else docs)


def cmd_route(args) -> str:
    ends = list(args.locator or [])
    if args.label:
        _need(args, "n", "m")
        ends.extend(str(labeling.encode_locator(labeling.PairLabel.parse(t), args.n, args.m))
                    for t in args.label)
    if len(ends) != 2:
        raise UsageError("route needs exactly two endpoints (--locator or --label)")
    path = labeling.route(*ends)
    if args.csv:
        return _csv_text(["hop", "label"], [[k, str(v)] for k, v in enumerate(path)])
    return _dump([str(v) for v in path])


def cmd_tree(args) -> str:
    _need(args, "n", "m")
    tree = constree.build(args.n, args.m)
    if args.csv:
        rows = [[constree.format_id(cid), node.layer,
                 "" if cid == constree.ROOT else constree.format_id(tree.parent[cid]),
                 " ".join(str(v) for v in node.members)]
                for cid, node in tree.nodes.items()]
        return _csv_text(["id", "layer", "parent", "members"], rows)
    return _dump(tree.to_json())


def cmd_cycle(args) -> str:
    _need(args, "n", "m")
    if args.audit:
        return ordering.audit_printed(args.n, args.m).summary() + "\n"
    cycle = ordering.build_cycle(args.n, args.m, variant=args.variant)
    if args.csv:
        return cycle.to_csv()
    return cycle.to_json() + "\n"


def _pf_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"--pf must be a comma-separated list of numbers, got {text!r}") from None


def cmd_analyze(args) -> str:
    _need(args, "n")
    if args.sweep:
        lo, hi, steps = analytics.parse_sweep(args.sweep)
        rows = analytics.complexity_sweep(args.n, analytics.geometric_points(lo, hi, steps),
                                          args.t_ave)
        if args.csv:
            return analytics.rows_to_csv(rows, analytics.SWEEP_COLUMNS)
        return _dump(rows)
    if args.pf is not None:
        _need(args, "m")
        rows = analytics.reliability_curve(args.n, args.m, _pf_list(args.pf), args.quorum)
        if args.csv:
            return analytics.rows_to_csv(rows, ["P_f", "P_fail"])
        return _dump(rows)
    if args.population is not None:
        rep = analytics.complexity_partial(args.n, args.population)
        plan = analytics.fill_plan(args.n, args.population)
        delay = analytics.approx_delay(args.n, args.population, args.t_ave)
        v = args.population
    else:
        _need(args, "m")
        rep = analytics.complexity_filled(args.n, args.m)
        v = topology.count_nodes(args.n, args.m)
        plan = None
        delay = analytics.approx_delay(args.n, v, args.t_ave)
    doc = {
        "n": args.n, "V": v, "m": rep.tier_m,
        "r": None if rep.fill_ratio_r is None else str(rep.fill_ratio_r),
        "total": rep.total, "intra_layer": rep.intra_layer, "inter_layer": rep.inter_layer,
        "literal_total": rep.literal_total, "literal_deviation": rep.literal_deviation,
        "approx_complexity": analytics.approx_complexity(args.n, v) if v > 1 else None,
        "delay_exact": delay.exact, "delay_approx": delay.approx,
        "degenerate_plan": bool(plan and plan.degenerate),
    }
    if args.csv:
        return _csv_text(list(doc), [["" if x is None else x for x in doc.values()]])
    return _dump(doc)


def _sim_config(args) -> simnet.SimConfig:
    if args.config:
        cfg = simnet.SimConfig.load(args.config)
        overrides = {}
        if args.seed_given:
            overrides["seed"] = args.seed
        if args.trials is not None:
            overrides["trials"] = args.trials
        if overrides:
            doc = cfg.to_json()
            doc.update(overrides)
            cfg = simnet.SimConfig.from_json(doc)
        return cfg
    _need(args, "n", "m")
    if args.pf is not None and args.fnd_f is not None:
        raise UsageError("--pf and --fnd-f are mutually exclusive")
    if args.fnd_f is not None:
        fm = simnet.FaultModel.fnd(args.fnd_f)
    else:
        pfs = _pf_list(args.pf) if args.pf is not None else [0.0]
        if len(pfs) != 1:
            raise UsageError("simulate takes a single --pf value")
        fm = simnet.FaultModel.fpd(pfs[0])
    return simnet.SimConfig(args.n, args.m, args.population, fm, args.seed,
                            t_ave=args.t_ave, trials=args.trials or 1, quorum=args.quorum)


def cmd_simulate(args) -> str:
    report = simnet.run(_sim_config(args))
    if args.csv:
        row = report.csv_row()
        return _csv_text(report.CSV_COLUMNS, [[row[k] for k in report.CSV_COLUMNS]])
    return report.dumps()


def cmd_rebalance_plan(args) -> str:
    _need(args, "n", "m")
    if not args.config:
        raise UsageError("rebalance-plan needs --config ROSTER.json")
    peers = rebalance.load_roster(args.config)
    tree = constree.build(args.n, args.m)
    plan = rebalance.plan_rebalance(peers, tree, args.threshold)
    if args.csv:
        return _csv_text(["peer_id", "from", "to"],
                         [[d["peer_id"], d["from"] or "", d["to"]] for d in plan.to_json()])
    return plan.dumps()


COMMANDS = {
    "generate": (cmd_generate, "mesh vertices and faces of V_{N,m}"),
    "counts": (cmd_counts, "node and face counts"),
    "locator-encode": (cmd_locator_encode, "label to tier locator"),
    "locator-decode": (cmd_locator_decode, "tier locator to label"),
    "route": (cmd_route, "label path between two nodes"),
    "tree": (cmd_tree, "consensus tree"),
    "cycle": (cmd_cycle, "update cycle (successor order)"),
    "analyze": (cmd_analyze, "closed-form complexity, delay and reliability"),
    "simulate": (cmd_simulate, "Monte Carlo consensus simulation"),
    "rebalance-plan": (cmd_rebalance_plan, "plan peer moves from a roster"),
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--n", type=_int)
    common.add_argument("--m", type=_int)
    common.add_argument("--population", type=_int)
    common.add_argument("--label", action="append", help="repeatable")
    common.add_argument("--locator", action="append", help="repeatable")
    common.add_argument("--config", metavar="PATH")
    common.add_argument("--out", metavar="PATH")
    common.add_argument("--csv", action="store_true")
    common.add_argument("--seed", type=_int, default=None,
                        help=f"RNG seed (default {DEFAULT_SEED:#x})")
    common.add_argument("--trials", type=_int)
    common.add_argument("--pf", help="failure probability; comma list for analyze")
    common.add_argument("--fnd-f", type=_int, dest="fnd_f")
    common.add_argument("--sweep", metavar="VMIN:VMAX:STEPS")
    common.add_argument("--t-ave", type=float, default=1.0, dest="t_ave")
    common.add_argument("--quorum", choices=[analytics.FLOOR_QUORUM, analytics.STRICT_QUORUM],
                        default=analytics.FLOOR_QUORUM)
    common.add_argument("--threshold", type=float, default=0.0,
                        help="expulsion threshold for rebalance-plan")
    common.add_argument("--variant", choices=[ordering.CONSISTENT, ordering.PRINTED],
                        default=ordering.CONSISTENT)
    common.add_argument("--audit", action="store_true",
                        help="cycle: report which case branches of the literal variant break")

    parser = argparse.ArgumentParser(prog="hsfractal", description="Hyper-simplex fractal network toolkit.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name, (_, help_text) in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=help_text)
    return parser


def write_output(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    target = os.path.abspath(path)
    fd, tmp = tempfile.mkstemp(prefix=".hsfractal-", dir=os.path.dirname(target))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args.seed_given = args.seed is not None
    if args.seed is None:
        args.seed = DEFAULT_SEED
    handler = COMMANDS[args.command][0]
    try:
        text = handler(args)
        write_output(text, args.out)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"hsfractal {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (FractalError, OSError) as exc:
        print(f"hsfractal {args.command}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
