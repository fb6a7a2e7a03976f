"""Command line front end: scenarios, label, train, eval.

Exit codes: 0 success, 2 usage, 3 missing file, 4 malformed input,
5 solver failure, 6 cross-reference mismatch.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .acpf import newton_pf
from .dcopf import solve_dcopf
from .exceptions import (CrossReferenceError, DcoptuneError, EmptyEvaluation,
                         LengthMismatch, LineSearchFailed,
                         LowerLevelInfeasible, MalformedRow, MaxIterations,
                         NotConverged, NotOptimal, NumericalFailure,
                         PrimalInfeasible, SchemaVersionMismatch, SingularKkt)
from .fileio import (ReportData, read_labels, read_params, read_scenarios,
                     write_labels, write_params, write_report,
                     write_scenarios)
from .matpower import parse_matpower
from .network import NetworkModel, cold_start, hot_start, to_network
from .scenarios import generate_scenarios, label_scenarios, n_workers
from .training import TrainConfig, evaluate, train

_SOLVER_ERRORS = (PrimalInfeasible, MaxIterations, NumericalFailure,
                  NotConverged, NotOptimal, SingularKkt,
                  LowerLevelInfeasible, LineSearchFailed)
_INPUT_ERRORS = (MalformedRow, SchemaVersionMismatch, LengthMismatch,
                 EmptyEvaluation)


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(primary_output, command: str, args: argparse.Namespace,
                    inputs: list, outputs: list) -> None:
    doc = {
        "tool": f"dcoptune {__version__}",
        "command": command,
        "arguments": {k: v for k, v in vars(args).items() if k != "func"},
        "inputs": {str(p): _sha256(p) for p in inputs},
        "outputs": {str(p): _sha256(p) for p in outputs},
        "workers": n_workers(),
        "created": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
    }
    path = Path(str(primary_output) + ".manifest.json")
    path.write_text(json.dumps(doc, indent=2, default=str) + "\n",
                    encoding="utf-8")


def _load_network(path) -> NetworkModel:
    return to_network(parse_matpower(path))


def _cmd_scenarios(args) -> int:
    net = _load_network(args.case)
    scenarios = generate_scenarios(net, args.count, sigma=args.sigma,
                                   seed=args.seed)
    write_scenarios(args.out, net.name, scenarios)
    _write_manifest(args.out, "scenarios", args, [args.case], [args.out])
    print(f"wrote {len(scenarios)} scenarios for {net.name} "
          f"({net.n_bus} buses) to {args.out}")
    return 0


def _cmd_label(args) -> int:
    net = _load_network(args.case)
    case_name, scenarios = read_scenarios(args.scenarios)
    if scenarios and scenarios[0].pd.size != net.n_bus:
        raise CrossReferenceError(
            f"{args.scenarios}: sized for {scenarios[0].pd.size} buses, "
            f"{args.case} has {net.n_bus}")
    if args.import_file:
        imported_case, labels = read_labels(args.import_file, net)
        if imported_case != case_name:
            raise CrossReferenceError(
                f"{args.import_file}: labels for case '{imported_case}', "
                f"scenarios for '{case_name}'")
        have = {lab.scenario_id for lab in labels}
        missing = [s.id for s in scenarios if s.id not in have]
        if missing:
            raise CrossReferenceError(
                f"{args.import_file}: no label for scenario ids {missing}")
    else:
        labels = label_scenarios(net, scenarios, tol=args.tol,
                                 max_iter=args.max_iter)
    write_labels(args.out, case_name, net.n_bus, net.n_gen, labels)
    inputs = [args.case, args.scenarios]
    if args.import_file:
        inputs.append(args.import_file)
    _write_manifest(args.out, "label", args, inputs, [args.out])
    counts = {}
    for lab in labels:
        counts[lab.status] = counts.get(lab.status, 0) + 1
    summary = ", ".join(f"{v} {k}" for k, v in sorted(counts.items()))
    print(f"labelled {len(labels)} scenarios ({summary}) to {args.out}")
    n_bad = sum(1 for lab in labels if lab.status != "optimal")
    if 2 * n_bad > len(labels):
        print(f"error: {n_bad} of {len(labels)} scenarios failed to label",
              file=sys.stderr)
        return 5
    return 0


def _cmd_train(args) -> int:
    net = _load_network(args.case)
    case_name, scenarios = read_scenarios(args.scenarios)
    label_case, labels = read_labels(args.labels, net)
    if label_case != case_name:
        raise CrossReferenceError(
            f"{args.labels}: labels for case '{label_case}', "
            f"scenarios for '{case_name}'")
    have = {lab.scenario_id for lab in labels}
    missing = [s.id for s in scenarios if s.id not in have]
    if missing:
        raise CrossReferenceError(
            f"{args.labels}: no label for scenario ids {missing}")
    config = TrainConfig(init=args.init, cold_mode=args.cold_mode,
                         tol=args.tol, max_iter=args.max_iter,
                         cg_max_iter=args.cg_max_iter)
    report = train(net, scenarios, labels, config)
    write_params(args.out, case_name, net, report.params)
    outputs = [args.out]
    if args.report:
        curve = [(h.fun, h.grad_norm, h.step, h.cg_iterations, h.wolfe)
                 for h in report.result.history]
        write_report(args.report, ReportData(
            case_name=case_name, init=report.init,
            status=report.result.status,
            iterations=report.result.iterations,
            initial_loss=report.initial_loss,
            final_loss=report.final_loss,
            n_used=report.n_used, n_skipped=report.n_skipped,
            wall_seconds=report.wall_seconds, curve=curve))
        outputs.append(args.report)
    _write_manifest(args.out, "train", args,
                    [args.case, args.scenarios, args.labels], outputs)
    print(f"init {report.init}: loss {report.initial_loss:.6e} -> "
          f"{report.final_loss:.6e} in {report.result.iterations} steps "
          f"({report.result.status}, {report.wall_seconds:.1f}s), "
          f"params to {args.out}")
    return 0


def _baseline_params(net: NetworkModel, name: str, cold_mode: str):
    if name == "cold":
        return cold_start(net, mode=cold_mode)
    if name == "hot":
        return hot_start(net, newton_pf(net).state, mode=cold_mode)
    raise MalformedRow(f"unknown baseline '{name}' (use cold or hot)")


def _cmd_eval(args) -> int:
    net = _load_network(args.case)
    case_name, scenarios = read_scenarios(args.scenarios)
    label_case, labels = read_labels(args.labels, net)
    if label_case != case_name:
        raise CrossReferenceError(
            f"{args.labels}: labels for case '{label_case}', "
            f"scenarios for '{case_name}'")
    sets = []
    if args.params:
        _, params = read_params(args.params, net)
        sets.append(("trained", params))
    for name in args.baseline:
        sets.append((name, _baseline_params(net, name, args.cold_mode)))
    if not sets:
        raise EmptyEvaluation("nothing to evaluate: give --params "
                              "and/or --baseline")

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    metrics = {}
    predictions = {}
    for name, params in sets:
        metrics[name] = evaluate(net, params, scenarios, labels)
        rows = {}
        by_id = {l.scenario_id: l for l in labels}
        for s in scenarios:
            lab = by_id.get(s.id)
            if lab is None or lab.status != "optimal":
                continue
            rows[s.id] = (solve_dcopf(net, params, pd=s.pd).pg, lab.pg)
        predictions[name] = rows

    per_scenario = out_dir / "per_scenario.csv"
    with open(per_scenario, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["set", "scenario_id", "mse", "max_error"])
        for name, m in metrics.items():
            for sid, mse, mx in zip(m.scenario_ids, m.per_scenario_mse,
                                    m.per_scenario_max):
                w.writerow([name, sid, repr(float(mse)), repr(float(mx))])

    setpoints = out_dir / "setpoints.csv"
    with open(setpoints, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["set", "scenario_id", "machine", "ac", "dc"])
        for name, rows in predictions.items():
            for sid in sorted(rows):
                dc, ac = rows[sid]
                for g in range(net.n_gen):
                    w.writerow([name, sid, g, repr(float(ac[g])),
                                repr(float(dc[g]))])

    distribution = out_dir / "error_distribution.csv"
    with open(distribution, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["set", "rank", "mse", "cumulative_fraction"])
        for name, m in metrics.items():
            order = np.sort(m.per_scenario_mse)
            for r, v in enumerate(order, 1):
                w.writerow([name, r, repr(float(v)),
                            repr(r / len(order))])

    summary = out_dir / "summary.csv"
    names = list(metrics)
    with open(summary, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["set", "mse", "max_error", "n_scenarios", "n_skipped"]
                   + [f"improvement_vs_{other}" for other in names])
        for name, m in metrics.items():
            gains = ["" if other == name
                     else repr(m.improvement_over(metrics[other]))
                     for other in names]
            w.writerow([name, repr(m.mse), repr(m.max_error),
                        m.n_scenarios, m.n_skipped] + gains)

    _write_manifest(summary, "eval", args,
                    [p for p in [args.case, args.scenarios, args.labels,
                                 args.params] if p],
                    [per_scenario, setpoints, distribution, summary])

    for name, m in metrics.items():
        line = (f"{name:>8}: mse {m.mse:.6e}  max {m.max_error:.6e}  "
                f"({m.n_scenarios} scenarios, {m.n_skipped} skipped)")
        print(line)
    if args.params:
        for name in args.baseline:
            gain = metrics["trained"].improvement_over(metrics[name])
            print(f"trained vs {name}: {gain:+.1f}% mse")
    print(f"tables in {out_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dcoptune",
        description="Tune DC dispatch parameters against AC ground truth.")
    parser.add_argument("--version", action="version",
                        version=f"dcoptune {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scenarios", help="draw random load scenarios")
    p.add_argument("--case", required=True, help="MATPOWER .m case file")
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--sigma", type=float, default=0.15)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_scenarios)

    p = sub.add_parser("label", help="solve the AC dispatch per scenario")
    p.add_argument("--case", required=True)
    p.add_argument("--scenarios", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--import", dest="import_file", default=None,
                   metavar="LABELS",
                   help="validate and pass through an existing label file "
                        "instead of solving")
    p.set_defaults(func=_cmd_label)

    p = sub.add_parser("train", help="fit DC parameters to labels")
    p.add_argument("--case", required=True)
    p.add_argument("--scenarios", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--out", required=True, help="parameter file to write")
    p.add_argument("--report", default=None, help="optional run report")
    p.add_argument("--init", choices=["cold", "hot", "best"],
                   default="cold")
    p.add_argument("--cold-mode", choices=["susceptance", "reactance"],
                   default="susceptance")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-iter", type=int, default=100)
    p.add_argument("--cg-max-iter", type=int, default=12)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="score parameter sets on labels")
    p.add_argument("--case", required=True)
    p.add_argument("--scenarios", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--params", default=None)
    p.add_argument("--baseline", action="append", default=[],
                   choices=["cold", "hot"])
    p.add_argument("--cold-mode", choices=["susceptance", "reactance"],
                   default="susceptance")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except CrossReferenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 6
    except _SOLVER_ERRORS as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 5
    except (_INPUT_ERRORS + (DcoptuneError,)) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
