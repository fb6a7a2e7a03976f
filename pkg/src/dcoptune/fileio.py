"""Line-oriented text formats for scenarios, labels, parameters, reports.

Every file opens with a `dcoptune-<kind> v1` line.  Floats are written
with repr() so a write/read cycle returns bit-identical values.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import (CrossReferenceError, LengthMismatch, MalformedRow,
                         SchemaVersionMismatch)
from .network import DcParameters, NetworkModel
from .scenarios import Label, Scenario

_MAGIC = {
    "scenarios": "dcoptune-scenarios v1",
    "labels": "dcoptune-labels v1",
    "params": "dcoptune-params v1",
    "report": "dcoptune-report v1",
}


def _fmt(values) -> str:
    return " ".join(repr(float(v)) for v in values)


def _floats(parts, n, path, lineno) -> np.ndarray:
    if len(parts) != n:
        raise LengthMismatch(
            f"{path}:{lineno}: expected {n} values, found {len(parts)}")
    try:
        return np.array([float(p) for p in parts])
    except ValueError as exc:
        raise MalformedRow(f"{path}:{lineno}: {exc}") from exc


class _Reader:
    """Sequential reader with positioned error messages."""

    def __init__(self, path):
        self.path = str(path)
        with open(path, encoding="utf-8") as fh:
            self.lines = fh.read().splitlines()
        self.pos = 0

    def next(self) -> tuple[int, list[str]]:
        while self.pos < len(self.lines):
            self.pos += 1
            text = self.lines[self.pos - 1].strip()
            if text:
                return self.pos, text.split()
        raise MalformedRow(f"{self.path}: unexpected end of file")

    def expect(self, key: str) -> tuple[int, list[str]]:
        lineno, parts = self.next()
        if parts[0] != key:
            raise MalformedRow(
                f"{self.path}:{lineno}: expected '{key}', found '{parts[0]}'")
        return lineno, parts

    def check_magic(self, kind: str) -> None:
        lineno, parts = self.next()
        if " ".join(parts) != _MAGIC[kind]:
            raise SchemaVersionMismatch(
                f"{self.path}:{lineno}: expected header "
                f"'{_MAGIC[kind]}', found '{' '.join(parts)}'")


def write_scenarios(path, case_name: str, scenarios: list[Scenario]) -> None:
    n_bus = scenarios[0].pd.size if scenarios else 0
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_MAGIC["scenarios"] + "\n")
        fh.write(f"case {case_name}\n")
        fh.write(f"n_bus {n_bus}\n")
        fh.write(f"count {len(scenarios)}\n")
        for s in scenarios:
            fh.write(f"scenario {s.id}\n")
            fh.write("pd " + _fmt(s.pd) + "\n")
            fh.write("qd " + _fmt(s.qd) + "\n")


def read_scenarios(path) -> tuple[str, list[Scenario]]:
    r = _Reader(path)
    r.check_magic("scenarios")
    _, parts = r.expect("case")
    case_name = " ".join(parts[1:])
    _, parts = r.expect("n_bus")
    n_bus = int(parts[1])
    _, parts = r.expect("count")
    count = int(parts[1])
    out = []
    for _ in range(count):
        _, parts = r.expect("scenario")
        sid = int(parts[1])
        lineno, parts = r.expect("pd")
        pd = _floats(parts[1:], n_bus, r.path, lineno)
        lineno, parts = r.expect("qd")
        qd = _floats(parts[1:], n_bus, r.path, lineno)
        out.append(Scenario(id=sid, pd=pd, qd=qd))
    return case_name, out


def write_labels(path, case_name: str, n_bus: int, n_gen: int,
                 labels: list[Label]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_MAGIC["labels"] + "\n")
        fh.write(f"case {case_name}\n")
        fh.write(f"n_bus {n_bus}\n")
        fh.write(f"n_gen {n_gen}\n")
        fh.write(f"count {len(labels)}\n")
        for lab in labels:
            fh.write(f"label {lab.scenario_id} {lab.status} "
                     f"{repr(float(lab.objective))}\n")
            if lab.status == "optimal":
                fh.write("pg " + _fmt(lab.pg) + "\n")
                fh.write("vm " + _fmt(lab.vm) + "\n")
                fh.write("va " + _fmt(lab.va) + "\n")


def read_labels(path, net: NetworkModel | None = None) -> tuple[str, list[Label]]:
    """Read a label file; `net` cross-checks the dimensions against a case."""
    r = _Reader(path)
    r.check_magic("labels")
    _, parts = r.expect("case")
    case_name = " ".join(parts[1:])
    _, parts = r.expect("n_bus")
    n_bus = int(parts[1])
    _, parts = r.expect("n_gen")
    n_gen = int(parts[1])
    if net is not None and (n_bus != net.n_bus or n_gen != net.n_gen):
        raise CrossReferenceError(
            f"{r.path}: sized for {n_bus} buses / {n_gen} machines, "
            f"case {net.name} has {net.n_bus} / {net.n_gen}")
    _, parts = r.expect("count")
    count = int(parts[1])
    out = []
    for _ in range(count):
        lineno, parts = r.expect("label")
        if len(parts) != 4:
            raise MalformedRow(f"{r.path}:{lineno}: label rows carry "
                               f"id, status and objective")
        sid, status = int(parts[1]), parts[2]
        objective = float(parts[3])
        if status == "optimal":
            lineno, parts = r.expect("pg")
            pg = _floats(parts[1:], n_gen, r.path, lineno)
            lineno, parts = r.expect("vm")
            vm = _floats(parts[1:], n_bus, r.path, lineno)
            lineno, parts = r.expect("va")
            va = _floats(parts[1:], n_bus, r.path, lineno)
            out.append(Label(sid, status, objective, pg, vm, va))
        else:
            if status not in ("infeasible", "failed"):
                raise MalformedRow(f"{r.path}:{lineno}: unknown label "
                                   f"status '{status}'")
            out.append(Label(sid, status, objective))
    return case_name, out


def write_params(path, case_name: str, net: NetworkModel,
                 params: DcParameters) -> None:
    params.validate(net)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_MAGIC["params"] + "\n")
        fh.write(f"case {case_name}\n")
        fh.write(f"n_bus {net.n_bus}\n")
        fh.write(f"n_branch {net.n_branch}\n")
        for k in range(net.n_branch):
            fh.write(f"branch {k} {net.bus_ids[net.br_from[k]]} "
                     f"{net.bus_ids[net.br_to[k]]} "
                     f"{repr(float(params.flow_coeff[k]))} "
                     f"{repr(float(params.flow_bias[k]))}\n")
        for i in range(net.n_bus):
            fh.write(f"bus {i} {net.bus_ids[i]} "
                     f"{repr(float(params.injection_bias[i]))}\n")


def read_params(path, net: NetworkModel | None = None) \
        -> tuple[str, DcParameters]:
    r = _Reader(path)
    r.check_magic("params")
    _, parts = r.expect("case")
    case_name = " ".join(parts[1:])
    _, parts = r.expect("n_bus")
    n_bus = int(parts[1])
    _, parts = r.expect("n_branch")
    n_branch = int(parts[1])
    if net is not None and (n_bus != net.n_bus or n_branch != net.n_branch):
        raise CrossReferenceError(
            f"{r.path}: sized for {n_bus} buses / {n_branch} branches, "
            f"network has {net.n_bus} / {net.n_branch}")
    coeff = np.empty(n_branch)
    fbias = np.empty(n_branch)
    ibias = np.empty(n_bus)
    for _ in range(n_branch):
        lineno, parts = r.expect("branch")
        if len(parts) != 6:
            raise MalformedRow(f"{r.path}:{lineno}: branch rows carry "
                               f"index, endpoints and two values")
        k = int(parts[1])
        if not 0 <= k < n_branch:
            raise MalformedRow(f"{r.path}:{lineno}: branch index {k} "
                               f"out of range")
        if net is not None:
            f_id, t_id = int(parts[2]), int(parts[3])
            if (net.bus_ids[net.br_from[k]] != f_id
                    or net.bus_ids[net.br_to[k]] != t_id):
                raise CrossReferenceError(
                    f"{r.path}:{lineno}: branch {k} runs "
                    f"{f_id}->{t_id}, network has "
                    f"{net.bus_ids[net.br_from[k]]}->"
                    f"{net.bus_ids[net.br_to[k]]}")
        coeff[k] = float(parts[4])
        fbias[k] = float(parts[5])
    for _ in range(n_bus):
        lineno, parts = r.expect("bus")
        if len(parts) != 4:
            raise MalformedRow(f"{r.path}:{lineno}: bus rows carry "
                               f"index, id and one value")
        i = int(parts[1])
        if not 0 <= i < n_bus:
            raise MalformedRow(f"{r.path}:{lineno}: bus index {i} "
                               f"out of range")
        if net is not None and net.bus_ids[i] != int(parts[2]):
            raise CrossReferenceError(
                f"{r.path}:{lineno}: bus {i} has id {parts[2]}, "
                f"network says {net.bus_ids[i]}")
        ibias[i] = float(parts[3])
    return case_name, DcParameters(coeff, ibias, fbias)


@dataclass
class ReportData:
    """Serializable slice of a training run."""

    case_name: str
    init: str
    status: str
    iterations: int
    initial_loss: float
    final_loss: float
    n_used: int
    n_skipped: int
    wall_seconds: float
    curve: list[tuple[float, float, float, int, bool]]
    # (fun, grad_norm, step, cg_iterations, wolfe) per accepted step


def write_report(path, data: ReportData) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_MAGIC["report"] + "\n")
        fh.write(f"case {data.case_name}\n")
        fh.write(f"init {data.init}\n")
        fh.write(f"status {data.status}\n")
        fh.write(f"iterations {data.iterations}\n")
        fh.write(f"initial_loss {repr(float(data.initial_loss))}\n")
        fh.write(f"final_loss {repr(float(data.final_loss))}\n")
        fh.write(f"n_used {data.n_used}\n")
        fh.write(f"n_skipped {data.n_skipped}\n")
        fh.write(f"wall_seconds {repr(float(data.wall_seconds))}\n")
        for k, (fun, gnorm, step, cg, wolfe) in enumerate(data.curve, 1):
            fh.write(f"iter {k} {repr(float(fun))} {repr(float(gnorm))} "
                     f"{repr(float(step))} {cg} {int(wolfe)}\n")


def read_report(path) -> ReportData:
    r = _Reader(path)
    r.check_magic("report")
    _, parts = r.expect("case")
    case_name = " ".join(parts[1:])
    _, parts = r.expect("init")
    init = parts[1]
    _, parts = r.expect("status")
    status = parts[1]
    _, parts = r.expect("iterations")
    iterations = int(parts[1])
    _, parts = r.expect("initial_loss")
    initial_loss = float(parts[1])
    _, parts = r.expect("final_loss")
    final_loss = float(parts[1])
    _, parts = r.expect("n_used")
    n_used = int(parts[1])
    _, parts = r.expect("n_skipped")
    n_skipped = int(parts[1])
    _, parts = r.expect("wall_seconds")
    wall = float(parts[1])
    curve = []
    for _ in range(iterations):
        lineno, parts = r.expect("iter")
        if len(parts) != 7:
            raise MalformedRow(f"{r.path}:{lineno}: iter rows carry "
                               f"six fields")
        curve.append((float(parts[2]), float(parts[3]), float(parts[4]),
                      int(parts[5]), bool(int(parts[6]))))
    return ReportData(case_name, init, status, iterations, initial_loss,
                      final_loss, n_used, n_skipped, wall, curve)
