"""Reader for MATPOWER-format case files.

Extracts the numeric tables from a ``.m`` case file with regular
expressions; no Octave/MATLAB runtime is involved.  Only the fields the
rest of the package consumes are validated here; everything else is
carried through untouched.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import DuplicateBusId, MalformedRow, MissingTable, UnsupportedCostModel

# MATPOWER column positions (0-based) for the slices we read.
BUS_I, BUS_TYPE, PD, QD, GS, BS = 0, 1, 2, 3, 4, 5
VMAX, VMIN = 11, 12
GEN_BUS, GEN_PG, GEN_QG, QMAX, QMIN, GEN_VG, GEN_STATUS, PMAX, PMIN = 0, 1, 2, 3, 4, 5, 7, 8, 9
F_BUS, T_BUS, BR_R, BR_X, BR_B, RATE_A, TAP, SHIFT, BR_STATUS, ANGMIN, ANGMAX = (
    0, 1, 2, 3, 4, 5, 8, 9, 10, 11, 12)
COST_MODEL, NCOST = 0, 3

REF, PV, PQ, ISOLATED = 3, 2, 1, 4

_TABLE_MIN_COLS = {"bus": 13, "gen": 10, "branch": 13, "gencost": 4}


@dataclass
class RawCase:
    """Verbatim numeric content of one case file (MW/MVAr units, original ids)."""

    name: str
    base_mva: float
    bus: np.ndarray
    gen: np.ndarray
    branch: np.ndarray
    gencost: np.ndarray

    @property
    def n_bus(self) -> int:
        return self.bus.shape[0]

    @property
    def n_gen(self) -> int:
        return self.gen.shape[0]

    @property
    def n_branch(self) -> int:
        return self.branch.shape[0]


def _strip_comments(text: str) -> str:
    # '%' starts a comment in MATLAB source; none of the numeric tables
    # legitimately contain one.
    return re.sub(r"%[^\n]*", "", text)


def _extract_table(text: str, name: str) -> np.ndarray:
    m = re.search(r"mpc\.%s\s*=\s*\[(.*?)\];" % name, text, re.DOTALL)
    if m is None:
        raise MissingTable(f"table mpc.{name} not found")
    rows = []
    width = None
    for lineno, line in enumerate(m.group(1).split("\n"), 1):
        line = line.replace(";", " ").strip()
        if not line:
            continue
        try:
            row = [float(tok) for tok in line.split()]
        except ValueError as exc:
            raise MalformedRow(f"mpc.{name} line {lineno}: {exc}") from None
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise MalformedRow(
                f"mpc.{name} line {lineno}: expected {width} columns, got {len(row)}")
        rows.append(row)
    if not rows:
        raise MissingTable(f"table mpc.{name} is empty")
    arr = np.array(rows, dtype=float)
    if arr.shape[1] < _TABLE_MIN_COLS[name]:
        raise MalformedRow(
            f"mpc.{name}: {arr.shape[1]} columns, need >= {_TABLE_MIN_COLS[name]}")
    return arr


def parse_matpower(path) -> RawCase:
    """Read one case file and return its tables unmodified.

    Raises MissingTable / MalformedRow / DuplicateBusId /
    UnsupportedCostModel on structural problems; numeric content is not
    otherwise judged here.
    """
    path = Path(path)
    text = _strip_comments(path.read_text())

    m = re.search(r"function\s+mpc\s*=\s*(\w+)", text)
    name = m.group(1) if m else path.stem

    m = re.search(r"mpc\.baseMVA\s*=\s*([\d.eE+-]+)\s*;", text)
    if m is None:
        raise MissingTable("mpc.baseMVA not found")
    base_mva = float(m.group(1))
    if base_mva <= 0:
        raise MalformedRow(f"baseMVA must be positive, got {base_mva}")

    bus = _extract_table(text, "bus")
    gen = _extract_table(text, "gen")
    branch = _extract_table(text, "branch")
    gencost = _extract_table(text, "gencost")

    ids = bus[:, BUS_I].astype(int)
    seen = set()
    for i in ids:
        if i in seen:
            raise DuplicateBusId(f"bus id {i} appears more than once")
        seen.add(i)

    ng = gen.shape[0]
    if gencost.shape[0] == 2 * ng:
        # Rows ng..2ng-1 are reactive-power costs; active costs come first.
        gencost = gencost[:ng]
    elif gencost.shape[0] != ng:
        raise MalformedRow(
            f"gencost has {gencost.shape[0]} rows for {ng} generators")

    for k in range(ng):
        model = int(gencost[k, COST_MODEL])
        ncost = int(gencost[k, NCOST])
        if model != 2:
            raise UnsupportedCostModel(
                f"generator {k}: cost model {model}; only polynomial (2) is supported")
        if not 1 <= ncost <= 3:
            raise UnsupportedCostModel(
                f"generator {k}: polynomial with {ncost} coefficients; degree <= 2 required")
        if gencost.shape[1] < NCOST + 1 + ncost:
            raise MalformedRow(f"gencost row {k} shorter than its NCOST declares")

    return RawCase(name=name, base_mva=base_mva, bus=bus, gen=gen,
                   branch=branch, gencost=gencost)


def poly_coeffs(gencost: np.ndarray, k: int) -> tuple[float, float, float]:
    """(c2, c1, c0) of generator k's cost polynomial, zero-padded."""
    ncost = int(gencost[k, NCOST])
    coeffs = [0.0] * (3 - ncost) + [float(c) for c in gencost[k, NCOST + 1:NCOST + 1 + ncost]]
    return coeffs[0], coeffs[1], coeffs[2]
