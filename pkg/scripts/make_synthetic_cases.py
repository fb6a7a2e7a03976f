#!/usr/bin/env python3
"""Generate the synthetic 39, 57 and 118 bus cases under data/cases.

Each network is a ring of buses with random chords, so it is meshed and
connected by construction, with heterogeneous quadratic generator costs.
Thermal ratings are curated from the nominal dispatch: the heaviest
corridors sit just above their nominal loading so congestion is routine
in load-scaled scenarios, everything else gets slack.  A case is only
written after it passes an end-to-end check: power flow and both
optimizations converge at nominal load, a scenario batch labels optimal,
and the linear model is feasible from both starting points.

The generator is deterministic; rerunning it reproduces the checked-in
files byte for byte.
"""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from dcoptune import (  # noqa: E402
    cold_start,
    generate_scenarios,
    hot_start,
    label_scenarios,
    newton_pf,
    parse_matpower,
    solve_acopf,
    solve_dcopf,
    to_network,
)
from dcoptune.network import admittance_matrices  # noqa: E402
from dcoptune.polar import branch_flow  # noqa: E402

OUT_DIR = Path(__file__).resolve().parents[1] / "data" / "cases"

# (name, n_bus, seed, load_scale): fixed once, part of the recipe.  The
# larger meshes run lighter so load-scaled scenarios stay well inside
# the voltage-feasible region.
CASES = [
    ("case39", 39, 205, 1.0),
    ("case57", 57, 302, 0.8),
    ("case118", 118, 707, 0.8),
]


def build_topology(n: int, rng: np.random.Generator):
    """Ring plus random chords; returns a list of (from, to) bus indices."""
    edges = [(i, (i + 1) % n) for i in range(n)]
    seen = {frozenset(e) for e in edges}
    n_chords = round(0.55 * n)
    while n_chords > 0:
        i, j = rng.integers(0, n, size=2)
        gap = min((i - j) % n, (j - i) % n)
        key = frozenset((int(i), int(j)))
        if gap < 2 or key in seen:
            continue
        seen.add(key)
        edges.append((int(min(i, j)), int(max(i, j))))
        n_chords -= 1
    return edges


def build_case(n: int, seed: int, load_scale: float = 1.0):
    rng = np.random.default_rng(seed)
    edges = build_topology(n, rng)
    nl = len(edges)

    x = np.round(rng.uniform(0.05, 0.25, nl), 5)
    r = np.round(x * rng.uniform(0.15, 0.35, nl), 5)
    ch = np.round(rng.uniform(0.0, 0.04, nl), 4)

    n_gen = max(3, round(n / 6))
    gen_bus = [0] + sorted(int(b) for b in rng.choice(np.arange(1, n), n_gen - 1, replace=False))

    pd = np.zeros(n)
    qd = np.zeros(n)
    for i in range(n):
        if rng.random() < 0.75:
            pd[i] = round(load_scale * float(rng.uniform(10.0, 45.0)), 1)
            pf = rng.uniform(0.90, 0.98)
            qd[i] = round(pd[i] * float(np.tan(np.arccos(pf))), 1)
    total = pd.sum()

    pmax = np.round(rng.uniform(0.8, 1.2, n_gen) * (2.0 * total / n_gen), 0)
    vg = np.round(rng.uniform(1.0, 1.05, n_gen), 3)
    c2 = np.round(rng.uniform(0.01, 0.25, n_gen), 4)
    c1 = np.round(rng.uniform(8.0, 40.0, n_gen), 2)

    bus_type = np.ones(n, dtype=int)
    bus_type[gen_bus] = 2
    bus_type[gen_bus[0]] = 3

    bus_rows = [
        [i + 1, bus_type[i], pd[i], qd[i], 0, 0, 1, 1.0, 0, 0, 1, 1.06, 0.94]
        for i in range(n)
    ]
    pg0 = round(total / n_gen, 1)
    gen_rows = [
        [gen_bus[k] + 1, pg0, 0, round(0.6 * pmax[k], 0), round(-0.4 * pmax[k], 0),
         vg[k], 100, 1, pmax[k], 0]
        for k in range(n_gen)
    ]
    branch_rows = [
        [f + 1, t + 1, r[k], x[k], ch[k], 0, 0, 0, 0, 0, 1, -360, 360]
        for k, (f, t) in enumerate(edges)
    ]
    cost_rows = [[2, 0, 0, 3, c2[k], c1[k], 0] for k in range(n_gen)]
    return bus_rows, gen_rows, branch_rows, cost_rows


def fmt(v) -> str:
    f = float(v)
    return str(int(f)) if f == int(f) else repr(f)


def render(name: str, header: str, bus, gen, branch, gencost) -> str:
    def table(label, rows):
        lines = "\n".join("\t" + "\t".join(fmt(v) for v in row) + ";" for row in rows)
        return f"mpc.{label} = [\n{lines}\n];\n"

    parts = [
        f"function mpc = {name}\n",
        header,
        "\nmpc.version = '2';\nmpc.baseMVA = 100;\n\n",
        "% bus_i type Pd Qd Gs Bs area Vm Va baseKV zone Vmax Vmin\n",
        table("bus", bus),
        "\n% bus Pg Qg Qmax Qmin Vg mBase status Pmax Pmin\n",
        table("gen", gen),
        "\n% fbus tbus r x b rateA rateB rateC ratio angle status angmin angmax\n",
        table("branch", branch),
        "\n% model startup shutdown ncost c2 c1 c0\n",
        table("gencost", gencost),
    ]
    return "".join(parts)


def curate_ratings(name: str, header: str, bus, gen, branch, gencost):
    """Set rateA from the unrated flow envelope over a scenario batch.

    Rating above the per-branch envelope keeps every batch scenario
    feasible after the limits go in; 5 percent headroom on the heaviest
    corridors versus 15 elsewhere makes those corridors bind first when
    the load pattern shifts.
    """
    unrated = render(name, header, bus, gen, branch, gencost)
    tmp = OUT_DIR / f"_{name}_unrated.m"
    tmp.write_text(unrated)
    try:
        net = to_network(parse_matpower(str(tmp)))
        _, yf, yt = admittance_matrices(net)

        def loading(pd, qd):
            res = solve_acopf(net, pd=pd, qd=qd)
            V = res.state.vm * np.exp(1j * res.state.va)
            sf = branch_flow(yf, net.br_from, V)
            st = branch_flow(yt, net.br_to, V)
            return np.maximum(np.abs(sf), np.abs(st)) * net.base_mva

        mva = loading(net.pd, net.qd)
        for s in generate_scenarios(net, 30, sigma=0.15, seed=97):
            mva = np.maximum(mva, loading(s.pd, s.qd))
    finally:
        tmp.unlink()

    n_tight = max(3, net.n_branch // 12)
    tight = set(np.argsort(mva)[::-1][:n_tight].tolist())
    for k, row in enumerate(branch):
        margin = 1.05 if k in tight else 1.15
        row[5] = max(15, int(np.ceil(margin * mva[k])))
    return branch


def verify(path: Path) -> None:
    net = to_network(parse_matpower(str(path)))
    pf = newton_pf(net)
    assert pf.mismatch < 1e-8, f"{path.name}: power flow residual {pf.mismatch}"
    res = solve_acopf(net)
    assert res.feasibility < 1e-6, f"{path.name}: nominal dispatch infeasible"

    scen = generate_scenarios(net, 30, sigma=0.15, seed=97)
    labels = label_scenarios(net, scen)
    bad = [l.scenario_id for l in labels if l.status != "optimal"]
    assert not bad, f"{path.name}: scenarios {bad} did not label optimal"

    for params in (cold_start(net), hot_start(net, newton_pf(net).state)):
        for s in scen:
            solve_dcopf(net, params, pd=s.pd)
    print(f"  {path.name}: {net.n_bus} buses, {net.n_branch} branches, "
          f"{net.n_gen} machines, nominal cost {res.objective:.1f}")


def main() -> int:
    OUT_DIR.mkdir(parents=True, exist_ok=True)
    for name, n, seed, load_scale in CASES:
        header = (f"% Synthetic {n} bus mesh (ring plus chords, seed {seed}).\n"
                  f"% Built by scripts/make_synthetic_cases.py; edit there, not here.\n")
        bus, gen, branch, gencost = build_case(n, seed, load_scale)
        branch = curate_ratings(name, header, bus, gen, branch, gencost)
        path = OUT_DIR / f"{name}.m"
        path.write_text(render(name, header, bus, gen, branch, gencost))
        verify(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
