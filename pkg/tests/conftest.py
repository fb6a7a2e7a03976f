"""Shared fixtures: parsed cases and small random-network builders."""

from pathlib import Path

import numpy as np
import pytest

from dcoptune import parse_matpower, to_network
from dcoptune.network import NetworkModel

CASE_DIR = Path(__file__).resolve().parents[1] / "data" / "cases"


def case_path(name: str) -> str:
    return str(CASE_DIR / f"{name}.m")


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Print the acceptance verdict lines collected during the run."""
    lines = getattr(config, "acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)


def _load(name: str) -> NetworkModel:
    return to_network(parse_matpower(case_path(name)))


@pytest.fixture(scope="session")
def net2():
    return _load("case2")


@pytest.fixture(scope="session")
def net3():
    return _load("case3")


@pytest.fixture(scope="session")
def net14():
    return _load("case14")


@pytest.fixture(scope="session")
def net14r():
    return _load("case14_rated")


@pytest.fixture(scope="session")
def net39():
    return _load("case39")


@pytest.fixture(scope="session")
def net57():
    return _load("case57")


@pytest.fixture(scope="session")
def net118():
    return _load("case118")


def random_network(seed: int) -> NetworkModel:
    """A small connected random system, 2 to 14 buses.

    Generation capacity always covers 1.5x the total load and the ring
    backbone is rated generously, so most draws are feasible; chords are
    rated tighter so some instances carry binding flows.
    """
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 15))
    edges = [(i, i + 1) for i in range(n - 1)]
    if n > 2 and rng.random() < 0.8:
        edges.append((0, n - 1))
    for _ in range(int(rng.integers(0, n // 3 + 1))):
        i, j = sorted(rng.choice(n, 2, replace=False).tolist())
        if j - i >= 2 and (i, j) not in edges:
            edges.append((i, j))
    nl = len(edges)

    pd = np.where(rng.random(n) < 0.8, rng.uniform(0.1, 0.8, n), 0.0)
    qd = pd * rng.uniform(0.1, 0.4, n)
    n_gen = int(rng.integers(1, min(n, 4) + 1))
    gen_bus = np.sort(rng.choice(n, n_gen, replace=False))
    pmax = np.full(n_gen, 1.5 * pd.sum() / n_gen + 0.5)

    ring = np.array([1 if (f + 1 == t or (f, t) == (0, n - 1)) else 0
                     for f, t in edges], dtype=bool)
    smax = np.where(ring, 50.0, rng.uniform(0.4, 2.0, nl))

    return NetworkModel(
        name=f"random{seed}",
        base_mva=100.0,
        bus_ids=np.arange(1, n + 1),
        ref_bus=int(gen_bus[0]),
        pd=pd, qd=qd,
        gs=np.zeros(n), bs=np.zeros(n),
        vmin=np.full(n, 0.94), vmax=np.full(n, 1.06),
        br_from=np.array([f for f, _ in edges]),
        br_to=np.array([t for _, t in edges]),
        br_r=rng.uniform(0.005, 0.05, nl),
        br_x=rng.uniform(0.05, 0.3, nl),
        br_charge=np.zeros(nl),
        br_tap=np.zeros(nl),
        br_shift=np.zeros(nl),
        br_smax=smax,
        br_theta_max=np.full(nl, np.inf),
        gen_bus=gen_bus,
        gen_pmin=np.zeros(n_gen),
        gen_pmax=pmax,
        gen_qmin=np.full(n_gen, -10.0),
        gen_qmax=np.full(n_gen, 10.0),
        gen_c2=rng.uniform(0.01, 0.3, n_gen) * 1e4,
        gen_c1=rng.uniform(5.0, 40.0, n_gen) * 1e2,
        gen_c0=np.zeros(n_gen),
        gen_pg0=np.full(n_gen, pd.sum() / n_gen),
        gen_vg=np.full(n_gen, 1.02),
    )
