"""Random load scenarios and their AC ground-truth labels."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .acopf import solve_acopf
from .exceptions import DcoptuneError
from .network import NetworkModel

WORKERS_ENV = "DCOPTUNE_WORKERS"


@dataclass
class Scenario:
    """One load draw: the nominal profile scaled per bus by one factor."""

    id: int
    pd: np.ndarray
    qd: np.ndarray
    factors: np.ndarray = field(default=None, compare=False, repr=False)

    def __eq__(self, other):
        return (isinstance(other, Scenario) and self.id == other.id
                and np.array_equal(self.pd, other.pd)
                and np.array_equal(self.qd, other.qd))


@dataclass
class Label:
    """AC dispatch for one scenario; pg/vm/va only when status is optimal."""

    scenario_id: int
    status: str                  # optimal | infeasible | failed
    objective: float
    pg: np.ndarray | None = None
    vm: np.ndarray | None = None
    va: np.ndarray | None = None

    def __eq__(self, other):
        def same(a, b):
            if a is None or b is None:
                return a is b
            return np.array_equal(a, b)
        return (isinstance(other, Label) and self.scenario_id == other.scenario_id
                and self.status == other.status
                and (self.objective == other.objective
                     or (np.isnan(self.objective) and np.isnan(other.objective)))
                and same(self.pg, other.pg) and same(self.vm, other.vm)
                and same(self.va, other.va))


def n_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def generate_scenarios(net: NetworkModel, n: int, sigma: float = 0.15,
                       seed: int = 0, start_id: int = 0) -> list[Scenario]:
    """Draw `n` load profiles, one N(1, sigma) factor per loaded bus.

    The same factor scales active and reactive demand so power factors
    never move.  Nonpositive draws are resampled; buses with zero load
    keep factor one.  Output is a pure function of the arguments.
    """
    rng = np.random.default_rng(seed)
    loaded = np.flatnonzero((net.pd != 0) | (net.qd != 0))
    out = []
    for k in range(n):
        f = rng.normal(1.0, sigma, size=loaded.size)
        while np.any(f <= 0):
            bad = f <= 0
            f[bad] = rng.normal(1.0, sigma, size=int(bad.sum()))
        factors = np.ones(net.n_bus)
        factors[loaded] = f
        out.append(Scenario(id=start_id + k,
                            pd=net.pd * factors,
                            qd=net.qd * factors,
                            factors=factors))
    return out


def label_scenarios(net: NetworkModel, scenarios: list[Scenario],
                    tol: float = 1e-6, max_iter: int = 200,
                    workers: int | None = None) -> list[Label]:
    """Solve the AC dispatch for every scenario, recording failures.

    Results come back in scenario order regardless of the worker count.
    """
    workers = n_workers() if workers is None else max(1, workers)

    def one(s: Scenario) -> Label:
        try:
            res = solve_acopf(net, s.pd, s.qd, tol=tol, max_iter=max_iter)
        except DcoptuneError as exc:
            status = "infeasible" if "infeasible" in type(exc).__name__.lower() \
                else "failed"
            return Label(scenario_id=s.id, status=status, objective=float("nan"))
        return Label(scenario_id=s.id, status="optimal",
                     objective=res.objective, pg=res.state.pg,
                     vm=res.state.vm, va=res.state.va)

    if workers == 1:
        return [one(s) for s in scenarios]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, scenarios))
