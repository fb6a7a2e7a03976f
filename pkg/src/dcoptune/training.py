"""Fitting flow coefficients and bias terms against AC dispatch labels."""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .acpf import newton_pf
from .dcopf import solve_dcopf
from .exceptions import (BadConfig, EmptyEvaluation, LowerLevelInfeasible,
                         PrimalInfeasible)
from .network import DcParameters, NetworkModel, cold_start, hot_start
from .scenarios import Label, Scenario, n_workers
from .sensitivity import adjoint_gradient, assemble_kkt
from .tnc import TncResult, tnc_minimize


@dataclass
class TrainConfig:
    """Knobs for scenario generation, the tuner and the inner solver."""

    n_train: int = 20
    n_test: int = 2000
    sigma: float = 0.15
    seed: int = 0
    init: str = "cold"           # cold | hot | best
    cold_mode: str = "susceptance"
    tol: float = 1e-6
    max_iter: int = 100
    cg_max_iter: int = 12
    hess_step: float = 1e-7
    armijo: float = 1e-4
    curvature: float = 0.9
    act_tol: float = 1e-7
    qp_tol: float = 1e-9
    qp_max_iter: int = 100

    def __post_init__(self):
        if not 0.0 < self.armijo < self.curvature < 1.0:
            raise BadConfig(f"need 0 < armijo < curvature < 1, got "
                            f"{self.armijo} and {self.curvature}")
        if self.sigma < 0:
            raise BadConfig(f"sigma must be nonnegative, got {self.sigma}")
        if self.n_train < 1 or self.n_test < 1:
            raise BadConfig("scenario counts must be at least 1")
        if self.init not in ("cold", "hot", "best"):
            raise BadConfig(f"unknown init mode '{self.init}'")


@dataclass
class SweepDetails:
    """Per-scenario facts from one pass over the training set."""

    used: list[int]
    skipped: list[int]
    active_sets: dict[int, tuple]
    n_degenerate: int


def _pairs(scenarios: list[Scenario], labels: list[Label]):
    by_id = {l.scenario_id: l for l in labels}
    out = []
    for s in scenarios:
        lab = by_id.get(s.id)
        if lab is not None and lab.status == "optimal":
            out.append((s, lab))
    return out


def _sweep(net: NetworkModel, params: DcParameters, scenarios, labels,
           config: TrainConfig, need_grad: bool, workers: int | None = None):
    """Solve every usable scenario once; optionally push the loss seed back.

    The reduction runs in scenario order whatever the worker count, so
    repeated calls with equal inputs produce identical floats.
    """
    pairs = _pairs(scenarios, labels)
    if not pairs:
        raise EmptyEvaluation("no scenario carries an optimal label")
    ng = net.n_gen
    scale = 1.0 / (ng * len(pairs))

    def one(pair):
        s, lab = pair
        try:
            sol = solve_dcopf(net, params, pd=s.pd,
                              tol=config.qp_tol, max_iter=config.qp_max_iter)
        except PrimalInfeasible as exc:
            raise LowerLevelInfeasible(s.id, str(exc)) from exc
        e = sol.pg - lab.pg
        term = float(e @ e)
        if not need_grad:
            return term, None, tuple(np.flatnonzero(sol.active)), 0
        kkt = assemble_kkt(sol, act_tol=config.act_tol)
        g = adjoint_gradient(kkt, 2.0 * scale * e)
        return term, g, tuple(np.flatnonzero(sol.active)), kkt.n_degenerate

    workers = n_workers() if workers is None else max(1, workers)
    if workers == 1:
        results = [one(p) for p in pairs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(one, pairs))

    total = 0.0
    grad = None
    degenerate = 0
    active = {}
    for (s, _), (term, g, rows, ndeg) in zip(pairs, results):
        total += term
        degenerate += ndeg
        active[s.id] = rows
        if g is not None:
            gc, gi, gf = g
            if grad is None:
                grad = [gc.copy(), gi.copy(), gf.copy()]
            else:
                grad[0] += gc
                grad[1] += gi
                grad[2] += gf
    loss_value = scale * total
    grad_vec = None if grad is None else np.concatenate(grad)
    used = [s.id for s, _ in pairs]
    skipped = [l.scenario_id for l in labels if l.status != "optimal"]
    return loss_value, grad_vec, SweepDetails(used, skipped, active, degenerate)


def loss(net: NetworkModel, params: DcParameters, scenarios, labels,
         config: TrainConfig | None = None) -> float:
    """Mean squared setpoint error over machines and usable scenarios."""
    value, _, _ = _sweep(net, params, scenarios, labels,
                         config or TrainConfig(), need_grad=False)
    return value


def loss_details(net: NetworkModel, params: DcParameters, scenarios, labels,
                 config: TrainConfig | None = None):
    value, _, details = _sweep(net, params, scenarios, labels,
                               config or TrainConfig(), need_grad=False)
    return value, details


def loss_gradient(net: NetworkModel, params: DcParameters, scenarios, labels,
                  config: TrainConfig | None = None) -> np.ndarray:
    """Exact gradient of `loss` in the parameter-vector ordering."""
    _, grad, _ = _sweep(net, params, scenarios, labels,
                        config or TrainConfig(), need_grad=True)
    return grad


class _Evaluator:
    """Caches the latest sweeps so paired value/gradient calls cost one."""

    def __init__(self, net, scenarios, labels, config):
        self.net = net
        self.scenarios = scenarios
        self.labels = labels
        self.config = config
        self.cache: dict[bytes, tuple] = {}
        self.n_sweeps = 0
        self.degenerate_seen = 0

    def _get(self, x: np.ndarray):
        key = x.tobytes()
        hit = self.cache.get(key)
        if hit is None:
            params = DcParameters.from_vector(self.net, x)
            try:
                value, grad, details = _sweep(self.net, params,
                                              self.scenarios, self.labels,
                                              self.config, need_grad=True)
            except LowerLevelInfeasible as exc:
                # A trial step can leave the region where the dispatch
                # problem is solvable.  An infinite value makes the line
                # search back off; only a gradient request there (the
                # starting point itself is unsolvable) aborts the run.
                hit = (float("inf"), exc)
            else:
                self.n_sweeps += 1
                self.degenerate_seen += details.n_degenerate
                hit = (value, grad)
            if len(self.cache) > 64:
                self.cache.clear()
            self.cache[key] = hit
        return hit

    def fun(self, x):
        return self._get(x)[0]

    def grad(self, x):
        g = self._get(x)[1]
        if isinstance(g, LowerLevelInfeasible):
            raise g
        return g


@dataclass
class TrainReport:
    """Outcome of one tuning run."""

    params: DcParameters
    initial_params: DcParameters
    init: str
    initial_loss: float
    final_loss: float
    result: TncResult
    loss_curve: list[float]
    n_used: int
    n_skipped: int
    wall_seconds: float
    config: TrainConfig = field(repr=False, default=None)


def initial_parameters(net: NetworkModel, init: str,
                       config: TrainConfig) -> DcParameters:
    if init == "cold":
        return cold_start(net, mode=config.cold_mode)
    if init == "hot":
        pf = newton_pf(net)
        return hot_start(net, pf.state, mode=config.cold_mode)
    raise ValueError(f"unknown initialization {init!r}")


def train(net: NetworkModel, scenarios, labels,
          config: TrainConfig | None = None,
          params0: DcParameters | None = None) -> TrainReport:
    """Tune the DC parameters so its dispatch tracks the labels.

    `init="best"` runs the tuner from both starting points and keeps
    whichever run ends lower.
    """
    config = config or TrainConfig()
    if params0 is None and config.init == "best":
        reports = []
        for init in ("cold", "hot"):
            sub = TrainConfig(**{**config.__dict__, "init": init})
            reports.append(train(net, scenarios, labels, sub))
        return min(reports, key=lambda r: r.final_loss)

    t0 = time.monotonic()
    init = config.init if params0 is None else "given"
    if params0 is None:
        params0 = initial_parameters(net, config.init, config)
    ev = _Evaluator(net, scenarios, labels, config)
    x0 = params0.as_vector()
    res = tnc_minimize(ev.fun, ev.grad, x0,
                       tol=config.tol, max_iter=config.max_iter,
                       cg_max_iter=config.cg_max_iter,
                       hess_step=config.hess_step,
                       armijo=config.armijo, curvature=config.curvature)
    params = DcParameters.from_vector(net, res.x)
    _, details = loss_details(net, params, scenarios, labels, config)
    return TrainReport(
        params=params,
        initial_params=params0,
        init=init,
        initial_loss=ev.fun(x0),
        final_loss=res.fun,
        result=res,
        loss_curve=[h.fun for h in res.history],
        n_used=len(details.used),
        n_skipped=len(details.skipped),
        wall_seconds=time.monotonic() - t0,
        config=config,
    )


@dataclass
class Metrics:
    """Test-set comparison of a DC parameter set against AC labels."""

    mse: float
    max_error: float
    n_scenarios: int
    n_skipped: int
    per_scenario_mse: np.ndarray
    per_scenario_max: np.ndarray
    scenario_ids: list[int]

    def improvement_over(self, other: "Metrics") -> float:
        """Percent MSE reduction relative to `other`."""
        if other.mse == 0:
            return 0.0
        return 100.0 * (1.0 - self.mse / other.mse)


def evaluate(net: NetworkModel, params: DcParameters, scenarios, labels,
             config: TrainConfig | None = None,
             workers: int | None = None) -> Metrics:
    """Score `params` on labelled scenarios the same way the loss does."""
    config = config or TrainConfig()
    pairs = _pairs(scenarios, labels)
    if not pairs:
        raise EmptyEvaluation("no scenario carries an optimal label")
    ng = net.n_gen
    mses = np.empty(len(pairs))
    maxes = np.empty(len(pairs))

    def one(k):
        s, lab = pairs[k]
        try:
            sol = solve_dcopf(net, params, pd=s.pd,
                              tol=config.qp_tol, max_iter=config.qp_max_iter)
        except PrimalInfeasible as exc:
            raise LowerLevelInfeasible(s.id, str(exc)) from exc
        e = sol.pg - lab.pg
        mses[k] = (e @ e) / ng
        maxes[k] = np.abs(e).max()

    workers = n_workers() if workers is None else max(1, workers)
    if workers == 1:
        for k in range(len(pairs)):
            one(k)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(one, range(len(pairs))))

    return Metrics(
        mse=float(mses.mean()),
        max_error=float(maxes.max()),
        n_scenarios=len(pairs),
        n_skipped=len(labels) - len(pairs),
        per_scenario_mse=mses,
        per_scenario_max=maxes,
        scenario_ids=[s.id for s, _ in pairs],
    )
