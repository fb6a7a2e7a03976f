"""Parameterized linear-network dispatch as a convex QP.

Variables are machine outputs followed by bus angles.  The balance
rows, flow rows and machine boxes are assembled once per (network,
parameters, loads) triple; the raw solver lives in :mod:`dcoptune.qp`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .exceptions import PrimalInfeasible
from .network import DcParameters, NetworkModel, incidence
from .qp import QpSolution, solve_qp

CURVATURE_FLOOR = 1e-8
ACT_TOL = 1e-7


@dataclass
class QpProblem:
    """One dispatch QP plus the structure sensitivity needs.

    Matrices are dense (problems stay small at the sizes this package
    targets).  Row/column layout:

      variables  [p: 0..ng) [theta: ng..ng+n)
      equalities [balance: 0..n) [ref row: n] [pinned machines]
      inequalities [flow upper: 0..m) [flow lower: m..2m) [pmax] [pmin]
    """

    H: np.ndarray
    q: np.ndarray
    c0: float
    A_eq: np.ndarray
    b_eq: np.ndarray
    G: np.ndarray
    h: np.ndarray
    # structure for parameter derivatives
    n_bus: int
    n_branch: int
    n_gen: int
    idx_p: slice
    idx_theta: slice
    rows_balance: slice
    row_ref: int
    rows_flow_up: slice
    rows_flow_lo: slice
    incidence: sp.csr_matrix
    params: DcParameters
    pd: np.ndarray
    free_gens: np.ndarray        # machines with pmin < pmax (others pinned)
    degenerate_lp: bool          # every machine cost is linear
    H_unfloored: np.ndarray = field(repr=False, default=None)


@dataclass
class DcOpfSolution:
    pg: np.ndarray
    theta: np.ndarray
    flow: np.ndarray             # per-branch, from-to positive
    objective: float             # original cost, no curvature floor
    nu: np.ndarray               # balance-row multipliers
    mu_flow_up: np.ndarray
    mu_flow_lo: np.ndarray
    mu_pmax: np.ndarray
    mu_pmin: np.ndarray
    active: np.ndarray           # inequality rows with normalized slack <= ACT_TOL
    problem: QpProblem
    raw: QpSolution

    def conservation_residual(self) -> float:
        """sum(pg) - sum(pd) - sum(injection_bias); zero at any solution."""
        return float(self.pg.sum() - self.problem.pd.sum()
                     - self.problem.params.injection_bias.sum())


def build_qp(net: NetworkModel, params: DcParameters,
             pd: np.ndarray | None = None) -> QpProblem:
    """Assemble the dispatch QP for the given loads (defaults: nominal)."""
    params.validate(net)
    pd = net.pd if pd is None else np.asarray(pd, dtype=float)
    n, m, ng = net.n_bus, net.n_branch, net.n_gen
    nv = ng + n

    A = incidence(net)
    bvec = params.flow_coeff
    lap = (A.T @ sp.diags(bvec) @ A).toarray()
    cg = net.gen_incidence().toarray()

    c2 = net.gen_c2
    h_diag = np.concatenate([np.maximum(2.0 * c2, CURVATURE_FLOOR), np.zeros(n)])
    H = np.diag(h_diag)
    H0 = np.diag(np.concatenate([2.0 * c2, np.zeros(n)]))
    q = np.concatenate([net.gen_c1, np.zeros(n)])

    rhs_bias = A.T @ params.flow_bias

    free = net.gen_pmax - net.gen_pmin > 1e-9
    pinned = np.flatnonzero(~free)

    ne = n + 1 + pinned.size
    A_eq = np.zeros((ne, nv))
    b_eq = np.zeros(ne)
    A_eq[:n, :ng] = cg
    A_eq[:n, ng:] = -lap
    b_eq[:n] = pd + params.injection_bias + rhs_bias
    A_eq[n, ng + net.ref_bus] = 1.0
    for j, k in enumerate(pinned):
        A_eq[n + 1 + j, k] = 1.0
        b_eq[n + 1 + j] = net.gen_pmin[k]

    nfree = int(free.sum())
    ni = 2 * m + 2 * nfree
    G = np.zeros((ni, nv))
    h = np.zeros(ni)
    bA = sp.diags(bvec) @ A
    G[:m, ng:] = bA.toarray()
    h[:m] = net.br_smax - params.flow_bias
    G[m:2 * m, ng:] = -G[:m, ng:]
    h[m:2 * m] = net.br_smax + params.flow_bias
    fidx = np.flatnonzero(free)
    for j, k in enumerate(fidx):
        G[2 * m + j, k] = 1.0
        h[2 * m + j] = net.gen_pmax[k]
        G[2 * m + nfree + j, k] = -1.0
        h[2 * m + nfree + j] = -net.gen_pmin[k]

    return QpProblem(
        H=H, q=q, c0=float(net.gen_c0.sum()),
        A_eq=A_eq, b_eq=b_eq, G=G, h=h,
        n_bus=n, n_branch=m, n_gen=ng,
        idx_p=slice(0, ng), idx_theta=slice(ng, nv),
        rows_balance=slice(0, n), row_ref=n,
        rows_flow_up=slice(0, m), rows_flow_lo=slice(m, 2 * m),
        incidence=A, params=params, pd=pd,
        free_gens=free,
        degenerate_lp=bool(np.all(c2 == 0.0)),
        H_unfloored=H0,
    )


def solve_dcopf(net: NetworkModel, params: DcParameters,
                pd: np.ndarray | None = None,
                tol: float = 1e-9, max_iter: int = 100) -> DcOpfSolution:
    """Build and solve one dispatch; raises on infeasible/failed solves."""
    qp = build_qp(net, params, pd)

    total = qp.pd.sum() + params.injection_bias.sum()
    if total > net.gen_pmax.sum() + 1e-9 or total < net.gen_pmin.sum() - 1e-9:
        raise PrimalInfeasible(
            f"demand plus bias {total:.6g} outside machine capability "
            f"[{net.gen_pmin.sum():.6g}, {net.gen_pmax.sum():.6g}]")

    sol = solve_qp(qp.H, qp.q, qp.A_eq, qp.b_eq, qp.G, qp.h,
                   tol=tol, max_iter=max_iter)

    ng, m, n = qp.n_gen, qp.n_branch, qp.n_bus
    pg = sol.z[qp.idx_p]
    theta = sol.z[qp.idx_theta]
    flow = params.flow_coeff * (qp.incidence @ theta) + params.flow_bias

    nfree = int(qp.free_gens.sum())
    fidx = np.flatnonzero(qp.free_gens)
    mu_pmax = np.zeros(ng)
    mu_pmin = np.zeros(ng)
    mu_pmax[fidx] = sol.lam[2 * m:2 * m + nfree]
    mu_pmin[fidx] = sol.lam[2 * m + nfree:]

    active = sol.slack / (1.0 + np.abs(qp.h)) <= ACT_TOL

    return DcOpfSolution(
        pg=pg, theta=theta, flow=flow,
        objective=sol.objective(qp.H_unfloored, qp.q, qp.c0),
        nu=sol.y[qp.rows_balance],
        mu_flow_up=sol.lam[qp.rows_flow_up],
        mu_flow_lo=sol.lam[qp.rows_flow_lo],
        mu_pmax=mu_pmax, mu_pmin=mu_pmin,
        active=active, problem=qp, raw=sol)
