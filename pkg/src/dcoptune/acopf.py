"""Nonlinear AC dispatch solved by a primal-dual interior point method.

Polar voltage coordinates; thermal limits enter squared so every
constraint is smooth.  Dense linear algebra throughout: this solver
exists to label scenarios on study-sized systems, not to scale.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la

from .exceptions import MaxIterations, NumericalFailure, PrimalInfeasible
from .network import AcState, NetworkModel, admittance_matrices
from .polar import (branch_flow, bus_injection, d_branch_flow, d_bus_injection,
                    flow_hessian, injection_hessian)

_XI = 0.99995          # fraction-to-boundary
_SIGMA = 0.1           # centering
_PIN_TOL = 1e-9        # bound pairs tighter than this become equalities


@dataclass
class AcOpfResult:
    state: AcState
    objective: float
    iterations: int
    feasibility: float           # scaled max constraint violation at exit
    stationarity: float


@dataclass
class Violation:
    kind: str
    index: int
    amount: float


@dataclass
class ViolationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    @property
    def worst(self) -> float:
        return max((v.amount for v in self.violations), default=0.0)


class _Formulation:
    """Index bookkeeping for x = [va (no ref); vm; p; q]."""

    def __init__(self, net: NetworkModel):
        self.net = net
        n, ng, m = net.n_bus, net.n_gen, net.n_branch
        self.n, self.ng, self.m = n, ng, m
        self.ybus, self.yf, self.yt = admittance_matrices(net)
        self.cg = net.gen_incidence().toarray()
        self.keep_va = np.delete(np.arange(n), net.ref_bus)
        self.i_vm = n - 1
        self.i_p = self.i_vm + n
        self.i_q = self.i_p + ng
        self.nx = self.i_q + ng

        self.pin_p = np.flatnonzero(net.gen_pmax - net.gen_pmin <= _PIN_TOL)
        self.pin_q = np.flatnonzero(net.gen_qmax - net.gen_qmin <= _PIN_TOL)
        self.free_p = np.flatnonzero(net.gen_pmax - net.gen_pmin > _PIN_TOL)
        self.free_q = np.flatnonzero(net.gen_qmax - net.gen_qmin > _PIN_TOL)
        self.ang = np.flatnonzero(np.isfinite(net.br_theta_max))

    def split(self, x):
        net = self.net
        va = np.zeros(self.n)
        va[self.keep_va] = x[:self.i_vm]
        vm = x[self.i_vm:self.i_p]
        p = x[self.i_p:self.i_q]
        q = x[self.i_q:]
        return va, vm, p, q

    def voltage(self, x):
        va, vm, _, _ = self.split(x)
        return vm * np.exp(1j * va)


def _objective(net, p):
    return float(np.sum(net.gen_c2 * p * p + net.gen_c1 * p + net.gen_c0))


def _eval_constraints(fm: _Formulation, x, pd, qd):
    net = fm.net
    va, vm, p, q = fm.split(x)
    V = vm * np.exp(1j * va)
    s = bus_injection(fm.ybus, V)
    sf = branch_flow(fm.yf, net.br_from, V)
    st = branch_flow(fm.yt, net.br_to, V)

    g = np.concatenate([
        s.real + pd - fm.cg @ p,
        s.imag + qd - fm.cg @ q,
        p[fm.pin_p] - net.gen_pmin[fm.pin_p],
        q[fm.pin_q] - net.gen_qmin[fm.pin_q],
    ])

    lim2 = net.br_smax ** 2
    dang = va[net.br_from[fm.ang]] - va[net.br_to[fm.ang]]
    tmax = net.br_theta_max[fm.ang]
    h = np.concatenate([
        np.abs(sf) ** 2 - lim2,
        np.abs(st) ** 2 - lim2,
        dang - tmax,
        -dang - tmax,
        vm - net.vmax,
        net.vmin - vm,
        p[fm.free_p] - net.gen_pmax[fm.free_p],
        net.gen_pmin[fm.free_p] - p[fm.free_p],
        q[fm.free_q] - net.gen_qmax[fm.free_q],
        net.gen_qmin[fm.free_q] - q[fm.free_q],
    ])
    return g, h, V, sf, st


def _jacobians(fm: _Formulation, x, V, sf, st):
    net = fm.net
    n, ng, m, nx = fm.n, fm.ng, fm.m, fm.nx
    keep = fm.keep_va

    ds_dva, ds_dvm = d_bus_injection(fm.ybus, V)
    jg = np.zeros((2 * n + fm.pin_p.size + fm.pin_q.size, nx))
    jg[:n, :fm.i_vm] = ds_dva.real[:, keep]
    jg[:n, fm.i_vm:fm.i_p] = ds_dvm.real
    jg[:n, fm.i_p:fm.i_q] = -fm.cg
    jg[n:2 * n, :fm.i_vm] = ds_dva.imag[:, keep]
    jg[n:2 * n, fm.i_vm:fm.i_p] = ds_dvm.imag
    jg[n:2 * n, fm.i_q:] = -fm.cg
    for j, k in enumerate(fm.pin_p):
        jg[2 * n + j, fm.i_p + k] = 1.0
    for j, k in enumerate(fm.pin_q):
        jg[2 * n + fm.pin_p.size + j, fm.i_q + k] = 1.0

    dsf_dva, dsf_dvm = d_branch_flow(fm.yf, net.br_from, V)
    dst_dva, dst_dvm = d_branch_flow(fm.yt, net.br_to, V)

    def sq_rows(flows, d_dva, d_dvm):
        out = np.zeros((m, nx))
        out[:, :fm.i_vm] = 2 * (flows.real[:, None] * d_dva.real[:, keep]
                                + flows.imag[:, None] * d_dva.imag[:, keep])
        out[:, fm.i_vm:fm.i_p] = 2 * (flows.real[:, None] * d_dvm.real
                                      + flows.imag[:, None] * d_dvm.imag)
        return out

    na = fm.ang.size
    nfp, nfq = fm.free_p.size, fm.free_q.size
    jh = np.zeros((2 * m + 2 * na + 2 * n + 2 * nfp + 2 * nfq, nx))
    jh[:m] = sq_rows(sf, dsf_dva, dsf_dvm)
    jh[m:2 * m] = sq_rows(st, dst_dva, dst_dvm)

    pos = {b: j for j, b in enumerate(keep)}
    for j, e in enumerate(fm.ang):
        for bus, sgn in ((net.br_from[e], 1.0), (net.br_to[e], -1.0)):
            if bus in pos:
                jh[2 * m + j, pos[bus]] = sgn
                jh[2 * m + na + j, pos[bus]] = -sgn
    r = 2 * m + 2 * na
    jh[r:r + n, fm.i_vm:fm.i_p] = np.eye(n)
    jh[r + n:r + 2 * n, fm.i_vm:fm.i_p] = -np.eye(n)
    r += 2 * n
    for j, k in enumerate(fm.free_p):
        jh[r + j, fm.i_p + k] = 1.0
        jh[r + nfp + j, fm.i_p + k] = -1.0
    r += 2 * nfp
    for j, k in enumerate(fm.free_q):
        jh[r + j, fm.i_q + k] = 1.0
        jh[r + nfq + j, fm.i_q + k] = -1.0
    return jg, jh, (dsf_dva, dsf_dvm, dst_dva, dst_dvm)


def _lagrangian_hessian(fm: _Formulation, V, lam, mu, sf, st, dflows):
    """Exact second derivatives weighted by the current multipliers."""
    net = fm.net
    n, m, nx = fm.n, fm.m, fm.nx
    keep = fm.keep_va

    h_aa, h_av, h_vv = injection_hessian(fm.ybus, V, lam[:n], lam[n:2 * n])

    def add_flow(y_side, side_bus, flows, mu_rows, d_dva, d_dvm):
        nonlocal h_aa, h_av, h_vv
        f_aa, f_av, f_vv = flow_hessian(
            y_side, side_bus, V, 2 * mu_rows * flows.real, 2 * mu_rows * flows.imag)
        h_aa = h_aa + f_aa
        h_av = h_av + f_av
        h_vv = h_vv + f_vv
        jp_a, jp_v = d_dva.real, d_dvm.real
        jq_a, jq_v = d_dva.imag, d_dvm.imag
        for ja, jv in ((jp_a, jp_v), (jq_a, jq_v)):
            wja = ja * mu_rows[:, None]
            h_aa = h_aa + 2 * wja.T @ ja
            h_av = h_av + 2 * wja.T @ jv
            h_vv = h_vv + 2 * (jv * mu_rows[:, None]).T @ jv

    dsf_dva, dsf_dvm, dst_dva, dst_dvm = dflows
    add_flow(fm.yf, net.br_from, sf, mu[:m], dsf_dva, dsf_dvm)
    add_flow(fm.yt, net.br_to, st, mu[m:2 * m], dst_dva, dst_dvm)

    H = np.zeros((nx, nx))
    H[:fm.i_vm, :fm.i_vm] = h_aa[np.ix_(keep, keep)]
    H[:fm.i_vm, fm.i_vm:fm.i_p] = h_av[keep, :]
    H[fm.i_vm:fm.i_p, :fm.i_vm] = h_av[keep, :].T
    H[fm.i_vm:fm.i_p, fm.i_vm:fm.i_p] = h_vv
    H[fm.i_p:fm.i_q, fm.i_p:fm.i_q] = np.diag(2.0 * net.gen_c2)
    return H


def solve_acopf(net: NetworkModel, pd: np.ndarray | None = None,
                qd: np.ndarray | None = None,
                tol: float = 1e-6, max_iter: int = 200) -> AcOpfResult:
    """Minimize generation cost subject to the full AC constraints.

    Flat-voltage, midpoint-dispatch start.  Raises PrimalInfeasible when
    the iteration stalls against the constraints, MaxIterations when the
    cap is hit while still improving, NumericalFailure on breakdown.
    """
    pd = net.pd if pd is None else np.asarray(pd, dtype=float)
    qd = net.qd if qd is None else np.asarray(qd, dtype=float)
    fm = _Formulation(net)
    net_ = net

    x = np.zeros(fm.nx)
    x[fm.i_vm:fm.i_p] = np.clip(1.0, net.vmin, net.vmax)
    x[fm.i_p:fm.i_q] = 0.5 * (net.gen_pmin + net.gen_pmax)
    x[fm.i_q:] = 0.5 * (net.gen_qmin + net.gen_qmax)

    g, h, V, sf, st = _eval_constraints(fm, x, pd, qd)
    niq = h.size
    s = np.maximum(-h, 1.0)
    mu = 1.0 / s
    lam = np.zeros(g.size)

    f_prev = _objective(net_, x[fm.i_p:fm.i_q])
    feascond = np.inf
    gradcond = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        jg, jh, dflows = _jacobians(fm, x, V, sf, st)
        p = x[fm.i_p:fm.i_q]
        df = np.zeros(fm.nx)
        df[fm.i_p:fm.i_q] = 2.0 * net_.gen_c2 * p + net_.gen_c1

        r_d = df + jg.T @ lam + jh.T @ mu
        f_val = _objective(net_, p)

        feascond = max(np.abs(g).max(initial=0.0), max(h.max(initial=0.0), 0.0)) \
            / (1.0 + max(np.abs(x).max(), s.max()))
        gradcond = np.abs(r_d).max() / (1.0 + max(np.abs(lam).max(initial=0.0),
                                                  np.abs(mu).max(initial=0.0)))
        gap = float(s @ mu)
        compcond = gap / (1.0 + np.abs(x).max())
        costcond = abs(f_val - f_prev) / (1.0 + abs(f_prev))
        f_prev = f_val
        if (feascond < tol and gradcond < tol and compcond < tol
                and costcond < tol):
            va, vm, p, q = fm.split(x)
            return AcOpfResult(
                state=AcState(vm=vm.copy(), va=va, pg=p.copy(), qg=q.copy()),
                objective=f_val, iterations=it - 1,
                feasibility=feascond, stationarity=gradcond)

        gamma = _SIGMA * gap / niq
        sigma_vec = mu / s
        r_h = h + s

        hess = _lagrangian_hessian(fm, V, lam, mu, sf, st, dflows)
        M = hess + (jh.T * sigma_vec) @ jh
        N = r_d + jh.T @ (gamma / s - mu + sigma_vec * r_h)

        ne = g.size
        K = np.block([[M, jg.T], [jg, np.zeros((ne, ne))]])
        rhs = np.concatenate([-N, -g])
        if not (np.all(np.isfinite(K)) and np.all(np.isfinite(rhs))):
            # A slack collapsed to zero and poisoned the barrier terms.
            raise NumericalFailure(f"iterates lost interiority at iteration {it}")
        delta = 0.0
        for attempt in range(6):
            try:
                sol = la.lu_solve(la.lu_factor(K), rhs)
            except la.LinAlgError:
                sol = None
            if sol is not None and np.all(np.isfinite(sol)):
                break
            delta = 1e-8 if delta == 0.0 else delta * 100.0
            K[:fm.nx, :fm.nx] = M + delta * np.eye(fm.nx)
        else:
            raise NumericalFailure("KKT system unsolvable after regularization")

        dx = sol[:fm.nx]
        dlam = sol[fm.nx:]
        ds = -r_h - jh @ dx
        dmu = gamma / s - mu + sigma_vec * (r_h + jh @ dx)

        def boundary(v, dv):
            neg = dv < 0
            if not neg.any():
                return 1.0
            return min(1.0, _XI * float((-v[neg] / dv[neg]).min()))

        ap = boundary(s, ds)
        ad = boundary(mu, dmu)
        x = x + ap * dx
        s = s + ap * ds
        lam = lam + ad * dlam
        mu = mu + ad * dmu

        g, h, V, sf, st = _eval_constraints(fm, x, pd, qd)

    if feascond > 1e-4 and gradcond < 1e-2:
        raise PrimalInfeasible(
            f"stalled with constraint violation {feascond:.3e}")
    raise MaxIterations(
        f"no convergence in {max_iter} iterations "
        f"(feas {feascond:.2e}, grad {gradcond:.2e})")


def check_feasibility(net: NetworkModel, state: AcState,
                      pd: np.ndarray | None = None,
                      qd: np.ndarray | None = None,
                      tol: float = 1e-6) -> ViolationReport:
    """Re-evaluate every operating constraint at a given state.

    Amounts are positive violation magnitudes in per-unit (or radians
    for angles); entries below `tol` are not reported.
    """
    pd = net.pd if pd is None else np.asarray(pd, dtype=float)
    qd = net.qd if qd is None else np.asarray(qd, dtype=float)
    ybus, yf, yt = admittance_matrices(net)
    V = state.vm * np.exp(1j * state.va)
    cg = net.gen_incidence()

    rep = ViolationReport()

    def add(kind, values):
        for i in np.flatnonzero(values > tol):
            rep.violations.append(Violation(kind, int(i), float(values[i])))

    s = bus_injection(ybus, V)
    add("balance_p", np.abs(s.real + pd - cg @ state.pg))
    add("balance_q", np.abs(s.imag + qd - cg @ state.qg))
    add("vmax", state.vm - net.vmax)
    add("vmin", net.vmin - state.vm)
    add("pmax", state.pg - net.gen_pmax)
    add("pmin", net.gen_pmin - state.pg)
    add("qmax", state.qg - net.gen_qmax)
    add("qmin", net.gen_qmin - state.qg)
    add("flow_from", np.abs(branch_flow(yf, net.br_from, V)) - net.br_smax)
    add("flow_to", np.abs(branch_flow(yt, net.br_to, V)) - net.br_smax)
    dang = state.va[net.br_from] - state.va[net.br_to]
    lim = net.br_theta_max
    fin = np.isfinite(lim)
    viol = np.where(fin, np.abs(dang) - np.where(fin, lim, 0.0), 0.0)
    add("angle", viol)
    if abs(state.va[net.ref_bus]) > tol:
        rep.violations.append(Violation("ref_angle", net.ref_bus,
                                        float(abs(state.va[net.ref_bus]))))
    return rep
