"""Newton-Raphson power flow used to anchor the linearization point.

Classic polar formulation: the reference bus holds angle and magnitude,
machine buses hold magnitude and net active injection, the rest hold
both injections.  No reactive-limit enforcement; machine buses keep
their setpoints.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from .exceptions import NotConverged, NumericalFailure
from .network import AcState, NetworkModel, admittance_matrices
from .polar import bus_injection, d_bus_injection


@dataclass
class PowerFlowResult:
    state: AcState
    iterations: int
    mismatch: float


def newton_pf(net: NetworkModel, pd: np.ndarray | None = None,
              qd: np.ndarray | None = None,
              pg: np.ndarray | None = None,
              vg: np.ndarray | None = None,
              tol: float = 1e-8, max_iter: int = 50) -> PowerFlowResult:
    """Solve the power flow for a given dispatch (defaults: case values).

    pg fixes every machine's active output except at the reference bus,
    which absorbs the system imbalance.  Raises NotConverged when the
    mismatch norm stays above `tol` after `max_iter` Newton steps.
    """
    pd = net.pd if pd is None else np.asarray(pd, dtype=float)
    qd = net.qd if qd is None else np.asarray(qd, dtype=float)
    pg = net.gen_pg0 if pg is None else np.asarray(pg, dtype=float)
    vg = net.gen_vg if vg is None else np.asarray(vg, dtype=float)

    n = net.n_bus
    ref = net.ref_bus
    ybus, _, _ = admittance_matrices(net)
    cg = net.gen_incidence()

    is_gen_bus = np.zeros(n, dtype=bool)
    is_gen_bus[net.gen_bus] = True
    pv = np.flatnonzero(is_gen_bus & (np.arange(n) != ref))
    pq = np.flatnonzero(~is_gen_bus & (np.arange(n) != ref))
    non_ref = np.concatenate([pv, pq])

    # Voltage setpoint per machine bus: first machine's value wins.
    vset = np.ones(n)
    for k in range(net.n_gen - 1, -1, -1):
        vset[net.gen_bus[k]] = vg[k]

    vm = np.ones(n)
    vm[pv] = vset[pv]
    vm[ref] = vset[ref] if is_gen_bus[ref] else 1.0
    va = np.zeros(n)

    p_spec = np.asarray(cg @ pg).ravel() - pd
    q_spec = -qd

    mis = np.inf
    for it in range(max_iter + 1):
        V = vm * np.exp(1j * va)
        s = bus_injection(ybus, V)
        f = np.concatenate([s.real[non_ref] - p_spec[non_ref],
                            s.imag[pq] - q_spec[pq]])
        mis = float(np.abs(f).max(initial=0.0))
        if mis <= tol:
            break
        if it == max_iter:
            raise NotConverged(
                f"power flow mismatch {mis:.3e} after {max_iter} iterations")

        ds_dva, ds_dvm = d_bus_injection(ybus, V)
        J = np.block([
            [ds_dva.real[np.ix_(non_ref, non_ref)], ds_dvm.real[np.ix_(non_ref, pq)]],
            [ds_dva.imag[np.ix_(pq, non_ref)], ds_dvm.imag[np.ix_(pq, pq)]],
        ])
        try:
            dx = la.solve(J, -f)
        except la.LinAlgError as exc:
            raise NumericalFailure(f"singular power-flow Jacobian: {exc}") from None
        if not np.all(np.isfinite(dx)):
            raise NumericalFailure("non-finite Newton step")
        va[non_ref] += dx[:non_ref.size]
        vm[pq] += dx[non_ref.size:]

    V = vm * np.exp(1j * va)
    s = bus_injection(ybus, V)

    # Machine outputs consistent with the solved voltages.
    qg = np.zeros(net.n_gen)
    pg_out = pg.astype(float).copy()
    for i in np.concatenate([pv, [ref]]):
        at_bus = np.flatnonzero(net.gen_bus == i)
        if at_bus.size == 0:
            continue
        q_bus = s.imag[i] + qd[i]
        qg[at_bus] = q_bus / at_bus.size
        if i == ref:
            p_bus = s.real[i] + pd[i]
            pg_out[at_bus] = p_bus / at_bus.size

    state = AcState(vm=vm, va=va, pg=pg_out, qg=qg)
    return PowerFlowResult(state=state, iterations=it, mismatch=mis)
