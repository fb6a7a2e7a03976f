"""Complex-power evaluation and derivatives in polar voltage coordinates.

Shared by the power-flow and AC dispatch solvers.  Matrices are dense
complex; real/imaginary parts are split by the callers.  Derivative
conventions: angles first, magnitudes second, both length n.
"""

from __future__ import annotations

import numpy as np


def bus_injection(ybus, V: np.ndarray) -> np.ndarray:
    """S_i = V_i conj((Y V)_i), the net complex injection at every bus."""
    return V * np.conj(ybus @ V)


def d_bus_injection(ybus, V: np.ndarray):
    """(dS/dva, dS/dvm) as dense complex n-by-n matrices."""
    ibus = ybus @ V
    u = V / np.abs(V)
    diag_v = np.diag(V)
    y = ybus.toarray() if hasattr(ybus, "toarray") else np.asarray(ybus)
    ds_dva = 1j * diag_v @ np.conj(np.diag(ibus) - y @ diag_v)
    ds_dvm = diag_v @ np.conj(y @ np.diag(u)) + np.diag(np.conj(ibus) * u)
    return ds_dva, ds_dvm


def branch_flow(y_side, side_bus: np.ndarray, V: np.ndarray) -> np.ndarray:
    """S_e = V_side(e) conj((Y_side V)_e) for one end of every branch."""
    return V[side_bus] * np.conj(y_side @ V)


def d_branch_flow(y_side, side_bus: np.ndarray, V: np.ndarray):
    """(dS/dva, dS/dvm) for one end of every branch, dense nl-by-n."""
    nl = side_bus.size
    n = V.size
    i_br = y_side @ V
    u = V / np.abs(V)
    y = y_side.toarray() if hasattr(y_side, "toarray") else np.asarray(y_side)

    c_sel = np.zeros((nl, n))
    c_sel[np.arange(nl), side_bus] = 1.0

    ds_dva = 1j * (np.diag(np.conj(i_br)) @ c_sel @ np.diag(V)
                   - np.diag(V[side_bus]) @ np.conj(y) @ np.diag(np.conj(V)))
    ds_dvm = (np.diag(np.conj(i_br)) @ c_sel @ np.diag(u)
              + np.diag(V[side_bus]) @ np.conj(y) @ np.diag(np.conj(u)))
    return ds_dva, ds_dvm


def weighted_hessian(B: np.ndarray, Y, V: np.ndarray):
    """Second derivatives of F = V^T B conj(Y V) with respect to (va, vm).

    B is n-by-r, Y is r-by-n; bus injections use B = diag(weights) with
    Y the bus admittance matrix, branch flows use B = C_side^T diag(w).
    Returns complex blocks (H_aa, H_av, H_vv); the real part of each is
    the Hessian of Re(F), the imaginary part that of Im(F).  The mixed
    block is laid out as d2F/(dva_k dvm_l); the (vm, va) block of the
    full Hessian is its transpose.
    """
    y = Y.toarray() if hasattr(Y, "toarray") else np.asarray(Y)
    u = V / np.abs(V)
    BY = B @ np.conj(y)                    # n x n
    a = B @ np.conj(y @ V)                 # n
    b = np.conj(y).T @ (B.T @ V)           # n

    N = (BY * V[:, None]) * np.conj(V)[None, :]
    H_aa = N + N.T - np.diag(V * a + np.conj(V) * b)

    Nu = (BY * u[:, None]) * np.conj(u)[None, :]
    H_vv = Nu + Nu.T

    M1 = (BY * V[:, None]) * np.conj(u)[None, :]
    M2 = (BY * u[:, None]) * np.conj(V)[None, :]
    H_av = 1j * (M1 - M2.T + np.diag(u * a - np.conj(u) * b))
    return H_aa, H_av, H_vv


def injection_hessian(ybus, V: np.ndarray, wp: np.ndarray, wq: np.ndarray):
    """Hessian blocks of wp . Re(S_bus) + wq . Im(S_bus)."""
    H_aa, H_av, H_vv = weighted_hessian(np.diag(wp - 1j * wq), ybus, V)
    return H_aa.real, H_av.real, H_vv.real


def flow_hessian(y_side, side_bus: np.ndarray, V: np.ndarray,
                 wp: np.ndarray, wq: np.ndarray):
    """Hessian blocks of wp . Re(S_side) + wq . Im(S_side) over branches."""
    nl = side_bus.size
    n = V.size
    c_sel = np.zeros((n, nl))
    c_sel[side_bus, np.arange(nl)] = 1.0
    B = c_sel @ np.diag(wp - 1j * wq)
    H_aa, H_av, H_vv = weighted_hessian(B, y_side, V)
    return H_aa.real, H_av.real, H_vv.real
