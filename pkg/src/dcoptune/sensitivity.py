"""Derivatives of the dispatch solution with respect to its parameters.

At a solved dispatch the active constraints are pinned, inactive rows
dropped, and the resulting square optimality system differentiated
implicitly.  Two directions are provided: an adjoint (one transpose
solve per seed, cost independent of parameter count) and a forward
directional variant used to cross-check it.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from .dcopf import ACT_TOL, DcOpfSolution
from .exceptions import NotOptimal, SingularKkt


@dataclass
class KktSystem:
    """Factorized reduced optimality system at one dispatch solution."""

    lu: tuple                    # LU of the system matrix
    lu_t: tuple                  # LU of its transpose
    nv: int
    ne: int
    rows_active: np.ndarray      # inequality rows kept (pinned)
    pos_of_row: dict             # inequality row -> position among pinned rows
    n_degenerate: int            # rows dropped because slack and multiplier both vanish
    # solution snapshots the parameter derivatives contract against
    theta: np.ndarray
    y_balance: np.ndarray
    lam_flow_up: np.ndarray      # zero where row inactive
    lam_flow_lo: np.ndarray
    problem: object              # the QpProblem this was assembled from

    @property
    def size(self) -> int:
        return self.nv + self.ne + self.rows_active.size


def assemble_kkt(sol: DcOpfSolution, act_tol: float = ACT_TOL,
                 residual_tol: float = 1e-7) -> KktSystem:
    """Pin active rows, drop the rest, factorize the square system.

    Rows where slack and multiplier vanish together carry no usable
    sensitivity information; they are treated as inactive and counted in
    ``n_degenerate`` so callers can surface a warning.
    """
    qp = sol.problem
    raw = sol.raw
    scale = 1.0 + max(np.abs(qp.q).max(), np.abs(qp.b_eq).max(initial=0.0),
                      np.abs(qp.h).max(initial=0.0))
    if max(raw.res_stationarity, raw.res_primal) > residual_tol * scale:
        raise NotOptimal(
            f"residuals {raw.res_stationarity:.2e}/{raw.res_primal:.2e} "
            f"exceed {residual_tol:.1e} x scale")

    slack_n = raw.slack / (1.0 + np.abs(qp.h))
    lam_n = raw.lam / (1.0 + raw.lam.max(initial=0.0))
    tight = slack_n <= act_tol
    degenerate = tight & (lam_n <= act_tol)
    keep = np.flatnonzero(tight & ~degenerate)

    nv = qp.q.size
    ne = qp.b_eq.size
    Ga = qp.G[keep]
    na = keep.size
    K = np.zeros((nv + ne + na, nv + ne + na))
    K[:nv, :nv] = qp.H
    K[:nv, nv:nv + ne] = qp.A_eq.T
    K[:nv, nv + ne:] = Ga.T
    K[nv:nv + ne, :nv] = qp.A_eq
    K[nv + ne:, :nv] = Ga

    try:
        # singularity is probed explicitly below; scipy's advance warning
        # would only add noise
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", la.LinAlgWarning)
            lu = la.lu_factor(K)
            lu_t = la.lu_factor(K.T)
    except la.LinAlgError as exc:
        raise SingularKkt(str(exc)) from None
    # LU succeeds on nearly singular systems; probe with one solve.
    probe = np.zeros(K.shape[0])
    probe[0] = 1.0
    x = la.lu_solve(lu, probe)
    if not np.all(np.isfinite(x)) or np.abs(K @ x - probe).max() > 1e-6:
        raise SingularKkt("reduced system is numerically singular "
                          "(dependent active rows)")

    m = qp.n_branch
    lam_up = np.where(np.isin(np.arange(0, m), keep), raw.lam[:m], 0.0)
    lam_lo = np.where(np.isin(np.arange(m, 2 * m), keep), raw.lam[m:2 * m], 0.0)

    return KktSystem(
        lu=lu, lu_t=lu_t, nv=nv, ne=ne,
        rows_active=keep,
        pos_of_row={int(r): j for j, r in enumerate(keep)},
        n_degenerate=int(degenerate.sum()),
        theta=sol.theta.copy(),
        y_balance=raw.y[qp.rows_balance].copy(),
        lam_flow_up=lam_up, lam_flow_lo=lam_lo,
        problem=qp)


def _flow_row_weights(kkt: KktSystem, w_act: np.ndarray):
    """Scatter pinned-row components of w back to per-branch up/lo vectors."""
    qp = kkt.problem
    m = qp.n_branch
    wu = np.zeros(m)
    wl = np.zeros(m)
    for r, j in kkt.pos_of_row.items():
        if r < m:
            wu[r] = w_act[j]
        elif r < 2 * m:
            wl[r - m] = w_act[j]
    return wu, wl


def adjoint_gradient(kkt: KktSystem, seed_pg: np.ndarray):
    """Contract d(seed . pg)/d(parameters) through one transpose solve.

    Returns (d_flow_coeff, d_injection_bias, d_flow_bias).
    """
    qp = kkt.problem
    A = qp.incidence
    ng = qp.n_gen

    rhs = np.zeros(kkt.size)
    rhs[:ng] = seed_pg
    w = la.lu_solve(kkt.lu_t, rhs)
    w_z = w[:kkt.nv]
    w_y = w[kkt.nv:kkt.nv + kkt.ne]
    w_act = w[kkt.nv + kkt.ne:]

    w_theta = w_z[qp.idx_theta]
    w_bal = w_y[qp.rows_balance]
    wu, wl = _flow_row_weights(kkt, w_act)

    Awt = A @ w_theta
    Ayb = A @ kkt.y_balance
    Awb = A @ w_bal
    Ath = A @ kkt.theta

    g_coeff = (Awt * Ayb
               - Awt * (kkt.lam_flow_up - kkt.lam_flow_lo)
               + Awb * Ath
               - (wu - wl) * Ath)
    g_ibias = w_bal.copy()
    g_fbias = Awb - wu + wl
    return g_coeff, g_ibias, g_fbias


def forward_directional(kkt: KktSystem, d_coeff: np.ndarray,
                        d_ibias: np.ndarray, d_fbias: np.ndarray) -> np.ndarray:
    """Directional derivative of the machine outputs along (db, dgamma, drho)."""
    qp = kkt.problem
    A = qp.incidence
    m = qp.n_branch
    Ath = A @ kkt.theta

    dF = np.zeros(kkt.size)
    # stationarity, theta block
    dF_theta = A.T @ (d_coeff * (-(A @ kkt.y_balance)
                                 + kkt.lam_flow_up - kkt.lam_flow_lo))
    dF[qp.idx_theta] = dF_theta
    # balance rows
    bal = -(A.T @ (d_coeff * Ath)) - d_ibias - (A.T @ d_fbias)
    dF[kkt.nv:kkt.nv + qp.n_bus] = bal
    # pinned flow rows
    up = d_coeff * Ath + d_fbias
    for r, j in kkt.pos_of_row.items():
        if r < m:
            dF[kkt.nv + kkt.ne + j] = up[r]
        elif r < 2 * m:
            dF[kkt.nv + kkt.ne + j] = -up[r - m]

    dz = -la.lu_solve(kkt.lu, dF)
    return dz[qp.idx_p]
