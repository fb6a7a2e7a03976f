"""Dense convex-QP solver with exact multiplier recovery.

Primal-dual predictor-corrector interior point on

    min 1/2 z'Hz + q'z   s.t.  A z = b,   G z <= h

Sized for dispatch problems up to a few hundred buses: every linear
solve is a dense LU of the reduced KKT system.  Multipliers come out of
the iteration itself, no post-hoc estimation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from .exceptions import MaxIterations, NumericalFailure, PrimalInfeasible

_TAU = 0.99995          # fraction-to-boundary
_DUAL_BLOWUP = 1e10


@dataclass
class QpSolution:
    z: np.ndarray
    y: np.ndarray            # equality multipliers
    lam: np.ndarray          # inequality multipliers, >= 0
    slack: np.ndarray        # h - Gz, >= 0
    iterations: int
    mu: float                # final average complementarity
    res_stationarity: float
    res_primal: float

    def objective(self, H, q, c0=0.0) -> float:
        return 0.5 * float(self.z @ (H @ self.z)) + float(q @ self.z) + c0


def _kkt_factor(M, A):
    ne = A.shape[0]
    K = np.block([[M, A.T], [A, np.zeros((ne, ne))]])
    try:
        return la.lu_factor(K)
    except la.LinAlgError as exc:
        raise NumericalFailure(str(exc)) from None


def _kkt_backsolve(lu, rx, ry):
    sol = la.lu_solve(lu, np.concatenate([rx, ry]))
    if not np.all(np.isfinite(sol)):
        raise NumericalFailure("non-finite KKT solution")
    return sol[:rx.size], sol[rx.size:]


def _kkt_solve(M, A, rx, ry):
    return _kkt_backsolve(_kkt_factor(M, A), rx, ry)


def solve_qp(H, q, A, b, G, h, tol: float = 1e-9, max_iter: int = 100) -> QpSolution:
    """Solve the QP to `tol` on stationarity, feasibility and complementarity.

    Raises PrimalInfeasible / MaxIterations / NumericalFailure.  H must be
    positive semidefinite with curvature on the null space of A (callers
    add a floor when needed).
    """
    H = np.asarray(H, dtype=float)
    q = np.asarray(q, dtype=float)
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    G = np.asarray(G, dtype=float)
    h = np.asarray(h, dtype=float)
    nv, ne, ni = q.size, b.size, h.size

    scale = 1.0 + max(np.abs(q).max(initial=0.0), np.abs(b).max(initial=0.0),
                      np.abs(h).max(initial=0.0))

    if ni == 0:
        z, y = _kkt_solve(H, A, -q, b)
        return QpSolution(z=z, y=y, lam=np.zeros(0), slack=np.zeros(0),
                          iterations=0, mu=0.0,
                          res_stationarity=float(np.abs(H @ z + q + A.T @ y).max()),
                          res_primal=float(np.abs(A @ z - b).max(initial=0.0)))

    # Starting point: equality-constrained minimizer, then slacks and
    # multipliers shifted together so the complementarity products start
    # balanced (Mehrotra's heuristic with a unit multiplier estimate).
    z, y = _kkt_solve(H + 1e-12 * np.eye(nv), A, -q, b)
    s_hat = h - G @ z
    lam_hat = np.ones(ni)
    s_bar = s_hat + max(0.0, -1.5 * float(s_hat.min()))
    dot = float(s_bar @ lam_hat)
    s = s_bar + 0.5 * dot / float(lam_hat.sum()) + 1e-2 * scale
    lam = lam_hat + 0.5 * dot / max(float(s_bar.sum()), 1.0)

    for it in range(1, max_iter + 1):
        r_d = H @ z + q + A.T @ y + G.T @ lam
        r_p = A @ z - b
        r_g = G @ z + s - h
        mu = float(s @ lam) / ni

        if (np.abs(r_d).max() <= tol * scale
                and np.abs(r_p).max(initial=0.0) <= tol * scale
                and np.abs(r_g).max() <= tol * scale
                and mu <= tol * scale):
            return QpSolution(z=z, y=y, lam=lam, slack=np.maximum(h - G @ z, 0.0),
                              iterations=it - 1, mu=mu,
                              res_stationarity=float(np.abs(r_d).max()),
                              res_primal=float(np.abs(r_p).max(initial=0.0)))

        if max(np.abs(y).max(initial=0.0), lam.max()) > _DUAL_BLOWUP * scale:
            raise PrimalInfeasible(
                f"dual iterates diverged at iteration {it} (mu={mu:.2e})")

        sigma_vec = lam / s
        M = H + (G.T * sigma_vec) @ G
        # one factorization serves the predictor and the corrector
        lu = _kkt_factor(M, A)

        def direction(r_cc):
            rx = -(r_d + G.T @ ((r_cc + lam * r_g) / s))
            dz, dy = _kkt_backsolve(lu, rx, -r_p)
            ds = -r_g - G @ dz
            dlam = (r_cc - lam * ds) / s
            return dz, dy, ds, dlam

        def boundary(v, dv):
            neg = dv < 0
            if not neg.any():
                return np.inf
            return float((-v[neg] / dv[neg]).min())

        # Predictor: pure Newton on the unperturbed conditions.  The
        # quadratic term couples primal and dual blocks, so one common
        # step length keeps the linearization consistent.
        dz_a, dy_a, ds_a, dlam_a = direction(-lam * s)
        a_aff = min(1.0, boundary(s, ds_a), boundary(lam, dlam_a))
        mu_aff = float((s + a_aff * ds_a) @ (lam + a_aff * dlam_a)) / ni
        sigma = min(1.0, max((mu_aff / mu), 0.0) ** 3)

        # Corrector with second-order complementarity term.
        r_cc = sigma * mu - ds_a * dlam_a - lam * s
        dz, dy, ds, dlam = direction(r_cc)

        # Conservative early, sharp near the solution.
        tau = min(_TAU, max(0.99, 1.0 - mu / scale))
        alpha = min(1.0, tau * boundary(s, ds), tau * boundary(lam, dlam))
        z = z + alpha * dz
        s = s + alpha * ds
        y = y + alpha * dy
        lam = lam + alpha * dlam

    raise MaxIterations(f"no convergence in {max_iter} iterations (mu={mu:.2e})")
