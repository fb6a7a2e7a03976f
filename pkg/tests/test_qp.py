"""Direct checks of the dense interior-point solver."""

import numpy as np
import pytest

from dcoptune import solve_qp
from dcoptune.exceptions import PrimalInfeasible


def _kkt_residuals(H, q, A, b, G, h, sol):
    r_stat = H @ sol.z + q + A.T @ sol.y + G.T @ sol.lam
    r_eq = A @ sol.z - b
    r_in = G @ sol.z + sol.slack - h
    comp = sol.lam * sol.slack
    return (np.abs(r_stat).max(), np.abs(r_eq).max(initial=0.0),
            np.abs(r_in).max(initial=0.0), np.abs(comp).max(initial=0.0))


def test_hand_solved_box_qp():
    # min (z1-1)^2 + (z2-2)^2  s.t.  z1+z2 = 1, z <= 0.8
    # unconstrained of the equality-restricted problem: z = (0, 1),
    # but z2 <= 0.8 binds: z = (0.2, 0.8), multiplier from stationarity.
    H = 2.0 * np.eye(2)
    q = np.array([-2.0, -4.0])
    A = np.array([[1.0, 1.0]])
    b = np.array([1.0])
    G = np.eye(2)
    h = np.array([0.8, 0.8])
    sol = solve_qp(H, q, A, b, G, h)
    np.testing.assert_allclose(sol.z, [0.2, 0.8], atol=1e-8)
    # grad = (2z-2, 2z-4) = (-1.6, -2.4); y + lam2 = 2.4, y = 1.6
    np.testing.assert_allclose(sol.y, [1.6], atol=1e-7)
    np.testing.assert_allclose(sol.lam, [0.0, 0.8], atol=1e-7)
    assert sol.objective(H, q, c0=5.0) == pytest.approx(2.08, abs=1e-6)


def test_equality_only():
    H = np.diag([2.0, 4.0])
    q = np.zeros(2)
    A = np.array([[1.0, 1.0]])
    b = np.array([3.0])
    G = np.zeros((0, 2))
    h = np.zeros(0)
    sol = solve_qp(H, q, A, b, G, h)
    np.testing.assert_allclose(sol.z, [2.0, 1.0], atol=1e-9)


def test_random_qps_satisfy_kkt():
    rng = np.random.default_rng(7)
    for trial in range(30):
        nv = int(rng.integers(2, 12))
        ne = int(rng.integers(0, max(nv // 2, 1)))
        ni = int(rng.integers(1, 2 * nv))
        M = rng.normal(size=(nv, nv))
        H = M @ M.T + 0.5 * np.eye(nv)
        q = rng.normal(size=nv)
        A = rng.normal(size=(ne, nv))
        z_feas = rng.normal(size=nv)
        b = A @ z_feas
        G = rng.normal(size=(ni, nv))
        h = G @ z_feas + rng.uniform(0.1, 2.0, ni)   # strictly feasible point
        sol = solve_qp(H, q, A, b, G, h)
        rs, re, ri, rc = _kkt_residuals(H, q, A, b, G, h, sol)
        scale = 1.0 + np.abs(q).max()
        assert rs <= 1e-6 * scale, f"trial {trial}: stationarity {rs}"
        assert re <= 1e-8, f"trial {trial}: equality {re}"
        assert ri <= 1e-8, f"trial {trial}: inequality {ri}"
        assert rc <= 1e-6 * scale, f"trial {trial}: complementarity {rc}"
        assert sol.lam.min(initial=0.0) >= -1e-10
        assert sol.slack.min(initial=0.0) >= -1e-8


def test_contradictory_inequalities_detected():
    H = np.eye(1)
    q = np.zeros(1)
    A = np.zeros((0, 1))
    b = np.zeros(0)
    G = np.array([[1.0], [-1.0]])
    h = np.array([-1.0, -1.0])        # z <= -1 and z >= 1
    with pytest.raises(PrimalInfeasible):
        solve_qp(H, q, A, b, G, h)


def test_equality_vs_bounds_infeasible():
    # z1 + z2 = 10 but both capped at 1
    H = np.eye(2)
    q = np.zeros(2)
    A = np.array([[1.0, 1.0]])
    b = np.array([10.0])
    G = np.eye(2)
    h = np.ones(2)
    with pytest.raises(PrimalInfeasible):
        solve_qp(H, q, A, b, G, h)


def test_linear_objective_on_polytope():
    # pure LP shape: min -z1 - z2 on the unit box (H = 0)
    H = np.zeros((2, 2))
    q = np.array([-1.0, -1.0])
    A = np.zeros((0, 2))
    b = np.zeros(0)
    G = np.vstack([np.eye(2), -np.eye(2)])
    h = np.array([1.0, 1.0, 0.0, 0.0])
    sol = solve_qp(H, q, A, b, G, h)
    np.testing.assert_allclose(sol.z, [1.0, 1.0], atol=1e-7)
