"""Dispatch solves on cases small enough to verify by hand.

The 2 bus case: one machine, one line, no limits that bind.  The whole
load lands on the machine and the angle follows from the flow equation.

The 3 bus case: triangle with equal coefficients b = 10, machines at
buses 1 and 2 (quadratic costs c2 = 100 $/pu^2 with c1 = 500 and 3000),
200 MW load at bus 3, and a 100 MVA limit on line 1-3 only.  By
symmetry of the triangle an injection at bus 1 splits 2/3 : 1/3 over
the direct and the detour path, so at the unconstrained economic
dispatch (all power from the cheap machine) line 1-3 would carry
4/3 pu and the cap must bind.  Solving the one-dimensional family
pg1 = t gives flows f13 = (t + 2)/3 and the cap t <= 1, so the
constrained optimum sits at pg = (1, 1) with f13 = 1 exactly.
"""

import numpy as np
import pytest

from dcoptune import build_qp, cold_start, solve_dcopf
from dcoptune.exceptions import PrimalInfeasible

from conftest import random_network


def test_two_bus_dispatch(net2):
    sol = solve_dcopf(net2, cold_start(net2))
    np.testing.assert_allclose(sol.pg, [1.0], atol=1e-9)
    np.testing.assert_allclose(sol.flow, [1.0], atol=1e-9)
    # flow = b (th1 - th2), reference angle 0
    np.testing.assert_allclose(sol.theta, [0.0, -1.0 / 9.90099009900990],
                               atol=1e-9)
    # cost 0.1 $/MW^2 * (100 MW)^2 + 10 $/MW * 100 MW
    assert sol.objective == pytest.approx(2000.0, abs=1e-5)
    assert abs(sol.conservation_residual()) < 1e-9


def test_three_bus_congested_dispatch(net3):
    sol = solve_dcopf(net3, cold_start(net3))
    np.testing.assert_allclose(sol.pg, [1.0, 1.0], atol=1e-7)
    np.testing.assert_allclose(sol.flow, [0.0, 1.0, 1.0], atol=1e-7)
    assert sol.objective == pytest.approx(3700.0, abs=1e-3)
    # the line cap is the only binding inequality
    k13 = 1  # branch order: 1-2, 1-3, 2-3
    assert sol.mu_flow_up[k13] > 1.0
    assert sol.mu_flow_up[[0, 2]].max() < 1e-6
    assert sol.mu_flow_lo.max() < 1e-6


def test_three_bus_shadow_price(net3):
    # relaxing the cap by dc shifts generation from machine 2 (marginal
    # cost c1 + 2 c2 pg = 3000 + 200) to machine 1 (500 + 200): the
    # multiplier equals the 2500/(df13/dt = 1/3) per-unit saving: 7500.
    sol = solve_dcopf(net3, cold_start(net3))
    assert sol.mu_flow_up[1] == pytest.approx(7500.0, rel=1e-5)


def test_injection_bias_shifts_balance(net2):
    params = cold_start(net2)
    params.injection_bias[1] = -0.05      # bus 2 absorbs 5 MW less
    sol = solve_dcopf(net2, params)
    np.testing.assert_allclose(sol.pg, [0.95], atol=1e-9)
    assert abs(sol.conservation_residual()) < 1e-10


def test_flow_bias_offsets_flow(net2):
    params = cold_start(net2)
    params.flow_bias[0] = 0.2
    sol = solve_dcopf(net2, params)
    # balance still forces pg = 1; the angle shifts to cancel the offset
    np.testing.assert_allclose(sol.pg, [1.0], atol=1e-9)
    np.testing.assert_allclose(sol.flow, [1.0], atol=1e-9)
    np.testing.assert_allclose(sol.theta[1], -0.8 / 9.90099009900990,
                               atol=1e-9)


def test_load_override(net2):
    sol = solve_dcopf(net2, cold_start(net2), pd=np.array([0.0, 0.7]))
    np.testing.assert_allclose(sol.pg, [0.7], atol=1e-9)


def test_infeasible_load_raises(net2):
    with pytest.raises(PrimalInfeasible):
        solve_dcopf(net2, cold_start(net2), pd=np.array([0.0, 5.0]))


def test_active_set_mask(net3):
    sol = solve_dcopf(net3, cold_start(net3))
    qp = sol.problem
    # row 1 of the flow-upper block is the binding cap
    assert sol.active[qp.rows_flow_up][1]
    assert sol.active.sum() == 1


def test_linear_cost_case_still_solves(tmp_path):
    # all-linear costs make the dispatch an LP; the curvature floor
    # keeps the iteration matrix invertible without moving the optimum
    from dcoptune import parse_matpower, to_network
    path = tmp_path / "lp.m"
    path.write_text("""function mpc = lp
mpc.baseMVA = 100;
mpc.bus = [
 1 3 0 0 0 0 1 1 0 0 1 1.06 0.94;
 2 1 80 10 0 0 1 1 0 0 1 1.06 0.94;
];
mpc.gen = [
 1 40 0 50 -50 1 100 1 100 0;
 2 40 0 50 -50 1 100 1 100 0;
];
mpc.branch = [ 1 2 0.01 0.1 0 0 0 0 0 0 1 -360 360; ];
mpc.gencost = [
 2 0 0 3 0 10 0;
 2 0 0 3 0 30 0;
];
""")
    net = to_network(parse_matpower(str(path)))
    sol = solve_dcopf(net, cold_start(net))
    assert sol.problem.degenerate_lp
    # cheap machine serves everything
    np.testing.assert_allclose(sol.pg, [0.8, 0.0], atol=1e-6)
    assert sol.objective == pytest.approx(10 * 80, rel=1e-6)


def test_pinned_machine_is_held(tmp_path):
    from dcoptune import parse_matpower, to_network
    path = tmp_path / "pin.m"
    path.write_text("""function mpc = pin
mpc.baseMVA = 100;
mpc.bus = [
 1 3 0 0 0 0 1 1 0 0 1 1.06 0.94;
 2 1 100 10 0 0 1 1 0 0 1 1.06 0.94;
];
mpc.gen = [
 1 0 0 50 -50 1 100 1 200 0;
 2 30 0 10 -10 1 100 1 30 30;
];
mpc.branch = [ 1 2 0.01 0.1 0 0 0 0 0 0 1 -360 360; ];
mpc.gencost = [
 2 0 0 3 0.1 20 0;
 2 0 0 3 0.1 5 0;
];
""")
    net = to_network(parse_matpower(str(path)))
    sol = solve_dcopf(net, cold_start(net))
    np.testing.assert_allclose(sol.pg, [0.7, 0.3], atol=1e-8)


def test_conservation_on_random_networks():
    rng = np.random.default_rng(3)
    done = 0
    seed = 0
    while done < 25:
        seed += 1
        net = random_network(seed)
        params = cold_start(net)
        params.injection_bias[:] = rng.normal(0, 0.02, net.n_bus)
        try:
            sol = solve_dcopf(net, params)
        except PrimalInfeasible:
            continue
        assert abs(sol.conservation_residual()) < 1e-9
        done += 1


def test_qp_layout(net3):
    qp = build_qp(net3, cold_start(net3))
    ng, n, m = net3.n_gen, net3.n_bus, net3.n_branch
    assert qp.H.shape == (ng + n, ng + n)
    assert qp.A_eq.shape[0] >= n + 1          # balance rows plus reference
    assert qp.G.shape[0] == 2 * m + 2 * ng
    assert qp.idx_p == slice(0, ng)
