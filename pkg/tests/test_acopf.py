"""Full AC optimal power flow on the 14-bus case.

The 14-bus cost optimum is a widely reproduced figure: 8081.5 $/hr with
machine 1 carrying most of the load.  Matching it to four significant
digits checks the parser, the admittance assembly, the polar derivatives
and the interior-point iteration together.
"""

import numpy as np
import pytest

from dcoptune.acopf import check_feasibility, solve_acopf
from dcoptune.exceptions import MaxIterations, PrimalInfeasible
from dcoptune.network import AcState


@pytest.fixture(scope="module")
def solved(net14):
    return solve_acopf(net14)


def test_known_cost_optimum(net14, solved):
    assert solved.objective == pytest.approx(8081.52, rel=1e-4)
    # machine 1 is by far the cheapest and carries most of the demand
    pg_mw = solved.state.pg * net14.base_mva
    assert pg_mw[0] == pytest.approx(194.33, abs=0.05)
    assert solved.feasibility < 1e-6
    assert solved.stationarity < 1e-6


def test_solution_is_operationally_clean(net14, solved):
    rep = check_feasibility(net14, solved.state)
    assert rep.ok, rep.violations
    s = solved.state
    assert np.all(s.pg >= net14.gen_pmin - 1e-8)
    assert np.all(s.pg <= net14.gen_pmax + 1e-8)
    assert np.all(s.vm >= net14.vmin - 1e-8)
    assert np.all(s.vm <= net14.vmax + 1e-8)
    assert abs(s.va[net14.ref_bus]) < 1e-12


def test_cost_rises_with_load(net14, solved):
    heavier = solve_acopf(net14, pd=net14.pd * 1.1, qd=net14.qd * 1.1)
    assert heavier.objective > solved.objective
    assert heavier.objective == pytest.approx(9127.98, rel=1e-3)


def test_tampered_state_is_flagged(net14, solved):
    s = solved.state
    bad = AcState(vm=s.vm.copy(), va=s.va.copy(),
                  pg=s.pg.copy(), qg=s.qg.copy())
    bad.vm[5] = net14.vmax[5] + 0.05
    rep = check_feasibility(net14, bad)
    assert not rep.ok
    kinds = {(v.kind, v.index) for v in rep.violations}
    assert ("vmax", 5) in kinds

    bad2 = AcState(vm=s.vm.copy(), va=s.va.copy(),
                   pg=np.zeros_like(s.pg), qg=s.qg.copy())
    rep2 = check_feasibility(net14, bad2)
    # dropping all generation breaks active-power balance wherever
    # a machine was producing
    assert any(v.kind == "balance_p" for v in rep2.violations)
    assert rep2.worst > 1.0


def test_unservable_load_does_not_pretend(net14):
    # ten times the load exceeds total machine capability
    with pytest.raises((PrimalInfeasible, MaxIterations)):
        solve_acopf(net14, pd=net14.pd * 10.0, qd=net14.qd * 10.0)
