"""Newton power flow against the published 14 bus solution.

The voltage profile in the case file's bus table is the textbook solved
state (magnitudes to 3 decimals, angles to 2): the solver must land on
it when given the case dispatch.
"""

import numpy as np
import pytest

from dcoptune import newton_pf
from dcoptune.exceptions import NotConverged
from dcoptune.network import admittance_matrices
from dcoptune.polar import bus_injection


def test_matches_published_profile(net14):
    res = newton_pf(net14)
    assert res.mismatch < 1e-8
    raw_vm = np.array([1.06, 1.045, 1.01, 1.019, 1.02, 1.07, 1.062,
                       1.09, 1.056, 1.051, 1.057, 1.055, 1.05, 1.036])
    raw_va = np.array([0, -4.98, -12.72, -10.33, -8.78, -14.22, -13.37,
                       -13.36, -14.94, -15.1, -14.79, -15.07, -15.16,
                       -16.04])
    # the table is rounded to 3 decimals / 0.01 degrees
    np.testing.assert_allclose(res.state.vm, raw_vm, atol=2e-3)
    np.testing.assert_allclose(np.degrees(res.state.va), raw_va, atol=2e-2)


def test_balance_holds(net14):
    res = newton_pf(net14)
    ybus, _, _ = admittance_matrices(net14)
    V = res.state.vm * np.exp(1j * res.state.va)
    s = bus_injection(ybus, V)
    cg = net14.gen_incidence()
    # active balance everywhere, reactive balance at load buses
    p_err = np.abs(s.real + net14.pd - cg @ res.state.pg)
    assert p_err.max() < 1e-8
    pv = np.setdiff1d(np.arange(net14.n_bus),
                      np.concatenate([net14.gen_bus, [net14.ref_bus]]))
    q_err = np.abs(s.imag + net14.qd - (cg @ res.state.qg))
    assert q_err[pv].max() < 1e-8


def test_slack_absorbs_imbalance(net14):
    res = newton_pf(net14)
    # total generation covers load plus losses; losses are positive
    losses = res.state.pg.sum() - net14.pd.sum()
    assert 0.0 < losses < 0.2


def test_load_override_changes_state(net2):
    nominal = newton_pf(net2)
    heavier = newton_pf(net2, pd=net2.pd * 1.2, qd=net2.qd * 1.2)
    assert heavier.state.vm[1] < nominal.state.vm[1]
    assert heavier.state.va[1] < nominal.state.va[1]


def test_two_bus_hand_check(net2):
    res = newton_pf(net2)
    # receiving-end power must equal the load exactly
    ybus, _, _ = admittance_matrices(net2)
    V = res.state.vm * np.exp(1j * res.state.va)
    s = bus_injection(ybus, V)
    assert s[1].real == pytest.approx(-1.0, abs=1e-9)
    assert s[1].imag == pytest.approx(-0.2, abs=1e-9)


# the divergent iterates drive the Jacobian toward singularity first
@pytest.mark.filterwarnings("ignore::scipy.linalg.LinAlgWarning")
def test_nonconvergence_reported(net14):
    with pytest.raises(NotConverged):
        newton_pf(net14, pd=net14.pd * 40.0, qd=net14.qd * 40.0)
