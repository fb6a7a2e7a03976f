"""Derivatives of the dispatch map, checked against finite differences.

The adjoint and the forward route go through the same factorized
optimality system, so their dot products must agree to rounding; both
must track finite differences wherever the active set holds still.
"""

import numpy as np
import pytest

from dcoptune import adjoint_gradient, assemble_kkt, cold_start, solve_dcopf
from dcoptune.network import DcParameters
from dcoptune.sensitivity import forward_directional

from conftest import random_network


def _perturbed(net, seed=0, scale=0.05):
    rng = np.random.default_rng(seed)
    base = cold_start(net)
    return DcParameters(
        flow_coeff=base.flow_coeff * (1 + scale * rng.uniform(-1, 1, net.n_branch)),
        injection_bias=0.02 * rng.uniform(-1, 1, net.n_bus),
        flow_bias=0.02 * rng.uniform(-1, 1, net.n_branch))


def _fd_gradient(net, params, seed_pg, h=1e-6):
    """Central differences of seed . pg through full re-solves."""
    x0 = params.as_vector()
    g = np.zeros_like(x0)
    for i in range(x0.size):
        for sgn in (+1, -1):
            x = x0.copy()
            x[i] += sgn * h
            sol = solve_dcopf(net, DcParameters.from_vector(net, x))
            g[i] += sgn * float(seed_pg @ sol.pg) / (2 * h)
    return g


@pytest.mark.parametrize("case", ["net2", "net3"])
def test_adjoint_matches_finite_differences(case, request):
    net = request.getfixturevalue(case)
    params = _perturbed(net, seed=1)
    sol = solve_dcopf(net, params)
    kkt = assemble_kkt(sol)
    rng = np.random.default_rng(2)
    seed_pg = rng.normal(size=net.n_gen)
    gc, gi, gf = adjoint_gradient(kkt, seed_pg)
    g = np.concatenate([gc, gi, gf])
    g_fd = _fd_gradient(net, params, seed_pg)
    np.testing.assert_allclose(g, g_fd, atol=5e-7)


def test_adjoint_forward_dot_identity(net3):
    params = _perturbed(net3, seed=3)
    sol = solve_dcopf(net3, params)
    kkt = assemble_kkt(sol)
    rng = np.random.default_rng(4)
    for _ in range(10):
        w = rng.normal(size=net3.n_gen)
        gc, gi, gf = adjoint_gradient(kkt, w)
        dc = rng.normal(size=net3.n_branch)
        di = rng.normal(size=net3.n_bus)
        df = rng.normal(size=net3.n_branch)
        forward = float(w @ forward_directional(kkt, dc, di, df))
        adjoint = float(gc @ dc + gi @ di + gf @ df)
        denom = max(abs(forward), abs(adjoint), 1e-30)
        assert abs(forward - adjoint) / denom < 1e-12


def test_uncongested_structure(net2):
    # no binding flow: dispatch moves only with the total injection bias,
    # so the coefficient and flow-bias directions are flat
    sol = solve_dcopf(net2, cold_start(net2))
    kkt = assemble_kkt(sol)
    gc, gi, gf = adjoint_gradient(kkt, np.ones(1))
    assert abs(gc[0]) < 1e-10
    assert abs(gf[0]) < 1e-10
    np.testing.assert_allclose(gi, [1.0, 1.0], atol=1e-9)


def test_forward_predicts_congested_response(net3):
    # finite-difference the dispatch along a random direction and compare
    params = _perturbed(net3, seed=5)
    sol = solve_dcopf(net3, params)
    kkt = assemble_kkt(sol)
    rng = np.random.default_rng(6)
    dc = rng.normal(size=3)
    di = rng.normal(size=3)
    df = rng.normal(size=3)
    dpg = forward_directional(kkt, dc, di, df)
    h = 1e-6
    x = params.as_vector()
    d = np.concatenate([dc, di, df])
    up = solve_dcopf(net3, DcParameters.from_vector(net3, x + h * d)).pg
    dn = solve_dcopf(net3, DcParameters.from_vector(net3, x - h * d)).pg
    np.testing.assert_allclose(dpg, (up - dn) / (2 * h), atol=5e-6)


def test_dependent_active_rows_raise(net2):
    # pd exactly at the line cap: the active cap row duplicates a
    # balance row, the reduced system loses rank, the probe must object
    import dataclasses

    from dcoptune.exceptions import SingularKkt
    tight = dataclasses.replace(net2, br_smax=np.array([1.0]))
    sol = solve_dcopf(tight, cold_start(tight))
    with pytest.raises(SingularKkt):
        assemble_kkt(sol)


def test_weakly_active_row_dropped_and_counted(net2):
    # same geometry, but with the multiplier at zero the row carries no
    # sensitivity information: it must be dropped, not pinned
    import dataclasses
    tight = dataclasses.replace(net2, br_smax=np.array([1.0]))
    sol = solve_dcopf(tight, cold_start(tight))
    sol.raw.lam[0] = 0.0
    kkt = assemble_kkt(sol)
    assert kkt.n_degenerate == 1
    assert 0 not in kkt.rows_active
    gc, gi, gf = adjoint_gradient(kkt, np.ones(1))
    assert np.isfinite(gc).all() and np.isfinite(gi).all()


def test_dot_identity_on_random_instances():
    rng = np.random.default_rng(11)
    done = 0
    seed = 100
    while done < 20:
        seed += 1
        net = random_network(seed)
        try:
            sol = solve_dcopf(net, _perturbed(net, seed=seed))
        except Exception:
            continue
        kkt = assemble_kkt(sol)
        w = rng.normal(size=net.n_gen)
        gc, gi, gf = adjoint_gradient(kkt, w)
        dc = rng.normal(size=net.n_branch)
        di = rng.normal(size=net.n_bus)
        df = rng.normal(size=net.n_branch)
        forward = float(w @ forward_directional(kkt, dc, di, df))
        adjoint = float(gc @ dc + gi @ di + gf @ df)
        denom = max(abs(forward), abs(adjoint), 1e-30)
        assert abs(forward - adjoint) / denom < 1e-10
        done += 1
