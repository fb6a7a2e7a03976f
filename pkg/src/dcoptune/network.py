"""Per-unit network model and the derived quantities built from it.

Everything downstream (power flow, dispatch, training) works on
:class:`NetworkModel`: densely indexed buses, status-filtered branches
and machines, all quantities in per-unit on the system MVA base.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import matpower as mp
from .exceptions import IslandedNetwork, MalformedRow, NoReferenceBus, ZeroImpedance
from .matpower import RawCase


@dataclass(frozen=True)
class NetworkModel:
    """One power system in per-unit with dense 0-based indices."""

    name: str
    base_mva: float
    # buses
    bus_ids: np.ndarray          # original ids, position = dense index
    ref_bus: int
    pd: np.ndarray
    qd: np.ndarray
    gs: np.ndarray
    bs: np.ndarray
    vmin: np.ndarray
    vmax: np.ndarray
    # branches (from/to are dense bus indices)
    br_from: np.ndarray
    br_to: np.ndarray
    br_r: np.ndarray
    br_x: np.ndarray
    br_charge: np.ndarray
    br_tap: np.ndarray
    br_shift: np.ndarray         # radians
    br_smax: np.ndarray          # per-unit flow bound (sentinel where the file had none)
    br_theta_max: np.ndarray     # radians, inf = unconstrained
    # machines (one row per in-service generator; several may share a bus)
    gen_bus: np.ndarray
    gen_pmin: np.ndarray
    gen_pmax: np.ndarray
    gen_qmin: np.ndarray
    gen_qmax: np.ndarray
    gen_c2: np.ndarray           # cost in $/h with power in per-unit
    gen_c1: np.ndarray
    gen_c0: np.ndarray
    gen_pg0: np.ndarray          # dispatch recorded in the case file
    gen_vg: np.ndarray

    @property
    def n_bus(self) -> int:
        return self.bus_ids.size

    @property
    def n_branch(self) -> int:
        return self.br_from.size

    @property
    def n_gen(self) -> int:
        return self.gen_bus.size

    def gen_incidence(self) -> sp.csr_matrix:
        """Bus-by-machine incidence: column k has a 1 in row gen_bus[k]."""
        ng = self.n_gen
        return sp.csr_matrix(
            (np.ones(ng), (self.gen_bus, np.arange(ng))),
            shape=(self.n_bus, ng))


@dataclass(frozen=True)
class DcParameters:
    """Trainable linearized-dispatch parameters.

    flow_coeff couples each branch flow to its angle difference,
    flow_bias offsets each branch flow, injection_bias offsets each bus
    balance (it absorbs what the linear model cannot represent, losses
    mostly).
    """

    flow_coeff: np.ndarray       # per branch
    injection_bias: np.ndarray   # per bus
    flow_bias: np.ndarray        # per branch

    def as_vector(self) -> np.ndarray:
        return np.concatenate([self.flow_coeff, self.injection_bias, self.flow_bias])

    @classmethod
    def from_vector(cls, net: NetworkModel, x: np.ndarray) -> "DcParameters":
        m, n = net.n_branch, net.n_bus
        if x.size != 2 * m + n:
            raise MalformedRow(f"parameter vector length {x.size}, expected {2 * m + n}")
        return cls(flow_coeff=np.asarray(x[:m], dtype=float).copy(),
                   injection_bias=np.asarray(x[m:m + n], dtype=float).copy(),
                   flow_bias=np.asarray(x[m + n:], dtype=float).copy())

    def validate(self, net: NetworkModel) -> None:
        if (self.flow_coeff.size, self.injection_bias.size, self.flow_bias.size) != (
                net.n_branch, net.n_bus, net.n_branch):
            raise MalformedRow("parameter block sizes do not match the network")
        for name, v in (("flow_coeff", self.flow_coeff),
                        ("injection_bias", self.injection_bias),
                        ("flow_bias", self.flow_bias)):
            if not np.all(np.isfinite(v)):
                raise MalformedRow(f"{name} contains non-finite entries")


@dataclass
class AcState:
    """One AC operating point: bus voltages plus machine outputs, per-unit."""

    vm: np.ndarray
    va: np.ndarray               # radians
    pg: np.ndarray
    qg: np.ndarray


@dataclass(frozen=True)
class BranchAdmittance:
    """Two-port admittances of every branch, MATPOWER convention.

    y_from/y_to are the series couplings seen from each end (tap and
    phase shift folded in), yc_from/yc_to the remainders so that

        S_from = (y_from + yc_from)* |V_f|^2 - y_from* V_f V_t*

    reproduces the standard two-port flow exactly; mirrored for S_to.
    yff/yft/ytf/ytt are the raw 2x2 blocks used to build Ybus.
    """

    y_from: np.ndarray
    y_to: np.ndarray
    yc_from: np.ndarray
    yc_to: np.ndarray
    yff: np.ndarray
    yft: np.ndarray
    ytf: np.ndarray
    ytt: np.ndarray


def to_network(raw: RawCase, flow_sentinel: float = 100.0) -> NetworkModel:
    """Convert a parsed case to per-unit with dense indices.

    Out-of-service branches and machines are dropped.  Branches with no
    thermal rating get `flow_sentinel` (p.u.) so problem shapes never
    depend on which limits a file happens to define.
    """
    base = raw.base_mva
    bus = raw.bus

    ids = bus[:, mp.BUS_I].astype(int)
    id_to_dense = {orig: k for k, orig in enumerate(ids)}

    ref_rows = np.flatnonzero(bus[:, mp.BUS_TYPE].astype(int) == mp.REF)
    if ref_rows.size != 1:
        raise NoReferenceBus(f"need exactly one reference bus, found {ref_rows.size}")

    br_on = raw.branch[raw.branch[:, mp.BR_STATUS] != 0]
    ge_on = raw.gen[raw.gen[:, mp.GEN_STATUS] != 0]
    cost_on = raw.gencost[raw.gen[:, mp.GEN_STATUS] != 0]
    if ge_on.shape[0] == 0:
        raise NoReferenceBus("no in-service generators")

    def dense(col):
        try:
            return np.array([id_to_dense[int(i)] for i in col])
        except KeyError as exc:
            raise MalformedRow(f"row references unknown bus id {exc}") from None

    f = dense(br_on[:, mp.F_BUS])
    t = dense(br_on[:, mp.T_BUS])
    gbus = dense(ge_on[:, mp.GEN_BUS])

    n = ids.size
    adj = [[] for _ in range(n)]
    for a, b in zip(f, t):
        adj[a].append(b)
        adj[b].append(a)
    seen = np.zeros(n, dtype=bool)
    stack = [0]
    seen[0] = True
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if not seen[v]:
                seen[v] = True
                stack.append(v)
    if not seen.all():
        raise IslandedNetwork(
            f"{int((~seen).sum())} buses unreachable from bus {ids[0]}")

    rate = br_on[:, mp.RATE_A] / base
    smax = np.where(br_on[:, mp.RATE_A] <= 0, flow_sentinel, rate)

    # Angle-difference limits: MATPOWER treats 0 or +-360 as "none".
    amin, amax = br_on[:, mp.ANGMIN], br_on[:, mp.ANGMAX]
    unbounded = ((amin == 0) & (amax == 0)) | (amin <= -360) | (amax >= 360)
    tmax = np.where(unbounded, np.inf,
                    np.minimum(np.abs(amin), np.abs(amax)) * np.pi / 180.0)

    tap = np.where(br_on[:, mp.TAP] == 0, 1.0, br_on[:, mp.TAP])

    c2 = np.empty(ge_on.shape[0])
    c1 = np.empty_like(c2)
    c0 = np.empty_like(c2)
    for k in range(ge_on.shape[0]):
        a2, a1, a0 = mp.poly_coeffs(cost_on, k)
        # cost(p_pu) in $/h equals the file's cost(P_MW)
        c2[k], c1[k], c0[k] = a2 * base * base, a1 * base, a0

    return NetworkModel(
        name=raw.name,
        base_mva=base,
        bus_ids=ids,
        ref_bus=int(ref_rows[0]),
        pd=bus[:, mp.PD] / base,
        qd=bus[:, mp.QD] / base,
        gs=bus[:, mp.GS] / base,
        bs=bus[:, mp.BS] / base,
        vmin=bus[:, mp.VMIN].copy(),
        vmax=bus[:, mp.VMAX].copy(),
        br_from=f,
        br_to=t,
        br_r=br_on[:, mp.BR_R].copy(),
        br_x=br_on[:, mp.BR_X].copy(),
        br_charge=br_on[:, mp.BR_B].copy(),
        br_tap=tap,
        br_shift=br_on[:, mp.SHIFT] * np.pi / 180.0,
        br_smax=smax,
        br_theta_max=tmax,
        gen_bus=gbus,
        gen_pmin=ge_on[:, mp.PMIN] / base,
        gen_pmax=ge_on[:, mp.PMAX] / base,
        gen_qmin=ge_on[:, mp.QMIN] / base,
        gen_qmax=ge_on[:, mp.QMAX] / base,
        gen_c2=c2,
        gen_c1=c1,
        gen_c0=c0,
        gen_pg0=ge_on[:, mp.GEN_PG] / base,
        gen_vg=ge_on[:, mp.GEN_VG].copy(),
    )


def incidence(net: NetworkModel) -> sp.csr_matrix:
    """Branch-by-bus incidence: +1 at the from bus, -1 at the to bus."""
    m = net.n_branch
    rows = np.repeat(np.arange(m), 2)
    cols = np.column_stack([net.br_from, net.br_to]).ravel()
    vals = np.tile([1.0, -1.0], m)
    return sp.csr_matrix((vals, (rows, cols)), shape=(m, net.n_bus))


def branch_admittance(net: NetworkModel) -> BranchAdmittance:
    """Series/shunt admittances of every branch, taps and shifts folded in."""
    z = net.br_r + 1j * net.br_x
    if np.any(z == 0):
        k = int(np.flatnonzero(z == 0)[0])
        raise ZeroImpedance(f"branch {k} has r = x = 0")
    ys = 1.0 / z
    tap = net.br_tap * np.exp(1j * net.br_shift)

    ytt = ys + 0.5j * net.br_charge
    yff = ytt / (tap * np.conj(tap))
    yft = -ys / np.conj(tap)
    ytf = -ys / tap

    y_from = -yft
    y_to = -ytf
    return BranchAdmittance(
        y_from=y_from, y_to=y_to,
        yc_from=yff - y_from, yc_to=ytt - y_to,
        yff=yff, yft=yft, ytf=ytf, ytt=ytt)


def admittance_matrices(net: NetworkModel):
    """(Ybus, Yf, Yt): bus admittance matrix and the from/to flow maps.

    Yf @ V gives the complex current into each branch at its from end;
    Ybus includes branch charging and bus shunts.
    """
    adm = branch_admittance(net)
    n, m = net.n_bus, net.n_branch
    rows = np.arange(m)
    cf = sp.csr_matrix((np.ones(m), (rows, net.br_from)), shape=(m, n))
    ct = sp.csr_matrix((np.ones(m), (rows, net.br_to)), shape=(m, n))
    yf = sp.diags(adm.yff) @ cf + sp.diags(adm.yft) @ ct
    yt = sp.diags(adm.ytf) @ cf + sp.diags(adm.ytt) @ ct
    ysh = sp.diags(net.gs + 1j * net.bs)
    ybus = cf.T @ yf + ct.T @ yt + ysh
    return ybus.tocsr(), yf.tocsr(), yt.tocsr()


def cold_start(net: NetworkModel, mode: str = "susceptance") -> DcParameters:
    """Parameters straight from the branch impedances; both biases zero.

    mode="susceptance" uses the imaginary part of the series admittance,
    x/(r^2+x^2); mode="reactance" uses the classical 1/x.
    """
    if mode == "susceptance":
        z2 = net.br_r ** 2 + net.br_x ** 2
        if np.any(z2 == 0):
            raise ZeroImpedance("branch with r = x = 0")
        coeff = net.br_x / z2
    elif mode == "reactance":
        if np.any(net.br_x == 0):
            raise ZeroImpedance("branch with x = 0")
        coeff = 1.0 / net.br_x
    else:
        raise ValueError(f"unknown cold start mode {mode!r}")
    return DcParameters(flow_coeff=coeff,
                        injection_bias=np.zeros(net.n_bus),
                        flow_bias=np.zeros(net.n_branch))


def _sinc(x: np.ndarray) -> np.ndarray:
    # sin(x)/x with the small-angle series where the quotient loses digits.
    out = np.ones_like(x)
    small = np.abs(x) < 1e-6
    xs = x[~small]
    out[~small] = np.sin(xs) / xs
    out[small] = 1.0 - x[small] ** 2 / 6.0
    return out


def hot_start(net: NetworkModel, state: AcState,
              mode: str = "susceptance") -> DcParameters:
    """Parameters linearized around a solved AC operating point.

    The flow coefficient is scaled by the endpoint voltage magnitudes and
    the sinc of the angle spread; the bias terms absorb the local series
    losses, accumulated per from-bus for the injection offset.
    """
    base = cold_start(net, mode=mode).flow_coeff
    vf = state.vm[net.br_from]
    vt = state.vm[net.br_to]
    dth = state.va[net.br_from] - state.va[net.br_to]

    coeff = base * vf * vt * _sinc(dth)

    g_from = np.real(branch_admittance(net).y_from)
    fbias = g_from * vf * (vf - vt * np.cos(dth))

    ibias = np.zeros(net.n_bus)
    np.add.at(ibias, net.br_from, fbias)
    return DcParameters(flow_coeff=coeff, injection_bias=ibias, flow_bias=fbias)
