"""Closed-loop assembly and deterministic simulation of agent networks.

A scenario (agents + graph + protocol mode + horizon) is assembled into one
autonomous linear system whose block structure is recorded, integrated with
a classical fixed-step 4th-order scan, and post-processed into
synchronization metrics and the transformed error coordinates used by the
stability analysis.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from ._kernels import backend_name, rk4_scan, step_scan
from .errors import AssumptionError, DimensionError, DivergenceError, NetsyncError
from .graphs import (
    DiGraph,
    RootSet,
    contains_spanning_tree,
    expanded_laplacian,
    is_rootset_connected,
    laplacian,
    reduced_laplacian,
)
from .homogenization import design_precompensator
from .lti import analyze, spectrum
from .protocols import (
    build_output_protocol,
    build_regulated_protocol,
    design_gains,
)
from .targets import (
    Exosystem,
    TargetModel,
    chain_coefficients,
    derivative_stack_map,
    remodel_exosystem,
    validate_target,
)

# Any state magnitude beyond this aborts the run with diagnostics.
DIVERGENCE_LIMIT = 1e9

DEFAULT_DT = 1e-3
DEFAULT_T = 20.0


@dataclass(frozen=True)
class Scenario:
    """Declarative experiment description."""

    agents: tuple
    graph: DiGraph
    mode: str = "output_sync"
    rootset: RootSet = None
    exosystem: Exosystem = None
    target: TargetModel = None
    k_poles: tuple = None  # None: sized defaults (-2, -3, -5, -6, ...)
    h_poles: tuple = None  # None: sized defaults (-1, -2, -3, -4, ...)
    init_states: dict = None
    T: float = DEFAULT_T
    dt: float = DEFAULT_DT
    seed: int = 0
    label: str = "scenario"

    def __post_init__(self):
        object.__setattr__(self, "agents", tuple(self.agents))
        for name in ("k_poles", "h_poles"):
            poles = getattr(self, name)
            if poles is not None:
                object.__setattr__(self, name, tuple(float(p) for p in poles))
        if self.mode not in ("output_sync", "regulated"):
            raise NetsyncError(f"unknown mode {self.mode!r}")

    @property
    def n_agents(self):
        return len(self.agents)

    def canonical_text(self):
        """Stable text form of everything that affects the trajectory."""
        parts = [f"mode={self.mode}", f"T={self.T!r}", f"dt={self.dt!r}",
                 f"seed={self.seed}", f"k_poles={self.k_poles!r}",
                 f"h_poles={self.h_poles!r}"]
        for agent in self.agents:
            parts.append(f"agent {agent.agent_id}")
            for name in ("A", "B", "C", "Cm"):
                parts.append(f"{name}:{_matrix_text(getattr(agent, name))}")
        parts.append("graph:" + _matrix_text(self.graph.weights))
        if self.rootset is not None:
            parts.append("rootset:" + ",".join(str(i) for i in sorted(self.rootset.members)))
        if self.exosystem is not None:
            parts.append("exo_Ar:" + _matrix_text(self.exosystem.Ar))
            parts.append("exo_Cr:" + _matrix_text(self.exosystem.Cr))
            if self.exosystem.xr0 is not None:
                parts.append("exo_x0:" + _matrix_text(self.exosystem.xr0))
        if self.target is not None:
            for name in ("A", "B", "C"):
                parts.append(f"target_{name}:" + _matrix_text(getattr(self.target, name)))
            parts.append(f"target_nq={self.target.n_q}")
        if self.init_states:
            for key in sorted(self.init_states):
                parts.append(f"x0[{key}]:" + _matrix_text(self.init_states[key]))
        return "\n".join(parts) + "\n"

    def digest(self):
        return hashlib.sha256(self.canonical_text().encode()).hexdigest()


def _matrix_text(m):
    arr = np.atleast_2d(np.asarray(m, dtype=float))
    return ";".join(" ".join(repr(float(v)) for v in row) for row in arr)


@dataclass(frozen=True)
class Trajectory:
    """Time-indexed record of one simulation."""

    times: np.ndarray
    outputs: np.ndarray          # (samples, N)
    y_ref: np.ndarray            # (samples,) or None
    states: np.ndarray           # (samples, total state dim)
    mode: str
    metadata: dict = field(default_factory=dict)

    @property
    def n_agents(self):
        return self.outputs.shape[1]


@dataclass(frozen=True)
class ProofDiagnostics:
    """Transformed error coordinates (e, ebar) and their norm series.

    ``e`` and ``ebar`` have shape (samples, blocks, n_q): one block per
    agent difference in output mode, one per agent in regulated mode.
    """

    times: np.ndarray
    e: np.ndarray
    ebar: np.ndarray
    e_norms: np.ndarray
    ebar_norms: np.ndarray


class AssembledNetwork:
    """One autonomous closed loop plus its block bookkeeping."""

    def __init__(self, scenario, target, gains, precomps, certificates,
                 protocols, a_cl, plant_slices, ctrl_slices, exo_slice,
                 output_rows, yr_row, lap, lap_variant, xbar_maps,
                 xhat_maps, chi_maps, ref_chain_map):
        self.scenario = scenario
        self.target = target
        self.K, self.H = gains
        self.precompensators = precomps
        self.certificates = certificates
        self.protocols = protocols
        self.A_cl = a_cl
        self.plant_slices = plant_slices
        self.ctrl_slices = ctrl_slices
        self.exo_slice = exo_slice
        self.output_rows = output_rows
        self.yr_row = yr_row
        self.laplacian = lap
        self.laplacian_variant = lap_variant  # reduced (output) / expanded (regulated)
        self.xbar_maps = xbar_maps
        self.xhat_maps = xhat_maps
        self.chi_maps = chi_maps
        self.ref_chain_map = ref_chain_map

    @property
    def dim(self):
        return self.A_cl.shape[0]


def check_scenario(s: Scenario):
    """All model and graph-class diagnostics for a scenario.

    Returns (diagnostics, reports, target, n_d_max); diagnostics is empty
    when the scenario is admissible.
    """
    diagnostics = []
    reports = {}
    for agent in s.agents:
        if agent.p != 1:
            diagnostics.append(f"agent {agent.agent_id}: only single-output agents are supported")
            continue
        report = analyze(agent)
        reports[agent.agent_id] = report
        diagnostics.extend(report.problems)

    if s.graph.n != s.n_agents:
        diagnostics.append(
            f"graph has {s.graph.n} nodes but the scenario has {s.n_agents} agents")

    if s.mode == "output_sync":
        if not contains_spanning_tree(s.graph):
            diagnostics.append("graph: no directed spanning tree (not admissible for output sync)")
    else:
        if s.rootset is None:
            diagnostics.append("regulated mode needs a root set")
        elif not is_rootset_connected(s.graph, s.rootset):
            diagnostics.append("graph: not every node is reachable from the root set")
        if s.exosystem is None:
            diagnostics.append("regulated mode needs an exosystem")
        else:
            diagnostics.extend(s.exosystem.check())

    target = None
    n_d_max = 0
    if not diagnostics:
        if s.mode == "output_sync":
            if s.target is None:
                diagnostics.append("output_sync mode needs a target model")
            else:
                target = s.target
        else:
            target = s.target
            if target is None:
                try:
                    target = remodel_exosystem(s.exosystem, s.agents)
                except NetsyncError as exc:
                    diagnostics.append(f"exosystem remodeling failed: {exc}")
            else:
                exo_eigs = spectrum(s.exosystem.Ar)
                tgt_eigs = list(spectrum(target.A))
                for lam in exo_eigs:
                    hit = min(range(len(tgt_eigs)),
                              key=lambda i: abs(tgt_eigs[i] - lam), default=None)
                    if hit is None or abs(tgt_eigs[hit] - lam) > 1e-8:
                        diagnostics.append(
                            f"target override cannot reproduce exosystem mode {lam}")
                        break
                    tgt_eigs.pop(hit)
    if target is not None:
        validation = validate_target(target, s.agents)
        n_d_max = validation.n_d_max
        diagnostics.extend(validation.problems)
    return diagnostics, reports, target, n_d_max


def assemble_network(s: Scenario):
    """Build the closed-loop system for a scenario.

    Raises AssumptionError when any model or graph-class check fails and
    propagates homogenization rejections.
    """
    diagnostics, _, target, _ = check_scenario(s)
    if diagnostics:
        raise AssumptionError("scenario violates assumptions", diagnostics)

    gains = design_gains(target, s.k_poles, s.h_poles)
    k, h = gains
    _, _, obs = chain_coefficients(target)
    obs_inv = np.linalg.inv(obs)
    nq = target.n_q

    precomps, certs, protocols = [], [], []
    iota = s.rootset.indicator(s.n_agents) if s.mode == "regulated" else None
    for idx, agent in enumerate(s.agents):
        pre, cert = design_precompensator(agent, target)
        if cert.markov_error > 1e-6:
            raise AssumptionError(
                f"agent {agent.agent_id}: homogenization mismatch "
                f"(markov error {cert.markov_error:.3e})")
        if s.mode == "output_sync":
            proto = build_output_protocol(agent.agent_id, pre, target, k, h)
        else:
            proto = build_regulated_protocol(agent.agent_id, pre, target, k, h,
                                             int(iota[idx]))
        precomps.append(pre)
        certs.append(cert)
        protocols.append(proto)

    plant_slices, ctrl_slices = [], []
    pos = 0
    for agent, proto in zip(s.agents, protocols):
        plant_slices.append(slice(pos, pos + agent.n))
        pos += agent.n
        ctrl_slices.append(slice(pos, pos + proto.state_dim))
        pos += proto.state_dim
    exo_slice = None
    if s.mode == "regulated":
        exo_slice = slice(pos, pos + s.exosystem.r)
        pos += s.exosystem.r
    dim = pos

    lap = laplacian(s.graph)
    if s.mode == "output_sync":
        zeta_matrix = lap
        lap_variant = reduced_laplacian(lap)
    else:
        zeta_matrix = expanded_laplacian(s.graph, s.rootset)
        lap_variant = zeta_matrix

    a_cl = np.zeros((dim, dim))
    for i, (agent, proto) in enumerate(zip(s.agents, protocols)):
        sx, sc = plant_slices[i], ctrl_slices[i]
        a_cl[sx, sx] += agent.A + agent.B @ proto.D_uz @ agent.Cm
        a_cl[sx, sc] += agent.B @ proto.C_u
        a_cl[sc, sc] += proto.A_state
        a_cl[sc, sx] += proto.B_z @ agent.Cm
        for j, other in enumerate(s.agents):
            w_zeta = zeta_matrix[i, j]
            if w_zeta != 0.0:
                a_cl[sc, plant_slices[j]] += w_zeta * (proto.B_zeta @ other.C)
            w_hat = lap[i, j]
            if w_hat != 0.0:
                a_cl[sc, ctrl_slices[j]] += w_hat * (proto.B_zetahat @ protocols[j].C_eta)
        if s.mode == "regulated" and iota[i]:
            a_cl[sc, exo_slice] += -iota[i] * (proto.B_zeta @ s.exosystem.Cr)
    if exo_slice is not None:
        a_cl[exo_slice, exo_slice] = s.exosystem.Ar

    output_rows = np.zeros((s.n_agents, dim))
    for i, agent in enumerate(s.agents):
        output_rows[i, plant_slices[i]] = agent.C[0]
    yr_row = None
    ref_chain_map = None
    if s.mode == "regulated":
        yr_row = np.zeros(dim)
        yr_row[exo_slice] = s.exosystem.Cr[0]
        ref_chain_map = np.zeros((nq, dim))
        ref_chain_map[:, exo_slice] = obs_inv @ derivative_stack_map(s.exosystem, nq)

    xbar_maps, xhat_maps, chi_maps = [], [], []
    for i, (agent, pre, proto) in enumerate(zip(s.agents, precomps, protocols)):
        xbar = np.zeros((nq, dim))
        xbar[:, plant_slices[i]] = obs_inv @ pre.chain_from_x
        xi = pre.xi_dim
        if xi:
            ctrl_start = ctrl_slices[i].start
            xbar[:, ctrl_start:ctrl_start + xi] = obs_inv @ pre.chain_from_xi[:, :xi]
        xbar_maps.append(xbar)
        xhat = np.zeros((nq, dim))
        xhat[:, ctrl_slices[i].start + xi:ctrl_slices[i].start + xi + nq] = np.eye(nq)
        xhat_maps.append(xhat)
        chi = np.zeros((nq, dim))
        chi[:, ctrl_slices[i].start + xi + nq:ctrl_slices[i].stop] = np.eye(nq)
        chi_maps.append(chi)

    return AssembledNetwork(
        scenario=s, target=target, gains=gains, precomps=precomps,
        certificates=certs, protocols=protocols, a_cl=a_cl,
        plant_slices=plant_slices, ctrl_slices=ctrl_slices,
        exo_slice=exo_slice, output_rows=output_rows, yr_row=yr_row,
        lap=lap, lap_variant=lap_variant, xbar_maps=xbar_maps,
        xhat_maps=xhat_maps, chi_maps=chi_maps, ref_chain_map=ref_chain_map,
    )


def build_initial_state(net: AssembledNetwork, s: Scenario):
    """Initial closed-loop state: explicit per-agent vectors where given,
    uniform [-1, 1] draws from the scenario seed otherwise; controller
    states start at zero."""
    rng = np.random.default_rng(s.seed)
    x0 = np.zeros(net.dim)
    given = s.init_states or {}
    for agent, sl in zip(s.agents, net.plant_slices):
        if agent.agent_id in given:
            vec = np.asarray(given[agent.agent_id], dtype=float).reshape(-1)
            if vec.size != agent.n:
                raise DimensionError(f"initial state for agent {agent.agent_id} "
                                     f"has size {vec.size}, expected {agent.n}")
            x0[sl] = vec
        else:
            x0[sl] = rng.uniform(-1.0, 1.0, size=agent.n)
    if net.exo_slice is not None:
        if s.exosystem.xr0 is not None:
            x0[net.exo_slice] = s.exosystem.xr0
        else:
            x0[net.exo_slice] = rng.uniform(-1.0, 1.0, size=s.exosystem.r)
    return x0


def _n_steps(T, dt):
    return int(math.floor(T / dt + 1e-9))


def simulate(net: AssembledNetwork, s: Scenario = None):
    """Integrate the assembled loop over the scenario horizon.

    Classical 4th-order fixed-step integration; deterministic given the
    scenario (seeded initial conditions included).  Raises DivergenceError
    at the first non-finite or runaway sample.
    """
    s = net.scenario if s is None else s
    x0 = build_initial_state(net, s)
    n_steps = _n_steps(s.T, s.dt)
    out = np.empty((n_steps + 1, net.dim))
    status = rk4_scan(net.A_cl, x0, s.dt, n_steps, out, DIVERGENCE_LIMIT)
    if status >= 0:
        raise DivergenceError(
            f"state diverged at t={status * s.dt:.6g} "
            f"(|state| > {DIVERGENCE_LIMIT:g} or non-finite)",
            time=status * s.dt)
    return _package(net, s, out, n_steps, integrator="rk4")


def simulate_expm(net: AssembledNetwork, s: Scenario = None, max_dim=200):
    """Exact cross-check: step with the matrix exponential of A dt."""
    s = net.scenario if s is None else s
    if net.dim > max_dim:
        raise DimensionError(f"matrix-exponential stepping capped at {max_dim} states")
    x0 = build_initial_state(net, s)
    n_steps = _n_steps(s.T, s.dt)
    phi = scipy.linalg.expm(net.A_cl * s.dt)
    out = np.empty((n_steps + 1, net.dim))
    status = step_scan(phi, x0, out, DIVERGENCE_LIMIT)
    if status >= 0:
        raise DivergenceError(f"state diverged at t={status * s.dt:.6g}",
                              time=status * s.dt)
    return _package(net, s, out, n_steps, integrator="expm")


def _package(net, s, states, n_steps, integrator):
    times = np.arange(n_steps + 1) * s.dt
    outputs = states @ net.output_rows.T
    y_ref = states @ net.yr_row if net.yr_row is not None else None
    return Trajectory(
        times=times, outputs=outputs, y_ref=y_ref, states=states,
        mode=s.mode,
        metadata={
            "scenario_hash": s.digest(),
            "seed": s.seed,
            "integrator": integrator,
            "backend": backend_name(),
            "label": s.label,
        },
    )


def run_scenario(s: Scenario):
    """Assemble and simulate in one call."""
    return simulate(assemble_network(s), s)


def output_sync_error(traj: Trajectory):
    """Worst pairwise output disagreement max_{i,j} |y_i(t) - y_j(t)|."""
    return traj.outputs.max(axis=1) - traj.outputs.min(axis=1)


def regulation_error(traj: Trajectory):
    """Worst tracking error max_i |y_i(t) - y_r(t)|."""
    if traj.y_ref is None:
        raise NetsyncError("trajectory has no reference output")
    return np.max(np.abs(traj.outputs - traj.y_ref[:, None]), axis=1)


def error_series(traj: Trajectory):
    return output_sync_error(traj) if traj.mode == "output_sync" else regulation_error(traj)


def proof_coordinates(traj: Trajectory, s: Scenario):
    """Error coordinates in which the closed loop is block-triangular.

    Output mode: differences against the last agent, e = xbar - chi and
    ebar = (Lred (x) I) xbar - xhat over those differences.  Regulated mode:
    deviations from the reference chain state, e = xtil - chi and
    ebar = (Lexp (x) I) xtil - xhat.  Both norm series decay exponentially
    for admissible scenarios, which is what makes the protocols work.
    """
    net = assemble_network(s)
    states = traj.states
    n_samples = states.shape[0]
    n = s.n_agents
    nq = net.target.n_q
    xbar = np.stack([states @ m.T for m in net.xbar_maps], axis=1)
    xhat = np.stack([states @ m.T for m in net.xhat_maps], axis=1)
    chi = np.stack([states @ m.T for m in net.chi_maps], axis=1)

    if s.mode == "output_sync":
        if n < 2:
            zero = np.zeros(n_samples)
            empty = np.zeros((n_samples, 0, nq))
            return ProofDiagnostics(traj.times, empty, empty, zero, zero)
        xbar_o = xbar[:, :-1, :] - xbar[:, -1:, :]
        xhat_o = xhat[:, :-1, :] - xhat[:, -1:, :]
        chi_o = chi[:, :-1, :] - chi[:, -1:, :]
        lred = net.laplacian_variant
        e = xbar_o - chi_o
        ebar = np.einsum("ij,tjk->tik", lred, xbar_o) - xhat_o
    else:
        ref = states @ net.ref_chain_map.T
        xtil = xbar - ref[:, None, :]
        e = xtil - chi
        ebar = np.einsum("ij,tjk->tik", net.laplacian_variant, xtil) - xhat
    e_norms = np.linalg.norm(e.reshape(n_samples, -1), axis=1)
    ebar_norms = np.linalg.norm(ebar.reshape(n_samples, -1), axis=1)
    return ProofDiagnostics(traj.times, e, ebar, e_norms, ebar_norms)


def trajectory_to_csv(traj: Trajectory):
    """CSV export: t,y_1,...,y_N[,y_r],e_sync|e_reg with full precision."""
    n = traj.n_agents
    header = ["t"] + [f"y_{i + 1}" for i in range(n)]
    if traj.mode == "regulated":
        header.append("y_r")
        err = regulation_error(traj)
        err_name = "e_reg"
    else:
        err = output_sync_error(traj)
        err_name = "e_sync"
    header.append(err_name)
    lines = [",".join(header)]
    for idx in range(traj.times.size):
        row = [repr(float(traj.times[idx]))]
        row.extend(repr(float(v)) for v in traj.outputs[idx])
        if traj.mode == "regulated":
            row.append(repr(float(traj.y_ref[idx])))
        row.append(repr(float(err[idx])))
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"
