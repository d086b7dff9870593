"""Pre-compensator synthesis: reshape each agent into the target model.

The construction is observer + integrator extension + feedback
linearization + internal stabilization:

  (a) a state estimate is formed from the local measurement z (identity
      pass-through when the full state is measured, a Luenberger observer
      otherwise);
  (b) n_q - r input integrators raise the relative degree r of the agent to
      the target's uniform rank n_q;
  (c) the extended input-output chain is linearized through the
      pseudo-inverse of the first nonzero Markov parameter;
  (d) the target's characteristic chain dynamics are imposed on the top
      derivative;
  (e) leftover input directions stabilize the internal dynamics; agents
      whose internal dynamics cannot be stabilized are rejected.

All estimation and internal transients are collected into an autonomous
Hurwitz block whose influence on the output chain decays exponentially.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DimensionError, UnsupportedAgentError
from .lti import (
    LtiAgent,
    infinite_zero_order,
    is_detectable,
    is_hurwitz,
    is_observable,
    matrix_rank_eps,
    place_poles,
    spectrum,
)
from .targets import TargetModel, chain_coefficients

# First observer pole; the rest follow at -6, -7, ...
OBSERVER_POLE_START = -5.0


@dataclass(frozen=True)
class Precompensator:
    """Per-agent local controller  xi' = Ah xi + Bh z + Eh v,
    u = Ch xi + Dh v + Fh z.

    The direct feed-through Fh is needed for agents measuring their full
    state, where the synthesized law is static and xi is empty.
    ``chain_from_x`` / ``chain_from_xi`` map (plant state, xi) to the stacked
    output derivatives (y, y', ..., y^(n_q-1)) of the compensated system.
    """

    Ah: np.ndarray
    Bh: np.ndarray
    Eh: np.ndarray
    Ch: np.ndarray
    Dh: np.ndarray
    Fh: np.ndarray
    xi_dim: int
    chain_from_x: np.ndarray
    chain_from_xi: np.ndarray


@dataclass(frozen=True)
class HomogenizationCertificate:
    """Evidence that a compensated agent matches the target model.

    ``As`` is the autonomous block collecting estimation and internal
    transients (Hurwitz on success), ``Cs`` the map injecting that block
    into the derivative-chain equations (all zeros when the match is exact),
    ``decay_rate`` the slowest decay of the block and ``markov_error`` the
    largest deviation of the compensated Markov parameters from the
    target's.  Certificates produced by verification carry ``Cs=None``
    because the injection map is not observable from input-output data.
    """

    As: np.ndarray
    Cs: np.ndarray
    decay_rate: float
    markov_error: float

    @property
    def omega_dim(self):
        return self.As.shape[0]

    @property
    def omega_is_hurwitz(self):
        return is_hurwitz(self.As)


def markov_parameters(C, A, B, count):
    """Stacked Markov parameters C A^k B for k = 0..count-1."""
    c = np.atleast_2d(np.asarray(C, dtype=float))
    a = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.atleast_2d(np.asarray(B, dtype=float))
    out = np.zeros((count, c.shape[0], b.shape[1]))
    row = c
    for k in range(count):
        out[k] = row @ b
        row = row @ a
    return out


def compose_with_precompensator(agent: LtiAgent, pre: Precompensator):
    """Series interconnection (agent after pre-compensator), input v."""
    n, xi = agent.n, pre.xi_dim
    nc = n + xi
    ac = np.zeros((nc, nc))
    ac[:n, :n] = agent.A + agent.B @ pre.Fh @ agent.Cm
    ac[:n, n:] = agent.B @ pre.Ch
    ac[n:, :n] = pre.Bh @ agent.Cm
    ac[n:, n:] = pre.Ah
    bc = np.zeros((nc, 1))
    bc[:n] = agent.B @ pre.Dh
    bc[n:] = pre.Eh
    cc = np.zeros((1, nc))
    cc[:, :n] = agent.C
    return ac, bc, cc


def _null_space_rows(rows):
    if rows.shape[0] == 0:
        return np.eye(rows.shape[1])
    return scipy.linalg.null_space(rows)


def _output_derivative_rows(agent, r):
    rows = [agent.C]
    for _ in range(r - 1):
        rows.append(rows[-1] @ agent.A)
    return np.vstack(rows)


def _stabilize_internal(a_int, b_int):
    """LQR gain making the internal block Hurwitz; None-gain when empty."""
    dim = a_int.shape[0]
    if dim == 0:
        return np.zeros((b_int.shape[1], 0)), a_int
    if b_int.shape[1] == 0:
        if not is_hurwitz(a_int):
            raise UnsupportedAgentError(
                "unsupported agent: internal dynamics not stabilizable "
                "(no remaining input freedom)")
        return np.zeros((0, dim)), a_int
    try:
        p = scipy.linalg.solve_continuous_are(a_int, b_int, np.eye(dim),
                                              np.eye(b_int.shape[1]))
    except Exception as exc:
        raise UnsupportedAgentError(
            f"unsupported agent: internal dynamics not stabilizable ({exc})") from exc
    gain = b_int.T @ p
    closed = a_int - b_int @ gain
    if not is_hurwitz(closed):
        raise UnsupportedAgentError("unsupported agent: internal dynamics not stabilizable")
    return gain, closed


def _observer_gain(agent):
    poles = [OBSERVER_POLE_START - k for k in range(agent.n)]
    if is_observable(agent.Cm, agent.A):
        return place_poles(agent.A.T, agent.Cm.T, poles).T
    # detectable-only pairs: Riccati observer (unobservable stable modes stay)
    p = scipy.linalg.solve_continuous_are(agent.A.T, agent.Cm.T, np.eye(agent.n),
                                          np.eye(agent.Cm.shape[0]))
    return p @ agent.Cm.T


def design_precompensator(agent: LtiAgent, target: TargetModel):
    """Synthesize the pre-compensator reshaping ``agent`` into ``target``.

    Returns the controller together with a certificate for the match.
    Raises UnsupportedAgentError when the agent's internal dynamics cannot
    be stabilized with the remaining input freedom, and DimensionError for
    multi-output agents.
    """
    if agent.p != 1 or target.p != 1:
        raise DimensionError("homogenization supports single-output systems only")
    if not is_detectable(agent.Cm, agent.A):
        raise UnsupportedAgentError(f"agent {agent.agent_id}: (Cm, A) is not detectable")

    if _matches_target(agent, target):
        return _identity_precompensator(agent, target)

    n, m, n_q = agent.n, agent.m, target.n_q
    r = infinite_zero_order(agent)
    if r > n_q:
        raise UnsupportedAgentError(
            f"agent {agent.agent_id}: relative degree {r} exceeds target uniform rank {n_q}")
    q = n_q - r
    a_coef, gain, _ = chain_coefficients(target)

    markov = _output_derivative_rows(agent, r + 1)  # rows C A^k, k = 0..r
    o_rows = markov[:r]
    ca_r = markov[r:r + 1]
    m_row = markov[r - 1:r] @ agent.B  # first nonzero Markov parameter
    m_pinv = np.linalg.pinv(m_row)
    n_null = _null_space_rows(m_row) if m > 1 else np.zeros((m, 0))

    ns = scipy.linalg.null_space(o_rows)  # n x (n - r)
    n_int = ns.shape[1]
    t_mat = np.vstack([o_rows, ns.T])
    x_w = np.linalg.inv(t_mat)[:, r:]
    a_fl = agent.A - agent.B @ m_pinv @ ca_r
    a_int = ns.T @ a_fl @ x_w
    b_int = ns.T @ agent.B @ n_null
    g_int, a_int_closed = _stabilize_internal(a_int, b_int)
    stab_term = -n_null @ g_int @ ns.T if n_int and n_null.shape[1] else np.zeros((m, n))

    # u = m_pinv * (chain drive) + stabilization of the internal block
    if q >= 1:
        u_xh = -m_pinv @ ca_r + stab_term
        u_sig = np.zeros((m, q))
        u_sig[:, 0:1] = m_pinv
        u_v = np.zeros((m, 1))
    else:
        chain_fb = sum(a_coef[k] * markov[k:k + 1] for k in range(n_q)) + ca_r
        u_xh = -m_pinv @ chain_fb + stab_term
        u_sig = np.zeros((m, 0))
        u_v = gain * m_pinv

    s_sig = np.zeros((q, q))
    if q >= 1:
        s_sig[np.arange(q - 1), np.arange(1, q)] = 1.0
        s_sig[q - 1, :] = -a_coef[r:]
    s_x = np.zeros((q, n))
    if q >= 1:
        s_x[q - 1, :] = -sum(a_coef[k] * markov[k] for k in range(r))
    e_sig = np.zeros((q, 1))
    if q >= 1:
        e_sig[q - 1, 0] = gain

    if agent.measures_full_state():
        pre = Precompensator(
            Ah=s_sig, Bh=s_x, Eh=e_sig,
            Ch=u_sig, Dh=u_v, Fh=u_xh,
            xi_dim=q,
            chain_from_x=_chain_from_x(markov, r, n_q),
            chain_from_xi=_chain_from_xi(0, q, n_q, r),
        )
        omega = a_int_closed
        cs = np.zeros((n_q, omega.shape[0]))
    else:
        lo = _observer_gain(agent)
        xi_dim = n + q
        ah = np.zeros((xi_dim, xi_dim))
        ah[:n, :n] = agent.A - lo @ agent.Cm + agent.B @ u_xh
        ah[:n, n:] = agent.B @ u_sig
        ah[n:, :n] = s_x
        ah[n:, n:] = s_sig
        bh = np.zeros((xi_dim, agent.Cm.shape[0]))
        bh[:n] = lo
        eh = np.zeros((xi_dim, 1))
        eh[:n] = agent.B @ u_v
        eh[n:] = e_sig
        ch = np.zeros((m, xi_dim))
        ch[:, :n] = u_xh
        ch[:, n:] = u_sig
        pre = Precompensator(
            Ah=ah, Bh=bh, Eh=eh,
            Ch=ch, Dh=u_v, Fh=np.zeros((m, agent.Cm.shape[0])),
            xi_dim=xi_dim,
            chain_from_x=_chain_from_x(markov, r, n_q),
            chain_from_xi=_chain_from_xi(n, q, n_q, r),
        )
        # omega = (internal residual, estimation error), block triangular
        a_obs = agent.A - lo @ agent.Cm
        omega = np.zeros((n_int + n, n_int + n))
        omega[:n_int, :n_int] = a_int_closed
        omega[:n_int, n_int:] = -ns.T @ agent.B @ u_xh
        omega[n_int:, n_int:] = a_obs
        cs = np.zeros((n_q, n_int + n))
        if q >= 1:
            cs[r - 1, n_int:] = ca_r
            cs[n_q - 1, n_int:] = sum(a_coef[k] * markov[k] for k in range(r))
        else:
            cs[n_q - 1, n_int:] = (sum(a_coef[k] * markov[k] for k in range(n_q)) + ca_r)

    markov_error = _markov_error(agent, pre, target)
    cert = HomogenizationCertificate(
        As=omega, Cs=cs,
        decay_rate=_decay_of(omega),
        markov_error=markov_error,
    )
    return pre, cert


def _matches_target(agent, target):
    return (agent.n == target.n
            and agent.m == target.m
            and np.array_equal(agent.A, target.A)
            and np.array_equal(agent.B, target.B)
            and np.array_equal(agent.C, target.C))


def _identity_precompensator(agent, target):
    """Homogeneous fast path: the agent already is the target, so no
    reshaping is required and the compensator is an exact pass-through."""
    n_q, m = target.n_q, agent.m
    q_z = agent.Cm.shape[0]
    rows = [target.C]
    for _ in range(n_q - 1):
        rows.append(rows[-1] @ target.A)
    pre = Precompensator(
        Ah=np.zeros((0, 0)), Bh=np.zeros((0, q_z)), Eh=np.zeros((0, 1)),
        Ch=np.zeros((m, 0)), Dh=np.eye(m), Fh=np.zeros((m, q_z)),
        xi_dim=0,
        chain_from_x=np.vstack(rows),
        chain_from_xi=np.zeros((n_q, 0)),
    )
    cert = HomogenizationCertificate(
        As=np.zeros((0, 0)), Cs=np.zeros((n_q, 0)),
        decay_rate=math.inf, markov_error=0.0,
    )
    return pre, cert


def _chain_from_x(markov, r, n_q):
    out = np.zeros((n_q, markov.shape[1]))
    out[:r] = markov[:r]
    return out


def _chain_from_xi(offset, q, n_q, r):
    out = np.zeros((n_q, offset + q))
    for j in range(q):
        out[r + j, offset + j] = 1.0
    return out


def _markov_error(agent, pre, target):
    ac, bc, cc = compose_with_precompensator(agent, pre)
    count = 2 * ac.shape[0] + 1
    have = markov_parameters(cc, ac, bc, count)
    want = markov_parameters(target.C, target.A, target.B, count)
    return float(np.max(np.abs(have - want)))


def _decay_of(block):
    if block.shape[0] == 0:
        return math.inf
    return float(-np.max(spectrum(block).real))


def _real_block_diag_from_spectrum(eigs):
    """Real matrix whose spectrum is the given conjugate-closed multiset."""
    remaining = list(eigs)
    blocks = []
    while remaining:
        lam = remaining.pop(0)
        if abs(lam.imag) < 1e-9:
            blocks.append(np.array([[lam.real]]))
            continue
        conj = min(remaining, key=lambda w: abs(w - lam.conjugate()), default=None)
        if conj is not None:
            remaining.remove(conj)
        blocks.append(np.array([[lam.real, lam.imag], [-lam.imag, lam.real]]))
    if not blocks:
        return np.zeros((0, 0))
    return scipy.linalg.block_diag(*blocks)


def verify_homogenization(agent: LtiAgent, pre: Precompensator, target: TargetModel):
    """Independent check that (agent o pre) realizes the target model.

    Compares the Markov parameters of the composed system against the
    target's for k = 0..2 * (composite state dimension), and scans every
    composite eigenvalue with PBH rank tests: eigenvalues that are not both
    controllable from v and observable from y form the transient complement,
    which must be Hurwitz.  The certificate reports the largest Markov
    deviation and the complement's decay rate; it never raises on mismatch.
    """
    ac, bc, cc = compose_with_precompensator(agent, pre)
    nc = ac.shape[0]
    count = 2 * nc + 1
    have = markov_parameters(cc, ac, bc, count)
    want = markov_parameters(target.C, target.A, target.B, count)
    markov_error = float(np.max(np.abs(have - want)))

    complement = []
    for lam in spectrum(ac):
        ctrb = np.hstack([lam * np.eye(nc) - ac, bc.astype(complex)])
        obsv = np.vstack([lam * np.eye(nc) - ac, cc.astype(complex)])
        if matrix_rank_eps(ctrb) < nc or matrix_rank_eps(obsv) < nc:
            complement.append(lam)

    as_block = _real_block_diag_from_spectrum(complement)
    decay = math.inf
    if complement:
        decay = float(-max(lam.real for lam in complement))
    return HomogenizationCertificate(
        As=as_block, Cs=None,
        decay_rate=decay,
        markov_error=markov_error,
    )
