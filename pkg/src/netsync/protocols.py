"""Scale-free dynamic protocol assembly.

Each agent runs a controller over the stacked state (xi, xhat, chi) fed by
the network signals zeta (relative output sum), zetahat (relative broadcast
sum) and its own measurement z.  The controller matrices are a pure function
of the agent model, the target and the gain pair (K, H): nothing about the
graph or the number of agents enters them, which is what makes the design
scale-free.  Agents broadcast eta = chi.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, fields

import numpy as np

from .errors import DimensionError, GainDesignError
from .homogenization import Precompensator
from .lti import EPS_HURWITZ, is_hurwitz, place_poles
from .targets import TargetModel

DEFAULT_K_POLES = (-2.0, -3.0, -5.0)
DEFAULT_H_POLES = (-1.0, -2.0, -3.0)

BUNDLE_HEADER = "netsync-protocol-bundle v1"


def default_k_poles(n):
    """Feedback pole defaults sized to the target: -2, -3, -5, -6, ..."""
    base = list(DEFAULT_K_POLES) + [-(k + 6.0) for k in range(max(0, n - 3))]
    return tuple(base[:n])


def default_h_poles(n):
    """Injection pole defaults sized to the target: -1, -2, -3, -4, ..."""
    base = list(DEFAULT_H_POLES) + [-(k + 4.0) for k in range(max(0, n - 3))]
    return tuple(base[:n])


def design_gains(target: TargetModel, k_poles=None, h_poles=None):
    """State-feedback and injection gains (K, H) for the target model.

    Pole lists default to the sized sequences above; both must be Hurwitz
    and closed under conjugation.  The resulting A - B K and A - H C are
    re-checked before returning.
    """
    k_poles = default_k_poles(target.n) if k_poles is None else k_poles
    h_poles = default_h_poles(target.n) if h_poles is None else h_poles
    for name, poles in (("k_poles", k_poles), ("h_poles", h_poles)):
        arr = np.asarray(poles, dtype=complex)
        if arr.size != target.n:
            raise GainDesignError(f"{name}: need {target.n} poles, got {arr.size}")
        if np.any(arr.real >= -EPS_HURWITZ):
            bad = arr[arr.real >= -EPS_HURWITZ][0]
            raise GainDesignError(f"{name}: requested pole {bad} is not Hurwitz")
    k = place_poles(target.A, target.B, k_poles)
    h = place_poles(target.A.T, target.C.T, h_poles).T
    if not is_hurwitz(target.A - target.B @ k):
        raise GainDesignError("A - B K failed the Hurwitz check")
    if not is_hurwitz(target.A - h @ target.C):
        raise GainDesignError("A - H C failed the Hurwitz check")
    return k, h


@dataclass(frozen=True)
class ProtocolRealization:
    """Per-agent controller realization over the state s = (xi, xhat, chi).

        s'  = A_state s + B_zeta zeta + B_zetahat zetahat + B_z z
        u   = C_u s + D_uz z
        eta = C_eta s        (broadcast to neighbours)

    In regulated mode ``zeta`` carries the expanded relative sum (including
    the reference error for root-set members) and ``iota`` gates the two
    extra reference-tracking terms.
    """

    mode: str
    agent_id: int
    iota: int
    xi_dim: int
    nq: int
    A_state: np.ndarray
    B_zeta: np.ndarray
    B_zetahat: np.ndarray
    B_z: np.ndarray
    C_u: np.ndarray
    D_uz: np.ndarray
    C_eta: np.ndarray
    K: np.ndarray
    H: np.ndarray

    @property
    def state_dim(self):
        return self.A_state.shape[0]


def _assemble(mode, agent_id, pre: Precompensator, target: TargetModel,
              K, H, iota):
    k = np.atleast_2d(np.asarray(K, dtype=float))
    h = np.atleast_2d(np.asarray(H, dtype=float))
    nq = target.n_q
    if k.shape != (target.m, nq):
        raise DimensionError(f"K must be {(target.m, nq)}, got {k.shape}")
    if h.shape != (nq, target.p):
        raise DimensionError(f"H must be {(nq, target.p)}, got {h.shape}")
    if pre.Eh.shape[1] != target.m:
        raise DimensionError("pre-compensator input dimension does not match the target")
    if not is_hurwitz(target.A - target.B @ k) or not is_hurwitz(target.A - h @ target.C):
        raise GainDesignError("gains are not Hurwitz for this target")

    xi = pre.xi_dim
    qz = pre.Bh.shape[1]
    dim = xi + 2 * nq
    sl_xi = slice(0, xi)
    sl_xhat = slice(xi, xi + nq)
    sl_chi = slice(xi + nq, dim)

    a = np.zeros((dim, dim))
    a[sl_xi, sl_xi] = pre.Ah
    a[sl_xi, sl_chi] = -pre.Eh @ k
    a[sl_xhat, sl_xhat] = target.A - h @ target.C
    a[sl_chi, sl_xhat] = np.eye(nq)
    a[sl_chi, sl_chi] = target.A - target.B @ k
    if iota:
        a[sl_xhat, sl_chi] += -target.B @ k
        a[sl_chi, sl_chi] += -np.eye(nq)

    b_zeta = np.zeros((dim, target.p))
    b_zeta[sl_xhat] = h

    b_zetahat = np.zeros((dim, nq))
    b_zetahat[sl_xhat] = -target.B @ k
    b_zetahat[sl_chi] = -np.eye(nq)

    b_z = np.zeros((dim, qz))
    b_z[sl_xi] = pre.Bh

    c_u = np.zeros((pre.Ch.shape[0], dim))
    c_u[:, sl_xi] = pre.Ch
    c_u[:, sl_chi] = -pre.Dh @ k

    c_eta = np.zeros((nq, dim))
    c_eta[:, sl_chi] = np.eye(nq)

    return ProtocolRealization(
        mode=mode, agent_id=agent_id, iota=int(iota), xi_dim=xi, nq=nq,
        A_state=a, B_zeta=b_zeta, B_zetahat=b_zetahat, B_z=b_z,
        C_u=c_u, D_uz=pre.Fh.copy(), C_eta=c_eta,
        K=k, H=h,
    )


def build_output_protocol(agent_id, pre: Precompensator, target: TargetModel, K, H):
    """Output-synchronization controller for one agent.

    Realizes  xi' = Ah xi + Bh z - Eh K chi;
              xhat' = A xhat - B K zetahat + H (zeta - C xhat);
              chi'  = A chi - B K chi + xhat - zetahat;
              u     = Ch xi - Dh K chi + Fh z.
    """
    return _assemble("output_sync", agent_id, pre, target, K, H, iota=0)


def build_regulated_protocol(agent_id, pre: Precompensator, target: TargetModel,
                             K, H, iota):
    """Regulated-output-synchronization controller for one agent.

    Same structure with zeta replaced by the expanded relative sum and two
    iota-gated terms: an extra -iota B K chi injection in the xhat update
    and -iota chi damping in the chi update.
    """
    if iota not in (0, 1):
        raise GainDesignError("iota must be 0 or 1")
    return _assemble("regulated", agent_id, pre, target, K, H, iota=iota)


def _write_block(buf, name, matrix):
    m = np.atleast_2d(np.asarray(matrix, dtype=float))
    buf.write(f"block {name} {m.shape[0]} {m.shape[1]}\n")
    for row in m:
        buf.write(" ".join(repr(float(v)) for v in row) + "\n")


def realization_to_text(real: ProtocolRealization):
    """Serialize to the matrix-bundle exchange format.

    Named blocks in fixed order, row-major, full decimal precision; the
    bundle depends only on the agent model, target and gains, so identical
    designs serialize to identical bytes.
    """
    buf = io.StringIO()
    buf.write(BUNDLE_HEADER + "\n")
    buf.write(f"mode {real.mode}\n")
    buf.write(f"agent {real.agent_id}\n")
    if real.mode == "regulated":
        buf.write(f"iota {real.iota}\n")
    buf.write(f"dims xi={real.xi_dim} nq={real.nq}\n")
    for name in ("A_state", "B_zeta", "B_zetahat", "B_z", "C_u", "D_uz",
                 "C_eta", "K", "H"):
        _write_block(buf, name, getattr(real, name))
    buf.write("end\n")
    return buf.getvalue()


def realizations_equal(a: ProtocolRealization, b: ProtocolRealization):
    """Exact (bitwise) equality of two realizations."""
    if (a.mode, a.agent_id, a.iota, a.xi_dim, a.nq) != (b.mode, b.agent_id, b.iota, b.xi_dim, b.nq):
        return False
    for f in fields(a):
        va, vb = getattr(a, f.name), getattr(b, f.name)
        if isinstance(va, np.ndarray):
            if va.shape != vb.shape or not np.array_equal(va, vb):
                return False
    return True
