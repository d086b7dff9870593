"""Target-model validation and exosystem remodeling.

The target model is the single common triple every compensated agent must
emulate.  For reference tracking, a marginally stable exosystem is remodeled
into an equivalent target triple in derivative-chain coordinates: same output
family, uniform relative degree, no finite zeros.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, NetsyncError, UnsupportedAgentError
from .lti import (
    EPS_HURWITZ,
    DegenerateSystemError,
    as_matrix,
    charpoly,
    infinite_zero_order,
    invariant_zeros,
    is_observable,
    matrix_rank_eps,
    spectrum,
)


@dataclass(frozen=True)
class TargetModel:
    """Homogenized triple (C, A, B) of uniform rank n_q."""

    C: np.ndarray
    A: np.ndarray
    B: np.ndarray
    n_q: int

    def __post_init__(self):
        a = as_matrix(self.A, "A")
        b = as_matrix(self.B, "B")
        c = as_matrix(self.C, "C")
        if a.shape[0] != a.shape[1]:
            raise DimensionError("target A must be square")
        if b.shape[0] != a.shape[0] or c.shape[1] != a.shape[0]:
            raise DimensionError("target matrices are dimension-inconsistent")
        object.__setattr__(self, "A", a)
        object.__setattr__(self, "B", b)
        object.__setattr__(self, "C", c)
        object.__setattr__(self, "n_q", int(self.n_q))

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def p(self):
        return self.C.shape[0]

    @property
    def m(self):
        return self.B.shape[1]


@dataclass(frozen=True)
class Exosystem:
    """Autonomous reference generator y_r = Cr x_r, x_r' = Ar x_r."""

    Ar: np.ndarray
    Cr: np.ndarray
    xr0: np.ndarray = None

    def __post_init__(self):
        ar = as_matrix(self.Ar, "Ar")
        cr = as_matrix(self.Cr, "Cr")
        if ar.shape[0] != ar.shape[1]:
            raise DimensionError("Ar must be square")
        if cr.shape[1] != ar.shape[0]:
            raise DimensionError("Cr columns must match Ar")
        object.__setattr__(self, "Ar", ar)
        object.__setattr__(self, "Cr", cr)
        if self.xr0 is not None:
            x0 = np.asarray(self.xr0, dtype=float).reshape(-1)
            if x0.size != ar.shape[0]:
                raise DimensionError("xr0 has wrong dimension")
            x0 = np.ascontiguousarray(x0)
            x0.setflags(write=False)
            object.__setattr__(self, "xr0", x0)

    @property
    def r(self):
        return self.Ar.shape[0]

    @property
    def p(self):
        return self.Cr.shape[0]

    def check(self):
        """Diagnostics for the exosystem admissibility conditions."""
        problems = []
        if not is_observable(self.Cr, self.Ar):
            problems.append("exosystem: (Cr, Ar) is not observable")
        eig = spectrum(self.Ar)
        if eig.size and np.max(np.abs(eig.real)) > EPS_HURWITZ:
            problems.append("exosystem: eigenvalues of Ar must lie on the imaginary axis")
        return problems


@dataclass(frozen=True)
class TargetValidation:
    """Report produced by validate_target (never raises)."""

    ok: bool
    n_d_max: int
    n_q: int
    problems: tuple = field(default=())


def max_infinite_zero_order(agents):
    """Largest relative degree over the agent pool."""
    return max(infinite_zero_order(agent) for agent in agents)


def validate_target(target: TargetModel, agents):
    """Check the target-selection conditions against an agent pool.

    Conditions: full row rank C, invertible of uniform rank n_q with no
    invariant zeros, n_q at least the largest agent relative degree, and
    spectrum(A) confined to the closed left half plane.
    """
    problems = []
    if target.p != 1:
        problems.append("target: only single-output targets are supported")
        return TargetValidation(False, 0, target.n_q, tuple(problems))
    if matrix_rank_eps(target.C) < target.p:
        problems.append("target: C must have full row rank")
    if target.m != target.p:
        problems.append("target: input and output dimensions must agree (invertible triple)")
    try:
        zeros = invariant_zeros((target.A, target.B, target.C))
        if zeros.size:
            problems.append(f"target: has invariant zeros {zeros}")
    except DegenerateSystemError:
        problems.append("target: degenerate system pencil")
    try:
        rel = infinite_zero_order((target.A, target.B, target.C))
    except DegenerateSystemError:
        rel = None
        problems.append("target: no finite relative degree")
    if rel is not None:
        if rel != target.n_q:
            problems.append(f"target: relative degree {rel} differs from declared n_q={target.n_q}")
        if rel != target.n:
            problems.append("target: not of uniform rank (state dimension exceeds relative degree)")
    eig = spectrum(target.A)
    if eig.size and np.max(eig.real) > EPS_HURWITZ:
        problems.append("target: eigenvalues of A must lie in the closed left half plane")
    n_d = 0
    for agent in agents:
        try:
            n_d = max(n_d, infinite_zero_order(agent))
        except DegenerateSystemError:
            problems.append(f"agent {agent.agent_id}: no finite relative degree")
    if n_d > target.n_q:
        problems.append(
            f"target: n_q={target.n_q} is below the largest agent relative degree {n_d}")
    return TargetValidation(not problems, n_d, target.n_q, tuple(problems))


def chain_coefficients(target: TargetModel):
    """Chain data of a validated single-output target.

    Returns (a, g, O) where ``a`` holds the ascending characteristic
    coefficients (y^(n_q) = -sum a_k y^(k) + g v), ``g`` is the first
    nonzero Markov parameter and ``O`` the observability matrix mapping the
    target state to (y, y', ..., y^(n_q - 1)).
    """
    a = charpoly(target.A)
    rows = [target.C]
    for _ in range(target.n - 1):
        rows.append(rows[-1] @ target.A)
    obs = np.vstack(rows)
    g = float((rows[-1] @ target.B)[0, 0])
    if abs(g) < 1e-12:
        raise DegenerateSystemError("target has zero leading Markov parameter")
    return a, g, obs


def remodel_exosystem(exo: Exosystem, agents, n_q=None):
    """Equivalent target triple generating every exosystem output.

    The construction is the derivative-chain companion realization of
    s^(n_q - r) * charpoly(Ar): outputs of the original exosystem are exactly
    the chain outputs started from matched initial conditions, the triple has
    uniform rank n_q and no finite zeros, and its spectrum is spectrum(Ar)
    plus n_q - r extra zero eigenvalues.  Single-output exosystems only.
    """
    if exo.p != 1:
        raise UnsupportedAgentError("exosystem remodeling supports single-output references only")
    problems = exo.check()
    if problems:
        raise NetsyncError("; ".join(problems))
    r = exo.r
    n_d = max_infinite_zero_order(agents) if agents else 1
    size = max(n_d, r) if n_q is None else int(n_q)
    if size < max(n_d, r):
        raise NetsyncError(f"n_q={size} is below the lower bound {max(n_d, r)}")
    # ascending coefficients of s^(size - r) * charpoly(Ar)
    base = charpoly(exo.Ar)
    coeffs = np.concatenate([np.zeros(size - r), base])
    a_mat = np.zeros((size, size))
    a_mat[np.arange(size - 1), np.arange(1, size)] = 1.0
    a_mat[size - 1, :] = -coeffs + 0.0  # avoid -0.0 entries
    b_mat = np.zeros((size, 1))
    b_mat[size - 1, 0] = 1.0
    c_mat = np.zeros((1, size))
    c_mat[0, 0] = 1.0
    return TargetModel(C=c_mat, A=a_mat, B=b_mat, n_q=size)


def match_initial_condition(exo: Exosystem, target: TargetModel, xr0=None):
    """Initial chain state reproducing the exosystem output exactly.

    Stacks the output derivatives (y_r(0), y_r'(0), ..., y_r^(n_q-1)(0))
    computed from Cr Ar^k xr0.
    """
    x0 = exo.xr0 if xr0 is None else np.asarray(xr0, dtype=float).reshape(-1)
    if x0 is None:
        raise NetsyncError("no exosystem initial state given")
    if x0.size != exo.r:
        raise DimensionError("xr0 has wrong dimension")
    row = exo.Cr
    out = np.zeros(target.n_q)
    for k in range(target.n_q):
        out[k] = (row @ x0)[0]
        row = row @ exo.Ar
    return out


def derivative_stack_map(exo: Exosystem, n_q):
    """Matrix sending x_r to (y_r, y_r', ..., y_r^(n_q-1))."""
    rows = [exo.Cr]
    for _ in range(n_q - 1):
        rows.append(rows[-1] @ exo.Ar)
    return np.vstack(rows)
