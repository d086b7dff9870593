"""Structural and spectral analysis of linear time-invariant systems.

Everything downstream (target validation, homogenization, protocol design,
simulation) consumes the verdicts produced here: eigenvalue lists, Hurwitz
checks, PBH rank tests, invariant zeros, infinite-zero order and pole
placement.  All functions are pure and operate on immutable matrix values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateSystemError, DimensionError, PlacementError

# Margin for "open left half plane": eigenvalues with |Re| <= EPS_HURWITZ are
# treated as sitting on the imaginary axis.
EPS_HURWITZ = 1e-9

# Relative singular-value threshold for all rank decisions.
EPS_RANK = 1e-9

# Tolerance for matching placed eigenvalues against the requested set.
EPS_EIG = 1e-6

# Fixed seed for the single-input reduction used by multi-input placement.
PLACEMENT_SEED = 20240501


def as_matrix(value, name="matrix"):
    """Coerce to a read-only 2-d float array."""
    arr = np.atleast_2d(np.asarray(value, dtype=float))
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 2-dimensional, got shape {arr.shape}")
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class LtiAgent:
    """State-space agent with a local measurement map.

    ``A`` (n x n) state map, ``B`` (n x m) input map, ``C`` (p x n) output
    map and ``Cm`` (q x n) measurement map giving the locally available
    signal z = Cm x.  ``agent_id`` is the node index in the network.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    Cm: np.ndarray = None
    agent_id: int = 0

    def __post_init__(self):
        a = as_matrix(self.A, "A")
        b = as_matrix(self.B, "B")
        c = as_matrix(self.C, "C")
        n = a.shape[0]
        if a.shape[1] != n:
            raise DimensionError(f"A must be square, got {a.shape}")
        if n < 1:
            raise DimensionError("state dimension must be >= 1")
        if b.shape[0] != n:
            raise DimensionError(f"B has {b.shape[0]} rows, expected {n}")
        if c.shape[1] != n:
            raise DimensionError(f"C has {c.shape[1]} columns, expected {n}")
        if c.shape[0] < 1:
            raise DimensionError("output dimension must be >= 1")
        cm = np.eye(n) if self.Cm is None else self.Cm
        cm = as_matrix(cm, "Cm")
        if cm.shape[1] != n:
            raise DimensionError(f"Cm has {cm.shape[1]} columns, expected {n}")
        object.__setattr__(self, "A", a)
        object.__setattr__(self, "B", b)
        object.__setattr__(self, "C", c)
        object.__setattr__(self, "Cm", cm)

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    @property
    def p(self):
        return self.C.shape[0]

    def measures_full_state(self):
        """True when z = x exactly (Cm is the identity)."""
        return self.Cm.shape[0] == self.n and np.array_equal(self.Cm, np.eye(self.n))


@dataclass(frozen=True)
class SpectralReport:
    """Summary of the structural checks an agent must satisfy."""

    eigenvalues: np.ndarray
    stabilizable: bool
    detectable: bool
    right_invertible: bool
    invariant_zeros: np.ndarray
    infinite_zero_order: int = None
    problems: tuple = field(default=())

    @property
    def ok(self):
        return not self.problems


def spectrum(M):
    """All eigenvalues of a square matrix, lexicographically sorted.

    Sorting is by (real part, imaginary part) so repeated calls and test
    fixtures are reproducible.
    """
    a = np.asarray(M, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"spectrum needs a square matrix, got shape {a.shape}")
    if a.shape[0] == 0:
        return np.zeros(0, dtype=complex)
    eig = np.linalg.eigvals(a)
    order = np.lexsort((eig.imag, eig.real))
    return eig[order]


def is_hurwitz(M):
    """True iff every eigenvalue lies strictly left of -EPS_HURWITZ."""
    eig = spectrum(M)
    if eig.size == 0:
        return True
    return bool(np.max(eig.real) < -EPS_HURWITZ)


def matrix_rank_eps(M):
    """Numerical rank with the relative singular-value threshold EPS_RANK."""
    a = np.atleast_2d(np.asarray(M))
    if a.size == 0:
        return 0
    s = np.linalg.svd(a, compute_uv=False)
    smax = s[0] if s.size else 0.0
    if smax == 0.0:
        return 0
    return int(np.sum(s > EPS_RANK * smax))


def charpoly(A):
    """Monic characteristic polynomial coefficients, ascending order.

    Returns (a_0, ..., a_{n-1}) with det(sI - A) = s^n + a_{n-1} s^{n-1}
    + ... + a_0.  Uses the Faddeev-LeVerrier recursion, which is exact for
    integer-valued matrices of the sizes handled here.
    """
    a = np.asarray(A, dtype=float)
    n = a.shape[0]
    coeffs = np.zeros(n + 1)
    coeffs[n] = 1.0
    m = np.eye(n)
    for k in range(1, n + 1):
        am = a @ m
        c = -np.trace(am) / k
        coeffs[n - k] = c
        m = am + c * np.eye(n)
    return coeffs[:n]


def is_controllable(A, B):
    """PBH controllability test over all eigenvalues of A."""
    return _pbh_input(A, B, restrict_to_unstable=False)


def is_stabilizable(A, B):
    """PBH test restricted to eigenvalues with Re >= -EPS_HURWITZ."""
    return _pbh_input(A, B, restrict_to_unstable=True)


def is_observable(C, A):
    return _pbh_input(np.asarray(A).T, np.asarray(C).T, restrict_to_unstable=False)


def is_detectable(C, A):
    return _pbh_input(np.asarray(A).T, np.asarray(C).T, restrict_to_unstable=True)


def _pbh_input(A, B, restrict_to_unstable):
    a = np.asarray(A, dtype=float)
    b = np.atleast_2d(np.asarray(B, dtype=float))
    n = a.shape[0]
    if n == 0:
        return True
    for lam in spectrum(a):
        if restrict_to_unstable and lam.real < -EPS_HURWITZ:
            continue
        pencil = np.hstack([lam * np.eye(n) - a, b.astype(complex)])
        if matrix_rank_eps(pencil) < n:
            return False
    return True


def pbh_uncontrollable_eigenvalue(A, B):
    """First eigenvalue (in spectrum order) failing the PBH input test."""
    a = np.asarray(A, dtype=float)
    b = np.atleast_2d(np.asarray(B, dtype=float))
    n = a.shape[0]
    for lam in spectrum(a):
        pencil = np.hstack([lam * np.eye(n) - a, b.astype(complex)])
        if matrix_rank_eps(pencil) < n:
            return lam
    return None


def pbh_test(agent, mode):
    """PBH rank test on an agent.

    ``stabilizable``/``controllable`` test the pair (A, B); ``detectable``/
    ``observable`` test the measurement pair (Cm, A).
    """
    if mode == "stabilizable":
        return is_stabilizable(agent.A, agent.B)
    if mode == "controllable":
        return is_controllable(agent.A, agent.B)
    if mode == "detectable":
        return is_detectable(agent.Cm, agent.A)
    if mode == "observable":
        return is_observable(agent.Cm, agent.A)
    raise ValueError(f"unknown PBH mode {mode!r}")


def _rosenbrock_value(A, B, C, lam):
    n = A.shape[0]
    m = B.shape[1]
    p = C.shape[0]
    top = np.hstack([lam * np.eye(n) - A, -B.astype(complex)])
    bot = np.hstack([C.astype(complex), np.zeros((p, m), dtype=complex)])
    return np.vstack([top, bot])


def _sample_points(A, count):
    """Deterministic complex frequencies away from the eigenvalues of A."""
    eig = spectrum(A)
    radius = 1.0 + 2.0 * (np.max(np.abs(eig)) if eig.size else 0.0)
    pts = []
    k = 0
    golden = 2.399963229728653
    while len(pts) < count:
        theta = 0.7 + k * golden
        lam = radius * complex(math.cos(theta), math.sin(theta))
        if eig.size == 0 or np.min(np.abs(eig - lam)) > 1e-6 * radius:
            pts.append(lam)
        k += 1
    return pts


def system_normal_rank(A, B, C):
    """Normal rank of the system pencil [[sI-A, -B], [C, 0]]."""
    a, b, c = (np.asarray(x, dtype=float) for x in (A, B, C))
    return max(matrix_rank_eps(_rosenbrock_value(a, b, c, lam))
               for lam in _sample_points(a, 3))


def is_right_invertible(agent_or_triple):
    """True iff the system pencil attains rank n + p at a generic frequency.

    Evaluated at n + 1 deterministic sample points off the eigenvalue set.
    """
    a, b, c = _unpack_triple(agent_or_triple)
    n, p = a.shape[0], c.shape[0]
    target = n + p
    for lam in _sample_points(a, n + 1):
        if matrix_rank_eps(_rosenbrock_value(a, b, c, lam)) == target:
            return True
    return False


def _unpack_triple(agent_or_triple):
    if isinstance(agent_or_triple, LtiAgent):
        return agent_or_triple.A, agent_or_triple.B, agent_or_triple.C
    a, b, c = agent_or_triple
    return (np.atleast_2d(np.asarray(a, dtype=float)),
            np.atleast_2d(np.asarray(b, dtype=float)),
            np.atleast_2d(np.asarray(c, dtype=float)))


def _square_pencil_zeros(A, B, C):
    """Finite generalized eigenvalues of the square system pencil."""
    import scipy.linalg

    n = A.shape[0]
    m = B.shape[1]
    p = C.shape[0]
    F = np.block([[A, B], [-C, np.zeros((p, m))]])
    E = np.zeros((n + p, n + m))
    E[:n, :n] = np.eye(n)
    w = scipy.linalg.eigvals(F, E)
    if np.any(np.isnan(w)):
        raise DegenerateSystemError("system pencil is singular for every frequency")
    finite = w[np.isfinite(w)]
    order = np.lexsort((finite.imag, finite.real))
    return finite[order]


def _multiset_intersection(z1, z2, tol):
    """Greedy multiset intersection of two complex lists within tol."""
    taken = np.zeros(len(z2), dtype=bool)
    out = []
    for z in z1:
        best, best_d = -1, tol
        for j, w in enumerate(z2):
            if taken[j]:
                continue
            d = abs(z - w)
            if d <= best_d:
                best, best_d = j, d
        if best >= 0:
            taken[best] = True
            out.append(z)
    arr = np.asarray(out, dtype=complex)
    order = np.lexsort((arr.imag, arr.real))
    return arr[order]


def invariant_zeros(agent_or_triple):
    """Finite invariant zeros of (C, A, B) with multiplicity.

    Square systems use the generalized eigenvalues of the system pencil
    directly.  Non-square systems are squared down with two distinct
    deterministic input (or output) combinations and the zero sets are
    intersected: the true zeros are common to every squaring while the
    artifacts introduced by each combination are generically disjoint.

    Raises DegenerateSystemError when the pencil is rank deficient at
    every finite frequency.
    """
    a, b, c = _unpack_triple(agent_or_triple)
    n, m, p = a.shape[0], b.shape[1], c.shape[0]
    if m < 1 or p < 1:
        raise DimensionError("system needs at least one input and output")
    if system_normal_rank(a, b, c) < n + min(m, p):
        raise DegenerateSystemError("system pencil is rank deficient for every frequency")
    if m == p:
        return _square_pencil_zeros(a, b, c)
    if p > m:
        # zeros are invariant under transposition
        return invariant_zeros((a.T, c.T, b.T))
    rng = np.random.default_rng(PLACEMENT_SEED)
    scale = max(1.0, float(np.max(np.abs(a))))
    for _ in range(8):
        v1 = rng.standard_normal((m, p))
        v2 = rng.standard_normal((m, p))
        try:
            z1 = _square_pencil_zeros(a, b @ v1, c)
            z2 = _square_pencil_zeros(a, b @ v2, c)
        except DegenerateSystemError:
            continue
        return _multiset_intersection(z1, z2, tol=1e-6 * scale)
    raise DegenerateSystemError("could not find a non-degenerate squaring")


def infinite_zero_order(agent_or_triple):
    """Relative degree: smallest k >= 1 with C A^(k-1) B nonzero.

    Only defined for single-output systems.  Raises when every Markov
    parameter up to k = n vanishes.
    """
    a, b, c = _unpack_triple(agent_or_triple)
    if c.shape[0] != 1:
        raise DimensionError("infinite_zero_order requires a single output")
    n = a.shape[0]
    row = c.copy()
    scale = max(1.0, float(np.max(np.abs(b)))) * max(1.0, float(np.max(np.abs(c))))
    for k in range(1, n + 1):
        markov = row @ b
        if np.max(np.abs(markov)) > EPS_RANK * scale:
            return k
        row = row @ a
        scale = max(scale, float(np.max(np.abs(row))) * max(1.0, float(np.max(np.abs(b)))))
    raise DegenerateSystemError("no finite relative degree: all Markov parameters vanish")


def _ackermann(A, b, desired):
    n = A.shape[0]
    poly = np.atleast_1d(np.real(np.poly(np.asarray(desired, dtype=complex))))
    ctrb = np.hstack([np.linalg.matrix_power(A, k) @ b for k in range(n)])
    if matrix_rank_eps(ctrb) < n:
        return None
    # p(A) by Horner on the monic polynomial (highest coefficient first)
    pa = np.zeros((n, n))
    for coef in poly:
        pa = pa @ A + coef * np.eye(n)
    e_n = np.zeros(n)
    e_n[n - 1] = 1.0
    row = np.linalg.solve(ctrb.T, e_n)
    return (row @ pa)[np.newaxis, :]


def _check_conjugate_closed(desired):
    want = np.sort_complex(np.asarray(desired, dtype=complex))
    have = np.sort_complex(np.conj(want))
    if not np.allclose(want, have, atol=1e-12, rtol=0):
        raise PlacementError("desired eigenvalue set must be closed under conjugation")


def place_poles(A, B, desired):
    """Gain K with spectrum(A - B K) equal to ``desired`` (within EPS_EIG).

    Multi-input B is reduced to a single input through a deterministic
    random combination vector drawn from PLACEMENT_SEED, then Ackermann's
    formula is applied; the result is verified against the requested set.
    Raises PlacementError for uncontrollable pairs, naming the offending
    eigenvalue.
    """
    a = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.atleast_2d(np.asarray(B, dtype=float))
    n = a.shape[0]
    if b.shape[0] != n:
        raise DimensionError(f"B has {b.shape[0]} rows, expected {n}")
    desired = np.atleast_1d(np.asarray(desired, dtype=complex))
    if desired.size != n:
        raise PlacementError(f"need exactly {n} desired eigenvalues, got {desired.size}")
    _check_conjugate_closed(desired)
    if not is_controllable(a, b):
        lam = pbh_uncontrollable_eigenvalue(a, b)
        raise PlacementError(f"pair (A, B) is uncontrollable at eigenvalue {lam}")

    m = b.shape[1]
    if m == 1:
        k = _ackermann(a, b, desired)
        if k is None or not _placement_ok(a, b, k, desired):
            raise PlacementError("single-input placement is too ill-conditioned")
        return k

    rng = np.random.default_rng(PLACEMENT_SEED)
    for _ in range(32):
        v = rng.uniform(-1.0, 1.0, size=(m, 1))
        k_row = _ackermann(a, b @ v, desired)
        if k_row is None:
            continue
        k = v @ k_row
        if _placement_ok(a, b, k, desired):
            return k
    raise PlacementError("no single-input reduction achieved the requested spectrum")


def _placement_ok(A, B, K, desired):
    placed = spectrum(A - B @ K)
    want = np.asarray(desired, dtype=complex)
    order = np.lexsort((want.imag, want.real))
    want = want[order]
    return bool(np.all(np.abs(placed - want) < EPS_EIG))


def analyze(agent):
    """Full structural report for one agent (the Assumption-1 checklist)."""
    problems = []
    stab = is_stabilizable(agent.A, agent.B)
    if not stab:
        problems.append(f"agent {agent.agent_id}: (A, B) is not stabilizable")
    det = is_detectable(agent.Cm, agent.A)
    if not det:
        problems.append(f"agent {agent.agent_id}: (Cm, A) is not detectable")
    rinv = is_right_invertible(agent)
    if not rinv:
        problems.append(f"agent {agent.agent_id}: not right-invertible")
    zeros = np.zeros(0, dtype=complex)
    order = None
    if agent.p == 1:
        try:
            zeros = invariant_zeros(agent)
        except DegenerateSystemError:
            problems.append(f"agent {agent.agent_id}: degenerate system pencil")
        try:
            order = infinite_zero_order(agent)
        except DegenerateSystemError:
            problems.append(f"agent {agent.agent_id}: no finite relative degree")
    return SpectralReport(
        eigenvalues=spectrum(agent.A),
        stabilizable=stab,
        detectable=det,
        right_invertible=rinv,
        invariant_zeros=zeros,
        infinite_zero_order=order,
        problems=tuple(problems),
    )
