"""Single round protocols: feasibility, closed-form costs, and optimal synthesis.

A single round protocol assigns Alice one control per row of the target
matrix ``H`` and Bob one control per column, with no communication. Writing
the controls' coefficients as the rows of ``U`` (m x l) and ``V`` (n x l),
the protocol realizes ``H`` exactly when ``U F V^T = H`` and costs

    (1/p) tr(U U^T) + (1/q) tr(V V^T)

with weights ``p = m``, ``q = n`` for the plain averaged energy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .bh_system import DEFAULT_STEPS, simulate_bh
from .controls import BilinearMap, ControlSignal, fb_map, pair_output
from .errors import InfeasibleError, InvalidInputError, PreconditionError, UnsupportedRepresentationError
from .linalg import RANK_TOL, as_matrix, numerical_rank, singular_values, svd

DEFAULT_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class TargetMatrix:
    """Target outputs: entry (i, j) is required when Alice picks i and Bob picks j."""

    mat: np.ndarray
    row_labels: Optional[Sequence[str]] = None
    col_labels: Optional[Sequence[str]] = None

    def __post_init__(self):
        a = as_matrix(self.mat, "target matrix")
        object.__setattr__(self, "mat", a)
        for labels, size, what in ((self.row_labels, a.shape[0], "row"), (self.col_labels, a.shape[1], "column")):
            if labels is not None and len(labels) != size:
                raise InvalidInputError(f"{what} labels: expected {size}, got {len(labels)}")

    @property
    def shape(self) -> tuple[int, int]:
        return self.mat.shape


def target_array(h) -> np.ndarray:
    if isinstance(h, TargetMatrix):
        return h.mat
    return as_matrix(h, "target matrix")


@dataclass(eq=False)
class ProtocolSolution:
    """Alice's and Bob's coefficient matrices for a single round protocol."""

    alice: np.ndarray  # m x L, row i = coefficients of u_i
    bob: np.ndarray  # n x L, row j = coefficients of v_j
    cost: float
    residual: float
    weights: tuple[float, float]
    meta: dict = field(default_factory=dict)

    @property
    def shape(self) -> tuple[int, int]:
        return self.alice.shape[0], self.bob.shape[0]

    def alice_controls(self) -> list[ControlSignal]:
        return [ControlSignal("alice", row) for row in self.alice]

    def bob_controls(self) -> list[ControlSignal]:
        return [ControlSignal("bob", row) for row in self.bob]

    def recompute_cost(self) -> float:
        p, q = self.weights
        return float(np.sum(self.alice**2) / p + np.sum(self.bob**2) / q)

    def output_matrix(self, f: BilinearMap) -> np.ndarray:
        return np.array([[pair_output(u, v, f) for v in self.bob_controls()] for u in self.alice_controls()])


def _check_regular(f: BilinearMap) -> None:
    if f.kind != "diagonal-bh" and not f.is_regular():
        raise UnsupportedRepresentationError("map representation is not regular")


def feasibility_rank_check(h, f: BilinearMap) -> bool:
    """A single round protocol exists iff rank(F) >= rank(H)."""
    a = target_array(h)
    if f.unbounded_rank:
        return True
    return f.rank() >= numerical_rank(a, RANK_TOL)


def affine_obstruction_check(h) -> bool:
    """True when H_ik - H_jk = H_il - H_jl for all i, j, k, l.

    Those are exactly the targets an affine input-output map can realize:
    every row must be a constant shift of every other row.
    """
    a = target_array(h)
    if min(a.shape) < 2:
        raise PreconditionError("affine_obstruction_check needs at least 2 rows and 2 columns")
    diffs = a - a[0]  # row i minus row 0, must be constant along each row
    return bool(np.all(np.abs(diffs - diffs[:, :1]) <= 1e-12))


def _weights(a: np.ndarray, p, q) -> tuple[float, float]:
    m, n = a.shape
    p = m if p is None else p
    q = n if q is None else q
    if p <= 0 or q <= 0:
        raise PreconditionError("weights p and q must be positive")
    return float(p), float(q)


def optimal_cost(h, f: BilinearMap, p=None, q=None) -> float:
    """Infimum weighted energy (2/sqrt(pq)) * sum_k sigma_k(H) / sigma_k(F).

    ``p`` and ``q`` default to the target's row and column counts.
    """
    a = target_array(h)
    p, q = _weights(a, p, q)
    if not feasibility_rank_check(a, f):
        raise InfeasibleError(
            f"rank(H) = {numerical_rank(a)} exceeds rank(F) = {f.rank()}: no single round protocol"
        )
    _check_regular(f)
    sh = singular_values(a)
    r = numerical_rank(a) if sh[0] > 0 else 0
    if r == 0:
        return 0.0
    sf = f.singular_values()
    if f.unbounded_rank and sf.size < sh.size:
        sf = fb_map(sh.size).singular_values()
    k = min(sh.size, sf.size)
    # directions beyond F's numerical rank carry no target energy (feasibility checked above)
    live = sf[:k] > RANK_TOL * sf[0]
    terms = np.divide(sh[:k], sf[:k], out=np.zeros(k), where=live)
    return float(2.0 / math.sqrt(p * q) * np.sum(terms))


def bh_optimal_cost(h) -> float:
    """Closed-form single round cost through the B-H plant, weights (m, n)."""
    a = target_array(h)
    m, n = a.shape
    sh = singular_values(a)
    k = np.arange(1, sh.size + 1)
    return float(2.0 * math.pi / math.sqrt(m * n) * np.sum(np.ceil(k / 2.0) * sh))


def augment_target(h, l: int) -> np.ndarray:
    """Zero-pad an m x n target into the top-left corner of an l x l matrix."""
    a = target_array(h)
    m, n = a.shape
    if l < max(m, n):
        raise PreconditionError(f"augment_target: l = {l} is smaller than max(m, n) = {max(m, n)}")
    out = np.zeros((l, l))
    out[:m, :n] = a
    return out


def default_dimension(shape: tuple[int, int]) -> int:
    return 2 * max(shape)


def synthesize_single_round(
    h, f: Optional[BilinearMap] = None, p=None, q=None, tol: float = DEFAULT_TOL
) -> ProtocolSolution:
    """Minimum-energy controls realizing ``H`` in one round.

    The target is zero-padded to the map's dimension ``l``. The map is
    rotated to diagonal form ``F = P S Q^T`` (an orthogonal change of control
    coordinates, which leaves energies alone), and then, with ``Theta`` the
    right singular vectors of the padded target,

        R = (q/p)^(1/4) diag(sqrt(sigma_k(H) sigma_k(F)))
        U = H Theta R^+,   V^T = S^-1 R Theta^T.

    Using the pseudoinverse of ``R`` is the exact zero limit of the
    regularized family that puts a small delta on the null directions: ``U``
    does not depend on delta and ``V`` converges.

    ``f`` defaults to the B-H map truncated at ``2 * max(m, n)`` coefficients.
    """
    a = target_array(h)
    m, n = a.shape
    if f is None:
        f = fb_map(default_dimension(a.shape))
    p, q = _weights(a, p, q)
    if not feasibility_rank_check(a, f):
        raise InfeasibleError(
            f"rank(H) = {numerical_rank(a)} exceeds rank(F) = {f.rank()}: no single round protocol"
        )
    _check_regular(f)
    l = f.dim
    if l < max(m, n):
        raise PreconditionError(f"map dimension {l} is smaller than max(m, n) = {max(m, n)}")
    if f.kind == "diagonal-bh":
        pf, sf, qf = np.eye(l), f.singular_values(), np.eye(l)
    else:
        fs = svd(f.repr)
        pf, sf, qf = fs.left, fs.singular_values, fs.right
        if sf[-1] <= RANK_TOL * sf[0]:
            raise PreconditionError("map representation is singular; synthesis needs an invertible F_l")

    ht = augment_target(a, l)
    hs = svd(ht)
    theta, sh = hs.right, hs.singular_values
    rdiag = (q / p) ** 0.25 * np.sqrt(sh * sf)
    rpinv = np.divide(1.0, rdiag, out=np.zeros(l), where=rdiag > 0)
    u_tilde = (ht @ theta) * rpinv
    vt_tilde = (rdiag / sf)[:, None] * theta.T
    # undo the rotation F = P S Q^T: U = U~ P^T, V = V~ Q^T
    u_full = u_tilde @ pf.T
    v_full = vt_tilde.T @ qf.T
    alice, bob = u_full[:m], v_full[:n]

    achieved = alice @ f.repr @ bob.T
    residual = float(np.max(np.abs(achieved - a)))
    cost = float(np.sum(alice**2) / p + np.sum(bob**2) / q)
    sol = ProtocolSolution(
        alice=alice, bob=bob, cost=cost, residual=residual, weights=(p, q), meta={"target": a.copy()}
    )
    if residual > tol:
        raise PreconditionError(f"synthesized residual {residual:.3e} exceeds tolerance {tol:g}")
    return sol


def solution_from_parameters(h, f: BilinearMap, theta: np.ndarray, r: np.ndarray):
    """(U, V) = (H Theta R^-1, (F^-1 R Theta^T)^T) for square invertible ``H`` and ``F``.

    Every exact solution with invertible factors has this form for some
    orthogonal ``theta`` and nonsingular symmetric ``r``; sampling the two
    matrices sweeps the feasible set.
    """
    a = target_array(h)
    u = a @ theta @ np.linalg.inv(r)
    vt = np.linalg.solve(f.repr, r @ theta.T)
    return u, vt.T


@dataclass(frozen=True)
class VerificationReport:
    max_residual: float
    cost: float
    recomputed_cost: float
    outputs: np.ndarray
    sim_max_residual: Optional[float] = None
    sim_outputs: Optional[np.ndarray] = None

    def ok(self, tol: float = DEFAULT_TOL, sim_tol: float = 1e-6) -> bool:
        good = self.max_residual <= tol
        if self.sim_max_residual is not None:
            good = good and self.sim_max_residual <= sim_tol
        return good


def verify_solution(
    sol: ProtocolSolution, h, f: Optional[BilinearMap] = None, sim: bool = False, steps: int = DEFAULT_STEPS
) -> VerificationReport:
    """Recompute every pairing (and optionally simulate every pair) against ``H``."""
    a = target_array(h)
    if sol.shape != a.shape:
        raise InvalidInputError(f"solution is {sol.shape} but target is {a.shape}")
    if f is None:
        f = fb_map(max(sol.alice.shape[1], sol.bob.shape[1]))
    outputs = sol.output_matrix(f)
    # cost averaged over all event outcomes: (1/mn) sum_ij (|u_i|^2 + |v_j|^2), weighted form
    m, n = a.shape
    p, q = sol.weights
    eu = np.sum(sol.alice**2, axis=1)
    ev = np.sum(sol.bob**2, axis=1)
    recomputed = float(np.sum((m / p) * eu[:, None] + (n / q) * ev[None, :]) / (m * n))
    report = dict(
        max_residual=float(np.max(np.abs(outputs - a))),
        cost=sol.cost,
        recomputed_cost=recomputed,
        outputs=outputs,
    )
    if sim:
        us, vs = sol.alice_controls(), sol.bob_controls()
        zs = np.array([[simulate_bh(u, v, steps).final_z for v in vs] for u in us])
        report.update(sim_outputs=zs, sim_max_residual=float(np.max(np.abs(zs - a))))
    return VerificationReport(**report)


def shared_info_cost(h, f: Optional[BilinearMap] = None) -> float:
    """Averaged cost when both agents know both choices: (2 / (mn sigma_1(F))) sum |H_ij|."""
    a = target_array(h)
    s1 = (1.0 / math.pi) if f is None else f.sigma1
    if s1 <= 0:
        raise PreconditionError("map has sigma_1 = 0")
    m, n = a.shape
    return float(2.0 * np.sum(np.abs(a)) / (m * n * s1))


def gap_lower_bound(h) -> float:
    """(2 pi / n) sum_k (ceil(k/2) - 1) sigma_k(H) for a square target."""
    a = target_array(h)
    n = a.shape[0]
    sh = singular_values(a)
    k = np.arange(1, sh.size + 1)
    return float(2.0 * math.pi / n * np.sum((np.ceil(k / 2.0) - 1.0) * sh))


@dataclass(frozen=True)
class CostReport:
    single_round_cost: float
    shared_info_cost: float
    gap: float
    per_pair_costs: np.ndarray
    gap_bound: Optional[float] = None


def cost_report(h, f: Optional[BilinearMap] = None, p=None, q=None) -> CostReport:
    a = target_array(h)
    bh = f is None or f.kind == "diagonal-bh"
    if f is None:
        f = fb_map(default_dimension(a.shape))
    c_hat = bh_optimal_cost(a) if bh and p is None and q is None else optimal_cost(a, f, p, q)
    j = shared_info_cost(a, f)
    bound = gap_lower_bound(a) if bh and a.shape[0] == a.shape[1] else None
    return CostReport(
        single_round_cost=c_hat,
        shared_info_cost=j,
        gap=c_hat - j,
        per_pair_costs=2.0 * np.abs(a) / f.sigma1,
        gap_bound=bound,
    )


def cost_gap_bound_check(h) -> bool:
    """Check C_hat(H) - J(H) >= (2 pi / n) sum_k (ceil(k/2) - 1) sigma_k(H) >= 0."""
    a = target_array(h)
    if a.shape[0] != a.shape[1]:
        raise PreconditionError("cost_gap_bound_check needs a square target")
    bound = gap_lower_bound(a)
    return bool(bh_optimal_cost(a) - shared_info_cost(a) >= bound - 1e-9 and bound >= 0.0)


def orthogonal_bounds_check(h) -> bool:
    """For orthogonal H: 2pi/n <= (2pi/n^2) sum|H_ij| <= 2pi/sqrt(n), plus the singular-value bound."""
    a = target_array(h)
    n = a.shape[0]
    if a.shape[0] != a.shape[1] or np.max(np.abs(a.T @ a - np.eye(n))) > 1e-10:
        raise PreconditionError("orthogonal_bounds_check needs an orthogonal matrix")
    return general_abs_sum_bound_check(a) and _orthogonal_abs_sum_ok(a)


def _orthogonal_abs_sum_ok(a: np.ndarray) -> bool:
    n = a.shape[0]
    value = 2.0 * math.pi / n**2 * np.sum(np.abs(a))
    return bool(2.0 * math.pi / n - 1e-12 <= value <= 2.0 * math.pi / math.sqrt(n) + 1e-12)


def general_abs_sum_bound_check(h) -> bool:
    """(2 pi / n^2) sum |H_ij| <= (2 pi / n) sum_k sigma_k(H) for any square H."""
    a = target_array(h)
    if a.shape[0] != a.shape[1]:
        raise PreconditionError("bound is stated for square matrices")
    n = a.shape[0]
    lhs = 2.0 * math.pi / n**2 * np.sum(np.abs(a))
    rhs = 2.0 * math.pi / n * np.sum(singular_values(a))
    return bool(lhs <= rhs + 1e-12 * max(1.0, rhs))
