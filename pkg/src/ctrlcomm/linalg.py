"""Dense real linear algebra: SVD, symmetric eigensolver, polar factors, rank.

Matrices are plain 2-D float64 numpy arrays. ``as_matrix`` is the single
gatekeeper that turns user data into one (rejecting ragged or non-finite
input), so the other functions can assume clean arrays.

The SVD is a one-sided (Hestenes) Jacobi iteration. It is slower than
LAPACK but accurate to working precision on the small matrices this package
deals with, and it keeps every singular value in the computation traceable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, PreconditionError

RANK_TOL = 1e-9

_EPS = np.finfo(float).eps


def as_matrix(m, name: str = "matrix") -> np.ndarray:
    """Return ``m`` as a finite 2-D float64 array or raise InvalidInputError."""
    try:
        a = np.array(m, dtype=float)
    except (TypeError, ValueError) as exc:
        raise InvalidInputError(f"{name}: not a rectangular numeric array ({exc})") from None
    if a.ndim == 1:
        a = a.reshape(1, -1)
    if a.ndim != 2 or a.size == 0:
        raise InvalidInputError(f"{name}: expected a non-empty 2-D array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidInputError(f"{name}: entries must be finite")
    return a


@dataclass(frozen=True)
class SvdResult:
    left: np.ndarray
    singular_values: np.ndarray
    right: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.left * self.singular_values) @ self.right.T


def _complete_orthonormal(q: np.ndarray, keep: np.ndarray) -> np.ndarray:
    """Replace the columns of ``q`` not flagged in ``keep`` by an orthonormal completion."""
    rows, cols = q.shape
    basis = [q[:, k] for k in range(cols) if keep[k]]
    out = q.copy()
    candidates = iter(np.eye(rows))
    for k in range(cols):
        if keep[k]:
            continue
        while True:
            w = next(candidates).copy()
            # two passes of Gram-Schmidt; one is not enough in floating point
            for _ in range(2):
                for b in basis:
                    w -= (b @ w) * b
            nrm = np.linalg.norm(w)
            if nrm > 1e-8:
                w /= nrm
                break
        basis.append(w)
        out[:, k] = w
    return out


def _jacobi_tall(a: np.ndarray, max_sweeps: int = 60):
    """One-sided Jacobi on a matrix with rows >= cols. Returns thin (U, s, V)."""
    u = a.copy()
    n = u.shape[1]
    v = np.eye(n)
    tol = _EPS * n
    for _ in range(max_sweeps):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                up, uq = u[:, p], u[:, q]
                alpha = up @ up
                beta = uq @ uq
                gamma = up @ uq
                if gamma == 0.0 or abs(gamma) <= tol * np.sqrt(alpha * beta):
                    continue
                with np.errstate(over="ignore"):
                    zeta = (beta - alpha) / (2.0 * gamma)
                if not np.isfinite(zeta):
                    # coupling is below the resolution of the column norms
                    continue
                rotated = True
                t = np.copysign(1.0, zeta) / (abs(zeta) + np.hypot(1.0, zeta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = c * t
                new_p = c * up - s * uq
                u[:, q] = s * up + c * uq
                u[:, p] = new_p
                vp = v[:, p].copy()
                v[:, p] = c * vp - s * v[:, q]
                v[:, q] = s * vp + c * v[:, q]
        if not rotated:
            break

    sv = np.linalg.norm(u, axis=0)
    order = np.argsort(-sv, kind="stable")
    sv, u, v = sv[order], u[:, order], v[:, order]
    scale = sv[0] if sv.size and sv[0] > 0 else 1.0
    keep = sv > _EPS * scale * max(a.shape)
    left = np.zeros_like(u)
    left[:, keep] = u[:, keep] / sv[keep]
    left = _complete_orthonormal(left, keep)
    sv = np.where(keep, sv, 0.0)
    return left, sv, v


def svd(m) -> SvdResult:
    """Thin singular value decomposition, values in descending order.

    For an ``r x c`` input the result has ``left`` of shape ``(r, k)``,
    ``singular_values`` of length ``k`` and ``right`` of shape ``(c, k)``
    with ``k = min(r, c)``.
    """
    a = as_matrix(m)
    # work on a unit-scaled copy so the Gram products cannot overflow
    scale = float(np.max(np.abs(a)))
    if scale == 0.0:
        scale = 1.0
    a = a / scale
    if a.shape[0] >= a.shape[1]:
        left, sv, right = _jacobi_tall(a)
    else:
        right, sv, left = _jacobi_tall(a.T)
    return SvdResult(left=left, singular_values=sv * scale, right=right)


def singular_values(m) -> np.ndarray:
    return svd(m).singular_values


def sym_eig(s) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a symmetric matrix.

    Returns ``(values, vectors)`` with values descending and the k-th column
    of ``vectors`` the unit eigenvector for ``values[k]``.
    """
    a = as_matrix(s)
    if a.shape[0] != a.shape[1]:
        raise InvalidInputError(f"sym_eig: matrix must be square, got {a.shape}")
    scale = max(1.0, float(np.max(np.abs(a))))
    if np.max(np.abs(a - a.T)) > 1e-12 * scale:
        raise InvalidInputError("sym_eig: matrix is not symmetric")
    vals, vecs = np.linalg.eigh(0.5 * (a + a.T))
    order = np.argsort(-vals, kind="stable")
    return vals[order], vecs[:, order]


def polar_decompose(m) -> tuple[np.ndarray, np.ndarray]:
    """Polar factors ``(theta, r)`` with ``m = theta @ r``.

    ``theta`` is orthogonal and ``r`` symmetric positive semidefinite. The
    left-handed form ``m.T = r' @ theta'.T`` used when factoring ``F V^T`` is
    obtained by decomposing the transpose.
    """
    a = as_matrix(m)
    if a.shape[0] != a.shape[1]:
        raise InvalidInputError(f"polar_decompose: matrix must be square, got {a.shape}")
    res = svd(a)
    theta = res.left @ res.right.T
    r = (res.right * res.singular_values) @ res.right.T
    return theta, 0.5 * (r + r.T)


def numerical_rank(m, tol: float = RANK_TOL) -> int:
    """Number of singular values above ``tol * sigma_1`` (0 for the zero matrix)."""
    if tol <= 0:
        raise PreconditionError("numerical_rank: tol must be positive")
    sv = singular_values(m)
    if sv[0] == 0.0:
        return 0
    return int(np.count_nonzero(sv > tol * sv[0]))


def interlace_check(m, l: int, atol: float = 1e-10) -> bool:
    """Check sigma_i(m) >= sigma_i(m[:l, :l]) for i <= l."""
    a = as_matrix(m)
    if not 1 <= l < min(a.shape):
        raise PreconditionError(f"interlace_check: need 1 <= l < {min(a.shape)}, got {l}")
    full = singular_values(a)
    block = singular_values(a[:l, :l])
    return bool(np.all(full[:l] >= block - atol))


def random_orthogonal(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed orthogonal matrix via sign-corrected QR of a Gaussian."""
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))
