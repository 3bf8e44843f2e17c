"""Fourier-coefficient controls and bilinear input-output maps.

A control lives in the closed span of the basis

    sqrt(2) sin(2 pi t), sqrt(2) cos(2 pi t), sqrt(2) sin(4 pi t), ...

with Alice's and Bob's signals using different sine/cosine sign patterns so
that the Brockett-Heisenberg output pairing is the diagonal matrix

    F_B = diag(1/pi, 1/pi, 1/(2 pi), 1/(2 pi), ...).

Coefficient index k (1-based) belongs to harmonic ceil(k/2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal, Optional

import numpy as np

from .errors import InvalidInputError, PreconditionError
from .linalg import RANK_TOL, as_matrix, numerical_rank, singular_values

Role = Literal["alice", "bob"]

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True, eq=False)
class ControlSignal:
    """One admissible control, stored as its Fourier coefficients.

    Calling the signal evaluates it at time(s) ``t``.
    """

    role: Role
    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.role not in ("alice", "bob"):
            raise InvalidInputError(f"role must be 'alice' or 'bob', got {self.role!r}")
        c = np.asarray(self.coeffs, dtype=float).ravel()
        if c.size == 0 or not np.all(np.isfinite(c)):
            raise InvalidInputError("control coefficients must be a non-empty finite sequence")
        object.__setattr__(self, "coeffs", c)

    def __len__(self) -> int:
        return self.coeffs.size

    def __call__(self, t):
        return eval_signal(self, t)

    @property
    def energy(self) -> float:
        return signal_energy(self)

    def padded(self, length: int) -> np.ndarray:
        if length < self.coeffs.size:
            raise PreconditionError(
                f"signal has {self.coeffs.size} coefficients, cannot fit into {length}"
            )
        out = np.zeros(length)
        out[: self.coeffs.size] = self.coeffs
        return out


def eval_signal(c: ControlSignal, t):
    """Evaluate the control at scalar or array ``t``."""
    t = np.asarray(t, dtype=float)
    a = c.coeffs
    # pad to an even count so coefficients pair up harmonic by harmonic
    if a.size % 2:
        a = np.append(a, 0.0)
    odd, even = a[0::2], a[1::2]
    k = np.arange(1, odd.size + 1)
    phase = 2.0 * np.pi * np.multiply.outer(t, k)
    s, co = np.sin(phase), np.cos(phase)
    if c.role == "alice":
        val = s @ odd + co @ even
    else:
        val = -co @ odd + s @ even
    return SQRT2 * val


def signal_energy(c: ControlSignal) -> float:
    """Integral of the squared control over one unit round (Parseval)."""
    return float(c.coeffs @ c.coeffs)


def fb_diagonal(l: int) -> np.ndarray:
    k = np.arange(1, l + 1)
    return 1.0 / (np.pi * np.ceil(k / 2.0))


@dataclass(frozen=True, eq=False)
class BilinearMap:
    """Finite matrix representation of a bilinear input-output functional.

    ``kind="diagonal-bh"`` marks a leading block of the infinite B-H map,
    whose rank is unbounded no matter how far it is truncated.
    """

    repr: np.ndarray
    kind: Literal["generic", "diagonal-bh"] = "generic"
    declared_norm: Optional[float] = None

    def __post_init__(self):
        a = as_matrix(self.repr, "bilinear map")
        if a.shape[0] != a.shape[1]:
            raise InvalidInputError(f"bilinear map must be square, got {a.shape}")
        if self.kind not in ("generic", "diagonal-bh"):
            raise InvalidInputError(f"unknown map kind {self.kind!r}")
        if self.kind == "diagonal-bh" and not np.array_equal(a, np.diag(fb_diagonal(a.shape[0]))):
            raise InvalidInputError("diagonal-bh map must equal the truncated F_B matrix")
        object.__setattr__(self, "repr", a)

    @property
    def dim(self) -> int:
        return self.repr.shape[0]

    @property
    def unbounded_rank(self) -> bool:
        return self.kind == "diagonal-bh"

    def singular_values(self) -> np.ndarray:
        if self.kind == "diagonal-bh":
            return fb_diagonal(self.dim)
        return singular_values(self.repr)

    @property
    def sigma1(self) -> float:
        return float(self.singular_values()[0])

    def rank(self, tol: float = RANK_TOL) -> int:
        if self.kind == "diagonal-bh":
            return self.dim
        return numerical_rank(self.repr, tol)

    def is_diagonal(self) -> bool:
        a = self.repr
        return bool(np.all(a == np.diag(np.diag(a))))

    def is_strongly_regular(self) -> bool:
        """Diagonal with positive, non-increasing diagonal entries."""
        if not self.is_diagonal():
            return False
        d = np.diag(self.repr)
        return bool(np.all(d > 0) and np.all(d[:-1] >= d[1:]))

    def is_regular(self, tol: float = RANK_TOL) -> bool:
        """Leading principal minors up to the rank are nonsingular."""
        r = self.rank(tol)
        for j in range(1, r + 1):
            if numerical_rank(self.repr[:j, :j], tol) < j:
                return False
        return True


def fb_map(l: int) -> BilinearMap:
    """The ``l x l`` leading block of the Brockett-Heisenberg map F_B."""
    if l < 1:
        raise PreconditionError("fb_map: l must be >= 1")
    return BilinearMap(np.diag(fb_diagonal(l)), kind="diagonal-bh", declared_norm=1.0 / np.pi)


def pair_output(u: ControlSignal, v: ControlSignal, f: BilinearMap) -> float:
    """Output ``u^T F v`` produced when Alice plays ``u`` and Bob plays ``v``."""
    if u.role != "alice" or v.role != "bob":
        raise InvalidInputError("pair_output expects (alice, bob) signals")
    a = u.padded(f.dim)
    b = v.padded(f.dim)
    if f.kind == "diagonal-bh":
        return bh_series(a, b)
    return float(a @ f.repr @ b)


def bh_series(a: np.ndarray, b: np.ndarray) -> float:
    """sum_k a_{2k-1} b_{2k-1} / (pi k) + sum_k a_{2k} b_{2k} / (pi k), correctly rounded."""
    n = min(a.size, b.size)
    odd = [a[i] * b[i] / (math.pi * (i // 2 + 1)) for i in range(0, n, 2)]
    even = [a[i] * b[i] / (math.pi * (i // 2 + 1)) for i in range(1, n, 2)]
    return math.fsum(odd) + math.fsum(even)


def map_norm_bound_check(f: BilinearMap) -> bool:
    """Every singular value of the representation stays below the declared norm."""
    if f.declared_norm is None:
        raise PreconditionError("map_norm_bound_check: map has no declared norm")
    return bool(np.all(f.singular_values() <= f.declared_norm + 1e-12))
