"""Structural matrices, tilde conjugation, and validated quadratic generators.

Component ordering is fixed once, here: index ``i`` in ``0..n-1`` is the
annihilation operator of mode ``i+1`` and index ``n+i`` its creation partner.
Every flat tensor layout in the package derives from :class:`IndexScheme`,
which ravels multi-indices row-major (leftmost slot most significant).
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (
    CapacityError,
    ConditioningError,
    DimensionError,
    InvalidInputError,
    SymmetryViolationError,
    TildeViolationError,
)

# Relative tolerance for generator validation and absolute tolerance for the
# structural post-checks on S = exp(iJH).  The latter is looser because it
# absorbs the exponentiation error.
VALIDATION_TOL = 1e-12
STRUCTURE_TOL = 1e-10

DENSE_DIM_DEFAULT = 4096
VECTOR_DIM_DEFAULT = 1 << 24
BUDGET_ENV_VAR = "JUMPMOMENTS_MAX_DIM"


def _budget(default: int) -> int:
    raw = os.environ.get(BUDGET_ENV_VAR)
    if raw is None:
        return default
    try:
        value = int(raw)
    except ValueError as exc:
        raise CapacityError(f"{BUDGET_ENV_VAR}={raw!r} is not an integer") from exc
    if value < 1:
        raise CapacityError(f"{BUDGET_ENV_VAR} must be positive, got {value}")
    return value


def dense_dim_cap() -> int:
    """Largest matrix dimension for which dense tensor-space objects are built."""
    return _budget(DENSE_DIM_DEFAULT)


def vector_dim_cap() -> int:
    """Largest flat vector length handled by the matrix-free paths."""
    return _budget(VECTOR_DIM_DEFAULT)


def _as_square(K, name: str = "matrix") -> np.ndarray:
    K = np.asarray(K, dtype=complex)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {K.shape}")
    return K


def _even_dim(d: int, name: str) -> int:
    if d < 2 or d % 2 != 0:
        raise DimensionError(f"{name} must have even size 2n >= 2, got {d}")
    return d // 2


@dataclass(frozen=True)
class StructMatrices:
    """The mode-space structure matrices J and E for ``n`` modes."""

    n: int
    J: np.ndarray
    E: np.ndarray


def build_struct_matrices(n: int) -> StructMatrices:
    """Return J = [[0, -I], [I, 0]] and E = [[0, I], [I, 0]] for n modes."""
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise DimensionError(f"mode count must be a positive integer, got {n!r}")
    eye = np.eye(n, dtype=complex)
    zero = np.zeros((n, n), dtype=complex)
    J = np.block([[zero, -eye], [eye, zero]])
    E = np.block([[zero, eye], [eye, zero]])
    J.flags.writeable = False
    E.flags.writeable = False
    return StructMatrices(n=int(n), J=J, E=E)


def tilde_vec(g) -> np.ndarray:
    """Tilde conjugation of a mode-space vector: swap the annihilation and
    creation halves and conjugate elementwise."""
    g = np.asarray(g, dtype=complex)
    if g.ndim != 1:
        raise DimensionError(f"expected a vector, got shape {g.shape}")
    n = _even_dim(g.shape[0], "vector")
    out = np.conj(g)
    return np.concatenate([out[n:], out[:n]])


def tilde_mat(K) -> np.ndarray:
    """Tilde conjugation of a mode-space matrix: conjugate elementwise and
    swap the annihilation/creation halves of both indices."""
    K = _as_square(K)
    n = _even_dim(K.shape[0], "matrix")
    perm = np.concatenate([np.arange(n, 2 * n), np.arange(n)])
    return np.conj(K)[np.ix_(perm, perm)]


def mat_exp(A) -> np.ndarray:
    """Matrix exponential by scaling-and-squaring with a Pade approximant.

    Delegates to :func:`scipy.linalg.expm`, which picks the squaring count
    from the 1-norm of ``A``; robust for the non-normal generators that
    squeezing produces.
    """
    A = _as_square(A)
    if not np.all(np.isfinite(A)):
        raise InvalidInputError("matrix exponential input has non-finite entries")
    return scipy.linalg.expm(A)


def kron_power(A, M: int, max_dim: int | None = None) -> np.ndarray:
    """Return the M-fold Kronecker power A (x) A (x) ... (x) A.

    The leftmost factor is the most significant index, matching
    :class:`IndexScheme`.  Raises :class:`CapacityError` when the result
    dimension exceeds the budget; callers holding only vectors should use
    :func:`apply_kron` instead.
    """
    A = _as_square(A)
    if not isinstance(M, (int, np.integer)) or M < 1:
        raise DimensionError(f"Kronecker power must be a positive integer, got {M!r}")
    d = A.shape[0]
    cap = dense_dim_cap() if max_dim is None else max_dim
    if d**M > cap:
        raise CapacityError(
            f"Kronecker power dimension {d}^{M} exceeds the budget {cap}; "
            "use the matrix-free path (apply_kron) instead"
        )
    out = A
    for _ in range(M - 1):
        out = np.kron(out, A)
    return out


def apply_kron(A, v, M: int) -> np.ndarray:
    """Apply A^(x)M to a flat vector of length d^M without forming the
    Kronecker matrix, contracting one tensor slot at a time."""
    A = _as_square(A)
    d = A.shape[0]
    v = np.asarray(v, dtype=complex)
    if v.shape != (d**M,):
        raise DimensionError(f"vector length {v.shape} does not match {d}^{M}")
    T = v.reshape((d,) * M)
    for axis in range(M):
        T = np.moveaxis(np.tensordot(A, T, axes=(1, axis)), 0, axis)
    return T.reshape(-1)


@dataclass(frozen=True)
class IndexScheme:
    """Row-major flat indexing of order-M tensors over 2n components.

    Component ``i < n`` is the annihilation operator of mode ``i+1``,
    component ``n + i`` its creation partner.  The flat index of a
    multi-index ``(i_1, ..., i_M)`` is ``sum_m i_m * (2n)**(M-m)``.
    """

    n: int
    M: int

    def __post_init__(self):
        if self.n < 1 or self.M < 1:
            raise DimensionError(
                f"mode count and order must be positive, got n={self.n}, M={self.M}"
            )

    @property
    def dim(self) -> int:
        return 2 * self.n

    @property
    def size(self) -> int:
        return self.dim**self.M

    def flat(self, multi) -> int:
        multi = tuple(int(i) for i in multi)
        if len(multi) != self.M:
            raise DimensionError(f"expected {self.M} slots, got {len(multi)}")
        if any(i < 0 or i >= self.dim for i in multi):
            raise DimensionError(f"component index out of range in {multi}")
        return int(np.ravel_multi_index(multi, (self.dim,) * self.M))

    def multi(self, flat: int) -> tuple[int, ...]:
        if flat < 0 or flat >= self.size:
            raise DimensionError(f"flat index {flat} out of range for size {self.size}")
        return tuple(int(i) for i in np.unravel_index(flat, (self.dim,) * self.M))

    def component_label(self, i: int) -> str:
        if i < self.n:
            return f"a{i + 1}"
        return f"a{i - self.n + 1}+"

    def label(self, flat: int) -> str:
        return ".".join(self.component_label(i) for i in self.multi(flat))

    def labels(self) -> list[str]:
        return [self.label(k) for k in range(self.size)]

    def adjoint_component(self, i: int) -> int:
        """Index of the adjoint partner: annihilation <-> creation."""
        return (i + self.n) % self.dim

    def conjugation_reversal_permutation(self) -> np.ndarray:
        """Flat permutation ``p`` with ``p[flat(i_1..i_M)] =
        flat(adj(i_M)..adj(i_1))``, the index map of taking the adjoint of a
        slot-ordered operator product."""
        grids = np.indices((self.dim,) * self.M).reshape(self.M, -1)
        swapped = (grids[::-1] + self.n) % self.dim
        return np.ravel_multi_index(tuple(swapped), (self.dim,) * self.M)


@dataclass(frozen=True)
class QuadraticGenerator:
    """A validated quadratic jump generator.

    ``H`` is the 2n x 2n symmetric, tilde-real matrix of the unitary
    ``exp(-(i/2) a^T H a)``; ``S = exp(iJH)`` is its cached symplectic action
    on the component vector.  Construct through :func:`validate_generator`.
    """

    n: int
    H: np.ndarray
    S: np.ndarray

    @property
    def dim(self) -> int:
        return 2 * self.n


def validate_generator(n: int, H) -> QuadraticGenerator:
    """Check the generator conditions H = H^T = tilde(H), build S = exp(iJH),
    and verify the symplectic and tilde-reality structure of S.

    Raises :class:`SymmetryViolationError` or :class:`TildeViolationError`
    with the worst entry when a condition fails, and
    :class:`ConditioningError` when the post-exponentiation checks miss
    ``STRUCTURE_TOL``.
    """
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise DimensionError(f"mode count must be a positive integer, got {n!r}")
    H = _as_square(H, "H")
    if H.shape[0] != 2 * n:
        raise DimensionError(f"H must be {2 * n}x{2 * n} for n={n}, got {H.shape}")
    if not np.all(np.isfinite(H)):
        raise InvalidInputError("H has non-finite entries")

    scale = 1.0 + np.abs(H).max(initial=0.0)
    sym_dev = np.abs(H - H.T)
    if sym_dev.max(initial=0.0) > VALIDATION_TOL * scale:
        i, j = np.unravel_index(int(np.argmax(sym_dev)), H.shape)
        raise SymmetryViolationError(
            f"H is not symmetric: |H[{i},{j}] - H[{j},{i}]| = {sym_dev[i, j]:.3e} "
            f"exceeds {VALIDATION_TOL:g} * (1 + max|H|)"
        )
    tilde_dev = np.abs(tilde_mat(H) - H)
    if tilde_dev.max(initial=0.0) > VALIDATION_TOL * scale:
        i, j = np.unravel_index(int(np.argmax(tilde_dev)), H.shape)
        raise TildeViolationError(
            f"H is not tilde-real at entry ({i},{j}): deviation {tilde_dev[i, j]:.3e}; "
            "the jump operator exp(-(i/2) a^T H a) would not be unitary"
        )

    sm = build_struct_matrices(int(n))
    S = mat_exp(1j * (sm.J @ H))

    sympl_dev = np.abs(S.T @ sm.J @ S - sm.J).max()
    if sympl_dev > STRUCTURE_TOL:
        raise ConditioningError(
            f"S^T J S deviates from J by {sympl_dev:.3e} after exponentiation; "
            "H is too large or too ill-conditioned for reliable structure"
        )
    tilde_s_dev = np.abs(tilde_mat(S) - S).max()
    if tilde_s_dev > STRUCTURE_TOL:
        raise ConditioningError(
            f"tilde(S) deviates from S by {tilde_s_dev:.3e} after exponentiation"
        )

    H = H.copy()
    H.flags.writeable = False
    S.flags.writeable = False
    return QuadraticGenerator(n=int(n), H=H, S=S)
