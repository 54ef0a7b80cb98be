"""Closed-form initial moment tensors for standard states.

Gaussian states (vacuum, coherent, squeezed-coherent) get arbitrary-order
slot-ordered moments through a Wick expansion over singleton/pair partitions;
pairs contract to slot-ordered centered second moments, which is the correct
rule for non-symmetrized operator products.  Fock states carry closed forms
only up to second order; higher orders go through the Fock-space oracle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, ConfigurationError, DimensionError
from .propagator import MomentTensor
from .symplectic import QuadraticGenerator, vector_dim_cap

VACUUM = "vacuum"
COHERENT = "coherent"
FOCK = "fock"
GAUSSIAN_PURE = "gaussian-pure"

KINDS = (VACUUM, COHERENT, FOCK, GAUSSIAN_PURE)
_GAUSSIAN_KINDS = (VACUUM, COHERENT, GAUSSIAN_PURE)


@dataclass(frozen=True, eq=False)
class StateSpec:
    """Description of an initial state.

    kind:
        one of ``vacuum``, ``coherent``, ``fock``, ``gaussian-pure``.
    alpha:
        length-n complex displacement (coherent and gaussian-pure).
    occupations:
        length-n nonnegative integers (fock).
    squeeze:
        optional validated generator whose unitary is applied to the
        displaced vacuum (gaussian-pure); None means no squeezing.
    """

    kind: str
    n: int
    alpha: np.ndarray | None = None
    occupations: tuple[int, ...] | None = None
    squeeze: QuadraticGenerator | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown state kind {self.kind!r}; expected one of {KINDS}")
        if self.n < 1:
            raise ConfigurationError(f"mode count must be positive, got {self.n}")
        needs_alpha = self.kind in (COHERENT, GAUSSIAN_PURE)
        if needs_alpha:
            if self.alpha is None:
                raise ConfigurationError(f"{self.kind} state requires alpha")
            alpha = np.asarray(self.alpha, dtype=complex).reshape(-1)
            if alpha.shape != (self.n,):
                raise ConfigurationError(
                    f"alpha must have length n={self.n}, got {alpha.shape[0]}"
                )
            if not np.all(np.isfinite(alpha)):
                raise ConfigurationError("alpha has non-finite entries")
            alpha = alpha.copy()
            alpha.flags.writeable = False
            object.__setattr__(self, "alpha", alpha)
        elif self.alpha is not None:
            raise ConfigurationError(f"{self.kind} state does not take alpha")
        if self.kind == FOCK:
            if self.occupations is None:
                raise ConfigurationError("fock state requires occupations")
            occ = tuple(int(m) for m in self.occupations)
            if len(occ) != self.n or any(m < 0 for m in occ):
                raise ConfigurationError(
                    f"occupations must be {self.n} nonnegative integers, got {self.occupations}"
                )
            object.__setattr__(self, "occupations", occ)
        elif self.occupations is not None:
            raise ConfigurationError(f"{self.kind} state does not take occupations")
        if self.squeeze is not None:
            if self.kind != GAUSSIAN_PURE:
                raise ConfigurationError(f"{self.kind} state does not take a squeeze generator")
            if self.squeeze.n != self.n:
                raise ConfigurationError(
                    f"squeeze generator acts on {self.squeeze.n} modes, state has {self.n}"
                )


def vacuum_state(n: int) -> StateSpec:
    return StateSpec(kind=VACUUM, n=n)


def coherent_state(alpha) -> StateSpec:
    alpha = np.atleast_1d(np.asarray(alpha, dtype=complex))
    return StateSpec(kind=COHERENT, n=alpha.shape[0], alpha=alpha)


def fock_state(occupations) -> StateSpec:
    occ = tuple(int(m) for m in np.atleast_1d(occupations))
    return StateSpec(kind=FOCK, n=len(occ), occupations=occ)


def gaussian_pure_state(alpha, squeeze: QuadraticGenerator | None = None) -> StateSpec:
    alpha = np.atleast_1d(np.asarray(alpha, dtype=complex))
    return StateSpec(kind=GAUSSIAN_PURE, n=alpha.shape[0], alpha=alpha, squeeze=squeeze)


def _vacuum_pair_moments(n: int) -> np.ndarray:
    # Slot-ordered vacuum contractions: <a_i a_j+> = delta_ij, all others 0.
    C = np.zeros((2 * n, 2 * n), dtype=complex)
    C[:n, n:] = np.eye(n)
    return C


def mean_vector(spec: StateSpec) -> np.ndarray:
    """First moments <a_i> as a length-2n component vector."""
    if spec.kind in (VACUUM, FOCK):
        return np.zeros(2 * spec.n, dtype=complex)
    mean = np.concatenate([spec.alpha, np.conj(spec.alpha)])
    if spec.kind == GAUSSIAN_PURE and spec.squeeze is not None:
        # The squeeze unitary U maps components by S under conjugation
        # (U+ a U = S a), so the state U|alpha> has means S (alpha, conj alpha).
        mean = spec.squeeze.S @ mean
    return mean


def pair_covariance(spec: StateSpec) -> np.ndarray:
    """Slot-ordered centered second moments C[i,j] = <a_i a_j> - <a_i><a_j>
    for Gaussian kinds."""
    if spec.kind not in _GAUSSIAN_KINDS:
        raise ConfigurationError(f"{spec.kind} state is not Gaussian")
    C = _vacuum_pair_moments(spec.n)
    if spec.kind == GAUSSIAN_PURE and spec.squeeze is not None:
        S = spec.squeeze.S
        C = S @ C @ S.T
    return C


def first_two_moments(spec: StateSpec) -> tuple[MomentTensor, MomentTensor]:
    """Closed-form first and second moment tensors for any supported kind."""
    n = spec.n
    if spec.kind == FOCK:
        occ = np.asarray(spec.occupations, dtype=float)
        mu1 = np.zeros(2 * n, dtype=complex)
        T = np.zeros((2 * n, 2 * n), dtype=complex)
        T[:n, n:] = np.diag(occ + 1.0)
        T[n:, :n] = np.diag(occ)
        return (
            MomentTensor.from_array(n, 1, mu1),
            MomentTensor.from_array(n, 2, T.reshape(-1)),
        )
    m = mean_vector(spec)
    C = pair_covariance(spec)
    mu2 = np.outer(m, m) + C
    return (
        MomentTensor.from_array(n, 1, m),
        MomentTensor.from_array(n, 2, mu2.reshape(-1)),
    )


def _wick_tensor(mean: np.ndarray, cov: np.ndarray, M: int) -> np.ndarray:
    # Order-m tensors satisfy the first-slot expansion
    #   T_m = mean (x) T_{m-1} + sum_q C[slot0, slot q] (x) T_{m-2}
    # which sums exactly the singleton/pair partitions with slot-ordered pairs.
    prev2 = np.ones(())
    prev1 = mean.copy()
    if M == 0:
        return prev2
    for m in range(2, M + 1):
        t = np.multiply.outer(mean, prev1)
        for q in range(1, m):
            t += np.moveaxis(np.multiply.outer(cov, prev2), 1, q)
        prev2, prev1 = prev1, t
    return prev1


def gaussian_moments(spec: StateSpec, M: int) -> MomentTensor:
    """Order-M slot-ordered moment tensor of a Gaussian state by Wick
    expansion."""
    if spec.kind == FOCK:
        raise ConfigurationError(
            "fock states have no Gaussian moment expansion; orders above 2 "
            "require the Fock-space oracle"
        )
    if spec.kind not in _GAUSSIAN_KINDS:
        raise ConfigurationError(f"{spec.kind} state is not Gaussian")
    if not isinstance(M, (int, np.integer)) or M < 1:
        raise DimensionError(f"moment order must be a positive integer, got {M!r}")
    size = (2 * spec.n) ** M
    if size > vector_dim_cap():
        raise CapacityError(
            f"moment-tensor size (2n)^M = {size} exceeds the vector budget "
            f"{vector_dim_cap()}"
        )
    T = _wick_tensor(mean_vector(spec), pair_covariance(spec), int(M))
    return MomentTensor.from_array(spec.n, int(M), np.asarray(T).reshape(-1))


def initial_moments(spec: StateSpec, M: int) -> MomentTensor:
    """Order-M initial moments for any supported kind; Fock states are
    limited to M <= 2."""
    if spec.kind == FOCK:
        M = int(M)
        if M == 1:
            return first_two_moments(spec)[0]
        if M == 2:
            return first_two_moments(spec)[1]
        raise ConfigurationError(
            "fock initial moments beyond order 2 must be extracted with the "
            "Fock-space oracle"
        )
    return gaussian_moments(spec, M)
