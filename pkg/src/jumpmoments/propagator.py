"""Exact dynamics of slot-ordered moment tensors under Poisson unitary jumps.

The order-M moments evolve linearly: mu(t) = exp(G t) mu(0) with
G = sum_k rate_k (S_k^(x)M - I).  Small problems build G densely and reuse the
matrix exponential; large ones keep only the 2n x 2n factors and apply the
exponential as a scaled truncated series acting on the flat vector.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    AccuracyError,
    CapacityError,
    ConfigurationError,
    DimensionError,
    InvalidInputError,
    RangeOverflowError,
)
from .symplectic import (
    DENSE_DIM_DEFAULT,
    IndexScheme,
    QuadraticGenerator,
    apply_kron,
    build_struct_matrices,
    kron_power,
    mat_exp,
    vector_dim_cap,
)

# Magnitudes beyond this raise RangeOverflowError instead of propagating inf.
OVERFLOW_LIMIT = 1e300

# Per-substep tolerance of the truncated-series exponential action.
SERIES_TOL = 1e-12
SERIES_MAX_TERMS = 64


class ChannelSet:
    """An ordered collection of (rate, generator) jump channels.

    Rates are per unit time and must be positive; all generators must act on
    the same number of modes.
    """

    def __init__(self, channels):
        pairs = list(channels)
        if not pairs:
            raise ConfigurationError("at least one channel is required")
        rates = []
        gens = []
        for k, (rate, gen) in enumerate(pairs):
            rate = float(rate)
            if not np.isfinite(rate) or rate <= 0.0:
                raise ConfigurationError(f"channels[{k}]: rate must be positive, got {rate}")
            if not isinstance(gen, QuadraticGenerator):
                raise ConfigurationError(
                    f"channels[{k}]: expected a validated QuadraticGenerator"
                )
            rates.append(rate)
            gens.append(gen)
        n = gens[0].n
        for k, gen in enumerate(gens):
            if gen.n != n:
                raise ConfigurationError(
                    f"channels[{k}] acts on {gen.n} modes but channels[0] on {n}"
                )
        self.n = n
        self.rates = tuple(rates)
        self.generators = tuple(gens)

    def __len__(self) -> int:
        return len(self.rates)

    def __iter__(self):
        return iter(zip(self.rates, self.generators))

    @property
    def total_rate(self) -> float:
        return float(sum(self.rates))


@dataclass(frozen=True, eq=False)
class MomentTensor:
    """Order-M tensor of slot-ordered expectation values, stored flat.

    ``data[flat(i_1..i_M)]`` is the expectation of the operator product
    ``a_{i_1} a_{i_2} ... a_{i_M}`` in left-to-right order, with the flat
    layout of :class:`IndexScheme`.
    """

    n: int
    M: int
    data: np.ndarray

    @classmethod
    def from_array(cls, n: int, M: int, values) -> "MomentTensor":
        scheme = IndexScheme(n, M)
        data = np.asarray(values, dtype=complex).reshape(-1)
        if data.shape != (scheme.size,):
            raise DimensionError(
                f"moment data has length {data.shape[0]}, expected {scheme.size} "
                f"for n={n}, M={M}"
            )
        data = data.copy()
        data.flags.writeable = False
        return cls(n=n, M=M, data=data)

    @property
    def scheme(self) -> IndexScheme:
        return IndexScheme(self.n, self.M)

    def as_tensor(self) -> np.ndarray:
        return self.data.reshape((2 * self.n,) * self.M)

    def permute_slots(self, order) -> "MomentTensor":
        """Reorder tensor slots: slot m of the result is slot order[m] of self."""
        order = tuple(int(i) for i in order)
        if sorted(order) != list(range(self.M)):
            raise DimensionError(f"{order} is not a permutation of {self.M} slots")
        return MomentTensor.from_array(
            self.n, self.M, self.as_tensor().transpose(order).reshape(-1)
        )

    def conjugation_reversal_residual(self) -> float:
        """Max deviation from conj(mu[i_1..i_M]) = mu[adj(i_M)..adj(i_1)],
        the symmetry every moment tensor of a physical state satisfies."""
        perm = self.scheme.conjugation_reversal_permutation()
        return float(np.abs(np.conj(self.data) - self.data[perm]).max())

    def ccr_antisymmetry_residual(self) -> float:
        """Max deviation of mu[i,j] - mu[j,i] from -J[i,j] (order 2 only)."""
        if self.M != 2:
            raise DimensionError("CCR antisymmetry is defined for order-2 tensors")
        J = build_struct_matrices(self.n).J
        T = self.as_tensor()
        return float(np.abs((T - T.T) + J).max())


def _check_range(data: np.ndarray, t: float):
    if not np.all(np.isfinite(data)) or np.abs(data).max(initial=0.0) > OVERFLOW_LIMIT:
        raise RangeOverflowError(
            f"moment magnitude exceeded {OVERFLOW_LIMIT:g} at t={t:g}", t=t
        )


@dataclass(frozen=True, eq=False)
class MomentGenerator:
    """The moment-space generator G = sum_k rate_k (S_k^(x)M - I).

    ``dense`` holds the full matrix when it fits the budget; otherwise it is
    None and ``apply``/``expm_action`` work through per-slot contractions of
    the stored 2n x 2n factors.
    """

    n: int
    M: int
    rates: tuple[float, ...]
    factors: tuple[np.ndarray, ...]
    dense: np.ndarray | None

    @property
    def size(self) -> int:
        return (2 * self.n) ** self.M

    @property
    def is_dense(self) -> bool:
        return self.dense is not None

    def apply(self, v: np.ndarray) -> np.ndarray:
        """Return G @ v."""
        v = np.asarray(v, dtype=complex)
        if self.dense is not None:
            return self.dense @ v
        out = np.zeros_like(v)
        for rate, S in zip(self.rates, self.factors):
            out += rate * (apply_kron(S, v, self.M) - v)
        return out

    def _norm_bound(self) -> float:
        # ||G||_1 <= sum_k rate_k (||S_k||_1^M + 1); the induced 1-norm is
        # multiplicative over Kronecker factors.
        total = 0.0
        for rate, S in zip(self.rates, self.factors):
            total += rate * (float(np.abs(S).sum(axis=0).max()) ** self.M + 1.0)
        return total

    def expm_action(self, v: np.ndarray, t: float, max_terms: int = SERIES_MAX_TERMS) -> np.ndarray:
        """Return exp(G t) @ v by scaled truncated Taylor series."""
        v = np.asarray(v, dtype=complex)
        if t == 0.0:
            return v.copy()
        steps = max(1, int(np.ceil(self._norm_bound() * abs(t))))
        tau = t / steps
        for _ in range(steps):
            total = v.copy()
            term = v
            converged = False
            for j in range(1, max_terms + 1):
                term = (tau / j) * self.apply(term)
                total = total + term
                tnorm = float(np.abs(term).max(initial=0.0))
                if not np.isfinite(tnorm):
                    raise RangeOverflowError(
                        f"series term overflowed during exp action at t={t:g}", t=t
                    )
                if tnorm <= SERIES_TOL * max(float(np.abs(total).max()), 1e-300):
                    converged = True
                    break
            if not converged:
                raise AccuracyError(
                    f"exponential-action series did not converge in {max_terms} terms; "
                    f"achieved relative term size "
                    f"{tnorm / max(float(np.abs(total).max()), 1e-300):.3e} "
                    f"(requested {SERIES_TOL:g})"
                )
            v = total
        return v


def build_generator(
    channels: ChannelSet, M: int, max_dense_dim: int | None = None
) -> MomentGenerator:
    """Assemble the order-M moment generator for a channel set.

    Dense mode is used when (2n)^M fits ``max_dense_dim`` (default
    ``DENSE_DIM_DEFAULT``); beyond that only the factors are stored and the
    generator acts matrix-free.
    """
    if not isinstance(channels, ChannelSet):
        channels = ChannelSet(channels)
    if not isinstance(M, (int, np.integer)) or M < 1:
        raise DimensionError(f"moment order must be a positive integer, got {M!r}")
    size = (2 * channels.n) ** M
    dense_cap = DENSE_DIM_DEFAULT if max_dense_dim is None else max_dense_dim
    if size > vector_dim_cap():
        raise CapacityError(
            f"moment-tensor size (2n)^M = {size} exceeds the vector budget "
            f"{vector_dim_cap()}"
        )
    factors = tuple(gen.S for gen in channels.generators)
    dense = None
    if size <= dense_cap:
        dense = np.zeros((size, size), dtype=complex)
        for rate, S in zip(channels.rates, factors):
            dense += rate * kron_power(S, M, max_dim=size)
        dense -= channels.total_rate * np.eye(size)
        dense.flags.writeable = False
    return MomentGenerator(
        n=channels.n, M=int(M), rates=channels.rates, factors=factors, dense=dense
    )


def _check_compatible(gen: MomentGenerator, mu0: MomentTensor):
    if mu0.n != gen.n or mu0.M != gen.M:
        raise ConfigurationError(
            f"moment tensor (n={mu0.n}, M={mu0.M}) does not match generator "
            f"(n={gen.n}, M={gen.M})"
        )
    if not np.all(np.isfinite(mu0.data)):
        raise InvalidInputError("initial moment tensor has non-finite entries")


def _check_time(t: float) -> float:
    t = float(t)
    if not np.isfinite(t) or t < 0.0:
        raise InvalidInputError(f"time must be finite and nonnegative, got {t}")
    return t


def propagate(gen: MomentGenerator, mu0: MomentTensor, t: float) -> MomentTensor:
    """Evolve a moment tensor: exp(G t) mu0."""
    _check_compatible(gen, mu0)
    t = _check_time(t)
    if t == 0.0:
        return mu0
    if gen.is_dense:
        with np.errstate(over="ignore", invalid="ignore"):
            data = mat_exp(gen.dense * t) @ mu0.data
    else:
        data = gen.expm_action(mu0.data, t)
    _check_range(data, t)
    return MomentTensor.from_array(gen.n, gen.M, data)


def propagate_series(gen: MomentGenerator, mu0: MomentTensor, t_grid) -> list[MomentTensor]:
    """Evolve along an increasing time grid, stepping incrementally with
    exp(G dt) between grid points."""
    _check_compatible(gen, mu0)
    grid = [float(t) for t in t_grid]
    if not grid:
        raise ConfigurationError("time grid must be nonempty")
    for t in grid:
        _check_time(t)
    diffs = np.diff(grid)
    if np.any(diffs <= 0.0):
        raise ConfigurationError(f"time grid must be strictly increasing, got {grid}")

    out = [propagate(gen, mu0, grid[0])]
    step_cache: dict[float, np.ndarray] = {}
    current = out[0].data
    for j, dt in enumerate(diffs):
        if gen.is_dense:
            E = step_cache.get(dt)
            if E is None:
                E = mat_exp(gen.dense * dt)
                step_cache[dt] = E
            with np.errstate(over="ignore", invalid="ignore"):
                current = E @ current
        else:
            current = gen.expm_action(current, dt)
        _check_range(current, grid[j + 1])
        out.append(MomentTensor.from_array(gen.n, gen.M, current))
    return out


def first_second_moments(
    channels: ChannelSet, mu1_0: MomentTensor, mu2_0: MomentTensor, t: float
) -> tuple[MomentTensor, MomentTensor]:
    """First and second moments at time t, via the order-1 and order-2
    specializations exp(sum rate (S - I) t) and exp(sum rate (S(x)S - I) t)."""
    if not isinstance(channels, ChannelSet):
        channels = ChannelSet(channels)
    t = _check_time(t)
    d = 2 * channels.n
    G1 = np.zeros((d, d), dtype=complex)
    G2 = np.zeros((d * d, d * d), dtype=complex)
    for rate, gen in channels:
        G1 += rate * (gen.S - np.eye(d))
        G2 += rate * (np.kron(gen.S, gen.S) - np.eye(d * d))
    for mu, M, G in ((mu1_0, 1, G1), (mu2_0, 2, G2)):
        if mu.n != channels.n or mu.M != M:
            raise ConfigurationError(
                f"expected an order-{M} tensor on {channels.n} modes, "
                f"got n={mu.n}, M={mu.M}"
            )
        if not np.all(np.isfinite(mu.data)):
            raise InvalidInputError("initial moment tensor has non-finite entries")
    mu1 = mat_exp(G1 * t) @ mu1_0.data
    mu2 = mat_exp(G2 * t) @ mu2_0.data
    _check_range(mu1, t)
    _check_range(mu2, t)
    return (
        MomentTensor.from_array(channels.n, 1, mu1),
        MomentTensor.from_array(channels.n, 2, mu2),
    )
