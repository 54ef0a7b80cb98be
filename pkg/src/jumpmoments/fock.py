"""Truncated Fock-space oracle for the unitary-jump master equation.

Ground truth is produced the slow way on purpose: build each jump operator by
exponentiating the truncated quadratic Hamiltonian (truncate-then-exponentiate,
so it stays exactly unitary on the truncated space), integrate the density
matrix with fixed-step RK4 under Richardson step-halving control, and read
moments off as traces against explicit ladder-matrix products.  Truncation
quality is tracked through the population of the top two occupation levels of
each mode.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    AccuracyError,
    CapacityError,
    ConditioningError,
    ConfigurationError,
    DimensionError,
    InvalidInputError,
    LeakageError,
    MarginError,
)
from .propagator import ChannelSet, MomentTensor
from .states import COHERENT, FOCK, GAUSSIAN_PURE, VACUUM, StateSpec
from .symplectic import IndexScheme, QuadraticGenerator, dense_dim_cap, mat_exp

UNITARITY_TOL = 1e-10
LEAKAGE_LIMIT = 1e-6
# A level counts as occupied when its population exceeds this; aligned with
# the leakage limit so the margin rule and the leakage metric grade the same
# truncation quality.
SUPPORT_TOL = 1e-6


class FockSpace:
    """n bosonic modes with per-mode occupation cutoff.

    Basis states are |m_1, ..., m_n> with 0 <= m_j <= cutoff, flattened
    row-major (mode 1 most significant).  Component index i < n is the
    annihilation operator of mode i+1, index n+i its creation partner,
    matching :class:`IndexScheme`.
    """

    def __init__(self, n: int, cutoff: int, max_dim: int | None = None):
        if not isinstance(n, (int, np.integer)) or n < 1:
            raise DimensionError(f"mode count must be a positive integer, got {n!r}")
        if not isinstance(cutoff, (int, np.integer)) or cutoff < 1:
            raise DimensionError(f"cutoff must be a positive integer, got {cutoff!r}")
        self.n = int(n)
        self.cutoff = int(cutoff)
        levels = self.cutoff + 1
        D = levels**self.n
        cap = dense_dim_cap() if max_dim is None else max_dim
        if D > cap:
            raise CapacityError(
                f"Fock dimension (cutoff+1)^n = {D} exceeds the budget {cap}"
            )
        self.dim = D

        lower = np.diag(np.sqrt(np.arange(1, levels, dtype=float)), k=1).astype(complex)
        ops = []
        for j in range(self.n):
            mats = [np.eye(levels, dtype=complex)] * self.n
            mats[j] = lower
            full = mats[0]
            for m in mats[1:]:
                full = np.kron(full, m)
            full.flags.writeable = False
            ops.append(full)
        # Components 0..n-1 annihilate, n..2n-1 create.
        self._ops = tuple(ops) + tuple(a.conj().T for a in ops)
        for op in self._ops[self.n :]:
            op.flags.writeable = False

        idx = np.arange(D)
        occ = np.empty((self.n, D), dtype=int)
        for j in range(self.n):
            occ[j] = (idx // levels ** (self.n - 1 - j)) % levels
        occ.flags.writeable = False
        self.occupations = occ
        edge = (occ >= self.cutoff - 1).any(axis=0)
        edge.flags.writeable = False
        self._edge_mask = edge

    def op(self, i: int) -> np.ndarray:
        """Truncated matrix of component i of the operator vector."""
        if i < 0 or i >= 2 * self.n:
            raise DimensionError(f"component index {i} out of range for n={self.n}")
        return self._ops[i]

    def vacuum_ket(self) -> np.ndarray:
        ket = np.zeros(self.dim, dtype=complex)
        ket[0] = 1.0
        return ket

    def fock_ket(self, occupations) -> np.ndarray:
        occ = [int(m) for m in occupations]
        if len(occ) != self.n:
            raise ConfigurationError(f"expected {self.n} occupations, got {len(occ)}")
        if any(m < 0 or m > self.cutoff for m in occ):
            raise ConfigurationError(
                f"occupations {occ} exceed the cutoff {self.cutoff}"
            )
        flat = 0
        for m in occ:
            flat = flat * (self.cutoff + 1) + m
        ket = np.zeros(self.dim, dtype=complex)
        ket[flat] = 1.0
        return ket

    def coherent_ket(self, alpha) -> np.ndarray:
        """Displace the vacuum with the exactly-unitary truncated
        exp(sum_j alpha_j a_j+ - conj(alpha_j) a_j)."""
        alpha = np.asarray(alpha, dtype=complex).reshape(-1)
        if alpha.shape != (self.n,):
            raise ConfigurationError(f"alpha must have length {self.n}")
        gen = np.zeros((self.dim, self.dim), dtype=complex)
        for j, a_j in enumerate(alpha):
            gen += a_j * self.op(self.n + j) - np.conj(a_j) * self.op(j)
        return mat_exp(gen) @ self.vacuum_ket()

    def leakage(self, rho: np.ndarray) -> float:
        """Population with any mode occupying one of its top two levels."""
        pops = np.real(np.diagonal(rho))
        return float(pops[self._edge_mask].sum())

    def mode_marginal(self, rho: np.ndarray, mode: int) -> np.ndarray:
        """Occupation distribution of one mode, from the diagonal of rho."""
        pops = np.real(np.diagonal(rho))
        levels = self.cutoff + 1
        out = np.zeros(levels)
        np.add.at(out, self.occupations[mode], pops)
        return out


@dataclass(frozen=True, eq=False)
class FockState:
    """A truncated density matrix together with its truncation-edge
    population."""

    rho: np.ndarray
    leakage: float

    def validate(self, trace_tol: float = 1e-12, eig_floor: float = -1e-8):
        """Check trace one, Hermiticity, and positivity on demand."""
        tr_dev = abs(np.trace(self.rho) - 1.0)
        if tr_dev > trace_tol:
            raise InvalidInputError(f"density matrix trace deviates by {tr_dev:.3e}")
        herm_dev = np.abs(self.rho - self.rho.conj().T).max()
        if herm_dev > trace_tol:
            raise InvalidInputError(f"density matrix is non-Hermitian by {herm_dev:.3e}")
        lowest = float(np.linalg.eigvalsh((self.rho + self.rho.conj().T) / 2).min())
        if lowest < eig_floor:
            raise InvalidInputError(f"density matrix has eigenvalue {lowest:.3e}")


def density(ket: np.ndarray) -> np.ndarray:
    ket = np.asarray(ket, dtype=complex).reshape(-1)
    return np.outer(ket, ket.conj())


def state_from_spec(fs: FockSpace, spec: StateSpec) -> np.ndarray:
    """Build the ket of a :class:`StateSpec` on the truncated space."""
    if spec.n != fs.n:
        raise ConfigurationError(f"state has {spec.n} modes, space has {fs.n}")
    if spec.kind == VACUUM:
        return fs.vacuum_ket()
    if spec.kind == COHERENT:
        return fs.coherent_ket(spec.alpha)
    if spec.kind == FOCK:
        return fs.fock_ket(spec.occupations)
    if spec.kind == GAUSSIAN_PURE:
        ket = fs.coherent_ket(spec.alpha)
        if spec.squeeze is not None:
            ket = build_jump_unitary(fs, spec.squeeze) @ ket
        return ket
    raise ConfigurationError(f"unsupported state kind {spec.kind!r}")


def build_quadratic_hamiltonian(fs: FockSpace, gen: QuadraticGenerator) -> np.ndarray:
    """The truncated operator (1/2) sum_ij H[i,j] a_i a_j.

    Because H = H^T = tilde(H), the result is Hermitian even after
    truncation: matrix adjoints reverse the ladder products exactly.
    """
    if gen.n != fs.n:
        raise ConfigurationError(
            f"generator acts on {gen.n} modes, Fock space has {fs.n}"
        )
    out = np.zeros((fs.dim, fs.dim), dtype=complex)
    for i in range(2 * fs.n):
        for j in range(2 * fs.n):
            h = gen.H[i, j]
            if h != 0.0:
                out += (0.5 * h) * (fs.op(i) @ fs.op(j))
    return out


def build_jump_unitary(fs: FockSpace, gen: QuadraticGenerator) -> np.ndarray:
    """exp(-i Hhat) for the truncated quadratic Hamiltonian; exactly unitary
    on the truncated space up to exponentiation rounding."""
    U = mat_exp(-1j * build_quadratic_hamiltonian(fs, gen))
    dev = np.abs(U.conj().T @ U - np.eye(fs.dim)).max()
    if dev > UNITARITY_TOL:
        raise ConditioningError(
            f"truncated jump operator lost unitarity by {dev:.3e}; "
            "reduce the generator size or the cutoff"
        )
    return U


def jump_unitaries(fs: FockSpace, channels: ChannelSet) -> list[np.ndarray]:
    return [build_jump_unitary(fs, gen) for gen in channels.generators]


def gksl_rhs(
    fs: FockSpace, channels: ChannelSet, rho: np.ndarray, unitaries=None
) -> np.ndarray:
    """Generator of the master equation: sum_k rate_k (U_k rho U_k+ - rho)."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (fs.dim, fs.dim):
        raise DimensionError(f"rho must be {fs.dim}x{fs.dim}, got {rho.shape}")
    if unitaries is None:
        unitaries = jump_unitaries(fs, channels)
    out = -channels.total_rate * rho
    for rate, U in zip(channels.rates, unitaries):
        out += rate * (U @ rho @ U.conj().T)
    return out


def standard_form_rhs(
    fs: FockSpace, channels: ChannelSet, rho: np.ndarray, unitaries=None
) -> np.ndarray:
    """The same generator written in standard Lindblad form with jump
    operators L_k = sqrt(rate_k) U_k; kept as an independent route for
    cross-checking :func:`gksl_rhs`."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (fs.dim, fs.dim):
        raise DimensionError(f"rho must be {fs.dim}x{fs.dim}, got {rho.shape}")
    if unitaries is None:
        unitaries = jump_unitaries(fs, channels)
    out = np.zeros_like(rho)
    for rate, U in zip(channels.rates, unitaries):
        L = np.sqrt(rate) * U
        LdL = L.conj().T @ L
        out += L @ rho @ L.conj().T - 0.5 * (LdL @ rho + rho @ LdL)
    return out


def vectorized_generator(fs: FockSpace, channels: ChannelSet) -> np.ndarray:
    """Dense matrix acting on row-major vec(rho); only for small spaces."""
    size = fs.dim**2
    if size > dense_dim_cap():
        raise CapacityError(
            f"vectorized generator dimension {size} exceeds the budget "
            f"{dense_dim_cap()}"
        )
    out = -channels.total_rate * np.eye(size, dtype=complex)
    for rate, U in zip(channels.rates, jump_unitaries(fs, channels)):
        out += rate * np.kron(U, U.conj())
    return out


def _rk4_run(rhs, rho0: np.ndarray, grid: list[float], h_target: float):
    rho = rho0.copy()
    outputs = [rho0.copy()]
    for t_prev, t_next in zip(grid[:-1], grid[1:]):
        span = t_next - t_prev
        nsteps = max(1, int(np.ceil(span / h_target - 1e-12)))
        h = span / nsteps
        for _ in range(nsteps):
            k1 = rhs(rho)
            k2 = rhs(rho + 0.5 * h * k1)
            k3 = rhs(rho + 0.5 * h * k2)
            k4 = rhs(rho + h * k3)
            rho = rho + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        outputs.append(rho.copy())
    return outputs


def integrate(
    fs: FockSpace,
    channels: ChannelSet,
    rho0: np.ndarray,
    t_grid,
    strict: bool = False,
    rtol: float = 1e-9,
    max_halvings: int = 10,
) -> list[FockState]:
    """Integrate the master equation along a grid starting at zero.

    Fixed-step RK4; the step is halved until a full halving changes no
    output density matrix by more than ``rtol`` (max-abs), and the finer
    result is returned.  In strict mode, truncation-edge population above
    ``LEAKAGE_LIMIT`` at any output time raises :class:`LeakageError`.
    """
    grid = [float(t) for t in t_grid]
    if not grid or grid[0] != 0.0:
        raise ConfigurationError(f"time grid must start at 0, got {grid[:1]}")
    if np.any(np.diff(grid) <= 0.0) or not np.all(np.isfinite(grid)):
        raise ConfigurationError(f"time grid must be strictly increasing, got {grid}")
    rho0 = np.asarray(rho0, dtype=complex)
    if rho0.shape != (fs.dim, fs.dim):
        raise DimensionError(f"rho0 must be {fs.dim}x{fs.dim}, got {rho0.shape}")

    unitaries = jump_unitaries(fs, channels)

    def rhs(rho):
        return gksl_rhs(fs, channels, rho, unitaries=unitaries)

    if len(grid) == 1:
        outputs = [rho0.copy()]
    else:
        spans = np.diff(grid)
        h = min(0.25 / channels.total_rate, float(spans.min()))
        prev = _rk4_run(rhs, rho0, grid, h)
        outputs = None
        dev = float("inf")
        for _ in range(max_halvings):
            h *= 0.5
            cur = _rk4_run(rhs, rho0, grid, h)
            dev = max(
                float(np.abs(a - b).max()) for a, b in zip(cur, prev)
            )
            if dev < rtol:
                outputs = cur
                break
            prev = cur
        if outputs is None:
            raise AccuracyError(
                f"RK4 step halving did not reach {rtol:g} within "
                f"{max_halvings} halvings (last change {dev:.3e})"
            )

    states = []
    for t, rho in zip(grid, outputs):
        leak = fs.leakage(rho)
        if strict and leak > LEAKAGE_LIMIT:
            raise LeakageError(
                f"truncation-edge population {leak:.3e} exceeds "
                f"{LEAKAGE_LIMIT:g} at t={t:g}; raise the cutoff"
            )
        rho = rho.copy()
        rho.flags.writeable = False
        states.append(FockState(rho=rho, leakage=leak))
    return states


def extract_moments(
    fs: FockSpace, state, M: int, support_tol: float = SUPPORT_TOL
) -> MomentTensor:
    """Slot-ordered moments tr(rho a_{i_1} ... a_{i_M}), products taken left
    to right with the truncated ladder matrices.

    Requires cutoff headroom: each mode's occupied support (population above
    ``support_tol``) must sit at least M + 2 levels below the cutoff,
    otherwise the products touch the truncation edge and the result is
    untrustworthy.
    """
    rho = state.rho if isinstance(state, FockState) else np.asarray(state, dtype=complex)
    if rho.shape != (fs.dim, fs.dim):
        raise DimensionError(f"rho must be {fs.dim}x{fs.dim}, got {rho.shape}")
    if not isinstance(M, (int, np.integer)) or M < 1:
        raise DimensionError(f"moment order must be a positive integer, got {M!r}")

    for mode in range(fs.n):
        marginal = fs.mode_marginal(rho, mode)
        occupied = np.nonzero(marginal > support_tol)[0]
        support = int(occupied.max()) if occupied.size else 0
        if fs.cutoff - support < M + 2:
            raise MarginError(
                f"mode {mode + 1} is occupied up to level {support} with cutoff "
                f"{fs.cutoff}; need a margin of at least M + 2 = {M + 2} levels"
            )

    scheme = IndexScheme(fs.n, int(M))
    out = np.empty(scheme.size, dtype=complex)
    dim = 2 * fs.n

    def descend(acc: np.ndarray, depth: int, base: int):
        stride = dim ** (M - depth - 1)
        for i in range(dim):
            nxt = acc @ fs.op(i)
            if depth + 1 == M:
                out[base + i * stride] = np.trace(nxt)
            else:
                descend(nxt, depth + 1, base + i * stride)

    descend(rho, 0, 0)
    return MomentTensor.from_array(fs.n, int(M), out)
