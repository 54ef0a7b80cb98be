"""Monte Carlo oracle: average the classical Poisson jump process at the
moment level.

A trajectory is a merged Poisson stream with total rate Lambda = sum rate_k
(exponential inter-arrival times), each event labeled k with probability
rate_k / Lambda.  A trajectory's jumps act on a moment tensor through the
accumulated component-space product, latest jump leftmost, which is the
composition order the Heisenberg picture dictates; averaging over
trajectories converges to the exact semigroup.

Trajectory j draws from its own counter-based stream keyed by (seed, j), so
results are reproducible regardless of scheduling or batching.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, ConfigurationError, InvalidInputError
from .propagator import ChannelSet, MomentTensor
from .states import StateSpec, initial_moments
from .symplectic import apply_kron

# Cap on trajectories x tensor size, to keep the batched workspace in memory.
BATCH_ELEMENT_CAP = 1 << 27


@dataclass(frozen=True)
class McConfig:
    """Trajectory count, stream seed, and output grid for an estimate run."""

    trajectories: int
    seed: int
    t_grid: tuple[float, ...]

    def __post_init__(self):
        if self.trajectories < 1:
            raise ConfigurationError(
                f"trajectory count must be positive, got {self.trajectories}"
            )
        grid = tuple(float(t) for t in self.t_grid)
        if not grid or grid[0] != 0.0:
            raise ConfigurationError(f"time grid must start at 0, got {grid[:1]}")
        if np.any(np.diff(grid) <= 0.0) or not np.all(np.isfinite(grid)):
            raise ConfigurationError(f"time grid must be strictly increasing, got {grid}")
        object.__setattr__(self, "t_grid", grid)


@dataclass(frozen=True, eq=False)
class TrajectoryEstimate:
    """Sample mean of the moment tensor with per-component standard errors,
    real and imaginary parts separately."""

    mean: MomentTensor
    stderr_re: np.ndarray
    stderr_im: np.ndarray
    trajectories: int

    def deviation_in_stderr(self, reference: MomentTensor, atol: float = 1e-10) -> np.ndarray:
        """Componentwise |mean - reference| in units of the standard error.

        Returns an array of length 2 * size (real parts first, then
        imaginary).  Components with zero standard error count as 0 when the
        deviation is below ``atol`` and as inf otherwise.
        """
        if reference.n != self.mean.n or reference.M != self.mean.M:
            raise ConfigurationError("reference tensor shape does not match the estimate")
        devs = []
        for diff, err in (
            (np.real(self.mean.data - reference.data), self.stderr_re),
            (np.imag(self.mean.data - reference.data), self.stderr_im),
        ):
            z = np.empty(diff.shape)
            zero = err == 0.0
            z[~zero] = np.abs(diff[~zero]) / err[~zero]
            z[zero] = np.where(np.abs(diff[zero]) <= atol, 0.0, np.inf)
            devs.append(z)
        return np.concatenate(devs)


def trajectory_rng(seed: int, j: int) -> np.random.Generator:
    """The counter-based random stream of trajectory j under a run seed."""
    return np.random.Generator(np.random.Philox(key=[int(seed), int(j)]))


def sample_trajectory(channels: ChannelSet, t_max: float, rng: np.random.Generator):
    """Jump times and channel labels of one merged-process trajectory.

    Inter-arrival times are exponential with the total rate; each event is
    labeled k with probability rate_k over the total.
    """
    t_max = float(t_max)
    if not np.isfinite(t_max) or t_max < 0.0:
        raise InvalidInputError(f"t_max must be finite and nonnegative, got {t_max}")
    total = channels.total_rate
    cumulative = np.cumsum(channels.rates) / total
    jumps = []
    t = 0.0
    while True:
        t += rng.exponential(1.0 / total)
        if t > t_max:
            return jumps
        k = int(np.searchsorted(cumulative, rng.random(), side="right"))
        jumps.append((t, k))


def trajectory_moment(
    channels: ChannelSet, jumps, mu0: MomentTensor, M: int
) -> MomentTensor:
    """Moment tensor after a fixed jump sequence.

    Each jump multiplies the accumulated component-space matrix from the
    left (latest jump leftmost); the M-fold Kronecker action on the tensor is
    taken slot by slot, never materializing the big matrix.
    """
    if mu0.n != channels.n or mu0.M != M:
        raise ConfigurationError(
            f"moment tensor (n={mu0.n}, M={mu0.M}) does not match channels "
            f"(n={channels.n}) at order {M}"
        )
    jumps = list(jumps)
    times = [t for t, _ in jumps]
    if any(t2 < t1 for t1, t2 in zip(times, times[1:])):
        raise InvalidInputError("jumps must be in chronological order")
    if not jumps:
        return mu0
    d = 2 * channels.n
    acc = np.eye(d, dtype=complex)
    for _, k in jumps:
        if k < 0 or k >= len(channels):
            raise InvalidInputError(f"channel label {k} out of range")
        acc = channels.generators[k].S @ acc
    return MomentTensor.from_array(mu0.n, M, apply_kron(acc, mu0.data, M))


def _batched_kron_apply(A: np.ndarray, mu0: np.ndarray, d: int, M: int) -> np.ndarray:
    """Apply each trajectory's A^(x)M to mu0: (T, d, d) x (d^M,) -> (T, d^M)."""
    out_letters = "abcdefgh"[:M]
    in_letters = "ijklmnop"[:M]
    subs = ",".join(f"t{o}{i}" for o, i in zip(out_letters, in_letters))
    subs += f",{in_letters}->t{out_letters}"
    operands = [A] * M + [mu0.reshape((d,) * M)]
    T = A.shape[0]
    return np.einsum(subs, *operands, optimize=True).reshape(T, d**M)


def estimate(
    channels: ChannelSet, initial, M: int, cfg: McConfig
) -> list[TrajectoryEstimate]:
    """Trajectory-averaged moments at every grid time.

    ``initial`` is a :class:`MomentTensor` or a :class:`StateSpec` with
    closed-form moments.  Deterministic for a fixed configuration: trajectory
    j always consumes its own (seed, j) stream and the reduction order is
    fixed.
    """
    if isinstance(initial, StateSpec):
        mu0 = initial_moments(initial, M)
    elif isinstance(initial, MomentTensor):
        mu0 = initial
    else:
        raise ConfigurationError("initial must be a MomentTensor or a StateSpec")
    if mu0.n != channels.n or mu0.M != M:
        raise ConfigurationError(
            f"initial tensor (n={mu0.n}, M={mu0.M}) does not match channels "
            f"(n={channels.n}) at order {M}"
        )
    T = int(cfg.trajectories)
    d = 2 * channels.n
    size = d**M
    if size * T > BATCH_ELEMENT_CAP:
        raise CapacityError(
            f"(2n)^M x trajectories = {size * T} exceeds the batch budget "
            f"{BATCH_ELEMENT_CAP}"
        )

    t_max = cfg.t_grid[-1]
    all_jumps = [
        sample_trajectory(channels, t_max, trajectory_rng(cfg.seed, j)) for j in range(T)
    ]
    S_stack = np.stack([gen.S for gen in channels.generators])

    acc = np.tile(np.eye(d, dtype=complex), (T, 1, 1))
    pointers = [0] * T
    estimates = []
    for t_out in cfg.t_grid:
        # Advance every trajectory through the jumps due by t_out, in rounds
        # so the 2n x 2n products stay batched.
        pending_idx: list[int] = []
        pending_labels: list[list[int]] = []
        for j in range(T):
            jumps = all_jumps[j]
            p = pointers[j]
            labels = []
            while p < len(jumps) and jumps[p][0] <= t_out:
                labels.append(jumps[p][1])
                p += 1
            pointers[j] = p
            if labels:
                pending_idx.append(j)
                pending_labels.append(labels)
        if pending_idx:
            max_rounds = max(len(lbls) for lbls in pending_labels)
            for r in range(max_rounds):
                sel = [
                    (j, lbls[r])
                    for j, lbls in zip(pending_idx, pending_labels)
                    if len(lbls) > r
                ]
                idx = np.array([j for j, _ in sel])
                lab = np.array([k for _, k in sel])
                acc[idx] = np.matmul(S_stack[lab], acc[idx])

        values = _batched_kron_apply(acc, mu0.data, d, M)
        mean = values.mean(axis=0)
        if T > 1:
            scale = 1.0 / np.sqrt(T)
            err_re = np.std(values.real, axis=0, ddof=1) * scale
            err_im = np.std(values.imag, axis=0, ddof=1) * scale
        else:
            err_re = np.zeros(size)
            err_im = np.zeros(size)
        err_re.flags.writeable = False
        err_im.flags.writeable = False
        estimates.append(
            TrajectoryEstimate(
                mean=MomentTensor.from_array(channels.n, M, mean),
                stderr_re=err_re,
                stderr_im=err_im,
                trajectories=T,
            )
        )
    return estimates
