"""Shared builders and slow reference implementations used as oracles.

Everything here is deliberately independent of the production code paths it
checks: the exponential is a plain Taylor sum, the Wick oracle enumerates
partitions one by one.
"""

import numpy as np

from jumpmoments import tilde_mat


def squeeze_h(r: float) -> np.ndarray:
    """Single-mode squeeze generator with magnitude r."""
    return np.array([[1j * r, 0.0], [0.0, -1j * r]], dtype=complex)


def rotation_h(omega: float) -> np.ndarray:
    """Single-mode phase-rotation generator with angle rate omega."""
    return np.array([[0.0, omega], [omega, 0.0]], dtype=complex)


def random_valid_h(rng: np.random.Generator, n: int, scale: float = 1.0) -> np.ndarray:
    """A random symmetric, tilde-real generator with max-abs entry <= scale."""
    A = rng.normal(size=(2 * n, 2 * n)) + 1j * rng.normal(size=(2 * n, 2 * n))
    H = A + A.T
    H = 0.5 * (H + tilde_mat(H))
    top = np.abs(H).max()
    if top > 0.0:
        H = H * (scale / top)
    return H


def taylor_expm(A: np.ndarray, terms: int) -> np.ndarray:
    """Matrix exponential by an explicit truncated power series."""
    A = np.asarray(A, dtype=complex)
    out = np.eye(A.shape[0], dtype=complex)
    term = np.eye(A.shape[0], dtype=complex)
    for j in range(1, terms + 1):
        term = term @ A / j
        out = out + term
    return out


def singleton_pair_partitions(slots):
    """All partitions of a slot list into singletons and ordered pairs."""
    slots = list(slots)
    if not slots:
        yield [], []
        return
    first, rest = slots[0], slots[1:]
    for singles, pairs in singleton_pair_partitions(rest):
        yield [first] + singles, pairs
    for i, partner in enumerate(rest):
        remaining = rest[:i] + rest[i + 1 :]
        for singles, pairs in singleton_pair_partitions(remaining):
            yield singles, [(first, partner)] + pairs


def wick_moment_by_enumeration(mean: np.ndarray, cov: np.ndarray, multi) -> complex:
    """One moment component as an explicit sum over singleton/pair
    partitions, pairs contracted in slot order."""
    multi = tuple(multi)
    total = 0.0 + 0.0j
    for singles, pairs in singleton_pair_partitions(range(len(multi))):
        term = 1.0 + 0.0j
        for s in singles:
            term *= mean[multi[s]]
        for p, q in pairs:
            term *= cov[multi[p], multi[q]]
        total += term
    return total


def random_density_matrix(rng: np.random.Generator, dim: int) -> np.ndarray:
    """A random full-rank density matrix."""
    G = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = G @ G.conj().T
    return rho / np.trace(rho)
