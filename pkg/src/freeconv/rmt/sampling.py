"""Random matrix samplers and per-trial random streams."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from ..measures import SpectralMeasure

__all__ = [
    "ENSEMBLES",
    "trial_rng",
    "run_trials",
    "haar_unitary",
    "haar_orthogonal",
    "gue",
    "sample_rotation",
    "rotate",
    "matrix_from_measure",
]

ENSEMBLES = ("haar-unitary", "haar-orthogonal", "haar-special-orthogonal", "gue")


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    """Independent counter-based stream for one trial; depends only on (seed, trial)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(trial)])))


def run_trials(fn, trials: int, seed: int, threads: int | None = None, offset: int = 0) -> list:
    """``[fn(t, trial_rng(seed, t)) for t in range(offset, offset + trials)]``, possibly threaded.

    Results come back in trial order whatever the thread count, so any
    reduction done afterwards is identical between serial and parallel runs.
    """
    idx = range(offset, offset + trials)
    if threads is None or threads <= 1 or trials <= 1:
        return [fn(t, trial_rng(seed, t)) for t in idx]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda t: fn(t, trial_rng(seed, t)), idx))


def haar_unitary(N: int, rng: np.random.Generator) -> np.ndarray:
    """Haar unitary from the QR factorisation of a complex Ginibre matrix.

    The phases of diag(R) are moved into Q so that the result is exactly
    Haar distributed rather than dependent on the QR sign convention.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    z = (rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def haar_orthogonal(N: int, rng: np.random.Generator, special: bool = False) -> np.ndarray:
    """Haar orthogonal matrix; with ``special`` the determinant is forced to +1."""
    if N < 1:
        raise ValueError("N must be >= 1")
    q, r = np.linalg.qr(rng.standard_normal((N, N)))
    q = q * np.sign(np.diagonal(r))
    if special and np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def gue(N: int, rng: np.random.Generator) -> np.ndarray:
    """GUE matrix with E|H_ij|^2 = 1/N, so the spectrum fills [-2, 2]."""
    if N < 1:
        raise ValueError("N must be >= 1")
    x = rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))
    return (x + x.conj().T) / np.sqrt(4.0 * N)


def sample_rotation(ensemble: str, N: int, rng: np.random.Generator) -> np.ndarray:
    if ensemble == "haar-unitary":
        return haar_unitary(N, rng)
    if ensemble == "haar-orthogonal":
        return haar_orthogonal(N, rng)
    if ensemble == "haar-special-orthogonal":
        return haar_orthogonal(N, rng, special=True)
    raise ValueError(f"{ensemble!r} is not a rotation ensemble; choose from {ENSEMBLES[:3]}")


def rotate(U: np.ndarray, B: np.ndarray) -> np.ndarray:
    """U B U*, with a shortcut for diagonal B given as a 1-d array."""
    B = np.asarray(B)
    if B.ndim == 1:
        return (U * B) @ U.conj().T
    return U @ B @ U.conj().T


def matrix_from_measure(m: SpectralMeasure, N: int, diagonal_only: bool = False) -> np.ndarray:
    """Diagonal matrix of the quantiles of m at (k - 1/2)/N, k = 1..N.

    The ESD of the result converges to m in moments as N grows. With
    ``diagonal_only`` the 1-d array of entries is returned instead.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    d = np.asarray(m.quantile((np.arange(1, N + 1) - 0.5) / N), dtype=float)
    return d if diagonal_only else np.diag(d)
