"""Dense SVD utilities: numerical rank, singular-value thresholds, and
best approximations by matrices of bounded rank.

All norms and distances are Frobenius. Matrices are plain 2-D float64
numpy arrays; every function validates finiteness of its inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

EPS = float(np.finfo(np.float64).eps)


class NumericalFailure(RuntimeError):
    """The underlying factorization routine did not converge."""


def as_matrix(x) -> np.ndarray:
    """Coerce to a 2-D float64 array and reject empty or non-finite input."""
    a = np.asarray(x, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got ndim={a.ndim}")
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise ValueError(f"matrix dimensions must be positive, got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix contains NaN or Inf entries")
    return a


def rank_threshold(sigma_max: float, shape: tuple[int, int], rel_tol: float = 1.0) -> float:
    """Numerical-rank cutoff: singular values at or below it count as zero.

    Scale-invariant rule ``rel_tol * sigma_max * max(m, n) * eps``, the
    standard surrogate for exact rank in floating point.
    """
    if rel_tol <= 0:
        raise ValueError("rel_tol must be positive")
    return rel_tol * sigma_max * max(shape) * EPS


@dataclass(frozen=True)
class RankParams:
    """Thresholds controlling rank decisions.

    ``delta`` is the singular-value cutoff for the numerical (delta-) rank;
    ``rank_rel_tol`` scales the exact-rank detection threshold.
    """

    delta: float
    rank_rel_tol: float = 1.0

    def __post_init__(self):
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if not self.rank_rel_tol > 0:
            raise ValueError("rank_rel_tol must be positive")


@dataclass(frozen=True)
class SvdFactorization:
    """Thin SVD ``X = U diag(sigma) V^T`` with a detected numerical rank.

    ``u`` is m-by-k and ``v`` is n-by-k with orthonormal columns, ``sigma``
    is nonincreasing and nonnegative, and ``numerical_rank`` counts the
    singular values above the rank-detection threshold.
    """

    u: np.ndarray
    sigma: np.ndarray
    v: np.ndarray
    numerical_rank: int

    def __post_init__(self):
        self.u.setflags(write=False)
        self.sigma.setflags(write=False)
        self.v.setflags(write=False)

    def reconstruct(self) -> np.ndarray:
        return (self.u * self.sigma) @ self.v.T

    def leading(self, k: int) -> "SvdFactorization":
        """Factorization restricted to the first ``k`` singular triplets."""
        k = int(k)
        return SvdFactorization(
            self.u[:, :k].copy(), self.sigma[:k].copy(), self.v[:, :k].copy(),
            min(k, self.numerical_rank),
        )


def compute_svd(x, rank_rel_tol: float = 1.0) -> SvdFactorization:
    """Thin SVD of ``x`` with numerical-rank detection.

    Parameters
    ----------
    x : array_like, shape (m, n)
        Finite real matrix.
    rank_rel_tol : float
        Relative factor for the rank threshold, see :func:`rank_threshold`.

    Returns
    -------
    SvdFactorization
        Factors with k = min(m, n) triplets.

    Raises
    ------
    NumericalFailure
        If the SVD iteration does not converge.
    """
    a = as_matrix(x)
    try:
        u, s, vh = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"SVD did not converge for shape {a.shape}") from exc
    tau = rank_threshold(float(s[0]) if s.size else 0.0, a.shape, rank_rel_tol)
    rank = int(np.count_nonzero(s > tau))
    return SvdFactorization(u, s, vh.T.copy(), rank)


def singular_values(x) -> np.ndarray:
    """Singular values of ``x``, nonincreasing, length min(m, n)."""
    a = as_matrix(x)
    try:
        return np.linalg.svd(a, compute_uv=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(f"SVD did not converge for shape {a.shape}") from exc


def delta_rank(x, delta: float) -> int:
    """Number of singular values strictly greater than ``delta``.

    Returns 0 for the zero matrix and for any matrix whose largest
    singular value does not exceed ``delta``. Only values within the
    numerical rank count: a ``delta`` below the noise floor cannot inflate
    the result past the rank itself.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    fact = compute_svd(x)
    return int(np.count_nonzero(fact.sigma[: fact.numerical_rank] > delta))


def delta_rank_of_sigma(sigma: np.ndarray, delta: float) -> int:
    """`delta_rank` evaluated directly on a nonincreasing spectrum."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    return int(np.count_nonzero(np.asarray(sigma) > delta))


def tail_norm(sigma: np.ndarray, keep: int) -> float:
    """Root sum of squares of ``sigma[keep:]``."""
    t = np.asarray(sigma)[keep:]
    return float(np.sqrt(np.dot(t, t)))


def truncate_to_rank(x, target: int) -> tuple[np.ndarray, float]:
    """Closest matrix of rank at most ``target`` and its distance.

    The closest point is obtained by zeroing the trailing singular values;
    the distance is the root sum of squares of the dropped ones. At ties of
    the target-th singular value the first triplets returned by the SVD are
    kept, which makes the choice deterministic. If the numerical rank of
    ``x`` is already within ``target`` the input is returned unchanged.

    Returns
    -------
    (ndarray, float)
        The truncated matrix and the Frobenius distance to it.
    """
    a = as_matrix(x)
    target = int(target)
    if target < 0 or target > min(a.shape):
        raise ValueError(f"target rank {target} out of range for shape {a.shape}")
    fact = compute_svd(a)
    distance = tail_norm(fact.sigma, target)
    if fact.numerical_rank <= target:
        return a.copy(), distance
    return fact.leading(target).reconstruct(), distance


def distance_to_bounded_rank(x, target: int) -> float:
    """Frobenius distance from ``x`` to the matrices of rank at most ``target``."""
    a = as_matrix(x)
    target = int(target)
    if target < 0 or target > min(a.shape):
        raise ValueError(f"target rank {target} out of range for shape {a.shape}")
    return tail_norm(singular_values(a), target)


def frobenius(x) -> float:
    """Frobenius norm."""
    return float(np.linalg.norm(np.asarray(x, dtype=np.float64)))
