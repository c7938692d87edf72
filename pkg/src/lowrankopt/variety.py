"""Geometry of the bounded-rank matrix set.

A feasible point is kept in thin-SVD factored form together with the rank
bound. The factored form is the source of truth for the point's rank: the
cone of first-order feasible directions changes discontinuously when the
rank drops, so re-thresholding a dense matrix mid-algorithm would silently
change the geometry. Orthogonal complements of the factors are never
materialized; all block computations use projector identities on the thin
factors instead.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import (
    SvdFactorization,
    as_matrix,
    compute_svd,
    delta_rank_of_sigma,
    frobenius,
    tail_norm,
)

ORTHONORMALITY_TOL = 1e-10


class InfeasiblePointError(ValueError):
    """A matrix violates the rank bound it was declared to satisfy."""


@dataclass(frozen=True)
class VarietyPoint:
    """A matrix of rank at most ``rank_bound`` in factored form.

    ``u`` (m-by-k) and ``v`` (n-by-k) have orthonormal columns, ``sigma``
    holds k strictly positive nonincreasing values, and k is the exact
    rank of the represented matrix ``u @ diag(sigma) @ v.T``. The zero
    matrix is represented with k = 0.
    """

    u: np.ndarray
    sigma: np.ndarray
    v: np.ndarray
    rank_bound: int

    def __post_init__(self):
        m, ku = self.u.shape
        n, kv = self.v.shape
        k = self.sigma.shape[0]
        if not (ku == kv == k):
            raise ValueError(f"factor ranks disagree: u has {ku}, v has {kv}, sigma has {k}")
        if not 0 <= self.rank_bound < min(m, n):
            raise ValueError(
                f"rank bound {self.rank_bound} must lie in [0, min{m, n}) for shape {(m, n)}"
            )
        if k > self.rank_bound:
            raise InfeasiblePointError(f"factored rank {k} exceeds rank bound {self.rank_bound}")
        if k > 0:
            if np.any(self.sigma <= 0) or np.any(np.diff(self.sigma) > 0):
                raise ValueError("sigma must be positive and nonincreasing")
            for name, q in (("u", self.u), ("v", self.v)):
                err = np.abs(q.T @ q - np.eye(k)).max()
                if err > ORTHONORMALITY_TOL:
                    raise ValueError(f"columns of {name} are not orthonormal (error {err:.2e})")
        self.u.setflags(write=False)
        self.sigma.setflags(write=False)
        self.v.setflags(write=False)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.u.shape[0], self.v.shape[0])

    @property
    def rank(self) -> int:
        return int(self.sigma.shape[0])

    @property
    def sigma_min(self) -> float:
        """Smallest (nonzero) singular value; undefined at the zero matrix."""
        if self.rank == 0:
            raise ValueError("the zero matrix has no smallest nonzero singular value")
        return float(self.sigma[-1])

    def matrix(self) -> np.ndarray:
        if self.rank == 0:
            return np.zeros(self.shape)
        return (self.u * self.sigma) @ self.v.T

    def delta_rank(self, delta: float) -> int:
        return delta_rank_of_sigma(self.sigma, delta)

    def truncated(self, new_rank: int) -> "VarietyPoint":
        """Closest point of rank ``new_rank``, by dropping trailing triplets."""
        new_rank = int(new_rank)
        if not 0 <= new_rank <= self.rank:
            raise ValueError(f"cannot truncate rank {self.rank} to {new_rank}")
        if new_rank == self.rank:
            return self
        return VarietyPoint(
            self.u[:, :new_rank].copy(),
            self.sigma[:new_rank].copy(),
            self.v[:, :new_rank].copy(),
            self.rank_bound,
        )


@dataclass(frozen=True)
class TangentDecomposition:
    """Blocks of an ambient matrix in the frame of a :class:`VarietyPoint`.

    For a point with factors (U, V) of rank k, a gradient-like matrix G
    splits into the k-by-k core ``a = U^T G V``, the row-space part
    ``b_cols = U^T G (I - V V^T)`` (k-by-n), the column-space part
    ``c_rows = (I - U U^T) G V`` (m-by-k), and the fully orthogonal part
    D = (I - U U^T) G (I - V V^T). Only the best approximation of D within
    the remaining rank budget is stored, as ``d_truncated``, together with
    the norm of what the budget forced to drop.
    """

    a: np.ndarray
    b_cols: np.ndarray
    c_rows: np.ndarray
    d_truncated: SvdFactorization
    d_residual_norm: float

    def d_matrix(self) -> np.ndarray:
        return self.d_truncated.reconstruct()


@dataclass(frozen=True)
class StationarityReport:
    """Norms attached to one first-order stationarity evaluation.

    ``s_value`` is the norm of the projection of the negative gradient onto
    the cone of feasible directions; ``residual_distance`` is the distance
    from the negative gradient to that cone. The two sides are orthogonal,
    so ``s_value**2 + residual_distance**2 == gradient_norm**2``.
    """

    s_value: float
    gradient_norm: float
    residual_distance: float


def point_from_matrix(x, rank_bound: int, rank_rel_tol: float = 1.0) -> VarietyPoint:
    """Factor a feasible matrix into a :class:`VarietyPoint`.

    Raises :class:`InfeasiblePointError` if the numerical rank of ``x``
    exceeds ``rank_bound``.
    """
    a = as_matrix(x)
    rank_bound = int(rank_bound)
    if not 0 <= rank_bound < min(a.shape):
        raise ValueError(f"rank bound {rank_bound} out of range for shape {a.shape}")
    fact = compute_svd(a, rank_rel_tol)
    if fact.numerical_rank > rank_bound:
        raise InfeasiblePointError(
            f"matrix has numerical rank {fact.numerical_rank} > bound {rank_bound}"
        )
    lead = fact.leading(fact.numerical_rank)
    return VarietyPoint(lead.u, lead.sigma, lead.v, rank_bound)


def project_to_variety(x, rank_bound: int, rank_rel_tol: float = 1.0) -> VarietyPoint:
    """Closest point of rank at most ``rank_bound``, in factored form."""
    a = as_matrix(x)
    rank_bound = int(rank_bound)
    if not 0 <= rank_bound < min(a.shape):
        raise ValueError(f"rank bound {rank_bound} out of range for shape {a.shape}")
    fact = compute_svd(a, rank_rel_tol)
    keep = min(rank_bound, fact.numerical_rank)
    lead = fact.leading(keep)
    return VarietyPoint(lead.u, lead.sigma, lead.v, rank_bound)


def _empty_factors(m: int, n: int) -> SvdFactorization:
    return SvdFactorization(np.zeros((m, 0)), np.zeros(0), np.zeros((n, 0)), 0)


def project_to_tangent_cone(
    point: VarietyPoint, g
) -> tuple[TangentDecomposition, np.ndarray, float]:
    """Project ``g`` onto the cone of feasible directions at ``point``.

    The cone at a point of rank k keeps the ``a``, ``b_cols`` and
    ``c_rows`` blocks unrestricted and bounds the fully orthogonal block by
    the leftover budget ``rank_bound - k``, so the projection truncates
    that block and leaves the rest untouched. At the zero matrix the cone
    is the whole bounded-rank set and the projection is the best rank-r
    approximation of ``g``.

    Returns
    -------
    (TangentDecomposition, ndarray, float)
        The block decomposition, the projected matrix, and its norm. At
        ties in the orthogonal block's spectrum the projection is
        set-valued; the member kept is the deterministic first-triplets
        choice of the SVD routine.
    """
    a_mat = as_matrix(g)
    m, n = point.shape
    if a_mat.shape != (m, n):
        raise ValueError(f"direction shape {a_mat.shape} does not match point shape {(m, n)}")
    k = point.rank
    budget = point.rank_bound - k

    if k == 0:
        fact = compute_svd(a_mat)
        keep = min(budget, fact.numerical_rank)
        d_tr = fact.leading(keep)
        residual = tail_norm(fact.sigma, budget)
        decomp = TangentDecomposition(
            np.zeros((0, 0)), np.zeros((0, n)), np.zeros((m, 0)), d_tr, residual
        )
        projected = d_tr.reconstruct()
        norm = float(np.sqrt(np.dot(d_tr.sigma, d_tr.sigma)))
        return decomp, projected, norm

    u, v = point.u, point.v
    utg = u.T @ a_mat
    gv = a_mat @ v
    core = utg @ v
    b_cols = utg - core @ v.T
    c_rows = gv - u @ core
    d_full = a_mat - u @ utg - gv @ v.T + u @ core @ v.T

    if budget == 0:
        d_tr = _empty_factors(m, n)
        residual = frobenius(d_full)
    else:
        fact = compute_svd(d_full)
        keep = min(budget, fact.numerical_rank)
        d_tr = fact.leading(keep)
        residual = tail_norm(fact.sigma, budget)

    decomp = TangentDecomposition(core, b_cols, c_rows, d_tr, residual)
    projected = u @ core @ v.T + u @ b_cols + c_rows @ v.T + d_tr.reconstruct()
    norm = float(
        np.sqrt(
            np.sum(core * core)
            + np.sum(b_cols * b_cols)
            + np.sum(c_rows * c_rows)
            + np.dot(d_tr.sigma, d_tr.sigma)
        )
    )
    return decomp, projected, norm


def stationarity_measure(problem, point: VarietyPoint) -> StationarityReport:
    """First-order stationarity of ``problem`` at ``point``.

    Evaluates the gradient at the materialized point and projects its
    negative onto the cone of feasible directions. The measure is computed
    at the point's declared factored rank, never by re-thresholding the
    dense matrix.
    """
    g = as_matrix(problem.gradient(point.matrix()))
    decomp, _, s = project_to_tangent_cone(point, -g)
    return StationarityReport(
        s_value=s,
        gradient_norm=frobenius(g),
        residual_distance=decomp.d_residual_norm,
    )


def stationarity_sandwich_check(point: VarietyPoint, report: StationarityReport) -> bool:
    """Verify the two-sided bound tying the measure to the gradient norm.

    The measure never exceeds the gradient norm, and is at least
    ``sqrt((r - k) / (min(m, n) - k))`` times it, where k is the point's
    rank and r the bound. Both inequalities are checked with an additive
    slack of ``1e-9 * gradient_norm``.
    """
    m, n = point.shape
    k = point.rank
    factor = np.sqrt((point.rank_bound - k) / (min(m, n) - k))
    slack = 1e-9 * report.gradient_norm
    upper_ok = report.gradient_norm + slack >= report.s_value
    lower_ok = report.s_value + slack >= factor * report.gradient_norm
    return bool(upper_ok and lower_ok)


def tangent_curve(point: VarietyPoint, tangent: TangentDecomposition, t: float) -> np.ndarray:
    """Feasible curve through ``point`` with initial velocity ``tangent``.

    The curve stays inside the bounded-rank set for all t >= 0, starts at
    the point, and deviates from the straight line only at second order:
    ``curve(t) = X + t G + (t^2/4) (U a + 2 c_rows) S^{-1} (a V^T + 2 b_cols)``
    where (U, S, V) are the point's factors and G the tangent matrix. It
    is undefined at the zero matrix, where S is not invertible.
    """
    if point.rank == 0:
        raise ValueError("the curve is undefined at the zero matrix")
    if t < 0:
        raise ValueError("t must be nonnegative")
    u, s, v = point.u, point.sigma, point.v
    left = u + t * ((tangent.c_rows + 0.5 * u @ tangent.a) / s)
    right = v + t * ((tangent.b_cols.T + 0.5 * v @ tangent.a.T) / s)
    return (left * s) @ right.T + t * tangent.d_matrix()


def tangent_line_distance_bound(point: VarietyPoint, tangent_norm: float) -> float:
    """Upper bound on the distance from ``point + G`` back to the feasible set.

    For any feasible direction G at the point, the distance is at most
    ``sqrt(k) / (2 sigma_min) * ||G||^2`` with k the point's rank. The
    quadratic scaling is what makes line-search steps projectable without
    losing the descent they gained.
    """
    if point.rank == 0:
        raise ValueError("the bound is undefined at the zero matrix")
    if tangent_norm < 0:
        raise ValueError("tangent_norm must be nonnegative")
    return float(np.sqrt(point.rank) / (2.0 * point.sigma_min) * tangent_norm**2)


def tightness_instance(
    r: int, m: int, n: int, epsilon: float
) -> tuple[VarietyPoint, np.ndarray]:
    """Point/direction pair showing the distance bound's curvature factor is sharp.

    Builds a rank-r point X with smallest singular value ``1/(4*epsilon)``
    and a feasible direction G of norm ``sqrt(2)/(4*epsilon)`` such that
    the distance from X + G to the feasible set is at least
    ``(1/(2*sigma_min) - epsilon) * ||G||^2``: shrinking the smallest
    singular value makes the quadratic bound's constant blow up, so no
    bound of this form can drop the ``1/sigma_min`` factor.
    """
    r, m, n = int(r), int(m), int(n)
    if r < 1:
        raise ValueError("r must be at least 1")
    if m < r + 1 or n < r + 1:
        raise ValueError(f"shape {(m, n)} too small: need m, n >= r + 1 = {r + 1}")
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    scale = 1.0 / (4.0 * epsilon)
    x = np.zeros((m, n))
    for i in range(r - 1):
        x[i, i] = 2.0 * scale
    x[r - 1, r - 1] = scale
    g = np.zeros((m, n))
    g[r - 1, r] = scale
    g[r, r - 1] = scale
    return point_from_matrix(x, r), g
