import numpy as np
import pytest
from numpy.testing import assert_allclose

from oracles import complement, random_point_factors, reference_tangent_projection

from lowrankopt.linalg import compute_svd, distance_to_bounded_rank, frobenius
from lowrankopt.problems import LowRankApproxProblem
from lowrankopt.variety import (
    InfeasiblePointError,
    VarietyPoint,
    point_from_matrix,
    project_to_tangent_cone,
    project_to_variety,
    stationarity_measure,
    stationarity_sandwich_check,
    tangent_curve,
    tangent_line_distance_bound,
    tightness_instance,
)


def make_point(rng, m, n, rank_bound, rank):
    u, sigma, v = random_point_factors(rng, m, n, rank)
    return VarietyPoint(u, sigma, v, rank_bound)


class TestPointFromMatrix:
    def test_diagonal(self):
        p = point_from_matrix(np.diag([2.0, 1.0, 0.0]), 2)
        assert p.rank == 2
        assert_allclose(p.sigma, [2.0, 1.0])
        assert_allclose(p.matrix(), np.diag([2.0, 1.0, 0.0]), atol=1e-14)

    def test_zero(self):
        p = point_from_matrix(np.zeros((3, 3)), 2)
        assert p.rank == 0
        assert p.sigma.size == 0
        assert_allclose(p.matrix(), np.zeros((3, 3)))

    def test_tiny_value_below_threshold(self):
        p = point_from_matrix(np.diag([1.0, 1e-18, 0.0]), 2)
        assert p.rank == 1

    def test_infeasible(self):
        with pytest.raises(InfeasiblePointError):
            point_from_matrix(np.diag([3.0, 2.0, 1.0]), 2)

    def test_rank_bound_range(self):
        with pytest.raises(ValueError):
            point_from_matrix(np.zeros((3, 3)), 3)

    def test_roundtrip_random(self):
        rng = np.random.default_rng(0)
        x = rng.standard_normal((7, 3)) @ rng.standard_normal((3, 6))
        p = point_from_matrix(x, 4)
        assert p.rank == 3
        assert frobenius(p.matrix() - x) <= 1e-12 * frobenius(x)


class TestProjectToVariety:
    def test_truncates(self):
        p = project_to_variety(np.diag([3.0, 2.0, 1.0]), 2)
        assert p.rank == 2
        assert_allclose(p.sigma, [3.0, 2.0])

    def test_keeps_feasible(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal((5, 4))
        p = project_to_variety(x, 2)
        assert p.rank == 2
        assert frobenius(p.matrix() - x) == pytest.approx(
            distance_to_bounded_rank(x, 2), rel=1e-10
        )


class TestTangentProjection:
    def test_hand_example(self):
        # rank-1 point, diagonal direction: keep the aligned part fully,
        # keep the best rank-1 chunk of the orthogonal rest
        point = point_from_matrix(np.diag([1.0, 0.0, 0.0]), 2)
        _, projected, norm = project_to_tangent_cone(point, np.diag([5.0, 2.0, 1.0]))
        assert_allclose(projected, np.diag([5.0, 2.0, 0.0]), atol=1e-12)
        assert norm == pytest.approx(np.sqrt(29.0), rel=1e-12)

    def test_zero_point_is_truncation(self):
        rng = np.random.default_rng(2)
        g = rng.standard_normal((5, 4))
        point = point_from_matrix(np.zeros((5, 4)), 2)
        from lowrankopt.linalg import truncate_to_rank

        _, projected, norm = project_to_tangent_cone(point, g)
        expected, _ = truncate_to_rank(g, 2)
        assert_allclose(projected, expected, atol=1e-12)
        assert norm == pytest.approx(frobenius(expected), rel=1e-12)

    def test_full_rank_point_zero_budget(self):
        point = point_from_matrix(np.diag([1.0, 1.0, 0.0]), 2)
        decomp, projected, norm = project_to_tangent_cone(point, np.diag([0.0, 0.0, 7.0]))
        assert_allclose(projected, np.zeros((3, 3)), atol=1e-12)
        assert norm == pytest.approx(0.0, abs=1e-12)
        assert decomp.d_residual_norm == pytest.approx(7.0, rel=1e-12)

    def test_shape_mismatch(self):
        point = point_from_matrix(np.zeros((3, 3)), 2)
        with pytest.raises(ValueError, match="shape"):
            project_to_tangent_cone(point, np.zeros((2, 3)))

    def test_matches_reference(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            m, n = rng.integers(3, 10, size=2)
            r = int(rng.integers(1, min(m, n)))
            rank = int(rng.integers(0, r + 1))
            point = make_point(rng, m, n, r, rank)
            g = rng.standard_normal((m, n))
            _, projected, norm = project_to_tangent_cone(point, g)
            ref_proj, ref_norm, ref_res = reference_tangent_projection(
                point.u, point.sigma, point.v, r, g
            )
            assert frobenius(projected - ref_proj) <= 1e-9 * (1.0 + frobenius(g))
            assert norm == pytest.approx(ref_norm, rel=1e-9)

    def test_block_norm_identity(self):
        rng = np.random.default_rng(4)
        for _ in range(100):
            m, n = rng.integers(3, 10, size=2)
            r = int(rng.integers(1, min(m, n)))
            rank = int(rng.integers(0, r + 1))
            point = make_point(rng, m, n, r, rank)
            decomp, projected, norm = project_to_tangent_cone(
                point, rng.standard_normal((m, n))
            )
            blocks = np.sqrt(
                np.sum(decomp.a**2)
                + np.sum(decomp.b_cols**2)
                + np.sum(decomp.c_rows**2)
                + np.sum(decomp.d_truncated.sigma**2)
            )
            assert frobenius(projected) == pytest.approx(blocks, rel=1e-9)
            assert norm == pytest.approx(blocks, rel=1e-12)
            assert decomp.d_truncated.sigma.size <= r - rank

    def test_matches_reference_extreme_aspect_ratios(self):
        rng = np.random.default_rng(31)
        for m, n in [(20, 3), (3, 20), (30, 2), (2, 30)]:
            r = min(m, n) - 1
            for rank in range(0, r + 1):
                point = make_point(rng, m, n, r, rank)
                g = rng.standard_normal((m, n))
                _, projected, norm = project_to_tangent_cone(point, g)
                ref_proj, ref_norm, _ = reference_tangent_projection(
                    point.u, point.sigma, point.v, r, g
                )
                assert frobenius(projected - ref_proj) <= 1e-9 * (1.0 + frobenius(g))
                assert norm == pytest.approx(ref_norm, rel=1e-9, abs=1e-12)

    def test_projection_optimality(self):
        # no sampled member of the feasible-direction cone comes closer
        rng = np.random.default_rng(5)
        for _ in range(300):
            m, n = rng.integers(3, 10, size=2)
            r = int(rng.integers(1, min(m, n)))
            rank = int(rng.integers(0, r + 1))
            point = make_point(rng, m, n, r, rank)
            z = rng.standard_normal((m, n))
            _, projected, _ = project_to_tangent_cone(point, z)
            up = complement(point.u, m)
            vp = complement(point.v, n)
            budget = r - rank
            w = np.zeros((m, n))
            if budget:
                w = up @ (
                    rng.standard_normal((m - rank, budget))
                    @ rng.standard_normal((budget, n - rank))
                ) @ vp.T
            if rank:
                w = (
                    w
                    + point.u @ rng.standard_normal((rank, rank)) @ point.v.T
                    + point.u @ rng.standard_normal((rank, n - rank)) @ vp.T
                    + up @ rng.standard_normal((m - rank, rank)) @ point.v.T
                )
            assert frobenius(z - projected) <= frobenius(z - w) + 1e-9


class TestStationarity:
    def test_best_approximation_is_stationary(self):
        rng = np.random.default_rng(6)
        from lowrankopt.linalg import singular_values, truncate_to_rank

        for _ in range(30):
            a = rng.standard_normal((8, 6))
            sv = singular_values(a)
            r = 3
            if sv[r - 1] - sv[r] < 1e-3:
                continue
            x, _ = truncate_to_rank(a, r)
            point = point_from_matrix(x, r)
            report = stationarity_measure(LowRankApproxProblem(a), point)
            assert report.s_value <= 1e-9 * frobenius(a)

    def test_at_zero(self):
        rng = np.random.default_rng(7)
        from lowrankopt.linalg import singular_values

        a = rng.standard_normal((6, 5))
        point = point_from_matrix(np.zeros((6, 5)), 2)
        report = stationarity_measure(LowRankApproxProblem(a), point)
        sv = singular_values(a)
        assert report.s_value == pytest.approx(np.sqrt(np.sum(sv[:2] ** 2)), rel=1e-12)

    def test_zero_gradient(self):
        rng = np.random.default_rng(8)
        point = make_point(rng, 5, 4, 2, 2)
        report = stationarity_measure(LowRankApproxProblem(point.matrix()), point)
        assert report.s_value <= 1e-14
        assert report.gradient_norm <= 1e-14

    def test_report_identity(self):
        # the projection and the residual are orthogonal pieces of the gradient
        rng = np.random.default_rng(9)
        for _ in range(200):
            m, n = rng.integers(3, 11, size=2)
            r = int(rng.integers(1, min(m, n)))
            rank = int(rng.integers(0, r + 1))
            point = make_point(rng, m, n, r, rank)
            report = stationarity_measure(
                LowRankApproxProblem(rng.standard_normal((m, n))), point
            )
            lhs = report.s_value**2 + report.residual_distance**2
            assert lhs == pytest.approx(report.gradient_norm**2, rel=1e-9)

    def test_sandwich_property(self):
        rng = np.random.default_rng(10)
        for _ in range(500):
            m, n = rng.integers(3, 13, size=2)
            r = int(rng.integers(1, min(4, min(m, n) - 1) + 1))
            rank = int(rng.integers(0, r + 1))
            point = make_point(rng, m, n, r, rank)
            report = stationarity_measure(
                LowRankApproxProblem(rng.standard_normal((m, n))), point
            )
            assert stationarity_sandwich_check(point, report)

    def test_sandwich_lower_bound_at_zero(self):
        # at the zero matrix the measure captures the top-r spectral mass,
        # which is at least an r/min(m,n) share of the gradient's energy
        rng = np.random.default_rng(30)
        for _ in range(50):
            m, n = rng.integers(3, 10, size=2)
            r = int(rng.integers(1, min(m, n)))
            point = point_from_matrix(np.zeros((m, n)), r)
            problem = LowRankApproxProblem(rng.standard_normal((m, n)))
            report = stationarity_measure(problem, point)
            factor = np.sqrt(r / min(m, n))
            assert report.s_value + 1e-9 >= factor * report.gradient_norm

    def test_sandwich_full_rank_reduces_to_upper(self):
        rng = np.random.default_rng(11)
        point = make_point(rng, 5, 5, 3, 3)
        report = stationarity_measure(LowRankApproxProblem(rng.standard_normal((5, 5))), point)
        assert report.gradient_norm + 1e-9 * report.gradient_norm >= report.s_value

    def test_frame_invariance(self):
        rng = np.random.default_rng(12)
        for _ in range(100):
            m, n = rng.integers(3, 9, size=2)
            r = int(rng.integers(1, min(m, n)))
            rank = int(rng.integers(1, r + 1))
            point = make_point(rng, m, n, r, rank)
            problem = LowRankApproxProblem(rng.standard_normal((m, n)))
            signs = rng.choice([-1.0, 1.0], size=rank)
            flipped = VarietyPoint(point.u * signs, point.sigma.copy(), point.v * signs, r)
            s1 = stationarity_measure(problem, point).s_value
            s2 = stationarity_measure(problem, flipped).s_value
            assert s2 == pytest.approx(s1, rel=1e-9)


class TestTangentCurve:
    def test_starts_at_point(self):
        rng = np.random.default_rng(13)
        point = make_point(rng, 6, 5, 3, 2)
        tangent, _, _ = project_to_tangent_cone(point, rng.standard_normal((6, 5)))
        assert_allclose(tangent_curve(point, tangent, 0.0), point.matrix(), atol=1e-14)

    def test_stays_feasible(self):
        rng = np.random.default_rng(14)
        for _ in range(100):
            m, n = rng.integers(3, 9, size=2)
            r = int(rng.integers(1, min(m, n)))
            rank = int(rng.integers(1, r + 1))
            point = make_point(rng, m, n, r, rank)
            tangent, _, _ = project_to_tangent_cone(point, rng.standard_normal((m, n)))
            t = float(rng.uniform(0.0, 2.0))
            gamma = tangent_curve(point, tangent, t)
            assert compute_svd(gamma).numerical_rank <= r

    def test_quadratic_expansion(self):
        rng = np.random.default_rng(15)
        for _ in range(200):
            m, n = rng.integers(3, 9, size=2)
            r = int(rng.integers(1, min(m, n)))
            rank = int(rng.integers(1, r + 1))
            point = make_point(rng, m, n, r, rank)
            tangent, g_proj, _ = project_to_tangent_cone(point, rng.standard_normal((m, n)))
            t = float(rng.uniform(0.0, 2.0))
            quad = (
                (point.u @ tangent.a + 2.0 * tangent.c_rows) / point.sigma
            ) @ (tangent.a @ point.v.T + 2.0 * tangent.b_cols)
            expected = point.matrix() + t * g_proj + 0.25 * t * t * quad
            assert frobenius(tangent_curve(point, tangent, t) - expected) <= 1e-9 * max(
                frobenius(expected), 1.0
            )

    def test_quadratic_expansion_ill_conditioned(self):
        # spectra spanning seven orders of magnitude keep the identity tight
        rng = np.random.default_rng(32)
        for _ in range(100):
            m, n, r = 8, 7, 4
            rank = int(rng.integers(1, r + 1))
            u, _, v = random_point_factors(rng, m, n, rank)
            sigma = np.sort(10.0 ** rng.uniform(-6, 1, size=rank))[::-1].copy()
            point = VarietyPoint(u, sigma, v, r)
            tangent, g_proj, _ = project_to_tangent_cone(point, rng.standard_normal((m, n)))
            t = float(rng.uniform(0.0, 2.0))
            quad = (
                (point.u @ tangent.a + 2.0 * tangent.c_rows) / point.sigma
            ) @ (tangent.a @ point.v.T + 2.0 * tangent.b_cols)
            expected = point.matrix() + t * g_proj + 0.25 * t * t * quad
            assert frobenius(tangent_curve(point, tangent, t) - expected) <= 1e-9 * max(
                frobenius(expected), 1.0
            )

    def test_curve_witnesses_distance(self):
        # the curve at t=1 is feasible, so it upper-bounds the distance
        rng = np.random.default_rng(16)
        for _ in range(100):
            m, n = rng.integers(3, 9, size=2)
            r = int(rng.integers(1, min(m, n)))
            rank = int(rng.integers(1, r + 1))
            point = make_point(rng, m, n, r, rank)
            tangent, g_proj, _ = project_to_tangent_cone(point, rng.standard_normal((m, n)))
            lhs = distance_to_bounded_rank(point.matrix() + g_proj, r)
            rhs = frobenius(point.matrix() + g_proj - tangent_curve(point, tangent, 1.0))
            assert lhs <= rhs + 1e-10

    def test_undefined_at_zero(self):
        rng = np.random.default_rng(17)
        point = point_from_matrix(np.zeros((4, 4)), 2)
        tangent, _, _ = project_to_tangent_cone(point, rng.standard_normal((4, 4)))
        with pytest.raises(ValueError):
            tangent_curve(point, tangent, 1.0)


class TestDistanceBound:
    def test_property(self):
        rng = np.random.default_rng(18)
        for _ in range(500):
            m, n = rng.integers(3, 10, size=2)
            r = int(rng.integers(1, min(m, n)))
            rank = int(rng.integers(1, r + 1))
            point = make_point(rng, m, n, r, rank)
            _, g_proj, norm = project_to_tangent_cone(point, rng.standard_normal((m, n)))
            dist = distance_to_bounded_rank(point.matrix() + g_proj, r)
            assert dist <= tangent_line_distance_bound(point, norm) + 1e-10

    def test_zero_direction(self):
        rng = np.random.default_rng(19)
        point = make_point(rng, 5, 5, 2, 2)
        assert tangent_line_distance_bound(point, 0.0) == 0.0
        assert distance_to_bounded_rank(point.matrix(), 2) <= 1e-12

    def test_undefined_at_zero_point(self):
        point = point_from_matrix(np.zeros((3, 3)), 2)
        with pytest.raises(ValueError):
            tangent_line_distance_bound(point, 1.0)

    def test_formula(self):
        rng = np.random.default_rng(20)
        point = make_point(rng, 6, 6, 3, 2)
        got = tangent_line_distance_bound(point, 1.7)
        assert got == pytest.approx(np.sqrt(2.0) / (2.0 * point.sigma_min) * 1.7**2, rel=1e-12)


class TestTightnessInstance:
    def test_reference_values(self):
        point, g = tightness_instance(2, 3, 3, 0.25)
        assert point.sigma_min == pytest.approx(1.0, abs=1e-14)
        assert frobenius(g) ** 2 == pytest.approx(2.0, abs=1e-12)
        dist = distance_to_bounded_rank(point.matrix() + g, 2)
        assert dist == pytest.approx((np.sqrt(5.0) - 1.0) / 2.0, abs=1e-10)
        ratio = dist / frobenius(g) ** 2
        assert ratio >= 1.0 / 2.0 - 0.25 - 1e-10

    def test_smallest_instance(self):
        point, g = tightness_instance(1, 2, 2, 0.25)
        assert_allclose(point.matrix(), np.diag([1.0, 0.0]), atol=1e-14)
        assert_allclose(g, np.array([[0.0, 1.0], [1.0, 0.0]]))

    def test_sigma_min_scales(self):
        for eps in (0.05, 0.25, 1.0):
            point, _ = tightness_instance(2, 4, 5, eps)
            assert point.sigma_min == pytest.approx(1.0 / (4.0 * eps), rel=1e-12)

    def test_direction_is_feasible(self):
        point, g = tightness_instance(2, 3, 3, 0.25)
        _, projected, _ = project_to_tangent_cone(point, g)
        assert_allclose(projected, g, atol=1e-12)

    def test_shape_too_small(self):
        with pytest.raises(ValueError):
            tightness_instance(2, 2, 3, 0.25)


def test_continuity_of_measure_on_fixed_rank():
    # shrinking same-rank perturbations shrink the measure's oscillation
    rng = np.random.default_rng(21)
    point = make_point(rng, 8, 7, 4, 2)
    problem = LowRankApproxProblem(rng.standard_normal((8, 7)))
    s0 = stationarity_measure(problem, point).s_value
    x = point.matrix()
    deviations = []
    for h in (1e-2, 1e-3, 1e-4):
        worst = 0.0
        for _ in range(40):
            e = rng.standard_normal((8, 7))
            y = x + h * e / frobenius(e)
            fact = compute_svd(y).leading(2)
            y_pt = VarietyPoint(fact.u, fact.sigma, fact.v, 4)
            worst = max(worst, abs(stationarity_measure(problem, y_pt).s_value - s0))
        deviations.append(worst)
    assert deviations[0] > deviations[1] > deviations[2]


def test_point_validation():
    rng = np.random.default_rng(22)
    u, sigma, v = random_point_factors(rng, 5, 4, 2)
    with pytest.raises(ValueError, match="orthonormal"):
        VarietyPoint(u * 2.0, sigma, v, 3)
    with pytest.raises(ValueError, match="nonincreasing"):
        VarietyPoint(u, np.array([1.0, 2.0]), v, 3)
    with pytest.raises(InfeasiblePointError):
        VarietyPoint(u, sigma, v, 1)
    with pytest.raises(ValueError):
        VarietyPoint(u, sigma, v, 4)  # bound not below min(m, n)


def test_point_arrays_are_read_only():
    rng = np.random.default_rng(33)
    point = make_point(rng, 5, 4, 2, 2)
    with pytest.raises(ValueError):
        point.u[0, 0] = 7.0
    with pytest.raises(ValueError):
        point.sigma[0] = 7.0


def test_truncated_keeps_leading_triplets():
    rng = np.random.default_rng(23)
    point = make_point(rng, 6, 5, 3, 3)
    cut = point.truncated(1)
    assert cut.rank == 1
    assert_allclose(cut.sigma, point.sigma[:1])
    assert frobenius(cut.matrix() - point.matrix()) == pytest.approx(
        np.sqrt(np.sum(point.sigma[1:] ** 2)), rel=1e-12
    )
