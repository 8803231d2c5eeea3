import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kerrgap.errors import ConvergenceError, DomainError
from kerrgap.hyperbolic_targets import (CH2Point, H2Point, ch2_christoffel, ch2_distance,
                                        ch2_distance_field, ch2_geodesic, ch2_geodesic_field,
                                        ch2_metric, christoffel_from_metric, geodesic_lengths,
                                        h2_christoffel, h2_distance, h2_geodesic, h2_log_christoffel,
                                        h2_log_metric, h2_metric, kato_terms, sectional_curvature,
                                        shoot_geodesics)

coord = st.floats(-2.0, 2.0)
pos = st.floats(0.1, 5.0)


class TestH2Closed:
    def test_vertical_segment(self):
        np.testing.assert_allclose(h2_distance((1.0, 0.0), (np.e, 0.0)), 1.0, rtol=1e-14)

    def test_rejects_left_half(self):
        with pytest.raises(DomainError):
            H2Point(0.0, 1.0)
        with pytest.raises(DomainError):
            h2_distance((-1.0, 0.0), (1.0, 0.0))

    @given(pos, coord, pos, coord)
    def test_symmetric_nonnegative(self, x0, y0, x1, y1):
        d = h2_distance((x0, y0), (x1, y1))
        assert d >= 0
        np.testing.assert_allclose(d, h2_distance((x1, y1), (x0, y0)), rtol=1e-12, atol=1e-14)

    @given(pos, coord, pos, coord, pos, coord)
    def test_triangle(self, x0, y0, x1, y1, x2, y2):
        p, q, s = (x0, y0), (x1, y1), (x2, y2)
        assert h2_distance(p, s) <= h2_distance(p, q) + h2_distance(q, s) + 1e-10

    @given(pos, coord, pos, coord, st.floats(0.0, 1.0))
    def test_geodesic_splits_distance(self, x0, y0, x1, y1, t):
        p, q = (x0, y0), (x1, y1)
        m = h2_geodesic(p, q, t).as_array()
        d = h2_distance(p, q)
        np.testing.assert_allclose(h2_distance(p, m), t * d, atol=1e-9 * (1 + d))
        np.testing.assert_allclose(h2_distance(m, q), (1 - t) * d, atol=1e-9 * (1 + d))

    def test_isometry_invariance(self):
        p, q = np.array([0.7, -0.3]), np.array([2.1, 1.4])
        d = h2_distance(p, q)
        # dilation and vertical translation are isometries
        np.testing.assert_allclose(h2_distance(3 * p, 3 * q), d, rtol=1e-13)
        np.testing.assert_allclose(h2_distance(p + [0, 5], q + [0, 5]), d, rtol=1e-13)


class TestChristoffel:
    @pytest.mark.parametrize("metric, christoffel, x", [
        (h2_metric, h2_christoffel, np.array([0.8, -0.4])),
        (h2_log_metric, h2_log_christoffel, np.array([0.3, 1.2])),
        (ch2_metric, lambda x: ch2_christoffel(x)[0], np.array([0.2, -0.5, 0.4, 0.7])),
    ])
    def test_matches_metric_derivatives(self, metric, christoffel, x):
        n, h = len(x), 1e-6
        dG = np.array([(metric(x + h * e) - metric(x - h * e)) / (2 * h) for e in np.eye(n)])
        ref = christoffel_from_metric(metric(x), dG)
        np.testing.assert_allclose(np.asarray(christoffel(x)).reshape(n, n, n), ref, atol=1e-7)


class TestShooting:
    def test_h2_lengths_match_closed_form(self, rng):
        P = np.c_[rng.uniform(-1, 1, 20), rng.uniform(-2, 2, 20)]
        Q = np.c_[rng.uniform(-1, 1, 20), rng.uniform(-2, 2, 20)]
        ode = geodesic_lengths(h2_log_christoffel, h2_log_metric, P, Q)
        closed = [h2_distance((np.exp(p[0]), p[1]), (np.exp(q[0]), q[1])) for p, q in zip(P, Q)]
        np.testing.assert_allclose(ode, closed, atol=1e-8)

    def test_ch2_closed_form_matches_shooting(self, rng):
        P, Q = rng.uniform(-1, 1, (6, 4)), rng.uniform(-1, 1, (6, 4))
        ode = geodesic_lengths(ch2_christoffel, ch2_metric, P, Q)
        np.testing.assert_allclose(ode, ch2_distance_field(P, Q), atol=1e-8)

    def test_ch2_geodesic_endpoints_and_midpoint(self):
        p, q = CH2Point(0.1, -0.3, 0.2, 0.5), CH2Point(-0.4, 0.6, -0.1, 0.2)
        curve = ch2_geodesic(p, q, n_samples=3)
        np.testing.assert_allclose(curve.points[0], p.as_array(), atol=1e-12)
        np.testing.assert_allclose(curve.points[-1], q.as_array(), atol=1e-8)
        mid = ch2_geodesic_field(p.as_array(), q.as_array(), 0.5)
        np.testing.assert_allclose(curve.points[1], mid, atol=1e-7)
        np.testing.assert_allclose(ch2_distance(p, q), curve.length, rtol=1e-12)

    def test_coincident_points(self):
        p = CH2Point(0.0, 0.0, 0.0, 0.0)
        assert ch2_geodesic(p, p).length == 0.0

    def test_non_convergence_raises(self):
        p = np.array([[0.0, 0.0, 0.0, 0.0]])
        q = np.array([[3.0, 4.0, -3.0, 3.0]])
        with pytest.raises(ConvergenceError) as exc:
            shoot_geodesics(ch2_christoffel, ch2_metric, p, q, max_iter=1, continuation_steps=1)
        assert exc.value.residual > 0


class TestCurvature:
    def test_h2_constant_minus_one(self):
        k = sectional_curvature(h2_metric, np.array([0.7, 0.2]), (np.eye(2)[0], np.eye(2)[1]))
        np.testing.assert_allclose(k, -1.0, atol=1e-6)

    def test_ch2_slice_minus_four(self, rng):
        for _ in range(3):
            k = sectional_curvature(ch2_metric, rng.uniform(-1, 1, 4), (np.eye(4)[0], np.eye(4)[1]))
            np.testing.assert_allclose(k, -4.0, atol=1e-5)

    def test_ch2_pinched(self, rng):
        for _ in range(10):
            k = sectional_curvature(ch2_metric, rng.uniform(-1, 1, 4), rng.normal(size=(2, 4)))
            assert -4.0 - 1e-4 <= k <= -1.0 + 1e-4

    def test_degenerate_span(self):
        X = np.array([1.0, 2.0, 0.0, 0.0])
        with pytest.raises(DomainError):
            sectional_curvature(ch2_metric, np.zeros(4), (X, 2 * X))

    def test_kato_parallel_field_is_tight(self):
        # constant field along a coordinate line of the flat u-direction: both sides vanish
        lhs, rhs = kato_terms(ch2_metric, lambda x: ch2_christoffel(x)[0],
                              lambda s: np.array([s, 0.0, 0.0, 0.0]),
                              lambda s: np.array([1.0, 0.0, 0.0, 0.0]), 0.1)
        assert lhs <= 1e-8 and rhs <= 1e-8

    def test_kato_random(self, rng):
        for _ in range(20):
            c0, c1, A, B = rng.normal(size=(4, 4))
            lhs, rhs = kato_terms(ch2_metric, lambda x: ch2_christoffel(x)[0],
                                  lambda s: c0 * 0.3 + s * c1, lambda s: A + s * B, 0.2)
            assert lhs <= rhs * (1 + 1e-6) + 1e-9


class TestCH2Closed:
    def test_metric_frozen_values(self):
        g = ch2_metric(np.array([0.0, 0.0, 1.0, 0.0]))
        np.testing.assert_allclose(g[1, 3], 1.0)
        np.testing.assert_allclose(g[3, 3], 2.0)
        u = 0.3
        np.testing.assert_allclose(np.diag(ch2_metric(np.array([u, 0.4, 0.0, 0.0]))),
                                   [1, np.exp(4 * u), np.exp(2 * u), np.exp(2 * u)])

    def test_metric_axes_1000(self, rng):
        P, Q, S = (rng.uniform(-1.5, 1.5, (1000, 4)) for _ in range(3))
        dpq, dqp = ch2_distance_field(P, Q), ch2_distance_field(Q, P)
        np.testing.assert_allclose(dpq, dqp, atol=1e-10)
        assert np.all(ch2_distance_field(P, S) <= dpq + ch2_distance_field(Q, S) + 1e-8)
        np.testing.assert_allclose(ch2_distance_field(P, P), 0.0, atol=1e-7)

    def test_u_line_is_geodesic(self):
        p, q = np.array([0.0, 0.2, 0.0, 0.0]), np.array([1.5, 0.2, 0.0, 0.0])
        np.testing.assert_allclose(ch2_distance_field(p, q), 1.5, rtol=1e-12)
