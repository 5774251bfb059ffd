"""Tests for the numerical substrate: pseudoinverse solves and event-aware ODE.

Expected values come from independent oracles: normal-equation solves for
full-rank least squares, hand-derived minimum-norm solutions for
rank-deficient systems, and closed-form ODE solutions (exponentials,
polynomials) for the integrator.
"""

import numpy as np
import pytest

from agepath.numerics import IvpSpec, integrate, pinv_solve

# ---------------------------------------------------------------------------
# pinv_solve


class TestPinvSolve:
    def test_identity(self):
        b = np.array([1.0, -2.0, 3.0])
        np.testing.assert_allclose(pinv_solve(np.eye(3), b), b)

    def test_full_rank_matches_normal_equations(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            A = rng.standard_normal((6, 4))
            b = rng.standard_normal(6)
            x_oracle = np.linalg.solve(A.T @ A, A.T @ b)
            np.testing.assert_allclose(pinv_solve(A, b), x_oracle, atol=1e-10)

    def test_square_nonsingular(self):
        rng = np.random.default_rng(1)
        A = rng.standard_normal((5, 5)) + 5.0 * np.eye(5)
        b = rng.standard_normal(5)
        np.testing.assert_allclose(A @ pinv_solve(A, b), b, atol=1e-10)

    def test_rank_one_min_norm(self):
        # A = [[1,0],[1,0]], b = (2,2): least-squares solutions are (2, t);
        # the minimum-norm one is (2, 0).
        A = np.array([[1.0, 0.0], [1.0, 0.0]])
        b = np.array([2.0, 2.0])
        np.testing.assert_allclose(pinv_solve(A, b), [2.0, 0.0], atol=1e-12)

    def test_zero_matrix(self):
        np.testing.assert_allclose(
            pinv_solve(np.zeros((3, 2)), np.ones(3)), np.zeros(2))

    def test_singular_square_min_norm(self):
        # rank-1 square system: pinv of outer(u,v) maps b to (u.b/|u|^2|v|^2) v
        u = np.array([1.0, 2.0])
        v = np.array([3.0, -1.0])
        A = np.outer(u, v)
        b = np.array([1.0, 1.0])
        x_oracle = (u @ b) / (u @ u) / (v @ v) * v
        np.testing.assert_allclose(pinv_solve(A, b), x_oracle, atol=1e-12)

    def test_validation(self):
        with pytest.raises(ValueError):
            pinv_solve(np.array([[np.inf]]), np.array([1.0]))
        with pytest.raises(ValueError):
            pinv_solve(np.eye(2), np.ones(3))


# ---------------------------------------------------------------------------
# integrate: accuracy


class TestIntegrateAccuracy:
    def test_constant_rhs(self):
        res = integrate(IvpSpec(lambda t, y: np.ones(1), 0.0, 1.0, np.zeros(1)))
        assert res.terminal.status == "reached"
        assert res.states[-1][0] == pytest.approx(1.0, abs=1e-9)

    def test_exponential_decay(self):
        # y' = -y, y(0)=1 -> y(2) = e^-2
        spec = IvpSpec(lambda t, y: -y, 0.0, 2.0, np.ones(1), rtol=1e-8, atol=1e-12)
        res = integrate(spec)
        assert res.terminal.status == "reached"
        assert res.states[-1][0] == pytest.approx(np.exp(-2.0), rel=1e-7)

    def test_order_scaling(self):
        # halving rtol should reduce the error by a clear factor
        def err(rtol):
            spec = IvpSpec(lambda t, y: -y, 0.0, 2.0, np.ones(1),
                           rtol=rtol, atol=1e-14)
            res = integrate(spec)
            return abs(res.states[-1][0] - np.exp(-2.0))

        assert err(1e-6) / max(err(1e-9), 1e-16) > 4.0

    def test_sample_points_increasing_with_record_step(self):
        spec = IvpSpec(lambda t, y: np.cos(t) * np.ones(1), 0.0, 3.0,
                       np.zeros(1), record_step=0.01)
        res = integrate(spec)
        assert np.all(np.diff(res.lams) > 0)
        assert len(res.lams) >= 250
        np.testing.assert_allclose(res.states[:, 0], np.sin(res.lams), atol=1e-6)

    def test_derivs_returned_at_samples(self):
        spec = IvpSpec(lambda t, y: np.cos(t) * np.ones(1), 0.0, 3.0,
                       np.zeros(1), record_step=0.05)
        res = integrate(spec)
        assert res.derivs is not None and res.derivs.shape == res.states.shape
        np.testing.assert_allclose(res.derivs[:, 0], np.cos(res.lams), atol=1e-5)

    def test_deterministic(self):
        spec = lambda: IvpSpec(lambda t, y: np.sin(y) + 0.5, 0.0, 4.0,
                               np.array([0.3]), record_step=0.1)
        a, b = integrate(spec()), integrate(spec())
        np.testing.assert_array_equal(a.lams, b.lams)
        np.testing.assert_array_equal(a.states, b.states)


# ---------------------------------------------------------------------------
# integrate: events


class TestIntegrateEvents:
    def test_event_located(self):
        # y' = 1 from 0: monitor y - 0.5 crosses at t = 0.5
        spec = IvpSpec(lambda t, y: np.ones(1), 0.0, 1.0, np.zeros(1),
                       monitors=lambda t, y: np.array([y[0] - 0.5]))
        res = integrate(spec)
        assert res.terminal.status == "event"
        assert res.terminal.monitor_indices == [0]
        assert res.terminal.lam_event == pytest.approx(0.5, abs=1e-8)
        assert res.terminal.state_event[0] == pytest.approx(0.5, abs=1e-7)

    def test_first_of_many_monitors(self):
        spec = IvpSpec(lambda t, y: np.ones(1), 0.0, 1.0, np.zeros(1),
                       monitors=lambda t, y: np.array([y[0] - 0.9, y[0] - 0.3]))
        res = integrate(spec)
        assert res.terminal.status == "event"
        assert res.terminal.monitor_indices == [1]
        assert res.terminal.lam_event == pytest.approx(0.3, abs=1e-8)

    def test_armed_zero_monitor_does_not_retrigger(self):
        # monitor starts exactly at zero; it must arm as it departs and only
        # fire on a genuine sign change later
        spec = IvpSpec(lambda t, y: np.ones(1), 0.0, 1.0, np.zeros(1),
                       monitors=lambda t, y: np.array([y[0] * (y[0] - 0.4)]))
        res = integrate(spec)
        assert res.terminal.status == "event"
        assert res.terminal.lam_event == pytest.approx(0.4, abs=1e-8)

    def test_no_crossing_reaches_end(self):
        spec = IvpSpec(lambda t, y: np.ones(1), 0.0, 1.0, np.zeros(1),
                       monitors=lambda t, y: np.array([y[0] + 1.0]))
        res = integrate(spec)
        assert res.terminal.status == "reached"
        assert res.lams[-1] == pytest.approx(1.0)


# ---------------------------------------------------------------------------
# integrate: failure reporting


class TestIntegrateFailure:
    def test_nonfinite_rhs_at_start(self):
        res = integrate(IvpSpec(lambda t, y: np.array([np.nan]),
                                0.0, 1.0, np.zeros(1)))
        assert res.terminal.status == "failure"

    def test_blowup_reported(self):
        # y' = y^2, y(0)=1 blows up at t=1 inside [0, 2]
        res = integrate(IvpSpec(lambda t, y: y * y, 0.0, 2.0, np.ones(1)))
        assert res.terminal.status == "failure"
        assert len(res.lams) == len(res.states)

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            IvpSpec(lambda t, y: y, 1.0, 0.0, np.zeros(1))
        with pytest.raises(ValueError):
            IvpSpec(lambda t, y: y, 0.0, 1.0, np.zeros(1), rtol=-1.0)
