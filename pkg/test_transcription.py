import math
import unittest

import numpy as np

from hjb.catalog import build_lqr, build_vehicle
from hjb.errors import NotConverged
from hjb.models import PGDConfig
from hjb.problem import TerminalCondition
from solvers.transcription import TranscriptionProblem, adjoint_gradient, objective, simulate, transcribe_and_solve


class TestAdjointGradient(unittest.TestCase):

    def setUp(self):
        self.lqr = build_lqr("lqr5x3")
        self.g = TerminalCondition.quadratic(0.1, 0.5, np.zeros((1, 5)))

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(0)
        tp = TranscriptionProblem(self.lqr, self.g, rng.uniform(-1.0, 1.0, size=5), steps=10)
        u = rng.uniform(-0.3, 0.4, size=(10, 3))
        delta = 1e-6

        grad = adjoint_gradient(tp, u)

        approx = np.empty_like(u)
        for idx in np.ndindex(*u.shape):
            plus, minus = u.copy(), u.copy()
            plus[idx] += delta
            minus[idx] -= delta
            approx[idx] = (objective(tp, plus) - objective(tp, minus)) / (2.0 * delta)
        self.assertTrue(np.all(np.abs(grad - approx) <= 1e-6 * np.abs(grad) + 1e-8))

    def test_single_step_closed_form(self):
        x0 = np.array([0.2, -0.1, 0.4, 0.0, 0.3])
        u = np.array([[0.1, -0.2, 0.05]])
        tp = TranscriptionProblem(self.lqr, TerminalCondition.squared_norm(np.zeros((1, 5))), x0, steps=1)
        A, B = self.lqr.metadata["A"], self.lqr.metadata["B"]
        dt = self.lqr.T

        grad = adjoint_gradient(tp, u)

        x1 = x0 + dt * (A @ x0 + B @ u[0])
        np.testing.assert_allclose(grad[0], dt * 2.0 * u[0] + dt * B.T @ (2.0 * x1), atol=1e-14)

    def test_flat_objective_has_zero_gradient(self):
        vehicle = build_vehicle()
        tp = TranscriptionProblem(vehicle, TerminalCondition.quadratic(0.7, 0.0, np.zeros((1, 2))),
                                  np.array([0.3, 0.3]), steps=5)

        grad = adjoint_gradient(tp, np.full((5, 1), 0.4))

        np.testing.assert_array_equal(grad, np.zeros((5, 1)))


class TestTranscribeAndSolve(unittest.TestCase):

    def setUp(self):
        self.vehicle = build_vehicle()
        self.g = TerminalCondition.norm(np.zeros((1, 2)))

    def test_vehicle_reference_value(self):
        tp = TranscriptionProblem(self.vehicle, self.g, np.array([-1.5, -0.5]), steps=20)

        solution = transcribe_and_solve(tp, PGDConfig(steps=20, n_starts=2))

        self.assertAlmostEqual(solution.objective, math.sqrt(2.5) - 1.0, delta=5e-3)
        self.assertTrue(all(b <= a for a, b in zip(solution.history, solution.history[1:])))

    def test_vehicle_can_reach_the_origin(self):
        tp = TranscriptionProblem(self.vehicle, self.g, np.array([0.0, -0.5]), steps=20)

        solution = transcribe_and_solve(tp, PGDConfig(steps=20, n_starts=1))

        self.assertLess(solution.objective, 5e-3)

    def test_lqr_at_the_origin(self):
        lqr = build_lqr("lqr5x3")
        tp = TranscriptionProblem(lqr, TerminalCondition.squared_norm(np.zeros((1, 5))), np.zeros(5), steps=10)

        solution = transcribe_and_solve(tp, PGDConfig(steps=10, n_starts=2))

        self.assertEqual(solution.objective, 0.0)
        self.assertTrue(solution.converged)

    def test_lqr_controls_are_admissible_and_consistent(self):
        lqr = build_lqr("lqr5x3")
        tp = TranscriptionProblem(lqr, TerminalCondition.squared_norm(np.zeros((1, 5))), np.full(5, 0.8), steps=10)

        solution = transcribe_and_solve(tp, PGDConfig(steps=10, n_starts=2, threads=2))

        self.assertTrue(np.all(lqr.control_set.contains(solution.controls)))
        states, stage, terminal = simulate(tp, solution.controls)
        self.assertAlmostEqual(float(np.sum(stage)) + terminal, solution.objective, places=12)
        np.testing.assert_array_equal(states, solution.states)
        self.assertEqual(len(solution.to_frame()), 11)

    def test_strict_mode_raises_when_not_converged(self):
        tp = TranscriptionProblem(self.vehicle, self.g, np.array([-1.5, -0.5]), steps=20)

        with self.assertRaises(NotConverged):
            transcribe_and_solve(tp, PGDConfig(steps=20, n_starts=1, max_iter=1, strict=True))

    def test_strict_mode_raises_on_a_line_search_stall(self):
        tp = TranscriptionProblem(self.vehicle, self.g, np.array([-1.5, -0.5]), steps=20)

        with self.assertRaises(NotConverged):
            transcribe_and_solve(tp, PGDConfig(steps=20, n_starts=1, initial_step=1e9, shrink=0.9, strict=True))

    def test_unconverged_best_start_is_flagged(self):
        tp = TranscriptionProblem(self.vehicle, self.g, np.array([-1.5, -0.5]), steps=20)

        solution = transcribe_and_solve(tp, PGDConfig(steps=20, n_starts=1, max_iter=1))

        self.assertFalse(solution.converged)
        self.assertTrue(solution.warnings)

    def test_line_search_stall_is_not_convergence(self):
        # every halving still overshoots, so no step satisfies the sufficient decrease
        tp = TranscriptionProblem(self.vehicle, self.g, np.array([-1.5, -0.5]), steps=20)

        solution = transcribe_and_solve(tp, PGDConfig(steps=20, n_starts=1, initial_step=1e9, shrink=0.9))

        self.assertFalse(solution.converged)
        self.assertEqual(solution.iterations, 1)
        self.assertTrue(any("no descent step" in w for w in solution.warnings))
        self.assertEqual(len(solution.history), 1)


if __name__ == '__main__':
    unittest.main()
