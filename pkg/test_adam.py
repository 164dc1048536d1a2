import math
import unittest

import numpy as np

from hjb.errors import ShapeMismatch
from network.adam import AdamState, adam_step


class TestAdam(unittest.TestCase):

    def setUp(self):
        self.params = [np.array([[1.0, -2.0], [0.5, 0.0]]), np.array([3.0])]
        self.state = AdamState.for_parameters(self.params, lr=0.1)

    def test_first_step_moves_by_lr(self):
        grads = [np.array([[0.5, -4.0], [2.0, 1e-3]]), np.array([-7.0])]

        updated = adam_step(self.state, self.params, grads)

        for p, g, new in zip(self.params, grads, updated):
            np.testing.assert_allclose(new - p, -0.1 * np.sign(g), rtol=1e-4)

    def test_zero_gradient_leaves_parameters(self):
        grads = [np.zeros((2, 2)), np.zeros(1)]

        updated = adam_step(self.state, self.params, grads)

        for p, new in zip(self.params, updated):
            np.testing.assert_array_equal(new, p)
        for m, v in zip(self.state.m, self.state.v):
            np.testing.assert_array_equal(m, np.zeros_like(m))
            np.testing.assert_array_equal(v, np.zeros_like(v))

    def test_two_step_recurrence(self):
        theta = [np.array([1.0])]
        state = AdamState.for_parameters(theta, lr=0.1, beta1=0.9, beta2=0.999, eps=1e-8)
        g = [np.array([2.0])]

        theta = adam_step(state, adam_step(state, theta, g), g)

        # scalar recomputation of both steps
        m, v, value = 0.0, 0.0, 1.0
        for t in (1, 2):
            m = 0.9 * m + 0.1 * 2.0
            v = 0.999 * v + 0.001 * 4.0
            value -= 0.1 * (m / (1 - 0.9 ** t)) / (math.sqrt(v / (1 - 0.999 ** t)) + 1e-8)
        self.assertAlmostEqual(float(theta[0][0]), value, places=14)
        self.assertEqual(state.t, 2)

    def test_step_counters(self):
        before = AdamState.total_steps
        grads = [np.ones((2, 2)), np.ones(1)]

        adam_step(self.state, self.params, grads)
        adam_step(self.state, self.params, grads)

        self.assertEqual(self.state.t, 2)
        self.assertEqual(AdamState.total_steps, before + 2)

    def test_deterministic_update(self):
        grads = [np.array([[0.1, 0.2], [0.3, 0.4]]), np.array([0.5])]
        twin = AdamState.for_parameters(self.params, lr=0.1)

        a = adam_step(self.state, self.params, grads)
        b = adam_step(twin, self.params, grads)

        for x, y in zip(a, b):
            np.testing.assert_array_equal(x, y)

    def test_shape_mismatch(self):
        with self.assertRaises(ShapeMismatch):
            adam_step(self.state, self.params, [np.zeros(2), np.zeros(1)])
        with self.assertRaises(ShapeMismatch):
            adam_step(self.state, self.params, [np.zeros((2, 2))])


if __name__ == '__main__':
    unittest.main()
