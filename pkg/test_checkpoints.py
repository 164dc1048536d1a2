import os
import tempfile
import unittest

import numpy as np

from hjb.errors import ConfigError
from network.checkpoints import load_mlp, save_mlp
from network.mlp import init_params


class TestMlpCheckpoint(unittest.TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.net = init_params([3, 5, 4, 2], "tanh", seed=11)

    def tearDown(self):
        self.tmp.cleanup()

    def test_round_trip_is_bit_exact(self):
        path = os.path.join(self.tmp.name, "mlp.npz")

        save_mlp(path, self.net)
        loaded = load_mlp(path)

        self.assertEqual(loaded.widths, self.net.widths)
        self.assertEqual(loaded.activation, self.net.activation)
        self.assertEqual(loaded.seed, self.net.seed)
        for a, b in zip(loaded.weights + loaded.biases, self.net.weights + self.net.biases):
            np.testing.assert_array_equal(a, b)

    def test_unseeded_network_keeps_no_seed(self):
        path = os.path.join(self.tmp.name, "mlp.npz")
        net = init_params([2, 3], "tanh", seed=None)

        save_mlp(path, net)

        self.assertIsNone(load_mlp(path).seed)

    def test_version_mismatch(self):
        path = os.path.join(self.tmp.name, "old.npz")
        np.savez(path, format_version=np.asarray(-7), widths=np.asarray([1, 1]))

        with self.assertRaises(ConfigError):
            load_mlp(path)


if __name__ == '__main__':
    unittest.main()
