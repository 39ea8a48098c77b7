"""
Test utilities and fixtures for entbench tests
"""

import unittest
import tempfile
import os
import shutil
import numpy as np
from pathlib import Path

from entbench.core.circuit import Circuit, GateKind
from entbench.core.topology import Calibration, DeviceGraph, linear, save_layout, t_layout


_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_CX = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
_CZ = np.diag([1, 1, 1, -1]).astype(complex)


class TestFixtures:
    """Common test fixtures and utilities"""

    @staticmethod
    def line_device(n: int = 5) -> DeviceGraph:
        return linear(n)

    @staticmethod
    def t_device() -> DeviceGraph:
        return t_layout()

    @staticmethod
    def uniform_calibration(g: DeviceGraph, **overrides) -> Calibration:
        """Calibration with the library defaults unless overridden"""
        return Calibration.uniform(g, **overrides)

    @staticmethod
    def noiseless_calibration(g: DeviceGraph) -> Calibration:
        """Zero gate and readout error; relaxation still finite"""
        return Calibration.uniform(g, cx_error=0.0, readout_flip=0.0, sx_error=0.0)

    @staticmethod
    def create_layout_file(file_path: str, g: DeviceGraph = None, cal: Calibration = None) -> str:
        """Write a layout file for testing"""
        g = g or linear(3)
        save_layout(file_path, g, cal)
        return file_path

    # -- independent references --------------------------------------------

    @staticmethod
    def dense_statevector(circuit: Circuit) -> np.ndarray:
        """Ideal state over all n_qubits, axis q = qubit q; delays and barriers are no-ops"""
        n = circuit.n_qubits
        psi = np.zeros((2,) * n, dtype=complex)
        psi[(0,) * n] = 1.0
        for gate in circuit.ops:
            if gate.kind in (GateKind.BARRIER, GateKind.DELAY, GateKind.MEASURE):
                continue
            if gate.kind is GateKind.DEPHASE:
                raise ValueError("Dephasing has no statevector form")
            if gate.kind is GateKind.PHASE:
                matrix = np.diag([1.0, np.exp(-1j * gate.angle)])
            else:
                matrix = {GateKind.H: _H, GateKind.X: _X, GateKind.CX: _CX, GateKind.CZ: _CZ}[gate.kind]
            axes = list(gate.qubits)
            m = len(axes)
            op = matrix.reshape((2,) * (2 * m))
            psi = np.tensordot(op, psi, axes=(list(range(m, 2 * m)), axes))
            psi = np.moveaxis(psi, list(range(m)), axes)
        return psi

    @staticmethod
    def ideal_outcomes(circuit: Circuit) -> dict:
        """Measured bit strings of the ideal state, clbit 0 rightmost"""
        probs = np.abs(TestFixtures.dense_statevector(circuit)) ** 2
        width = circuit.n_clbits
        result: dict = {}
        for index in zip(*np.nonzero(probs > 1e-14)):
            key = ["0"] * width
            for q, c in circuit.measurements:
                key[width - 1 - c] = str(index[q])
            bits = "".join(key)
            result[bits] = result.get(bits, 0.0) + float(probs[index])
        return result

    @staticmethod
    def brute_force_negativity(rho: np.ndarray) -> float:
        """Two-qubit negativity with the partial transpose on the second qubit, element by element"""
        pt = np.zeros((4, 4), dtype=complex)
        for a in range(2):
            for b in range(2):
                for c in range(2):
                    for d in range(2):
                        pt[2 * a + b, 2 * c + d] = rho[2 * a + d, 2 * c + b]
        eigs = np.linalg.eigvalsh(pt)
        return float(sum(-e for e in eigs if e < 0))

    @staticmethod
    def simplex_projection(values: np.ndarray) -> np.ndarray:
        """Euclidean projection onto the probability simplex by sorting"""
        v = np.asarray(values, dtype=float)
        u = np.sort(v)[::-1]
        cumulative = np.cumsum(u) - 1.0
        ks = np.arange(1, v.size + 1)
        rho = ks[u - cumulative / ks > 0][-1]
        theta = cumulative[rho - 1] / rho
        return np.maximum(v - theta, 0.0)

    @staticmethod
    def random_density_matrix(k: int, seed: int = 0) -> np.ndarray:
        rng = np.random.default_rng(seed)
        dim = 2**k
        a = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        rho = a @ a.conj().T
        return rho / np.trace(rho).real

    @staticmethod
    def bell_state() -> np.ndarray:
        psi = np.array([1, 0, 0, 1], dtype=complex) / np.sqrt(2)
        return np.outer(psi, psi.conj())

    @staticmethod
    def werner_state(p: float) -> np.ndarray:
        return p * TestFixtures.bell_state() + (1 - p) * np.eye(4) / 4


class BaseTestCase(unittest.TestCase):
    """Base test case with common setup and utilities"""

    def setUp(self):
        """Set up test fixtures"""
        self.temp_dir = tempfile.mkdtemp()
        self.fixtures = TestFixtures()

    def tearDown(self):
        """Clean up test fixtures"""
        if os.path.exists(self.temp_dir):
            shutil.rmtree(self.temp_dir)

    def get_temp_file_path(self, filename: str) -> str:
        """Get a temporary file path"""
        return os.path.join(self.temp_dir, filename)

    def create_test_layout_file(self, filename: str = "layout.json", g: DeviceGraph = None, cal: Calibration = None) -> str:
        """Create a layout file and return its path"""
        return self.fixtures.create_layout_file(self.get_temp_file_path(filename), g, cal)

    def assert_distribution_close(self, actual: dict, expected: dict, places: int = 7):
        """Compare two bit-string distributions key by key"""
        for key in set(actual) | set(expected):
            self.assertAlmostEqual(actual.get(key, 0.0), expected.get(key, 0.0), places=places, msg=key)


class TestUtilities(unittest.TestCase):
    """Test the test utilities themselves"""

    def setUp(self):
        self.temp_dir = tempfile.mkdtemp()
        self.fixtures = TestFixtures()

    def tearDown(self):
        if os.path.exists(self.temp_dir):
            shutil.rmtree(self.temp_dir)

    def test_create_layout_file(self):
        """Layout file helper writes readable JSON"""
        file_path = os.path.join(self.temp_dir, "layout.json")
        result_path = self.fixtures.create_layout_file(file_path)

        self.assertEqual(result_path, file_path)
        self.assertTrue(Path(file_path).exists())

    def test_brute_force_negativity(self):
        self.assertAlmostEqual(self.fixtures.brute_force_negativity(self.fixtures.bell_state()), 0.5)
        self.assertAlmostEqual(self.fixtures.brute_force_negativity(np.eye(4) / 4), 0.0)

    def test_simplex_projection(self):
        projected = self.fixtures.simplex_projection(np.array([0.7, 0.5, -0.2]))
        self.assertAlmostEqual(projected.sum(), 1.0)
        self.assertTrue(np.all(projected >= 0))
        np.testing.assert_allclose(projected, [0.6, 0.4, 0.0], atol=1e-12)

    def test_random_density_matrix(self):
        rho = self.fixtures.random_density_matrix(2, seed=3)
        self.assertAlmostEqual(np.trace(rho).real, 1.0)
        self.assertTrue(np.all(np.linalg.eigvalsh(rho) >= -1e-12))
