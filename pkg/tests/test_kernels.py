"""Kernel backends: dispatch, NumPy-oracle correctness, cross-backend parity.

The compiled backend must be importable in a built tree; parity tests
compare it against the pure-Python backend on the same inputs.
"""

import os
import subprocess
import sys

import numpy as np
import pytest

from recall_forge import kernels


@pytest.fixture
def restore_backend():
    name = kernels.active_name()
    yield
    kernels.use(name)


def _random_tower(rng, dims):
    weights = [rng.normal(0, 0.5, size=(dims[i + 1], dims[i]))
               for i in range(len(dims) - 1)]
    biases = [rng.normal(0, 0.1, size=d) for d in dims[1:]]
    return weights, biases


class TestDispatch:
    def test_compiled_backend_is_available(self):
        names = kernels.available_backends()
        assert "python" in names
        assert "cython" in names, (
            "compiled kernels missing; build the extension in place")

    def test_active_name_reports_selection(self, restore_backend):
        kernels.use("python")
        assert kernels.active_name() == "python"
        kernels.use("cython")
        assert kernels.active_name() == "cython"

    def test_unknown_backend_rejected(self):
        from recall_forge.errors import ArgumentError
        with pytest.raises(ArgumentError):
            kernels.use("fortran")

    def test_env_override_selects_backend(self):
        env = dict(os.environ, RECALL_FORGE_BACKEND="python")
        out = subprocess.run(
            [sys.executable, "-c",
             "import recall_forge.kernels as k; print(k.active_name())"],
            env=env, capture_output=True, text=True)
        assert out.returncode == 0, out.stderr
        assert out.stdout.strip() == "python"

    def test_env_override_unknown_backend_fails_loudly(self):
        env = dict(os.environ, RECALL_FORGE_BACKEND="bogus")
        out = subprocess.run(
            [sys.executable, "-c", "import recall_forge.kernels"],
            env=env, capture_output=True, text=True)
        assert out.returncode != 0
        assert "bogus" in out.stderr


class TestAgainstNumPy:
    """Each kernel vs a direct NumPy expression on random inputs."""

    def test_matmuls(self, rng):
        a = rng.normal(size=(7, 5))
        b = rng.normal(size=(5, 9))
        c = rng.normal(size=(9, 5))
        d = rng.normal(size=(7, 9))
        np.testing.assert_allclose(kernels.matmul_nn(a, b), a @ b,
                                   rtol=1e-13, atol=1e-13)
        np.testing.assert_allclose(kernels.matmul_nt(a, c), a @ c.T,
                                   rtol=1e-13, atol=1e-13)
        np.testing.assert_allclose(kernels.matmul_tn(a, d), a.T @ d,
                                   rtol=1e-13, atol=1e-13)

    def test_tower_forward(self, rng):
        weights, biases = _random_tower(rng, [6, 8, 4])
        x = rng.normal(size=(5, 6))
        acts = kernels.tower_forward(x, weights, biases)
        hidden = np.tanh(x @ weights[0].T + biases[0])
        final = hidden @ weights[1].T + biases[1]
        assert len(acts) == 2
        np.testing.assert_allclose(acts[0], hidden, rtol=1e-13, atol=1e-14)
        np.testing.assert_allclose(acts[1], final, rtol=1e-13, atol=1e-14)

    def test_single_layer_tower_is_linear(self, rng):
        weights, biases = _random_tower(rng, [4, 3])
        x = rng.normal(size=(2, 4))
        acts = kernels.tower_forward(x, weights, biases)
        np.testing.assert_allclose(acts[0], x @ weights[0].T + biases[0],
                                   rtol=1e-13, atol=1e-14)

    def test_normalize_rows(self, rng):
        z = rng.normal(size=(6, 5))
        zhat, norms = kernels.normalize_rows(z)
        np.testing.assert_allclose(norms, np.linalg.norm(z, axis=1),
                                   rtol=1e-13)
        np.testing.assert_allclose(zhat, z / norms[:, None], rtol=1e-13)

    def test_normalize_rows_backward(self, rng):
        # d z = (d zhat - zhat (zhat . d zhat)) / norm, checked numerically.
        z = rng.normal(size=(3, 4))
        d_zhat = rng.normal(size=(3, 4))
        zhat, norms = kernels.normalize_rows(z)
        dz = kernels.normalize_rows_backward(zhat, norms, d_zhat)
        eps = 1e-6
        for i in range(3):
            for j in range(4):
                zp, zm = z.copy(), z.copy()
                zp[i, j] += eps
                zm[i, j] -= eps
                up = float((kernels.normalize_rows(zp)[0] * d_zhat).sum())
                dn = float((kernels.normalize_rows(zm)[0] * d_zhat).sum())
                assert dz[i, j] == pytest.approx((up - dn) / (2 * eps),
                                                 rel=1e-5, abs=1e-8)

    def test_tower_backward_matches_finite_difference(self, rng):
        weights, biases = _random_tower(rng, [5, 6, 3])
        x = rng.normal(size=(4, 5))
        d_out = rng.normal(size=(4, 3))

        def objective(ws, bs):
            return float((kernels.tower_forward(x, ws, bs)[-1] * d_out).sum())

        acts = kernels.tower_forward(x, weights, biases)
        d_ws, d_bs = kernels.tower_backward(x, weights, acts, d_out.copy())
        eps = 1e-6
        for li in range(2):
            for idx in np.ndindex(weights[li].shape):
                w2 = [w.copy() for w in weights]
                w2[li][idx] += eps
                up = objective(w2, biases)
                w2[li][idx] -= 2 * eps
                dn = objective(w2, biases)
                assert d_ws[li][idx] == pytest.approx((up - dn) / (2 * eps),
                                                      rel=1e-4, abs=1e-7)
            for idx in np.ndindex(biases[li].shape):
                b2 = [b.copy() for b in biases]
                b2[li][idx] += eps
                up = objective(weights, b2)
                b2[li][idx] -= 2 * eps
                dn = objective(weights, b2)
                assert d_bs[li][idx] == pytest.approx((up - dn) / (2 * eps),
                                                      rel=1e-4, abs=1e-7)


class TestParity:
    """Compiled and pure backends agree to float64 round-off."""

    def _both(self, op, *args):
        kernels.use("cython")
        fast = op(*args)
        kernels.use("python")
        slow = op(*args)
        return fast, slow

    def test_all_ops_agree(self, rng, restore_backend):
        a = rng.normal(size=(8, 6))
        b = rng.normal(size=(6, 7))
        c = rng.normal(size=(7, 6))
        weights, biases = _random_tower(rng, [6, 10, 4])
        x = rng.normal(size=(8, 6))
        d_out = rng.normal(size=(8, 4))

        fast, slow = self._both(kernels.matmul_nn, a, b)
        np.testing.assert_allclose(fast, slow, rtol=1e-12, atol=1e-14)

        fast, slow = self._both(kernels.matmul_nt, a, c)
        np.testing.assert_allclose(fast, slow, rtol=1e-12, atol=1e-14)

        fast, slow = self._both(kernels.matmul_tn, a, x)
        np.testing.assert_allclose(fast, slow, rtol=1e-12, atol=1e-14)

        fast, slow = self._both(kernels.tower_forward, x, weights, biases)
        for f, s in zip(fast, slow):
            np.testing.assert_allclose(f, s, rtol=1e-12, atol=1e-14)

        kernels.use("cython")
        acts = kernels.tower_forward(x, weights, biases)
        fw, fb = kernels.tower_backward(x, weights, acts, d_out.copy())
        kernels.use("python")
        sw, sb = kernels.tower_backward(x, weights, acts, d_out.copy())
        for f, s in zip(fw + fb, sw + sb):
            np.testing.assert_allclose(f, s, rtol=1e-12, atol=1e-14)

        z = rng.normal(size=(5, 4))
        fast, slow = self._both(kernels.normalize_rows, z)
        np.testing.assert_allclose(fast[0], slow[0], rtol=1e-12)
        np.testing.assert_allclose(fast[1], slow[1], rtol=1e-12)
