"""Cross-checks between the compiled kernels and the numpy fallback.

Skipped entirely when the compiled extension is not built; the rest of the
suite exercises whichever backend the package imported.
"""

import importlib
import os

import numpy as np
import pytest

from scopeq import _kernels
from scopeq._kernels import pyfallback

_core = pytest.importorskip("scopeq._kernels._core")


def test_backend_string_matches_environment():
    requested = os.environ.get("SCOPEQ_BACKEND", "auto").lower() or "auto"
    if requested == "python":
        assert _kernels.BACKEND == "python"
    else:
        # _core imported above, so auto must have picked the extension.
        assert _kernels.BACKEND == "compiled"


def test_compiled_module_is_importable_by_name():
    mod = importlib.import_module("scopeq._kernels._core")
    for name in ("soft_assign_batch", "lloyd_iteration", "nt_xent_loss_grad"):
        assert callable(getattr(mod, name))


def _cases(seed=0):
    rng = np.random.default_rng(seed)
    for n, k, d in [(3, 2, 2), (40, 5, 8), (500, 10, 16), (211, 7, 3)]:
        points = np.ascontiguousarray(rng.normal(size=(n, d)) * rng.uniform(0.5, 3))
        centers = np.ascontiguousarray(rng.normal(size=(k, d)))
        yield points, centers


def test_soft_assign_agrees():
    for points, centers in _cases(1):
        for alpha in (1.0, 16.0, 256.0):
            a = _core.soft_assign_batch(points, centers, alpha, 1e-12)
            b = pyfallback.soft_assign_batch(points, centers, alpha, 1e-12)
            np.testing.assert_allclose(a, b, rtol=0, atol=1e-13)


def test_lloyd_iteration_agrees():
    for points, centers in _cases(2):
        la, sa, ca, ia = _core.lloyd_iteration(points, centers)
        lb, sb, cb, ib = pyfallback.lloyd_iteration(points, centers)
        np.testing.assert_array_equal(la, lb)
        np.testing.assert_array_equal(ca, cb)
        np.testing.assert_allclose(sa, sb, rtol=0, atol=1e-10)
        assert ia == pytest.approx(ib, rel=1e-12)


def test_lloyd_empty_cluster_rows_agree():
    rng = np.random.default_rng(3)
    points = np.ascontiguousarray(rng.normal(size=(20, 2)))
    # Last center is unreachable, so its row must come back zero in both.
    centers = np.vstack([rng.normal(size=(3, 2)), [[1e6, 1e6]]])
    la, sa, ca, _ = _core.lloyd_iteration(points, centers)
    lb, sb, cb, _ = pyfallback.lloyd_iteration(points, centers)
    assert ca[3] == cb[3] == 0
    np.testing.assert_array_equal(sa[3], np.zeros(2))
    np.testing.assert_array_equal(sb[3], np.zeros(2))
    np.testing.assert_array_equal(la, lb)


def test_contrastive_loss_and_grads_agree():
    rng = np.random.default_rng(4)
    for n, d in [(2, 3), (8, 5), (32, 16)]:
        z1 = np.ascontiguousarray(rng.normal(size=(n, d)))
        z2 = np.ascontiguousarray(rng.normal(size=(n, d)))
        for tau in (0.1, 0.5, 2.0):
            la, g1a, g2a = _core.nt_xent_loss_grad(z1, z2, tau)
            lb, g1b, g2b = pyfallback.nt_xent_loss_grad(z1, z2, tau)
            assert la == pytest.approx(lb, rel=1e-13, abs=1e-13)
            np.testing.assert_allclose(g1a, g1b, rtol=1e-10, atol=1e-13)
            np.testing.assert_allclose(g2a, g2b, rtol=1e-10, atol=1e-13)


def test_contrastive_extreme_temperature_stays_finite_in_both():
    rng = np.random.default_rng(5)
    z1 = np.ascontiguousarray(rng.normal(size=(6, 4)))
    z2 = np.ascontiguousarray(rng.normal(size=(6, 4)))
    for impl in (_core, pyfallback):
        loss, g1, g2 = impl.nt_xent_loss_grad(z1, z2, 1e-3)
        assert np.isfinite(loss)
        assert np.all(np.isfinite(g1)) and np.all(np.isfinite(g2))
