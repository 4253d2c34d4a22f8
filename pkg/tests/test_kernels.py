"""The JIT and numpy kernel flavors must agree bit-for-bit."""

import os
import subprocess
import sys

import numpy as np
import pytest

from hipmetrics import _kernels


def _random_focal(rng, n=200):
    p = rng.uniform(1e-6, 1 - 1e-6, size=n)
    y = (rng.random(n) < 0.1).astype(np.int64)
    return p, y


def test_focal_sum_flavors_agree():
    rng = np.random.default_rng(0)
    for gamma in (0.0, 1.0, 2.0):
        p, y = _random_focal(rng)
        a = _kernels.focal_terms_sum_numpy(p, y, gamma)
        b = _kernels._focal_terms_sum_loops(p, y, gamma)
        c = _kernels.focal_terms_sum(p, y, gamma)
        assert a == pytest.approx(b, rel=1e-12)
        assert c == pytest.approx(a, rel=1e-12)


def test_focal_grad_flavors_agree():
    rng = np.random.default_rng(1)
    for gamma in (0.0, 2.0):
        p, y = _random_focal(rng)
        a = _kernels.focal_terms_grad_numpy(p, y, gamma)
        b = _kernels._focal_terms_grad_loops(p, y, gamma)
        c = np.asarray(_kernels.focal_terms_grad(p, y, gamma))
        np.testing.assert_allclose(a, b, rtol=1e-12)
        np.testing.assert_allclose(c, a, rtol=1e-12)


def _random_grid_case(rng, n=500, n_candidates=40):
    class_idx = rng.integers(0, 3, size=(n, 3)).astype(np.int64)
    labels = (rng.random(n) < 0.4).astype(np.int64)
    tables = np.zeros((n_candidates, 3, 3), dtype=np.int64)
    tables[:, :, 1] = rng.integers(0, 3, size=(n_candidates, 3))
    tables[:, :, 2] = tables[:, :, 1] + rng.integers(1, 4, size=(n_candidates, 3))
    sum_ddh = tables[:, :, 2].sum(axis=1)
    return class_idx, labels, tables, sum_ddh, int(sum_ddh.max())


def test_scoring_grid_flavors_agree():
    rng = np.random.default_rng(2)
    class_idx, labels, tables, sum_ddh, max_total = _random_grid_case(rng)
    a = _kernels.scoring_grid_kappa_numpy(class_idx, labels, tables, sum_ddh, max_total)
    b = _kernels._scoring_grid_kappa_loops(class_idx, labels, tables, sum_ddh, max_total)
    c = _kernels.scoring_grid_kappa(class_idx, labels, tables, sum_ddh, max_total)
    np.testing.assert_array_equal(np.isnan(a), np.isnan(b))
    np.testing.assert_allclose(a[~np.isnan(a)], b[~np.isnan(b)], rtol=1e-13)
    np.testing.assert_allclose(c[~np.isnan(c)], a[~np.isnan(a)], rtol=1e-13)


@pytest.mark.skipif(
    not _kernels._HAVE_NUMBA or _kernels._flag_disables_numba(),
    reason="numba unavailable or disabled by flag",
)
def test_default_backend_is_numba():
    assert _kernels.BACKEND == "numba"


def test_env_flag_selects_numpy_backend():
    env = dict(os.environ, HIPMETRICS_NO_NUMBA="1")
    out = subprocess.run(
        [sys.executable, "-c", "from hipmetrics import _kernels; print(_kernels.BACKEND)"],
        env=env,
        capture_output=True,
        text=True,
        check=True,
    )
    assert out.stdout.strip() == "numpy"
