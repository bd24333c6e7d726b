"""The compiled and pure-Python kernels must agree draw for draw."""
import numpy as np
import pytest

from pgdglm import _backend

pytestmark = pytest.mark.skipif("cython" not in _backend.available(), reason="extension not built")


@pytest.fixture(scope="module")
def both():
    return _backend.load("python"), _backend.load("cython")


class TestKernels:
    @pytest.mark.parametrize("b", [1.0, 3.0, 3.5, 60.0])
    def test_pg_draws_identical(self, both, b):
        py, cy = both
        psi = np.linspace(-8, 8, 200)
        bs = np.full(200, b)
        outs = []
        for k in both:
            out = np.zeros(200)
            k.pg_draw_many(bs, psi, np.random.default_rng(7), out, None, 50, 200)
            outs.append(out)
        np.testing.assert_allclose(outs[0], outs[1], rtol=1e-12)

    def test_filter_identical(self, both):
        rng = np.random.default_rng(0)
        t_len, p = 12, 3
        args = (rng.normal(size=t_len), rng.uniform(0.5, 2, t_len), rng.normal(size=(t_len, p)),
                np.array([True] * 5 + [False] * 2 + [True] * 5),
                rng.normal(size=p), np.diag([0.9, 0.5, -0.3]) + 0.05, 0.1 * np.eye(p),
                np.zeros(p), np.eye(p))
        res = [k.ffbs_filter(*args) for k in both]
        for a, b in zip(res[0][:4], res[1][:4]):
            np.testing.assert_allclose(np.asarray(a), np.asarray(b), rtol=1e-10, atol=1e-12)
        assert res[0][4] == pytest.approx(res[1][4], rel=1e-10)

    @pytest.mark.parametrize("diag", [True, False])
    def test_ffbs_draw_identical(self, both, diag):
        rng = np.random.default_rng(1)
        t_len, p = 15, 2
        phi = np.diag([0.95, 0.9]) if diag else np.array([[0.9, 0.05], [0.02, 0.8]])
        args = (rng.normal(size=t_len), rng.uniform(0.5, 2, t_len), rng.normal(size=(t_len, p)),
                np.ones(t_len, dtype=bool), np.zeros(p), phi, 0.01 * np.eye(p), np.zeros(p),
                np.eye(p))
        a = np.asarray(both[0].ffbs_draw(*args, np.random.default_rng(3)))
        b = np.asarray(both[1].ffbs_draw(*args, np.random.default_rng(3)))
        np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-12)

    def test_env_override(self, monkeypatch):
        monkeypatch.setenv("PGDGLM_BACKEND", "python")
        assert _backend.load().name == "python"
        monkeypatch.setenv("PGDGLM_BACKEND", "bogus")
        with pytest.raises(ValueError):
            _backend.load()
