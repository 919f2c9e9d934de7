"""The compiled and numpy kernels must be bit-compatible."""
import numpy as np
import pytest

from crossdiff.coefficients import ModelParams
from crossdiff.particles import SimConfig, Simulation, init_iid
from crossdiff.particles.backend import available_backends, get_backend

pytestmark = pytest.mark.skipif(
    "cython" not in available_backends(),
    reason="compiled kernel not built",
)

COSINE = lambda x: 0.5 + 0.2 * np.cos(2 * np.pi * np.asarray(x))
UNIFORM = lambda x: 0.5 + 0.0 * np.asarray(x)


def _run(kernel_name, n, steps, lam=1.0, seed=7):
    p = ModelParams(1.0, 2.0, lam, n)
    rng = np.random.default_rng(seed)
    st = init_iid(COSINE, UNIFORM, n, rng)
    sim = Simulation(p, SimConfig(t_final=1.0), st, rng,
                     kernel=get_backend(kernel_name))
    for _ in range(steps):
        sim.step()
    return sim


@pytest.mark.parametrize("n,steps", [(1, 500), (2, 2000), (7, 2000), (64, 1500),
                                     (129, 800)])
def test_bit_identical_trajectories(n, steps):
    a = _run("numpy", n, steps)
    b = _run("cython", n, steps)
    assert np.array_equal(a.state.x, b.state.x)
    assert np.array_equal(a.state.types, b.state.types)
    assert np.array_equal(a.state.ids, b.state.ids)
    assert np.array_equal(a.state.wind, b.state.wind)
    assert np.array_equal(a.ledger.per_particle, b.ledger.per_particle)
    assert np.array_equal(a.ledger.pair_accrual, b.ledger.pair_accrual)
    assert a.ledger.switch_count == b.ledger.switch_count
    assert a.ledger.total_pair_time == b.ledger.total_pair_time


def test_bit_identical_without_switching():
    a = _run("numpy", 33, 1500, lam=0.0)
    b = _run("cython", 33, 1500, lam=0.0)
    assert np.array_equal(a.state.x, b.state.x)
    assert np.array_equal(a.ledger.per_particle, b.ledger.per_particle)


def test_kernel_contract_direct():
    """Drive both kernels on identical raw inputs, including forced contacts."""
    rng = np.random.default_rng(3)
    n = 50
    for _ in range(50):
        x = np.sort(rng.random(n))
        for i in range(1, n):
            if x[i] <= x[i - 1]:
                x[i] = np.nextafter(x[i - 1], np.inf)
        delta = 0.02 * rng.standard_normal(n)  # large moves force corrections
        b = -2.0 * 0.002 * np.log(np.maximum(rng.random(n), 1e-300))
        f_left = rng.uniform(0.3, 0.7, n)
        f_right = 1.0 - f_left
        args = (delta, b, f_left, f_right)
        xa, ea = x.copy(), np.zeros(n)
        xb, eb = x.copy(), np.zeros(n)
        pa = get_backend("numpy").step_positions(xa, *args[:1], *args[1:], ea, 10_000)
        pb = get_backend("cython").step_positions(xb, *args[:1], *args[1:], eb, 10_000)
        assert pa == pb
        assert np.array_equal(xa, xb)
        assert np.array_equal(ea, eb)
        assert np.all(ea >= 0.0)
