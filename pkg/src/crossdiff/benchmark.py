"""Benchmark the compiled stepping kernel against the numpy fallback.

    python -m crossdiff.benchmark [--n 512] [--steps 2000] [--seed 3]

Both backends consume identical random arrays and must produce bit-identical
trajectories; the report includes that check.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from .coefficients import ModelParams
from .particles import SimConfig, Simulation, init_iid
from .particles.backend import available_backends


def _run(kernel, n, steps, seed):
    p = ModelParams(1.0, 2.0, 1.0, n)
    rng = np.random.default_rng(seed)
    state = init_iid(lambda x: 0.5 + 0.2 * np.cos(2 * np.pi * x),
                     lambda x: 0.5 + 0.0 * x, n, rng)
    sim = Simulation(p, SimConfig(t_final=1.0), state, rng, kernel=kernel)
    t0 = time.perf_counter()
    for _ in range(steps):
        sim.step()
    elapsed = time.perf_counter() - t0
    return elapsed, state.x.copy(), sim.ledger.switch_count


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=512)
    ap.add_argument("--steps", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=3)
    args = ap.parse_args(argv)

    backends = available_backends()
    results = {}
    for name, mod in backends.items():
        elapsed, x, switches = _run(mod, args.n, args.steps, args.seed)
        results[name] = (elapsed, x, switches)
        print(f"{name:8s}: {1e6 * elapsed / args.steps:8.1f} us/step "
              f"({args.steps} steps, N={args.n}, {switches} switches)")
    if len(results) == 2:
        (ta, xa, _), (tb, xb, _) = results["numpy"], results["cython"]
        print(f"speedup : {ta / tb:.2f}x")
        print(f"bit-identical trajectories: {np.array_equal(xa, xb)}")
    else:
        print("compiled kernel not available; numpy fallback only")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
