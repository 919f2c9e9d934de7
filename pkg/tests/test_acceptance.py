"""Acceptance suite: one test per criterion, one printed verdict line each.

The statistical criteria run at fixed seeds; the heavy ones parallelize
replicas over CROSSDIFF_TEST_THREADS workers (default: up to 8 cores).
Measured runtimes are printed with each verdict.
"""
import json
import os
import time
from contextlib import contextmanager

import numpy as np
import pytest
from scipy import stats

from crossdiff.coefficients import (
    ModelParams,
    MSParams,
    consistent_k,
    diffusion_matrix,
    is_normally_elliptic,
    libm_from_ms,
    ms_density_scales,
    ms_from_libm,
    ms_ternary_matrix,
    two_color_matrix,
)
from crossdiff.harness.config import ExperimentConfig
from crossdiff.harness.runner import ReplicaTask, map_ordered, run_replica
from crossdiff.particles import ParticleState, SimConfig, Simulation, reflected_gap_step
from crossdiff.pde import (
    DensityField,
    Grid1D,
    SolverConfig,
    fourier_mode_amplitude,
    interface_flux,
    master_residual,
    ms_flux_inversion,
    ms_solve_trajectory,
    solve_trajectory,
    two_color_reference_solve,
    weighted_flux_identity_gap,
)

THREADS = int(os.environ.get("CROSSDIFF_TEST_THREADS",
                             min(8, os.cpu_count() or 1)))


@contextmanager
def verdict(number, title):
    t0 = time.perf_counter()
    try:
        yield
    except BaseException:
        print(f"ACCEPTANCE {number}: FAIL ({time.perf_counter()-t0:.1f}s) {title}",
              flush=True)
        raise
    print(f"ACCEPTANCE {number}: PASS ({time.perf_counter()-t0:.1f}s) {title}",
          flush=True)


def _state(xs, types):
    xs = np.asarray(xs, dtype=float)
    types = np.asarray(types, dtype=np.int64)
    return ParticleState(xs, types, np.arange(xs.size, dtype=np.int64),
                         np.zeros(xs.size, dtype=np.int64), types.copy(), 0.0)


def _base_config(n, replicas, t_final, epsilon=None, m=256, seed=20_250_808):
    return ExperimentConfig.from_dict({
        "model": {"sigma1_sq": 1.0, "sigma2_sq": 2.0, "lambda": 1.0, "N": n},
        "initial": {"rho1": "0.5 + 0.2*cos(2*pi*x)", "rho2": "0.5"},
        "particles": {"t_final": t_final, "replicas": replicas,
                      "epsilon": epsilon},
        "pde": {"M": m, "t_final": t_final},
        "outputs": {"snapshot_times": [0.0, t_final]},
        "seed": seed,
    })


# ---------------------------------------------------------------------------

def test_criterion_1_closed_form_matrix_suite():
    with verdict(1, "closed-form matrix suite"):
        t0 = time.perf_counter()
        p = ModelParams(1.0, 2.0, 1.0, 4)
        hand = diffusion_matrix((1.0, 1.0), p)
        assert np.max(np.abs(hand - [[0.8, 0.4], [0.4, 1.2]])) < 1e-12

        rho = np.linspace(0.0, 2.0, 20)
        r1, r2 = np.meshgrid(rho, rho, indexing="ij")
        keep = (r1 + r2) > 0
        for lam in (0.25, 0.5, 1.0, 2.0, 4.0):
            pl = ModelParams(1.0, 1.0, lam, 4)
            a = diffusion_matrix((r1[keep], r2[keep]), pl)
            b = two_color_matrix((r1[keep], r2[keep]), lam)
            assert np.max(np.abs(a - b)) < 1e-12

        rng = np.random.default_rng(101)
        n = 10_000
        d1, d2 = rng.exponential(1.0, n), rng.exponential(1.0, n)
        s1, s2, lam = 0.7, 2.3, 0.9
        assert is_normally_elliptic(diffusion_matrix((d1, d2), ModelParams(s1, s2, lam, 4)))
        ms = MSParams(2.9, 0.6, 1.4)
        u1 = rng.uniform(0, 1, n)
        u2 = rng.uniform(0, 1 - u1)
        assert is_normally_elliptic(ms_ternary_matrix(u1, u2, ms))
        assert time.perf_counter() - t0 < 1.0


def test_criterion_2_row_identity_and_master_residual():
    with verdict(2, "weighted-flux identity and master residual"):
        p = ModelParams(1.0, 2.0, 1.0, 1)
        grid = Grid1D(64)
        fld = DensityField(grid, 0.5 + 0.2 * np.cos(2 * np.pi * grid.x),
                           0.5 + 0.1 * np.sin(2 * np.pi * grid.x))
        cfg = SolverConfig(M=64, dt=2e-6, t_final=1.0)
        from crossdiff.pde import step_fields

        for _ in range(400):
            assert weighted_flux_identity_gap(fld, p) < 1e-13
            fld = step_fields(fld, cfg, p)

        vals = {}
        t_final = 1e-3
        for dt in (1e-6, 5e-7):
            g = Grid1D(256)
            f0 = DensityField(g, 0.5 + 0.1 * np.cos(2 * np.pi * g.x), np.full(256, 0.5))
            snaps = [i * dt for i in range(int(round(t_final / dt)) + 1)]
            traj = solve_trajectory(
                f0, SolverConfig(M=256, dt=dt, t_final=t_final, scheme="semi-implicit"),
                p, snaps)
            vals[dt] = master_residual(traj, p)
        assert vals[1e-6] <= 1e-6
        assert vals[5e-7] == pytest.approx(0.5 * vals[1e-6], rel=0.2)


def test_criterion_3_heat_equation_oracle():
    with verdict(3, "heat-equation oracle"):
        p = ModelParams(1.0, 1.0, 1.0, 1)
        grid = Grid1D(256)
        fld = DensityField(grid, 0.5 + 0.1 * np.cos(2 * np.pi * grid.x),
                           np.full(256, 0.5))
        traj = solve_trajectory(fld, SolverConfig(M=256, t_final=0.01), p, [0.01])
        amp = fourier_mode_amplitude(traj[-1].rho1 + traj[-1].rho2, 1)
        assert amp == pytest.approx(0.1 * np.exp(-2 * np.pi**2 * 0.01), abs=1e-3)


def test_criterion_4_two_color_cross_validation():
    with verdict(4, "two-color cross-validation"):
        p = ModelParams(1.0, 1.0, 1.0, 1)
        grid = Grid1D(256)
        fld = DensityField(grid, 0.4 + 0.15 * np.cos(2 * np.pi * grid.x),
                           0.6 + 0.1 * np.sin(2 * np.pi * grid.x))
        cross = solve_trajectory(fld, SolverConfig(M=256, t_final=0.05), p, [0.05])[-1]
        staged = two_color_reference_solve(
            fld, 1.0, SolverConfig(M=256, t_final=0.05), [0.05])[-1]
        assert np.max(np.abs(cross.rho1 - staged.rho1)) <= 1e-3
        assert np.max(np.abs(cross.rho2 - staged.rho2)) <= 1e-3


def test_criterion_5_maxwell_stefan_consistency():
    with verdict(5, "Maxwell-Stefan consistency and equivalence"):
        rng = np.random.default_rng(55)
        ms = MSParams(3.0, 1.0, 2.0)
        for _ in range(500):
            u1, u2 = rng.uniform(0.02, 0.45, 2)
            g1, g2 = rng.uniform(-1, 1, 2)
            j1, j2 = ms_flux_inversion(u1, u2, g1, g2, ms)
            a = ms_ternary_matrix(u1, u2, ms)
            assert abs(j1 + a[0, 0] * g1 + a[0, 1] * g2) < 1e-12
            assert abs(j2 + a[1, 0] * g1 + a[1, 1] * g2) < 1e-12

        for _ in range(200):
            s1, s2 = rng.uniform(0.3, 3.0, 2)
            lam = rng.uniform(0.2, 2.0)
            r1, r2 = rng.uniform(0.0, 2.0, 2)
            p = ModelParams(s1, s2, lam, 4)
            d12 = max(1 / s1, 1 / s2) * rng.uniform(1.1, 3.0)
            img = ms_from_libm(p, d12, r1, r2)
            back = libm_from_ms(img.ms, consistent_k(p), img.u1, img.u2)
            for got, want in zip(back, (s1, s2, lam, r1, r2)):
                assert got == pytest.approx(want, rel=1e-12, abs=1e-12)

        # PDE-level equivalence under the pinned convention (both systems
        # carry the 1/2; densities scale by k*(d12 - d_other))
        k = 1.0
        a1, a2 = ms_density_scales(ms, k)
        p = ModelParams(1.0 / ms.d13, 1.0 / ms.d23, k * ms.d13 * ms.d23, 1)
        grid = Grid1D(64)
        u0 = DensityField(grid, 0.2 + 0.05 * np.cos(2 * np.pi * grid.x),
                          0.3 + 0.05 * np.sin(2 * np.pi * grid.x))
        rho0 = DensityField(grid, a1 * u0.rho1, a2 * u0.rho2)
        rho = solve_trajectory(rho0, SolverConfig(M=64, dt=2e-6, t_final=0.01),
                               p, [0.01])[-1]
        u = ms_solve_trajectory(u0, SolverConfig(M=64, dt=2e-6, t_final=0.01),
                                ms, [0.01])[-1]
        assert np.max(np.abs(rho.rho1 - a1 * u.rho1)) < 1e-10
        assert np.max(np.abs(rho.rho2 - a2 * u.rho2)) < 1e-10


# ---------------------------------------------------------------------------

def _gap_sample_worker(args):
    seed, u0, t_run, dt = args
    p = ModelParams(1.0, 1.0, 0.0, 2)
    rng = np.random.default_rng(seed)
    st = _state([0.3, 0.3 + u0], [1, 2])
    sim = Simulation(p, SimConfig(dt=dt, t_final=t_run), st, rng)
    for _ in range(int(round(t_run / dt))):
        sim.step()
    return st.gaps()[0]


def _switch_count_worker(args):
    seed, t_run, dt = args
    p = ModelParams(1.0, 2.0, 1.5, 2)
    rng = np.random.default_rng(seed)
    st = _state([0.2, 0.7], [1, 2])
    sim = Simulation(p, SimConfig(dt=dt, t_final=t_run), st, rng)
    for _ in range(int(round(t_run / dt))):
        sim.step()
    rate = 1.5 * 1.0 * 2.0
    return sim.ledger.switch_count - rate * p.N * sim.ledger.total_pair_time


def test_criterion_6_reflected_pair_statistics():
    with verdict(6, "reflected-pair statistics at N=2"):
        # gap transition law, 10^4 paths through the full engine
        u0, t_run, dt = 0.05, 0.004, 4e-5
        args = [(30_000 + r, u0, t_run, dt) for r in range(10_000)]
        samples = np.array(map_ordered(_gap_sample_worker, args, THREADS))
        s = np.sqrt(2.0 * t_run)
        cdf = lambda z: stats.norm.cdf((z - u0) / s) + stats.norm.cdf((z + u0) / s) - 1.0
        pval = stats.kstest(samples, cdf).pvalue
        assert pval > 0.01, f"KS p-value {pval}"

        # mean regulator local time from contact at 10^6 replicas
        rng = np.random.default_rng(77)
        n = 1_000_000
        dt2, nu2 = 0.01, 2.0
        du = np.sqrt(nu2 * dt2) * rng.standard_normal(n)
        b = -2.0 * nu2 * dt2 * np.log(np.maximum(rng.random(n), 1e-300))
        _, ell = reflected_gap_step(0.0, du, b)
        closed = np.sqrt(nu2) * np.sqrt(2.0 * dt2 / np.pi)
        se = ell.std() / np.sqrt(n)
        assert abs(ell.mean() - closed) < 3.0 * se

        # switch counts against the realized local-time clocks
        args = [(60_000 + r, 0.4, 1e-3) for r in range(2000)]
        diffs = np.array(map_ordered(_switch_count_worker, args, THREADS))
        assert abs(diffs.mean()) < 3.0 * diffs.std() / np.sqrt(diffs.size)


def test_criterion_7_martingale_and_qv():
    with verdict(7, "martingale and quadratic-variation diagnostics"):
        n, reps, t_final = 256, 200, 0.005
        tasks = [
            ReplicaTask(
                sigma1_sq=1.0, sigma2_sq=2.0, lam=1.0, n_particles=n,
                rho1_expr="0.5", rho2_expr="0.5", dt=None, t_final=t_final,
                epsilon=0.05, snapshot_times=(t_final,), grid_m=64,
                seed=500_000 + r, diagnostics=True,
            )
            for r in range(reps)
        ]
        results = map_ordered(run_replica, tasks, THREADS)
        dz = np.array([r["dz"] for r in results])
        mean = dz.mean(axis=0)
        se = dz.std(axis=0, ddof=1) / np.sqrt(reps)
        frac_within = float(np.mean(np.abs(mean) <= 4.0 * se))
        ratio = np.array([r["qv_realized"] / r["qv_predicted"] for r in results]).mean(axis=0)
        frac_band = float(np.mean((ratio >= 0.9) & (ratio <= 1.1)))
        print(f"  martingale within 4se: {100*frac_within:.1f}%; "
              f"qv ratio in [0.9,1.1]: {100*frac_band:.1f}% "
              f"(mean ratio {ratio.mean():.3f})", flush=True)
        assert frac_within >= 0.95
        assert frac_band >= 0.90


def test_criterion_8_replacement_trend():
    with verdict(8, "replacement-estimate trend"):
        t_final = 0.02
        means = {}
        for (n, eps) in ((128, 0.05), (512, 0.01)):
            tasks = [
                ReplicaTask(
                    sigma1_sq=1.0, sigma2_sq=2.0, lam=1.0, n_particles=n,
                    rho1_expr="0.5 + 0.2*cos(2*pi*x)", rho2_expr="0.5",
                    dt=None, t_final=t_final, epsilon=eps,
                    snapshot_times=(t_final,), grid_m=64,
                    seed=700_000 + 97 * r + n, diagnostics=True,
                )
                for r in range(20)
            ]
            results = map_ordered(run_replica, tasks, THREADS)
            vals = [0.5 * (r["replacement"][(1, 2)] + r["replacement"][(2, 1)])
                    for r in results]
            means[(n, eps)] = float(np.mean(vals))
        print(f"  replacement: {means}", flush=True)
        assert means[(512, 0.01)] < means[(128, 0.05)]


def test_criterion_9_hydrodynamic_convergence(tmp_path):
    with verdict(9, "hydrodynamic convergence"):
        from crossdiff.harness.commands import cmd_compare

        t_final = 0.05
        cfg = _base_config(512, replicas=20, t_final=t_final)
        l1 = {}
        for n in (128, 256, 512):
            res = cmd_compare(cfg, str(tmp_path / f"N_{n}"), threads=THREADS,
                              n_override=n, write_fields=False)
            l1[n] = res["distances"][-1][:2]  # final-time (L1 rho1, L1 rho2)
        print(f"  L1 distances: { {k: tuple(round(x,4) for x in v) for k, v in l1.items()} }",
              flush=True)
        for species in (0, 1):
            assert l1[128][species] > l1[256][species] > l1[512][species]
            assert l1[512][species] <= 0.08


def test_criterion_10_determinism_across_thread_counts(tmp_path):
    with verdict(10, "byte-identical outputs across thread counts"):
        from crossdiff.harness.cli import main as cli_main

        raw = {
            "model": {"sigma1_sq": 1.0, "sigma2_sq": 2.0, "lambda": 1.0, "N": 48},
            "initial": {"rho1": "0.5 + 0.2*cos(2*pi*x)", "rho2": "0.5"},
            "particles": {"t_final": 0.002, "replicas": 4},
            "pde": {"M": 32},
            "outputs": {"snapshot_times": [0.0, 0.002], "plot": True},
            "seed": 97,
            "sweep": {"N": [24, 48]},
        }
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps(raw))

        per_command_files = {
            "simulate": ["sim_fields.csv", "sim_ledger.csv", "sim_fields.svg"],
            "solve": ["pde_fields.csv", "pde_fields.svg"],
            "compare": ["sim_fields.csv", "pde_fields.csv", "report.csv",
                        "compare.svg"],
            "diagnose": ["diag_martingale.csv", "diag_qv.csv",
                         "diag_replacement.csv"],
            "sweep": ["sweep_report.csv", "sweep.svg"],
        }
        for command, files in per_command_files.items():
            outputs = {}
            for threads in (1, 8):
                out = tmp_path / f"{command}_{threads}"
                assert cli_main([command, "--config", str(cfg_path),
                                 "--out-dir", str(out), "--threads", str(threads)]) == 0
                blobs = {name: (out / name).read_bytes() for name in files}
                manifest = json.loads((out / "manifest.json").read_text())
                manifest["timings_ms"] = None  # wall clock only
                blobs["manifest"] = json.dumps(manifest, sort_keys=True)
                outputs[threads] = blobs
            assert outputs[1] == outputs[8], f"{command} differs across thread counts"
