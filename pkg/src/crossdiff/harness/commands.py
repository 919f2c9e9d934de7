"""The five experiment commands.

Every command is a deterministic function of (config, master seed): replica
seeds are derived by the documented splitting rule, replica results are
reduced in replica order, bootstrap resampling uses its own derived seed,
and all files are written by the calling process.
"""
from __future__ import annotations

import os
import time

import numpy as np

from .. import __version__
from ..coefficients import ms_from_libm
from ..pde import DensityField, Grid1D, SolverConfig, solve_trajectory
from .config import ExperimentConfig
from .manifest import build_manifest, derive_replica_seeds, splitmix64, write_manifest
from .output import field_rows, fmt, svg_line_chart, write_csv
from .runner import ReplicaTask, map_ordered, run_replica

__all__ = ["cmd_simulate", "cmd_solve", "cmd_compare", "cmd_diagnose", "cmd_sweep"]

FIELD_HEADER = "t,x,rho1_mean,rho1_se,rho2_mean,rho2_se"
REPORT_HEADER = "t,N,epsilon,l1_rho1,l1_rho2,l2_rho1,l2_rho2,l1_ci_lo,l1_ci_hi"
LEDGER_HEADER = "t,pair_local_time,switch_count,mean_A1,mean_A2"
BOOTSTRAP_RESAMPLES = 1000


class _Timer:
    def __init__(self):
        self.t0 = time.perf_counter()
        self.marks = {}

    def mark(self, name):
        self.marks[name] = int(1000 * (time.perf_counter() - self.t0))

    def done(self):
        self.marks["total"] = int(1000 * (time.perf_counter() - self.t0))
        return self.marks


def _ensure_outdir(out_dir):
    os.makedirs(out_dir, exist_ok=True)
    return out_dir


def _tasks(cfg: ExperimentConfig, master_seed: int, n_override=None,
           diagnostics=False) -> list:
    replicas = int(cfg.particles["replicas"])
    seeds = derive_replica_seeds(master_seed, replicas)
    n = int(n_override if n_override is not None else cfg.model["N"])
    return [
        ReplicaTask(
            sigma1_sq=float(cfg.model["sigma1_sq"]),
            sigma2_sq=float(cfg.model["sigma2_sq"]),
            lam=float(cfg.model["lambda"]),
            n_particles=n,
            rho1_expr=cfg.initial["rho1"],
            rho2_expr=cfg.initial["rho2"],
            dt=cfg.particles["dt"],
            t_final=cfg.t_final(),
            epsilon=cfg.epsilon(n_override=n),
            snapshot_times=tuple(cfg.snapshot_times()),
            grid_m=int(cfg.pde["M"]),
            seed=s,
            local_time_scheme=cfg.particles["local_time_scheme"],
            switch_same_type=bool(cfg.particles["switch_same_type"]),
            diagnostics=diagnostics,
        )
        for s in seeds
    ], seeds


def _ensemble_fields(results) -> np.ndarray:
    """Stack (replica, snapshot, species, M) and reduce to mean and se."""
    stack = np.array([r["fields"] for r in results])
    mean = stack.mean(axis=0)
    if stack.shape[0] > 1:
        se = stack.std(axis=0, ddof=1) / np.sqrt(stack.shape[0])
    else:
        se = np.zeros_like(mean)
    return stack, mean, se


def _write_sim_outputs(cfg, out_dir, times, grid_x, mean, se, results, plot):
    blocks = [np.stack([mean[s, 0], se[s, 0], mean[s, 1], se[s, 1]])
              for s in range(len(times))]
    write_csv(os.path.join(out_dir, "sim_fields.csv"), FIELD_HEADER,
              field_rows(times, grid_x, blocks))
    ledger = np.mean(np.array([r["ledger"] for r in results]), axis=0)
    rows = [(fmt(t), fmt(row[0]), fmt(row[1]), fmt(row[2]), fmt(row[3]))
            for t, row in zip(times, ledger)]
    write_csv(os.path.join(out_dir, "sim_ledger.csv"), LEDGER_HEADER, rows)
    if plot:
        series = {f"rho1 t={t:g}": mean[s, 0] for s, t in enumerate(times)}
        series.update({f"rho2 t={t:g}": mean[s, 1] for s, t in enumerate(times)})
        svg_line_chart(os.path.join(out_dir, "sim_fields.svg"), grid_x, series,
                       "ensemble mean smoothed densities", "x", "density")


def cmd_simulate(cfg: ExperimentConfig, out_dir, master_seed=None, threads=1,
                 plot=None) -> dict:
    """Run the particle ensemble; write smoothed fields and ledger summary."""
    timer = _Timer()
    cfg.require_unit_mass()
    out_dir = _ensure_outdir(out_dir)
    master_seed = cfg.seed if master_seed is None else master_seed
    plot = cfg.outputs["plot"] if plot is None else plot
    tasks, seeds = _tasks(cfg, master_seed)
    results = map_ordered(run_replica, tasks, threads)
    timer.mark("simulate")
    times = cfg.snapshot_times()
    grid_x = Grid1D(int(cfg.pde["M"])).x
    _, mean, se = _ensemble_fields(results)
    _write_sim_outputs(cfg, out_dir, times, grid_x, mean, se, results, plot)
    manifest = build_manifest(cfg.canonical_json(), master_seed, seeds,
                              __version__, timer.done())
    write_manifest(os.path.join(out_dir, "manifest.json"), manifest)
    return {"mean": mean, "se": se, "results": results, "manifest": manifest}


def _solve_pde(cfg: ExperimentConfig) -> list:
    grid = Grid1D(int(cfg.pde["M"]))
    f1, f2 = cfg.profiles()
    fld0 = DensityField(grid, np.asarray(f1(grid.x), float),
                        np.asarray(f2(grid.x), float))
    solver_cfg = SolverConfig(
        M=grid.M, dt=cfg.pde["dt"], scheme=cfg.pde["scheme"],
        t_final=cfg.t_final(), stability_safety=float(cfg.pde["stability_safety"]),
    )
    return solve_trajectory(fld0, solver_cfg, cfg.model_params(), cfg.snapshot_times())


def cmd_solve(cfg: ExperimentConfig, out_dir, master_seed=None, threads=1,
              plot=None) -> dict:
    """Solve the limiting system; optionally emit the Maxwell-Stefan image."""
    timer = _Timer()
    out_dir = _ensure_outdir(out_dir)
    master_seed = cfg.seed if master_seed is None else master_seed
    plot = cfg.outputs["plot"] if plot is None else plot
    traj = _solve_pde(cfg)
    timer.mark("solve")
    times = cfg.snapshot_times()
    grid_x = traj[0].grid.x
    zeros = np.zeros_like(grid_x)
    blocks = [np.stack([f.rho1, zeros, f.rho2, zeros]) for f in traj]
    write_csv(os.path.join(out_dir, "pde_fields.csv"), FIELD_HEADER,
              field_rows(times, grid_x, blocks))
    if cfg.ms_form:
        p = cfg.model_params()
        d12 = cfg.ms_d12 if cfg.ms_d12 is not None else \
            2.0 * max(1.0 / p.sigma1_sq, 1.0 / p.sigma2_sq)
        rows = []
        for t, f in zip(times, traj):
            image = ms_from_libm(p, d12, f.rho1, f.rho2)
            for j in range(grid_x.size):
                rows.append((fmt(t), fmt(grid_x[j]), fmt(image.u1[j]), fmt(image.u2[j])))
        write_csv(os.path.join(out_dir, "ms_fields.csv"), "t,x,u1,u2", rows)
    if plot:
        series = {f"rho1 t={t:g}": f.rho1 for t, f in zip(times, traj)}
        series.update({f"rho2 t={t:g}": f.rho2 for t, f in zip(times, traj)})
        svg_line_chart(os.path.join(out_dir, "pde_fields.svg"), grid_x, series,
                       "limit system solution", "x", "density")
    manifest = build_manifest(cfg.canonical_json(), master_seed, [],
                              __version__, timer.done())
    write_manifest(os.path.join(out_dir, "manifest.json"), manifest)
    return {"trajectory": traj, "manifest": manifest}


def _distances(mean_fields, traj, dx):
    """Per-snapshot per-species L1 and L2 grid distances."""
    out = []
    for s, f in enumerate(traj):
        d1 = mean_fields[s, 0] - f.rho1
        d2 = mean_fields[s, 1] - f.rho2
        out.append((
            float(dx * np.sum(np.abs(d1))), float(dx * np.sum(np.abs(d2))),
            float(np.sqrt(dx * np.sum(d1 ** 2))), float(np.sqrt(dx * np.sum(d2 ** 2))),
        ))
    return out


def _bootstrap_ci(stack, traj, dx, master_seed):
    """95% bootstrap interval of the species-mean L1 distance per snapshot."""
    rng = np.random.default_rng(splitmix64(master_seed ^ 0xB005))
    n_rep = stack.shape[0]
    cis = []
    pde = np.array([[f.rho1, f.rho2] for f in traj])
    for s in range(stack.shape[1]):
        vals = np.empty(BOOTSTRAP_RESAMPLES)
        for b in range(BOOTSTRAP_RESAMPLES):
            idx = rng.integers(0, n_rep, n_rep)
            mean = stack[idx, s].mean(axis=0)
            l1 = dx * np.sum(np.abs(mean - pde[s]), axis=1)
            vals[b] = 0.5 * (l1[0] + l1[1])
        cis.append((float(np.quantile(vals, 0.025)), float(np.quantile(vals, 0.975))))
    return cis


def cmd_compare(cfg: ExperimentConfig, out_dir, master_seed=None, threads=1,
                plot=None, n_override=None, write_fields=True) -> dict:
    """Distances between ensemble-mean smoothed densities and the PDE."""
    timer = _Timer()
    cfg.require_unit_mass()
    out_dir = _ensure_outdir(out_dir)
    master_seed = cfg.seed if master_seed is None else master_seed
    plot = cfg.outputs["plot"] if plot is None else plot
    n = int(n_override if n_override is not None else cfg.model["N"])
    eps = cfg.epsilon(n_override=n)

    tasks, seeds = _tasks(cfg, master_seed, n_override=n)
    results = map_ordered(run_replica, tasks, threads)
    timer.mark("simulate")
    traj = _solve_pde(cfg)
    timer.mark("solve")

    times = cfg.snapshot_times()
    grid = traj[0].grid
    stack, mean, se = _ensemble_fields(results)
    dist = _distances(mean, traj, grid.dx)
    cis = _bootstrap_ci(stack, traj, grid.dx, master_seed)
    timer.mark("bootstrap")

    rows = []
    summary = []
    for s, t in enumerate(times):
        l1a, l1b, l2a, l2b = dist[s]
        lo, hi = cis[s]
        rows.append((fmt(t), str(n), fmt(eps), fmt(l1a), fmt(l1b),
                     fmt(l2a), fmt(l2b), fmt(lo), fmt(hi)))
        summary.append(
            f"t={t:g} N={n} eps={eps:.4g} L1(rho1)={l1a:.5f} L1(rho2)={l1b:.5f} "
            f"L2(rho1)={l2a:.5f} L2(rho2)={l2b:.5f} CI95=[{lo:.5f},{hi:.5f}]"
        )
    if write_fields:
        blocks = [np.stack([mean[s, 0], se[s, 0], mean[s, 1], se[s, 1]])
                  for s in range(len(times))]
        write_csv(os.path.join(out_dir, "sim_fields.csv"), FIELD_HEADER,
                  field_rows(times, grid.x, blocks))
        zeros = np.zeros_like(grid.x)
        pblocks = [np.stack([f.rho1, zeros, f.rho2, zeros]) for f in traj]
        write_csv(os.path.join(out_dir, "pde_fields.csv"), FIELD_HEADER,
                  field_rows(times, grid.x, pblocks))
    write_csv(os.path.join(out_dir, "report.csv"), REPORT_HEADER, rows)
    if plot:
        s_last = len(times) - 1
        svg_line_chart(
            os.path.join(out_dir, "compare.svg"), grid.x,
            {"particles rho1": mean[s_last, 0], "pde rho1": traj[s_last].rho1,
             "particles rho2": mean[s_last, 1], "pde rho2": traj[s_last].rho2},
            f"final-time comparison (t={times[s_last]:g})", "x", "density")
    manifest = build_manifest(cfg.canonical_json(), master_seed, seeds,
                              __version__, timer.done())
    write_manifest(os.path.join(out_dir, "manifest.json"), manifest)
    for line in summary:
        print(line)
    return {"distances": dist, "cis": cis, "times": times, "manifest": manifest,
            "mean": mean, "trajectory": traj}


def cmd_diagnose(cfg: ExperimentConfig, out_dir, master_seed=None, threads=1,
                 plot=None) -> dict:
    """Martingale, quadratic-variation and replacement diagnostics."""
    timer = _Timer()
    cfg.require_unit_mass()
    out_dir = _ensure_outdir(out_dir)
    master_seed = cfg.seed if master_seed is None else master_seed
    tasks, seeds = _tasks(cfg, master_seed, diagnostics=True)
    results = map_ordered(run_replica, tasks, threads)
    timer.mark("simulate")

    n = int(cfg.model["N"])
    eps = cfg.epsilon()
    dz = np.array([r["dz"] for r in results])          # (R, N)
    mean_dz = dz.mean(axis=0)
    se_dz = dz.std(axis=0, ddof=1) / np.sqrt(dz.shape[0]) if dz.shape[0] > 1 \
        else np.full(n, np.nan)
    within = np.abs(mean_dz) <= 4.0 * se_dz
    id_type = results[0]["id_type"]
    rows = [(str(k), str(int(id_type[k])), fmt(mean_dz[k]), fmt(se_dz[k]),
             str(int(within[k]))) for k in range(n)]
    write_csv(os.path.join(out_dir, "diag_martingale.csv"),
              "k,type,mean_dz,se_dz,within_4se", rows)

    qv_ratio = np.array([r["qv_realized"] / r["qv_predicted"] for r in results])
    ratio = qv_ratio.mean(axis=0)
    rows = [(str(k), str(int(id_type[k])), fmt(ratio[k]),
             str(int(0.9 <= ratio[k] <= 1.1))) for k in range(n)]
    write_csv(os.path.join(out_dir, "diag_qv.csv"),
              "k,type,qv_ratio,in_band", rows)

    repl = {}
    for c1 in (1, 2):
        for c2 in (1, 2):
            repl[(c1, c2)] = float(np.mean([r["replacement"][(c1, c2)]
                                            for r in results]))
    rows = [(str(n), fmt(eps), str(c1), str(c2), fmt(v))
            for (c1, c2), v in sorted(repl.items())]
    write_csv(os.path.join(out_dir, "diag_replacement.csv"),
              "N,epsilon,c1,c2,statistic", rows)

    frac_within = float(np.mean(within)) if dz.shape[0] > 1 else float("nan")
    frac_band = float(np.mean((ratio >= 0.9) & (ratio <= 1.1)))
    print(f"martingale: {100 * frac_within:.1f}% of particles within 4 se of 0")
    print(f"qv: {100 * frac_band:.1f}% of particles with ratio in [0.9, 1.1]")
    for (c1, c2), v in sorted(repl.items()):
        print(f"replacement N={n} eps={eps:.4g} ({c1}->{c2}): {v:.6f}")
    manifest = build_manifest(cfg.canonical_json(), master_seed, seeds,
                              __version__, timer.done())
    write_manifest(os.path.join(out_dir, "manifest.json"), manifest)
    return {"frac_within": frac_within, "frac_band": frac_band,
            "replacement": repl, "qv_ratio": ratio, "mean_dz": mean_dz,
            "se_dz": se_dz, "manifest": manifest}


def cmd_sweep(cfg: ExperimentConfig, out_dir, master_seed=None, threads=1,
              plot=None) -> dict:
    """Convergence study over the configured particle counts."""
    timer = _Timer()
    cfg.require_unit_mass()
    out_dir = _ensure_outdir(out_dir)
    master_seed = cfg.seed if master_seed is None else master_seed
    plot = cfg.outputs["plot"] if plot is None else plot
    n_values = cfg.sweep_n or [int(cfg.model["N"])]
    rows = []
    final_l1 = []
    for n in n_values:
        sub = cmd_compare(cfg, os.path.join(out_dir, f"N_{n}"),
                          master_seed=master_seed, threads=threads, plot=False,
                          n_override=n, write_fields=False)
        eps = cfg.epsilon(n_override=n)
        for s, t in enumerate(sub["times"]):
            l1a, l1b, l2a, l2b = sub["distances"][s]
            lo, hi = sub["cis"][s]
            rows.append((fmt(t), str(n), fmt(eps), fmt(l1a), fmt(l1b),
                         fmt(l2a), fmt(l2b), fmt(lo), fmt(hi)))
        l1a, l1b, _, _ = sub["distances"][-1]
        final_l1.append(0.5 * (l1a + l1b))
    write_csv(os.path.join(out_dir, "sweep_report.csv"), REPORT_HEADER, rows)
    if plot:
        svg_line_chart(os.path.join(out_dir, "sweep.svg"),
                       np.array(n_values, float),
                       {"mean L1 at final time": np.array(final_l1)},
                       "convergence of the particle ensemble", "log10 N",
                       "log10 L1 distance", log_log=True)
    manifest = build_manifest(cfg.canonical_json(), master_seed,
                              derive_replica_seeds(master_seed,
                                                   int(cfg.particles["replicas"])),
                              __version__, timer.done())
    write_manifest(os.path.join(out_dir, "manifest.json"), manifest)
    for n, l1 in zip(n_values, final_l1):
        print(f"N={n}: mean final-time L1 = {l1:.5f}")
    return {"n_values": n_values, "final_l1": final_l1, "manifest": manifest}
