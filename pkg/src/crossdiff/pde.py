"""Finite-volume solvers for the cross-diffusion limit system on the circle.

The update is conservative: cell values change by flux differences across
their interfaces, so the discrete mass of each species telescopes exactly.
Interface states are arithmetic means of the adjacent cells and the
diffusion matrix is evaluated once per interface at that state; this keeps
the weighted-flux identity

    F1/s1 + F2/s2 == (1/2) * d(rho1 + rho2)/dx

exact at every interface (a consequence of the matrix rows summing to the
denominator), which in turn makes the total weighted density follow the
discrete heat equation to machine precision.

Two time schemes are provided: explicit Heun (``explicit-rk2``) with a
dx^2 step restriction, and a semi-implicit backward Euler that lags the
diffusion matrix at the previous level and solves a periodic block
system (``semi-implicit``).

Positivity is *not* enforced by clipping; normally elliptic systems need
not satisfy a maximum principle and silent clipping would mask scheme
defects.  A blow-up detector aborts when values leave [-1e6, 1e6].
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.sparse
import scipy.sparse.linalg

from .coefficients import (
    DegenerateDenominatorError,
    ModelParams,
    MSParams,
    diffusion_matrix_entries,
    ms_ternary_matrix_entries,
    self_diffusion,
)

__all__ = [
    "Grid1D",
    "DensityField",
    "SolverConfig",
    "SolverBlowupError",
    "interface_flux",
    "weighted_flux_identity_gap",
    "stable_dt",
    "step_fields",
    "solve_trajectory",
    "two_color_reference_solve",
    "ms_flux_inversion",
    "ms_interface_flux",
    "ms_solve_trajectory",
    "master_residual",
    "fourier_mode_amplitude",
]

BLOWUP_LIMIT = 1.0e6


class SolverBlowupError(RuntimeError):
    def __init__(self, time: float, message: str = ""):
        super().__init__(f"solution blew up at t={time:g} {message}".rstrip())
        self.time = time


@dataclass(frozen=True)
class Grid1D:
    """M equal cells on the unit circle; cell m is centred at m/M."""

    M: int

    def __post_init__(self):
        if self.M < 8:
            raise ValueError("need at least 8 cells")

    @property
    def dx(self) -> float:
        return 1.0 / self.M

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.M) / self.M


@dataclass
class DensityField:
    """Per-cell values of the two species at a given time."""

    grid: Grid1D
    rho1: np.ndarray
    rho2: np.ndarray
    time: float = 0.0

    def copy(self) -> "DensityField":
        return DensityField(self.grid, self.rho1.copy(), self.rho2.copy(), self.time)

    def mass(self) -> tuple:
        return (self.grid.dx * self.rho1.sum(), self.grid.dx * self.rho2.sum())


@dataclass
class SolverConfig:
    M: int = 256
    dt: float | None = None
    scheme: str = "explicit-rk2"
    t_final: float = 0.05
    stability_safety: float = 0.5

    def __post_init__(self):
        if self.scheme not in ("explicit-rk2", "semi-implicit"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if not 0 < self.stability_safety <= 1:
            raise ValueError("stability_safety must be in (0, 1]")


def _mean_and_jump(v: np.ndarray):
    """Interface mean and difference; interface k sits between cells k, k+1."""
    right = np.roll(v, -1)
    return 0.5 * (v + right), right - v


def interface_flux(fld: DensityField, p: ModelParams):
    """Diffusive fluxes (F1, F2) at the M interfaces.

    F = (1/2) D(mean state) (central difference)/dx, species-stacked.
    """
    dx = fld.grid.dx
    m1, j1 = _mean_and_jump(fld.rho1)
    m2, j2 = _mean_and_jump(fld.rho2)
    d11, d12, d21, d22 = diffusion_matrix_entries(m1, m2, p)
    g1, g2 = j1 / dx, j2 / dx
    return 0.5 * (d11 * g1 + d12 * g2), 0.5 * (d21 * g1 + d22 * g2)


def weighted_flux_identity_gap(fld: DensityField, p: ModelParams) -> float:
    """Max deviation of F1/s1 + F2/s2 from half the total-density gradient."""
    f1, f2 = interface_flux(fld, p)
    _, j1 = _mean_and_jump(fld.rho1)
    _, j2 = _mean_and_jump(fld.rho2)
    target = 0.5 * (j1 + j2) / fld.grid.dx
    return float(np.max(np.abs(f1 / p.sigma1_sq + f2 / p.sigma2_sq - target)))


def _spectral_radius(d11, d12, d21, d22) -> float:
    tr = d11 + d22
    disc = np.sqrt(np.maximum(tr * tr - 4.0 * (d11 * d22 - d12 * d21), 0.0))
    return float(np.max(0.5 * (tr + disc)))


def stable_dt(fld: DensityField, p: ModelParams, safety: float = 0.5) -> float:
    """Explicit step bound safety * dx^2 / (2 * max spectral radius of D)."""
    m1, _ = _mean_and_jump(fld.rho1)
    m2, _ = _mean_and_jump(fld.rho2)
    rad = _spectral_radius(*diffusion_matrix_entries(m1, m2, p))
    return safety * fld.grid.dx**2 / (2.0 * rad)


def _check_values(fld: DensityField):
    for v in (fld.rho1, fld.rho2):
        if not np.all(np.isfinite(v)) or np.any(np.abs(v) > BLOWUP_LIMIT):
            raise SolverBlowupError(fld.time)


def _rhs_from_flux(flux: Callable, r1, r2, dx):
    f1, f2 = flux(r1, r2)
    return (f1 - np.roll(f1, 1)) / dx, (f2 - np.roll(f2, 1)) / dx


def _libm_flux(p: ModelParams, dx: float):
    def flux(r1, r2):
        m1, j1 = _mean_and_jump(r1)
        m2, j2 = _mean_and_jump(r2)
        d11, d12, d21, d22 = diffusion_matrix_entries(m1, m2, p)
        g1, g2 = j1 / dx, j2 / dx
        return 0.5 * (d11 * g1 + d12 * g2), 0.5 * (d21 * g1 + d22 * g2)

    return flux


def _heun_step(r1, r2, dt, dx, flux):
    k1a, k1b = _rhs_from_flux(flux, r1, r2, dx)
    s1 = r1 + dt * k1a
    s2 = r2 + dt * k1b
    k2a, k2b = _rhs_from_flux(flux, s1, s2, dx)
    return r1 + 0.5 * dt * (k1a + k2a), r2 + 0.5 * dt * (k1b + k2b)


def _semi_implicit_step(r1, r2, dt, dx, p: ModelParams):
    """Backward Euler with the diffusion matrix lagged at the old level."""
    M = r1.size
    m1, _ = _mean_and_jump(r1)
    m2, _ = _mean_and_jump(r2)
    dmat = diffusion_matrix_entries(m1, m2, p)  # values at interface k = (k, k+1)
    c = 0.5 * dt / dx**2
    rows, cols, vals = [], [], []
    idx = np.arange(M)
    nxt = (idx + 1) % M
    prv = (idx - 1) % M
    for a in range(2):
        for b in range(2):
            dab = dmat[2 * a + b]
            dab_prev = np.roll(dab, 1)  # interface (m-1, m)
            ar = a * M + idx
            # coupling of cell m to species b at m+1, m, m-1
            rows += [ar, ar, ar]
            cols += [b * M + nxt, b * M + idx, b * M + prv]
            vals += [-c * dab, c * (dab + dab_prev), -c * dab_prev]
    rows.append(np.arange(2 * M))
    cols.append(np.arange(2 * M))
    vals.append(np.ones(2 * M))
    mat = scipy.sparse.csc_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(2 * M, 2 * M),
    )
    sol = scipy.sparse.linalg.splu(mat).solve(np.concatenate([r1, r2]))
    return sol[:M], sol[M:]


def step_fields(fld: DensityField, cfg: SolverConfig, p: ModelParams) -> DensityField:
    """Advance one step of size cfg.dt (must be set)."""
    if cfg.dt is None:
        raise ValueError("cfg.dt must be resolved before stepping")
    dx = fld.grid.dx
    if cfg.scheme == "explicit-rk2":
        r1, r2 = _heun_step(fld.rho1, fld.rho2, cfg.dt, dx, _libm_flux(p, dx))
    else:
        r1, r2 = _semi_implicit_step(fld.rho1, fld.rho2, cfg.dt, dx, p)
    out = DensityField(fld.grid, r1, r2, fld.time + cfg.dt)
    _check_values(out)
    return out


def _snapshot_steps(snapshot_times, dt):
    return [int(round(t / dt)) for t in snapshot_times]


def _resolve_dt(fld, cfg, p):
    if cfg.dt is not None:
        return cfg.dt
    dt = stable_dt(fld, p, cfg.stability_safety)
    # land exactly on t_final
    n = max(1, int(np.ceil(cfg.t_final / dt))) if cfg.t_final > 0 else 1
    return cfg.t_final / n if cfg.t_final > 0 else dt


def _run_trajectory(fld0, dt, n_total, capture_steps, one_step):
    """Shared stepping loop: one_step(r1, r2) -> (r1, r2)."""
    traj = []
    r1, r2 = fld0.rho1.copy(), fld0.rho2.copy()
    capture = set(capture_steps)
    if 0 in capture:
        traj.append(DensityField(fld0.grid, r1.copy(), r2.copy(), 0.0))
    for n in range(1, n_total + 1):
        t = n * dt
        try:
            r1, r2 = one_step(r1, r2)
        except (DegenerateDenominatorError, FloatingPointError) as exc:
            raise SolverBlowupError(t, f"({exc})") from exc
        if not np.all(np.isfinite(r1)) or not np.all(np.isfinite(r2)) or \
                max(np.max(np.abs(r1)), np.max(np.abs(r2))) > BLOWUP_LIMIT:
            raise SolverBlowupError(t)
        if n in capture:
            traj.append(DensityField(fld0.grid, r1.copy(), r2.copy(), t))
    return traj


def solve_trajectory(
    fld0: DensityField,
    cfg: SolverConfig,
    p: ModelParams,
    snapshot_times: Sequence[float] | None = None,
) -> list:
    """Run to t_final capturing snapshots at the requested times.

    Snapshot times are rounded to the nearest step boundary.  With
    ``t_final == 0`` (or an empty snapshot list) the initial field alone
    is returned.
    """
    if snapshot_times is None:
        snapshot_times = [0.0, cfg.t_final]
    if cfg.t_final <= 0:
        return [fld0.copy()]
    dt = _resolve_dt(fld0, cfg, p)
    n_total = int(round(cfg.t_final / dt))
    steps = _snapshot_steps(snapshot_times, dt)
    dx = fld0.grid.dx
    if cfg.scheme == "explicit-rk2":
        flux = _libm_flux(p, dx)
        one = lambda r1, r2: _heun_step(r1, r2, dt, dx, flux)
    else:
        one = lambda r1, r2: _semi_implicit_step(r1, r2, dt, dx, p)
    return _run_trajectory(fld0, dt, n_total, steps, one)


# ---------------------------------------------------------------------------
# two-color reference solver (equal diffusivities)

def two_color_reference_solve(
    fld0: DensityField,
    lam: float,
    cfg: SolverConfig,
    snapshot_times: Sequence[float] | None = None,
) -> list:
    """Staged solver for the equal-diffusivity (two-color) reduction.

    The total density follows the heat equation d_t rho = rho_xx / 2; the
    first species follows the linear equation with coefficients
    S(rho) = lam/(lam + rho) and 1 - S(rho), with rho advanced in lockstep.
    Proportional initial data rho1 = theta * rho stays proportional exactly.
    """
    if snapshot_times is None:
        snapshot_times = [0.0, cfg.t_final]
    if cfg.t_final <= 0:
        return [fld0.copy()]
    dx = fld0.grid.dx
    p_unit = ModelParams(1.0, 1.0, max(lam, 1e-300), 1)
    dt = cfg.dt if cfg.dt is not None else _resolve_dt(fld0, cfg, p_unit)
    n_total = int(round(cfg.t_final / dt))
    steps = _snapshot_steps(snapshot_times, dt)

    def flux_pair(tot, r1):
        mt, jt = _mean_and_jump(tot)
        m1, j1 = _mean_and_jump(r1)
        s = self_diffusion(mt, lam)
        f_tot = 0.5 * jt / dx
        f_1 = 0.5 * (s * j1 / dx + (1.0 - s) * m1 * (jt / dx) / mt)
        return f_tot, f_1

    def one(tot, r1):
        k1t, k11 = _rhs_from_flux(flux_pair, tot, r1, dx)
        st, s1 = tot + dt * k1t, r1 + dt * k11
        k2t, k21 = _rhs_from_flux(flux_pair, st, s1, dx)
        return tot + 0.5 * dt * (k1t + k2t), r1 + 0.5 * dt * (k11 + k21)

    tot0 = DensityField(fld0.grid, fld0.rho1 + fld0.rho2, fld0.rho1, 0.0)
    staged = _run_trajectory(tot0, dt, n_total, steps, one)
    return [
        DensityField(f.grid, f.rho2.copy(), f.rho1 - f.rho2, f.time) for f in staged
    ]


# ---------------------------------------------------------------------------
# ternary Maxwell-Stefan solvers

def ms_flux_inversion(u1, u2, grad1, grad2, ms: MSParams):
    """Invert the pairwise friction relations for the fluxes (J1, J2).

    Solves, at each state, the 2x2 system obtained from
    ``grad u_i = -sum_j d_ij (u_j J_i - u_i J_j)`` after eliminating
    ``u3 = 1 - u1 - u2`` and ``J3 = -J1 - J2``.  The result equals
    ``-A(u1, u2) . grad u`` with the ternary matrix, and J3 closes the
    triple to zero total flux by construction.
    """
    u1 = np.asarray(u1, dtype=float)
    u2 = np.asarray(u2, dtype=float)
    b11 = u2 * ms.d12 + (1.0 - u2) * ms.d13
    b12 = u1 * (ms.d13 - ms.d12)
    b21 = u2 * (ms.d23 - ms.d12)
    b22 = u1 * ms.d12 + (1.0 - u1) * ms.d23
    det = b11 * b22 - b12 * b21
    if np.any(det == 0.0):
        from .coefficients import SingularSystemError

        raise SingularSystemError("friction system singular")
    j1 = -(b22 * grad1 - b12 * grad2) / det
    j2 = -(b11 * grad2 - b21 * grad1) / det
    return j1, j2


def ms_interface_flux(u1, u2, ms: MSParams, dx: float, route: str = "matrix"):
    """Interface fluxes (1/2) A(mean) grad u for the conservative update."""
    m1, j1 = _mean_and_jump(u1)
    m2, j2 = _mean_and_jump(u2)
    g1, g2 = j1 / dx, j2 / dx
    if route == "matrix":
        a11, a12, a21, a22 = ms_ternary_matrix_entries(m1, m2, ms)
        return 0.5 * (a11 * g1 + a12 * g2), 0.5 * (a21 * g1 + a22 * g2)
    if route == "inversion":
        f1, f2 = ms_flux_inversion(m1, m2, g1, g2, ms)
        return -0.5 * f1, -0.5 * f2
    raise ValueError(f"unknown route {route!r}")


def ms_solve_trajectory(
    u0: DensityField,
    cfg: SolverConfig,
    ms: MSParams,
    snapshot_times: Sequence[float] | None = None,
    route: str = "matrix",
) -> list:
    """Integrate d_t u = (1/2) div(A(u) grad u) with the Heun scheme.

    The same 1/2 time normalization as the cross-diffusion solver is used,
    so trajectories of the two systems map onto each other exactly under
    the density scales of :func:`crossdiff.coefficients.ms_density_scales`.
    """
    if snapshot_times is None:
        snapshot_times = [0.0, cfg.t_final]
    if cfg.t_final <= 0:
        return [u0.copy()]
    dx = u0.grid.dx
    if cfg.dt is None:
        a11, a12, a21, a22 = ms_ternary_matrix_entries(u0.rho1, u0.rho2, ms)
        rad = _spectral_radius(a11, a12, a21, a22)
        dt = cfg.stability_safety * dx**2 / (2.0 * rad)
        n = max(1, int(np.ceil(cfg.t_final / dt)))
        dt = cfg.t_final / n
    else:
        dt = cfg.dt
    n_total = int(round(cfg.t_final / dt))
    steps = _snapshot_steps(snapshot_times, dt)
    flux = lambda a, b: ms_interface_flux(a, b, ms, dx, route=route)
    one = lambda r1, r2: _heun_step(r1, r2, dt, dx, flux)
    return _run_trajectory(u0, dt, n_total, steps, one)


# ---------------------------------------------------------------------------
# diagnostics

def master_residual(trajectory: Sequence[DensityField], p: ModelParams) -> float:
    """Residual of the weighted-density heat identity over a trajectory.

    Computes, in the grid L2 norm,

        || [m(T) - m(0)] - (1/2) * trapz_t( L_h (rho1 + rho2) ) ||

    where m = rho1/s1 + rho2/s2 and L_h is the periodic three-point
    Laplacian.  The spatial part of the identity is exact for the
    conservative interface-mean scheme, so the residual is pure time
    discretization error: first order in the step for the lagged schemes,
    and identically zero for constant trajectories.
    """
    if len(trajectory) < 2:
        raise ValueError("need at least two snapshots")
    grid = trajectory[0].grid
    dx = grid.dx

    def lap_tot(f):
        tot = f.rho1 + f.rho2
        return (np.roll(tot, -1) - 2.0 * tot + np.roll(tot, 1)) / dx**2

    first, last = trajectory[0], trajectory[-1]
    dm = (last.rho1 - first.rho1) / p.sigma1_sq + (last.rho2 - first.rho2) / p.sigma2_sq
    acc = np.zeros(grid.M)
    for fa, fb in zip(trajectory[:-1], trajectory[1:]):
        acc += 0.5 * (fb.time - fa.time) * (lap_tot(fa) + lap_tot(fb))
    resid = dm - 0.5 * acc
    return float(np.sqrt(dx * np.sum(resid**2)))


def fourier_mode_amplitude(values: np.ndarray, mode: int = 1) -> float:
    """Cosine-mode amplitude 2 dx sum v(x) cos(2 pi mode x) on the grid."""
    m = values.size
    x = np.arange(m) / m
    return float(2.0 / m * np.sum(values * np.cos(2.0 * np.pi * mode * x)))
