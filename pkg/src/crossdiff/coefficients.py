"""Closed-form coefficients of the two-type reflecting particle model.

Everything in this module is a pure function of its arguments: switching
rates, the 2x2 cross-diffusion matrix of the scaling limit, the two-color
reduction at equal diffusivities, normal-ellipticity checks, and the
parameter maps between the particle model and the ternary Maxwell-Stefan
system.  All matrix-valued functions broadcast over numpy arrays so the
PDE solver can evaluate them on whole grids at once.

Conventions worth stating once:

* Densities are masses per unit length on the unit circle; the two species
  carry diffusivities ``sigma1_sq`` and ``sigma2_sq`` and a single
  interaction parameter ``lam``.  The pair switching rate between types
  ``a`` and ``b`` is ``lam * sigma_a^2 * sigma_b^2`` per unit pair local
  time (before the extra factor N applied by the simulator).
* The Maxwell-Stefan coefficients ``d12, d13, d23`` enter the pairwise
  friction relations multiplicatively,
  ``grad u_i = -sum_j d_ij (u_j J_i - u_i J_j)``,
  which is the convention under which :func:`ms_ternary_matrix` is exactly
  the inverse of the friction system.  See ``ms_density_scales`` for the
  scaling that maps Maxwell-Stefan trajectories onto cross-diffusion
  trajectories.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

__all__ = [
    "DegenerateDenominatorError",
    "SingularSystemError",
    "ParameterConstraintError",
    "ModelParams",
    "MSParams",
    "torus_nu",
    "wrap01",
    "switch_rate",
    "diffusion_matrix",
    "diffusion_matrix_entries",
    "two_color_matrix",
    "self_diffusion",
    "is_normally_elliptic",
    "alpha_const",
    "ms_ternary_matrix",
    "ms_ternary_matrix_entries",
    "libm_from_ms",
    "ms_from_libm",
    "consistent_k",
    "ms_density_scales",
    "LibmImage",
    "MSImage",
]


class DegenerateDenominatorError(ZeroDivisionError):
    """The state-dependent denominator of a diffusion matrix vanished."""


class SingularSystemError(ZeroDivisionError):
    """The Maxwell-Stefan friction system is singular at the given state."""


class ParameterConstraintError(ValueError):
    """Parameters violate a constraint required by a mapping."""


@dataclass(frozen=True)
class ModelParams:
    """Physical constants of the particle system.

    ``sigma1_sq`` and ``sigma2_sq`` are the diffusivities of the two types,
    ``lam`` the interaction parameter and ``N`` the particle count.  The
    derived switching rates are ``lam * sigma_a^2 * sigma_b^2``.
    """

    sigma1_sq: float
    sigma2_sq: float
    lam: float
    N: int

    def __post_init__(self):
        if not (self.sigma1_sq > 0 and self.sigma2_sq > 0):
            raise ParameterConstraintError("diffusivities must be positive")
        if self.lam < 0:
            raise ParameterConstraintError("lam must be non-negative")
        if self.N < 1:
            raise ParameterConstraintError("N must be a positive integer")

    @property
    def sigma_sq(self) -> np.ndarray:
        """Diffusivity indexed by type - 1."""
        return np.array([self.sigma1_sq, self.sigma2_sq])


@dataclass(frozen=True)
class MSParams:
    """Binary diffusion coefficients of the ternary Maxwell-Stefan system.

    Symmetric by construction (``d_ij == d_ji``); all three strictly
    positive.  The correspondence with the particle model additionally
    needs ``d12 > max(d13, d23)``, which is *not* enforced here because
    the ternary matrix itself is defined more broadly.
    """

    d12: float
    d13: float
    d23: float

    def __post_init__(self):
        if not (self.d12 > 0 and self.d13 > 0 and self.d23 > 0):
            raise ParameterConstraintError("binary diffusion coefficients must be positive")

    @property
    def libm_compatible(self) -> bool:
        return self.d12 > max(self.d13, self.d23)


class LibmImage(NamedTuple):
    """Particle-model parameters produced by :func:`libm_from_ms`."""

    sigma1_sq: float
    sigma2_sq: float
    lam: float
    rho1: float
    rho2: float


class MSImage(NamedTuple):
    """Maxwell-Stefan data produced by :func:`ms_from_libm`."""

    ms: MSParams
    u1: float
    u2: float


def wrap01(x):
    """Reduce positions to the fundamental domain [0, 1)."""
    return np.mod(x, 1.0)


def torus_nu(a, b):
    """nu((a - b) mod 1) where nu(x) = x on [0, 1).

    Discontinuous at coincidence: nu(0) = 0 while the limit from below is 1.
    Broadcasts over arrays.
    """
    return np.mod(np.asarray(a, dtype=float) - b, 1.0)


def switch_rate(c1: int, c2: int, p: ModelParams) -> float:
    """Label-switching rate between a type ``c1`` and a type ``c2`` particle.

    Per unit pair local time, before the factor N applied by the simulator.
    """
    s = p.sigma_sq
    return p.lam * s[c1 - 1] * s[c2 - 1]


def diffusion_matrix_entries(rho1, rho2, p: ModelParams):
    """Entries (d11, d12, d21, d22) of the cross-diffusion matrix.

    The matrix is ``[[rho1 + lam*s1, rho1], [rho2, rho2 + lam*s2]]`` divided
    by ``lam + rho1/s1 + rho2/s2``.  Broadcasts over arrays; raises
    :class:`DegenerateDenominatorError` where the denominator vanishes
    (only possible at lam == 0 with both densities zero).
    """
    rho1 = np.asarray(rho1, dtype=float)
    rho2 = np.asarray(rho2, dtype=float)
    s1, s2 = p.sigma1_sq, p.sigma2_sq
    q = p.lam + rho1 / s1 + rho2 / s2
    if np.any(q <= 0.0):
        raise DegenerateDenominatorError(
            "cross-diffusion matrix undefined: lam + rho1/s1 + rho2/s2 <= 0"
        )
    return ((rho1 + p.lam * s1) / q, rho1 / q, rho2 / q, (rho2 + p.lam * s2) / q)


def diffusion_matrix(rho: tuple, p: ModelParams) -> np.ndarray:
    """Cross-diffusion matrix of the limit equation, shape (..., 2, 2)."""
    rho1, rho2 = rho
    if np.any(np.asarray(rho1) < 0) or np.any(np.asarray(rho2) < 0):
        raise ParameterConstraintError("densities must be non-negative")
    d11, d12, d21, d22 = diffusion_matrix_entries(rho1, rho2, p)
    return np.stack(
        [np.stack([d11, d12], axis=-1), np.stack([d21, d22], axis=-1)], axis=-2
    )


def self_diffusion(rho, lam):
    """Tagged-particle diffusivity lam / (lam + rho) of the one-type system."""
    return lam / (lam + rho)


def two_color_matrix(rho: tuple, lam: float) -> np.ndarray:
    """Limit matrix of the two-color system (equal diffusivities).

    Bulk coefficient is identically 1 (reflection), self-diffusion
    coefficient is ``lam / (lam + rho)``.  Requires ``rho1 + rho2 > 0``.
    """
    rho1 = np.asarray(rho[0], dtype=float)
    rho2 = np.asarray(rho[1], dtype=float)
    tot = rho1 + rho2
    if np.any(tot <= 0.0):
        raise DegenerateDenominatorError("two-color matrix needs rho1 + rho2 > 0")
    s = self_diffusion(tot, lam)
    f1, f2 = rho1 / tot, rho2 / tot
    m11 = f1 + f2 * s
    m12 = f1 * (1.0 - s)
    m21 = f2 * (1.0 - s)
    m22 = f2 + f1 * s
    return np.stack(
        [np.stack([m11, m12], axis=-1), np.stack([m21, m22], axis=-1)], axis=-2
    )


def is_normally_elliptic(m) -> bool:
    """True iff every eigenvalue of the 2x2 matrix has positive real part.

    For a 2x2 matrix this is equivalent to trace > 0 and det > 0.
    """
    m = np.asarray(m, dtype=float)
    tr = m[..., 0, 0] + m[..., 1, 1]
    det = m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]
    return bool(np.all(tr > 0.0) and np.all(det > 0.0))


def alpha_const(p: ModelParams, rho_bar1: float, rho_bar2: float) -> float:
    """The constant 1 / (lam + rho_bar1/s1 + rho_bar2/s2).

    For the finite-N martingale diagnostic pass the realized type
    fractions as ``rho_bar``; with those the compensation is exact at
    every N, not just asymptotically.
    """
    q = p.lam + rho_bar1 / p.sigma1_sq + rho_bar2 / p.sigma2_sq
    if q <= 0.0:
        raise DegenerateDenominatorError("alpha undefined: denominator <= 0")
    return 1.0 / q


def _ms_denominator(u1, u2, ms: MSParams):
    return (
        ms.d13 * ms.d23
        + ms.d13 * (ms.d12 - ms.d23) * u1
        + ms.d23 * (ms.d12 - ms.d13) * u2
    )


def ms_ternary_matrix_entries(u1, u2, ms: MSParams):
    """Entries of the ternary Maxwell-Stefan cross-diffusion matrix."""
    u1 = np.asarray(u1, dtype=float)
    u2 = np.asarray(u2, dtype=float)
    f = _ms_denominator(u1, u2, ms)
    if np.any(f == 0.0):
        raise SingularSystemError("Maxwell-Stefan denominator vanished")
    a11 = (ms.d23 + (ms.d12 - ms.d23) * u1) / f
    a12 = (ms.d12 - ms.d13) * u1 / f
    a21 = (ms.d12 - ms.d23) * u2 / f
    a22 = (ms.d13 + (ms.d12 - ms.d13) * u2) / f
    return a11, a12, a21, a22


def ms_ternary_matrix(u1, u2, ms: MSParams) -> np.ndarray:
    """Cross-diffusion matrix of the ternary Maxwell-Stefan system.

    Equals the inverse of the pairwise friction system
    ``grad u_i = -sum_j d_ij (u_j J_i - u_i J_j)`` with ``u3 = 1 - u1 - u2``
    and ``J3 = -J1 - J2`` eliminated.
    """
    a11, a12, a21, a22 = ms_ternary_matrix_entries(u1, u2, ms)
    return np.stack(
        [np.stack([a11, a12], axis=-1), np.stack([a21, a22], axis=-1)], axis=-2
    )


def libm_from_ms(ms: MSParams, k: float, u1, u2) -> LibmImage:
    """Map Maxwell-Stefan data to particle-model parameters and densities.

    ``rho_c`` picks up the factor ``k * d_c3 * (d12 - d_other)``; the
    diffusivities are the reciprocals of ``d13``/``d23`` and
    ``lam = k * d13 * d23``.  ``k > 0`` is a free scale.  Requires
    ``d12 > max(d13, d23)`` so the density map is non-negative.
    """
    if k <= 0:
        raise ParameterConstraintError("k must be positive")
    if not ms.libm_compatible:
        raise ParameterConstraintError(
            "particle-model correspondence needs d12 > max(d13, d23)"
        )
    return LibmImage(
        sigma1_sq=1.0 / ms.d13,
        sigma2_sq=1.0 / ms.d23,
        lam=k * ms.d13 * ms.d23,
        rho1=k * ms.d13 * (ms.d12 - ms.d23) * u1,
        rho2=k * ms.d23 * (ms.d12 - ms.d13) * u2,
    )


def ms_from_libm(p: ModelParams, d12: float, rho1, rho2) -> MSImage:
    """Map particle-model parameters and densities to Maxwell-Stefan data.

    ``d12`` may be any number larger than ``max(1/s1, 1/s2)``; the inverse
    map :func:`libm_from_ms` recovers the input exactly with
    ``k = consistent_k(p)``.
    """
    if p.lam <= 0:
        raise ParameterConstraintError("lam must be positive for the mapping")
    d13 = 1.0 / p.sigma1_sq
    d23 = 1.0 / p.sigma2_sq
    if d12 <= max(d13, d23):
        raise ParameterConstraintError(
            f"d12 must exceed max(1/s1, 1/s2) = {max(d13, d23)}"
        )
    u1 = np.asarray(rho1, dtype=float) / (p.lam * (p.sigma2_sq * d12 - 1.0))
    u2 = np.asarray(rho2, dtype=float) / (p.lam * (p.sigma1_sq * d12 - 1.0))
    return MSImage(ms=MSParams(d12=d12, d13=d13, d23=d23), u1=u1, u2=u2)


def consistent_k(p: ModelParams) -> float:
    """The k for which libm_from_ms inverts ms_from_libm exactly."""
    return p.lam * p.sigma1_sq * p.sigma2_sq


def ms_density_scales(ms: MSParams, k: float) -> tuple:
    """Per-species density scales under which the two PDEs are conjugate.

    With ``a1 = k (d12 - d23)`` and ``a2 = k (d12 - d13)``, and the
    parameter map of :func:`libm_from_ms`, the identity

        D(a1 u1, a2 u2) == P A(u1, u2) P^{-1},   P = diag(a1, a2)

    holds exactly, so ``rho_c = a_c u_c`` solves the cross-diffusion limit
    equation whenever ``u`` solves the Maxwell-Stefan system integrated in
    the same time units (both equations carrying the same 1/2 factor).
    Note these scales drop the extra ``d13``/``d23`` prefactors of the
    plain density map; with those prefactors the conjugacy fails unless
    d13 == d23.
    """
    if not ms.libm_compatible:
        raise ParameterConstraintError(
            "particle-model correspondence needs d12 > max(d13, d23)"
        )
    return k * (ms.d12 - ms.d23), k * (ms.d12 - ms.d13)
