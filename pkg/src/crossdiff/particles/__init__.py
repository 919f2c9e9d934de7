from .core import (
    LocalTimeLedger,
    ParticleState,
    accrue_and_switch,
    empirical_density,
    init_iid,
    local_density_at_particles,
    qv_predicted,
    reflect_pair,
    reflected_gap_step,
    replacement_statistic,
    z_values,
)
from .engine import DiagnosticsRecord, SimConfig, Simulation, SweepError, advance, default_dt
from . import backend

__all__ = [
    "LocalTimeLedger",
    "ParticleState",
    "accrue_and_switch",
    "empirical_density",
    "init_iid",
    "local_density_at_particles",
    "qv_predicted",
    "reflect_pair",
    "reflected_gap_step",
    "replacement_statistic",
    "z_values",
    "DiagnosticsRecord",
    "SimConfig",
    "Simulation",
    "SweepError",
    "advance",
    "default_dt",
    "backend",
]
