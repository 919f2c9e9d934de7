"""Declarative experiment configuration.

Configs are JSON objects with the sections shown in the README; unknown
keys are rejected everywhere so typos cannot silently change a run.
Initial profiles are closed-form expressions parsed by
:mod:`crossdiff.expressions` and checked for non-negativity on a sample
grid at load time.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ..coefficients import ModelParams
from ..expressions import ExpressionError, evaluate_array, parse

__all__ = ["ConfigError", "ExperimentConfig"]

_NONNEG_SAMPLES = 10_000


class ConfigError(ValueError):
    pass


def _take(section: dict, allowed: dict, where: str) -> dict:
    """Pop known keys with defaults; reject anything left over."""
    out = {}
    sec = dict(section)
    for key, default in allowed.items():
        out[key] = sec.pop(key) if key in sec else default
    if sec:
        raise ConfigError(f"unknown keys in {where}: {sorted(sec)}")
    return out


@dataclass
class ExperimentConfig:
    model: dict
    initial: dict
    particles: dict
    pde: dict
    outputs: dict
    seed: int
    ms_form: bool = False
    ms_d12: float | None = None
    sweep_n: list = field(default_factory=list)

    # -- construction -------------------------------------------------------

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        with open(path, "r", encoding="utf-8") as fh:
            try:
                raw = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config is not valid JSON: {exc}") from exc
        return cls.from_dict(raw)

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        top = _take(raw, {
            "model": None, "initial": None, "particles": {}, "pde": {},
            "outputs": {}, "seed": 0, "ms_form": False, "ms_d12": None,
            "sweep": {},
        }, "config")
        if top["model"] is None or top["initial"] is None:
            raise ConfigError("config needs 'model' and 'initial' sections")
        model = _take(top["model"], {
            "sigma1_sq": None, "sigma2_sq": None, "lambda": None, "N": None,
        }, "model")
        if any(v is None for v in model.values()):
            raise ConfigError("model needs sigma1_sq, sigma2_sq, lambda, N")
        initial = _take(top["initial"], {"rho1": None, "rho2": None}, "initial")
        if initial["rho1"] is None or initial["rho2"] is None:
            raise ConfigError("initial needs rho1 and rho2 expressions")
        particles = _take(top["particles"], {
            "dt": None, "t_final": 0.05, "replicas": 1, "epsilon": None,
            "local_time_scheme": "skorokhod-exact", "switch_same_type": True,
        }, "particles")
        pde = _take(top["pde"], {
            "M": 256, "dt": None, "scheme": "explicit-rk2", "t_final": None,
            "stability_safety": 0.5,
        }, "pde")
        outputs = _take(top["outputs"], {
            "directory": "out", "snapshot_times": None, "plot": False,
        }, "outputs")
        sweep = _take(top["sweep"], {"N": []}, "sweep")
        cfg = cls(
            model=model, initial=initial, particles=particles, pde=pde,
            outputs=outputs, seed=int(top["seed"]), ms_form=bool(top["ms_form"]),
            ms_d12=top["ms_d12"], sweep_n=[int(n) for n in sweep["N"]],
        )
        cfg.validate()
        return cfg

    # -- validation & access -----------------------------------------------

    def validate(self):
        if self.particles["replicas"] < 1:
            raise ConfigError("replicas must be >= 1")
        if self.pde["scheme"] not in ("explicit-rk2", "semi-implicit"):
            raise ConfigError(f"unknown pde scheme {self.pde['scheme']!r}")
        xs = np.linspace(0.0, 1.0, _NONNEG_SAMPLES, endpoint=False)
        for name in ("rho1", "rho2"):
            try:
                ast = parse(self.initial[name])
                values = evaluate_array(ast, xs)
            except ExpressionError as exc:
                raise ConfigError(f"initial.{name}: {exc}") from exc
            if not np.all(np.isfinite(values)):
                raise ConfigError(f"initial.{name} is not finite on [0,1)")
            if np.any(values < 0):
                raise ConfigError(f"initial.{name} is negative on the sample grid")
        for t in self.snapshot_times():
            if t < 0 or t > self.t_final() + 1e-12:
                raise ConfigError("snapshot_times must lie in [0, t_final]")
        eps = self.epsilon()
        dx = 1.0 / int(self.pde["M"])
        if eps < 2.0 * dx:
            raise ConfigError(
                f"epsilon={eps:g} under-resolves the comparison grid; "
                f"need epsilon >= 2*dx = {2 * dx:g}"
            )
        if eps >= 0.5:
            raise ConfigError(
                f"epsilon={eps:g} wraps the mollifier around the circle; "
                "need epsilon < 1/2 (set particles.epsilon explicitly for tiny N)"
            )

    def require_unit_mass(self):
        """Particle runs represent probability mass: total must be 1."""
        m = self.initial_masses()
        if abs(sum(m) - 1.0) > 1e-6:
            raise ConfigError(
                f"particle commands need total initial mass 1, got {sum(m):.6g}"
            )

    def model_params(self, n_override: int | None = None) -> ModelParams:
        return ModelParams(
            sigma1_sq=float(self.model["sigma1_sq"]),
            sigma2_sq=float(self.model["sigma2_sq"]),
            lam=float(self.model["lambda"]),
            N=int(n_override if n_override is not None else self.model["N"]),
        )

    def profiles(self):
        a1 = parse(self.initial["rho1"])
        a2 = parse(self.initial["rho2"])
        return (lambda x: evaluate_array(a1, x)), (lambda x: evaluate_array(a2, x))

    def initial_masses(self):
        xs = np.linspace(0.0, 1.0, 4097)
        f1, f2 = self.profiles()
        return float(np.trapezoid(f1(xs), xs)), float(np.trapezoid(f2(xs), xs))

    def t_final(self) -> float:
        t = self.pde["t_final"]
        return float(self.particles["t_final"] if t is None else t)

    def snapshot_times(self) -> list:
        ts = self.outputs["snapshot_times"]
        if ts is None:
            ts = [0.0, self.t_final()]
        return [float(t) for t in ts]

    def epsilon(self, n_override: int | None = None) -> float:
        eps = self.particles["epsilon"]
        if eps is not None:
            return float(eps)
        n = int(n_override if n_override is not None else self.model["N"])
        return float(n) ** (-1.0 / 3.0)

    def canonical_json(self) -> str:
        data = {
            "model": self.model, "initial": self.initial,
            "particles": self.particles, "pde": self.pde,
            "outputs": self.outputs, "seed": self.seed,
            "ms_form": self.ms_form, "ms_d12": self.ms_d12,
            "sweep": {"N": self.sweep_n},
        }
        return json.dumps(data, sort_keys=True, separators=(",", ":"))
