"""Run configuration: tolerance bundle, sampler settings, exclusion zones,
integrator options, and the JSON config document the CLI consumes.

All thresholds live here with their defaults so a single config document can
override any of them. Precedence is CLI flag > config field > default.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any

import numpy as np

from .errors import InputError


@dataclass(frozen=True)
class Tolerances:
    """Every numerical threshold used by the verdict machinery.

    collinear        1 - |cos| below this means the two gradients are collinear.
    rank             sigma ratio below this means rank-deficient.
    lift_residual    lift contract residual bound, times the jet scale.
    tangency         pencil-tangency declaration bound, times scale and ||v||.
    opposite         cosine band for the opposite-direction predicate.
    mu_floor         |<grad_H, w_f>| below this (times norms) leaves mu undefined.
    lifts_collinear  1 - |cos(w_f, w_F)| below this marks the lifts collinear.
    field_tangency   accepted bound on the tangency residual of the field, times scale.
    field_rank       dispatch threshold for the field assembly: below this
                     augmented-rank margin the normal-lift route is used.
                     Far wider than `rank` because the constrained lift's
                     tangential part grows like 1/margin and would make the
                     field singular along the exceptional set.
    field_collinear  dispatch threshold on 1 - |cos| for the field assembly.
    pass_margin      adversarial minimum above this gives verdict "pass".
    fail_margin      any margin below this gives verdict "fail" with a witness.
    blend_band       width multiplier of the case-boundary band where both
                     lift routes are evaluated and the better one kept.
    drift            Phi-drift bound for a passing flow equivalence.
    roundtrip        round-trip error bound, times epsilon.
    endpoint         endpoint-on-sphere bound, times epsilon.
    """

    collinear: float = 1e-10
    rank: float = 1e-8
    lift_residual: float = 1e-9
    tangency: float = 1e-8
    opposite: float = 1e-9
    mu_floor: float = 1e-12
    lifts_collinear: float = 1e-10
    field_tangency: float = 1e-7
    field_rank: float = 1e-4
    field_collinear: float = 1e-8
    pass_margin: float = 1e-2
    fail_margin: float = 1e-6
    blend_band: float = 10.0
    drift: float = 1e-5
    roundtrip: float = 1e-6
    endpoint: float = 1e-7

    def validate(self) -> None:
        for f in fields(self):
            value = getattr(self, f.name)
            if not value > 0:
                raise InputError(f"tolerances.{f.name} must be positive, got {value}")
        if not self.fail_margin < self.pass_margin:
            raise InputError(
                "tolerances.fail_margin must be below tolerances.pass_margin"
            )


DEFAULT_TOLERANCES = Tolerances()


@dataclass(frozen=True)
class SamplerCfg:
    """Seeded sampling plan for scans.

    Sample i of an N-sample run is generated from a per-index seed stream, so
    enlarging `samples` refines (never reshuffles) a smaller run, and results
    do not depend on the thread count.
    """

    samples: int = 10000
    seed: int = 0
    restarts: int = 32
    descent_iters: int = 200
    threads: int = 1

    def validate(self) -> None:
        if self.samples < 1:
            raise InputError(f"sampler.samples must be >= 1, got {self.samples}")
        if self.restarts < 0 or self.descent_iters < 0:
            raise InputError("sampler.restarts and sampler.descent_iters must be >= 0")
        if self.threads < 1:
            raise InputError(f"sampler.threads must be >= 1, got {self.threads}")


@dataclass(frozen=True)
class AnnulusSpec:
    """Radial shell eps_min <= ||x|| <= eps_max with a floor on ||f(x)||."""

    eps_min: float
    eps_max: float
    f_floor: float = 1e-3

    def validate(self) -> None:
        if not 0 < self.eps_min < self.eps_max:
            raise InputError(
                f"annulus needs 0 < eps_min < eps_max, got ({self.eps_min}, {self.eps_max})"
            )
        if self.f_floor <= 0:
            raise InputError(f"annulus.f_floor must be positive, got {self.f_floor}")


@dataclass(frozen=True)
class Exclusion:
    """Standoff zone around the discriminant image.

    A point x is excluded when ||f(x)|| <= f_floor, or when the direction of
    f(x) lies within `angle` radians of any direction in `directions` (the
    sampled ray set of the discriminant on the unit sphere of R^p).
    """

    directions: tuple[tuple[float, ...], ...] = ()
    angle: float = 0.05
    f_floor: float = 1e-3

    def direction_array(self) -> np.ndarray:
        return np.asarray(self.directions, dtype=float).reshape(len(self.directions), -1)

    def allows(self, fx: np.ndarray) -> bool:
        fnorm = float(np.linalg.norm(fx))
        if fnorm <= self.f_floor:
            return False
        if not self.directions:
            return True
        u = fx / fnorm
        cos = np.clip(self.direction_array() @ u, -1.0, 1.0)
        return bool(np.arccos(cos).min() > self.angle)


@dataclass(frozen=True)
class FlowOpts:
    """Adaptive integrator settings: embedded 4(5) pair with step rejection
    and bisection event localization.

    The defaults are tight enough that round-trip transport error stays
    below the report tolerance even through the stiff blend band near the
    exceptional set.
    """

    rtol: float = 1e-10
    atol: float = 1e-12
    max_steps: int = 100000
    event_tol: float = 1e-10
    h0: float | None = None
    record_steps: bool = True

    def validate(self) -> None:
        if self.rtol <= 0 or self.atol <= 0 or self.event_tol <= 0:
            raise InputError("flow tolerances must be positive")
        if self.max_steps < 10:
            raise InputError(f"flow.max_steps must be >= 10, got {self.max_steps}")

    def tightened(self, factor: float = 10.0) -> "FlowOpts":
        return replace(self, rtol=self.rtol / factor, atol=self.atol / factor)


def thread_count(requested: int | None = None) -> int:
    """Requested thread count, falling back to FIBLAB_THREADS, then 1."""
    if requested is not None and requested >= 1:
        return int(requested)
    env = os.environ.get("FIBLAB_THREADS", "")
    try:
        n = int(env)
        return n if n >= 1 else 1
    except ValueError:
        return 1


@dataclass
class RunConfig:
    """One JSON document drives a run; flags may override individual fields."""

    map_spec: Any = None  # catalog name (str) or inline map document (dict)
    epsilon: float = 1.0
    delta: float | None = None
    eta: float | None = None
    eps_min: float | None = None
    tolerances: Tolerances = field(default_factory=Tolerances)
    sampler: SamplerCfg = field(default_factory=SamplerCfg)
    flow: FlowOpts = field(default_factory=FlowOpts)
    exclusion: Exclusion = field(default_factory=Exclusion)
    flow_seeds: int = 100
    out: str | None = None
    strict: bool = False
    plot: bool = True

    def validate(self) -> None:
        if self.epsilon <= 0:
            raise InputError(f"epsilon must be positive, got {self.epsilon}")
        if self.delta is not None:
            if not 0 < self.delta <= self.epsilon / 10:
                raise InputError(
                    f"delta must satisfy 0 < delta <= epsilon/10 "
                    f"(= {self.epsilon / 10}), got {self.delta}"
                )
        if self.eta is not None and self.eta <= 0:
            raise InputError(f"eta must be positive, got {self.eta}")
        if self.flow_seeds < 1:
            raise InputError(f"flow_seeds must be >= 1, got {self.flow_seeds}")
        self.tolerances.validate()
        self.sampler.validate()
        self.flow.validate()

    def annulus(self, f_floor: float | None = None) -> AnnulusSpec:
        lo = self.eps_min if self.eps_min is not None else self.epsilon / 10
        return AnnulusSpec(
            eps_min=lo,
            eps_max=self.epsilon,
            f_floor=f_floor if f_floor is not None else self.exclusion.f_floor,
        )


def _build(cls, doc: dict, where: str):
    known = {f.name for f in fields(cls)}
    bad = sorted(set(doc) - known)
    if bad:
        raise InputError(f"unknown field '{where}.{bad[0]}'")
    return cls(**doc)


def config_from_dict(doc: dict) -> RunConfig:
    """Build and validate a RunConfig from a parsed JSON document."""
    if not isinstance(doc, dict):
        raise InputError("config document must be a JSON object")
    doc = dict(doc)
    cfg = RunConfig()
    if "map" in doc:
        cfg.map_spec = doc.pop("map")
    for scalar in ("epsilon", "delta", "eta", "eps_min", "flow_seeds", "out",
                   "strict", "plot"):
        if scalar in doc:
            setattr(cfg, scalar, doc.pop(scalar))
    if "tolerances" in doc:
        cfg.tolerances = _build(Tolerances, doc.pop("tolerances"), "tolerances")
    if "sampler" in doc:
        cfg.sampler = _build(SamplerCfg, doc.pop("sampler"), "sampler")
    if "flow" in doc:
        cfg.flow = _build(FlowOpts, doc.pop("flow"), "flow")
    if "exclusion" in doc:
        exc = doc.pop("exclusion")
        known = {"directions", "angle", "f_floor"}
        bad = sorted(set(exc) - known)
        if bad:
            raise InputError(f"unknown field 'exclusion.{bad[0]}'")
        dirs = tuple(tuple(float(c) for c in d) for d in exc.get("directions", ()))
        cfg.exclusion = Exclusion(
            directions=dirs,
            angle=float(exc.get("angle", 0.05)),
            f_floor=float(exc.get("f_floor", 1e-3)),
        )
    if doc:
        raise InputError(f"unknown config field '{sorted(doc)[0]}'")
    cfg.validate()
    return cfg


def load_config(path: str | Path) -> RunConfig:
    p = Path(path)
    if not p.exists():
        raise InputError(f"config file not found: {p}")
    try:
        doc = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise InputError(f"config file {p} is not valid JSON: {e}") from e
    return config_from_dict(doc)
