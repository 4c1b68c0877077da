"""Assembly of the inflating vector field.

At each point the field is the positive combination
    w_tilde = ||grad_H|| w_f + alpha ||grad_h|| w_F
of the two lifts, which makes it simultaneously transverse to the tubes
(level sets of ||f||^2), transverse to the spheres (level sets of ||x||^2),
and tangent to the pencil member through the point. Each evaluation returns
a FieldSample carrying the inner products and tangency residual that witness
those three properties; samples violating them are flagged, never dropped.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .config import AnnulusSpec, DEFAULT_TOLERANCES, SamplerCfg, Tolerances
from .errors import FiblabError, InputError
from .lifting import Case, CaseLabel, LiftPair, classify_point, lift_pair
from .pencil import pencil_tangent_residual
from .polymap import Jet, PolynomialMap, jet
from .sampling import annulus_point, indexed_map, rng_for


@dataclass(frozen=True)
class FieldSample:
    """One evaluation of the field with its transversality diagnostics."""

    x: np.ndarray
    w_tilde: np.ndarray
    case: CaseLabel
    ip_tube: float        # <w_tilde, grad_h>, positive when transverse to tubes
    ip_sphere: float      # <w_tilde, grad_H>, positive when transverse to spheres
    tangency_residual: float
    lifts: LiftPair
    valid: bool

    def to_record(self) -> dict:
        return {
            "x": self.x.tolist(),
            "w_tilde": self.w_tilde.tolist(),
            "case": self.case.case.value,
            "ip_tube": self.ip_tube,
            "ip_sphere": self.ip_sphere,
            "tangency_residual": self.tangency_residual,
            "valid": self.valid,
            "lifts": self.lifts.to_record(),
        }


@dataclass
class NodReport:
    """Sampled check that grad_h and grad_H never point in opposite
    directions inside the annulus."""

    map_name: str | None
    eps_min: float
    eps_max: float
    f_floor: float
    requested: int
    effective: int
    min_cosine: float
    argmin: list[float] | None
    violations: list[dict]
    tol: float
    samples: list[dict]

    @property
    def passed(self) -> bool:
        return not self.violations

    def to_record(self, include_samples: bool = False) -> dict:
        doc = {
            "map": self.map_name,
            "eps_min": self.eps_min,
            "eps_max": self.eps_max,
            "f_floor": self.f_floor,
            "requested_samples": self.requested,
            "effective_samples": self.effective,
            "min_cosine": self.min_cosine,
            "argmin": self.argmin,
            "violations": self.violations,
            "tol": self.tol,
            "passed": self.passed,
        }
        if include_samples:
            doc["samples"] = self.samples
        return doc


def _field_vector(jet: Jet, lifts: LiftPair) -> np.ndarray:
    return (
        float(np.linalg.norm(jet.grad_H)) * lifts.w_f
        + lifts.alpha * float(np.linalg.norm(jet.grad_h)) * lifts.w_F
    )


def _ramp(margin: float, lo: float, hi: float) -> float:
    """1 at margin <= lo, 0 at margin >= hi, smoothstep in log margin."""
    if margin <= lo:
        return 1.0
    if margin >= hi:
        return 0.0
    u = (np.log(margin) - np.log(lo)) / (np.log(hi) - np.log(lo))
    return 1.0 - float(u * u * (3.0 - 2.0 * u))


def milnor_vector(
    jet: Jet,
    tols: Tolerances = DEFAULT_TOLERANCES,
    diagnostics: list | None = None,
) -> FieldSample:
    """Evaluate the field at a jet with case-dispatched lifts.

    Away from the exceptional set the constrained-lift route is used; near it
    (and near gradient collinearity) the normal-lift route takes over, with a
    smooth convex ramp between the two across the field_* margin bands. A
    convex combination of the two candidate fields keeps both transversality
    inner products positive and stays tangent to the pencil, so the blend
    preserves all three defining properties while removing the route
    discontinuity that would otherwise make the field non-integrable along
    trajectories crossing the exceptional set. The constrained route is
    required because the normal lifts alone lose the positivity guarantee at
    generic points; the normal route is required because the constrained
    lift blows up like the reciprocal of the exceptional-set margin.
    """
    label = classify_point(jet, tols)
    if label.case is Case.TRANSVERSE_GENERIC:
        band = tols.blend_band
        rho = max(
            _ramp(label.aug_rank_margin, tols.field_rank,
                  band * tols.field_rank),
            _ramp(label.collinearity_margin, tols.field_collinear,
                  band * tols.field_collinear),
        )
    else:
        rho = 1.0  # collinear and exceptional points use normal lifts outright

    normal_pair: LiftPair | None = None
    con_pair: LiftPair | None = None
    if rho < 1.0:
        try:
            con_pair = lift_pair(
                jet, tols, diagnostics=diagnostics,
                case=replace(label, case=Case.TRANSVERSE_GENERIC),
            )
            if con_pair.case.case is not Case.TRANSVERSE_GENERIC:
                # reclassified inside lift_pair: restricted system inconsistent
                normal_pair, con_pair = con_pair, None
                rho = 1.0
        except FiblabError:
            con_pair = None
            rho = 1.0
    if rho > 0.0 and normal_pair is None:
        # the label stays the honest classification; only the route is forced
        normal_pair = lift_pair(
            jet, tols, diagnostics=diagnostics, case=label, force_normal=True,
        )

    if rho >= 1.0 or con_pair is None:
        w = _field_vector(jet, normal_pair)
        dominant = normal_pair
    elif rho <= 0.0:
        w = _field_vector(jet, con_pair)
        dominant = con_pair
    else:
        w = (1.0 - rho) * _field_vector(jet, con_pair) + rho * _field_vector(
            jet, normal_pair
        )
        dominant = normal_pair if rho >= 0.5 else con_pair

    ip_tube = float(w @ jet.grad_h)
    ip_sphere = float(w @ jet.grad_H)
    residual = pencil_tangent_residual(jet, w)
    wnorm = float(np.linalg.norm(w))
    valid = (
        ip_tube > 0.0
        and ip_sphere > 0.0
        and residual < tols.field_tangency * jet.scale * max(wnorm, 1.0)
    )
    return FieldSample(
        x=jet.x,
        w_tilde=w,
        case=dominant.case,
        ip_tube=ip_tube,
        ip_sphere=ip_sphere,
        tangency_residual=residual,
        lifts=dominant,
        valid=valid,
    )


def nod_scan(
    map: PolynomialMap,
    region: AnnulusSpec,
    sampler: SamplerCfg,
    tols: Tolerances = DEFAULT_TOLERANCES,
) -> NodReport:
    """Sample the annulus and report the minimum cosine between grad_h and
    grad_H, with a witness for any pair within tol of antiparallel."""
    region.validate()
    sampler.validate()

    def one(i: int):
        rng = rng_for(sampler.seed, i, stream=1)
        x = annulus_point(map, region, rng)
        if x is None:
            return None
        j = jet(map, x, floor=region.f_floor)
        gh, gH = j.grad_h, j.grad_H
        cos = float(gh @ gH) / (
            float(np.linalg.norm(gh)) * float(np.linalg.norm(gH))
        )
        return x, cos

    results = [r for r in indexed_map(one, sampler.samples, sampler.threads)
               if r is not None]
    if not results:
        raise InputError(
            "nod_scan produced no usable samples: the annulus "
            f"[{region.eps_min}, {region.eps_max}] lies inside the f-floor zone"
        )
    min_cos = 1.0
    argmin = None
    violations = []
    samples = []
    for x, cos in results:
        samples.append({"x": x.tolist(), "cosine": cos})
        if cos < min_cos:
            min_cos = cos
            argmin = x.tolist()
        if cos < -1.0 + tols.opposite:
            violations.append({"x": x.tolist(), "cosine": cos})
    return NodReport(
        map_name=map.name,
        eps_min=region.eps_min,
        eps_max=region.eps_max,
        f_floor=region.f_floor,
        requested=sampler.samples,
        effective=len(results),
        min_cosine=min_cos,
        argmin=argmin,
        violations=violations,
        tol=tols.opposite,
        samples=samples,
    )


def field_scan(
    map: PolynomialMap,
    region: AnnulusSpec,
    sampler: SamplerCfg,
    tols: Tolerances = DEFAULT_TOLERANCES,
    exclusion=None,
    diagnostics: list | None = None,
) -> list[FieldSample]:
    """Field samples over the annulus, index-deterministic."""
    region.validate()
    sampler.validate()
    collected: list = [] if diagnostics is None else diagnostics

    def one(i: int):
        rng = rng_for(sampler.seed, i, stream=2)
        x = annulus_point(map, region, rng, exclusion=exclusion)
        if x is None:
            return None
        local: list = []
        s = milnor_vector(jet(map, x, floor=region.f_floor), tols, diagnostics=local)
        return s, local

    out: list[FieldSample] = []
    for r in indexed_map(one, sampler.samples, sampler.threads):
        if r is None:
            continue
        s, local = r
        out.append(s)
        collected.extend(local)
    if not out:
        raise InputError("field_scan produced no usable samples")
    return out
