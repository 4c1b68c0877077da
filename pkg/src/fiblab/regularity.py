"""d-regularity verification by sampled margins and adversarial minimization.

The primary margin is the normalized smallest singular value of the
spherefication differential (submersion criterion); the cross-check margin is
the normalized (p-1)-th singular value of the direction map f/||f||
restricted to the tangent space of the sphere through the point. The two
vanish together, which the scan verifies sample by sample.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import DEFAULT_TOLERANCES, Exclusion, SamplerCfg, Tolerances
from .errors import CriticalPointError, InputError
from .optimize import multi_start, sphere_projector
from .polymap import Jet, PolynomialMap, jet
from .sampling import indexed_map, log_uniform_radius, rng_for, unit_vector

_EXACT_ZERO = 1e-10  # margin level treated as an exact rank collapse


@dataclass
class RegularityReport:
    map_name: str | None
    epsilon: float
    samples: int
    effective: int
    margin_min: float
    margin_p1: float
    margin_median: float
    adversarial_min: float
    adversarial_argmin: list[float] | None
    verdict: str
    witnesses: list[dict]
    pass_threshold: float
    fail_threshold: float
    cd_disagreements: int
    seed: int
    sample_records: list[dict]

    def to_record(self, include_samples: bool = False) -> dict:
        doc = {
            "map": self.map_name,
            "epsilon": self.epsilon,
            "requested_samples": self.samples,
            "effective_samples": self.effective,
            "margin_min": self.margin_min,
            "margin_p1": self.margin_p1,
            "margin_median": self.margin_median,
            "adversarial_min": self.adversarial_min,
            "adversarial_argmin": self.adversarial_argmin,
            "verdict": self.verdict,
            "witnesses": self.witnesses,
            "pass_threshold": self.pass_threshold,
            "fail_threshold": self.fail_threshold,
            "cd_disagreements": self.cd_disagreements,
            "seed": self.seed,
        }
        if include_samples:
            doc["samples"] = self.sample_records
        return doc

    def csv_rows(self) -> list[tuple]:
        return [(r["radius"], r["margin"]) for r in self.sample_records]


def dreg_margins(jet: Jet) -> tuple[float, float]:
    """(submersion margin of the spherefication, restricted direction-map
    margin). Both lie in [0, 1] and vanish together."""
    s = np.linalg.svd(jet.DF, compute_uv=False)
    margin_c = float(s[-1] / s[0]) if s[0] > 0 else 0.0

    # direction map differential restricted to the tangent space of the sphere
    dphi = jet.J / jet.norm_f - np.outer(jet.fx, jet.J.T @ jet.fx) / jet.norm_f**3
    _, _, Vt = np.linalg.svd(jet.x[None, :], full_matrices=True)
    B = Vt[1:].T  # orthonormal basis of the tangent space at x
    A = dphi @ B
    sd = np.linalg.svd(A, compute_uv=False)
    if sd[0] > 0 and jet.p - 2 < sd.size:
        margin_d = float(sd[jet.p - 2] / sd[0])
    else:
        margin_d = 0.0
    return margin_c, margin_d


def dreg_margin(jet: Jet) -> float:
    """Normalized smallest singular value of the spherefication differential."""
    return dreg_margins(jet)[0]


def fiber_sphere_transversality_at(
    map: PolynomialMap, x, eps: float, tols: Tolerances = DEFAULT_TOLERANCES
) -> float:
    """Margin for the fibre of f through x meeting the sphere of radius eps
    transversely at x: the normalized projection of x onto ker Df.

    Works at points of V too (the fibre there is the zero set itself), which
    is why this variant takes the map and point rather than a jet.
    """
    if map.n <= map.p:
        raise InputError(
            "fiber transversality needs n > p; fibres are points when n = p"
        )
    x = np.asarray(x, dtype=float).reshape(-1)
    norm_x = float(np.linalg.norm(x))
    if abs(norm_x - eps) > 1e-9 * max(1.0, eps):
        raise InputError(
            f"point has ||x|| = {norm_x!r}, expected the sphere radius {eps!r}"
        )
    J = map.jacobian(x)
    _, s, Vt = np.linalg.svd(J, full_matrices=True)
    if s[-1] <= tols.rank * s[0]:
        raise CriticalPointError(x, float(s[-1]), float(s[0]))
    kernel = Vt[map.p:]  # rows span ker Df
    proj = kernel @ x
    return float(np.linalg.norm(proj) / norm_x)


def fiber_sphere_transversality(
    jet: Jet, eps: float, tols: Tolerances = DEFAULT_TOLERANCES,
    map: PolynomialMap | None = None,
) -> float:
    """Jet-based entry point for points off V; see
    fiber_sphere_transversality_at for the general version."""
    if jet.n <= jet.p:
        raise InputError(
            "fiber transversality needs n > p; fibres are points when n = p"
        )
    if abs(jet.norm_x - eps) > 1e-9 * max(1.0, eps):
        raise InputError(
            f"point has ||x|| = {jet.norm_x!r}, expected the sphere radius {eps!r}"
        )
    _, s, Vt = np.linalg.svd(jet.J, full_matrices=True)
    if s[-1] <= tols.rank * s[0]:
        raise CriticalPointError(jet.x, float(s[-1]), float(s[0]))
    kernel = Vt[jet.p:]  # rows span ker Df
    proj = kernel @ jet.x
    return float(np.linalg.norm(proj) / jet.norm_x)


def _feasible(map: PolynomialMap, f_floor: float, exclusion: Exclusion | None):
    def ok(x: np.ndarray) -> bool:
        fx = map.eval(x)
        if float(np.linalg.norm(fx)) <= f_floor:
            return False
        return exclusion is None or exclusion.allows(fx)

    return ok


def dreg_scan(
    map: PolynomialMap,
    eps: float,
    sampler: SamplerCfg,
    tols: Tolerances = DEFAULT_TOLERANCES,
    exclusion: Exclusion | None = None,
    f_floor: float = 1e-3,
) -> RegularityReport:
    """Margin statistics over spheres of radii in (eps/100, eps] plus an
    adversarial minimization restarted from the worst samples."""
    if eps <= 0:
        raise InputError(f"epsilon must be positive, got {eps}")
    sampler.validate()
    floor = exclusion.f_floor if exclusion is not None else f_floor

    def one(i: int):
        rng = rng_for(sampler.seed, i, stream=3)
        for _ in range(200):
            r = log_uniform_radius(rng, eps)
            x = r * unit_vector(rng, map.n)
            fx = map.eval(x)
            if float(np.linalg.norm(fx)) <= floor:
                continue
            if exclusion is not None and not exclusion.allows(fx):
                continue
            c, d = dreg_margins(jet(map, x, floor=floor))
            return x, r, c, d
        return None

    raw = [r for r in indexed_map(one, sampler.samples, sampler.threads)
           if r is not None]
    if not raw:
        raise InputError(
            "dreg_scan found no admissible samples: every draw fell inside "
            "the f-floor or exclusion zone"
        )

    margins = np.array([c for _, _, c, _ in raw])
    records = [
        {"x": x.tolist(), "radius": r, "margin": c, "margin_direction": d}
        for x, r, c, d in raw
    ]
    cd_disagree = sum(
        1 for _, _, c, d in raw if (c < _EXACT_ZERO) != (d < _EXACT_ZERO)
    )

    feasible = _feasible(map, floor, exclusion)

    def objective(x: np.ndarray) -> float:
        try:
            return dreg_margins(jet(map, x, floor=floor))[0]
        except Exception:
            return float("inf")

    target = tols.fail_margin * 1e-3
    order = np.argsort(margins, kind="stable")
    adversarial_min = float(margins.min())
    adversarial_argmin = raw[int(order[0])][0].tolist()

    def run_phase(starts, feas):
        nonlocal adversarial_min, adversarial_argmin
        if not starts:
            return
        best, _ = multi_start(
            objective,
            starts,
            project_for=lambda s: sphere_projector(float(np.linalg.norm(s))),
            feasible=feas,
            max_iter=sampler.descent_iters,
            trial_step=0.25 * eps,
            target=target,
        )
        if best.value < adversarial_min:
            adversarial_min = float(best.value)
            adversarial_argmin = best.x.tolist()

    n_wide = sampler.restarts // 2 if (
        exclusion is not None and exclusion.directions
    ) else 0
    n_true = sampler.restarts - n_wide
    run_phase([raw[int(k)][0] for k in order[:n_true]], feasible)

    if n_wide and adversarial_min > target:
        # Margins also vanish toward the excluded discriminant preimage, and
        # that boundary basin can swallow every restart. A second phase with
        # an inflated standoff hunts interior rank collapses; its feasible
        # set is a subset of the true one, so anything it finds is a witness.
        widened = Exclusion(
            directions=exclusion.directions,
            angle=min(5.0 * exclusion.angle, exclusion.angle + 0.25),
            f_floor=exclusion.f_floor,
        )
        wide_ok = [
            int(k) for k in order if widened.allows(map.eval(raw[int(k)][0]))
        ]
        # stratify by radius octave so small-sphere basins do not dominate
        chosen: list[int] = []
        seen_octaves: set[int] = set()
        for k in wide_ok:
            r = raw[int(k)][1]
            octave = int(np.floor(np.log2(max(r, 1e-300))))
            if octave not in seen_octaves:
                chosen.append(int(k))
                seen_octaves.add(octave)
            if len(chosen) >= n_wide:
                break
        for k in wide_ok:
            if len(chosen) >= n_wide:
                break
            if int(k) not in chosen:
                chosen.append(int(k))
        run_phase(
            [raw[k][0] for k in chosen],
            _feasible(map, floor, widened),
        )

    witnesses = [
        {"x": rec["x"], "margin": rec["margin"]}
        for rec in records
        if rec["margin"] < tols.fail_margin
    ]
    if adversarial_min < tols.fail_margin:
        witnesses.append({"x": adversarial_argmin, "margin": adversarial_min})

    if witnesses:
        verdict = "fail"
    elif adversarial_min > tols.pass_margin:
        verdict = "pass"
    else:
        verdict = "inconclusive"

    return RegularityReport(
        map_name=map.name,
        epsilon=eps,
        samples=sampler.samples,
        effective=len(raw),
        margin_min=float(margins.min()),
        margin_p1=float(np.percentile(margins, 1.0)),
        margin_median=float(np.median(margins)),
        adversarial_min=adversarial_min,
        adversarial_argmin=adversarial_argmin,
        verdict=verdict,
        witnesses=witnesses,
        pass_threshold=tols.pass_margin,
        fail_threshold=tols.fail_margin,
        cd_disagreements=cd_disagree,
        seed=sampler.seed,
        sample_records=records,
    )
