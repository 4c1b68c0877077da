"""Critical set and discriminant sampling, ray clustering, and the
linearity (cone) verdict that justifies removing fixed directions from the
fibration bases.

The discriminant is sampled, never computed symbolically: critical points are
found by multi-start minimization of the normalized smallest singular value
of Df, pushed through f, and their directions clustered per radius shell. A
"linear" verdict means the direction clusters agree across shells, i.e. the
sampled discriminant looks like a cone of rays from the origin.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import DEFAULT_TOLERANCES, Exclusion, SamplerCfg, Tolerances
from .errors import InputError
from .optimize import ball_projector, descend
from .polymap import PolynomialMap
from .sampling import rng_for

CLUSTER_ANGLE = 1e-3  # radians; greedy agglomeration threshold
_IMAGE_FLOOR = 1e-12  # image norms below this are the critical value 0 itself


@dataclass
class RayCluster:
    direction: np.ndarray
    count: int
    spread: float  # max angle of a member to the representative direction

    def to_record(self) -> dict:
        return {
            "direction": self.direction.tolist(),
            "count": self.count,
            "spread": self.spread,
        }


@dataclass
class DiscriminantReport:
    map_name: str | None
    ball_radius: float
    critical_samples: list[dict] = field(default_factory=list)
    image_samples: list[dict] = field(default_factory=list)
    clusters: list[RayCluster] = field(default_factory=list)
    shells: list[dict] = field(default_factory=list)
    linear_per_radius: list[dict] = field(default_factory=list)
    verdict: str | None = None
    eta: float | None = None
    A_directions: list[list[float]] | None = None
    rank_tol: float = 1e-8
    seed: int = 0

    def to_record(self) -> dict:
        return {
            "map": self.map_name,
            "ball_radius": self.ball_radius,
            "critical_samples": self.critical_samples,
            "image_samples": self.image_samples,
            "clusters": [c.to_record() for c in self.clusters],
            "shells": self.shells,
            "linear_per_radius": self.linear_per_radius,
            "verdict": self.verdict,
            "eta": self.eta,
            "A_directions": self.A_directions,
            "rank_tol": self.rank_tol,
            "seed": self.seed,
        }

    def csv_rows(self) -> list[tuple]:
        rows = []
        for rec in self.image_samples:
            rows.append((rec["norm"], *rec["direction"], rec.get("cluster", -1)))
        return rows


def critical_margin(map: PolynomialMap, x) -> float:
    """Normalized smallest singular value of Df at x (defined on V too).

    Returns 0.0 for a totally degenerate (zero) Jacobian.
    """
    J = map.jacobian(x)
    s = np.linalg.svd(J, compute_uv=False)
    if s[0] == 0.0:
        return 0.0
    return float(s[-1] / s[0])


def _angle(u: np.ndarray, v: np.ndarray) -> float:
    return float(np.arccos(np.clip(float(u @ v), -1.0, 1.0)))


def _greedy_clusters(directions: list[np.ndarray]) -> tuple[list[RayCluster], list[int]]:
    """Deterministic agglomeration in sample-index order. Representatives end
    up pairwise at least CLUSTER_ANGLE apart."""
    clusters: list[RayCluster] = []
    assignment: list[int] = []
    for u in directions:
        placed = -1
        for ci, c in enumerate(clusters):
            a = _angle(u, c.direction)
            if a < CLUSTER_ANGLE:
                c.count += 1
                c.spread = max(c.spread, a)
                placed = ci
                break
        if placed < 0:
            clusters.append(RayCluster(direction=u.copy(), count=1, spread=0.0))
            placed = len(clusters) - 1
        assignment.append(placed)
    return clusters, assignment


def sample_discriminant(
    map: PolynomialMap,
    ball_radius: float,
    sampler: SamplerCfg,
    tols: Tolerances = DEFAULT_TOLERANCES,
) -> DiscriminantReport:
    """Locate critical points in the ball by multi-start descent on the
    critical margin and push them through f. An empty result is the
    isolated-critical-value regime, not an error."""
    if ball_radius <= 0:
        raise InputError(f"ball radius must be positive, got {ball_radius}")
    sampler.validate()

    def objective(x: np.ndarray) -> float:
        return critical_margin(map, x)

    n_starts = max(sampler.restarts * 4, 16)
    starts = []
    for i in range(n_starts):
        rng = rng_for(sampler.seed, i, stream=4)
        v = rng.standard_normal(map.n)
        norm = float(np.linalg.norm(v))
        r = ball_radius * rng.uniform(0.05, 1.0)
        starts.append((r / norm) * v)

    report = DiscriminantReport(
        map_name=map.name,
        ball_radius=ball_radius,
        rank_tol=tols.rank,
        seed=sampler.seed,
    )
    project = ball_projector(ball_radius)
    for s in starts:
        res = descend(
            objective, s, project,
            max_iter=sampler.descent_iters,
            trial_step=0.25 * ball_radius,
            target=tols.rank * 1e-4,
        )
        if res.value < tols.rank:
            x = res.x
            u = map.eval(x)
            report.critical_samples.append(
                {"x": x.tolist(), "margin": float(res.value)}
            )
            norm_u = float(np.linalg.norm(u))
            rec = {"u": u.tolist(), "norm": norm_u}
            if norm_u > _IMAGE_FLOOR:
                rec["direction"] = (u / norm_u).tolist()
            report.image_samples.append(rec)

    directed = [
        np.asarray(rec["direction"])
        for rec in report.image_samples
        if "direction" in rec
    ]
    clusters, assignment = _greedy_clusters(directed)
    report.clusters = clusters
    di = 0
    for rec in report.image_samples:
        if "direction" in rec:
            rec["cluster"] = assignment[di]
            di += 1
        else:
            rec["cluster"] = -1
    return report


def _shell_cluster_sets(report: DiscriminantReport, radii: list[float]):
    """Assign image samples to the nearest tested radius (log scale) and
    cluster directions per shell."""
    shells: list[list[np.ndarray]] = [[] for _ in radii]
    log_r = np.log(np.asarray(radii, dtype=float))
    for rec in report.image_samples:
        if "direction" not in rec or rec["norm"] <= _IMAGE_FLOOR:
            continue
        k = int(np.argmin(np.abs(np.log(rec["norm"]) - log_r)))
        shells[k].append(np.asarray(rec["direction"], dtype=float))
    out = []
    for r, dirs in zip(radii, shells):
        clusters, _ = _greedy_clusters(dirs)
        out.append((float(r), clusters))
    return out


def _sets_agree(a: list[RayCluster], b: list[RayCluster]) -> bool:
    if len(a) != len(b):
        return False
    used = [False] * len(b)
    for ca in a:
        hit = False
        for k, cb in enumerate(b):
            if not used[k] and _angle(ca.direction, cb.direction) < CLUSTER_ANGLE:
                used[k] = True
                hit = True
                break
        if not hit:
            return False
    return True


def linearity_check(
    report: DiscriminantReport,
    radii: list[float],
    tols: Tolerances = DEFAULT_TOLERANCES,
) -> DiscriminantReport:
    """Complete the report with per-shell clusters, the cone verdict, the
    linearity radius eta, and the agreed direction set."""
    if len(radii) < 2:
        raise InputError("linearity_check needs at least 2 tested radii")
    radii = sorted(float(r) for r in radii)
    if radii[0] <= 0:
        raise InputError("tested radii must be positive")

    per_shell = _shell_cluster_sets(report, radii)
    report.shells = [
        {
            "radius": r,
            "directions": [c.direction.tolist() for c in clusters],
            "counts": [c.count for c in clusters],
        }
        for r, clusters in per_shell
    ]

    nonempty = [(r, cs) for r, cs in per_shell if cs]
    if not nonempty:
        report.verdict = "linear"
        report.eta = radii[-1]
        report.A_directions = []
        report.linear_per_radius = [
            {"radius": r, "agrees": True} for r, _ in per_shell
        ]
        return report

    reference = nonempty[0][1]
    report.linear_per_radius = []
    eta = None
    all_agree = True
    for r, clusters in per_shell:
        agrees = (not clusters) or _sets_agree(reference, clusters)
        report.linear_per_radius.append({"radius": r, "agrees": agrees})
        if agrees and all_agree:
            eta = r
        if not agrees:
            all_agree = False

    report.verdict = "linear" if all_agree else "non-linear"
    report.eta = eta
    report.A_directions = [c.direction.tolist() for c in reference]
    return report


def exclusion_from_report(
    report: DiscriminantReport, angle: float = 0.05, f_floor: float = 1e-3
) -> Exclusion:
    """Standoff zone around the sampled discriminant directions."""
    dirs = tuple(
        tuple(d) for d in (report.A_directions or [])
    )
    return Exclusion(directions=dirs, angle=angle, f_floor=f_floor)
