"""Flow of the inflating field: tube-to-sphere transport and the
equivalence evidence it produces.

The field is rescaled to unit radial speed, w_hat = w_tilde * 2||x|| /
<w_tilde, grad_H>, so ||x(t)|| grows at rate exactly 1 and reaching the
sphere becomes a fixed-horizon event. Rescaling by a positive function keeps
the integral-curve images, hence transversality and the constancy of
f/||f|| along curves, unchanged. Integration uses an embedded 4(5)
Runge-Kutta-Fehlberg pair with step rejection; the arrival event is located
by bisection on the final step.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import DEFAULT_TOLERANCES, Exclusion, FlowOpts, SamplerCfg, Tolerances
from .errors import FiblabError, InputError, OnZeroSetError, RefusalError
from .milnorfield import milnor_vector
from .polymap import PolynomialMap, jet
from .regularity import RegularityReport, dreg_scan
from .sampling import rng_for, unit_vector

# Fehlberg 4(5) tableau; the 4th-order solution is propagated and the
# 5th-order difference provides the local error estimate.
_C = (0.0, 1 / 4, 3 / 8, 12 / 13, 1.0, 1 / 2)
_A = (
    (),
    (1 / 4,),
    (3 / 32, 9 / 32),
    (1932 / 2197, -7200 / 2197, 7296 / 2197),
    (439 / 216, -8.0, 3680 / 513, -845 / 4104),
    (-8 / 27, 2.0, -3544 / 2565, 1859 / 4104, -11 / 40),
)
_B4 = (25 / 216, 0.0, 1408 / 2565, 2197 / 4104, -1 / 5, 0.0)
_ERR = (1 / 360, 0.0, -128 / 4275, -2197 / 75240, 1 / 50, 2 / 55)


class _TraceFailure(FiblabError):
    def __init__(self, reason: str, x: np.ndarray):
        self.reason = reason
        self.x = np.asarray(x, dtype=float)
        super().__init__(reason)


def flow_exclusion(exclusion: Exclusion | None, delta: float) -> Exclusion | None:
    """Exclusion with the f-floor lowered below the tube level: the scan
    standoff may exceed delta, but the tube itself must stay admissible and
    integrator stages probe slightly past the event surface."""
    if exclusion is None:
        return None
    return Exclusion(
        directions=exclusion.directions,
        angle=exclusion.angle,
        f_floor=min(exclusion.f_floor, delta / 4.0),
    )


@dataclass
class FlowStep:
    t: float
    x: np.ndarray
    r: float
    fnorm: float
    phi: np.ndarray

    def to_record(self) -> dict:
        return {
            "t": self.t,
            "x": self.x.tolist(),
            "r": self.r,
            "fnorm": self.fnorm,
            "phi": self.phi.tolist(),
        }


@dataclass
class FlowTrace:
    x0: np.ndarray
    direction: str  # "inflate" or "deflate"
    steps: list[FlowStep]
    x_end: np.ndarray | None
    t_end: float
    phi_drift: float
    monotone_r: bool
    monotone_h: bool
    rejected: int
    case_hist: dict[str, int]
    failure: str | None
    field_evals: int
    endpoint_err: float | None

    @property
    def ok(self) -> bool:
        return self.failure is None

    def summary(self) -> dict:
        return {
            "x0": self.x0.tolist(),
            "direction": self.direction,
            "x_end": None if self.x_end is None else self.x_end.tolist(),
            "t_end": self.t_end,
            "accepted_steps": len(self.steps),
            "rejected_steps": self.rejected,
            "phi_drift": self.phi_drift,
            "monotone_r": self.monotone_r,
            "monotone_h": self.monotone_h,
            "case_hist": self.case_hist,
            "failure": self.failure,
            "field_evals": self.field_evals,
            "endpoint_err": self.endpoint_err,
        }

    def step_records(self) -> list[dict]:
        return [s.to_record() for s in self.steps]


@dataclass
class EquivalenceReport:
    map_name: str | None
    epsilon: float
    delta: float
    requested_seeds: int
    seeded: int
    seed_failures: int
    traces: list[dict]
    pairs: list[dict]
    max_phi_drift: float
    failures: list[dict]
    roundtrip_max: float | None
    verdict: str
    drift_tol: float
    forward_traces: list[FlowTrace] = field(default_factory=list, repr=False)

    def to_record(self) -> dict:
        return {
            "map": self.map_name,
            "epsilon": self.epsilon,
            "delta": self.delta,
            "requested_seeds": self.requested_seeds,
            "seeded": self.seeded,
            "seed_failures": self.seed_failures,
            "traces": self.traces,
            "pairs": self.pairs,
            "max_phi_drift": self.max_phi_drift,
            "failures": self.failures,
            "roundtrip_max": self.roundtrip_max,
            "verdict": self.verdict,
            "drift_tol": self.drift_tol,
        }


class _Field:
    """Unit-radial-speed field evaluator with failure propagation.

    Only the f-floor is enforced here (the field must be defined at RK stage
    points); the angular discriminant standoff is checked on accepted points
    by the integrator, since stage points are scaffolding off the curve.
    """

    def __init__(self, map: PolynomialMap, tols: Tolerances,
                 f_floor: float, sign: float):
        self.map = map
        self.tols = tols
        self.f_floor = f_floor
        self.sign = sign
        self.evals = 0
        self.last_case: str | None = None

    def __call__(self, x: np.ndarray) -> np.ndarray:
        self.evals += 1
        try:
            j = jet(self.map, x, floor=self.f_floor)
        except OnZeroSetError as e:
            raise _TraceFailure("on zero set", x) from e
        sample = milnor_vector(j, self.tols)
        self.last_case = sample.case.case.value
        if sample.ip_sphere <= 0.0 or sample.ip_tube <= 0.0:
            raise _TraceFailure("transversality lost", x)
        return self.sign * sample.w_tilde * (2.0 * j.norm_x / sample.ip_sphere)


def _rk_step(f, x: np.ndarray, h: float, k1: np.ndarray):
    """One Fehlberg step. Returns (4th-order endpoint, error estimate)."""
    k = [k1]
    for s in range(1, 6):
        xs = x + h * sum(a * ks for a, ks in zip(_A[s], k))
        k.append(f(xs))
    x4 = x + h * sum(b * ks for b, ks in zip(_B4, k))
    err = h * sum(e * ks for e, ks in zip(_ERR, k))
    return x4, err


def _fixed_step(f, x: np.ndarray, h: float, k1: np.ndarray) -> np.ndarray:
    return _rk_step(f, x, h, k1)[0]


def integrate(
    map: PolynomialMap,
    x0,
    eps: float,
    opts: FlowOpts = FlowOpts(),
    tols: Tolerances = DEFAULT_TOLERANCES,
    exclusion: Exclusion | None = None,
    f_floor: float = 1e-6,
    direction: str = "inflate",
    target_fnorm: float | None = None,
) -> FlowTrace:
    """Integrate the field from x0 until the event surface.

    direction "inflate": forward flow, event ||x|| = eps (seed inside the
    sphere). direction "deflate": reversed flow, event ||f(x)|| =
    target_fnorm (round-trip diagnostics).
    """
    opts.validate()
    x0 = np.asarray(x0, dtype=float)
    if direction not in ("inflate", "deflate"):
        raise InputError(f"direction must be 'inflate' or 'deflate', got {direction}")
    if direction == "deflate" and target_fnorm is None:
        raise InputError("deflate direction needs target_fnorm")

    sign = 1.0 if direction == "inflate" else -1.0
    field = _Field(map, tols, f_floor, sign)

    def gap(x: np.ndarray) -> float:
        # positive before the event, crosses zero at it
        if direction == "inflate":
            return eps - float(np.linalg.norm(x))
        return float(np.linalg.norm(map.eval(x))) - float(target_fnorm)

    r0 = float(np.linalg.norm(x0))
    if direction == "inflate" and r0 >= eps:
        raise InputError(f"seed has ||x0|| = {r0} >= epsilon = {eps}")

    steps: list[FlowStep] = []
    case_hist: dict[str, int] = {}
    rejected = 0
    failure: str | None = None
    x_end: np.ndarray | None = None
    endpoint_err: float | None = None

    def record(t: float, x: np.ndarray) -> None:
        fx = map.eval(x)
        fn = float(np.linalg.norm(fx))
        phi = fx / fn if fn > 0 else fx
        steps.append(FlowStep(t=t, x=x.copy(), r=float(np.linalg.norm(x)),
                              fnorm=fn, phi=phi))
        if exclusion is not None and not exclusion.allows(fx):
            raise _TraceFailure("discriminant proximity", x)

    t = 0.0
    x = x0.copy()
    h = opts.h0 if opts.h0 is not None else max(gap(x0), 1e-6) / 50.0
    rate = 1.0 if direction == "inflate" else None  # unit radial speed forward
    just_rejected = False
    try:
        record(0.0, x)
        k1 = field(x)
        if field.last_case:
            case_hist[field.last_case] = case_hist.get(field.last_case, 0) + 1
        for _ in range(opts.max_steps):
            if h < 1e-15 * max(1.0, abs(t)):
                raise _TraceFailure("no convergence", x)
            gap_now = gap(x)
            # keep stages near the event surface: overshoot at most ~25%
            h_try = h
            if rate is not None and rate > 0:
                h_try = min(h_try, 1.25 * gap_now / rate + opts.event_tol)
            try:
                x_new, err = _rk_step(field, x, h_try, k1)
            except _TraceFailure:
                # a stage point left the admissible region: shrink and retry
                rejected += 1
                just_rejected = True
                h = h_try * 0.25
                continue
            scale = opts.atol + opts.rtol * np.maximum(np.abs(x), np.abs(x_new))
            ratio = float(np.sqrt(np.mean((err / scale) ** 2)))
            if ratio > 1.0:
                rejected += 1
                just_rejected = True
                h = h_try * max(0.2, 0.9 * ratio ** -0.2)
                continue
            gap_new = gap(x_new)
            if h_try > 0 and gap_now > gap_new:
                rate = (gap_now - gap_new) / h_try
            if gap_new <= 0.0:
                # bisection on the substep length localizes the event
                lo, hi = 0.0, h_try
                x_hit = x_new
                for _ in range(200):
                    mid = 0.5 * (lo + hi)
                    try:
                        x_mid = _fixed_step(field, x, mid, k1)
                    except _TraceFailure:
                        hi = mid  # probe left the region: event is closer
                        continue
                    g = gap(x_mid)
                    if abs(g) <= opts.event_tol:
                        x_hit, hi = x_mid, mid
                        break
                    if g > 0.0:
                        lo = mid
                    else:
                        hi, x_hit = mid, x_mid
                else:
                    x_hit = _fixed_step(field, x, hi, k1)
                t += hi
                record(t, x_hit)
                x_end = x_hit
                endpoint_err = abs(gap(x_hit))
                break
            t += h_try
            x = x_new
            record(t, x)
            k1 = field(x)
            if field.last_case:
                case_hist[field.last_case] = case_hist.get(field.last_case, 0) + 1
            if ratio > 0:
                grow = 0.9 * ratio ** -0.2
                if just_rejected:
                    grow = min(grow, 1.0)
                h = h_try * min(4.0, max(0.2, grow))
            else:
                h = h_try * (1.0 if just_rejected else 4.0)
            just_rejected = False
        else:
            raise _TraceFailure("no convergence", x)
    except _TraceFailure as e:
        failure = e.reason

    phis = [s.phi for s in steps]
    drift = 0.0
    if phis:
        p0 = phis[0]
        drift = max(float(np.linalg.norm(p - p0)) for p in phis)
    rs = [s.r for s in steps]
    fns = [s.fnorm for s in steps]
    increasing = sign > 0
    mono_r = all(
        (b > a) if increasing else (b < a) for a, b in zip(rs, rs[1:])
    )
    mono_h = all(
        (b > a) if increasing else (b < a) for a, b in zip(fns, fns[1:])
    )
    if failure is None and x_end is None:
        failure = "no convergence"
    return FlowTrace(
        x0=x0,
        direction=direction,
        steps=steps if opts.record_steps else steps[:1] + steps[-1:],
        x_end=x_end,
        t_end=t,
        phi_drift=drift,
        monotone_r=mono_r,
        monotone_h=mono_h,
        rejected=rejected,
        case_hist=case_hist,
        failure=failure,
        field_evals=field.evals,
        endpoint_err=endpoint_err,
    )


def tube_seed(
    map: PolynomialMap,
    eps: float,
    delta: float,
    rng: np.random.Generator,
    exclusion: Exclusion | None = None,
    f_floor: float = 1e-6,
    attempts: int = 25,
) -> np.ndarray | None:
    """Newton-project random ball points onto the tube {||f(x)|| = delta}."""
    for _ in range(attempts):
        x = 0.85 * eps * rng.uniform(0.1, 1.0) * unit_vector(rng, map.n)
        ok = True
        for _ in range(60):
            fx = map.eval(x)
            fn2 = float(fx @ fx)
            g = fn2 - delta * delta
            if abs(g) <= 1e-13 * delta * delta:
                break
            grad = 2.0 * (map.jacobian(x).T @ fx)
            gn2 = float(grad @ grad)
            if gn2 < 1e-30:
                ok = False
                break
            x = x - (g / gn2) * grad
        else:
            ok = False
        if not ok:
            continue
        fx = map.eval(x)
        fn = float(np.linalg.norm(fx))
        if abs(fn - delta) > 1e-9 * max(delta, 1.0):
            continue
        if float(np.linalg.norm(x)) >= 0.95 * eps:
            continue
        if fn <= f_floor:
            continue
        if exclusion is not None and not exclusion.allows(fx):
            continue
        return x
    return None


def inflate_tube(
    map: PolynomialMap,
    eps: float,
    delta: float,
    seeds: int = 100,
    seed: int = 0,
    opts: FlowOpts = FlowOpts(),
    tols: Tolerances = DEFAULT_TOLERANCES,
    exclusion: Exclusion | None = None,
    f_floor: float = 1e-6,
    dreg_report: RegularityReport | None = None,
    dreg_sampler: SamplerCfg | None = None,
    roundtrip: bool = True,
) -> EquivalenceReport:
    """Flow every tube seed to the sphere and report the equivalence evidence.

    Refuses (with the witness) when the map does not pass the d-regularity
    scan at eps. Phi-constancy along each trace is the commuting-triangle
    statement for the two fibrations at sample resolution.
    """
    if not 0 < delta <= eps / 10.0:
        raise InputError(
            f"delta must satisfy 0 < delta <= epsilon/10 = {eps / 10}, got {delta}"
        )
    if dreg_report is None:
        dreg_report = dreg_scan(
            map, eps,
            dreg_sampler if dreg_sampler is not None else SamplerCfg(samples=2000, seed=seed),
            tols, exclusion=exclusion, f_floor=max(f_floor, 1e-4),
        )
    if dreg_report.verdict != "pass":
        raise RefusalError(
            f"map is not d-regular at epsilon = {eps} "
            f"(verdict {dreg_report.verdict}, adversarial minimum "
            f"{dreg_report.adversarial_min:.3e})",
            report=dreg_report,
            witness=dreg_report.witnesses[0] if dreg_report.witnesses else
            {"x": dreg_report.adversarial_argmin, "margin": dreg_report.adversarial_min},
        )

    exclusion = flow_exclusion(exclusion, delta)
    traces: list[dict] = []
    pairs: list[dict] = []
    failures: list[dict] = []
    forward_traces: list[FlowTrace] = []
    seeded = 0
    seed_failures = 0
    roundtrip_max: float | None = 0.0 if roundtrip else None

    for i in range(seeds):
        rng = rng_for(seed, i, stream=5)
        x0 = tube_seed(map, eps, delta, rng, exclusion=exclusion, f_floor=f_floor)
        if x0 is None:
            seed_failures += 1
            continue
        seeded += 1
        tr = integrate(
            map, x0, eps, opts, tols, exclusion=exclusion,
            f_floor=f_floor, direction="inflate",
        )
        forward_traces.append(tr)
        summary = tr.summary()
        if tr.ok and roundtrip:
            back = integrate(
                map, tr.x_end, eps, opts, tols, exclusion=exclusion,
                f_floor=f_floor, direction="deflate", target_fnorm=delta,
            )
            if back.ok:
                err = float(np.linalg.norm(back.x_end - x0))
                summary["roundtrip_err"] = err
                roundtrip_max = max(roundtrip_max, err)
            else:
                summary["roundtrip_err"] = None
                failures.append({"seed_index": i, "reason": f"roundtrip: {back.failure}"})
        traces.append(summary)
        if tr.ok:
            pairs.append({"x0": x0.tolist(), "tau": tr.x_end.tolist()})
            if not (tr.monotone_r and tr.monotone_h):
                failures.append({"seed_index": i, "reason": "monotonicity lost"})
        else:
            failures.append({"seed_index": i, "reason": tr.failure})

    if seeds > 0 and seed_failures > seeds / 2:
        raise InputError(
            f"tube unreachable: {seed_failures}/{seeds} seed projections failed"
        )

    max_drift = max((t["phi_drift"] for t in traces), default=0.0)
    verdict = "pass" if (not failures and max_drift < tols.drift and seeded > 0) else "fail"
    return EquivalenceReport(
        map_name=map.name,
        epsilon=eps,
        delta=delta,
        requested_seeds=seeds,
        seeded=seeded,
        seed_failures=seed_failures,
        traces=traces,
        pairs=pairs,
        max_phi_drift=max_drift,
        failures=failures,
        roundtrip_max=roundtrip_max,
        verdict=verdict,
        drift_tol=tols.drift,
        forward_traces=forward_traces,
    )
