"""Gradient lifting machinery.

Both f and its spherefication pull the radial field y -> 2y of the target
back to R^n. The normal lift solves Df(w) = 2 f(x) for the unique w
orthogonal to ker Df (the minimal-norm solution); the constrained lift
solves the same contract with the non-gradient part confined to the
codimension-2 intersection of the tube and the sphere through x. Points are
classified by the relative position of the two gradients grad_h and grad_H,
with the exceptional set M(f) detected as rank loss of the augmented
differential d(f, ||.||^2).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import NamedTuple

import numpy as np

from .config import Tolerances, DEFAULT_TOLERANCES
from .errors import (
    CriticalPointError,
    DRegularityError,
    InputError,
    MuUndefinedError,
    SubcaseError,
)
from .polymap import Jet


class Case(str, Enum):
    COLLINEAR = "collinear"
    TRANSVERSE_GENERIC = "transverse-generic"
    EXCEPTIONAL_MF = "exceptional-Mf"


@dataclass(frozen=True)
class CaseLabel:
    """Classification outcome with the margins that decided it."""

    case: Case
    cos_angle: float          # cos of the angle between grad_h and grad_H
    sigma_min_aug: float      # sigma_{p+1} of the augmented differential
    sigma_max_aug: float
    sigma_min_J: float        # sigma_p of Df
    sigma_max_J: float

    @property
    def collinearity_margin(self) -> float:
        return 1.0 - abs(self.cos_angle)

    @property
    def aug_rank_margin(self) -> float:
        if self.sigma_max_aug == 0.0:
            return 0.0
        return self.sigma_min_aug / self.sigma_max_aug

    def to_record(self) -> dict:
        return {
            "case": self.case.value,
            "cos_angle": self.cos_angle,
            "sigma_min_aug": self.sigma_min_aug,
            "sigma_max_aug": self.sigma_max_aug,
            "sigma_min_J": self.sigma_min_J,
            "sigma_max_J": self.sigma_max_J,
        }


class Lift(NamedTuple):
    """A lift w = v + coeff * gradient with its defining-contract pieces."""

    w: np.ndarray
    v: np.ndarray
    coeff: float


@dataclass(frozen=True)
class LiftPair:
    """The two lifts at one point, with contract residuals and, when the
    lifts are collinear, the ratio mu with w_F = mu * w_f."""

    w_f: np.ndarray
    v_f: np.ndarray
    alpha: float
    w_F: np.ndarray
    v_F: np.ndarray
    beta: float
    case: CaseLabel
    mu: float | None
    residual_f: float
    residual_F: float

    def to_record(self) -> dict:
        return {
            "w_f": self.w_f.tolist(),
            "v_f": self.v_f.tolist(),
            "alpha": self.alpha,
            "w_F": self.w_F.tolist(),
            "v_F": self.v_F.tolist(),
            "beta": self.beta,
            "case": self.case.to_record(),
            "mu": self.mu,
            "residual_f": self.residual_f,
            "residual_F": self.residual_F,
        }


def opposite_directions(u, v, tol: float) -> bool:
    """True when the angle between u and v is within tol of pi, measured as
    cos < -1 + tol. Zero vectors are rejected."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    nu = float(np.linalg.norm(u))
    nv = float(np.linalg.norm(v))
    if nu == 0.0 or nv == 0.0:
        raise InputError("opposite_directions requires nonzero vectors")
    cos = float(u @ v) / (nu * nv)
    return cos < -1.0 + tol


def _min_norm_solve(A: np.ndarray, b: np.ndarray, rank_tol: float):
    """Minimal-norm solution of A w = b via SVD with relative rank cutoff.

    Returns (w, sigma, refined residual). One refinement pass keeps the
    contract residual near machine precision even for poorly scaled A.
    """
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    cutoff = rank_tol * s[0] if s.size and s[0] > 0 else 0.0
    inv = np.where(s > cutoff, 1.0 / np.where(s > cutoff, s, 1.0), 0.0)

    def apply_pinv(r: np.ndarray) -> np.ndarray:
        return Vt.T @ (inv * (U.T @ r))

    w = apply_pinv(b)
    w = w + apply_pinv(b - A @ w)
    residual = float(np.linalg.norm(A @ w - b))
    return w, s, residual


def normal_lift_f(
    jet: Jet, tols: Tolerances = DEFAULT_TOLERANCES
) -> tuple[Lift, float]:
    """Normal lift of the target radial field through f.

    Returns (lift, residual): w_f solves Df(w) = 2 f(x) with w_f orthogonal
    to ker Df; alpha is the gradient coefficient and v_f = w_f - alpha grad_h
    the tangential remainder.
    """
    w, s, residual = _min_norm_solve(jet.J, 2.0 * jet.fx, tols.rank)
    if s[-1] <= tols.rank * s[0]:
        raise CriticalPointError(jet.x, float(s[-1]), float(s[0]))
    gh2 = float(jet.grad_h @ jet.grad_h)
    alpha = float(w @ jet.grad_h) / gh2
    v = w - alpha * jet.grad_h
    return Lift(w=w, v=v, coeff=alpha), residual


def normal_lift_F(
    jet: Jet, tols: Tolerances = DEFAULT_TOLERANCES
) -> tuple[Lift, float]:
    """Normal lift through the spherefication; rank loss here is exactly a
    d-regularity failure and raises a witness-carrying error."""
    w, s, residual = _min_norm_solve(jet.DF, 2.0 * jet.Fx, tols.rank)
    if s[-1] <= tols.rank * s[0]:
        raise DRegularityError(jet.x, float(s[-1]), float(s[0]))
    gH2 = float(jet.grad_H @ jet.grad_H)
    beta = float(w @ jet.grad_H) / gH2
    v = w - jet.grad_H
    return Lift(w=w, v=v, coeff=beta), residual


def _tube_sphere_basis(jet: Jet, tols: Tolerances) -> np.ndarray:
    """Orthonormal basis (columns) of {v : <v, grad_h> = <v, grad_H> = 0}."""
    G = np.vstack([jet.grad_h[None, :], jet.grad_H[None, :]])
    U, s, Vt = np.linalg.svd(G, full_matrices=True)
    if s.size < 2 or s[-1] <= tols.rank * s[0]:
        raise InputError(
            "constrained lift requires grad_h and grad_H linearly independent"
        )
    return Vt[2:].T


def constrained_lift(
    jet: Jet, which: str, tols: Tolerances = DEFAULT_TOLERANCES
) -> tuple[Lift, float]:
    """Lift with the non-gradient part confined to the tangent space of the
    tube-sphere intersection through x.

    which = "f" lifts through f with coefficient alpha; which = "F" lifts
    through the spherefication with coefficient 1. Raises SubcaseError when
    the restricted system is inconsistent (the point is not generic and must
    be reclassified).
    """
    if which not in ("f", "F"):
        raise InputError(f"which must be 'f' or 'F', got {which!r}")
    B = _tube_sphere_basis(jet, tols)
    if which == "f":
        A = jet.J
        gh2 = float(jet.grad_h @ jet.grad_h)
        coeff = 4.0 * jet.h / gh2
        target = 2.0 * jet.fx
        grad = jet.grad_h
        rank_error = CriticalPointError
    else:
        A = jet.DF
        coeff = 1.0
        target = 2.0 * jet.Fx
        grad = jet.grad_H
        rank_error = DRegularityError
    s_full = np.linalg.svd(A, compute_uv=False)
    if s_full[-1] <= tols.rank * s_full[0]:
        raise rank_error(jet.x, float(s_full[-1]), float(s_full[0]))
    rhs = target - coeff * (A @ grad)
    AB = A @ B
    y, _, _ = _min_norm_solve(AB, rhs, tols.rank)
    vbar = B @ y
    w = vbar + coeff * grad
    residual = float(np.linalg.norm(A @ w - target))
    if residual > tols.lift_residual * jet.scale:
        raise SubcaseError(jet.x, residual)
    return Lift(w=w, v=vbar, coeff=coeff), residual


def classify_point(
    jet: Jet, tols: Tolerances = DEFAULT_TOLERANCES
) -> CaseLabel:
    """Label the point by gradient geometry.

    Collinear gradients are checked first (cheapest sufficient condition and
    it can overlap the exceptional set); otherwise rank loss of the augmented
    differential puts the point on M(f); otherwise the point is generic.
    """
    gh = jet.grad_h
    gH = jet.grad_H
    cos = float(gh @ gH) / (
        float(np.linalg.norm(gh)) * float(np.linalg.norm(gH))
    )
    s_aug = np.linalg.svd(jet.aug, compute_uv=False)
    s_J = np.linalg.svd(jet.J, compute_uv=False)
    # aug is (p+1) x n; when p + 1 > n the last singular value is structurally 0
    sigma_min_aug = float(s_aug[jet.p]) if jet.p < jet.n else 0.0
    label = CaseLabel(
        case=Case.TRANSVERSE_GENERIC,
        cos_angle=cos,
        sigma_min_aug=sigma_min_aug,
        sigma_max_aug=float(s_aug[0]),
        sigma_min_J=float(s_J[-1]),
        sigma_max_J=float(s_J[0]),
    )
    if abs(cos) > 1.0 - tols.collinear:
        return replace(label, case=Case.COLLINEAR)
    if sigma_min_aug < tols.rank * float(s_aug[0]):
        return replace(label, case=Case.EXCEPTIONAL_MF)
    return label


def mu(
    jet: Jet,
    w_f: np.ndarray,
    tols: Tolerances = DEFAULT_TOLERANCES,
    diagnostics: list | None = None,
) -> float:
    """Collinearity ratio mu with w_F = mu * w_f, from the inner-product
    closed form. Requires <grad_H, w_f> away from zero.

    mu <= 0 contradicts the small-radius theory, so such values are returned
    but recorded as a "keyprop violation" diagnostic, never silently accepted.
    """
    w_f = np.asarray(w_f, dtype=float)
    gH = jet.grad_H
    denom = float(gH @ w_f)
    floor = tols.mu_floor * float(np.linalg.norm(gH)) * float(np.linalg.norm(w_f))
    if abs(denom) <= floor:
        raise MuUndefinedError(
            f"<grad_H, w_f> = {denom:.3e} below tolerance at x = {jet.x.tolist()}"
        )
    value = float(gH @ gH) / denom
    if value <= 0.0 and diagnostics is not None:
        diagnostics.append(
            {
                "kind": "keyprop violation",
                "x": jet.x.tolist(),
                "mu": value,
                "ip_gradH_wf": denom,
            }
        )
    return value


def _lifts_collinear(w_f: np.ndarray, w_F: np.ndarray, tols: Tolerances) -> bool:
    nf = float(np.linalg.norm(w_f))
    nF = float(np.linalg.norm(w_F))
    if nf == 0.0 or nF == 0.0:
        return False
    cos = float(w_f @ w_F) / (nf * nF)
    return abs(cos) > 1.0 - tols.lifts_collinear


def lift_pair(
    jet: Jet,
    tols: Tolerances = DEFAULT_TOLERANCES,
    diagnostics: list | None = None,
    case: CaseLabel | None = None,
    force_normal: bool = False,
) -> LiftPair:
    """Both lifts at a point, dispatched on its classification.

    Collinear and exceptional points use normal lifts; generic points use
    constrained lifts. A generic point whose restricted system turns out
    inconsistent is reclassified once as exceptional. mu is attached whenever
    the two lifts come out collinear.
    """
    label = case if case is not None else classify_point(jet, tols)
    use_normal = force_normal or label.case in (Case.COLLINEAR, Case.EXCEPTIONAL_MF)
    if not use_normal:
        try:
            lf, res_f = constrained_lift(jet, "f", tols)
            lF, res_F = constrained_lift(jet, "F", tols)
        except SubcaseError:
            label = replace(label, case=Case.EXCEPTIONAL_MF)
            use_normal = True
    if use_normal:
        lf, res_f = normal_lift_f(jet, tols)
        lF, res_F = normal_lift_F(jet, tols)
    mu_value: float | None = None
    if label.case is Case.EXCEPTIONAL_MF or _lifts_collinear(lf.w, lF.w, tols):
        try:
            mu_value = mu(jet, lf.w, tols, diagnostics=diagnostics)
        except MuUndefinedError:
            mu_value = None
    return LiftPair(
        w_f=lf.w, v_f=lf.v, alpha=lf.coeff,
        w_F=lF.w, v_F=lF.v, beta=lF.coeff,
        case=label, mu=mu_value,
        residual_f=res_f, residual_F=res_F,
    )
