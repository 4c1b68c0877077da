"""Spherefication calculus at a jet: the differential applied to vectors,
its closed-form squared norm, the radial/spherical decomposition in the
target, and the tangency test for members of the canonical pencil."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .polymap import Jet


@dataclass(frozen=True)
class SplitVector:
    """Image vector split into a radial part (parallel to Fx) and a spherical
    part (tangent to the target sphere through Fx, i.e. orthogonal to f(x))."""

    radial: np.ndarray
    spherical: np.ndarray

    def total(self) -> np.ndarray:
        return self.radial + self.spherical


def d_spherefication(jet: Jet, v) -> np.ndarray:
    """Differential of x -> ||x|| f(x)/||f(x)|| applied to v."""
    v = np.asarray(v, dtype=float)
    Jv = jet.J @ v
    radial_coeff = float(jet.x @ v) / jet.H
    corr = float(jet.Fx @ Jv) / jet.h
    return radial_coeff * jet.Fx - corr * jet.fx + (jet.norm_x / jet.norm_f) * Jv


def d_spherefication_norm_sq(jet: Jet, v) -> float:
    """Closed form for ||D(spherefication)(v)||^2, avoiding the vector."""
    v = np.asarray(v, dtype=float)
    Jv = jet.J @ v
    xv = float(jet.x @ v)
    FJv = float(jet.Fx @ Jv)
    return xv * xv / jet.H + (jet.H * float(Jv @ Jv) - FJv * FJv) / jet.h


def radial_spherical_split(jet: Jet, v) -> SplitVector:
    """Decompose the image of v into radial and spherical parts."""
    v = np.asarray(v, dtype=float)
    Jv = jet.J @ v
    radial = (float(jet.x @ v) / jet.H) * jet.Fx
    spherical = (
        -(float(jet.Fx @ Jv) / jet.h) * jet.fx + (jet.norm_x / jet.norm_f) * Jv
    )
    return SplitVector(radial=radial, spherical=spherical)


def pencil_tangent_residual(jet: Jet, v) -> float:
    """Distance of Df(v) from the line spanned by f(x).

    Zero exactly when v is tangent to the pencil member through x; equals
    (||f||/||x||) times the norm of the spherical part of the image.
    """
    v = np.asarray(v, dtype=float)
    Jv = jet.J @ v
    proj = (float(jet.fx @ Jv) / jet.h) * jet.fx
    return float(np.linalg.norm(Jv - proj))


def is_pencil_tangent(jet: Jet, v, tol: float = 1e-8) -> bool:
    """Tangency declaration at the dimensionally consistent threshold."""
    v = np.asarray(v, dtype=float)
    vnorm = float(np.linalg.norm(v))
    return pencil_tangent_residual(jet, v) < tol * jet.scale * max(vnorm, 1e-300)


def jet_record(jet: Jet) -> dict:
    """Diagnostic dump of a jet as a JSON-ready record."""
    return {
        "x": jet.x.tolist(),
        "fx": jet.fx.tolist(),
        "J": jet.J.tolist(),
        "grad_h": jet.grad_h.tolist(),
        "grad_H": jet.grad_H.tolist(),
        "phi": jet.phi.tolist(),
        "Fx": jet.Fx.tolist(),
        "DF": jet.DF.tolist(),
        "aug": jet.aug.tolist(),
    }
