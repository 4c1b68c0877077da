"""Built-in example maps with tuned run defaults.

square          (x^2 - y^2, 2xy), the complex squaring map viewed over R;
                d-regular with isolated critical value.
nondreg-4-3     (x^2 - y^2 z, y, w): critical set is the plane {x = y = 0},
                discriminant is the third coordinate axis (linear), and the
                map is not d-regular.
quadrics-3-2    (x1^2 - x2^2 - x3^2, x2^2 - x3^2): a quadric pencil whose
                coefficient pairs (1,0), (-1,1), (-1,-1) are pairwise
                independent with the origin in their convex hull; critical
                set is the coordinate axes, discriminant linear, d-regular.
identity-2      the identity on R^2, the all-radial baseline.
projection-3-2  (x, y, z) -> (x, y), the submersion baseline whose
                exceptional set is the z = 0 shell.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .config import Exclusion
from .errors import InputError
from .polymap import PolynomialMap

_S2 = 1.0 / math.sqrt(2.0)


@dataclass(frozen=True)
class CatalogEntry:
    map: PolynomialMap
    epsilon: float
    delta: float
    eps_min: float
    f_floor: float
    exclusion_angle: float
    exclusion_directions: tuple[tuple[float, ...], ...]
    d_regular: bool
    linear_discriminant: bool
    description: str

    def exclusion(self) -> Exclusion:
        return Exclusion(
            directions=self.exclusion_directions,
            angle=self.exclusion_angle,
            f_floor=self.f_floor,
        )

    def defaults(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "delta": self.delta,
            "eps_min": self.eps_min,
            "exclusion": {
                "directions": [list(d) for d in self.exclusion_directions],
                "angle": self.exclusion_angle,
                "f_floor": self.f_floor,
            },
        }


def _square() -> PolynomialMap:
    return PolynomialMap.from_terms(
        2, 2,
        [
            [(1.0, (2, 0)), (-1.0, (0, 2))],
            [(2.0, (1, 1))],
        ],
        name="square",
    )


def _nondreg() -> PolynomialMap:
    return PolynomialMap.from_terms(
        4, 3,
        [
            [(1.0, (2, 0, 0, 0)), (-1.0, (0, 2, 1, 0))],
            [(1.0, (0, 1, 0, 0))],
            [(1.0, (0, 0, 0, 1))],
        ],
        name="nondreg-4-3",
    )


def _quadrics() -> PolynomialMap:
    return PolynomialMap.from_terms(
        3, 2,
        [
            [(1.0, (2, 0, 0)), (-1.0, (0, 2, 0)), (-1.0, (0, 0, 2))],
            [(1.0, (0, 2, 0)), (-1.0, (0, 0, 2))],
        ],
        name="quadrics-3-2",
    )


def _identity() -> PolynomialMap:
    return PolynomialMap.from_terms(
        2, 2,
        [
            [(1.0, (1, 0))],
            [(1.0, (0, 1))],
        ],
        name="identity-2",
    )


def _projection() -> PolynomialMap:
    return PolynomialMap.from_terms(
        3, 2,
        [
            [(1.0, (1, 0, 0))],
            [(1.0, (0, 1, 0))],
        ],
        name="projection-3-2",
    )


CATALOG: dict[str, CatalogEntry] = {
    "square": CatalogEntry(
        map=_square(), epsilon=1.0, delta=0.05, eps_min=0.1, f_floor=1e-3,
        exclusion_angle=0.05, exclusion_directions=(),
        d_regular=True, linear_discriminant=False,
        description="complex squaring map over R, d-regular baseline",
    ),
    "nondreg-4-3": CatalogEntry(
        map=_nondreg(), epsilon=0.5, delta=0.005, eps_min=0.05, f_floor=1e-3,
        exclusion_angle=0.05,
        exclusion_directions=((0.0, 0.0, 1.0), (0.0, 0.0, -1.0)),
        d_regular=False, linear_discriminant=True,
        description="linear discriminant on the u3 axis, not d-regular",
    ),
    "quadrics-3-2": CatalogEntry(
        map=_quadrics(), epsilon=0.5, delta=0.005, eps_min=0.1, f_floor=1e-2,
        exclusion_angle=0.15,
        exclusion_directions=(
            (1.0, 0.0),
            (-_S2, _S2),
            (-_S2, -_S2),
        ),
        d_regular=True, linear_discriminant=True,
        description="quadric pencil, linear discriminant, d-regular",
    ),
    "identity-2": CatalogEntry(
        map=_identity(), epsilon=1.0, delta=0.1, eps_min=0.1, f_floor=1e-3,
        exclusion_angle=0.05, exclusion_directions=(),
        d_regular=True, linear_discriminant=False,
        description="identity map, all-radial trivial baseline",
    ),
    "projection-3-2": CatalogEntry(
        map=_projection(), epsilon=1.0, delta=0.1, eps_min=0.1, f_floor=1e-3,
        exclusion_angle=0.05, exclusion_directions=(),
        d_regular=True, linear_discriminant=False,
        description="coordinate projection, exceptional set on the z = 0 shell",
    ),
}


def catalog(name: str) -> tuple[PolynomialMap, dict]:
    """Look up a catalog map; returns (map, tuned run-config defaults)."""
    if name not in CATALOG:
        listing = ", ".join(sorted(CATALOG))
        raise InputError(f"unknown catalog map '{name}'; available: {listing}")
    entry = CATALOG[name]
    return entry.map, entry.defaults()


def catalog_entry(name: str) -> CatalogEntry:
    if name not in CATALOG:
        listing = ", ".join(sorted(CATALOG))
        raise InputError(f"unknown catalog map '{name}'; available: {listing}")
    return CATALOG[name]
