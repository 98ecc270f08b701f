"""Colourings, black areas, Hamiltonians and boundary-condition predicates."""

import math
from dataclasses import dataclass

import numpy as np

from .geometry import PolygonalConfiguration, parity_area


class SingularInputError(ValueError):
    """Zero-length edge or vanishing vertex angle."""


@dataclass(frozen=True)
class ModelParams:
    """Area and length couplings plus the auxiliary rates of the filtered dynamics."""

    alpha: float = 0.0
    beta: float = 0.0
    a: float = 0.0
    b: float = 0.0

    def __post_init__(self):
        if self.a < 0 or self.b < 0 or self.alpha + self.a < 0 or self.beta + self.b < 0:
            raise ValueError(f"need a, b >= 0, alpha + a >= 0 and beta + b >= 0; got {self}")

    @property
    def trivial(self):
        return self.alpha == 0 and self.beta == 0 and self.a == 0 and self.b == 0

    @property
    def uses_area(self):
        return self.alpha != 0 or self.a != 0


@dataclass(frozen=True, eq=False)
class ColouredConfiguration:
    """A configuration plus one colour bit.

    A point is black when (edge crossings to the reference boundary point
    mod 2) XOR ``flip`` is 1, so ``flip=True`` paints the face touching the
    reference point black.
    """

    base: PolygonalConfiguration
    flip: bool = False

    def flipped(self):
        return ColouredConfiguration(self.base, not self.flip)

    @property
    def length(self):
        return self.base.total_length


def black_area(cfg, domain, odd_area=None):
    """Area of the black region.  ``odd_area`` may pass a cached parity area."""
    odd = parity_area(cfg.base.segments, domain) if odd_area is None else odd_area
    odd = min(max(odd, 0.0), domain.area)
    return domain.area - odd if cfg.flip else odd


def hamiltonian(cfg, params, domain, odd_area=None):
    """alpha * black area + beta * total edge length."""
    h = params.beta * cfg.length
    if params.alpha != 0:
        h += params.alpha * black_area(cfg, domain, odd_area)
    return h


def phi_energy(contour):
    """2 length + sum of log edge lengths - sum of log |sin vertex angle|.

    Accepts a contour object with ``vertices`` or a (k, 2) vertex array.
    """
    v = np.asarray(getattr(contour, "vertices", contour), float)
    if v.ndim != 2 or len(v) < 3:
        raise SingularInputError("a contour needs at least three vertices")
    e = np.roll(v, -1, axis=0) - v
    L = np.hypot(e[:, 0], e[:, 1])
    if np.any(L <= 0):
        raise SingularInputError("zero-length edge")
    # angle at vertex i between incoming edge e[i-1] and outgoing e[i]
    ein = np.roll(e, 1, axis=0)
    cross = ein[:, 0] * e[:, 1] - ein[:, 1] * e[:, 0]
    dot = ein[:, 0] * e[:, 0] + ein[:, 1] * e[:, 1]
    ang = np.arctan2(np.abs(cross), dot)  # turning angle in [0, pi]
    if np.any(ang < 1e-12) or np.any(math.pi - ang < 1e-12):
        raise SingularInputError("degenerate vertex angle")
    return float(2.0 * L.sum() + np.log(L).sum() - np.log(np.abs(np.sin(ang))).sum())


def boundary_condition(cfg, domain, bd):
    """Whether cfg satisfies the boundary condition ``bd`` in {none, empty, black, white}."""
    if bd in (None, "none"):
        return True
    if bd not in ("empty", "black", "white"):
        raise ValueError(f"unknown boundary condition {bd!r}")
    if cfg.base.touches_boundary(domain):
        return False
    if bd == "empty":
        return True
    # without boundary contact the face along the boundary is the reference face
    return bool(cfg.flip) == (bd == "black")
