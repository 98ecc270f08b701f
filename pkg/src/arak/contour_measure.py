"""The free contour measure: walk-based sampling and line-based estimation.

Contours are closed simple polygons inside D that do not touch its
boundary.  The free measure gives a k-edge contour carried by lines
l_1..l_k the weight exp(-2 length) against the k-fold line measure (with
1/k! for unordered tuples); the tilted measure multiplies by
exp(-beta length).

Walk sampler
------------
A unit-speed walk turns at rate 4 per unit length by an angle with density
|sin a| / 4 on (0, 2 pi).  It starts at x with a uniform direction and
closes when it meets a half-line from x drawn at a |sin|/4 angle to the
initial direction.  Spawning walks at rate 4 pi per unit area and keeping
a closed walk with probability exp(-4 |closing edge|) exp(-(beta - 2) length)
produces each contour once per (vertex, orientation) pair with intensity
half the tilted measure; requiring the start to be the contour's leftmost
vertex turns that into the tilted measure itself.
"""

import itertools
import math
from dataclasses import dataclass

import numpy as np

from ._kernels import contour_walk
from .geometry import segment_intersections

SPAWN_RATE = 4.0 * math.pi
TURN_RATE = 4.0
STATUS = {0: "closed", 1: "self-hit", 2: "boundary", 3: "cap", 4: "not-leftmost", 5: "buffer"}
MAX_LINES = 8


class RegimeError(ValueError):
    """The requested tilt is outside the range where the walk sampler is controlled."""


class CapacityError(ValueError):
    """Input too large for exhaustive enumeration."""


def _check_beta(beta):
    if beta < 2:
        raise RegimeError(f"walk-based contour sampling needs beta >= 2, got {beta}")


class Contour:
    """A closed simple polygon given by its cyclic vertex list."""

    __slots__ = ("vertices", "_phi", "_bbox")

    def __init__(self, vertices, validate=True):
        v = np.ascontiguousarray(vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
            raise ValueError("a contour needs at least three planar vertices")
        self.vertices = v
        self._phi = None
        self._bbox = None
        if validate and not self.is_simple():
            raise ValueError("contour is not a simple polygon")

    def __len__(self):
        return len(self.vertices)

    @property
    def edges(self):
        v = self.vertices
        return np.stack([v, np.roll(v, -1, axis=0)], axis=1)

    @property
    def length(self):
        e = np.roll(self.vertices, -1, axis=0) - self.vertices
        return float(np.hypot(e[:, 0], e[:, 1]).sum())

    @property
    def area(self):
        x, y = self.vertices[:, 0], self.vertices[:, 1]
        return 0.5 * abs(float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)))

    @property
    def phi(self):
        if self._phi is None:
            from .gibbs import phi_energy
            self._phi = phi_energy(self.vertices)
        return self._phi

    @property
    def bbox(self):
        if self._bbox is None:
            lo, hi = self.vertices.min(0), self.vertices.max(0)
            self._bbox = (lo[0], lo[1], hi[0], hi[1])
        return self._bbox

    def is_simple(self):
        e = self.edges
        k = len(e)
        hit = segment_intersections(e, e, exclude_shared=False)
        # adjacent edges meet at their shared vertex only
        idx = np.arange(k)
        hit[idx, idx] = False
        hit[idx, (idx + 1) % k] = False
        hit[(idx + 1) % k, idx] = False
        return not hit.any()

    def inside(self, domain):
        """Strictly inside D (no boundary contact)."""
        if domain is None:
            return True
        return bool(np.all(domain.contains_points(self.vertices))) and \
            min(domain.distance_to_boundary(p) for p in self.vertices) > domain.boundary_tol

    def contains_point(self, p):
        """Even-odd test for a point in the interior."""
        x, y = p
        v = self.vertices
        x0, y0 = v[:, 0], v[:, 1]
        x1, y1 = np.roll(x0, -1), np.roll(y0, -1)
        cond = (y0 > y) != (y1 > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xc = x0 + (y - y0) * (x1 - x0) / (y1 - y0)
        return bool(np.sum(cond & (xc > x)) % 2)

    def intersects(self, other):
        """True when the two closed curves share a point (touching counts)."""
        a, b = self.bbox, other.bbox
        if a[2] < b[0] or b[2] < a[0] or a[3] < b[1] or b[3] < a[1]:
            return False
        return bool(segment_intersections(self.edges, other.edges, tol=1e-12, exclude_shared=False).any())

    def meets_disk(self, center, radius):
        """Whether the closed curve comes within ``radius`` of ``center``."""
        c = np.asarray(center, float)
        e = self.edges
        a, d = e[:, 0], e[:, 1] - e[:, 0]
        t = np.clip(((c - a) * d).sum(1) / (d * d).sum(1), 0.0, 1.0)
        dist = np.hypot(*(a + t[:, None] * d - c).T)
        return bool(dist.min() <= radius)

    def to_json(self):
        return {"vertices": self.vertices.tolist()}

    @classmethod
    def from_json(cls, obj):
        return cls(obj["vertices"])


@dataclass
class WalkProposal:
    start: tuple
    theta0: float
    phi_star: float
    points: np.ndarray
    outcome: str
    contour: Contour = None
    closing_length: float = 0.0

    @property
    def walk_length(self):
        d = np.diff(self.points, axis=0)
        return float(np.hypot(d[:, 0], d[:, 1]).sum())


def sample_turn(rng, size):
    """Turning angles with density |sin a| / 4 on (0, 2 pi)."""
    u = rng.random(size)
    lo = u < 0.5
    w = np.where(lo, 4.0 * u, 4.0 * (u - 0.5))
    return np.arccos(1.0 - w) + np.where(lo, 0.0, math.pi)


def _turn_scalar(rng):
    u = rng.random()
    if u < 0.5:
        return math.acos(1.0 - 4.0 * u)
    return math.acos(1.0 - 4.0 * (u - 0.5)) + math.pi


def _domain_args(domain):
    if domain is None:
        return True, 0.0, 0.0, np.inf, np.zeros((3, 2))
    if domain.kind == "disk":
        return True, domain.center[0], domain.center[1], domain.radius, np.zeros((3, 2))
    return False, 0.0, 0.0, 0.0, np.ascontiguousarray(domain.vertices)


def default_length_cap(domain):
    return 50.0 * domain.diameter if domain is not None else 200.0


def run_contour_walk(domain, start, rng, length_cap=None, canonical=False, theta0=None, phi_star=None):
    """One walk from ``start``; ``canonical`` kills it once it moves left of the start."""
    cap = default_length_cap(domain) if length_cap is None else float(length_cap)
    if cap <= 0:
        raise ValueError("length_cap must be positive")
    th = 2 * math.pi * rng.random() if theta0 is None else float(theta0)
    ps = _turn_scalar(rng) if phi_star is None else float(phi_star)
    disk, cx, cy, r, poly = _domain_args(domain)
    x0, y0 = float(start[0]), float(start[1])
    if canonical and math.cos(th + ps) <= 0.0:
        # the closing edge would leave a vertex left of the start
        return WalkProposal((x0, y0), th, ps, np.array([[x0, y0]]), "not-leftmost")
    n = 32
    ebuf = rng.standard_exponential(n)
    abuf = sample_turn(rng, n)
    while True:
        status, m, xs, ys, used = contour_walk(x0, y0, th, ps, ebuf, abuf, disk, cx, cy, r, poly,
                                               cap, canonical, 4 * len(ebuf) + 8)
        if status != 5:
            break
        ebuf = np.concatenate([ebuf, rng.standard_exponential(len(ebuf))])
        abuf = np.concatenate([abuf, sample_turn(rng, len(abuf))])
    pts = np.column_stack([xs[:m], ys[:m]])
    prop = WalkProposal((x0, y0), th, ps, pts, STATUS[status])
    if status == 0:
        h = pts[-1]
        prop.closing_length = math.hypot(h[0] - x0, h[1] - y0)
        prop.contour = Contour(pts, validate=False)
    return prop


def birth_weight(prop, beta):
    """Acceptance weight exp(-4 |closing edge|) exp(-(beta - 2) length) of a closed walk."""
    if prop.contour is None:
        return 0.0
    return math.exp(-4.0 * prop.closing_length - (beta - 2.0) * prop.contour.length)


def spawn_attempt(domain, beta, rng, length_cap=None, canonical=True, start=None):
    """(proposal, weight) for one spawned walk started uniformly in D."""
    _check_beta(beta)
    x = tuple(domain.sample_points(rng, 1)[0]) if start is None else start
    prop = run_contour_walk(domain, x, rng, length_cap, canonical)
    return prop, birth_weight(prop, beta)


def contour_birth_sampler(domain, beta, rng, length_cap=None):
    """One spawn: a contour accepted with its birth weight, or None.

    Spawns arrive at rate 4 pi |D|, so accepted contours form a Poisson
    process with intensity the tilted free measure restricted to D.
    """
    prop, w = spawn_attempt(domain, beta, rng, length_cap)
    if w > 0 and rng.random() < w:
        return prop.contour
    return None


def sample_contour_poisson(domain, beta, rng, length_cap=None):
    """A Poisson contour ensemble with intensity the tilted free measure on D."""
    _check_beta(beta)
    n = rng.poisson(SPAWN_RATE * domain.area)
    out = []
    for _ in range(n):
        c = contour_birth_sampler(domain, beta, rng, length_cap)
        if c is not None:
            out.append(c)
    return out


def walk_mass_estimate(domain, beta, n_walks, rng, predicate=None, length_cap=None,
                       canonical=True, start_region=None):
    """Walk-based estimate of the tilted mass of contours satisfying ``predicate``.

    With ``canonical`` the result estimates the contour mass; without it
    every contour is counted once per vertex lying in the start region.
    ``start_region`` (a ConvexDomain, default D) is where starts are drawn.
    Returns (estimate, standard error).
    """
    _check_beta(beta)
    region = domain if start_region is None else start_region
    vals = np.zeros(n_walks)
    pts = region.sample_points(rng, n_walks)
    for i in range(n_walks):
        prop = run_contour_walk(domain, tuple(pts[i]), rng, length_cap, canonical)
        if prop.contour is not None and (predicate is None or predicate(prop.contour)):
            vals[i] = birth_weight(prop, beta)
    scale = SPAWN_RATE * region.area
    return scale * vals.mean(), scale * vals.std(ddof=1) / math.sqrt(n_walks)


def contour_mass_walk(domain, beta, n_walks, rng, predicate=None, length_cap=None):
    return walk_mass_estimate(domain, beta, n_walks, rng, predicate, length_cap, canonical=True)


# ---------------------------------------------------------------------------
# line-based enumeration
# ---------------------------------------------------------------------------

def _line_arrays(lines):
    phi = np.array([l.phi if hasattr(l, "phi") else l[0] for l in lines], float)
    rho = np.array([l.rho if hasattr(l, "rho") else l[1] for l in lines], float)
    return phi, rho


def _intersection_table(phi, rho):
    k = len(phi)
    n = np.column_stack([np.sin(phi), np.cos(phi)])
    P = np.full((k, k, 2), np.nan)
    for i in range(k):
        for j in range(i + 1, k):
            det = n[i, 0] * n[j, 1] - n[i, 1] * n[j, 0]
            if abs(det) < 1e-12:
                continue
            x = (rho[i] * n[j, 1] - rho[j] * n[i, 1]) / det
            y = (n[i, 0] * rho[j] - n[j, 0] * rho[i]) / det
            P[i, j] = P[j, i] = (x, y)
    return P


def enumerate_contours_from_lines(lines, domain, beta=0.0):
    """All simple polygons inside D with one edge on each given line.

    Returns a list of (Contour, weight exp(-(2 + beta) length)).
    """
    phi, rho = _line_arrays(lines)
    k = len(phi)
    if k > MAX_LINES:
        raise CapacityError(f"at most {MAX_LINES} lines can be enumerated, got {k}")
    if k < 3:
        return []
    P = _intersection_table(phi, rho)
    out = []
    for perm in itertools.permutations(range(1, k)):
        if perm[0] > perm[-1]:
            continue  # each cycle once up to reversal
        order = (0,) + perm
        verts = np.array([P[order[i], order[(i + 1) % k]] for i in range(k)])
        if np.isnan(verts).any():
            continue
        if domain is not None and not np.all(domain.contains_points(verts)):
            continue
        c = Contour(verts, validate=False)
        e = np.roll(verts, -1, axis=0) - verts
        if np.any(np.hypot(e[:, 0], e[:, 1]) < 1e-12) or not c.is_simple():
            continue
        if domain is not None and not c.inside(domain):
            continue
        out.append((c, math.exp(-(2.0 + beta) * c.length)))
    return out


def theta_mass_estimator(domain, beta, predicate=None, n_samples=10000, k_range=(3, 6), rng=None):
    """Line-based Monte Carlo estimate of the tilted mass of {predicate}.

    For each k the k-edge mass is M^k / k! times the mean of the summed
    weights over k iid normalised lines meeting D, M the line mass of D.
    Returns (estimate, standard error).
    """
    rng = np.random.default_rng(rng)
    if predicate is not None and predicate is False:
        return 0.0, 0.0
    M = domain.perimeter
    est, var = 0.0, 0.0
    for k in range(max(3, k_range[0]), k_range[1] + 1):
        vals = np.zeros(n_samples)
        for i in range(n_samples):
            phi, rho = domain.sample_lines(rng, k)
            s = 0.0
            for c, w in enumerate_contours_from_lines(list(zip(phi, rho)), domain, beta):
                if predicate is None or predicate(c):
                    s += w
            vals[i] = s
        scale = M ** k / math.factorial(k)
        est += scale * vals.mean()
        var += (scale * vals.std(ddof=1)) ** 2 / n_samples
    return est, math.sqrt(var)


def triangle_mass_quadrature(domain, beta, n_points=2 ** 16, replicates=8, seed=0):
    """Tilted mass of triangles inside D by quasi-Monte Carlo over three lines.

    Three lines in general position carry exactly one triangle, so the mass
    is (1/3!) times the integral of exp(-(2 + beta) perimeter) 1{inside D}
    over triples of lines meeting the bounding disk of D.  Scrambled Sobol
    replicates give the error bar.  Returns (estimate, standard error).
    """
    from scipy.stats import qmc

    cx, cy = domain.center
    R = domain.bounding_radius
    vals = []
    for r in range(replicates):
        u = qmc.Sobol(6, scramble=True, seed=seed + r).random(n_points)
        phi = math.pi * u[:, 0::2]
        nx, ny = np.sin(phi), np.cos(phi)
        rho = cx * nx + cy * ny + R * (2.0 * u[:, 1::2] - 1.0)
        verts = []
        for i, j in ((0, 1), (1, 2), (2, 0)):
            det = nx[:, i] * ny[:, j] - ny[:, i] * nx[:, j]
            x = (rho[:, i] * ny[:, j] - rho[:, j] * ny[:, i]) / det
            y = (nx[:, i] * rho[:, j] - nx[:, j] * rho[:, i]) / det
            verts.append(np.column_stack([x, y]))
        inside = np.ones(n_points, bool)
        for v in verts:
            inside &= domain.contains_points(v)
        per = sum(np.hypot(*(verts[(i + 1) % 3] - verts[i]).T) for i in range(3))
        f = np.where(inside, np.exp(-(2.0 + beta) * np.where(inside, per, 0.0)), 0.0)
        vals.append((math.pi * 2.0 * R) ** 3 / 6.0 * f.mean())
    vals = np.array(vals)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(replicates))


def tail_bound(beta, R):
    """Upper bound 4 pi exp(-(beta - 2) R) on the per-area mass of long contours."""
    return SPAWN_RATE * math.exp(-(beta - 2.0) * R)


def self_avoiding_lifetimes(n_walks, rng, t_max):
    """Lengths at which whole-plane walks first hit their own past, censored at t_max.

    The walks ignore the loop-closing half-line.  Returns (lifetimes, survived).
    """
    out = np.empty(n_walks)
    alive = np.zeros(n_walks, bool)
    disk, cx, cy, r, poly = _domain_args(None)
    nbuf = max(32, int(8 * t_max))
    for i in range(n_walks):
        th = 2 * math.pi * rng.random()
        ebuf = rng.standard_exponential(nbuf)
        abuf = sample_turn(rng, nbuf)
        while True:
            status, m, xs, ys, used = contour_walk(0.0, 0.0, th, 0.0, ebuf, abuf, disk, cx, cy, r, poly,
                                                   t_max, False, 4 * len(ebuf) + 8, False)
            if status != 5:
                break
            ebuf = np.concatenate([ebuf, rng.standard_exponential(len(ebuf))])
            abuf = np.concatenate([abuf, sample_turn(rng, len(abuf))])
        d = np.diff(np.column_stack([xs[:m], ys[:m]]), axis=0)
        out[i] = min(float(np.hypot(d[:, 0], d[:, 1]).sum()), t_max)
        alive[i] = status == 3
    return out, alive
