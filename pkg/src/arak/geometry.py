"""Planar primitives, the invariant line measure, admissibility and faces.

Conventions
-----------
A line is stored as ``(phi, rho)`` with ``phi`` in ``[0, pi)``; its unit
normal is ``(sin phi, cos phi)``, the foot point ``rho * normal`` lies on it
and its direction is ``(cos phi, -sin phi)``.  Lebesgue measure ``dphi drho``
on this parameter space is the isometry-invariant line measure.

Domains are open convex sets: disks or strictly convex polygons with
vertices listed counterclockwise.  Boundary points are addressed by arc
length ``s`` measured counterclockwise from a fixed origin (angle 0 for a
disk, the first vertex for a polygon).
"""

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

EPS_GEOM = 1e-9
TWO_PI = 2.0 * math.pi
# fraction of the perimeter at which the colouring reference point sits;
# irrational so that symmetric hand-built fixtures never align with it
REF_FRACTION = 0.3819660112501051


class GeometryError(ValueError):
    """Invalid geometric parameters."""


class AdmissibilityError(ValueError):
    """A configuration violates (P1)-(P4)."""

    def __init__(self, report):
        super().__init__(str(report))
        self.report = report


def _cross(ax, ay, bx, by):
    return ax * by - ay * bx


@dataclass(frozen=True)
class Line:
    phi: float
    rho: float

    def __post_init__(self):
        if not (0.0 <= self.phi < math.pi) or not math.isfinite(self.rho):
            raise GeometryError(f"line parameters out of range: phi={self.phi}, rho={self.rho}")

    @property
    def normal(self):
        return (math.sin(self.phi), math.cos(self.phi))

    @property
    def direction(self):
        return (math.cos(self.phi), -math.sin(self.phi))

    @property
    def point(self):
        n = self.normal
        return (self.rho * n[0], self.rho * n[1])

    @property
    def velocity(self):
        """Slope dy/dt when the line is read as a time-space trajectory."""
        return -math.tan(self.phi)

    def signed_distance(self, p):
        n = self.normal
        return p[0] * n[0] + p[1] * n[1] - self.rho

    def contains(self, p, tol=EPS_GEOM):
        return abs(self.signed_distance(p)) <= tol

    @classmethod
    def through(cls, p, q):
        dx, dy = q[0] - p[0], q[1] - p[1]
        if dx == 0.0 and dy == 0.0:
            raise GeometryError("coincident points do not define a line")
        # normal (sin phi, cos phi) is orthogonal to (dx, dy)
        phi = math.atan2(-dy, dx) % math.pi
        if phi >= math.pi:
            phi = 0.0
        s, c = math.sin(phi), math.cos(phi)
        return cls(phi, p[0] * s + p[1] * c)

    def intersection(self, other):
        n1, n2 = self.normal, other.normal
        det = n1[0] * n2[1] - n1[1] * n2[0]
        if abs(det) < 1e-15:
            return None
        x = (self.rho * n2[1] - other.rho * n1[1]) / det
        y = (n1[0] * other.rho - n2[0] * self.rho) / det
        return (x, y)

    def to_json(self):
        return {"phi": self.phi, "rho": self.rho}

    @classmethod
    def from_json(cls, obj):
        return cls(float(obj["phi"]), float(obj["rho"]))


def line_from_params(phi, rho):
    return Line(float(phi), float(rho))


def line_params_through(p, q):
    """Vectorised ``(phi, rho)`` of the lines through point arrays p, q."""
    p = np.asarray(p, float)
    q = np.asarray(q, float)
    d = q - p
    phi = np.mod(np.arctan2(-d[..., 1], d[..., 0]), np.pi)
    phi = np.where(phi >= np.pi, 0.0, phi)
    rho = p[..., 0] * np.sin(phi) + p[..., 1] * np.cos(phi)
    return phi, rho


@dataclass(frozen=True)
class Segment:
    a: tuple
    b: tuple
    carrier: Line = None

    def __post_init__(self):
        object.__setattr__(self, "a", (float(self.a[0]), float(self.a[1])))
        object.__setattr__(self, "b", (float(self.b[0]), float(self.b[1])))
        if self.a == self.b:
            raise GeometryError("degenerate segment")
        if self.carrier is not None:
            scale = max(1.0, abs(self.a[0]), abs(self.a[1]), abs(self.b[0]), abs(self.b[1]))
            tol = 1e-7 * scale
            if not (self.carrier.contains(self.a, tol) and self.carrier.contains(self.b, tol)):
                raise GeometryError("segment endpoints are not on the carrier line")

    @property
    def length(self):
        return math.hypot(self.b[0] - self.a[0], self.b[1] - self.a[1])

    @property
    def line(self):
        return self.carrier if self.carrier is not None else Line.through(self.a, self.b)

    def to_json(self):
        return {"a": list(self.a), "b": list(self.b)}

    @classmethod
    def from_json(cls, obj):
        return cls(tuple(obj["a"]), tuple(obj["b"]))


class ConvexDomain:
    """A bounded open convex set: a disk or a convex polygon."""

    def __init__(self, kind, center=None, radius=None, vertices=None):
        self.kind = kind
        if kind == "disk":
            if radius is None or not math.isfinite(radius) or radius < 0:
                raise GeometryError(f"invalid disk radius {radius}")
            self.center = (float(center[0]), float(center[1]))
            self.radius = float(radius)
            self.vertices = None
        elif kind == "polygon":
            v = np.asarray(vertices, dtype=float)
            if v.ndim != 2 or v.shape[0] < 3 or v.shape[1] != 2:
                raise GeometryError("polygon needs at least three planar vertices")
            self.vertices = v
            e = np.roll(v, -1, axis=0) - v
            turns = _cross(e[:, 0], e[:, 1], np.roll(e, -1, axis=0)[:, 0], np.roll(e, -1, axis=0)[:, 1])
            if np.any(turns <= 1e-12 * np.max(np.abs(v)) ** 2):
                raise GeometryError("polygon must be strictly convex and counterclockwise")
            self._edges = e
            self._edge_len = np.hypot(e[:, 0], e[:, 1])
            self._cum = np.concatenate([[0.0], np.cumsum(self._edge_len)])
            self.center = tuple(v.mean(axis=0))
            self.radius = None
        else:
            raise GeometryError(f"unknown domain kind {kind!r}")

    # constructors -------------------------------------------------------
    @classmethod
    def disk(cls, center=(0.0, 0.0), radius=1.0):
        return cls("disk", center=center, radius=radius)

    @classmethod
    def polygon(cls, vertices):
        return cls("polygon", vertices=vertices)

    @classmethod
    def square(cls, half=1.0, center=(0.0, 0.0)):
        cx, cy = center
        return cls.polygon([(cx - half, cy - half), (cx + half, cy - half),
                            (cx + half, cy + half), (cx - half, cy + half)])

    @classmethod
    def box(cls, x0, y0, x1, y1):
        return cls.polygon([(x0, y0), (x1, y0), (x1, y1), (x0, y1)])

    def to_json(self):
        if self.kind == "disk":
            return {"disk": {"center": list(self.center), "radius": self.radius}}
        return {"polygon": self.vertices.tolist()}

    @classmethod
    def from_json(cls, obj):
        if "disk" in obj:
            d = obj["disk"]
            return cls.disk(tuple(d.get("center", (0.0, 0.0))), float(d["radius"]))
        if "polygon" in obj:
            return cls.polygon(obj["polygon"])
        raise GeometryError(f"cannot parse domain {obj!r}")

    def __repr__(self):
        if self.kind == "disk":
            return f"ConvexDomain.disk({self.center}, {self.radius})"
        return f"ConvexDomain.polygon({self.vertices.tolist()})"

    def __eq__(self, other):
        return isinstance(other, ConvexDomain) and self.to_json() == other.to_json()

    def __hash__(self):
        return hash(repr(self))

    # scalar characteristics ---------------------------------------------
    @property
    def area(self):
        if self.kind == "disk":
            return math.pi * self.radius ** 2
        v = self.vertices
        return 0.5 * float(np.sum(_cross(v[:, 0], v[:, 1], np.roll(v, -1, 0)[:, 0], np.roll(v, -1, 0)[:, 1])))

    @property
    def perimeter(self):
        if self.kind == "disk":
            return TWO_PI * self.radius
        return float(self._cum[-1])

    @property
    def diameter(self):
        if self.kind == "disk":
            return 2.0 * self.radius
        v = self.vertices
        d = v[:, None, :] - v[None, :, :]
        return float(np.sqrt((d ** 2).sum(-1)).max())

    @property
    def bounding_radius(self):
        if self.kind == "disk":
            return self.radius
        return float(np.hypot(*(self.vertices - np.asarray(self.center)).T).max())

    @property
    def eps(self):
        return EPS_GEOM * max(self.diameter, 1e-300)

    @property
    def boundary_tol(self):
        """Distance within which a point counts as lying on the boundary."""
        return 10.0 * self.eps

    @property
    def degenerate(self):
        return self.area <= 0.0

    def support(self, nx, ny):
        """Support function h(n) = sup_{p in D} <p, n> (vectorised in n)."""
        if self.kind == "disk":
            return self.center[0] * nx + self.center[1] * ny + self.radius * np.hypot(nx, ny)
        v = self.vertices
        return np.max(np.multiply.outer(nx, v[:, 0]) + np.multiply.outer(ny, v[:, 1]), axis=-1)

    def width(self, phi):
        """Extent of D along the normal of lines with angle phi."""
        nx, ny = np.sin(phi), np.cos(phi)
        return self.support(nx, ny) + self.support(-nx, -ny)

    # point queries --------------------------------------------------------
    def contains(self, p, strict=True):
        x, y = p
        if self.kind == "disk":
            d = math.hypot(x - self.center[0], y - self.center[1]) - self.radius
        else:
            d = -self.distance_to_boundary(p)
        return d < -self.eps if strict else d <= self.eps

    def contains_points(self, pts):
        pts = np.asarray(pts, float)
        if self.kind == "disk":
            return np.hypot(pts[:, 0] - self.center[0], pts[:, 1] - self.center[1]) < self.radius
        v, e = self.vertices, self._edges
        c = _cross(e[None, :, 0], e[None, :, 1], pts[:, None, 0] - v[None, :, 0], pts[:, None, 1] - v[None, :, 1])
        return np.all(c > 0, axis=1)

    def distance_to_boundary(self, p):
        """Signed distance, positive inside."""
        x, y = p
        if self.kind == "disk":
            return self.radius - math.hypot(x - self.center[0], y - self.center[1])
        v, e, L = self.vertices, self._edges, self._edge_len
        c = _cross(e[:, 0], e[:, 1], x - v[:, 0], y - v[:, 1]) / L
        return float(np.min(c))

    def on_boundary(self, p, tol=None):
        tol = self.eps if tol is None else tol
        return abs(self.distance_to_boundary(p)) <= tol

    # boundary parametrisation ---------------------------------------------
    def boundary_param(self, p):
        x, y = p
        if self.kind == "disk":
            ang = math.atan2(y - self.center[1], x - self.center[0]) % TWO_PI
            return self.radius * ang
        v, e, L = self.vertices, self._edges, self._edge_len
        dist = np.abs(_cross(e[:, 0], e[:, 1], x - v[:, 0], y - v[:, 1]) / L)
        t = ((x - v[:, 0]) * e[:, 0] + (y - v[:, 1]) * e[:, 1]) / L ** 2
        dist = np.where((t >= -1e-9) & (t <= 1 + 1e-9), dist, np.inf)
        i = int(np.argmin(dist))
        return float(self._cum[i] + min(max(t[i], 0.0), 1.0) * L[i])

    def boundary_point(self, s):
        s = s % self.perimeter if self.perimeter > 0 else 0.0
        if self.kind == "disk":
            a = s / self.radius if self.radius > 0 else 0.0
            return (self.center[0] + self.radius * math.cos(a), self.center[1] + self.radius * math.sin(a))
        i = min(int(np.searchsorted(self._cum, s, side="right") - 1), len(self._edge_len) - 1)
        t = (s - self._cum[i]) / self._edge_len[i]
        p = self.vertices[i] + t * self._edges[i]
        return (float(p[0]), float(p[1]))

    def tangent(self, s):
        """Counterclockwise unit tangent at boundary parameter s."""
        s = s % self.perimeter
        if self.kind == "disk":
            a = s / self.radius
            return (-math.sin(a), math.cos(a))
        i = min(int(np.searchsorted(self._cum, s, side="right") - 1), len(self._edge_len) - 1)
        e = self._edges[i] / self._edge_len[i]
        return (float(e[0]), float(e[1]))

    @property
    def reference_param(self):
        return REF_FRACTION * self.perimeter

    @property
    def reference_point(self):
        """Boundary point anchoring the parity (colouring) convention."""
        return self.boundary_point(self.reference_param)

    def boundary_green(self, s0, s1):
        """Integral of (x dy - y dx)/2 along the ccw boundary from s0 to s1 >= s0."""
        if s1 < s0:
            raise GeometryError("boundary_green expects s1 >= s0")
        if self.kind == "disk":
            r = self.radius
            if r == 0:
                return 0.0
            a0, a1 = s0 / r, s1 / r
            cx, cy = self.center
            return 0.5 * (r * r * (a1 - a0) + r * cx * (math.sin(a1) - math.sin(a0))
                          - r * cy * (math.cos(a1) - math.cos(a0)))
        pts = self.boundary_polyline(s0, s1)
        x, y = pts[:, 0], pts[:, 1]
        return 0.5 * float(np.sum(x[:-1] * y[1:] - x[1:] * y[:-1]))

    def boundary_polyline(self, s0, s1, arc_step=None):
        """Points along the ccw boundary from s0 to s1 (corners / arc samples included)."""
        P = self.perimeter
        if self.kind == "disk":
            step = arc_step or (self.radius * 2 * math.pi / 256)
            n = max(2, int(math.ceil((s1 - s0) / step)) + 1)
            return np.array([self.boundary_point(s) for s in np.linspace(s0, s1, n)])
        pts = [self.boundary_point(s0)]
        k0 = math.floor(s0 / P)
        for k in range(k0, int(math.floor(s1 / P)) + 1):
            for c in self._cum[:-1]:
                sc = c + k * P
                if s0 < sc < s1:
                    pts.append(tuple(self.vertices[int(np.searchsorted(self._cum, c))]))
        pts.append(self.boundary_point(s1))
        # keep corners in order of their parameter
        return np.array(pts)

    # lines and rays -------------------------------------------------------
    def chord(self, line):
        """Entry/exit points of ``line`` traversed along its direction, or None."""
        px, py = line.point
        dx, dy = line.direction
        if self.kind == "disk":
            cx, cy = self.center
            t0 = (cx - px) * dx + (cy - py) * dy
            fx, fy = px + t0 * dx, py + t0 * dy
            h2 = self.radius ** 2 - ((fx - cx) ** 2 + (fy - cy) ** 2)
            if h2 <= 0:
                return None
            h = math.sqrt(h2)
            return (fx - h * dx, fy - h * dy), (fx + h * dx, fy + h * dy)
        lo, hi = -np.inf, np.inf
        v, e = self.vertices, self._edges
        for i in range(len(v)):
            # inside half-plane: cross(e, p - v) >= 0
            num = _cross(e[i, 0], e[i, 1], px - v[i, 0], py - v[i, 1])
            den = _cross(e[i, 0], e[i, 1], dx, dy)
            if abs(den) < 1e-300:
                if num < 0:
                    return None
                continue
            t = -num / den
            if den > 0:
                lo = max(lo, t)
            else:
                hi = min(hi, t)
        if not lo < hi:
            return None
        return (px + lo * dx, py + lo * dy), (px + hi * dx, py + hi * dy)

    def ray_exit(self, p, d):
        """Distance along the unit direction d from interior point p to the boundary."""
        x, y = p
        dx, dy = d
        if self.kind == "disk":
            cx, cy = self.center
            ox, oy = x - cx, y - cy
            b = ox * dx + oy * dy
            c = ox * ox + oy * oy - self.radius ** 2
            return -b + math.sqrt(max(b * b - c, 0.0))
        v, e = self.vertices, self._edges
        num = _cross(e[:, 0], e[:, 1], x - v[:, 0], y - v[:, 1])
        den = _cross(e[:, 0], e[:, 1], dx, dy)
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(den < 0, -num / den, np.inf)
        return float(np.min(t))

    # sampling -------------------------------------------------------------
    def sample_points(self, rng, n):
        if n == 0:
            return np.empty((0, 2))
        if self.kind == "disk":
            r = self.radius * np.sqrt(rng.random(n))
            a = TWO_PI * rng.random(n)
            return np.column_stack([self.center[0] + r * np.cos(a), self.center[1] + r * np.sin(a)])
        lo, hi = self.vertices.min(0), self.vertices.max(0)
        out = []
        need = n
        while need > 0:
            cand = lo + (hi - lo) * rng.random((2 * need + 8, 2))
            cand = cand[self.contains_points(cand)]
            out.append(cand[:need])
            need -= len(out[-1])
        return np.concatenate(out)

    def sample_lines(self, rng, n):
        """n iid lines from the line measure restricted to lines hitting D, normalised."""
        if n == 0:
            return np.empty(0), np.empty(0)
        if self.kind == "disk":
            phi = np.pi * rng.random(n)
            c = self.center[0] * np.sin(phi) + self.center[1] * np.cos(phi)
            rho = c + self.radius * (2 * rng.random(n) - 1)
            return phi, rho
        cx, cy = self.center
        R = self.bounding_radius
        phis, rhos = [], []
        need = n
        while need > 0:
            m = 2 * need + 8
            phi = np.pi * rng.random(m)
            c = cx * np.sin(phi) + cy * np.cos(phi)
            rho = c + R * (2 * rng.random(m) - 1)
            hi = self.support(np.sin(phi), np.cos(phi))
            lo = -self.support(-np.sin(phi), -np.cos(phi))
            ok = (rho > lo) & (rho < hi)
            phis.append(phi[ok][:need])
            rhos.append(rho[ok][:need])
            need -= len(phis[-1])
        return np.concatenate(phis), np.concatenate(rhos)


def mu_mass_hitting(domain):
    """Line-measure mass of {lines meeting D}; equals the perimeter for convex D."""
    if not isinstance(domain, ConvexDomain):
        raise GeometryError("mu_mass_hitting expects a ConvexDomain")
    if domain.kind == "disk":
        return TWO_PI * domain.radius
    return domain.perimeter


# ---------------------------------------------------------------------------
# configurations
# ---------------------------------------------------------------------------

def _vertex_key(p):
    return (round(float(p[0]), 10) + 0.0, round(float(p[1]), 10) + 0.0)


@dataclass(frozen=True, eq=False)
class PolygonalConfiguration:
    """A finite set of segments, optionally with per-particle provenance.

    ``segments`` has shape (m, 2, 2).  ``carriers`` holds the cached
    ``(phi, rho)`` of each segment's line (NaN rows if unknown).  ``traces``
    maps a particle key to ``(t_birth, t_death)`` when the configuration was
    produced by the particle sweep.
    """

    segments: np.ndarray
    carriers: np.ndarray = None
    traces: dict = field(default=None)

    def __post_init__(self):
        seg = np.asarray(self.segments, dtype=float).reshape(-1, 2, 2)
        object.__setattr__(self, "segments", seg)
        if self.carriers is None:
            phi, rho = line_params_through(seg[:, 0], seg[:, 1])
            object.__setattr__(self, "carriers", np.column_stack([phi, rho]) if len(seg) else np.empty((0, 2)))

    @classmethod
    def empty(cls):
        return cls(np.empty((0, 2, 2)))

    @classmethod
    def from_segments(cls, segments):
        segs = [s if isinstance(s, Segment) else Segment(*s) for s in segments]
        arr = np.array([[s.a, s.b] for s in segs], float).reshape(-1, 2, 2)
        car = None
        if segs and all(s.carrier is not None for s in segs):
            car = np.array([[s.carrier.phi, s.carrier.rho] for s in segs])
        return cls(arr, car)

    @classmethod
    def from_polylines(cls, polylines, closed=False):
        segs = []
        for pl in polylines:
            pl = np.asarray(pl, float)
            pts = np.vstack([pl, pl[:1]]) if closed else pl
            segs.extend(np.stack([pts[:-1], pts[1:]], axis=1))
        return cls(np.array(segs).reshape(-1, 2, 2))

    def __len__(self):
        return len(self.segments)

    @property
    def edges(self):
        return tuple(Segment(tuple(s[0]), tuple(s[1]), Line(float(c[0]), float(c[1])) if np.all(np.isfinite(c)) else None)
                     for s, c in zip(self.segments, self.carriers))

    @property
    def total_length(self):
        if not len(self.segments):
            return 0.0
        d = self.segments[:, 1] - self.segments[:, 0]
        return float(np.hypot(d[:, 0], d[:, 1]).sum())

    def same_as(self, other):
        """Bitwise equality of the edge sets (order-insensitive)."""
        return np.array_equal(_canonical(self.segments), _canonical(other.segments))

    def graph(self):
        """(vertex points, vertex index pairs for edges, degrees)."""
        keys = {}
        pts = []
        pairs = np.empty((len(self.segments), 2), dtype=np.int64)
        for i, s in enumerate(self.segments):
            for j in range(2):
                k = _vertex_key(s[j])
                if k not in keys:
                    keys[k] = len(pts)
                    pts.append(s[j])
                pairs[i, j] = keys[k]
        pts = np.array(pts, float).reshape(-1, 2)
        deg = np.bincount(pairs.ravel(), minlength=len(pts)) if len(pairs) else np.zeros(0, int)
        return pts, pairs, deg

    def boundary_vertices(self, domain):
        pts, _, _ = self.graph()
        return [tuple(p) for p in pts if domain.on_boundary(p, domain.boundary_tol)]

    def touches_boundary(self, domain):
        if not len(self.segments):
            return False
        tol = domain.boundary_tol
        pts = self.segments.reshape(-1, 2)
        if domain.kind == "disk":
            d = domain.radius - np.hypot(pts[:, 0] - domain.center[0], pts[:, 1] - domain.center[1])
            return bool(np.any(d <= tol))
        return any(domain.distance_to_boundary(p) <= tol for p in pts)

    def to_json(self):
        return {"segments": self.segments.tolist()}


def _canonical(seg):
    if not len(seg):
        return seg.reshape(0, 4)
    s = seg.copy()
    swap = (s[:, 0, 0] > s[:, 1, 0]) | ((s[:, 0, 0] == s[:, 1, 0]) & (s[:, 0, 1] > s[:, 1, 1]))
    s[swap] = s[swap][:, ::-1]
    flat = s.reshape(-1, 4)
    order = np.lexsort(flat.T[::-1])
    return flat[order]


# ---------------------------------------------------------------------------
# segment intersection helpers
# ---------------------------------------------------------------------------

def segment_intersections(seg_a, seg_b, tol=0.0, exclude_shared=True):
    """Boolean matrix of closed-segment intersections between two segment arrays."""
    a0, a1 = seg_a[:, None, 0], seg_a[:, None, 1]
    b0, b1 = seg_b[None, :, 0], seg_b[None, :, 1]
    da, db = a1 - a0, b1 - b0
    w = b0 - a0
    den = _cross(da[..., 0], da[..., 1], db[..., 0], db[..., 1])
    with np.errstate(divide="ignore", invalid="ignore"):
        s = _cross(w[..., 0], w[..., 1], db[..., 0], db[..., 1]) / den
        t = _cross(w[..., 0], w[..., 1], da[..., 0], da[..., 1]) / den
    la = np.hypot(da[..., 0], da[..., 1])
    lb = np.hypot(db[..., 0], db[..., 1])
    ta, tb = tol / np.maximum(la, 1e-300), tol / np.maximum(lb, 1e-300)
    hit = (np.abs(den) > 0) & (s >= -ta) & (s <= 1 + ta) & (t >= -tb) & (t <= 1 + tb)
    if exclude_shared:
        shared = np.zeros(hit.shape, bool)
        for i in range(2):
            for j in range(2):
                shared |= np.all(seg_a[:, None, i] == seg_b[None, :, j], axis=-1)
        hit &= ~shared
    return hit


@dataclass
class AdmissibilityReport:
    ok: bool
    property: str = None
    edges: tuple = ()
    vertices: tuple = ()
    message: str = ""

    def __bool__(self):
        return self.ok

    def __str__(self):
        if self.ok:
            return "admissible"
        return f"{self.property} violated: {self.message} (edges={self.edges}, vertices={self.vertices})"


def check_admissible(config, domain):
    """Report the first violated property among P1-P4 (plus domain containment)."""
    seg = config.segments
    if not len(seg):
        return AdmissibilityReport(True)
    tol = domain.boundary_tol
    # containment in the closure of D
    for i, s in enumerate(seg):
        for p in s:
            if domain.distance_to_boundary(p) < -tol:
                return AdmissibilityReport(False, "D", (i,), (tuple(p),), "edge leaves the domain")
    pts, pairs, deg = config.graph()
    # P1: no crossings except at shared vertices
    m = len(seg)
    for start in range(0, m, 512):
        blk = seg[start:start + 512]
        hit = segment_intersections(blk, seg, tol=0.0)
        for r in range(len(blk)):
            i = start + r
            hit[r, : i + 1] = False
            # adjacent edges (sharing a merged vertex) only meet at that vertex
            share = np.isin(pairs, pairs[i]).any(axis=1)
            hit[r, share] = False
        if hit.any():
            r, j = np.argwhere(hit)[0]
            return AdmissibilityReport(False, "P1", (int(start + r), int(j)), (), "edges cross")
    on_bd = np.array([domain.on_boundary(p, tol) for p in pts])
    # P2: interior vertices have degree 2
    bad = np.where(~on_bd & (deg != 2))[0]
    if len(bad):
        v = int(bad[0])
        return AdmissibilityReport(False, "P2", tuple(np.where((pairs == v).any(1))[0].tolist()),
                                   (tuple(pts[v]),), f"interior vertex of degree {deg[v]}")
    # P3: boundary vertices have degree 1
    bad = np.where(on_bd & (deg != 1))[0]
    if len(bad):
        v = int(bad[0])
        return AdmissibilityReport(False, "P3", tuple(np.where((pairs == v).any(1))[0].tolist()),
                                   (tuple(pts[v]),), f"boundary vertex of degree {deg[v]}")
    # P4: no two edges colinear
    phi, rho = line_params_through(seg[:, 0], seg[:, 1])
    ltol = 1e2 * EPS_GEOM * max(1.0, domain.diameter)
    dphi = np.abs(phi[:, None] - phi[None, :])
    same = (dphi < 1e2 * EPS_GEOM) & (np.abs(rho[:, None] - rho[None, :]) < ltol)
    wrap = (np.abs(dphi - math.pi) < 1e2 * EPS_GEOM) & (np.abs(rho[:, None] + rho[None, :]) < ltol)
    col = np.triu(same | wrap, 1)
    if col.any():
        i, j = np.argwhere(col)[0]
        return AdmissibilityReport(False, "P4", (int(i), int(j)), (), "colinear edges")
    return AdmissibilityReport(True)


# ---------------------------------------------------------------------------
# faces (half-edge traversal)
# ---------------------------------------------------------------------------

@dataclass
class Face:
    area: float
    parity: int
    cycles: list  # outer cycle first, then holes; each a list of pieces
    depth: int = 0  # edges crossed on a shortest path to the reference face

    def polygon_paths(self, domain):
        """Closed point sequences for each cycle (arcs sampled), for export."""
        out = []
        for cyc in self.cycles:
            pts = []
            for kind, a, b in cyc:
                if kind == "seg":
                    pts.append(a)
                else:
                    pts.extend(map(tuple, domain.boundary_polyline(a, b)[:-1]))
            out.append(pts)
        return out


@dataclass
class FacePartition:
    faces: list

    @property
    def areas(self):
        return [f.area for f in self.faces]

    @property
    def parities(self):
        return [f.parity for f in self.faces]

    @property
    def depths(self):
        return [f.depth for f in self.faces]

    def parity_area(self, parity):
        return sum(f.area for f in self.faces if f.parity % 2 == parity % 2)


def _piece_green(piece, domain):
    kind, a, b = piece
    if kind == "seg":
        return 0.5 * (a[0] * b[1] - b[0] * a[1])
    return domain.boundary_green(a, b)


def arrangement_faces(config, domain, check=True):
    """Partition D into the faces cut out by an admissible configuration.

    Returns a :class:`FacePartition`; each face carries its area and its
    parity, the number of edges crossed on a path to the colouring reference
    boundary point, mod 2.
    """
    if check:
        rep = check_admissible(config, domain)
        if not rep:
            raise AdmissibilityError(rep)
    P = domain.perimeter
    pts, pairs, deg = config.graph()
    nv = len(pts)
    tol = domain.boundary_tol
    on_bd = np.array([domain.on_boundary(p, tol) for p in pts], bool) if nv else np.zeros(0, bool)
    bverts = np.where(on_bd)[0]
    bparam = {int(v): domain.boundary_param(pts[v]) for v in bverts}

    # half-edges: (origin, dest, piece); segments come in twin pairs, boundary pieces are single
    he_from, he_to, he_piece, he_twin, he_edge = [], [], [], [], []
    for e, (u, v) in enumerate(pairs):
        for (o, d) in ((u, v), (v, u)):
            he_from.append(int(o))
            he_to.append(int(d))
            he_piece.append(("seg", tuple(pts[o]), tuple(pts[d])))
            he_edge.append(e)
        he_twin.extend([len(he_from) - 1, len(he_from) - 2])

    # boundary pieces between consecutive boundary vertices (ccw)
    if len(bverts):
        order = sorted(bverts.tolist(), key=lambda v: bparam[v])
        for i, v in enumerate(order):
            w = order[(i + 1) % len(order)]
            s0 = bparam[v]
            s1 = bparam[w] if i + 1 < len(order) else bparam[w] + P
            he_from.append(v)
            he_to.append(w)
            he_piece.append(("bd", s0, s1))
            he_twin.append(-1)
            he_edge.append(-1)
    else:
        ghost = nv  # the whole boundary as a single closed piece
        s0 = domain.reference_param
        he_from.append(ghost)
        he_to.append(ghost)
        he_piece.append(("bd", s0, s0 + P))
        he_twin.append(-1)
        he_edge.append(-1)
    nh = len(he_from)

    def out_angle(h):
        kind, a, b = he_piece[h]
        if kind == "seg":
            return math.atan2(b[1] - a[1], b[0] - a[0])
        t = domain.tangent(a)
        return math.atan2(t[1], t[0])

    def back_angle(h):
        kind, a, b = he_piece[h]
        if kind == "seg":
            return math.atan2(a[1] - b[1], a[0] - b[0])
        t = domain.tangent(b)
        return math.atan2(-t[1], -t[0])

    outgoing = {}
    for h in range(nh):
        outgoing.setdefault(he_from[h], []).append(h)
    nxt = np.empty(nh, dtype=np.int64)
    for h in range(nh):
        v = he_to[h]
        a_rev = back_angle(h)
        best, best_gap = None, None
        for c in outgoing[v]:
            if c == he_twin[h] and len(outgoing[v]) > 1:
                continue
            gap = (a_rev - out_angle(c)) % TWO_PI
            if gap <= 1e-14:
                gap = TWO_PI
            if best_gap is None or gap < best_gap:
                best, best_gap = c, gap
        nxt[h] = best

    cycle_of = -np.ones(nh, dtype=np.int64)
    cycles = []
    for h in range(nh):
        if cycle_of[h] >= 0:
            continue
        cyc = []
        g = h
        while cycle_of[g] < 0:
            cycle_of[g] = len(cycles)
            cyc.append(g)
            g = nxt[g]
        cycles.append(cyc)
    areas = [sum(_piece_green(he_piece[h], domain) for h in cyc) for cyc in cycles]

    # components, to attach outer cycles of floating contours to their face
    parent = list(range(max(nv, 1) + 1))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for (u, v) in pairs:
        parent[find(int(u))] = find(int(v))
    comp_of_edge = np.array([find(int(u)) for u, _ in pairs], dtype=np.int64)

    owner = {}  # negative cycle -> cycle it is attached to
    seg = config.segments
    for ci, cyc in enumerate(cycles):
        if areas[ci] >= 0:
            continue
        verts = [he_from[h] for h in cyc]
        vx = min(verts, key=lambda v: (pts[v][0], pts[v][1]))
        p = pts[vx]
        comp = find(int(vx))
        # nearest hit of the leftward ray among segments of other components
        best_x, best_h = -np.inf, None
        if len(seg):
            y0, y1 = seg[:, 0, 1], seg[:, 1, 1]
            cand = np.where(((y0 - p[1]) * (y1 - p[1]) < 0) & (comp_of_edge != comp))[0]
            for e in cand:
                (ax, ay), (bx, by) = seg[e]
                xh = ax + (p[1] - ay) * (bx - ax) / (by - ay)
                if xh < p[0] and xh > best_x:
                    best_x = xh
                    # half-edge of e having p on its left
                    h0 = 2 * e
                    a, b = he_piece[h0][1], he_piece[h0][2]
                    left = _cross(b[0] - a[0], b[1] - a[1], p[0] - a[0], p[1] - a[1]) > 0
                    best_h = h0 if left else h0 + 1
        xb = p[0] - domain.ray_exit(tuple(p), (-1.0, 0.0))
        if best_h is None or xb > best_x:
            sb = domain.boundary_param((xb, p[1]))
            best_h = None
            for h in range(nh):
                kind, s0, s1 = he_piece[h]
                if kind == "bd" and (s0 <= sb < s1 or s0 <= sb + P < s1):
                    best_h = h
                    break
        owner[ci] = int(cycle_of[best_h])

    def resolve(ci):
        seen = 0
        while areas[ci] < 0 and seen <= len(cycles):
            ci = owner[ci]
            seen += 1
        return ci

    face_of_cycle = {ci: resolve(ci) for ci in range(len(cycles))}
    face_ids = sorted({face_of_cycle[ci] for ci in range(len(cycles))})

    # parity by breadth-first search across edges from the reference face
    sref = domain.reference_param
    ref_cycle = None
    for h in range(nh):
        kind, s0, s1 = he_piece[h]
        if kind == "bd" and (s0 <= sref < s1 or s0 <= sref + P < s1):
            ref_cycle = face_of_cycle[int(cycle_of[h])]
            break
    adj = {c: [] for c in face_ids}
    for h in range(0, 2 * len(pairs), 2):
        f1 = face_of_cycle[int(cycle_of[h])]
        f2 = face_of_cycle[int(cycle_of[h + 1])]
        adj[f1].append(f2)
        adj[f2].append(f1)
    depth = {ref_cycle: 0}
    queue = deque([ref_cycle])
    while queue:
        f = queue.popleft()
        for g in adj[f]:
            if g not in depth:
                depth[g] = depth[f] + 1
                queue.append(g)

    faces = []
    for c in face_ids:
        members = [c] + [ci for ci in range(len(cycles)) if ci != c and face_of_cycle[ci] == c]
        area = sum(areas[ci] for ci in members)
        d = int(depth.get(c, 0))
        faces.append(Face(area=float(area), parity=d % 2, depth=d,
                          cycles=[[he_piece[h] for h in cycles[ci]] for ci in members]))
    return FacePartition(faces)


# ---------------------------------------------------------------------------
# parity area via Green's theorem (crossing segments allowed)
# ---------------------------------------------------------------------------

def _split_at_crossings(seg):
    """Split segments at their mutual proper intersections."""
    m = len(seg)
    if m < 2:
        return seg
    a0, a1 = seg[:, None, 0], seg[:, None, 1]
    b0, b1 = seg[None, :, 0], seg[None, :, 1]
    da, db = a1 - a0, b1 - b0
    w = b0 - a0
    den = _cross(da[..., 0], da[..., 1], db[..., 0], db[..., 1])
    with np.errstate(divide="ignore", invalid="ignore"):
        s = _cross(w[..., 0], w[..., 1], db[..., 0], db[..., 1]) / den
        t = _cross(w[..., 0], w[..., 1], da[..., 0], da[..., 1]) / den
    eps = 1e-12
    hit = (np.abs(den) > 0) & (s > eps) & (s < 1 - eps) & (t > eps) & (t < 1 - eps)
    out = []
    for i in range(m):
        cuts = np.sort(s[i][hit[i]])
        if not len(cuts):
            out.append(seg[i])
            continue
        ts = np.concatenate([[0.0], cuts, [1.0]])
        p = seg[i, 0] + ts[:, None] * (seg[i, 1] - seg[i, 0])
        p[0], p[-1] = seg[i, 0], seg[i, 1]
        out.extend(np.stack([p[:-1], p[1:]], axis=1))
    return np.array(out).reshape(-1, 2, 2)


def _crossings_to(points, target, seg, skip=None):
    """Proper crossings of the segments points[k] -> target with ``seg``."""
    p = points[:, None, :]
    q = np.asarray(target, float)[None, None, :]
    a, b = seg[None, :, 0], seg[None, :, 1]
    dpq = q - p
    dab = b - a
    den = _cross(dpq[..., 0], dpq[..., 1], dab[..., 0], dab[..., 1])
    w = a - p
    with np.errstate(divide="ignore", invalid="ignore"):
        s = _cross(w[..., 0], w[..., 1], dab[..., 0], dab[..., 1]) / den
        t = _cross(w[..., 0], w[..., 1], dpq[..., 0], dpq[..., 1]) / den
    hit = (np.abs(den) > 0) & (s > 0) & (s < 1) & (t >= 0) & (t < 1)
    if skip is not None:
        hit[np.arange(len(points)), skip] = False
    return hit.sum(axis=1)


def parity_area(segments, domain):
    """Area of {p in D : a path from p to the reference point crosses the set an odd number of times}.

    Works for any finite segment set whose interior vertices have even
    degree and whose free ends lie on the boundary, including
    self-crossing curves such as disagreement loops.
    """
    seg = np.asarray(segments, float).reshape(-1, 2, 2)
    if not len(seg):
        return 0.0
    pieces = _split_at_crossings(seg)
    ref = domain.reference_point
    a, b = pieces[:, 0], pieces[:, 1]
    d = b - a
    # probe point one third along each piece (avoids symmetric alignments)
    mid = a + d / 3.0
    c = _crossings_to(mid, ref, pieces, skip=np.arange(len(pieces)))
    side = _cross(d[:, 0], d[:, 1], ref[0] - mid[:, 0], ref[1] - mid[:, 1])
    left_odd = np.where(side > 0, c % 2, (c + 1) % 2)
    green = 0.5 * (a[:, 0] * b[:, 1] - b[:, 0] * a[:, 1])
    area = float(np.sum(np.where(left_odd == 1, green, -green)))
    # boundary pieces: parity flips at each curve end on the boundary and
    # vanishes on the piece holding the reference point
    ends = pieces.reshape(-1, 2)
    tol = domain.boundary_tol
    P = domain.perimeter
    sref = domain.reference_param
    raw = sorted((domain.boundary_param(p) - sref) % P for p in ends if domain.on_boundary(p, tol))
    groups = []
    for s in raw:
        if groups and s - groups[-1][0] <= tol:
            groups[-1][1] += 1
        else:
            groups.append([s, 1])
    if not groups:
        return area
    odd = sum(m for _, m in groups) % 2
    if odd:
        raise GeometryError("odd number of curve ends on the boundary")
    par = 0
    for i, (s0, m) in enumerate(groups):
        par = (par + m) % 2
        s1 = groups[i + 1][0] if i + 1 < len(groups) else P
        if par:
            area += domain.boundary_green(sref + s0, sref + s1)
    return area
