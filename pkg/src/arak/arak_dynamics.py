"""Exact sampling of the Arak process through its particle representation.

The x axis plays the role of time ("r-time") and a particle's velocity is
its slope dy/dt.  Particles are born at interior Poisson sites (two per
site) or where lines of the invariant line process enter D (one each), move
along straight pieces, change velocity at the jump times of a pure-jump
process, and die on collision or when they leave D.

Every particle's free trajectory is materialised up to its exit from D when
it is born.  The traced configuration is then a pure function of the
:class:`EvolutionLog`, which is what makes inserting or removing a single
birth site well defined without re-randomising anything else.
"""

import json
import math
from dataclasses import dataclass

import numpy as np

from . import rng as rngs
from ._kernels import first_crossings
from .geometry import ConvexDomain, PolygonalConfiguration, line_params_through

LOG_SCHEMA = "arak.evolution-log"
LOG_VERSION = 1
HALF_PI = 0.5 * math.pi


class ConsistencyError(RuntimeError):
    """Internal invariant broken (e.g. an inadmissible sweep result)."""


# ---------------------------------------------------------------------------
# velocity laws
# ---------------------------------------------------------------------------

def _wrap_angle(psi):
    """Map angles to (-pi/2, pi/2], the range of slope angles atan(v)."""
    return (psi + HALF_PI) % math.pi - HALF_PI


def _turn(u):
    """Angle in (0, pi) with density sin(a)/2, by inversion."""
    return np.arccos(1.0 - 2.0 * u)


def jump_rate(v):
    """Total velocity-jump intensity per unit r-time: int |u - v| (1 + u^2)^(-3/2) du."""
    return 2.0 * np.sqrt(1.0 + np.square(v))


def velocity_pair_density(v1, v2):
    """Normalised law of the emission pair: |v1 - v2| (1 + v1^2)^(-3/2) (1 + v2^2)^(-3/2) / (2 pi)."""
    return np.abs(v1 - v2) * (1 + v1 ** 2) ** -1.5 * (1 + v2 ** 2) ** -1.5 / (2.0 * math.pi)


def sample_velocity_pair(rng, size=None):
    """Unordered emission velocities of an interior birth.

    In slope angles the pair has density proportional to |sin(a1 - a2)|,
    so one angle is uniform and the other is offset by a sin/2 turn.
    """
    n = 1 if size is None else size
    a2 = math.pi * rng.random(n) - HALF_PI
    a1 = _wrap_angle(a2 + _turn(rng.random(n)))
    v1, v2 = np.tan(a1), np.tan(a2)
    if size is None:
        return float(v1[0]), float(v2[0])
    return v1, v2


def sample_velocity_jump(v, rng):
    """(r-time waiting length, new velocity) of a particle moving with velocity v."""
    wait = rng.exponential(1.0 / float(jump_rate(v)))
    u = math.tan(_wrap_angle(math.atan(v) + float(_turn(rng.random()))))
    return wait, u


# ---------------------------------------------------------------------------
# log records
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BirthSite:
    id: int
    location: tuple
    kind: str  # "interior" | "boundary"
    emission: tuple  # (v1, v2) for interior, (v,) for boundary

    def __post_init__(self):
        if self.kind not in ("interior", "boundary"):
            raise ValueError(f"unknown birth kind {self.kind!r}")
        if self.kind == "interior" and (len(self.emission) != 2 or self.emission[0] == self.emission[1]):
            raise ValueError("interior births emit two distinct velocities")
        if self.kind == "boundary" and len(self.emission) != 1:
            raise ValueError("boundary births emit a single velocity")

    @property
    def branches(self):
        return len(self.emission)

    def to_json(self):
        return {"id": self.id, "location": list(self.location), "kind": self.kind,
                "emission": list(self.emission)}


@dataclass(frozen=True, eq=False)
class FreeTrajectory:
    """Time-ordered polyline of a particle that never collides, ending on the boundary."""

    owner: tuple  # (site id, branch)
    points: np.ndarray

    @property
    def key(self):
        return particle_key(*self.owner)

    @property
    def pieces(self):
        p = self.points
        v = (p[1:, 1] - p[:-1, 1]) / (p[1:, 0] - p[:-1, 0])
        return [(tuple(p[i]), float(v[i]), float(p[i + 1, 0] - p[i, 0])) for i in range(len(p) - 1)]

    @property
    def velocities(self):
        p = self.points
        return (p[1:, 1] - p[:-1, 1]) / (p[1:, 0] - p[:-1, 0])


def particle_key(site_id, branch):
    return 2 * int(site_id) + int(branch)


def trace_free_trajectory(domain, start, v, rng, start_on_boundary=False):
    """Run one particle from ``start`` with velocity v until it leaves D."""
    pts = [start]
    p = start
    psi = math.atan(v)
    while True:
        # jumps occur at rate 2 per unit arc length, i.e. 2 sqrt(1 + v^2) per unit r-time
        L = rng.exponential(0.5)
        d = (math.cos(psi), math.sin(psi))
        exit_len = domain.ray_exit(p, d)
        if L >= exit_len:
            q = (p[0] + exit_len * d[0], p[1] + exit_len * d[1])
            pts.append(q)
            break
        p = (p[0] + L * d[0], p[1] + L * d[1])
        pts.append(p)
        psi = _wrap_angle(psi + float(_turn(rng.random())))
    arr = np.array(pts, float)
    if np.any(np.diff(arr[:, 0]) <= 0):
        raise ConsistencyError("trajectory r-time is not strictly increasing")
    return arr


def _trajectories_for(domain, site, seed):
    out = {}
    for b, v in enumerate(site.emission):
        g = rngs.stream(seed, rngs.PARTICLE, site.id, b)
        pts = trace_free_trajectory(domain, tuple(site.location), v, g, site.kind == "boundary")
        out[particle_key(site.id, b)] = FreeTrajectory((site.id, b), pts)
    return out


class EvolutionLog:
    """All randomness of one dynamic-representation run.

    Treated as immutable: the editing helpers return new logs that share
    unchanged records.  ``archive`` keeps removed sites with their
    trajectories so they can be re-inserted exactly.
    """

    def __init__(self, domain, seed, sites=None, trajectories=None, next_id=None, archive=None):
        self.domain = domain
        self.seed = int(seed)
        self.sites = dict(sites or {})
        self.trajectories = dict(trajectories or {})
        self.next_id = int(next_id if next_id is not None else (max(self.sites, default=-1) + 1))
        self.archive = dict(archive or {})
        self._config = None

    def __len__(self):
        return len(self.sites)

    def site_ids(self):
        return sorted(self.sites)

    def with_site(self, site, trajectories):
        if site.id in self.sites:
            raise ValueError(f"duplicate birth site id {site.id}")
        sites = dict(self.sites)
        sites[site.id] = site
        traj = dict(self.trajectories)
        traj.update(trajectories)
        archive = {k: v for k, v in self.archive.items() if k != site.id}
        return EvolutionLog(self.domain, self.seed, sites, traj, max(self.next_id, site.id + 1), archive)

    def without_site(self, site_id):
        if site_id not in self.sites:
            raise ValueError(f"unknown birth site id {site_id}")
        site = self.sites[site_id]
        keys = [particle_key(site_id, b) for b in range(site.branches)]
        sites = {k: v for k, v in self.sites.items() if k != site_id}
        traj = {k: v for k, v in self.trajectories.items() if k not in keys}
        archive = dict(self.archive)
        archive[site_id] = (site, {k: self.trajectories[k] for k in keys})
        return EvolutionLog(self.domain, self.seed, sites, traj, self.next_id, archive)

    def same_records(self, other):
        """Equality of sites and trajectories (archive ignored)."""
        if self.sites != other.sites or set(self.trajectories) != set(other.trajectories):
            return False
        return all(np.array_equal(self.trajectories[k].points, other.trajectories[k].points)
                   for k in self.trajectories)

    # persistence -----------------------------------------------------------
    def dumps(self):
        head = {"schema": LOG_SCHEMA, "version": LOG_VERSION, "domain": self.domain.to_json(),
                "seed": self.seed, "next_id": self.next_id}
        lines = [json.dumps(head)]
        for sid in self.site_ids():
            rec = self.sites[sid].to_json()
            rec["trajectories"] = [self.trajectories[particle_key(sid, b)].points.tolist()
                                   for b in range(self.sites[sid].branches)]
            lines.append(json.dumps(rec))
        return "\n".join(lines) + "\n"

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.dumps())

    @classmethod
    def loads(cls, text):
        lines = [ln for ln in text.splitlines() if ln.strip()]
        head = json.loads(lines[0])
        if head.get("schema") != LOG_SCHEMA or head.get("version") != LOG_VERSION:
            raise ValueError(f"unsupported log schema {head.get('schema')!r} v{head.get('version')}")
        domain = ConvexDomain.from_json(head["domain"])
        sites, traj = {}, {}
        for ln in lines[1:]:
            rec = json.loads(ln)
            site = BirthSite(int(rec["id"]), tuple(rec["location"]), rec["kind"], tuple(rec["emission"]))
            sites[site.id] = site
            for b, pts in enumerate(rec["trajectories"]):
                traj[particle_key(site.id, b)] = FreeTrajectory((site.id, b), np.array(pts, float))
        return cls(domain, head["seed"], sites, traj, head["next_id"])

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.loads(fh.read())


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def sample_birth_sites(domain, rng):
    """Birth sites of a fresh run: Poisson(pi |D|) interior points and line entry points.

    Returns a list of (location, kind, emission) with boundary emissions
    already fixed by the sampled line; interior emissions are left as None.
    """
    n_int = rng.poisson(math.pi * domain.area) if domain.area > 0 else 0
    pts = domain.sample_points(rng, n_int)
    out = [((float(x), float(y)), "interior", None) for x, y in pts]
    n_bd = rng.poisson(domain.perimeter) if domain.area > 0 else 0
    phis, rhos = domain.sample_lines(rng, n_bd)
    for phi, rho in zip(phis, rhos):
        entry = boundary_entry(domain, phi, rho)
        if entry is not None:
            out.append(entry)
    return out


def boundary_entry(domain, phi, rho):
    """Entry point and velocity of a line entering D, or None if it misses or is vertical."""
    from .geometry import Line
    line = Line(float(phi), float(rho))
    if abs(math.cos(line.phi)) < 1e-12:
        return None
    ch = domain.chord(line)
    if ch is None:
        return None
    a, b = ch
    entry = a if a[0] < b[0] else b
    return ((float(entry[0]), float(entry[1])), "boundary", (line.velocity,))


def make_site(site_id, location, kind, emission, seed):
    if emission is None:
        g = rngs.stream(seed, rngs.SITES, "emission", site_id)
        emission = sample_velocity_pair(g)
    return BirthSite(int(site_id), (float(location[0]), float(location[1])), kind, tuple(float(v) for v in emission))


def build_log(domain, seed, raw_sites):
    log = EvolutionLog(domain, seed)
    sites, traj = {}, {}
    for i, (loc, kind, em) in enumerate(raw_sites):
        site = make_site(i, loc, kind, em, seed)
        sites[i] = site
        traj.update(_trajectories_for(domain, site, seed))
    log.sites, log.trajectories, log.next_id = sites, traj, len(sites)
    return log


def log_from_trajectories(domain, sites, polylines, seed=0):
    """Assemble a log from explicit sites and free trajectories (fixtures, replay)."""
    sdict, traj = {}, {}
    for site in sites:
        sdict[site.id] = site
        for b in range(site.branches):
            pts = np.asarray(polylines[(site.id, b)], float)
            traj[particle_key(site.id, b)] = FreeTrajectory((site.id, b), pts)
    return EvolutionLog(domain, seed, sdict, traj)


def sample_arak(domain, seed):
    """Draw a log and its traced configuration; ``seed`` keys all streams."""
    g = rngs.stream(seed, rngs.SITES)
    log = build_log(domain, seed, sample_birth_sites(domain, g))
    return log, evolve(log)


# ---------------------------------------------------------------------------
# collision sweep
# ---------------------------------------------------------------------------

def _sweep_inputs(log):
    keys = sorted(log.trajectories)
    segs, owner = [], []
    for i, k in enumerate(keys):
        p = log.trajectories[k].points
        segs.append(np.column_stack([p[:-1], p[1:]]))
        owner.append(np.full(len(p) - 1, i, np.int64))
    if not segs:
        return keys, np.empty((0, 4)), np.empty(0, np.int64)
    return keys, np.concatenate(segs), np.concatenate(owner)


def collision_events(log):
    """All candidate collisions: each particle pair's earliest crossing, in sweep order."""
    keys, seg, owner = _sweep_inputs(log)
    if len(keys) < 2:
        return keys, np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0), np.empty(0)
    P, Q, X, Y = first_crossings(seg, owner, len(keys))
    karr = np.asarray(keys, np.int64)
    order = np.lexsort((karr[Q], karr[P], Y, X))
    return keys, P[order], Q[order], X[order], Y[order]


def evolve(log, check=False):
    """Trace the configuration determined by the log (collisions kill both particles)."""
    if log._config is not None:
        return log._config
    keys, P, Q, X, Y = collision_events(log)
    n = len(keys)
    death = np.full(n, np.inf)
    death_pt = [None] * n
    for p, q, x, y in zip(P, Q, X, Y):
        if death[p] == np.inf and death[q] == np.inf:
            death[p] = death[q] = x
            death_pt[p] = death_pt[q] = (x, y)
    segs, carriers, traces = [], [], {}
    start = 0
    for i, k in enumerate(keys):
        pts = log.trajectories[k].points
        if death_pt[i] is not None:
            m = int(np.searchsorted(pts[:, 0], death[i], side="left"))
            pts = np.vstack([pts[:m], [death_pt[i]]])
        # (birth time, death time, first segment, end segment)
        traces[k] = (float(pts[0, 0]), float(pts[-1, 0]), start, start + len(pts) - 1)
        start += len(pts) - 1
        segs.append(np.stack([pts[:-1], pts[1:]], axis=1))
        full = log.trajectories[k].points
        phi, rho = line_params_through(full[:len(pts) - 1], full[1:len(pts)])
        carriers.append(np.column_stack([phi, rho]))
    if segs:
        seg = np.concatenate(segs)
        car = np.concatenate(carriers)
    else:
        seg, car = np.empty((0, 2, 2)), np.empty((0, 2))
    cfg = PolygonalConfiguration(seg, car, traces)
    if check:
        from .geometry import check_admissible
        rep = check_admissible(cfg, log.domain)
        if not rep:
            raise ConsistencyError(f"sweep produced an inadmissible configuration: {rep}")
    log._config = cfg
    return cfg


# ---------------------------------------------------------------------------
# vertex statistics
# ---------------------------------------------------------------------------

def extreme_vertex_counts(config, domain):
    """Counts of interior vertices that are left/right/lower/upper extreme.

    A vertex is left-extreme when both incident edges leave it towards
    larger x, and similarly for the other directions.
    """
    pts, pairs, deg = config.graph()
    counts = {"left": 0, "right": 0, "lower": 0, "upper": 0}
    if not len(pts):
        return counts
    tol = domain.boundary_tol
    inc = [[] for _ in range(len(pts))]
    for (u, v) in pairs:
        inc[u].append(pts[v] - pts[u])
        inc[v].append(pts[u] - pts[v])
    for i, p in enumerate(pts):
        if deg[i] != 2 or domain.on_boundary(p, tol):
            continue
        d1, d2 = inc[i]
        if d1[0] > 0 and d2[0] > 0:
            counts["left"] += 1
        if d1[0] < 0 and d2[0] < 0:
            counts["right"] += 1
        if d1[1] > 0 and d2[1] > 0:
            counts["lower"] += 1
        if d1[1] < 0 and d2[1] < 0:
            counts["upper"] += 1
    return counts


def configuration_stats(config, domain):
    """Scalar summaries used for sampler comparisons."""
    pts, pairs, deg = config.graph()
    tol = domain.boundary_tol
    on_bd = sum(1 for p in pts if domain.on_boundary(p, tol))
    return {"total_length": config.total_length, "interior_vertices": int(len(pts) - on_bd),
            "boundary_hits": int(on_bd), "edges": int(len(config))}
