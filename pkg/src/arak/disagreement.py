"""Single-site insertion/removal with randomness reuse, and disagreement loops.

Adding or removing one birth site while keeping every other particle's
recorded trajectory changes the traced configuration along a single curve:
a closed loop, or a path chopped by the boundary.  Parts of the curve
present only in the new configuration are "positive", parts present only
in the old one are "negative".
"""

import math
from dataclasses import dataclass

import numpy as np

from . import rng as rngs
from .arak_dynamics import (BirthSite, ConsistencyError, FreeTrajectory, boundary_entry, evolve,
                            particle_key, sample_velocity_pair, trace_free_trajectory)
from .geometry import Line, PolygonalConfiguration, _vertex_key, line_params_through


@dataclass(frozen=True, eq=False)
class DisagreementLoop:
    positive: np.ndarray  # (k, 2, 2) segments in new but not old
    negative: np.ndarray  # (k, 2, 2) segments in old but not new
    kind: str  # "empty" | "closed" | "chopped"

    @property
    def segments(self):
        return np.concatenate([self.positive, self.negative]).reshape(-1, 2, 2)

    @property
    def positive_length(self):
        return _length(self.positive)

    @property
    def negative_length(self):
        return _length(self.negative)

    @property
    def length(self):
        return self.positive_length + self.negative_length

    @property
    def empty(self):
        return self.kind == "empty"

    def reversed(self):
        """The same loop seen from the other configuration."""
        return DisagreementLoop(self.negative, self.positive, self.kind)

    def touches_boundary(self, domain):
        return self.kind == "chopped" or PolygonalConfiguration(self.segments).touches_boundary(domain)


def _length(seg):
    if not len(seg):
        return 0.0
    d = seg[:, 1] - seg[:, 0]
    return float(np.hypot(d[:, 0], d[:, 1]).sum())


def _as_segments(lst):
    return np.array(lst, float).reshape(-1, 2, 2)


# ---------------------------------------------------------------------------
# tracing
# ---------------------------------------------------------------------------

def _particle_points(cfg, k):
    _, _, i0, i1 = cfg.traces[k]
    seg = cfg.segments[i0:i1]
    return np.vstack([seg[:, 0], seg[-1:, 1]])




def _exact_difference(old, new):
    pos, neg = [], []
    keys = set(old.traces) | set(new.traces)
    for k in sorted(keys):
        if k not in old.traces:
            pos.extend(new.segments[new.traces[k][2]:new.traces[k][3]])
            continue
        if k not in new.traces:
            neg.extend(old.segments[old.traces[k][2]:old.traces[k][3]])
            continue
        to, tn = old.traces[k][1], new.traces[k][1]
        if to == tn:
            continue
        if tn > to:
            longer, shorter, out = _particle_points(new, k), _particle_points(old, k), pos
        else:
            longer, shorter, out = _particle_points(old, k), _particle_points(new, k), neg
        cut = shorter[-1]
        m = int(np.searchsorted(longer[:, 0], cut[0], side="right"))
        pts = np.vstack([cut[None, :], longer[m:]])
        out.extend(np.stack([pts[:-1], pts[1:]], axis=1))
    return _as_segments(pos), _as_segments(neg)


def _carrier_groups(seg, tol):
    phi, rho = line_params_through(seg[:, 0], seg[:, 1])
    # identify phi ~ pi with phi ~ 0 (rho changes sign)
    wrap = phi > math.pi - 1e-7
    phi = np.where(wrap, phi - math.pi, phi)
    rho = np.where(wrap, -rho, rho)
    groups = {}
    for i in range(len(seg)):
        key = (round(phi[i] / 1e-7), round(rho[i] / tol))
        groups.setdefault(key, []).append(i)
    return groups, phi, rho


def _union(intervals, tol):
    out = []
    for a, b in sorted(intervals):
        if out and a <= out[-1][1] + tol:
            out[-1][1] = max(out[-1][1], b)
        else:
            out.append([a, b])
    return out


def _minus(A, B, tol):
    """Interval set difference A minus B (both unions)."""
    out = []
    for a, b in A:
        cur = [[a, b]]
        for c, d in B:
            nxt = []
            for x, y in cur:
                if d <= x + tol or c >= y - tol:
                    nxt.append([x, y])
                    continue
                if c > x + tol:
                    nxt.append([x, c])
                if d < y - tol:
                    nxt.append([d, y])
            cur = nxt
        out.extend(cur)
    return out


def _geometric_difference(old, new, tol):
    """Symmetric difference by grouping segments on shared carrier lines."""
    seg_o, seg_n = old.segments, new.segments
    allseg = np.concatenate([seg_o, seg_n]).reshape(-1, 2, 2)
    if not len(allseg):
        return _as_segments([]), _as_segments([])
    groups, phi, rho = _carrier_groups(allseg, tol)
    no = len(seg_o)
    pos, neg = [], []
    for idx in groups.values():
        i0 = idx[0]
        d = np.array([math.cos(phi[i0]), -math.sin(phi[i0])])
        n = np.array([math.sin(phi[i0]), math.cos(phi[i0])])
        base = rho[i0] * n
        io = [allseg[i] @ d for i in idx if i < no]
        inew = [allseg[i] @ d for i in idx if i >= no]
        A = _union([sorted(x) for x in io], tol)
        B = _union([sorted(x) for x in inew], tol)
        for lst, out in ((_minus(B, A, tol), pos), (_minus(A, B, tol), neg)):
            for a, b in lst:
                if b - a > tol:
                    out.append([base + a * d, base + b * d])
    return _as_segments(pos), _as_segments(neg)


def _classify(pos, neg, domain):
    seg = np.concatenate([pos, neg]).reshape(-1, 2, 2)
    if not len(seg):
        return "empty"
    keys = {}
    pts = []
    pairs = []
    for s in seg:
        ids = []
        for p in s:
            k = _vertex_key(p)
            if k not in keys:
                keys[k] = len(pts)
                pts.append(p)
            ids.append(keys[k])
        pairs.append(ids)
    pairs = np.array(pairs)
    deg = np.bincount(pairs.ravel(), minlength=len(pts))
    parent = list(range(len(pts)))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for u, v in pairs:
        parent[find(u)] = find(v)
    if len({find(i) for i in range(len(pts))}) != 1:
        raise ConsistencyError("symmetric difference is not a single connected curve")
    if np.any(deg > 2):
        raise ConsistencyError("symmetric difference has a branching vertex")
    ends = np.where(deg == 1)[0]
    if len(ends) == 0:
        return "closed"
    if len(ends) == 2:
        if domain is not None:
            tol = domain.boundary_tol
            if not all(domain.on_boundary(pts[e], tol) for e in ends):
                raise ConsistencyError("open disagreement path with an interior end")
        return "chopped"
    raise ConsistencyError(f"symmetric difference has {len(ends)} free ends")


def trace_loop(old, new, domain=None, verify=True):
    """Disagreement loop between two configurations that differ by one birth site."""
    if old.traces is not None and new.traces is not None:
        pos, neg = _exact_difference(old, new)
    else:
        scale = domain.diameter if domain is not None else 1.0
        pos, neg = _geometric_difference(old, new, 1e-9 * max(scale, 1.0))
    kind = _classify(pos, neg, domain) if verify else ("empty" if not (len(pos) or len(neg)) else "closed")
    return DisagreementLoop(pos, neg, kind)


# ---------------------------------------------------------------------------
# insertion and removal
# ---------------------------------------------------------------------------

def _boundary_direction(domain, point, rng):
    """Velocity of a boundary birth at ``point``: line law conditioned on entry there."""
    s = domain.boundary_param(point)
    tx, ty = domain.tangent(s)
    for _ in range(10000):
        w = math.acos(1.0 - 2.0 * rng.random())  # angle to the tangent, density sin/2
        dx = tx * math.cos(w) - ty * math.sin(w)
        if dx > 1e-12:
            dy = tx * math.sin(w) + ty * math.cos(w)
            return dy / dx
    raise ValueError("no line can enter the domain at this boundary point")


def new_site(log, x0, rng):
    """A BirthSite for ``x0`` with fresh emission marks drawn from ``rng``."""
    sid = log.next_id
    domain = log.domain
    if isinstance(x0, Line):
        entry = boundary_entry(domain, x0.phi, x0.rho)
        if entry is None:
            raise ValueError("boundary line does not enter the domain")
        loc, kind, em = entry
        return BirthSite(sid, loc, kind, em)
    p = (float(x0[0]), float(x0[1]))
    tol = domain.boundary_tol
    if domain.on_boundary(p, tol):
        return BirthSite(sid, p, "boundary", (_boundary_direction(domain, p, rng),))
    if not domain.contains(p, strict=True):
        raise ValueError(f"birth point {p} lies outside the domain")
    return BirthSite(sid, p, "interior", sample_velocity_pair(rng))


def insert_birth(log, x0, rng=None):
    """Add a birth site at ``x0`` (interior point, boundary point or entering Line).

    Returns (new log, new configuration, loop).  The new particles' paths are
    drawn from ``rng`` (a keyed stream when None) and recorded in the log.
    """
    for s in log.sites.values():
        if not isinstance(x0, Line) and tuple(s.location) == (float(x0[0]), float(x0[1])):
            raise ValueError(f"{x0} is already a birth site")
    if rng is None:
        rng = rngs.stream(log.seed, rngs.SITES, "insert", log.next_id)
    site = new_site(log, x0, rng)
    traj = {}
    for b, v in enumerate(site.emission):
        pts = trace_free_trajectory(log.domain, site.location, v, rng)
        traj[particle_key(site.id, b)] = FreeTrajectory((site.id, b), pts)
    return _apply_insert(log, site, traj)


def _apply_insert(log, site, traj):
    old = evolve(log)
    new_log = log.with_site(site, traj)
    new = evolve(new_log)
    return new_log, new, trace_loop(old, new, log.domain)


def restore_birth(log, site_id):
    """Re-insert an archived site with its recorded randomness."""
    if site_id not in log.archive:
        raise ValueError(f"site {site_id} is not archived")
    site, traj = log.archive[site_id]
    return _apply_insert(log, site, traj)


def remove_birth(log, site_id):
    """Remove a birth site; its records move to the archive."""
    if site_id not in log.sites:
        raise ValueError(f"unknown birth site id {site_id}")
    old = evolve(log)
    new_log = log.without_site(site_id)
    new = evolve(new_log)
    return new_log, new, trace_loop(old, new, log.domain)
