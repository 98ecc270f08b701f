"""Graphical construction of the disjoint-contour dynamics and perfect sampling.

A free (non-interacting) process of contour instances lives in s-time:
instances are born at rate equal to the tilted contour mass and live for
Exp(1).  An instance's ancestors are the overlapping instances alive at its
birth.  Resolving statuses in birth order (accepted iff no accepted
ancestor) turns the free process into the interacting one; the accepted
instances alive at s = 0 form an exact draw of the stationary law whenever
every clan of ancestors is finite.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import rng as rngs
from .contour_bd import ContourEnsemble
from .contour_measure import SPAWN_RATE, _check_beta, birth_weight, default_length_cap, run_contour_walk
from .geometry import ConvexDomain


class ClanCapExceeded(RuntimeError):
    """A clan grew past the size cap; the perfect regime is not reached."""

    def __init__(self, root_id, size, cap, depth):
        super().__init__(f"clan of instance {root_id} exceeded {cap} members (depth {depth:.3g})")
        self.diagnostics = {"root": root_id, "size": size, "cap": cap, "depth": depth}


@dataclass(eq=False)
class ContourInstance:
    contour: object
    s0: float
    s1: float
    id: int

    def __post_init__(self):
        if not self.s0 < self.s1:
            raise ValueError("instance lifespan must have s0 < s1")

    def alive(self, s):
        return self.s0 <= s < self.s1

    def precedes(self, other):
        """Birth order with ties broken by id."""
        return (self.s0, self.id) < (other.s0, other.id)


@dataclass
class AncestorClan:
    root: ContourInstance
    members: list
    edges: list  # (instance id, ancestor id)
    status: dict = field(default_factory=dict)  # id -> accepted

    @property
    def size(self):
        return len(self.members)

    @property
    def depth(self):
        return self.root.s0 - min(m.s0 for m in self.members)


# ---------------------------------------------------------------------------
# truncation
# ---------------------------------------------------------------------------

def _log_window_tail_bound(beta, window_radius, R):
    c = 2.0 * (beta - 2.0)
    return math.log(8.0 * math.pi ** 2 * ((window_radius + R) / c + 1.0 / c ** 2)) - c * R


def window_tail_bound(beta, window_radius, R):
    """Bound on the birth mass (per unit s-time) of contours meeting the window
    whose leftmost vertex lies further than R from it.

    Such a contour has length above 2 R, and the tilted mass of contours with
    a vertex in dx and length above L is at most 4 pi exp(-(beta - 2) L) dx.
    """
    return math.exp(_log_window_tail_bound(beta, window_radius, R))


def choose_rmax(beta, window_radius, tol=1e-6):
    if beta <= 2:
        raise ValueError("spatial truncation needs beta > 2")
    f = lambda R: _log_window_tail_bound(beta, window_radius, R) - math.log(tol)
    if f(0.0) <= 0:
        return 0.0
    return brentq(f, 0.0, 1e4)


def length_cap_for(beta, domain, tol=1e-6):
    """Length cap whose excluded per-unit-time birth mass is below tol.

    At beta = 2 there is no exponential control and the walk default is used.
    """
    if beta <= 2:
        return default_length_cap(domain)
    return max(1.0, math.log(SPAWN_RATE * domain.area / tol) / (beta - 2.0))


# ---------------------------------------------------------------------------
# free process
# ---------------------------------------------------------------------------

class FreeProcess:
    """Stationary free process around s = 0, generated backward in keyed chunks.

    ``region`` is where contours' leftmost vertices may lie; ``walk_domain``
    (None for the whole plane) is where contours must stay.  Instances alive
    at 0 come from one stream; instances that died in
    [-(j+1) chunk, -j chunk) come from stream j.
    """

    def __init__(self, region, beta, seed, walk_domain=None, length_cap=None, chunk=1.0):
        _check_beta(beta)
        self.region = region
        self.beta = beta
        self.seed = seed
        self.walk_domain = walk_domain
        self.length_cap = length_cap if length_cap is not None else length_cap_for(beta, region)
        self.chunk = chunk
        self.instances = []
        self._boxes = np.empty((0, 4))
        self._s0 = np.empty(0)
        self._s1 = np.empty(0)
        self.chunks_done = 0
        self.walks = 0
        self._add(self._spawn(rngs.stream(seed, rngs.FREE, "alive"), 1.0), alive=True)

    def _spawn(self, g, duration):
        n = g.poisson(SPAWN_RATE * self.region.area * duration)
        self.walks += n
        out = []
        pts = self.region.sample_points(g, n)
        for i in range(n):
            prop = run_contour_walk(self.walk_domain, tuple(pts[i]), g, self.length_cap, canonical=True)
            w = birth_weight(prop, self.beta)
            if w > 0 and g.random() < w:
                out.append(prop.contour)
        return out, g

    def _add(self, spawned, alive=False, j=None):
        contours, g = spawned
        new = []
        for c in contours:
            if alive:
                s0, s1 = -g.exponential(), g.exponential()
            else:
                s1 = -(j + g.random()) * self.chunk
                s0 = s1 - g.exponential()
            new.append(ContourInstance(c, s0, s1, len(self.instances) + len(new)))
        if new:
            self.instances.extend(new)
            self._boxes = np.vstack([self._boxes, [c.contour.bbox for c in new]])
            self._s0 = np.concatenate([self._s0, [c.s0 for c in new]])
            self._s1 = np.concatenate([self._s1, [c.s1 for c in new]])

    def ensure(self, s):
        """Generate chunks until every instance alive at s is present."""
        while -self.chunks_done * self.chunk > s:
            j = self.chunks_done
            self._add(self._spawn(rngs.stream(self.seed, rngs.FREE, "chunk", j), self.chunk), j=j)
            self.chunks_done += 1

    def alive_at(self, s):
        self.ensure(s)
        return [self.instances[i] for i in np.where((self._s0 <= s) & (s < self._s1))[0]]

    def ancestors(self, inst):
        """Instances alive at inst's birth whose contour meets inst's contour."""
        self.ensure(inst.s0)
        b = inst.contour.bbox
        bx = self._boxes
        cand = np.where((self._s0 <= inst.s0) & (inst.s0 < self._s1)
                        & (bx[:, 0] <= b[2]) & (bx[:, 2] >= b[0]) & (bx[:, 1] <= b[3]) & (bx[:, 3] >= b[1]))[0]
        out = []
        for i in cand:
            o = self.instances[i]
            if o is inst or not o.precedes(inst):
                continue
            if o.contour.intersects(inst.contour):
                out.append(o)
        return out

    def restricted(self, domain):
        """Predicate selecting instances whose contour lies inside ``domain``."""
        return lambda inst: inst.contour.inside(domain)


def free_process(region, beta, s_interval, seed, walk_domain=None, length_cap=None):
    """Instances of the stationary free process whose lifespan meets [a, b).

    Births in (a, b) arrive at the tilted contour mass of contours with
    leftmost vertex in ``region``; instances alive at a are a Poisson
    ensemble with Exp(1) ages and residual lifetimes.
    """
    _check_beta(beta)
    a, b = float(s_interval[0]), float(s_interval[1])
    if not b > a:
        return []
    cap = length_cap if length_cap is not None else length_cap_for(beta, region)
    g = rngs.stream(seed, rngs.FREE, "forward")
    out = []

    def spawn(duration):
        n = g.poisson(SPAWN_RATE * region.area * duration)
        pts = region.sample_points(g, n)
        for i in range(n):
            prop = run_contour_walk(walk_domain, tuple(pts[i]), g, cap, canonical=True)
            w = birth_weight(prop, beta)
            if w > 0 and g.random() < w:
                yield prop.contour

    for c in spawn(1.0):
        out.append(ContourInstance(c, a - g.exponential(), a + g.exponential(), len(out)))
    for c in spawn(b - a):
        s0 = a + (b - a) * g.random()
        out.append(ContourInstance(c, s0, s0 + g.exponential(), len(out)))
    return out


def ancestors(inst, instances):
    """Brute-force ancestor scan over a list of instances."""
    return [o for o in instances if o is not inst and o.s0 <= inst.s0 < o.s1 and o.precedes(inst)
            and o.contour.intersects(inst.contour)]


# ---------------------------------------------------------------------------
# clans
# ---------------------------------------------------------------------------

class ClanResolver:
    """Memoised backward clan exploration and status resolution."""

    def __init__(self, process, size_cap=10000, keep=None):
        self.process = process
        self.size_cap = size_cap
        self.keep = keep  # optional predicate restricting the instances in play
        self._anc = {}
        self._status = {}

    def ancestors(self, inst):
        if inst.id not in self._anc:
            anc = self.process.ancestors(inst)
            if self.keep is not None:
                anc = [a for a in anc if self.keep(a)]
            self._anc[inst.id] = anc
        return self._anc[inst.id]

    def clan(self, root):
        members = {root.id: root}
        edges = []
        stack = [root]
        while stack:
            x = stack.pop()
            for a in self.ancestors(x):
                edges.append((x.id, a.id))
                if a.id not in members:
                    members[a.id] = a
                    if len(members) > self.size_cap:
                        depth = root.s0 - min(m.s0 for m in members.values())
                        raise ClanCapExceeded(root.id, len(members), self.size_cap, depth)
                    stack.append(a)
        clan = AncestorClan(root, sorted(members.values(), key=lambda m: (m.s0, m.id)), edges)
        for m in clan.members:  # increasing birth order: ancestors are resolved first
            if m.id not in self._status:
                self._status[m.id] = not any(self._status[a.id] for a in self.ancestors(m))
        clan.status = {m.id: self._status[m.id] for m in clan.members}
        return clan

    def accepted(self, inst):
        if inst.id not in self._status:
            self.clan(inst)
        return self._status[inst.id]


def resolve_clan(root, process, size_cap=10000):
    """Clan of ``root`` with statuses; raises ClanCapExceeded past ``size_cap``."""
    return ClanResolver(process, size_cap).clan(root)


# ---------------------------------------------------------------------------
# perfect sampling
# ---------------------------------------------------------------------------

@dataclass
class PerfectSample:
    ensemble: ContourEnsemble
    free: list  # free instances alive at 0 meeting the window
    clan_sizes: list
    report: dict


def window_stats(contours, window):
    """(number of contours meeting the window disk, contour length inside it)."""
    c, r = np.asarray(window.center, float), window.radius
    n, length = 0, 0.0
    for ct in contours:
        if not ct.meets_disk(c, r):
            continue
        n += 1
        e = ct.edges
        a, d = e[:, 0] - c, e[:, 1] - e[:, 0]
        A = (d * d).sum(1)
        B = 2 * (a * d).sum(1)
        C = (a * a).sum(1) - r * r
        disc = B * B - 4 * A * C
        ok = disc > 0
        sq = np.sqrt(np.where(ok, disc, 0.0))
        t0 = np.clip((-B - sq) / (2 * A), 0, 1)
        t1 = np.clip((-B + sq) / (2 * A), 0, 1)
        length += float(np.sum(np.where(ok, (t1 - t0) * np.sqrt(A), 0.0)))
    return n, length


def perfect_sample(window, beta, seed, clan_cap=10000, tail_tol=1e-6, domain=None, rmax=None):
    """Exact draw of the stationary disjoint-contour law seen through ``window``.

    Whole-plane by default (spatially truncated at window + R_max, with the
    neglected mass reported); with ``domain`` the construction is the exact
    finite-volume one.
    """
    _check_beta(beta)
    if domain is None:
        R = choose_rmax(beta, window.radius, tail_tol) if rmax is None else rmax
        region = ConvexDomain.disk(window.center, window.radius + R)
        proc = FreeProcess(region, beta, seed)
        bound = window_tail_bound(beta, window.radius, R)
        cap_bound = SPAWN_RATE * region.area * math.exp(-(beta - 2.0) * proc.length_cap)
    else:
        R = None
        proc = FreeProcess(domain, beta, seed, walk_domain=domain)
        bound = 0.0
        cap_bound = SPAWN_RATE * domain.area * math.exp(-(beta - 2.0) * proc.length_cap)
    res = ClanResolver(proc, clan_cap)
    c, r = window.center, window.radius
    roots = [i for i in proc.alive_at(0.0) if i.contour.meets_disk(c, r)]
    sizes, acc = [], []
    for root in roots:
        clan = res.clan(root)
        sizes.append(clan.size)
        if clan.status[root.id]:
            acc.append(root)
    report = {"rmax": R, "tail_bound": bound, "length_cap": proc.length_cap, "cap_bound": cap_bound,
              "roots": len(roots), "accepted": len(acc), "walks": proc.walks,
              "chunks": proc.chunks_done}
    return PerfectSample(ContourEnsemble(tuple(a.contour for a in acc)), roots, sizes, report)


def clan_sizes(window, beta, seed, clan_cap=10000, rmax=None):
    """Sizes of the clans of all free instances alive at 0 meeting the window.

    Clans that exceed the cap are reported as None.
    """
    _check_beta(beta)
    R = choose_rmax(beta, window.radius) if rmax is None else rmax
    region = ConvexDomain.disk(window.center, window.radius + R)
    proc = FreeProcess(region, beta, seed)
    res = ClanResolver(proc, clan_cap)
    out = []
    for root in proc.alive_at(0.0):
        if not root.contour.meets_disk(window.center, window.radius):
            continue
        try:
            out.append(res.clan(root).size)
        except ClanCapExceeded:
            out.append(None)
    return out


# ---------------------------------------------------------------------------
# forward construction from an initial condition
# ---------------------------------------------------------------------------

@dataclass
class Trajectory:
    instances: list  # free instances born in (0, horizon] plus the initial ones
    accepted: dict  # id -> bool
    horizon: float

    def free_at(self, s):
        return [i for i in self.instances if i.alive(s)]

    def accepted_at(self, s):
        return [i for i in self.instances if i.alive(s) and self.accepted[i.id]]

    def ensemble_at(self, s):
        return ContourEnsemble(tuple(i.contour for i in self.accepted_at(s)), s_time=s)


def initial_condition_process(initial, domain, beta, s_horizon, seed, length_cap=None):
    """Forward construction on D from a disjoint initial ensemble.

    The free process starts empty at s = 0; initial contours get Exp(1)
    lifetimes and are accepted.  Births are resolved in time order, so clans
    never reach below s = 0.
    """
    _check_beta(beta)
    g = rngs.stream(seed, rngs.FREE, "initial")
    insts = [ContourInstance(c, 0.0, g.exponential(), i) for i, c in enumerate(initial)]
    cap = length_cap if length_cap is not None else length_cap_for(beta, domain)
    n = g.poisson(SPAWN_RATE * domain.area * s_horizon)
    times = np.sort(s_horizon * g.random(n))
    pts = domain.sample_points(g, n)
    for k in range(n):
        prop = run_contour_walk(domain, tuple(pts[k]), g, cap, canonical=True)
        w = birth_weight(prop, beta)
        if w > 0 and g.random() < w:
            s0 = float(times[k])
            insts.append(ContourInstance(prop.contour, s0, s0 + g.exponential(), len(insts)))
    accepted = {}
    live = []
    for inst in insts:  # already in birth order
        live = [o for o in live if o.s1 > inst.s0]
        ok = not any(o.contour.intersects(inst.contour) for o in live)
        accepted[inst.id] = ok
        if ok:
            live.append(inst)
    return Trajectory(insts, accepted, s_horizon)


# ---------------------------------------------------------------------------
# coupled finite volumes
# ---------------------------------------------------------------------------

def coupled_volumes(d1, d2, window, beta, seed, clan_cap=10000):
    """Resolve the construction in D1 and D2 on one shared free process.

    The free process lives on the convex hull-ish outer domain (the larger
    of the two by area must contain the other).  Returns a dict with the
    accepted window ensembles and whether they differ.
    """
    _check_beta(beta)
    outer, inner = (d1, d2) if d1.area >= d2.area else (d2, d1)
    proc = FreeProcess(outer, beta, seed, walk_domain=outer)
    c, r = window.center, window.radius
    roots_all = [i for i in proc.alive_at(0.0) if i.contour.meets_disk(c, r)]
    result = {}
    for name, dom in (("outer", outer), ("inner", inner)):
        keep = None if dom is outer else (lambda inst, dom=dom: inst.contour.inside(dom))
        res = ClanResolver(proc, clan_cap, keep)
        roots = [i for i in roots_all if keep is None or keep(i)]
        result[name] = sorted(i.id for i in roots if res.accepted(i))
    differ = result["outer"] != result["inner"]
    dist = min(_boundary_distance(d, window) for d in (d1, d2))
    return {"differ": differ, "distance": dist, "outer_ids": result["outer"], "inner_ids": result["inner"],
            "walks": proc.walks}


def _boundary_distance(domain, window):
    return domain.distance_to_boundary(window.center) - window.radius


def occupancy_covariance(beta, separations, n_samples, seed, window_radius=0.5):
    """Covariance of 'window is met by an accepted contour' indicators at each separation."""
    out = []
    for d in separations:
        a, b = [], []
        for k in range(n_samples):
            w = ConvexDomain.disk((0.0, 0.0), window_radius + d / 2.0 + window_radius)
            ps = perfect_sample(w, beta, rngs.child_seed(rngs.stream(seed, rngs.STATS, "cov", f"{d:g}", k)))
            ca = [ct for ct in ps.ensemble.contours if ct.meets_disk((-d / 2.0, 0.0), window_radius)]
            cb = [ct for ct in ps.ensemble.contours if ct.meets_disk((d / 2.0, 0.0), window_radius)]
            a.append(1.0 if ca else 0.0)
            b.append(1.0 if cb else 0.0)
        out.append(float(np.cov(a, b)[0, 1]))
    return out
