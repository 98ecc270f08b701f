"""Acceptance suites: each function runs one end-to-end check and returns StatReports.

Budgets and seeds are arguments so the same code serves the test suite and
the ``arak stats`` command.
"""

import math
import time

import numpy as np
from scipy import stats

from . import rng as rngs
from .arak_dynamics import ConsistencyError, configuration_stats, extreme_vertex_counts, sample_arak
from .contour_bd import rejection_sample_conditioned_poisson, run_contour_bd
from .contour_measure import tail_bound, walk_mass_estimate
from .disagreement import insert_birth, remove_birth, restore_birth
from .geometry import ConvexDomain, Line, check_admissible, mu_mass_hitting
from .graphical import (ClanCapExceeded, clan_sizes, coupled_volumes, initial_condition_process,
                        perfect_sample, window_stats)
from .harness import (DEFAULT_THRESHOLDS, StatReport, estimate_connective_constant, stats_extreme_vertices,
                      stats_two_sampler)
from .metropolis import run_chain
from .gibbs import ModelParams


def _th(thresholds):
    return {**DEFAULT_THRESHOLDS, **(thresholds or {})}


def cauchy(thresholds=None, rel_tol=1e-9):
    out = []
    for name, dom, exact in (("unit_disk", ConvexDomain.disk((0, 0), 1.0), 2 * math.pi),
                             ("unit_square", ConvexDomain.box(0, 0, 1, 1), 4.0),
                             ("square_side2", ConvexDomain.square(1.0), 8.0)):
        t = time.perf_counter()
        m = mu_mass_hitting(dom)
        dt = time.perf_counter() - t
        err = abs(m - exact) / exact
        out.append(StatReport(f"line_mass_{name}", m, 0.0, "relative error", err, rel_tol,
                              err <= rel_tol and dt < 1.0, True, {"exact": exact, "seconds": dt}))
    return out


def extreme_vertices(n_samples=500, seed=0, half=2.0, thresholds=None):
    dom = ConvexDomain.square(half)
    counts = [extreme_vertex_counts(sample_arak(dom, rngs.child_seed(rngs.stream(seed, rngs.STATS, "ev", k)))[1],
                                    dom) for k in range(n_samples)]
    return stats_extreme_vertices(counts, dom, thresholds)


def disagreement_loops(n_rounds=1000, seed=0, half=1.0):
    """Alternate insert-then-remove and remove-then-restore rounds on fresh samples.

    Each round checks that both symmetric differences are single curves,
    that they are mirror images, that the round trip is bitwise exact and
    that every configuration is admissible.
    """
    dom = ConvexDomain.square(half)
    bad = {"not_single": 0, "not_restored": 0, "not_mirrored": 0, "not_admissible": 0}
    kinds = {"closed": 0, "chopped": 0}
    for k in range(n_rounds):
        s = rngs.child_seed(rngs.stream(seed, rngs.STATS, "loops", k))
        log, cfg = sample_arak(dom, s)
        g = rngs.stream(s, rngs.STATS, "ops")
        try:
            if k % 2 == 0 or len(log) == 0:
                if g.random() < math.pi * dom.area / (math.pi * dom.area + mu_mass_hitting(dom)):
                    x0 = tuple(dom.sample_points(g, 1)[0])
                else:
                    phi, rho = dom.sample_lines(g, 1)
                    x0 = Line(float(phi[0]), float(rho[0]))
                log1, cfg1, loop1 = insert_birth(log, x0, g)
                sid = max(log1.site_ids())
                log2, cfg2, loop2 = remove_birth(log1, sid)
            else:
                sid = log.site_ids()[int(g.integers(len(log)))]
                log1, cfg1, loop1 = remove_birth(log, sid)
                log2, cfg2, loop2 = restore_birth(log1, sid)
        except ConsistencyError:
            bad["not_single"] += 1
            continue
        if loop1.kind not in kinds or loop2.kind not in kinds:
            bad["not_single"] += 1
            continue
        kinds[loop1.kind] += 1
        if not (np.array_equal(cfg2.segments, cfg.segments) and np.array_equal(cfg2.carriers, cfg.carriers)):
            bad["not_restored"] += 1
        if not (np.array_equal(loop2.positive, loop1.negative) and np.array_equal(loop2.negative, loop1.positive)):
            bad["not_mirrored"] += 1
        if not check_admissible(cfg1, dom).ok:
            bad["not_admissible"] += 1
    out = []
    for key, v in bad.items():
        out.append(StatReport(f"loops_{key}", float(v), 0.0, "count over rounds", float("nan"), 0.0,
                              v == 0, True, {"rounds": n_rounds, **kinds}))
    return out


def metropolis_exactness(n_per_arm=300, seed=0, half=1.0, thinning=3.0, burn_in=20.0, thresholds=None):
    dom = ConvexDomain.square(half)
    keys = ("total_length", "interior_vertices", "boundary_hits")
    ref = []
    for k in range(n_per_arm):
        _, cfg = sample_arak(dom, rngs.child_seed(rngs.stream(seed, rngs.STATS, "ref", k)))
        ref.append(configuration_stats(cfg, dom))
    horizon = burn_in + thinning * (n_per_arm - 1) + 1e-9
    chain = [configuration_stats(c.base, dom)
             for _, c in run_chain(dom, ModelParams(), "none", horizon, seed + 1, thinning, burn_in)]
    return stats_two_sampler(chain, ref, keys, thresholds, name="metropolis_vs_direct")


def conditioned_poisson(seed=0, radius=2.0, beta=4.0, s_horizon=1500.0, thinning=3.0, n_direct=500,
                        thresholds=None):
    dom = ConvexDomain.disk((0, 0), radius)
    chain = [{"count": len(e), "length": e.total_length}
             for _, e in run_contour_bd(dom, beta, s_horizon, seed, thinning, burn_in=20.0)]
    g = rngs.stream(seed, rngs.STATS, "direct")
    direct = []
    for _ in range(n_direct):
        e = rejection_sample_conditioned_poisson(dom, beta, g)
        direct.append({"count": len(e), "length": e.total_length})
    return stats_two_sampler(chain, direct, ("count", "length"), thresholds, name="bd_vs_conditioned")


def tail_mass(seed=0, n_walks=100000, betas=(3.0, 4.0), lengths=(2.0, 5.0), z_max=3.0):
    """Vertex-marked mass of long contours per unit area against 4 pi exp(-(beta - 2) R)."""
    unit = ConvexDomain.box(0, 0, 1, 1)
    out = []
    for beta in betas:
        for R in lengths:
            g = rngs.stream(seed, rngs.WALK, "tail", int(beta * 10), int(R * 10))
            m, se = walk_mass_estimate(None, beta, n_walks, g, predicate=lambda c, R=R: c.length > R,
                                       canonical=False, start_region=unit)
            bound = tail_bound(beta, R)
            out.append(StatReport(f"tail_beta{beta:g}_R{R:g}", m, se, "estimate <= bound + z SE",
                                  float("nan"), bound, bool(m <= bound + z_max * se), True,
                                  {"bound": bound, "n_walks": n_walks}))
    return out


def perfect_vs_finite(seed=0, beta=6.0, n_perfect=300, domain_radius=7.0, s_horizon=None, thinning=3.0,
                      n_coupled=1000, distances=(0.01, 0.04, 0.16, 0.64), thresholds=None):
    th = _th(thresholds)
    window = ConvexDomain.disk((0, 0), 1.0)
    dom = ConvexDomain.disk((0, 0), domain_radius)
    perf = []
    fails = 0
    for k in range(n_perfect):
        try:
            ps = perfect_sample(window, beta, rngs.child_seed(rngs.stream(seed, rngs.PERFECT, k)))
        except ClanCapExceeded:
            fails += 1
            continue
        n, L = window_stats(ps.ensemble.contours, window)
        perf.append({"count": n, "length": L})
    burn = 10.0
    horizon = burn + thinning * (n_perfect - 1) + 1e-9 if s_horizon is None else s_horizon
    bd = []
    for _, e in run_contour_bd(dom, beta, horizon, seed + 1, thinning, burn_in=burn):
        n, L = window_stats(e.contours, window)
        bd.append({"count": n, "length": L})
    out = stats_two_sampler(perf, bd, ("count", "length"), th, name="perfect_vs_bd")
    out.append(StatReport("perfect_cap_failures", float(fails), 0.0, "count", float("nan"), 0.0, fails == 0, True))
    xs, ys, freq = [], [], []
    for d in distances:
        d1 = ConvexDomain.disk((0, 0), 1.0 + d)
        d2 = ConvexDomain.disk((0, 0), 2.0 + d)
        flags = [coupled_volumes(d1, d2, window, beta, rngs.child_seed(rngs.stream(seed, rngs.PERFECT, "cv", k)))
                 ["differ"] for k in range(n_coupled)]
        xs += [d] * len(flags)
        ys += flags
        freq.append(float(np.mean(flags)))
    tau, p = stats.kendalltau(xs, ys, alternative="less")
    out.append(StatReport("coupled_disagreement_trend", float(tau), float("nan"), "Kendall tau (decreasing)",
                          float(p), th["level"], bool(p < th["level"]), True,
                          {"distances": list(distances), "frequency": freq, "replicates": n_coupled}))
    return out


def domination(seed=0, n_runs=100, checks_per_run=10, beta=4.0, radius=2.0, s_horizon=5.0):
    """Accepted instances are a subset of free ones at sampled s, and stay disjoint."""
    dom = ConvexDomain.disk((0, 0), radius)
    violations = disjoint_fail = checks = 0
    for k in range(n_runs):
        s = rngs.child_seed(rngs.stream(seed, rngs.PERFECT, "dom", k))
        init = rejection_sample_conditioned_poisson(dom, beta, rngs.stream(s, rngs.STATS, "init")).contours
        tr = initial_condition_process(init, dom, beta, s_horizon, s)
        g = rngs.stream(s, rngs.STATS, "times")
        for t in np.sort(s_horizon * g.random(checks_per_run)):
            free = {tuple(map(tuple, i.contour.vertices)) for i in tr.free_at(t)}
            acc = tr.ensemble_at(t)
            checks += 1
            if any(tuple(map(tuple, c.vertices)) not in free for c in acc.contours):
                violations += 1
            if not acc.disjoint:
                disjoint_fail += 1
    return [StatReport("domination_violations", float(violations), 0.0, "count", float("nan"), 0.0,
                       violations == 0, True, {"checks": checks}),
            StatReport("domination_disjoint_failures", float(disjoint_fail), 0.0, "count", float("nan"), 0.0,
                       disjoint_fail == 0, True, {"checks": checks})]


def clan_tail(seed=0, n_clans=10000, beta=6.0, window_radius=10.0, clan_cap=10000, thresholds=None,
              max_cap_rate=1e-3):
    """Geometric fit of the clan-size law; the log-survival slope is log q."""
    th = _th(thresholds)
    window = ConvexDomain.disk((0, 0), window_radius)
    sizes = []
    k = 0
    while len(sizes) < n_clans:
        sizes += clan_sizes(window, beta, rngs.child_seed(rngs.stream(seed, rngs.PERFECT, "clan", k)), clan_cap)
        k += 1
    sizes = sizes[:n_clans]
    capped = sum(1 for s in sizes if s is None)
    x = np.array([s for s in sizes if s is not None], float)
    n = len(x)
    # geometric law P(size = k) = (1 - q) q^(k - 1): survival slope log q
    q = 1.0 - n / x.sum()
    if q <= 0:
        slope, se, p = -math.inf, 0.0, 0.0
    else:
        slope = math.log(q)
        se = (1.0 - q) / math.sqrt(q * n)
        p = float(stats.norm.cdf(slope / se))
    ks = np.arange(1, int(x.max()) + 1)
    surv = [(x >= j).mean() for j in ks]
    rate = capped / len(sizes)
    return [StatReport("clan_log_survival_slope", slope, se, "Wald (slope < 0)", p, th["level"],
                       bool(p < th["level"] and slope < 0), True,
                       {"clans": len(sizes), "survival": surv, "max_size": int(x.max()), "runs": k}),
            StatReport("clan_cap_rate", rate, 0.0, "fraction", float("nan"), max_cap_rate,
                       rate < max_cap_rate, True, {"capped": capped})]


def connective_constant(seed=0, n_walks=100000):
    return [estimate_connective_constant(n_walks, seed)]


SUITES = {
    "cauchy": cauchy,
    "extreme-vertices": extreme_vertices,
    "disagreement": disagreement_loops,
    "metropolis": metropolis_exactness,
    "conditioned-poisson": conditioned_poisson,
    "tail": tail_mass,
    "perfect": perfect_vs_finite,
    "domination": domination,
    "clan-tail": clan_tail,
    "connective": connective_constant,
}
