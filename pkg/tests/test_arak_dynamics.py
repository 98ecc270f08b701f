import math

import numpy as np
import pytest
from scipy import integrate, stats

from arak.arak_dynamics import (BirthSite, EvolutionLog, configuration_stats, evolve, jump_rate,
                                log_from_trajectories, sample_arak, sample_birth_sites, sample_velocity_jump,
                                sample_velocity_pair, velocity_pair_density)
from arak.geometry import ConvexDomain, check_admissible


def rate_quadrature(v):
    f = lambda u: abs(u - v) * (1 + u * u) ** -1.5
    return integrate.quad(f, -np.inf, v)[0] + integrate.quad(f, v, np.inf)[0]


def test_pair_density_normalised():
    # substitute v = tan(a) to integrate over a bounded square
    f = lambda a1, a2: velocity_pair_density(math.tan(a1), math.tan(a2)) / (math.cos(a1) * math.cos(a2)) ** 2
    h = math.pi / 2 - 1e-9
    val = integrate.dblquad(f, -h, h, -h, h, epsabs=1e-7)[0]
    assert abs(val - 1.0) < 1e-5


def test_pair_symmetric():
    v1, v2 = sample_velocity_pair(np.random.default_rng(0), 20000)
    assert np.all(v1 != v2)
    assert stats.ks_2samp(v1, v2).pvalue > 0.01
    d = v1 - v2
    assert stats.ks_2samp(d, -d).pvalue > 0.01


def test_pair_angle_law():
    # the angle between the two emitted lines has density sin/2 on (0, pi)
    v1, v2 = sample_velocity_pair(np.random.default_rng(1), 20000)
    ang = (np.arctan(v1) - np.arctan(v2)) % math.pi
    assert stats.kstest(ang, lambda x: (1 - np.cos(x)) / 2).pvalue > 0.01


def test_pair_against_density():
    # marginal of v1 from the pair density by quadrature
    v1, _ = sample_velocity_pair(np.random.default_rng(2), 20000)
    a = np.sort(np.arctan(v1))
    grid = np.linspace(-math.pi / 2, math.pi / 2, 9)[1:-1]
    for g in grid:
        f = lambda a2, a1: velocity_pair_density(math.tan(a1), math.tan(a2)) / (math.cos(a1) * math.cos(a2)) ** 2
        h = math.pi / 2 - 1e-9
        cdf = integrate.dblquad(f, -h, g, -h, h, epsabs=1e-7)[0]
        emp = np.searchsorted(a, g) / len(a)
        assert abs(emp - cdf) < 4 * math.sqrt(cdf * (1 - cdf) / len(a)) + 1e-3


def test_jump_rate_at_zero():
    assert jump_rate(0.0) == 2.0
    assert abs(rate_quadrature(0.0) - 2.0) < 1e-9


@pytest.mark.parametrize("v", [-2.0, 1.0, 5.0])
def test_empirical_jump_rate(v):
    rng = np.random.default_rng(int(10 * v) + 50)
    waits, news = zip(*(sample_velocity_jump(v, rng) for _ in range(20000)))
    lam = 1.0 / np.mean(waits)
    q = rate_quadrature(v)
    assert abs(jump_rate(v) - q) < 1e-8 * q
    assert abs(lam - q) / q < 0.02
    assert all(u != v for u in news)


def test_jump_target_law():
    v = 1.0
    rng = np.random.default_rng(3)
    u = np.array([sample_velocity_jump(v, rng)[1] for _ in range(5000)])
    q = rate_quadrature(v)

    def cdf(x):
        x = np.atleast_1d(x)
        out = []
        for xi in x:
            f = lambda t: abs(t - v) * (1 + t * t) ** -1.5
            if xi <= v:
                out.append(integrate.quad(f, -np.inf, xi)[0] / q)
            else:
                out.append((integrate.quad(f, -np.inf, v)[0] + integrate.quad(f, v, xi)[0]) / q)
        return np.array(out)

    assert stats.kstest(u, cdf).pvalue > 0.01


def test_birth_site_counts():
    sq = ConvexDomain.square(2.0)
    disk = ConvexDomain.disk((0, 0), 1.0)
    n_int, n_bd = [], []
    for k in range(300):
        g = np.random.default_rng(k)
        n_int.append(sum(1 for s in sample_birth_sites(sq, g) if s[1] == "interior"))
        n_bd.append(sum(1 for s in sample_birth_sites(disk, g) if s[1] == "boundary"))
    assert abs(np.mean(n_int) - 16 * math.pi) < 4 * math.sqrt(16 * math.pi / 300)
    assert abs(np.mean(n_bd) - 2 * math.pi) < 4 * math.sqrt(2 * math.pi / 300)


def test_degenerate_domain_no_births():
    assert sample_birth_sites(ConvexDomain.disk((0, 0), 0.0), np.random.default_rng(0)) == []


def test_boundary_births_on_boundary_and_entering():
    dom = ConvexDomain.square(1.0)
    for loc, kind, em in sample_birth_sites(dom, np.random.default_rng(5)):
        if kind == "boundary":
            assert dom.on_boundary(loc, dom.boundary_tol)
            # moving right along the line stays inside
            x, y = loc
            assert dom.contains((x + 1e-6, y + 1e-6 * em[0]))


def test_empty_log_gives_empty_configuration():
    cfg = evolve(EvolutionLog(ConvexDomain.square(1.0), 0))
    assert len(cfg) == 0


def test_single_birth_wedge():
    dom = ConvexDomain.square(1.0)
    site = BirthSite(0, (-0.5, 0.0), "interior", (1.0, -1.0))
    log = log_from_trajectories(dom, [site], {(0, 0): [(-0.5, 0), (0.5, 1)], (0, 1): [(-0.5, 0), (0.5, -1)]})
    cfg = evolve(log)
    assert len(cfg) == 2
    assert abs(cfg.total_length - 2 * math.sqrt(2)) < 1e-12
    assert check_admissible(cfg, dom).ok


def test_collision_kills_both():
    dom = ConvexDomain.square(1.0)
    sites = [BirthSite(0, (-0.5, 0.0), "interior", (1.0, -1.0)), BirthSite(1, (-1.0, 0.5), "boundary", (0.0,))]
    traj = {(0, 0): [(-0.5, 0), (0.5, 1)], (0, 1): [(-0.5, 0), (0.5, -1)], (1, 0): [(-1, 0.5), (1, 0.5)]}
    cfg = evolve(log_from_trajectories(dom, sites, traj))
    assert len(cfg) == 3
    pts, pairs, deg = cfg.graph()
    hit = [i for i, p in enumerate(pts) if np.allclose(p, (0.0, 0.5))]
    assert len(hit) == 1 and deg[hit[0]] == 2
    assert check_admissible(cfg, dom).ok


@pytest.mark.parametrize("seed", range(6))
def test_sample_admissible_and_replayable(seed):
    dom = ConvexDomain.square(1.0) if seed % 2 else ConvexDomain.disk((0.3, -0.2), 1.3)
    log, cfg = sample_arak(dom, seed)
    assert check_admissible(cfg, dom).ok
    again = evolve(log)
    assert np.array_equal(again.segments, cfg.segments)
    reloaded = EvolutionLog.loads(log.dumps())
    assert np.array_equal(evolve(reloaded).segments, cfg.segments)
    for tr in log.trajectories.values():
        assert np.all(np.diff(tr.points[:, 0]) > 0)
        assert dom.on_boundary(tr.points[-1], dom.boundary_tol)


def test_same_seed_same_sample():
    dom = ConvexDomain.square(1.0)
    assert np.array_equal(sample_arak(dom, 7)[1].segments, sample_arak(dom, 7)[1].segments)


def test_mean_vertex_count_bound():
    dom = ConvexDomain.square(1.0)
    counts = [configuration_stats(sample_arak(dom, 1000 + k)[1], dom)["interior_vertices"] for k in range(100)]
    assert np.mean(counts) <= 16 * math.pi
