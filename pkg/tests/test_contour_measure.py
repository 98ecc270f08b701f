import itertools
import math

import numpy as np
import pytest
from scipy import stats

from arak.contour_measure import (CapacityError, Contour, RegimeError, contour_birth_sampler,
                                  enumerate_contours_from_lines, run_contour_walk, sample_contour_poisson,
                                  sample_turn, self_avoiding_lifetimes, spawn_attempt, tail_bound,
                                  theta_mass_estimator, triangle_mass_quadrature, walk_mass_estimate)
from arak.geometry import ConvexDomain

DISK = ConvexDomain.disk((0, 0), 1.0)


def test_turn_angle_law():
    a = sample_turn(np.random.default_rng(0), 20000)
    assert np.all((a > 0) & (a < 2 * math.pi))

    def cdf(x):
        x = np.asarray(x)
        return np.where(x < math.pi, (1 - np.cos(x)) / 4, 0.5 + (1 - np.cos(x - math.pi)) / 4)

    assert stats.kstest(a, cdf).pvalue > 0.01


def test_walk_turn_rate():
    # the first straight piece of a whole-plane walk is exponential with mean 1/4
    g = np.random.default_rng(1)
    first = []
    for _ in range(5000):
        p = run_contour_walk(None, (0.0, 0.0), g, length_cap=5.0)
        if len(p.points) > 2:
            first.append(math.hypot(*(p.points[1] - p.points[0])))
    assert stats.kstest(first, "expon", args=(0, 0.25)).pvalue > 0.01


def test_closed_walks_are_simple_and_inside():
    g = np.random.default_rng(2)
    n_closed = 0
    for _ in range(3000):
        prop, w = spawn_attempt(DISK, 3.0, g, canonical=False)
        if prop.contour is not None:
            n_closed += 1
            assert prop.outcome == "closed"
            assert prop.contour.is_simple()
            assert prop.contour.inside(DISK)
            assert 0 < w <= 1
    assert n_closed > 0


def test_canonical_start_is_leftmost():
    g = np.random.default_rng(3)
    for _ in range(3000):
        prop, _ = spawn_attempt(DISK, 2.0, g, canonical=True)
        if prop.contour is not None:
            assert np.argmin(prop.contour.vertices[:, 0]) == 0


def test_weight_formula():
    g = np.random.default_rng(4)
    for _ in range(2000):
        prop, w = spawn_attempt(DISK, 4.0, g)
        if prop.contour is not None:
            expect = math.exp(-4 * prop.closing_length - 2.0 * prop.contour.length)
            assert w == pytest.approx(expect, rel=1e-12)
            return
    pytest.fail("no closed walk")


def test_regime_error():
    g = np.random.default_rng(0)
    with pytest.raises(RegimeError):
        spawn_attempt(DISK, 1.5, g)
    with pytest.raises(RegimeError):
        sample_contour_poisson(DISK, 0.0, g)


def test_birth_sampler_returns_contour_or_none():
    g = np.random.default_rng(5)
    out = [contour_birth_sampler(DISK, 2.0, g) for _ in range(500)]
    assert all(c is None or isinstance(c, Contour) for c in out)


# -- enumeration -------------------------------------------------------------

def _lines_hitting(dom, k, seed):
    phi, rho = dom.sample_lines(np.random.default_rng(seed), k)
    return list(zip(phi, rho))


def _subset_oracle(lines, dom, beta):
    """Vertex subsets with two chosen points per line forming one cycle."""
    k = len(lines)
    n = np.array([(math.sin(p), math.cos(p)) for p, _ in lines])
    rho = np.array([r for _, r in lines])
    pts = {}
    for i, j in itertools.combinations(range(k), 2):
        A = np.array([n[i], n[j]])
        if abs(np.linalg.det(A)) < 1e-12:
            continue
        pts[(i, j)] = np.linalg.solve(A, [rho[i], rho[j]])
    found = []
    for pairs in itertools.combinations(pts, k):
        deg = np.bincount(np.ravel(pairs), minlength=k)
        if np.any(deg != 2):
            continue
        # walk the cycle through the lines
        adj = {i: [] for i in range(k)}
        for i, j in pairs:
            adj[i].append(j)
            adj[j].append(i)
        order, prev = [0], None
        while True:
            nxt = [x for x in adj[order[-1]] if x != prev][0] if prev is not None else adj[0][0]
            if nxt == 0:
                break
            prev = order[-1]
            order.append(nxt)
        if len(order) != k:
            continue
        verts = np.array([pts[tuple(sorted((order[t], order[(t + 1) % k])))] for t in range(k)])
        c = Contour(verts, validate=False)
        if c.is_simple() and c.inside(dom):
            found.append(math.exp(-(2 + beta) * c.length))
    return sorted(found)


def test_two_lines_no_contour():
    assert enumerate_contours_from_lines(_lines_hitting(DISK, 2, 0), DISK) == []


def test_three_lines_one_triangle():
    lines = [(0.0, 0.0), (math.pi / 3, 0.3), (2 * math.pi / 3, -0.3)]
    out = enumerate_contours_from_lines(lines, DISK, beta=1.0)
    assert len(out) == 1
    c, w = out[0]
    assert len(c) == 3 and w == pytest.approx(math.exp(-3 * c.length))


@pytest.mark.parametrize("k,seed", [(4, 0), (4, 1), (5, 2), (5, 3), (6, 4)])
def test_enumeration_matches_subset_oracle(k, seed):
    dom = ConvexDomain.disk((0, 0), 2.0)
    lines = _lines_hitting(ConvexDomain.disk((0, 0), 0.8), k, seed)
    got = sorted(w for _, w in enumerate_contours_from_lines(lines, dom))
    assert np.allclose(got, _subset_oracle(lines, dom, 0.0), rtol=1e-12)


def test_too_many_lines():
    with pytest.raises(CapacityError):
        enumerate_contours_from_lines(_lines_hitting(DISK, 9, 0), DISK)


# -- mass estimators ---------------------------------------------------------

def test_false_predicate_zero_mass():
    assert theta_mass_estimator(DISK, 2.0, predicate=False) == (0.0, 0.0)
    est, se = walk_mass_estimate(DISK, 2.0, 500, np.random.default_rng(0), predicate=lambda c: False)
    assert est == 0.0 and se == 0.0


def test_total_mass_bounded_at_zero_tilt():
    est, se = theta_mass_estimator(DISK, 0.0, n_samples=300, k_range=(3, 6), rng=1)
    assert 0 < est + 3 * se <= math.exp(2 * math.pi)


def test_triangle_mass_three_ways():
    tri = lambda c: len(c) == 3
    q, q_se = triangle_mass_quadrature(DISK, 2.0)
    w, w_se = walk_mass_estimate(DISK, 2.0, 40000, np.random.default_rng(0), predicate=tri)
    l, l_se = theta_mass_estimator(DISK, 2.0, predicate=tri, n_samples=20000, k_range=(3, 3), rng=1)
    assert abs(w - q) <= 3 * math.hypot(w_se, q_se)
    assert abs(l - q) <= 3 * math.hypot(l_se, q_se)


def test_canonical_walk_mass_matches_line_estimator():
    dom = ConvexDomain.square(0.6)
    w, w_se = walk_mass_estimate(dom, 2.0, 40000, np.random.default_rng(2))
    l, l_se = theta_mass_estimator(dom, 2.0, n_samples=3000, k_range=(3, 5), rng=3)
    # slack covers the contours with more than five edges left out by the line estimator
    assert abs(w - l) <= 3 * math.hypot(w_se, l_se) + 0.02 * l


def test_tail_bound_values():
    assert tail_bound(2.0, 10.0) == pytest.approx(4 * math.pi)
    assert tail_bound(4.0, 1.0) == pytest.approx(4 * math.pi * math.exp(-2))


def test_self_avoiding_survival_decreasing():
    life, alive = self_avoiding_lifetimes(2000, np.random.default_rng(0), 4.0)
    assert np.allclose(life[alive], 4.0)
    assert np.all(life <= 4.0)
    s1, s2 = np.mean(life >= 1.0), np.mean(life >= 3.0)
    assert 1 >= s1 > s2 > 0
