import math

import numpy as np
import pytest
from scipy import stats

from arak.contour_bd import ContourEnsemble, run_contour_bd
from arak.contour_measure import Contour, contour_mass_walk
from arak.geometry import ConvexDomain
from arak.graphical import (AncestorClan, ClanCapExceeded, ClanResolver, ContourInstance, FreeProcess, ancestors,
                            choose_rmax, clan_sizes, coupled_volumes, free_process, initial_condition_process,
                            length_cap_for, occupancy_covariance, perfect_sample, resolve_clan, window_stats,
                            window_tail_bound)

REGION = ConvexDomain.disk((0, 0), 1.5)
WINDOW = ConvexDomain.disk((0, 0), 1.0)


def square(x, y, s):
    return Contour([(x, y), (x + s, y), (x + s, y + s), (x, y + s)])


class ListProcess:
    """A frozen list of instances with brute-force ancestry."""

    def __init__(self, instances):
        self.instances = instances

    def ancestors(self, inst):
        return ancestors(inst, self.instances)


def three_fixture():
    a = ContourInstance(square(0, 0, 1), 0.0, 5.0, 0)
    b = ContourInstance(square(0.5, 0.5, 1), 1.0, 3.0, 1)  # overlaps a
    c = ContourInstance(square(1.2, 1.2, 1), 2.0, 4.0, 2)  # overlaps b only
    return [a, b, c]


def test_instance_validation():
    with pytest.raises(ValueError):
        ContourInstance(square(0, 0, 1), 1.0, 1.0, 0)
    i = ContourInstance(square(0, 0, 1), 0.0, 1.0, 0)
    assert i.alive(0.0) and not i.alive(1.0)


def test_empty_interval():
    assert free_process(REGION, 2.0, (1.0, 1.0), 0) == []
    assert free_process(REGION, 2.0, (2.0, 1.0), 0) == []


def test_lifespans_exponential():
    insts = free_process(REGION, 2.0, (0.0, 60.0), 1)
    life = [i.s1 - i.s0 for i in insts if i.s0 > 0]
    assert len(life) > 100
    assert stats.kstest(life, "expon").pvalue > 0.01


def test_birth_rate_matches_mass():
    T = 100.0
    insts = free_process(REGION, 2.0, (0.0, T), 2)
    n = sum(1 for i in insts if i.s0 > 0)
    mass, se = contour_mass_walk(REGION, 2.0, 20000, np.random.default_rng(0))
    assert abs(n / T - mass) <= 3 * math.hypot(math.sqrt(n) / T, se)


def test_three_instance_fixture():
    a, b, c = three_fixture()
    proc = ListProcess([a, b, c])
    assert ancestors(a, proc.instances) == []
    assert ancestors(b, proc.instances) == [a]
    assert ancestors(c, proc.instances) == [b]
    clan = resolve_clan(c, proc)
    assert isinstance(clan, AncestorClan)
    assert clan.size == 3 and len(clan.edges) == 2
    assert clan.status == {0: True, 1: False, 2: True}
    assert clan.depth == 2.0


def test_singleton_clan_accepted():
    a = ContourInstance(square(0, 0, 1), 0.0, 1.0, 0)
    clan = resolve_clan(a, ListProcess([a]))
    assert clan.size == 1 and clan.status == {0: True}


def test_later_overlapping_instance_rejected():
    a = ContourInstance(square(0, 0, 1), 0.0, 2.0, 0)
    b = ContourInstance(square(0.8, 0.8, 0.5), 1.0, 3.0, 1)
    res = ClanResolver(ListProcess([a, b]))
    assert res.accepted(a) and not res.accepted(b)


def test_tie_broken_by_id():
    a = ContourInstance(square(0, 0, 1), 1.0, 2.0, 0)
    b = ContourInstance(square(0.5, 0.5, 1), 1.0, 2.0, 1)
    res = ClanResolver(ListProcess([a, b]))
    assert res.accepted(a) and not res.accepted(b)


def test_cap_exceeded():
    proc = ListProcess(three_fixture())
    with pytest.raises(ClanCapExceeded) as err:
        resolve_clan(proc.instances[2], proc, size_cap=2)
    d = err.value.diagnostics
    assert d["cap"] == 2 and d["size"] == 3 and d["root"] == 2


def test_indexed_ancestors_match_brute_force():
    proc = FreeProcess(ConvexDomain.disk((0, 0), 3.0), 2.0, 3)
    proc.ensure(-6.0)
    checked = 0
    for inst in proc.instances:
        if inst.s0 < -5.0:
            continue
        got = sorted(a.id for a in proc.ancestors(inst))
        assert got == sorted(a.id for a in ancestors(inst, proc.instances))
        checked += 1
    assert checked > 20


def test_window_count_poisson_with_estimated_mean():
    counts = [len(FreeProcess(REGION, 2.0, s).alive_at(0.0)) for s in range(200)]
    mass, se = contour_mass_walk(REGION, 2.0, 20000, np.random.default_rng(0))
    mean = np.mean(counts)
    assert abs(mean - mass) <= 3 * math.hypot(math.sqrt(mass / len(counts)), se)
    # var / mean of Poisson counts has standard error sqrt((1 / mean + 2) / n)
    assert abs(np.var(counts, ddof=1) / mean - 1) < 3 * math.sqrt((1 / mean + 2) / len(counts))


def test_truncation_helpers():
    R = choose_rmax(6.0, 1.0, 1e-6)
    assert window_tail_bound(6.0, 1.0, R) == pytest.approx(1e-6, rel=1e-6)
    assert choose_rmax(4.0, 1.0) > R
    with pytest.raises(ValueError):
        choose_rmax(2.0, 1.0)
    assert length_cap_for(4.0, REGION) > length_cap_for(6.0, REGION)


def test_window_stats_length():
    c = square(-3, -3, 6)  # surrounds the window without meeting it
    assert window_stats([c], WINDOW) == (0, 0.0)
    strip = Contour([(-2, 0), (2, 0), (2, 0.5), (-2, 0.5)])
    n, length = window_stats([strip], WINDOW)
    assert n == 1
    assert length == pytest.approx(2 + 2 * math.sqrt(0.75), rel=1e-12)


@pytest.mark.parametrize("beta", [4.0, 6.0])
def test_perfect_sample_properties(beta):
    ps = perfect_sample(WINDOW, beta, 11)
    again = perfect_sample(WINDOW, beta, 11)
    assert [c.vertices.tolist() for c in ps.ensemble.contours] == [c.vertices.tolist() for c in again.ensemble.contours]
    free_c = {id(i.contour) for i in ps.free}
    assert all(id(c) in free_c for c in ps.ensemble.contours)
    assert ps.ensemble.disjoint
    assert len(ps.clan_sizes) == ps.report["roots"] == len(ps.free)
    assert ps.report["tail_bound"] <= 1.0000001e-6


def test_perfect_sample_cap_failure():
    wide = ConvexDomain.disk((0, 0), 2.0)
    ps = perfect_sample(wide, 2.5, 3, rmax=1.0)
    assert max(ps.clan_sizes) == 2
    with pytest.raises(ClanCapExceeded):
        perfect_sample(wide, 2.5, 3, rmax=1.0, clan_cap=1)


def test_finite_volume_perfect_sample():
    dom = ConvexDomain.disk((0, 0), 2.0)
    ps = perfect_sample(WINDOW, 4.0, 5, domain=dom)
    assert ps.report["tail_bound"] == 0.0
    assert all(c.inside(dom) for c in ps.ensemble.contours)


def test_clan_sizes_mostly_singletons():
    sizes = []
    for s in range(10):
        sizes += clan_sizes(WINDOW, 6.0, s, rmax=1.0)
    assert sizes and all(x is not None and x >= 1 for x in sizes)
    assert np.mean(np.array(sizes) == 1) >= 0.9


def test_identical_volumes_agree():
    dom = ConvexDomain.disk((0, 0), 2.0)
    for seed in range(5):
        out = coupled_volumes(dom, dom, WINDOW, 4.0, seed)
        assert not out["differ"]
        assert out["outer_ids"] == out["inner_ids"]
        assert out["distance"] == pytest.approx(1.0)


def test_initial_condition_process():
    dom = ConvexDomain.disk((0, 0), 1.5)
    init = [square(-0.5, -0.5, 0.4), square(0.3, 0.3, 0.4)]
    traj = initial_condition_process(init, dom, 2.0, 5.0, 0)
    assert all(traj.accepted[i] for i in range(2))
    assert all(i.s0 >= 0 for i in traj.instances)
    for s in np.linspace(0, 5, 21):
        ens = traj.ensemble_at(s)
        assert isinstance(ens, ContourEnsemble) and ens.disjoint
        assert len(traj.accepted_at(s)) <= len(traj.free_at(s))


def test_empty_start_matches_bd_dynamics():
    dom = ConvexDomain.disk((0, 0), 1.5)
    T = 4.0
    graph = [len(initial_condition_process([], dom, 2.0, T, s).ensemble_at(T)) for s in range(200)]
    bd = []
    for s in range(200):
        snaps = list(run_contour_bd(dom, 2.0, T, 1000 + s, burn_in=T))
        bd.append(len(snaps[-1][1]))
    assert stats.mannwhitneyu(graph, bd).pvalue > 0.01
    assert abs(np.mean(graph) - np.mean(bd)) < 4 * math.sqrt((np.var(graph) + np.var(bd)) / 200)


def test_occupancy_covariance_decays():
    cov = occupancy_covariance(4.0, [0.0, 4.0], 30, 0)
    assert cov[0] > 0
    assert cov[1] < cov[0]
