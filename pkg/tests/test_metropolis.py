import math

import numpy as np
import pytest
from scipy import stats

from arak import rng as rngs
from arak.arak_dynamics import EvolutionLog, sample_arak
from arak.disagreement import insert_birth, trace_loop
from arak.geometry import ConvexDomain, PolygonalConfiguration, check_admissible, mu_mass_hitting
from arak.gibbs import ColouredConfiguration, ModelParams, boundary_condition, hamiltonian
from arak.metropolis import acceptance_probability, chain_states, initial_state, run_chain, step

D3 = ConvexDomain.box(0, 0, 3, 3)


def test_unit_acceptance_without_filter():
    dom = ConvexDomain.square(1.0)
    log, cfg = sample_arak(dom, 1)
    _, new, loop = insert_birth(log, (0.1, 0.1), np.random.default_rng(0))
    p = acceptance_probability(ColouredConfiguration(cfg, False), ColouredConfiguration(new, True),
                               ModelParams(), dom, loop)
    assert p == 1.0


def test_new_black_square():
    old = ColouredConfiguration(PolygonalConfiguration.empty(), False)
    new = ColouredConfiguration(PolygonalConfiguration.from_polylines([[(1, 1), (2, 1), (2, 2), (1, 2)]],
                                                                      closed=True), False)
    p = acceptance_probability(old, new, ModelParams(1, 1, 0, 0), D3)
    assert p == pytest.approx(math.exp(-5), rel=1e-12)


def test_auxiliary_area_rate():
    rect = PolygonalConfiguration.from_polylines([[(0.5, 1), (2.5, 1), (2.5, 2), (0.5, 2)]], closed=True)
    old = ColouredConfiguration(rect, False)  # area 2 black
    new = ColouredConfiguration(PolygonalConfiguration.empty(), False)  # all white
    p = acceptance_probability(old, new, ModelParams(-1, 0, 1, 0), D3)
    assert p == pytest.approx(math.exp(-2), rel=1e-12)


def test_identity_proposal_accepted():
    dom = ConvexDomain.square(1.0)
    _, cfg = sample_arak(dom, 2)
    c = ColouredConfiguration(cfg, True)
    assert acceptance_probability(c, c, ModelParams(1, 2, 0.5, 0.5), dom) == 1.0


def test_probability_in_unit_interval():
    dom = ConvexDomain.square(1.0)
    for k in range(10):
        log, cfg = sample_arak(dom, 100 + k)
        _, new, loop = insert_birth(log, tuple(dom.sample_points(np.random.default_rng(k), 1)[0]),
                                    np.random.default_rng(k))
        for flip in (False, True):
            p = acceptance_probability(ColouredConfiguration(cfg, False), ColouredConfiguration(new, flip),
                                       ModelParams(-0.5, 0.3, 1.0, 0.2), dom, loop)
            assert 0 < p <= 1


def test_first_birth_time_exponential():
    dom = ConvexDomain.square(0.5)
    rate = math.pi * dom.area + mu_mass_hitting(dom)
    st0 = initial_state(dom, ModelParams(), "none", 0)
    times = []
    for k in range(2000):
        st = step(st0, rngs.stream(0, rngs.STATS, "first", k))
        assert st.accepted == 1
        times.append(st.s_time)
    assert stats.kstest(times, "expon", args=(0, 1 / rate)).pvalue > 0.01


def test_empty_bd_never_touches_boundary():
    dom = ConvexDomain.square(1.0)
    prev = None
    for st in chain_states(dom, ModelParams(), "empty", 3, 300):
        assert boundary_condition(st.cfg, dom, "empty")
        if prev is not None and st.accepted == prev.accepted:
            assert st.log is prev.log
        prev = st


@pytest.mark.parametrize("bd", ["black", "white"])
def test_coloured_bd_predicate(bd):
    dom = ConvexDomain.disk((0, 0), 1.0)
    for _, c in run_chain(dom, ModelParams(0.5, 0.5), bd, 10.0, 4, thinning=0.5, burn_in=0.0):
        assert boundary_condition(c, dom, bd)
        assert check_admissible(c.base, dom).ok


def test_detailed_balance_two_states():
    """Flow counting between two frozen states reproduces exp(-delta H)."""
    dom = ConvexDomain.square(1.0)
    params = ModelParams(0.6, 0.4, 0.3, 0.2)
    log, cfg = sample_arak(dom, 21)
    _, new, loop = insert_birth(log, (0.2, -0.1), np.random.default_rng(5))
    A = ColouredConfiguration(cfg, False)
    B = ColouredConfiguration(new, True)
    p_ab = acceptance_probability(A, B, params, dom, loop)
    p_ba = acceptance_probability(B, A, params, dom, loop.reversed())
    dH = hamiltonian(B, params, dom) - hamiltonian(A, params, dom)
    g = np.random.default_rng(0)
    state, n = 0, {0: 0, 1: 0}
    moves = {0: 0, 1: 0}
    for _ in range(100000):
        n[state] += 1
        if g.random() < (p_ab if state == 0 else p_ba):
            moves[state] += 1
            state = 1 - state
    f_ab, f_ba = moves[0] / n[0], moves[1] / n[1]
    ratio = f_ab / f_ba
    se = ratio * math.sqrt((1 - f_ab) / moves[0] + (1 - f_ba) / moves[1])
    assert abs(ratio - math.exp(-dH)) <= 3 * se


def test_loop_reversal_consistent_with_trace():
    dom = ConvexDomain.square(1.0)
    log, cfg = sample_arak(dom, 8)
    _, new, loop = insert_birth(log, (0.0, 0.3), np.random.default_rng(1))
    back = trace_loop(new, cfg, dom)
    assert np.array_equal(back.positive, loop.negative)


def test_chain_deterministic():
    dom = ConvexDomain.square(1.0)
    a = [(s, c.base.segments.tobytes(), c.flip) for s, c in run_chain(dom, ModelParams(), "none", 5.0, 9, 0.5)]
    b = [(s, c.base.segments.tobytes(), c.flip) for s, c in run_chain(dom, ModelParams(), "none", 5.0, 9, 0.5)]
    assert a == b and len(a) > 0


def test_small_domain_visits_empty_state():
    dom = ConvexDomain.square(0.2)
    empties = sum(1 for _, c in run_chain(dom, ModelParams(), "none", 60.0, 2, 0.5) if len(c.base) == 0)
    assert empties > 0


def test_horizon_must_be_positive():
    with pytest.raises(ValueError):
        list(run_chain(ConvexDomain.square(1.0), ModelParams(), "none", 0.0, 0))


def test_empty_state_log():
    st = initial_state(ConvexDomain.square(1.0), ModelParams(), "black", 0)
    assert isinstance(st.log, EvolutionLog) and st.cfg.flip
