import numpy as np
import pytest

from arak.arak_dynamics import EvolutionLog, sample_arak
from arak.disagreement import insert_birth, remove_birth, restore_birth, trace_loop
from arak.geometry import ConvexDomain, Line, PolygonalConfiguration, check_admissible

DOM = ConvexDomain.square(1.0)


def test_identical_configurations_empty_loop():
    _, cfg = sample_arak(DOM, 3)
    loop = trace_loop(cfg, cfg, DOM)
    assert loop.empty and loop.length == 0


def test_rectangle_difference_is_closed_loop():
    old = PolygonalConfiguration.empty()
    new = PolygonalConfiguration.from_polylines([[(-0.5, -0.2), (0.5, -0.2), (0.5, 0.3), (-0.5, 0.3)]], closed=True)
    loop = trace_loop(old, new, DOM)
    assert loop.kind == "closed"
    assert len(loop.positive) == 4 and len(loop.negative) == 0
    assert abs(loop.positive_length - 3.0) < 1e-12


def test_insert_into_empty_log():
    log = EvolutionLog(DOM, 0)
    new_log, new, loop = insert_birth(log, (0.1, 0.2), np.random.default_rng(0))
    assert len(loop.negative) == 0
    assert abs(loop.positive_length - new.total_length) < 1e-12
    # the two particles either both exit or meet again and close up
    assert loop.kind == ("chopped" if new.touches_boundary(DOM) else "closed")


def test_remove_only_birth():
    log = EvolutionLog(DOM, 0)
    log1, cfg1, _ = insert_birth(log, (0.1, 0.2), np.random.default_rng(0))
    log2, cfg2, loop = remove_birth(log1, log1.site_ids()[0])
    assert len(cfg2) == 0
    assert len(loop.positive) == 0
    assert abs(loop.negative_length - cfg1.total_length) < 1e-12


def test_boundary_insertion_is_single_path():
    log, cfg = sample_arak(DOM, 11)
    line = Line(0.3, 0.2)
    _, new, loop = insert_birth(log, line, np.random.default_rng(1))
    assert loop.kind in ("chopped", "closed")
    assert loop.touches_boundary(DOM)


def test_boundary_point_insertion():
    log, cfg = sample_arak(DOM, 12)
    _, new, loop = insert_birth(log, (-1.0, 0.25), np.random.default_rng(2))
    assert loop.kind in ("chopped", "closed")
    assert check_admissible(new, DOM).ok


def test_duplicate_site_rejected():
    log, _ = sample_arak(DOM, 4)
    site = next(s for s in log.sites.values() if s.kind == "interior")
    with pytest.raises(ValueError):
        insert_birth(log, site.location, np.random.default_rng(0))


def test_unknown_site_rejected():
    log, _ = sample_arak(DOM, 4)
    with pytest.raises(ValueError):
        remove_birth(log, 10 ** 6)
    with pytest.raises(ValueError):
        restore_birth(log, 10 ** 6)


def test_outside_point_rejected():
    with pytest.raises(ValueError):
        insert_birth(EvolutionLog(DOM, 0), (2.0, 0.0), np.random.default_rng(0))


@pytest.mark.parametrize("seed", range(40))
def test_random_round_trip(seed):
    log, cfg = sample_arak(DOM, 500 + seed)
    g = np.random.default_rng(seed)
    x0 = tuple(DOM.sample_points(g, 1)[0])
    log1, cfg1, loop1 = insert_birth(log, x0, g)
    assert loop1.kind in ("closed", "chopped")
    assert check_admissible(cfg1, DOM).ok
    # the symmetric difference accounts for the whole length change
    assert abs((cfg1.total_length - cfg.total_length) - (loop1.positive_length - loop1.negative_length)) < 1e-9
    sid = max(log1.site_ids())
    log2, cfg2, loop2 = remove_birth(log1, sid)
    assert np.array_equal(cfg2.segments, cfg.segments)
    assert np.array_equal(loop2.positive, loop1.negative) and np.array_equal(loop2.negative, loop1.positive)
    assert log2.same_records(log)
    # removal then exact restoration from the archive
    log3, cfg3, _ = restore_birth(log2, sid)
    assert np.array_equal(cfg3.segments, cfg1.segments)


def test_positive_parts_in_new_only():
    log, cfg = sample_arak(DOM, 77)
    _, new, loop = insert_birth(log, (0.05, -0.3), np.random.default_rng(9))
    old_set = {tuple(np.round(s, 9).ravel()) for s in cfg.segments}
    for s in loop.positive:
        assert tuple(np.round(s, 9).ravel()) not in old_set
