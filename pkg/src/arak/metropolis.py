"""Birth/death chains driven by disagreement loops.

The chain state is an :class:`EvolutionLog`.  Births arrive at rate
pi |D| (interior) plus the line-measure mass of D (boundary); every site
dies at rate 1.  Each proposal comes with a fresh colour bit and is accepted
with probability

    exp(-alpha A(new black minus old black) - beta length(new minus old)
        - a A(new black sym-diff old black) - b length(sym-diff)),

which is 1 for the reference (unfiltered) dynamics.
"""

import math
from dataclasses import dataclass, replace

from . import rng as rngs
from .arak_dynamics import EvolutionLog, evolve
from .disagreement import insert_birth, remove_birth
from .geometry import Line, mu_mass_hitting, parity_area
from .gibbs import ColouredConfiguration, ModelParams, black_area

BOUNDARY_CONDITIONS = ("none", "empty", "black", "white")


@dataclass(frozen=True)
class ChainState:
    log: EvolutionLog
    cfg: ColouredConfiguration
    s_time: float
    params: ModelParams
    bd: str = "none"
    odd_area: float = 0.0  # parity area of cfg.base, cached when areas matter
    steps: int = 0
    accepted: int = 0

    @property
    def domain(self):
        return self.log.domain


def initial_state(domain, params, bd="none", seed=0):
    if bd not in BOUNDARY_CONDITIONS:
        raise ValueError(f"unknown boundary condition {bd!r}")
    if bd == "black":
        flip = True
    elif bd == "white":
        flip = False
    else:
        flip = bool(rngs.stream(seed, rngs.CHAIN, "init").random() < 0.5)
    log = EvolutionLog(domain, seed)
    return ChainState(log, ColouredConfiguration(evolve(log), flip), 0.0, params, bd)


def _loop_areas(old_cfg, new_cfg, loop, domain, old_odd, new_odd):
    """(A(new black minus old black), A(new black sym-diff old black))."""
    loop_odd = min(max(parity_area(loop.segments, domain), 0.0), domain.area)
    sym = loop_odd if old_cfg.flip == new_cfg.flip else domain.area - loop_odd
    a_new = black_area(new_cfg, domain, new_odd)
    a_old = black_area(old_cfg, domain, old_odd)
    gain = max(0.5 * (a_new - a_old + sym), 0.0)
    return gain, sym


def acceptance_probability(old_cfg, new_cfg, params, domain=None, loop=None, areas=None):
    """Filter probability for the proposal new_cfg from old_cfg.

    ``areas`` may supply (A(new minus old black), A(black sym-diff)); otherwise
    they are computed from ``loop`` (or from the two configurations).
    """
    if not isinstance(params, ModelParams):
        params = ModelParams(*params)
    if params.trivial:
        return 1.0
    if loop is None:
        from .disagreement import trace_loop
        loop = trace_loop(old_cfg.base, new_cfg.base, domain)
    gain_len = loop.positive_length
    sym_len = loop.length
    if params.uses_area:
        if areas is None:
            areas = _loop_areas(old_cfg, new_cfg, loop, domain, None, None)
        gain_area, sym_area = areas
    else:
        gain_area = sym_area = 0.0
    expo = params.alpha * gain_area + params.beta * gain_len + params.a * sym_area + params.b * sym_len
    return float(min(1.0, math.exp(-expo)))


def birth_rates(domain):
    return math.pi * domain.area, mu_mass_hitting(domain)


def step(state, rng):
    """One event of the chain: an exponential clock, a proposal and the filter."""
    domain = state.domain
    r_int, r_bd = birth_rates(domain)
    n = len(state.log)
    total = r_int + r_bd + n
    s_new = state.s_time + rng.exponential(1.0 / total)
    u = rng.random() * total
    if state.bd == "black":
        flip = True
    elif state.bd == "white":
        flip = False
    else:
        flip = bool(rng.random() < 0.5)
    base = replace(state, s_time=s_new, steps=state.steps + 1)
    if u < r_int + r_bd:
        if u >= r_int:
            if state.bd != "none":
                return base  # boundary births always touch the boundary
            phi, rho = domain.sample_lines(rng, 1)
            x0 = Line(float(phi[0]), float(rho[0]))
        else:
            x0 = tuple(domain.sample_points(rng, 1)[0])
        new_log, new_base, loop = insert_birth(state.log, x0, rng)
    else:
        sid = state.log.site_ids()[int(rng.integers(n))]
        new_log, new_base, loop = remove_birth(state.log, sid)
    new_cfg = ColouredConfiguration(new_base, flip)
    if state.bd != "none" and loop.touches_boundary(domain):
        return base
    params = state.params
    new_odd = 0.0
    areas = None
    if params.uses_area:
        new_odd = parity_area(new_base.segments, domain)
        areas = _loop_areas(state.cfg, new_cfg, loop, domain, state.odd_area, new_odd)
    p = acceptance_probability(state.cfg, new_cfg, params, domain, loop, areas)
    if p < 1.0 and rng.random() >= p:
        return base
    return replace(base, log=new_log, cfg=new_cfg, odd_area=new_odd, accepted=state.accepted + 1)


def run_chain(domain, params, bd, s_horizon, seed, thinning=1.0, burn_in=None, state=None):
    """Yield (s_time, ColouredConfiguration) snapshots on the grid burn_in + k * thinning.

    The burn-in defaults to s_horizon / 5.  The stream is a pure function of
    the arguments.
    """
    if s_horizon <= 0:
        raise ValueError("s_horizon must be positive")
    if not isinstance(params, ModelParams):
        params = ModelParams(*params)
    burn = s_horizon / 5.0 if burn_in is None else burn_in
    st = state if state is not None else initial_state(domain, params, bd, seed)
    next_snap = burn
    k = 0
    while next_snap <= s_horizon:
        nxt = step(st, rngs.stream(seed, rngs.CHAIN, st.steps))
        while nxt.s_time > next_snap and next_snap <= s_horizon:
            yield next_snap, st.cfg
            next_snap = burn + (k := k + 1) * thinning
        st = nxt


def chain_states(domain, params, bd, seed, n_steps, state=None):
    """Iterate raw chain states (for diagnostics)."""
    st = state if state is not None else initial_state(domain, params, bd, seed)
    for _ in range(n_steps):
        st = step(st, rngs.stream(seed, rngs.CHAIN, st.steps))
        yield st
