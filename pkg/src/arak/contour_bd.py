"""Birth-and-death dynamics of disjoint contours and the conditioned Poisson sampler.

Births are proposed at the total tilted contour mass of D, realised by
thinning walk spawns (rate 4 pi |D|); a born contour is kept only if it
meets no current contour.  Each contour dies at rate 1.  The stationary law
is a Poisson contour process conditioned on pairwise disjointness, which
``rejection_sample_conditioned_poisson`` draws directly.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from . import rng as rngs
from .contour_measure import SPAWN_RATE, _check_beta, contour_birth_sampler, sample_contour_poisson


class RetryBudgetError(RuntimeError):
    def __init__(self, tries, message=None):
        super().__init__(message or f"no disjoint ensemble within {tries} tries")
        self.tries = tries


def pairwise_disjoint(contours):
    for i in range(len(contours)):
        for j in range(i + 1, len(contours)):
            if contours[i].intersects(contours[j]):
                return False
    return True


@dataclass(frozen=True)
class ContourEnsemble:
    contours: tuple = ()
    s_time: float = 0.0
    births: int = 0
    rejected: int = 0
    deaths: int = 0

    def __len__(self):
        return len(self.contours)

    @property
    def disjoint(self):
        return pairwise_disjoint(self.contours)

    @property
    def total_length(self):
        return sum(c.length for c in self.contours)

    def to_json(self):
        return {"s_time": self.s_time, "contours": [c.to_json() for c in self.contours]}


def bd_step(ensemble, domain, beta, rng, check_disjoint=True, length_cap=None):
    """Advance to the next spawn or death event."""
    _check_beta(beta)
    n = len(ensemble)
    spawn = SPAWN_RATE * domain.area
    total = spawn + n
    s = ensemble.s_time + rng.exponential(1.0 / total)
    if rng.random() * total < n:
        k = int(rng.integers(n))
        rest = ensemble.contours[:k] + ensemble.contours[k + 1:]
        return replace(ensemble, contours=rest, s_time=s, deaths=ensemble.deaths + 1)
    c = contour_birth_sampler(domain, beta, rng, length_cap)
    if c is None:
        return replace(ensemble, s_time=s)
    if check_disjoint and any(c.intersects(o) for o in ensemble.contours):
        return replace(ensemble, s_time=s, rejected=ensemble.rejected + 1)
    return replace(ensemble, contours=ensemble.contours + (c,), s_time=s, births=ensemble.births + 1)


def run_contour_bd(domain, beta, s_horizon, seed, thinning=1.0, burn_in=None, check_disjoint=True,
                   initial=None, length_cap=None):
    """Yield (s, ensemble) snapshots on the grid burn_in + k * thinning."""
    _check_beta(beta)
    burn = s_horizon / 5.0 if burn_in is None else burn_in
    ens = initial if initial is not None else ContourEnsemble()
    rng = rngs.stream(seed, rngs.FREE, "bd")
    next_snap, k = burn, 0
    while next_snap <= s_horizon:
        nxt = bd_step(ens, domain, beta, rng, check_disjoint, length_cap)
        while nxt.s_time > next_snap and next_snap <= s_horizon:
            yield next_snap, ens
            k += 1
            next_snap = burn + k * thinning
        ens = nxt


def rejection_sample_conditioned_poisson(domain, beta, rng, max_tries=10000, length_cap=None):
    """Poisson contour ensembles drawn until one is pairwise disjoint.

    Raises RetryBudgetError after ``max_tries`` failures.  The accepted
    ensemble records the number of tries in ``births``.
    """
    _check_beta(beta)
    for t in range(1, max_tries + 1):
        cs = sample_contour_poisson(domain, beta, rng, length_cap)
        if pairwise_disjoint(cs):
            return ContourEnsemble(tuple(cs), births=t)
    raise RetryBudgetError(max_tries)


def dropout_comparison(domain, beta, s_horizon, seed, thinning=3.0, mass_walks=20000):
    """Run the dynamics without the disjointness test and compare with Poisson.

    Returns a dict with the snapshot mean and variance, the walk-based mass
    estimate and its standard error, z-scores for mean and dispersion and
    the number of rejected births (always 0 here).
    """
    from .contour_measure import contour_mass_walk

    counts, last = [], None
    for _, ens in run_contour_bd(domain, beta, s_horizon, seed, thinning, check_disjoint=False):
        counts.append(len(ens))
        last = ens
    counts = np.asarray(counts, float)
    n = len(counts)
    mass, mass_se = contour_mass_walk(domain, beta, mass_walks, rngs.stream(seed, rngs.STATS, "mass"))
    mean = counts.mean()
    var = counts.var(ddof=1)
    se_mean = math.sqrt(max(mass, 1e-12) / n)
    # for Poisson counts the sample variance has variance ~ (lambda + 2 lambda^2) / n
    ratio = var / mean if mean > 0 else float("nan")
    se_ratio = math.sqrt((1.0 / mass + 2.0) / n) if mass > 0 else float("nan")
    return {
        "snapshots": n, "mean": float(mean), "variance": float(var), "mass": float(mass),
        "mass_se": float(mass_se), "z_mean": float((mean - mass) / math.hypot(se_mean, mass_se)),
        "dispersion": float(ratio), "z_dispersion": float((ratio - 1.0) / se_ratio),
        "rejected": int(last.rejected if last is not None else 0),
    }
