"""Communication-stage semantics: inverse-CDF randomization, the erasure
channel, and what the adversary gets to see.

All functions are pure; randomness enters only through explicitly passed
uniforms, which keeps every run bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .errors import InvalidDistribution, MissingObservationKernel

PHI = None  # the erased/no-communication symbol

DIST_TOL = 1e-9


@dataclass(frozen=True)
class ChannelOutcome:
    """One realization of the communication stage.

    ``z_er`` is PHI (nothing delivered) or the revealed local-state pair.
    ``success`` is the indicator the adversary observes in encrypted mode.
    """

    m1: int
    m2: int
    z_er: Optional[tuple]
    adv_obs: tuple = ()

    @property
    def success(self) -> int:
        return 0 if self.z_er is PHI else 1

    @property
    def attempted(self) -> int:
        return max(self.m1, self.m2)


def rand_draw(space, dist, k):
    """Inverse-CDF draw: the element whose cumulative interval (lo, hi]
    contains ``k``, intervals laid out in the declared order of ``space``.

    Deterministic given (dist, k); zero-probability elements have empty
    intervals and are never selected.
    """
    if len(space) != len(dist):
        raise InvalidDistribution(f"distribution length {len(dist)} != space size {len(space)}")
    total = 0.0
    lo = 0.0
    last_positive = None
    for p in dist:
        if p < 0:
            raise InvalidDistribution("negative probability")
        total += p
    if abs(total - 1.0) > DIST_TOL:
        raise InvalidDistribution(f"probabilities sum to {total!r}")
    if not (0.0 < k <= 1.0):
        raise InvalidDistribution(f"uniform draw {k!r} outside (0, 1]")
    for elem, p in zip(space, dist):
        if p <= 0:
            continue
        hi = lo + p
        if k <= hi:
            return elem
        lo = hi
        last_positive = elem
    # Float accumulation can leave the last interval short of 1.0.
    return last_positive


def comm_outcome_dist(x0, e, x, m, model):
    """Distribution of the delivered message ``z_er`` given decisions ``m``
    and the true local pair ``x``.

    No attempt: PHI surely.  Attempt: PHI with the channel's erasure
    probability, the full pair otherwise.
    """
    m1, m2 = m
    one = Fraction(1) if model.exact is not None else 1.0
    if max(m1, m2) == 0:
        return [(PHI, one)]
    tab = model.exact.pe if model.exact is not None else model.pe
    p = tab[x0][e]
    out = []
    if p != 0:
        out.append((PHI, p))
    if p != 1:
        out.append(((x[0], x[1]), one - p))
    return out


def adversary_observation(outcome: ChannelOutcome, x0, structure, obs_table=None, y_draw=None):
    """Project a channel outcome onto what the adversary sees.

    maxinfo: the full common increment (m, z_er).
    encrypted: decisions plus the success indicator, contents hidden.
    imperfect: a user-supplied noisy map (simulation only); ``obs_table``
    must give, per (x0, m1, m2, success), a distribution over labels, and
    ``y_draw`` the uniform used to realize it.
    """
    if structure == "maxinfo":
        return (outcome.m1, outcome.m2, outcome.z_er)
    if structure == "encrypted":
        return (outcome.m1, outcome.m2, outcome.success)
    if structure == "imperfect":
        if obs_table is None:
            raise MissingObservationKernel("imperfect encryption requires an observation table")
        raw = obs_table["table"][x0][outcome.m1][outcome.m2][outcome.success]
        dist = [float(Fraction(v)) if isinstance(v, str) else float(v) for v in raw]
        if y_draw is None:
            raise MissingObservationKernel("imperfect observation needs a uniform draw")
        y = rand_draw(range(len(dist)), dist, y_draw)
        return (outcome.m1, outcome.m2, y)
    raise ValueError(f"unknown info structure {structure!r}")
