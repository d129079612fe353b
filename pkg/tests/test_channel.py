import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from teamcomm.channel import PHI, ChannelOutcome, adversary_observation, comm_outcome_dist, rand_draw
from teamcomm.errors import InvalidDistribution, MissingObservationKernel

from conftest import tiny_model


def test_rand_draw_degenerate():
    for k in (0.001, 0.5, 1.0):
        assert rand_draw(("a", "b"), (1.0, 0.0), k) == "a"


def test_rand_draw_halfopen_boundary():
    assert rand_draw(("a", "b"), (0.3, 0.7), 0.3) == "a"
    assert rand_draw(("a", "b"), (0.3, 0.7), 0.31) == "b"
    assert rand_draw(("a", "b"), (0.3, 0.7), 1.0) == "b"


def test_rand_draw_skips_zero_mass():
    assert rand_draw(("a", "b", "c"), (0.0, 1.0, 0.0), 1.0) == "b"
    assert rand_draw(("a", "b", "c"), (0.0, 1.0, 0.0), 0.0001) == "b"


def test_rand_draw_rejects_bad_inputs():
    with pytest.raises(InvalidDistribution):
        rand_draw(("a", "b"), (0.6, 0.6), 0.5)
    with pytest.raises(InvalidDistribution):
        rand_draw(("a", "b"), (-0.1, 1.1), 0.5)
    with pytest.raises(InvalidDistribution):
        rand_draw(("a", "b"), (0.5, 0.5), 0.0)
    with pytest.raises(InvalidDistribution):
        rand_draw(("a",), (0.5, 0.5), 0.5)


@settings(max_examples=50, deadline=None)
@given(
    weights=st.lists(st.integers(0, 8), min_size=2, max_size=5).filter(lambda w: sum(w) > 0),
    k=st.floats(min_value=1e-9, max_value=1.0),
)
def test_rand_draw_hits_support(weights, k):
    dist = [w / sum(weights) for w in weights]
    elem = rand_draw(range(len(dist)), dist, k)
    assert dist[elem] > 0


def test_rand_draw_empirical_frequencies():
    rng = np.random.default_rng(12345)
    dist = (0.15, 0.05, 0.5, 0.3)
    n = 100_000
    counts = np.zeros(4)
    for _ in range(n):
        counts[rand_draw(range(4), dist, 1.0 - rng.random())] += 1
    bound = 4.0 * math.sqrt(math.log(n) / n)
    assert np.abs(counts / n - np.array(dist)).max() < bound


def test_comm_outcome_no_attempt():
    m = tiny_model()
    dist = comm_outcome_dist(0, 0, (1, 0), (0, 0), m)
    assert dist == [(PHI, Fraction(1))]


def test_comm_outcome_attempt_split():
    m = tiny_model(erasure_prob="3/10")
    dist = dict(comm_outcome_dist(0, 0, (1, 0), (1, 0), m))
    assert dist[PHI] == Fraction(3, 10)
    assert dist[(1, 0)] == Fraction(7, 10)
    assert sum(dist.values()) == 1


def test_comm_outcome_lossless():
    m = tiny_model(erasure_prob="0")
    dist = comm_outcome_dist(1, 0, (0, 1), (1, 1), m)
    assert dist == [((0, 1), Fraction(1))]


def test_comm_outcome_masses_sum_exactly():
    m = tiny_model(erasure_prob="1/7")
    for mm in [(0, 0), (0, 1), (1, 0), (1, 1)]:
        total = sum(p for _, p in comm_outcome_dist(0, 0, (1, 1), mm, m))
        assert total == 1


def test_adversary_observation_modes():
    out = ChannelOutcome(1, 0, (0, 1))
    assert adversary_observation(out, 0, "maxinfo") == (1, 0, (0, 1))
    assert adversary_observation(out, 0, "encrypted") == (1, 0, 1)
    erased = ChannelOutcome(1, 1, PHI)
    assert adversary_observation(erased, 0, "maxinfo") == (1, 1, PHI)
    assert adversary_observation(erased, 0, "encrypted") == (1, 1, 0)
    silent = ChannelOutcome(0, 0, PHI)
    assert adversary_observation(silent, 0, "encrypted") == (0, 0, 0)


def test_adversary_observation_imperfect_requires_table():
    out = ChannelOutcome(1, 0, (0, 1))
    with pytest.raises(MissingObservationKernel):
        adversary_observation(out, 0, "imperfect")
    table = {
        "y_space": ["y0", "y1"],
        "table": [[[ [ [1, 0], [0, 1] ], [ [1, 0], [0, 1] ] ] ] * 2] * 2,
    }
    # structure: [x0][m1][m2][succ] -> dist
    table["table"] = [
        [[[[1, 0], [0, 1]], [[1, 0], [0, 1]]], [[[1, 0], [0, 1]], [[1, 0], [0, 1]]]]
        for _ in range(2)
    ]
    y = adversary_observation(out, 0, "imperfect", table, y_draw=0.5)
    assert y[:2] == (1, 0) and y[2] in (0, 1)


def test_outcome_invariants():
    out = ChannelOutcome(0, 1, (1, 1))
    assert out.success == 1 and out.attempted == 1
    out2 = ChannelOutcome(0, 0, PHI)
    assert out2.success == 0 and out2.attempted == 0


def test_erasure_independent_of_locals_given_decisions():
    """Brute-force joint over (x1, x2, z): conditioned on a reveal, the pair
    distribution equals the prior restricted to the attempt branch."""
    m = tiny_model(erasure_prob="1/4")
    pe = Fraction(1, 4)
    pri1 = [Fraction(1, 3), Fraction(2, 3)]
    pri2 = [Fraction(1, 2), Fraction(1, 2)]
    joint = {}
    for x1, p1 in enumerate(pri1):
        for x2, p2 in enumerate(pri2):
            for z, pz in comm_outcome_dist(0, 0, (x1, x2), (1, 1), m):
                joint[(x1, x2, z)] = joint.get((x1, x2, z), 0) + p1 * p2 * pz
    reveal_mass = sum(v for (x1, x2, z), v in joint.items() if z is not PHI)
    assert reveal_mass == 1 - pe
    for x1, p1 in enumerate(pri1):
        for x2, p2 in enumerate(pri2):
            cond = joint[(x1, x2, (x1, x2))] / reveal_mass
            assert cond == p1 * p2
