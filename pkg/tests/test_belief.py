from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from teamcomm.belief import (
    AnchoredBelief,
    FactorizedBelief,
    comm_update,
    ctrl_update,
    init_cib,
    outcome_dist,
)
from teamcomm.channel import PHI, ChannelOutcome
from teamcomm.errors import UnsupportedInfoStructure, ZeroProbabilityOutcome

from conftest import tiny_model, tiny_scenario

F = Fraction
HALF = F(1, 2)


def det_gamma(rule1, rule2):
    """rule maps x -> m; rows over {0,1}."""
    t1 = [[1 - rule1(x), rule1(x)] for x in range(2)]
    t2 = [[1 - rule2(x), rule2(x)] for x in range(2)]
    return (t1, t2)


def test_init_cib_copies_priors():
    m = tiny_model()
    x0d, b = init_cib(m)
    assert isinstance(b, FactorizedBelief)
    assert b.pi1 == (HALF, HALF) and x0d == (HALF, HALF)


def test_init_cib_encrypted_anchor_none():
    m = tiny_model(info_structure="encrypted")
    _, b = init_cib(m)
    assert isinstance(b, AnchoredBelief)
    assert b.mu[0] == 1 and sum(b.mu) == 1
    assert b.cond1[0] == (HALF, HALF)
    # pair anchors carry degenerate conditionals
    assert b.cond1[m.anchor_index((1, 0))] == (0, 1)


def test_init_cib_degenerate_priors():
    m = tiny_model()
    raw = tiny_scenario()
    raw["init_x1"] = ["1", "0"]
    from teamcomm.model import validate_model

    _, b = init_cib(validate_model(raw))
    assert b.pi1 == (F(1), F(0))


def test_init_cib_imperfect_unsupported():
    m = tiny_model(info_structure="imperfect")
    with pytest.raises(UnsupportedInfoStructure):
        init_cib(m)


def test_comm_update_bayes_on_silence():
    # P(m=0) is 1 in state 0 and 1/2 in state 1; observing m1=0 tilts to state 0.
    b = FactorizedBelief((HALF, HALF), (HALF, HALF))
    g1 = [[F(1), F(0)], [HALF, HALF]]
    g2 = [[F(1), F(0)], [F(1), F(0)]]
    out = ChannelOutcome(0, 0, PHI)
    nb = comm_update(b, (g1, g2), out)
    assert nb.pi1 == (F(2, 3), F(1, 3))
    assert nb.pi2 == (HALF, HALF)


def test_comm_update_reveal_degenerates():
    b = FactorizedBelief((F(1, 4), F(3, 4)), (HALF, HALF))
    nb = comm_update(b, det_gamma(lambda x: 1, lambda x: 0), ChannelOutcome(1, 0, (0, 1)))
    assert nb.pi1 == (1, 0) and nb.pi2 == (0, 1)


def test_comm_update_erased_equals_silent_update():
    """With an attempt observed but erased, the erasure likelihood is constant
    in the local states, so the update is the plain decision-likelihood tilt."""
    b = FactorizedBelief((F(1, 3), F(2, 3)), (F(1, 4), F(3, 4)))
    g = det_gamma(lambda x: x, lambda x: x)  # communicate iff state 1
    erased = comm_update(b, g, ChannelOutcome(1, 1, PHI))
    assert erased.pi1 == (0, 1) and erased.pi2 == (0, 1)
    gg = ([[HALF, HALF], [F(1, 4), F(3, 4)]], [[F(1), F(0)], [F(1, 3), F(2, 3)]])
    erased2 = comm_update(b, gg, ChannelOutcome(1, 1, PHI))
    w1 = [b.pi1[x] * gg[0][x][1] for x in range(2)]
    w2 = [b.pi2[x] * gg[1][x][1] for x in range(2)]
    assert erased2.pi1 == tuple(v / sum(w1) for v in w1)
    assert erased2.pi2 == tuple(v / sum(w2) for v in w2)


def test_comm_update_zero_probability_outcome():
    b = FactorizedBelief((F(1), F(0)), (HALF, HALF))
    g = det_gamma(lambda x: 0, lambda x: 0)  # never communicates
    with pytest.raises(ZeroProbabilityOutcome):
        comm_update(b, g, ChannelOutcome(1, 0, PHI))


def test_comm_update_rejects_inconsistent_reveal():
    b = FactorizedBelief((HALF, HALF), (HALF, HALF))
    with pytest.raises(ValueError):
        comm_update(b, det_gamma(lambda x: 0, lambda x: 0), ChannelOutcome(0, 0, (0, 0)))


def test_outcome_dist_threshold_example():
    """Both agents talk iff their state is 1 under uniform beliefs: silence has
    mass 1/4, attempts erase with 1/5, so P(z = phi) = 1/4 + 3/4 * 1/5 = 2/5."""
    m = tiny_model()
    _, b = init_cib(m)
    g = det_gamma(lambda x: x, lambda x: x)
    dist = outcome_dist(0, 0, b, g, m)
    total = sum(p for _, p in dist)
    assert total == 1
    p_phi = sum(p for o, p in dist if o.z_er is PHI)
    assert p_phi == F(1, 4) + F(3, 4) * F(1, 5)
    # cross-check by raw enumeration over the four joint states
    acc = 0
    pe = F(1, 5)
    for x1 in range(2):
        for x2 in range(2):
            p = HALF * HALF
            if max(x1, x2) == 0:
                acc += p
            else:
                acc += p * pe
    assert acc == p_phi


def test_outcome_dist_never_communicate():
    m = tiny_model()
    _, b = init_cib(m)
    dist = outcome_dist(0, 0, b, det_gamma(lambda x: 0, lambda x: 0), m)
    assert dist == [(ChannelOutcome(0, 0, PHI), F(1))]


def test_outcome_dist_lossless_reveal_masses():
    m = tiny_model(erasure_prob="0")
    b = FactorizedBelief((F(1, 3), F(2, 3)), (F(1, 4), F(3, 4)))
    dist = outcome_dist(0, 0, b, det_gamma(lambda x: 1, lambda x: 1), m)
    masses = {o.z_er: p for o, p in dist}
    for x1 in range(2):
        for x2 in range(2):
            assert masses[(x1, x2)] == b.pi1[x1] * b.pi2[x2]


@settings(max_examples=40, deadline=None)
@given(data=st.data())
def test_outcome_dist_masses_sum_to_one(data):
    m = tiny_model()

    def prob_vec(n):
        w = [data.draw(st.integers(1, 7)) for _ in range(n)]
        return [F(v, sum(w)) for v in w]

    def comm_row():
        q = F(data.draw(st.integers(0, 8)), 8)
        return [1 - q, q]

    pi1, pi2 = prob_vec(2), prob_vec(2)
    g1 = [comm_row() for _ in range(2)]
    g2 = [comm_row() for _ in range(2)]
    dist = outcome_dist(1, 0, FactorizedBelief(tuple(pi1), tuple(pi2)), (g1, g2), m)
    assert sum(p for _, p in dist) == 1
    assert all(p > 0 for _, p in dist)


def test_bayes_consistency_one_step_joint():
    """outcome_dist x comm_update must reproduce the brute-force joint
    P(x, outcome) from the prior, exactly in rationals."""
    m = tiny_model(erasure_prob="1/5")
    b = FactorizedBelief((F(1, 3), F(2, 3)), (F(2, 5), F(3, 5)))
    g1 = [[F(3, 4), F(1, 4)], [HALF, HALF]]
    g2 = [[F(1, 5), F(4, 5)], [F(1), F(0)]]
    pe = F(1, 5)
    for out, p_out in outcome_dist(0, 0, b, (g1, g2), m):
        nb = comm_update(b, (g1, g2), out)
        for x1 in range(2):
            for x2 in range(2):
                lhs = p_out * nb.pi1[x1] * nb.pi2[x2]
                like = g1[x1][out.m1] * g2[x2][out.m2]
                if out.z_er is PHI:
                    chan = F(1) if max(out.m1, out.m2) == 0 else pe
                    rhs = b.pi1[x1] * b.pi2[x2] * like * chan
                else:
                    hit = (x1, x2) == out.z_er
                    rhs = b.pi1[x1] * b.pi2[x2] * like * (1 - pe) * (1 if hit else 0)
                assert lhs == rhs


def test_ctrl_update_identity_kernel():
    raw = tiny_scenario()
    ident = [[["1", "0"], ["1", "0"]], [["0", "1"], ["0", "1"]]]
    raw["local_kernel_1"] = {"stationary": [ident, ident]}
    raw["local_kernel_2"] = {"stationary": [ident, ident]}
    from teamcomm.model import validate_model

    m = validate_model(raw)
    b = FactorizedBelief((F(1, 3), F(2, 3)), (F(1, 4), F(3, 4)))
    lam = ([[HALF, HALF], [F(1, 4), F(3, 4)]], [[F(1), F(0)], [F(0), F(1)]])
    nb = ctrl_update(0, b, lam, m, 0)
    assert nb.pi1 == b.pi1 and nb.pi2 == b.pi2


def test_ctrl_update_uniformizing_kernel():
    raw = tiny_scenario()
    unif = [[["1/2", "1/2"], ["1/2", "1/2"]], [["1/2", "1/2"], ["1/2", "1/2"]]]
    raw["local_kernel_1"] = {"stationary": [unif, unif]}
    from teamcomm.model import validate_model

    m = validate_model(raw)
    b = FactorizedBelief((F(1), F(0)), (F(1, 4), F(3, 4)))
    lam = ([[F(1), F(0)], [F(1), F(0)]], [[F(1), F(0)], [F(1), F(0)]])
    nb = ctrl_update(0, b, lam, m, 0)
    assert nb.pi1 == (HALF, HALF)


def test_ctrl_update_action_controlled_flip():
    raw = tiny_scenario()
    # action 0 keeps the state, action 1 flips it
    flip = [[["1", "0"], ["0", "1"]], [["0", "1"], ["1", "0"]]]
    raw["local_kernel_1"] = {"stationary": [flip, flip]}
    from teamcomm.model import validate_model

    m = validate_model(raw)
    b = FactorizedBelief((F(1), F(0)), (HALF, HALF))
    lam = ([[HALF, HALF], [HALF, HALF]], [[F(1), F(0)], [F(1), F(0)]])
    nb = ctrl_update(0, b, lam, m, 0)
    assert nb.pi1 == (HALF, HALF)


def test_ctrl_update_matches_brute_force_joint():
    m = tiny_model()
    b = FactorizedBelief((F(1, 3), F(2, 3)), (F(2, 5), F(3, 5)))
    lam1 = [[F(3, 4), F(1, 4)], [HALF, HALF]]
    lam2 = [[F(1), F(0)], [F(1, 5), F(4, 5)]]
    nb = ctrl_update(1, b, (lam1, lam2), m, 0)
    k1 = m.exact.k1[0][1]
    expect = [sum(b.pi1[x] * lam1[x][u] * k1[x][u][y] for x in range(2) for u in range(2))
              for y in range(2)]
    assert nb.pi1 == tuple(expect)


def test_factorization_preserved_vs_joint_posterior():
    """The product-form belief must equal the brute-force joint posterior over
    (x1, x2) after conditioning on the communication outcome."""
    m = tiny_model(erasure_prob="1/5")
    b = FactorizedBelief((F(1, 3), F(2, 3)), (F(2, 5), F(3, 5)))
    g1 = [[F(3, 4), F(1, 4)], [HALF, HALF]]
    g2 = [[F(1, 5), F(4, 5)], [F(1), F(0)]]
    out = ChannelOutcome(0, 1, PHI)
    nb = comm_update(b, (g1, g2), out)
    joint = {}
    for x1 in range(2):
        for x2 in range(2):
            joint[(x1, x2)] = b.pi1[x1] * b.pi2[x2] * g1[x1][0] * g2[x2][1]
    total = sum(joint.values())
    for (x1, x2), v in joint.items():
        assert v / total == nb.pi1[x1] * nb.pi2[x2]


# -- anchored (encrypted) beliefs -------------------------------------------


def enc_gamma(m, rule1, rule2):
    """Anchor-blind deterministic comm prescriptions on (anchor, x)."""
    A = m.n_anchors
    t1 = [[[1 - rule1(x), rule1(x)] for x in range(2)] for _ in range(A)]
    t2 = [[[1 - rule2(x), rule2(x)] for x in range(2)] for _ in range(A)]
    return (t1, t2)


def test_anchored_success_update():
    m = tiny_model(info_structure="encrypted")
    _, b = init_cib(m)
    g = enc_gamma(m, lambda x: x, lambda x: 1)
    nb = comm_update(b, g, ChannelOutcome(1, 1, (1, 0)))
    # posterior over anchors given m = (1, 1): agent 1 must be in state 1
    assert nb.mu[0] == 0
    assert nb.mu[m.anchor_index((0, 0))] == 0
    expect = {
        (1, 0): F(1, 2) * F(1, 2),
        (1, 1): F(1, 2) * F(1, 2),
    }
    total = sum(expect.values())
    for pair, v in expect.items():
        a = m.anchor_index(pair)
        assert nb.mu[a] == v / total
        assert nb.cond1[a] == tuple(1 if i == pair[0] else 0 for i in range(2))
        assert nb.cond2[a] == tuple(1 if i == pair[1] else 0 for i in range(2))


def test_anchored_failure_update_reweights_mixture():
    m = tiny_model(info_structure="encrypted")
    _, b = init_cib(m)
    g = enc_gamma(m, lambda x: x, lambda x: 0)
    nb = comm_update(b, g, ChannelOutcome(0, 0, PHI))
    # only the NONE anchor has mass; agent 1 silent means state 0
    assert nb.mu[0] == 1
    assert nb.cond1[0] == (F(1), F(0))
    assert nb.cond2[0] == (HALF, HALF)


def test_anchored_silence_after_success_keeps_anchor_mixture():
    m = tiny_model(info_structure="encrypted")
    _, b = init_cib(m)
    g = enc_gamma(m, lambda x: 1, lambda x: 1)
    revealed = comm_update(b, g, ChannelOutcome(1, 1, (0, 1)))
    lam = (
        [[[HALF, HALF] for _ in range(2)] for _ in range(m.n_anchors)],
        [[[HALF, HALF] for _ in range(2)] for _ in range(m.n_anchors)],
    )
    pushed = ctrl_update(0, revealed, lam, m, 0)
    assert pushed.mu == revealed.mu  # mixture untouched by control push
    g2 = enc_gamma(m, lambda x: 0, lambda x: 0)
    after = comm_update(pushed, g2, ChannelOutcome(0, 0, PHI))
    assert after.mu == pushed.mu


def test_anchored_outcome_dist_sums_to_one():
    m = tiny_model(info_structure="encrypted", erasure_prob="1/3")
    _, b = init_cib(m)
    g = enc_gamma(m, lambda x: x, lambda x: 1 - x)
    dist = outcome_dist(0, 0, b, g, m)
    assert sum(p for _, p in dist) == 1
