"""Common information belief (CIB) representation and Bayes updates.

Two belief forms are supported, one per information structure:

* ``FactorizedBelief`` (no encryption): the adversary sees everything the
  team shares, the team's common private information is empty, and the CIB
  over the two local states stays a product ``pi1 x pi2`` forever.

* ``AnchoredBelief`` (encrypted communication): the adversary sees only the
  communication decisions and the success flag.  The team's reduced common
  private information is the last successfully exchanged state pair (the
  anchor); the CIB is a mixture over anchor values with per-anchor product
  conditionals for the current local states.

Updates preserve the entry types: feed Fractions in, get Fractions out.
The solver runs the same formulas vectorized in float64; these functions are
the reference semantics that the tree and the online replay are checked
against.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Union

from .channel import PHI, ChannelOutcome
from .errors import UnsupportedInfoStructure, ZeroProbabilityOutcome

COMM = "comm"
CTRL = "ctrl"


@dataclass(frozen=True)
class FactorizedBelief:
    """Product belief over the two local states."""

    pi1: tuple
    pi2: tuple

    @property
    def mode(self):
        return "maxinfo"


@dataclass(frozen=True)
class AnchoredBelief:
    """Mixture over anchor values (index 0 = no successful exchange yet,
    then every local-state pair) with per-anchor conditionals."""

    mu: tuple                 # [A]
    cond1: tuple              # [A][X1]
    cond2: tuple              # [A][X2]

    @property
    def mode(self):
        return "encrypted"

    @property
    def nx1(self):
        return len(self.cond1[0])

    @property
    def nx2(self):
        return len(self.cond2[0])

    def anchor_pair(self, a):
        if a == 0:
            return None
        a -= 1
        return a // self.nx2, a % self.nx2


Belief = Union[FactorizedBelief, AnchoredBelief]


@dataclass(frozen=True)
class BeliefNodeKey:
    """Identity of a DP node: time, stage, public state, belief, optional
    constraint counters (s_a, s_b) and channel state."""

    t: int
    stage: str                # COMM or CTRL
    x0: int
    belief: Belief
    aug: Optional[tuple] = None
    e: int = 0


def _normalize(vec, what):
    total = sum(vec)
    if total == 0:
        raise ZeroProbabilityOutcome(what)
    return tuple(v / total for v in vec)


def _degenerate(n, at):
    return tuple(1 if i == at else 0 for i in range(n))


def _uniform(n):
    return tuple(Fraction(1, n) for _ in range(n))


def _tables(gamma):
    """Accept a PrescriptionPair or a bare (table1, table2) tuple."""
    if hasattr(gamma, "table1"):
        return gamma.table1, gamma.table2
    return gamma


def init_cib(model):
    """Initial (x0 distribution, belief) pair for the model's structure."""
    ex = model.exact
    if ex is not None:
        x0_dist = tuple(ex.init_x0)
        p1, p2 = tuple(ex.init_x1), tuple(ex.init_x2)
    else:
        x0_dist = tuple(float(v) for v in model.init_x0)
        p1 = tuple(float(v) for v in model.init_x1)
        p2 = tuple(float(v) for v in model.init_x2)
    if model.info_structure == "maxinfo":
        return x0_dist, FactorizedBelief(p1, p2)
    if model.info_structure == "encrypted":
        A = model.n_anchors
        mu = _degenerate(A, 0)
        cond1 = [p1]
        cond2 = [p2]
        for a in range(1, A):
            xa, xb = model.anchor_pair(a)
            cond1.append(_degenerate(model.nx1, xa))
            cond2.append(_degenerate(model.nx2, xb))
        return x0_dist, AnchoredBelief(mu, tuple(cond1), tuple(cond2))
    raise UnsupportedInfoStructure(
        "no belief form for imperfect encryption; define and simulate only"
    )


# ---------------------------------------------------------------------------
# communication stage


def comm_update(belief, gamma, outcome: ChannelOutcome):
    """Condition the CIB on one communication outcome.

    The erasure event carries no information about the local states beyond
    the decisions (its probability depends only on the public x0 and channel
    state), so the failed-attempt update conditions on m alone.
    """
    g1, g2 = _tables(gamma)
    m1, m2 = outcome.m1, outcome.m2
    if outcome.z_er is not PHI and max(m1, m2) == 0:
        raise ValueError("a reveal requires at least one communication attempt")

    if isinstance(belief, FactorizedBelief):
        if outcome.z_er is not PHI:
            xa, xb = outcome.z_er
            return FactorizedBelief(
                _degenerate(len(belief.pi1), xa), _degenerate(len(belief.pi2), xb)
            )
        new1 = _normalize(
            [p * g1[x][m1] for x, p in enumerate(belief.pi1)], "comm_update agent 1"
        )
        new2 = _normalize(
            [p * g2[x][m2] for x, p in enumerate(belief.pi2)], "comm_update agent 2"
        )
        return FactorizedBelief(new1, new2)

    A = len(belief.mu)
    if outcome.z_er is not PHI:
        # Success: the new anchor is the current pair; its posterior given m
        # is the new mixture, conditionals collapse onto the anchor.
        weights = [0] * A
        for a in range(A):
            if belief.mu[a] == 0:
                continue
            for x1 in range(belief.nx1):
                w1 = belief.cond1[a][x1] * g1[a][x1][m1]
                if w1 == 0:
                    continue
                for x2 in range(belief.nx2):
                    w = w1 * belief.cond2[a][x2] * g2[a][x2][m2]
                    if w != 0:
                        weights[1 + x1 * belief.nx2 + x2] += belief.mu[a] * w
        mu = _normalize(weights, "comm_update success")
        cond1, cond2 = [], []
        for a in range(A):
            pair = belief.anchor_pair(a)
            if pair is None:
                cond1.append(_uniform(belief.nx1))
                cond2.append(_uniform(belief.nx2))
            else:
                cond1.append(_degenerate(belief.nx1, pair[0]))
                cond2.append(_degenerate(belief.nx2, pair[1]))
        return AnchoredBelief(mu, tuple(cond1), tuple(cond2))

    # Failure or no attempt: reweight conditionals by the decision
    # likelihoods, reweight the mixture by each anchor's total likelihood.
    mu_w = []
    cond1, cond2 = [], []
    for a in range(A):
        w1 = [belief.cond1[a][x] * g1[a][x][m1] for x in range(belief.nx1)]
        w2 = [belief.cond2[a][x] * g2[a][x][m2] for x in range(belief.nx2)]
        n1, n2 = sum(w1), sum(w2)
        mu_w.append(belief.mu[a] * n1 * n2)
        if belief.mu[a] != 0 and n1 != 0 and n2 != 0:
            cond1.append(tuple(v / n1 for v in w1))
            cond2.append(tuple(v / n2 for v in w2))
        else:
            mu_w[-1] = 0
            pair = belief.anchor_pair(a)
            if pair is None:
                cond1.append(_uniform(belief.nx1))
                cond2.append(_uniform(belief.nx2))
            else:
                cond1.append(_degenerate(belief.nx1, pair[0]))
                cond2.append(_degenerate(belief.nx2, pair[1]))
    mu = _normalize(mu_w, "comm_update failure")
    return AnchoredBelief(mu, tuple(cond1), tuple(cond2))


def outcome_dist(x0, e, belief, gamma, model):
    """Joint distribution of communication-outcome classes (m, z).

    Classes are ``ChannelOutcome`` values with z either PHI or a concrete
    pair; zero-probability classes are omitted.  Marginalizing over m
    reproduces the plain erasure-channel formulas.
    """
    g1, g2 = _tables(gamma)
    exact = model.exact is not None and _belief_exact(belief)
    pe = (model.exact.pe if exact else model.pe)[x0][e]
    one = Fraction(1) if exact else 1.0

    out = []
    for m1 in (0, 1):
        for m2 in (0, 1):
            if isinstance(belief, FactorizedBelief):
                w1 = [p * g1[x][m1] for x, p in enumerate(belief.pi1)]
                w2 = [p * g2[x][m2] for x, p in enumerate(belief.pi2)]
                pm = sum(w1) * sum(w2)
                if pm == 0:
                    continue
                if max(m1, m2) == 0:
                    out.append((ChannelOutcome(m1, m2, PHI), pm))
                    continue
                if pe != 0:
                    out.append((ChannelOutcome(m1, m2, PHI), pm * pe))
                if pe != 1:
                    for x1, a in enumerate(w1):
                        if a == 0:
                            continue
                        for x2, b in enumerate(w2):
                            if b == 0:
                                continue
                            out.append((ChannelOutcome(m1, m2, (x1, x2)), (one - pe) * a * b))
            else:
                pm = 0
                joint = {}
                for a in range(len(belief.mu)):
                    if belief.mu[a] == 0:
                        continue
                    w1 = [belief.cond1[a][x] * g1[a][x][m1] for x in range(belief.nx1)]
                    w2 = [belief.cond2[a][x] * g2[a][x][m2] for x in range(belief.nx2)]
                    pm += belief.mu[a] * sum(w1) * sum(w2)
                    for x1, va in enumerate(w1):
                        if va == 0:
                            continue
                        for x2, vb in enumerate(w2):
                            if vb != 0:
                                key = (x1, x2)
                                joint[key] = joint.get(key, 0) + belief.mu[a] * va * vb
                if pm == 0:
                    continue
                if max(m1, m2) == 0:
                    out.append((ChannelOutcome(m1, m2, PHI), pm))
                    continue
                if pe != 0:
                    out.append((ChannelOutcome(m1, m2, PHI), pm * pe))
                if pe != 1:
                    for (x1, x2), w in sorted(joint.items()):
                        out.append((ChannelOutcome(m1, m2, (x1, x2)), (one - pe) * w))
    return out


# ---------------------------------------------------------------------------
# control stage


def ctrl_update(x0, belief, lam, model, t):
    """Push the belief through the local dynamics under prescriptions lam.

    Deterministic in (belief, lam): the next common increment (x0', ua)
    says nothing about the local states because the global kernel does not
    read them.
    """
    l1, l2 = _tables(lam)
    exact = model.exact is not None and _belief_exact(belief)
    tab = model.exact if exact else model
    k1, k2 = tab.k1[t][x0], tab.k2[t][x0]

    if isinstance(belief, FactorizedBelief):
        return FactorizedBelief(
            _push(belief.pi1, l1, k1, model.nx1, model.nu1),
            _push(belief.pi2, l2, k2, model.nx2, model.nu2),
        )

    cond1 = tuple(
        _push(belief.cond1[a], l1[a], k1, model.nx1, model.nu1)
        for a in range(len(belief.mu))
    )
    cond2 = tuple(
        _push(belief.cond2[a], l2[a], k2, model.nx2, model.nu2)
        for a in range(len(belief.mu))
    )
    return AnchoredBelief(belief.mu, cond1, cond2)


def _push(pi, rows, kernel, nx, nu):
    out = [0] * nx
    for x, p in enumerate(pi):
        if p == 0:
            continue
        for u in range(nu):
            w = p * rows[x][u]
            if w == 0:
                continue
            krow = kernel[x][u]
            for x2 in range(nx):
                out[x2] += w * krow[x2]
    total = sum(out)
    return tuple(v / total for v in out)


def _belief_exact(belief):
    if isinstance(belief, FactorizedBelief):
        vals = list(belief.pi1) + list(belief.pi2)
    else:
        vals = list(belief.mu)
        for row in belief.cond1 + belief.cond2:
            vals.extend(row)
    return all(isinstance(v, (int, Fraction)) for v in vals)
