"""Strategies, online execution, exact adversary best response, and the
private-information reduction construction.

A trajectory is a tuple-of-tuples record of everything realized so far; each
strategy projects out the part its player is allowed to see.  All strategy
objects are deterministic functions of their inputs (behavioral randomness is
realized by the caller through explicit uniforms), so simulations replay
byte-for-byte from a seed.

The adversary engine does one backward induction over the adversary's
information tree against one or more frozen team strategies with signed
weights.  With a single team it is an exact best response (the adversary has
no private information, so per-information-set optimization is exact).  With
weights (+1, -1) on two team strategies it computes the exact extremum of the
cost difference over *all* adversary strategies, which is how the reduction's
cost-equality claim is verified exhaustively without literally enumerating
the doubly-exponential pure-strategy space.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple, Optional

import numpy as np

from .belief import COMM, CTRL, comm_update, ctrl_update, init_cib
from .channel import PHI, ChannelOutcome, rand_draw
from .errors import PolicyModelMismatch, SizeLimitExceeded, UnsupportedInfoStructure
from .model import GameModel
from .solver import CoordinatorPolicy


class Traj(NamedTuple):
    """Realized history.  At the comm stage of time t the state tuples have
    length t+1 and the action tuples length t; the ctrl stage appends m/z
    first and u/ua after."""

    x0s: tuple
    x1s: tuple
    x2s: tuple
    es: tuple
    m1s: tuple
    m2s: tuple
    zs: tuple       # entries: None (erased / silent) or an (x1, x2) pair
    ys: tuple       # imperfect-mode observations; () entries otherwise
    u1s: tuple
    u2s: tuple
    uas: tuple


def initial_traj(x0, x1, x2, e):
    return Traj((x0,), (x1,), (x2,), (e,), (), (), (), (), (), (), ())


# ---------------------------------------------------------------------------
# information projections


def agent_info(model, traj, agent, t, stage):
    """Agent i's information set I^i_t (stage=COMM) or I^i_{t+} (CTRL)."""
    xs = traj.x1s if agent == 1 else traj.x2s
    us = traj.u1s if agent == 1 else traj.u2s
    n = t + 1 if stage == CTRL else t
    base = (
        traj.x0s[: t + 1], xs[: t + 1], us[:t],
        traj.m1s[:n], traj.m2s[:n], traj.zs[:n], traj.uas[:t], traj.es[: t + 1],
    )
    if model.info_structure == "imperfect":
        return base + (traj.ys[:n],)
    return base


def adversary_info(model, traj, t, stage):
    """The adversary's information set; also the overall common information."""
    n = t + 1 if stage == CTRL else t
    if model.info_structure == "maxinfo":
        obs = traj.zs[:n]
    elif model.info_structure == "encrypted":
        obs = tuple(0 if z is None else 1 for z in traj.zs[:n])
    else:
        obs = traj.ys[:n]
    return (traj.x0s[: t + 1], traj.uas[:t], traj.m1s[:n], traj.m2s[:n], obs, traj.es[: t + 1])


def team_common_info(model, traj, t, stage):
    """(C, D): the common information plus the team's common private part."""
    c = adversary_info(model, traj, t, stage)
    if model.info_structure == "maxinfo":
        return c, ()
    n = t + 1 if stage == CTRL else t
    return c, traj.zs[:n]


def last_anchor(traj, upto):
    """Most recent successfully exchanged pair among zs[:upto], else None."""
    for z in reversed(traj.zs[:upto]):
        if z is not None:
            return z
    return None


# ---------------------------------------------------------------------------
# strategy objects


class TeamStrategy:
    def comm_dists(self, model, traj, t):
        raise NotImplementedError

    def ctrl_dists(self, model, traj, t):
        raise NotImplementedError


class AdversaryStrategy:
    def action_dist(self, model, traj, t):
        raise NotImplementedError


@dataclass
class HistoryStrategy:
    """Explicit per-information-set tables.

    Team tables are keyed (stage, agent, info-tuple); adversary tables are
    keyed by the adversary info-tuple at the control stage.
    """

    kind: str                     # "team" or "adversary"
    tables: dict
    scenario_hash: Optional[str] = None


class HistoryTeamStrategy(TeamStrategy):
    def __init__(self, strategy: HistoryStrategy, uniform_fallback=False):
        assert strategy.kind == "team"
        self.tables = strategy.tables
        self.uniform_fallback = uniform_fallback

    def _dist(self, model, stage, agent, key, n_actions):
        d = self.tables.get((stage, agent, key))
        if d is None:
            if not self.uniform_fallback:
                raise KeyError((stage, agent, key))
            d = tuple(1.0 / n_actions for _ in range(n_actions))
        return d

    def comm_dists(self, model, traj, t):
        k1 = agent_info(model, traj, 1, t, COMM)
        k2 = agent_info(model, traj, 2, t, COMM)
        return (
            self._dist(model, COMM, 1, k1, 2),
            self._dist(model, COMM, 2, k2, 2),
        )

    def ctrl_dists(self, model, traj, t):
        k1 = agent_info(model, traj, 1, t, CTRL)
        k2 = agent_info(model, traj, 2, t, CTRL)
        return (
            self._dist(model, CTRL, 1, k1, model.nu1),
            self._dist(model, CTRL, 2, k2, model.nu2),
        )


def _hash_rng(*parts):
    h = hashlib.sha256(repr(parts).encode()).digest()
    return np.random.default_rng(struct.unpack("<4Q", h[:32]))


def _seeded_dist(seed, key, n, deterministic):
    rng = _hash_rng(seed, key)
    if deterministic:
        j = int(rng.integers(n))
        return tuple(1.0 if i == j else 0.0 for i in range(n))
    w = -np.log(1.0 - rng.random(n))
    w /= w.sum()
    return tuple(float(v) for v in w)


class SeededRandomTeamStrategy(TeamStrategy):
    """Full-history behavioral strategy with per-information-set action
    distributions derived from a hash of the information realization."""

    def __init__(self, seed, deterministic=False):
        self.seed = seed
        self.deterministic = deterministic

    def comm_dists(self, model, traj, t):
        return (
            _seeded_dist(self.seed, ("c", 1, agent_info(model, traj, 1, t, COMM)), 2, self.deterministic),
            _seeded_dist(self.seed, ("c", 2, agent_info(model, traj, 2, t, COMM)), 2, self.deterministic),
        )

    def ctrl_dists(self, model, traj, t):
        return (
            _seeded_dist(self.seed, ("u", 1, agent_info(model, traj, 1, t, CTRL)), model.nu1, self.deterministic),
            _seeded_dist(self.seed, ("u", 2, agent_info(model, traj, 2, t, CTRL)), model.nu2, self.deterministic),
        )


class PolicyTeamStrategy(TeamStrategy):
    """The extracted coordinator policy, replayed along the tree edges."""

    def __init__(self, policy: CoordinatorPolicy, model: GameModel):
        if policy.scenario_hash != model.scenario_hash:
            raise PolicyModelMismatch("policy was solved for a different scenario")
        self.policy = policy
        self.model = model
        self._cache = {}

    def _walk_key(self, traj, t, stage):
        n = t + 1 if stage == CTRL else t
        if self.policy.mode == "maxinfo":
            obs = traj.zs[:n]
        else:
            obs = tuple(0 if z is None else 1 for z in traj.zs[:n])
        return (t, stage, traj.x0s[: t + 1], traj.es[: t + 1], traj.m1s[:n], traj.m2s[:n], obs)

    def node_key_for(self, traj, t, stage):
        wk = self._walk_key(traj, t, stage)
        hit = self._cache.get(wk)
        if hit is not None:
            return hit
        key = self.policy.root_key(traj.x0s[0], traj.es[0])
        for tau in range(t + 1):
            if tau == t and stage == COMM:
                break
            edge = self.policy.comm_edge(traj.m1s[tau], traj.m2s[tau], traj.zs[tau])
            key = self.policy.child(key, edge)
            if tau == t and stage == CTRL:
                break
            key = self.policy.child(key, ("next", traj.x0s[tau + 1], traj.es[tau + 1]))
        self._cache[wk] = key
        return key

    def _rows(self, traj, t, stage):
        key = self.node_key_for(traj, t, stage)
        pair = self.policy.prescriptions(key)
        x1, x2 = traj.x1s[t], traj.x2s[t]
        if self.policy.mode == "maxinfo":
            return tuple(pair.table1[x1]), tuple(pair.table2[x2])
        upto = t + 1 if stage == CTRL else t
        a = self.model.anchor_index(last_anchor(traj, upto))
        return tuple(pair.table1[a][x1]), tuple(pair.table2[a][x2])

    def comm_dists(self, model, traj, t):
        return self._rows(traj, t, COMM)

    def ctrl_dists(self, model, traj, t):
        return self._rows(traj, t, CTRL)


class BeliefTeamStrategy(TeamStrategy):
    """A strategy of the reduced form for encrypted play: prescriptions are a
    seeded deterministic function of (time, stage, overall common information,
    rounded team belief), and agents apply them to their current local state.

    The team belief over (x1, x2) is maintained with the plain unencrypted
    update rules along the team's full common information (which includes the
    exchanged contents), exactly the object the anchor-sufficiency property
    speaks about.
    """

    def __init__(self, model, seed, deterministic=False):
        self.model = model
        self.seed = seed
        self.deterministic = deterministic
        self._cache = {}

    def _belief_at(self, traj, t, stage):
        key = (t, stage, traj.x0s[: t + 1], traj.es[: t + 1],
               traj.m1s[: t + (stage == CTRL)], traj.m2s[: t + (stage == CTRL)],
               traj.zs[: t + (stage == CTRL)], traj.uas[:t])
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        model = self.model
        b1 = tuple(float(v) for v in model.init_x1)
        b2 = tuple(float(v) for v in model.init_x2)
        for tau in range(t + 1):
            if tau == t and stage == COMM:
                break
            g1, g2 = self._prescription(traj, tau, COMM, (b1, b2))
            m1, m2 = traj.m1s[tau], traj.m2s[tau]
            z = traj.zs[tau]
            if z is not None:
                b1 = tuple(1.0 if i == z[0] else 0.0 for i in range(model.nx1))
                b2 = tuple(1.0 if i == z[1] else 0.0 for i in range(model.nx2))
            else:
                w1 = [b1[x] * g1[x][m1] for x in range(model.nx1)]
                w2 = [b2[x] * g2[x][m2] for x in range(model.nx2)]
                b1 = tuple(v / sum(w1) for v in w1)
                b2 = tuple(v / sum(w2) for v in w2)
            if tau == t and stage == CTRL:
                break
            l1, l2 = self._prescription(traj, tau, CTRL, (b1, b2))
            x0 = traj.x0s[tau]
            n1 = [0.0] * model.nx1
            n2 = [0.0] * model.nx2
            for x in range(model.nx1):
                for u in range(model.nu1):
                    w = b1[x] * l1[x][u]
                    for x2 in range(model.nx1):
                        n1[x2] += w * float(model.k1[tau, x0, x, u, x2])
            for x in range(model.nx2):
                for u in range(model.nu2):
                    w = b2[x] * l2[x][u]
                    for x2 in range(model.nx2):
                        n2[x2] += w * float(model.k2[tau, x0, x, u, x2])
            b1 = tuple(v / sum(n1) for v in n1)
            b2 = tuple(v / sum(n2) for v in n2)
        self._cache[key] = (b1, b2)
        return b1, b2

    def _prescription(self, traj, t, stage, belief):
        model = self.model
        c = adversary_info(model, traj, t, stage)
        rounded = tuple(round(v, 10) for v in belief[0] + belief[1])
        n_act = (2, 2) if stage == COMM else (model.nu1, model.nu2)
        nx = (model.nx1, model.nx2)
        tables = []
        for agent in (1, 2):
            rows = [
                _seeded_dist(self.seed, ("b", agent, stage, c, rounded, x),
                             n_act[agent - 1], self.deterministic)
                for x in range(nx[agent - 1])
            ]
            tables.append(rows)
        return tables

    def comm_dists(self, model, traj, t):
        b = self._belief_at(traj, t, COMM)
        g1, g2 = self._prescription(traj, t, COMM, b)
        return tuple(g1[traj.x1s[t]]), tuple(g2[traj.x2s[t]])

    def ctrl_dists(self, model, traj, t):
        b = self._belief_at(traj, t, CTRL)
        l1, l2 = self._prescription(traj, t, CTRL, b)
        return tuple(l1[traj.x1s[t]]), tuple(l2[traj.x2s[t]])


class UniformAdversary(AdversaryStrategy):
    def action_dist(self, model, traj, t):
        return tuple(Fraction(1, model.nua) for _ in range(model.nua))


class OpenLoopAdversary(AdversaryStrategy):
    """A fixed action sequence, the defining object of the reduction."""

    def __init__(self, actions):
        self.actions = tuple(actions)

    def action_dist(self, model, traj, t):
        a = self.actions[t]
        return tuple(1 if i == a else 0 for i in range(model.nua))


class SeededRandomAdversary(AdversaryStrategy):
    def __init__(self, seed, deterministic=False):
        self.seed = seed
        self.deterministic = deterministic

    def action_dist(self, model, traj, t):
        key = ("a", adversary_info(model, traj, t, CTRL))
        return _seeded_dist(self.seed, key, model.nua, self.deterministic)


class HistoryAdversaryStrategy(AdversaryStrategy):
    def __init__(self, strategy: HistoryStrategy, uniform_fallback=False):
        assert strategy.kind == "adversary"
        self.tables = strategy.tables
        self.uniform_fallback = uniform_fallback

    def action_dist(self, model, traj, t):
        key = adversary_info(model, traj, t, CTRL)
        d = self.tables.get(key)
        if d is None:
            if not self.uniform_fallback:
                raise KeyError(key)
            d = tuple(1.0 / model.nua for _ in range(model.nua))
        return d


def as_team_strategy(obj, model) -> TeamStrategy:
    if isinstance(obj, CoordinatorPolicy):
        return PolicyTeamStrategy(obj, model)
    if isinstance(obj, HistoryStrategy):
        return HistoryTeamStrategy(obj)
    if isinstance(obj, TeamStrategy):
        return obj
    raise TypeError(f"not a team strategy: {obj!r}")


def as_adversary_strategy(obj) -> AdversaryStrategy:
    if isinstance(obj, HistoryStrategy):
        return HistoryAdversaryStrategy(obj)
    if isinstance(obj, AdversaryStrategy):
        return obj
    raise TypeError(f"not an adversary strategy: {obj!r}")


# ---------------------------------------------------------------------------
# episodes


@dataclass
class EpisodeResult:
    seed: int
    rows: list                # one dict per time step (CSV schema)
    cost: float
    belief_deviation: float = 0.0


def run_episode(model, team, adversary, seed, verify_beliefs=False) -> EpisodeResult:
    """Play one episode.  Every random draw is an inverse-CDF lookup on a
    uniform from the seeded generator, in a fixed documented order, so the
    trajectory is a deterministic function of (model, strategies, seed)."""
    policy = team if isinstance(team, CoordinatorPolicy) else None
    team_s = as_team_strategy(team, model)
    adv_s = as_adversary_strategy(adversary)
    rng = np.random.default_rng(seed)

    def u():
        return 1.0 - rng.random()

    x0 = rand_draw(range(model.nx0), [float(v) for v in model.init_x0], u())
    x1 = rand_draw(range(model.nx1), [float(v) for v in model.init_x1], u())
    x2 = rand_draw(range(model.nx2), [float(v) for v in model.init_x2], u())
    e = rand_draw(range(model.ne), [float(v) for v in model.channel.init_e], u())
    traj = initial_traj(x0, x1, x2, e)

    belief_dev = 0.0
    online = None
    if verify_beliefs and policy is not None:
        _, online = init_cib(model)

    total = 0.0
    rows = []
    for t in range(model.horizon):
        x0, x1, x2, e = traj.x0s[t], traj.x1s[t], traj.x2s[t], traj.es[t]
        d1, d2 = team_s.comm_dists(model, traj, t)
        m1 = rand_draw((0, 1), [float(v) for v in d1], u())
        m2 = rand_draw((0, 1), [float(v) for v in d2], u())
        z = PHI
        if max(m1, m2) == 1:
            pe = float(model.pe[x0, e])
            z = rand_draw((PHI, (x1, x2)), [pe, 1.0 - pe], u())
        y = ()
        if model.info_structure == "imperfect":
            from .channel import adversary_observation

            outcome = ChannelOutcome(m1, m2, z)
            y = adversary_observation(outcome, x0, "imperfect", model.imperfect_obs, u())[2]
        traj = traj._replace(
            m1s=traj.m1s + (m1,), m2s=traj.m2s + (m2,),
            zs=traj.zs + (z,), ys=traj.ys + (y,),
        )

        if online is not None:
            node = policy.tree.nodes[team_s.node_key_for(traj, t, COMM)]
            belief_dev = max(belief_dev, _belief_gap(online, node.belief))
            pair = node.prescription
            online = comm_update(online, (pair.table1, pair.table2), ChannelOutcome(m1, m2, z))

        dd1, dd2 = team_s.ctrl_dists(model, traj, t)
        u1 = rand_draw(range(model.nu1), [float(v) for v in dd1], u())
        u2 = rand_draw(range(model.nu2), [float(v) for v in dd2], u())
        ua = rand_draw(range(model.nua), [float(v) for v in adv_s.action_dist(model, traj, t)], u())

        if online is not None:
            node = policy.tree.nodes[team_s.node_key_for(traj, t, CTRL)]
            belief_dev = max(belief_dev, _belief_gap(online, node.belief))
            pair = node.prescription
            online = ctrl_update(x0, online, (pair.table1, pair.table2), model, t)

        sc = float(model.cost[t, x0, x1, x2, u1, u2, ua])
        cc = float(model.rho[x0, x1, x2]) if max(m1, m2) == 1 else 0.0
        total += sc + cc
        rows.append(
            dict(t=t + 1, x0=x0, x1=x1, x2=x2, m1=m1, m2=m2,
                 zer="phi" if z is PHI else f"{z[0]}:{z[1]}",
                 ua=ua, u1=u1, u2=u2, stage_cost=sc, comm_cost=cc)
        )

        nx0 = rand_draw(range(model.nx0), [float(v) for v in model.k0[t, x0, ua]], u())
        nx1 = rand_draw(range(model.nx1), [float(v) for v in model.k1[t, x0, x1, u1]], u())
        nx2 = rand_draw(range(model.nx2), [float(v) for v in model.k2[t, x0, x2, u2]], u())
        ne = rand_draw(range(model.ne), [float(v) for v in model.channel.e_kernel[t, e]], u())
        traj = traj._replace(
            u1s=traj.u1s + (u1,), u2s=traj.u2s + (u2,), uas=traj.uas + (ua,),
            x0s=traj.x0s + (nx0,), x1s=traj.x1s + (nx1,), x2s=traj.x2s + (nx2,),
            es=traj.es + (ne,),
        )
    return EpisodeResult(seed=seed, rows=rows, cost=total, belief_deviation=belief_dev)


def _belief_gap(online, stored):
    from .belief import FactorizedBelief

    if isinstance(online, FactorizedBelief):
        a = np.array(online.pi1 + online.pi2, dtype=float)
        b = np.array(stored.pi1 + stored.pi2, dtype=float)
        return float(np.abs(a - b).max())
    a = np.concatenate([
        np.asarray(online.mu, float),
        np.asarray(online.cond1, float).ravel(),
        np.asarray(online.cond2, float).ravel(),
    ])
    b = np.concatenate([
        np.asarray(stored.mu, float),
        np.asarray(stored.cond1, float).ravel(),
        np.asarray(stored.cond2, float).ravel(),
    ])
    return float(np.abs(a - b).max())


# ---------------------------------------------------------------------------
# adversary backward induction


def _comm_joint(model, team, traj, t):
    """[(m1, m2, z, prob), ...] with positive probability only.

    Entry types follow the inputs: exact strategies over an exact model stay
    in Fractions.
    """
    d1, d2 = team.comm_dists(model, traj, t)
    x0, e = traj.x0s[t], traj.es[t]
    x = (traj.x1s[t], traj.x2s[t])
    pe_tab = model.exact.pe if model.exact is not None else model.pe
    pe = pe_tab[x0][e]
    out = []
    for m1 in (0, 1):
        p1 = d1[m1]
        if p1 == 0:
            continue
        for m2 in (0, 1):
            p = p1 * d2[m2]
            if p == 0:
                continue
            if max(m1, m2) == 0:
                out.append((m1, m2, PHI, p))
            else:
                if pe > 0:
                    out.append((m1, m2, PHI, p * pe))
                if pe < 1:
                    out.append((m1, m2, x, p * (1 - pe)))
    return out


def adversary_best_response(model, team, cap=2_000_000):
    """Exact max over adversary strategies of J(team, g_a), plus an argmax
    pure strategy keyed by adversary information sets."""
    value, tables = _adversary_induction(model, [(as_team_strategy(team, model), 1.0)], cap)
    return value, HistoryStrategy("adversary", tables, model.scenario_hash)


def adversary_value_of_gap(model, team_a, team_b, cap=2_000_000):
    """max over adversary strategies of J(team_a) - J(team_b)."""
    teams = [(as_team_strategy(team_a, model), 1.0), (as_team_strategy(team_b, model), -1.0)]
    value, _ = _adversary_induction(model, teams, cap)
    return value


def max_cost_gap(model, team_a, team_b, cap=2_000_000):
    """max over all adversary strategies of |J(team_a) - J(team_b)|."""
    up = adversary_value_of_gap(model, team_a, team_b, cap)
    dn = adversary_value_of_gap(model, team_b, team_a, cap)
    return max(up, dn)


def _adversary_induction(model, teams, cap):
    """Backward induction over the adversary's information tree.

    Carries, per information set, the unnormalized joint weight of every
    team-side trajectory under each frozen team strategy.  The adversary's
    choice maximizes the weighted sum; weights do not depend on its own
    strategy, so per-node maximization is exact.
    """
    counter = {"n": 0}
    tables = {}

    def bump(k=1):
        counter["n"] += k
        if counter["n"] > cap:
            raise SizeLimitExceeded(f"adversary induction exceeded {cap} expansions")

    def comm_layer(t, items):
        # items: list of (traj, weight-vector); shared adversary view.
        if t >= model.horizon:
            return 0.0
        comm_cost = 0.0
        groups = {}
        for traj, wv in items:
            bump()
            x0 = traj.x0s[t]
            x1, x2 = traj.x1s[t], traj.x2s[t]
            rho = float(model.rho[x0, x1, x2])
            for k, (team, coeff) in enumerate(teams):
                if wv[k] == 0.0:
                    continue
                branches = _comm_joint(model, team, traj, t)
                for m1, m2, z, p in branches:
                    if max(m1, m2) == 1:
                        comm_cost += coeff * wv[k] * p * rho
                    nt = traj._replace(
                        m1s=traj.m1s + (m1,), m2s=traj.m2s + (m2,),
                        zs=traj.zs + (z,), ys=traj.ys + ((),),
                    )
                    if model.info_structure == "maxinfo":
                        ob = (m1, m2, z)
                    elif model.info_structure == "encrypted":
                        ob = (m1, m2, 0 if z is PHI else 1)
                    else:
                        raise UnsupportedInfoStructure(
                            "best response needs a solver-supported structure"
                        )
                    g = groups.setdefault(ob, {})
                    wv2 = g.get(nt)
                    if wv2 is None:
                        wv2 = [0.0] * len(teams)
                        g[nt] = wv2
                    wv2[k] += wv[k] * p
        total = comm_cost
        for ob in sorted(groups, key=repr):
            total += ctrl_layer(t, list(groups[ob].items()))
        return total

    def ctrl_layer(t, items):
        # Adversary decision point at t+: evaluate each pure action.
        info = adversary_info(model, items[0][0], t, CTRL)
        best = None
        best_a = 0
        for ua in range(model.nua):
            stage = 0.0
            groups = {}
            for traj, wv in items:
                bump()
                x0, x1, x2 = traj.x0s[t], traj.x1s[t], traj.x2s[t]
                e = traj.es[t]
                for k, (team, coeff) in enumerate(teams):
                    if wv[k] == 0.0:
                        continue
                    d1, d2 = team.ctrl_dists(model, traj, t)
                    for u1 in range(model.nu1):
                        pu1 = float(d1[u1])
                        if pu1 == 0.0:
                            continue
                        for u2 in range(model.nu2):
                            p = pu1 * float(d2[u2])
                            if p == 0.0:
                                continue
                            w = wv[k] * p
                            stage += coeff * w * float(model.cost[t, x0, x1, x2, u1, u2, ua])
                            if t + 1 >= model.horizon:
                                continue
                            for o in range(model.nx0):
                                p0 = float(model.k0[t, x0, ua, o])
                                if p0 == 0.0:
                                    continue
                                for e2 in range(model.ne):
                                    pz = float(model.channel.e_kernel[t, e, e2])
                                    if pz == 0.0:
                                        continue
                                    for n1 in range(model.nx1):
                                        p1 = float(model.k1[t, x0, x1, u1, n1])
                                        if p1 == 0.0:
                                            continue
                                        for n2 in range(model.nx2):
                                            p2 = float(model.k2[t, x0, x2, u2, n2])
                                            if p2 == 0.0:
                                                continue
                                            nt = traj._replace(
                                                u1s=traj.u1s + (u1,), u2s=traj.u2s + (u2,),
                                                uas=traj.uas + (ua,),
                                                x0s=traj.x0s + (o,), x1s=traj.x1s + (n1,),
                                                x2s=traj.x2s + (n2,), es=traj.es + (e2,),
                                            )
                                            g = groups.setdefault((o, e2), {})
                                            wv2 = g.get(nt)
                                            if wv2 is None:
                                                wv2 = [0.0] * len(teams)
                                                g[nt] = wv2
                                            wv2[k] += w * p0 * pz * p1 * p2
            cont = stage
            for ob in sorted(groups):
                cont += comm_layer(t + 1, list(groups[ob].items()))
            if best is None or cont > best:
                best = cont
                best_a = ua
        tables[info] = tuple(1.0 if i == best_a else 0.0 for i in range(model.nua))
        return best

    roots = {}
    for x0 in range(model.nx0):
        p0 = float(model.init_x0[x0])
        if p0 == 0.0:
            continue
        for e in range(model.ne):
            pz = float(model.channel.init_e[e])
            if pz == 0.0:
                continue
            for x1 in range(model.nx1):
                p1 = float(model.init_x1[x1])
                if p1 == 0.0:
                    continue
                for x2 in range(model.nx2):
                    p2 = float(model.init_x2[x2])
                    if p2 == 0.0:
                        continue
                    traj = initial_traj(x0, x1, x2, e)
                    g = roots.setdefault((x0, e), [])
                    g.append((traj, [p0 * pz * p1 * p2] * len(teams)))
    total = 0.0
    for ob in sorted(roots):
        total += comm_layer(0, roots[ob])
    return total, tables


# ---------------------------------------------------------------------------
# private-information reduction


@dataclass
class ReductionArtifacts:
    """Distributions and reduced strategies from the constructive proof that
    agents may condition on (current local state, common information) only.

    ``psi[(t, iota)]`` maps full-history tuples (x-histories, u-histories,
    m_t) to conditional probabilities given the adversary information
    realization ``iota``; feasibility is with respect to the open-loop
    adversary play embedded in ``iota``.  ``psi_plus`` is the post-control
    analog over (x-histories, u-histories including time t).  ``phi`` /
    ``phi_plus`` are their current-state marginals, ``fbar`` / ``gbar`` the
    reduced per-agent strategies.  Infeasible realizations are represented by
    their uniform fallbacks at lookup time rather than materialized.
    """

    scenario_hash: str
    horizon: int
    psi: dict
    psi_plus: dict
    phi: dict
    phi_plus: dict
    fbar: dict       # (t, agent, iota) -> tuple over x of dists over {0,1}
    gbar: dict       # (t, agent, iota) -> tuple over x of dists over U_i

    def fbar_dist(self, model, t, agent, iota, x):
        entry = self.fbar.get((t, agent, iota))
        if entry is None:
            return (0.5, 0.5)
        return entry[x]

    def gbar_dist(self, model, t, agent, iota, x):
        entry = self.gbar.get((t, agent, iota))
        nu = model.nu1 if agent == 1 else model.nu2
        if entry is None:
            return tuple(1.0 / nu for _ in range(nu))
        return entry[x]


class ReducedTeamStrategy(TeamStrategy):
    """Plays the reduced strategies; unseen adversary-information
    realizations fall back to uniform, as in the defining construction."""

    def __init__(self, artifacts: ReductionArtifacts):
        self.artifacts = artifacts

    def comm_dists(self, model, traj, t):
        iota = adversary_info(model, traj, t, COMM)
        return (
            self.artifacts.fbar_dist(model, t, 1, iota, traj.x1s[t]),
            self.artifacts.fbar_dist(model, t, 2, iota, traj.x2s[t]),
        )

    def ctrl_dists(self, model, traj, t):
        iota = adversary_info(model, traj, t, CTRL)
        return (
            self.artifacts.gbar_dist(model, t, 1, iota, traj.x1s[t]),
            self.artifacts.gbar_dist(model, t, 2, iota, traj.x2s[t]),
        )


def _agent_hist(traj, agent, t, include_u_t):
    xs = traj.x1s if agent == 1 else traj.x2s
    us = traj.u1s if agent == 1 else traj.u2s
    n_u = t + 1 if include_u_t else t
    return xs[: t + 1], us[:n_u]


def reduce_strategy(model, team, feasibility_tol=1e-15, cap=5_000_000) -> ReductionArtifacts:
    """Exact forward inference of the reduction distributions under every
    open-loop adversary action sequence, then the reduced strategies by
    per-agent marginalization and conditioning."""
    team_s = as_team_strategy(team, model)
    if model.info_structure != "maxinfo":
        raise UnsupportedInfoStructure(
            "the reduction is defined against the maximal-information adversary"
        )
    psi_raw = {}
    psi_plus_raw = {}
    counter = {"n": 0}

    def bump():
        counter["n"] += 1
        if counter["n"] > cap:
            raise SizeLimitExceeded(f"reduction enumeration exceeded {cap} expansions")

    def walk(t, traj, w):
        if t >= model.horizon:
            return
        bump()
        branches = _comm_joint(model, team_s, traj, t)
        for m1, m2, z, p in branches:
            nt = traj._replace(
                m1s=traj.m1s + (m1,), m2s=traj.m2s + (m2,),
                zs=traj.zs + (z,), ys=traj.ys + ((),),
            )
            wz = w * p
            iota = adversary_info(model, nt, t, COMM)
            h1 = _agent_hist(nt, 1, t, False)
            h2 = _agent_hist(nt, 2, t, False)
            d = psi_raw.setdefault((t, iota), {})
            k = (h1[0], h2[0], h1[1], h2[1], (m1, m2))
            d[k] = d.get(k, 0.0) + wz
            d1, d2 = team_s.ctrl_dists(model, nt, t)
            for u1 in range(model.nu1):
                pu1 = float(d1[u1])
                if pu1 == 0.0:
                    continue
                for u2 in range(model.nu2):
                    pu = pu1 * float(d2[u2])
                    if pu == 0.0:
                        continue
                    ct = nt._replace(u1s=nt.u1s + (u1,), u2s=nt.u2s + (u2,))
                    wu = wz * pu
                    iota_p = adversary_info(model, ct, t, CTRL)
                    g1 = _agent_hist(ct, 1, t, True)
                    g2 = _agent_hist(ct, 2, t, True)
                    dp = psi_plus_raw.setdefault((t, iota_p), {})
                    kp = (g1[0], g2[0], g1[1], g2[1])
                    dp[kp] = dp.get(kp, 0.0) + wu
                    if t + 1 >= model.horizon:
                        continue
                    for ua in range(model.nua):
                        for o in range(model.nx0):
                            p0 = float(model.k0[t, traj.x0s[t], ua, o])
                            if p0 == 0.0:
                                continue
                            for e2 in range(model.ne):
                                pz2 = float(model.channel.e_kernel[t, traj.es[t], e2])
                                if pz2 == 0.0:
                                    continue
                                for n1 in range(model.nx1):
                                    p1 = float(model.k1[t, traj.x0s[t], traj.x1s[t], u1, n1])
                                    if p1 == 0.0:
                                        continue
                                    for n2 in range(model.nx2):
                                        p2 = float(model.k2[t, traj.x0s[t], traj.x2s[t], u2, n2])
                                        if p2 == 0.0:
                                            continue
                                        walk(
                                            t + 1,
                                            ct._replace(
                                                uas=ct.uas + (ua,),
                                                x0s=ct.x0s + (o,), x1s=ct.x1s + (n1,),
                                                x2s=ct.x2s + (n2,), es=ct.es + (e2,),
                                            ),
                                            wu * p0 * pz2 * p1 * p2,
                                        )

    for x0 in range(model.nx0):
        p0 = float(model.init_x0[x0])
        if p0 == 0.0:
            continue
        for e in range(model.ne):
            pz = float(model.channel.init_e[e])
            if pz == 0.0:
                continue
            for x1 in range(model.nx1):
                p1 = float(model.init_x1[x1])
                if p1 == 0.0:
                    continue
                for x2 in range(model.nx2):
                    p2 = float(model.init_x2[x2])
                    if p2 == 0.0:
                        continue
                    walk(0, initial_traj(x0, x1, x2, e), p0 * pz * p1 * p2)

    psi, phi, fbar = {}, {}, {}
    for (t, iota), hist in psi_raw.items():
        mass = sum(hist.values())
        if mass <= feasibility_tol:
            continue
        cond = {k: v / mass for k, v in hist.items()}
        psi[(t, iota)] = cond
        ph = {}
        for (x1h, x2h, _, _, m), v in cond.items():
            k = (x1h[-1], x2h[-1], m)
            ph[k] = ph.get(k, 0.0) + v
        phi[(t, iota)] = ph
        for agent, nx in ((1, model.nx1), (2, model.nx2)):
            rows = []
            for x in range(nx):
                margins = [0.0, 0.0]
                for (xc, xc2, m), v in ph.items():
                    xi = xc if agent == 1 else xc2
                    if xi == x:
                        margins[m[agent - 1]] += v
                tot = sum(margins)
                rows.append(tuple(v / tot for v in margins) if tot > 0 else (0.5, 0.5))
            fbar[(t, agent, iota)] = tuple(rows)

    psi_plus, phi_plus, gbar = {}, {}, {}
    for (t, iota), hist in psi_plus_raw.items():
        mass = sum(hist.values())
        if mass <= feasibility_tol:
            continue
        cond = {k: v / mass for k, v in hist.items()}
        psi_plus[(t, iota)] = cond
        ph = {}
        for (x1h, x2h, u1h, u2h), v in cond.items():
            k = (x1h[-1], x2h[-1], u1h[-1], u2h[-1])
            ph[k] = ph.get(k, 0.0) + v
        phi_plus[(t, iota)] = ph
        for agent, nx, nu in ((1, model.nx1, model.nu1), (2, model.nx2, model.nu2)):
            rows = []
            for x in range(nx):
                margins = [0.0] * nu
                for (xa, xb, ua_, ub), v in ph.items():
                    xi = xa if agent == 1 else xb
                    ui = ua_ if agent == 1 else ub
                    if xi == x:
                        margins[ui] += v
                tot = sum(margins)
                rows.append(
                    tuple(v / tot for v in margins) if tot > 0 else tuple(1.0 / nu for _ in range(nu))
                )
            gbar[(t, agent, iota)] = tuple(rows)

    return ReductionArtifacts(
        scenario_hash=model.scenario_hash,
        horizon=model.horizon,
        psi=psi, psi_plus=psi_plus, phi=phi, phi_plus=phi_plus,
        fbar=fbar, gbar=gbar,
    )


def psi_factorization_gap(model, artifacts: ReductionArtifacts) -> float:
    """Max over feasible realizations of |psi - psi^1 * psi^2|: the joint
    conditional must be the product of its per-agent marginals."""
    worst = 0.0
    for (t, iota), cond in artifacts.psi.items():
        m1, m2 = {}, {}
        for (x1h, x2h, u1h, u2h, m), v in cond.items():
            k1 = (x1h, u1h, m[0])
            k2 = (x2h, u2h, m[1])
            m1[k1] = m1.get(k1, 0.0) + v
            m2[k2] = m2.get(k2, 0.0) + v
        for (x1h, x2h, u1h, u2h, m), v in cond.items():
            prod = m1[(x1h, u1h, m[0])] * m2[(x2h, u2h, m[1])]
            worst = max(worst, abs(v - prod))
        # zero entries of the joint must also match the product
        for k1, v1 in m1.items():
            for k2, v2 in m2.items():
                joint = cond.get((k1[0], k2[0], k1[1], k2[1], (k1[2], k2[2])), 0.0)
                worst = max(worst, abs(joint - v1 * v2))
    for (t, iota), cond in artifacts.psi_plus.items():
        m1, m2 = {}, {}
        for (x1h, x2h, u1h, u2h), v in cond.items():
            k1 = (x1h, u1h)
            k2 = (x2h, u2h)
            m1[k1] = m1.get(k1, 0.0) + v
            m2[k2] = m2.get(k2, 0.0) + v
        for k1, v1 in m1.items():
            for k2, v2 in m2.items():
                joint = cond.get((k1[0], k2[0], k1[1], k2[1]), 0.0)
                worst = max(worst, abs(joint - v1 * v2))
    return worst


def check_adversary_independence(model, team, adversaries) -> float:
    """Max deviation between the open-loop reduction distributions and the
    conditional distributions realized under arbitrary adversary strategies
    sharing a feasible information realization."""
    artifacts = reduce_strategy(model, team)
    team_s = as_team_strategy(team, model)
    worst = 0.0
    for adv in adversaries:
        adv_s = as_adversary_strategy(adv)
        seen = {}
        seen_plus = {}

        def walk(t, traj, w):
            if t >= model.horizon or w == 0.0:
                return
            for m1, m2, z, p in _comm_joint(model, team_s, traj, t):
                nt = traj._replace(
                    m1s=traj.m1s + (m1,), m2s=traj.m2s + (m2,),
                    zs=traj.zs + (z,), ys=traj.ys + ((),),
                )
                wz = w * p
                iota = adversary_info(model, nt, t, COMM)
                h1 = _agent_hist(nt, 1, t, False)
                h2 = _agent_hist(nt, 2, t, False)
                d = seen.setdefault((t, iota), {})
                k = (h1[0], h2[0], h1[1], h2[1], (m1, m2))
                d[k] = d.get(k, 0.0) + wz
                d1, d2 = team_s.ctrl_dists(model, nt, t)
                da = adv_s.action_dist(model, nt, t)
                for u1 in range(model.nu1):
                    if float(d1[u1]) == 0.0:
                        continue
                    for u2 in range(model.nu2):
                        pu = float(d1[u1]) * float(d2[u2])
                        if pu == 0.0:
                            continue
                        ct = nt._replace(u1s=nt.u1s + (u1,), u2s=nt.u2s + (u2,))
                        wu = wz * pu
                        iota_p = adversary_info(model, ct, t, CTRL)
                        g1 = _agent_hist(ct, 1, t, True)
                        g2 = _agent_hist(ct, 2, t, True)
                        dp = seen_plus.setdefault((t, iota_p), {})
                        kp = (g1[0], g2[0], g1[1], g2[1])
                        dp[kp] = dp.get(kp, 0.0) + wu
                        if t + 1 >= model.horizon:
                            continue
                        for ua in range(model.nua):
                            pa = float(da[ua])
                            if pa == 0.0:
                                continue
                            for o in range(model.nx0):
                                p0 = float(model.k0[t, traj.x0s[t], ua, o])
                                if p0 == 0.0:
                                    continue
                                for e2 in range(model.ne):
                                    pz2 = float(model.channel.e_kernel[t, traj.es[t], e2])
                                    if pz2 == 0.0:
                                        continue
                                    for n1 in range(model.nx1):
                                        p1 = float(model.k1[t, traj.x0s[t], traj.x1s[t], u1, n1])
                                        if p1 == 0.0:
                                            continue
                                        for n2 in range(model.nx2):
                                            p2 = float(model.k2[t, traj.x0s[t], traj.x2s[t], u2, n2])
                                            if p2 == 0.0:
                                                continue
                                            walk(
                                                t + 1,
                                                ct._replace(
                                                    uas=ct.uas + (ua,),
                                                    x0s=ct.x0s + (o,), x1s=ct.x1s + (n1,),
                                                    x2s=ct.x2s + (n2,), es=ct.es + (e2,),
                                                ),
                                                wu * pa * p0 * pz2 * p1 * p2,
                                            )

        for x0 in range(model.nx0):
            p0 = float(model.init_x0[x0])
            if p0 == 0.0:
                continue
            for e in range(model.ne):
                pz = float(model.channel.init_e[e])
                if pz == 0.0:
                    continue
                for x1 in range(model.nx1):
                    p1 = float(model.init_x1[x1])
                    if p1 == 0.0:
                        continue
                    for x2 in range(model.nx2):
                        p2 = float(model.init_x2[x2])
                        if p2 == 0.0:
                            continue
                        walk(0, initial_traj(x0, x1, x2, e), p0 * pz * p1 * p2)

        for (t, iota), hist in seen.items():
            mass = sum(hist.values())
            if mass <= 0.0:
                continue
            ref = artifacts.psi.get((t, iota))
            if ref is None:
                worst = max(worst, 1.0)
                continue
            keys = set(hist) | set(ref)
            for k in keys:
                worst = max(worst, abs(hist.get(k, 0.0) / mass - ref.get(k, 0.0)))
        for (t, iota), hist in seen_plus.items():
            mass = sum(hist.values())
            if mass <= 0.0:
                continue
            ref = artifacts.psi_plus.get((t, iota))
            if ref is None:
                worst = max(worst, 1.0)
                continue
            keys = set(hist) | set(ref)
            for k in keys:
                worst = max(worst, abs(hist.get(k, 0.0) / mass - ref.get(k, 0.0)))
    return worst


def materialize_history_strategy(model, team, cap=2_000_000) -> HistoryStrategy:
    """Tabulate a team strategy over every feasible information set (all
    adversary actions branched), so it can be serialized and replayed."""
    team_s = as_team_strategy(team, model)
    tables = {}
    counter = {"n": 0}

    def walk(t, traj):
        if t >= model.horizon:
            return
        counter["n"] += 1
        if counter["n"] > cap:
            raise SizeLimitExceeded(f"materialization exceeded {cap} expansions")
        d1, d2 = team_s.comm_dists(model, traj, t)
        tables[(COMM, 1, agent_info(model, traj, 1, t, COMM))] = tuple(map(float, d1))
        tables[(COMM, 2, agent_info(model, traj, 2, t, COMM))] = tuple(map(float, d2))
        for m1, m2, z, p in _comm_joint(model, team_s, traj, t):
            nt = traj._replace(
                m1s=traj.m1s + (m1,), m2s=traj.m2s + (m2,),
                zs=traj.zs + (z,), ys=traj.ys + ((),),
            )
            c1, c2 = team_s.ctrl_dists(model, nt, t)
            tables[(CTRL, 1, agent_info(model, nt, 1, t, CTRL))] = tuple(map(float, c1))
            tables[(CTRL, 2, agent_info(model, nt, 2, t, CTRL))] = tuple(map(float, c2))
            if t + 1 >= model.horizon:
                continue
            for u1 in range(model.nu1):
                if float(c1[u1]) == 0.0:
                    continue
                for u2 in range(model.nu2):
                    if float(c2[u2]) == 0.0:
                        continue
                    ct = nt._replace(u1s=nt.u1s + (u1,), u2s=nt.u2s + (u2,))
                    for ua in range(model.nua):
                        for o in range(model.nx0):
                            if float(model.k0[t, traj.x0s[t], ua, o]) == 0.0:
                                continue
                            for e2 in range(model.ne):
                                if float(model.channel.e_kernel[t, traj.es[t], e2]) == 0.0:
                                    continue
                                for n1 in range(model.nx1):
                                    if float(model.k1[t, traj.x0s[t], traj.x1s[t], u1, n1]) == 0.0:
                                        continue
                                    for n2 in range(model.nx2):
                                        if float(model.k2[t, traj.x0s[t], traj.x2s[t], u2, n2]) == 0.0:
                                            continue
                                        walk(
                                            t + 1,
                                            ct._replace(
                                                uas=ct.uas + (ua,),
                                                x0s=ct.x0s + (o,), x1s=ct.x1s + (n1,),
                                                x2s=ct.x2s + (n2,), es=ct.es + (e2,),
                                            ),
                                        )

    for x0 in range(model.nx0):
        if float(model.init_x0[x0]) == 0.0:
            continue
        for e in range(model.ne):
            if float(model.channel.init_e[e]) == 0.0:
                continue
            for x1 in range(model.nx1):
                if float(model.init_x1[x1]) == 0.0:
                    continue
                for x2 in range(model.nx2):
                    if float(model.init_x2[x2]) == 0.0:
                        continue
                    walk(0, initial_traj(x0, x1, x2, e))
    return HistoryStrategy("team", tables, model.scenario_hash)
