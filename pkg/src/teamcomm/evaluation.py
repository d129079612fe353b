"""Exact and Monte-Carlo evaluation of strategy profiles, plus the
structural property checkers (conditional independence of the two agents
given the team's common information, and anchor sufficiency of the team
belief under encrypted play).

All checkers enumerate trajectories exactly; nothing is sampled.  When the
scenario was written with rational numbers and the strategies hand exact
distributions over, the enumeration stays in Fractions and the asserted
identities hold with zero deviation.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .belief import COMM, CTRL
from .errors import SizeLimitExceeded
from .strategy import (
    _comm_joint,
    as_adversary_strategy,
    as_team_strategy,
    initial_traj,
    last_anchor,
    run_episode,
    team_common_info,
)

DEFAULT_ENUM_CAP = 5_000_000


@dataclass
class CheckReport:
    property_name: str
    max_deviation: float
    rows: list = field(default_factory=list)   # (location, deviation)

    def passed(self, tol):
        return self.max_deviation <= tol


def _tables(model):
    return model.exact if model.exact is not None else model


def _init_support(model):
    tab = _tables(model)
    for x0, p0 in enumerate(tab.init_x0):
        if p0 == 0:
            continue
        for e, pz in enumerate(tab.init_e if model.exact is not None else model.channel.init_e):
            if pz == 0:
                continue
            for x1, p1 in enumerate(tab.init_x1):
                if p1 == 0:
                    continue
                for x2, p2 in enumerate(tab.init_x2):
                    if p2 == 0:
                        continue
                    yield initial_traj(x0, x1, x2, e), p0 * pz * p1 * p2


def exact_cost(model, team, adversary, cap=DEFAULT_ENUM_CAP):
    """Probability-weighted sum of stage plus communication costs over every
    positive-probability trajectory; the communication charge applies to
    every attempt, delivered or erased."""
    team_s = as_team_strategy(team, model)
    adv_s = as_adversary_strategy(adversary)
    tab = _tables(model)
    counter = {"n": 0}
    total = [0]

    def walk(t, traj, w):
        if t >= model.horizon:
            return
        counter["n"] += 1
        if counter["n"] > cap:
            raise SizeLimitExceeded(f"exact_cost enumeration exceeded {cap} expansions")
        x0, x1, x2, e = traj.x0s[t], traj.x1s[t], traj.x2s[t], traj.es[t]
        rho = tab.rho[x0][x1][x2]
        for m1, m2, z, p in _comm_joint(model, team_s, traj, t):
            wz = w * p
            if max(m1, m2) == 1:
                total[0] = total[0] + wz * rho
            nt = traj._replace(
                m1s=traj.m1s + (m1,), m2s=traj.m2s + (m2,),
                zs=traj.zs + (z,), ys=traj.ys + ((),),
            )
            d1, d2 = team_s.ctrl_dists(model, nt, t)
            da = adv_s.action_dist(model, nt, t)
            for u1 in range(model.nu1):
                if d1[u1] == 0:
                    continue
                for u2 in range(model.nu2):
                    pu = d1[u1] * d2[u2]
                    if pu == 0:
                        continue
                    for ua in range(model.nua):
                        pa = da[ua]
                        if pa == 0:
                            continue
                        wu = wz * pu * pa
                        total[0] = total[0] + wu * tab.cost[t][x0][x1][x2][u1][u2][ua]
                        if t + 1 >= model.horizon:
                            continue
                        ct = nt._replace(
                            u1s=nt.u1s + (u1,), u2s=nt.u2s + (u2,), uas=nt.uas + (ua,)
                        )
                        for o in range(model.nx0):
                            p0 = tab.k0[t][x0][ua][o]
                            if p0 == 0:
                                continue
                            for e2 in range(model.ne):
                                pz2 = tab.ke[t][e][e2]
                                if pz2 == 0:
                                    continue
                                for n1 in range(model.nx1):
                                    p1 = tab.k1[t][x0][x1][u1][n1]
                                    if p1 == 0:
                                        continue
                                    for n2 in range(model.nx2):
                                        p2 = tab.k2[t][x0][x2][u2][n2]
                                        if p2 == 0:
                                            continue
                                        walk(
                                            t + 1,
                                            ct._replace(
                                                x0s=ct.x0s + (o,), x1s=ct.x1s + (n1,),
                                                x2s=ct.x2s + (n2,), es=ct.es + (e2,),
                                            ),
                                            wu * p0 * pz2 * p1 * p2,
                                        )

    for traj, w in _init_support(model):
        walk(0, traj, w)
    return total[0]


def monte_carlo_cost(model, team, adversary, episodes, seed, threads=1):
    """Seeded mean episode cost with its standard error; per-episode seeds
    derive from (seed, index), so thread count never changes any output."""
    adv_s = as_adversary_strategy(adversary)

    def one(i):
        return run_episode(model, team, adv_s, seed=[seed, i]).cost

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            costs = list(pool.map(one, range(episodes)))
    else:
        costs = [one(i) for i in range(episodes)]
    arr = np.asarray(costs)
    mean = float(arr.mean())
    se = float(arr.std(ddof=1) / np.sqrt(len(arr))) if len(arr) > 1 else 0.0
    return mean, se


# ---------------------------------------------------------------------------
# profile enumeration with stage hooks


def _walk_profile(model, team_s, adv_s, on_pre_comm, on_post_u, cap=DEFAULT_ENUM_CAP):
    """Enumerate every positive-probability trajectory, invoking
    ``on_pre_comm(t, traj, w)`` before the communication decisions of step t
    and ``on_post_u(t, traj, w)`` after the team's control actions (before
    the adversary's, which is common-information-measurable anyway)."""
    tab = _tables(model)
    counter = {"n": 0}

    def walk(t, traj, w):
        if t >= model.horizon:
            return
        counter["n"] += 1
        if counter["n"] > cap:
            raise SizeLimitExceeded(f"enumeration exceeded {cap} expansions")
        on_pre_comm(t, traj, w)
        x0, x1, x2, e = traj.x0s[t], traj.x1s[t], traj.x2s[t], traj.es[t]
        for m1, m2, z, p in _comm_joint(model, team_s, traj, t):
            wz = w * p
            nt = traj._replace(
                m1s=traj.m1s + (m1,), m2s=traj.m2s + (m2,),
                zs=traj.zs + (z,), ys=traj.ys + ((),),
            )
            d1, d2 = team_s.ctrl_dists(model, nt, t)
            da = adv_s.action_dist(model, nt, t)
            for u1 in range(model.nu1):
                if d1[u1] == 0:
                    continue
                for u2 in range(model.nu2):
                    pu = d1[u1] * d2[u2]
                    if pu == 0:
                        continue
                    ct = nt._replace(u1s=nt.u1s + (u1,), u2s=nt.u2s + (u2,))
                    wu = wz * pu
                    on_post_u(t, ct, wu)
                    if t + 1 >= model.horizon:
                        continue
                    for ua in range(model.nua):
                        pa = da[ua]
                        if pa == 0:
                            continue
                        at = ct._replace(uas=ct.uas + (ua,))
                        for o in range(model.nx0):
                            p0 = tab.k0[t][x0][ua][o]
                            if p0 == 0:
                                continue
                            for e2 in range(model.ne):
                                pz2 = tab.ke[t][e][e2]
                                if pz2 == 0:
                                    continue
                                for n1 in range(model.nx1):
                                    p1 = tab.k1[t][x0][x1][u1][n1]
                                    if p1 == 0:
                                        continue
                                    for n2 in range(model.nx2):
                                        p2 = tab.k2[t][x0][x2][u2][n2]
                                        if p2 == 0:
                                            continue
                                        walk(
                                            t + 1,
                                            at._replace(
                                                x0s=at.x0s + (o,), x1s=at.x1s + (n1,),
                                                x2s=at.x2s + (n2,), es=at.es + (e2,),
                                            ),
                                            wu * pa * p0 * pz2 * p1 * p2,
                                        )

    for traj, w in _init_support(model):
        walk(0, traj, w)


def _group_dev(groups, label):
    """Per group: max |joint - marginal1 x marginal2| over the full grid."""
    rows = []
    worst = 0.0
    for key, hist in groups.items():
        mass = sum(hist.values())
        if mass == 0:
            continue
        m1, m2 = {}, {}
        for (k1, k2), v in hist.items():
            m1[k1] = m1.get(k1, 0) + v
            m2[k2] = m2.get(k2, 0) + v
        dev = 0.0
        for k1, v1 in m1.items():
            for k2, v2 in m2.items():
                joint = hist.get((k1, k2), 0)
                dev = max(dev, abs(float(joint / mass - (v1 / mass) * (v2 / mass))))
        rows.append((f"{label}{key[0] + 1}" + ("+" if key[1] == CTRL else ""), dev))
        worst = max(worst, dev)
    return worst, rows


def check_conditional_independence(model, team, adversary, cap=DEFAULT_ENUM_CAP) -> CheckReport:
    """Exact version of the product-form property: given any realization of
    the team's common information, the two agents' state-action histories
    are independent, before and after communication."""
    team_s = as_team_strategy(team, model)
    adv_s = as_adversary_strategy(adversary)
    groups = {}

    def add(t, stage, traj, w, include_u_t):
        c, d = team_common_info(model, traj, t, stage)
        n_u = t + 1 if include_u_t else t
        k1 = (traj.x1s[: t + 1], traj.u1s[:n_u])
        k2 = (traj.x2s[: t + 1], traj.u2s[:n_u])
        g = groups.setdefault((t, stage, c, d), {})
        g[(k1, k2)] = g.get((k1, k2), 0) + w

    _walk_profile(
        model, team_s, adv_s,
        on_pre_comm=lambda t, traj, w: add(t, COMM, traj, w, False),
        on_post_u=lambda t, traj, w: add(t, CTRL, traj, w, True),
        cap=cap,
    )
    worst, rows = _group_dev(groups, "t=")
    return CheckReport("conditional-independence", worst, rows)


def check_belief_anchor(model, team, adversary=None, cap=DEFAULT_ENUM_CAP) -> CheckReport:
    """Anchor sufficiency under encrypted play: team histories sharing the
    last successfully exchanged pair and the adversary-visible common
    information induce the same team belief over (x0, x1, x2)."""
    from .strategy import UniformAdversary

    team_s = as_team_strategy(team, model)
    adv_s = as_adversary_strategy(adversary if adversary is not None else UniformAdversary())
    beliefs = {}

    def add(t, stage, traj, w):
        c, d = team_common_info(model, traj, t, stage)
        upto = t + 1 if stage == CTRL else t
        anchor = last_anchor(traj, upto)
        key = ((t, stage, anchor, c), d)
        g = beliefs.setdefault(key, {})
        s = (traj.x0s[t], traj.x1s[t], traj.x2s[t])
        g[s] = g.get(s, 0) + w

    _walk_profile(
        model, team_s, adv_s,
        on_pre_comm=lambda t, traj, w: add(t, COMM, traj, w),
        on_post_u=lambda t, traj, w: add(t, CTRL, traj, w),
        cap=cap,
    )

    supergroups = {}
    for (anchor_key, d), hist in beliefs.items():
        mass = sum(hist.values())
        if mass == 0:
            continue
        norm = {s: float(v / mass) for s, v in hist.items()}
        supergroups.setdefault(anchor_key, []).append(norm)
    worst = 0.0
    rows = []
    for (t, stage, anchor, c), members in supergroups.items():
        dev = 0.0
        ref = members[0]
        for other in members[1:]:
            keys = set(ref) | set(other)
            for s in keys:
                dev = max(dev, abs(ref.get(s, 0.0) - other.get(s, 0.0)))
        loc = f"t={t + 1}{'+' if stage == CTRL else ''},anchor={anchor},members={len(members)}"
        rows.append((loc, dev))
        worst = max(worst, dev)
    return CheckReport("belief-anchor", worst, rows)
