"""Min-max dynamic program over the reachable common-information-belief tree.

Backward recursion with terminal value zero: at each communication node the
coordinator minimizes expected communication cost plus continuation over a
finite candidate set of prescription pairs; at each control node it minimizes
the worst case over the adversary's pure actions (the belief update never
depends on the adversary's randomization, so a pure action attains the inner
maximum).  Nodes are memoized on canonicalized keys (beliefs rounded to 12
decimal digits for keying only); values are exact for whatever candidate set
is used, so the extracted strategy's guarantee can be checked against an
independent best-response computation.

Constraint augmentation tracks (s_a, s_b) = (time since last successful
exchange, number of successful exchanges) and gates the communication
candidate set; the Markov channel state rides along in the node key with an
expectation over its next value at every control stage.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .belief import COMM, CTRL, AnchoredBelief, BeliefNodeKey, FactorizedBelief
from .errors import (
    InadmissiblePrescription,
    NodeCapExceeded,
    UnreachableNodeQueried,
    UnsupportedInfoStructure,
)
from .model import ConstraintSpec, GameModel
from .prescriptions import (
    DEFAULT_PAIR_CAP,
    CandidateSet,
    PrescriptionPair,
    enumerate_deterministic,
    forced_set,
    simplex_grid,
)

DEFAULT_NODE_CAP = 500_000
KEY_DIGITS = 12


@dataclass
class SolveConfig:
    """Candidate-set specs are ("det",), ("grid", q), or a CandidateSet."""

    comm_candidates: object = ("det",)
    ctrl_candidates: object = ("det",)
    constraints: Optional[ConstraintSpec] = None
    pair_cap: int = DEFAULT_PAIR_CAP
    node_cap: Optional[int] = None
    tie_break: str = "first-in-canonical-order"

    def resolved_node_cap(self):
        if self.node_cap is not None:
            return self.node_cap
        env = os.environ.get("CIB_MAX_NODES")
        return int(env) if env else DEFAULT_NODE_CAP


@dataclass
class NodeRecord:
    """One solved node of the reachable tree (policy-reachable closure)."""

    key: tuple
    t: int
    stage: str
    x0: int
    e: int
    aug: Optional[tuple]
    belief: object            # FactorizedBelief or AnchoredBelief (floats)
    value: float
    prescription: PrescriptionPair
    worst_ua: Optional[list]  # CTRL nodes: all maximizing adversary actions
    children: list = field(default_factory=list)  # [(edge, prob, child_key)]


@dataclass
class SolveTree:
    """DP output: root value, per-(x0, e) roots, and the reachable tree."""

    scenario_hash: str
    mode: str
    horizon: int
    constraints: Optional[ConstraintSpec]
    comm_provenance: dict
    ctrl_provenance: dict
    root_value: float
    roots: list               # [(x0, e, prob, key)]
    nodes: dict               # key -> NodeRecord

    @property
    def node_count(self):
        return len(self.nodes)


def constraints_vacuous(spec: ConstraintSpec, horizon: int) -> bool:
    """True when no reachable counter value can ever trigger gating, in which
    case the augmentation is dropped so the solve matches the unconstrained
    one bit for bit."""
    return (
        spec.s_min == 0
        and spec.n_max >= horizon
        and spec.s_max >= spec.initial_clock + horizon
    )


def admissible_comm_set(aug, constraints: ConstraintSpec, base: CandidateSet, model, mode):
    """Gate the communication candidates by the constraint counters."""
    sa, sb = aug
    if sb >= constraints.n_max or sa < constraints.s_min:
        return forced_set(0, mode, model, COMM)
    if sa >= constraints.s_max:
        return forced_set(1, mode, model, COMM)
    return base


def _round_key(arr):
    return (np.round(arr, KEY_DIGITS) + 0.0).tobytes()


def _belief_key(belief):
    if isinstance(belief, FactorizedBelief):
        return (
            _round_key(np.asarray(belief.pi1, dtype=float)),
            _round_key(np.asarray(belief.pi2, dtype=float)),
        )
    return (
        _round_key(np.asarray(belief.mu, dtype=float)),
        _round_key(np.asarray(belief.cond1, dtype=float)),
        _round_key(np.asarray(belief.cond2, dtype=float)),
    )


def _as_float_belief(belief):
    if isinstance(belief, FactorizedBelief):
        return (
            np.asarray(belief.pi1, dtype=float),
            np.asarray(belief.pi2, dtype=float),
        )
    return (
        np.asarray(belief.mu, dtype=float),
        np.asarray(belief.cond1, dtype=float),
        np.asarray(belief.cond2, dtype=float),
    )


class DPSolver:
    """Solves one model under one config; reusable for stage-value queries."""

    def __init__(self, model: GameModel, config: SolveConfig = None):
        if model.info_structure == "imperfect":
            raise UnsupportedInfoStructure(
                "the solver supports maxinfo and encrypted structures only"
            )
        self.model = model
        self.config = config or SolveConfig()
        self.mode = model.info_structure
        self.comm_set = self._resolve(self.config.comm_candidates, COMM)
        self.ctrl_set = self._resolve(self.config.ctrl_candidates, CTRL)
        constraints = self.config.constraints or model.constraints
        if constraints is not None and constraints_vacuous(constraints, model.horizon):
            constraints = None
        self.constraints = constraints
        self.node_cap = self.config.resolved_node_cap()
        self._memo = {}
        self._dcache = {}
        self._uniform_filler1 = np.full(model.nx1, 1.0 / model.nx1)
        self._uniform_filler2 = np.full(model.nx2, 1.0 / model.nx2)

    # -- candidate plumbing -------------------------------------------------

    def _resolve(self, spec, kind):
        if isinstance(spec, CandidateSet):
            if spec.kind != kind or spec.mode != self.mode:
                raise ValueError(f"candidate set is {spec.kind}/{spec.mode}, need {kind}/{self.mode}")
            return spec
        if spec[0] == "det":
            return enumerate_deterministic(self.model, self.mode, kind, self.config.pair_cap)
        if spec[0] == "grid":
            return simplex_grid(self.model, self.mode, kind, spec[1], self.config.pair_cap)
        raise ValueError(f"unknown candidate spec {spec!r}")

    def _comm_candidates(self, aug):
        if self.constraints is None or aug is None:
            return self.comm_set
        return admissible_comm_set(aug, self.constraints, self.comm_set, self.model, self.mode)

    # -- keys ---------------------------------------------------------------

    def _key(self, t, stage, x0, e, aug, bkey):
        return (t, stage, x0, e, aug, bkey)

    def _enter(self, key):
        if len(self._memo) >= self.node_cap:
            raise NodeCapExceeded(f"node cap {self.node_cap} exceeded (CIB_MAX_NODES overrides)")
        self._memo[key] = None  # cycle guard; replaced on completion

    # -- public entry points --------------------------------------------------

    def solve(self) -> SolveTree:
        model = self.model
        aug0 = None
        if self.constraints is not None:
            aug0 = (self.constraints.initial_clock, 0)
        roots = []
        total = 0.0
        init_e = model.channel.init_e
        for x0 in range(model.nx0):
            px = float(model.init_x0[x0])
            if px == 0.0:
                continue
            for e in range(model.ne):
                pz = float(init_e[e])
                if pz == 0.0:
                    continue
                value, key = self._comm_node(0, x0, e, aug0, self._init_belief())
                roots.append((x0, e, px * pz, key))
                total += px * pz * value
        tree_nodes = self._materialize(roots)
        return SolveTree(
            scenario_hash=model.scenario_hash,
            mode=self.mode,
            horizon=model.horizon,
            constraints=self.constraints,
            comm_provenance=self.comm_set.describe(),
            ctrl_provenance=self.ctrl_set.describe(),
            root_value=total,
            roots=roots,
            nodes=tree_nodes,
        )

    def _init_belief(self):
        model = self.model
        pi1 = model.init_x1.astype(float)
        pi2 = model.init_x2.astype(float)
        if self.mode == "maxinfo":
            return (pi1, pi2)
        A = model.n_anchors
        mu = np.zeros(A)
        mu[0] = 1.0
        cond1 = np.zeros((A, model.nx1))
        cond2 = np.zeros((A, model.nx2))
        cond1[0] = pi1
        cond2[0] = pi2
        for a in range(1, A):
            xa, xb = model.anchor_pair(a)
            cond1[a, xa] = 1.0
            cond2[a, xb] = 1.0
        return (mu, cond1, cond2)

    def stage_comm_value(self, node: BeliefNodeKey, gamma: PrescriptionPair) -> float:
        """Cost-to-go of one communication prescription pair at a node."""
        cand = self._comm_candidates(node.aug)
        if cand is not self.comm_set:
            # Constraint gating is active: only the forced prescription is legal.
            forced = cand[0]
            if not (
                np.array_equal(forced.table1, gamma.table1)
                and np.array_equal(forced.table2, gamma.table2)
            ):
                raise InadmissiblePrescription(
                    f"constraints force a fixed communication prescription at aug={node.aug}"
                )
        single = CandidateSet(COMM, self.mode, gamma.table1[None], gamma.table2[None], "explicit")
        b = _as_float_belief(node.belief)
        w, _ = self._comm_values(node.t, node.x0, node.e, node.aug, b, single)
        return float(w[0, 0])

    def stage_ctrl_value(self, node: BeliefNodeKey, lam: PrescriptionPair):
        """(worst-case value, first maximizing adversary action) for one
        control prescription pair at a node."""
        single = CandidateSet(CTRL, self.mode, lam.table1[None], lam.table2[None], "explicit")
        b = _as_float_belief(node.belief)
        val = self._ctrl_values(node.t, node.x0, node.e, node.aug, b, single)
        worst = val[0, 0]
        ua = int(np.argmax(worst))
        return float(worst[ua]), ua

    # -- communication stage --------------------------------------------------

    def _comm_node(self, t, x0, e, aug, b):
        bkey = tuple(_round_key(a) for a in b)
        key = self._key(t, COMM, x0, e, aug, bkey)
        hit = self._memo.get(key)
        if hit is not None:
            return hit[0], key
        self._enter(key)
        cand = self._comm_candidates(aug)
        w, ctx = self._comm_values(t, x0, e, aug, b, cand)
        flat = int(np.argmin(w))
        c1, c2 = divmod(flat, cand.n2)
        value = float(w[c1, c2])
        children = self._comm_children(ctx, cand, c1, c2)
        belief = self._public_belief(b)
        record = NodeRecord(
            key=key, t=t, stage=COMM, x0=x0, e=e, aug=aug, belief=belief,
            value=value, prescription=cand[flat], worst_ua=None, children=children,
        )
        self._memo[key] = (value, record)
        return value, key

    def _comm_values(self, t, x0, e, aug, b, cand):
        if self.mode == "maxinfo":
            return self._comm_values_maxinfo(t, x0, e, aug, b, cand)
        return self._comm_values_encrypted(t, x0, e, aug, b, cand)

    def _aug_phi(self, aug):
        return None if aug is None else (aug[0] + 1, aug[1])

    def _aug_reveal(self, aug):
        return None if aug is None else (0, aug[1] + 1)

    def _comm_values_maxinfo(self, t, x0, e, aug, b, cand):
        model = self.model
        pi1, pi2 = b
        G1, G2 = cand.tables1, cand.tables2          # [n, X, 2]
        pe = float(model.pe[x0, e])
        rho = model.rho[x0]

        a1 = np.einsum("x,pxm->pm", pi1, G1)         # attempt-decision masses
        a2 = np.einsum("x,pxm->pm", pi2, G2)
        w1 = np.einsum("x,pxm->pmx", pi1, G1)
        w2 = np.einsum("x,pxm->pmx", pi2, G2)
        post1 = _safe_div(w1, a1[:, :, None])
        post2 = _safe_div(w2, a2[:, :, None])

        silent = np.einsum("px,qy,xy->pq", G1[:, :, 0] * pi1, G2[:, :, 0] * pi2, rho)
        w = np.einsum("x,y,xy->", pi1, pi2, rho) - silent

        aug_phi = self._aug_phi(aug)
        aug_rev = self._aug_reveal(aug)

        id1, U1 = _intern_rows(post1, a1 > 0)
        id2, U2 = _intern_rows(post2, a2 > 0)
        need_phi = np.zeros((len(U1), len(U2)), dtype=bool)
        for m1 in (0, 1):
            for m2 in (0, 1):
                if max(m1, m2) == 1 and pe == 0.0:
                    continue
                k1s = np.unique(id1[:, m1][id1[:, m1] >= 0])
                k2s = np.unique(id2[:, m2][id2[:, m2] >= 0])
                need_phi[np.ix_(k1s, k2s)] = True
        vphi, phi_keys = self._ctrl_batch(t, x0, e, aug_phi, U1, U2, need_phi)

        vrev = None
        rev_keys = {}
        any_attempt = bool(np.any(a1[:, 1] > 0) or np.any(a2[:, 1] > 0))
        if pe < 1.0 and any_attempt:
            eye1 = [np.eye(model.nx1)[i] for i in range(model.nx1)]
            eye2 = [np.eye(model.nx2)[i] for i in range(model.nx2)]
            need = np.ones((model.nx1, model.nx2), dtype=bool)
            vrev, rkeys = self._ctrl_batch(t, x0, e, aug_rev, eye1, eye2, need)
            rev_keys = {(xa, xb): rkeys[(xa, xb)] for (xa, xb) in rkeys}

        for m1 in (0, 1):
            for m2 in (0, 1):
                pm = a1[:, m1, None] * a2[None, :, m2]
                if not np.any(pm > 0):
                    continue
                phi_w = 1.0 if max(m1, m2) == 0 else pe
                if phi_w > 0.0:
                    g = _gather_pairs(vphi, id1[:, m1], id2[:, m2])
                    w = w + pm * phi_w * g
                if max(m1, m2) == 1 and pe < 1.0:
                    rv = np.einsum("px,qy,xy->pq", post1[:, m1, :], post2[:, m2, :], vrev)
                    w = w + pm * (1.0 - pe) * rv
        ctx = dict(
            kind="maxinfo", a1=a1, a2=a2, post1=post1, post2=post2, pe=pe,
            id1=id1, id2=id2, phi_keys=phi_keys, rev_keys=rev_keys,
        )
        return w, ctx

    def _comm_children(self, ctx, cand, c1, c2):
        children = []
        if ctx["kind"] == "maxinfo":
            a1, a2, pe = ctx["a1"], ctx["a2"], ctx["pe"]
            post1, post2 = ctx["post1"], ctx["post2"]
            for m1 in (0, 1):
                for m2 in (0, 1):
                    pm = float(a1[c1, m1] * a2[c2, m2])
                    if pm <= 0.0:
                        continue
                    phi_w = 1.0 if max(m1, m2) == 0 else pe
                    if phi_w > 0.0:
                        k = (ctx["id1"][c1, m1], ctx["id2"][c2, m2])
                        children.append((("phi", m1, m2), pm * phi_w, ctx["phi_keys"][k]))
                    if max(m1, m2) == 1 and pe < 1.0:
                        for (xa, xb), ck in ctx["rev_keys"].items():
                            p = pm * (1.0 - pe) * float(post1[c1, m1, xa] * post2[c2, m2, xb])
                            if p > 0.0:
                                children.append((("rev", m1, m2, xa, xb), p, ck))
        else:
            pm = ctx["pm"]
            pe = ctx["pe"]
            for m1 in (0, 1):
                for m2 in (0, 1):
                    p = float(pm[c1, c2, m1, m2])
                    if p <= 0.0:
                        continue
                    phi_w = 1.0 if max(m1, m2) == 0 else pe
                    if phi_w > 0.0:
                        children.append(
                            (("phi", m1, m2), p * phi_w, ctx["phi_keys"][(c1, c2, m1, m2)])
                        )
                    if max(m1, m2) == 1 and pe < 1.0:
                        children.append(
                            (("succ", m1, m2), p * (1.0 - pe), ctx["succ_keys"][(c1, c2, m1, m2)])
                        )
        return children

    def _comm_values_encrypted(self, t, x0, e, aug, b, cand):
        model = self.model
        mu, cond1, cond2 = b
        G1, G2 = cand.tables1, cand.tables2          # [n, A, X, 2]
        pe = float(model.pe[x0, e])
        rho = model.rho[x0]
        A = model.n_anchors

        a1 = np.einsum("ax,paxm->pam", cond1, G1)
        a2 = np.einsum("ax,paxm->pam", cond2, G2)
        pm = np.einsum("a,pam,qan->pqmn", mu, a1, a2)

        rho_all = np.einsum("a,ax,ay,xy->", mu, cond1, cond2, rho)
        silent = np.einsum("a,ax,ay,pax,qay,xy->pq", mu, cond1, cond2, G1[..., 0], G2[..., 0], rho)
        w = rho_all - silent

        # Failure posteriors, per agent: cond'[p, a, m, x].
        w1 = np.einsum("ax,paxm->pamx", cond1, G1)
        w2 = np.einsum("ax,paxm->pamx", cond2, G2)
        c1post = _safe_div(w1, a1[..., None])
        c2post = _safe_div(w2, a2[..., None])

        aug_phi = self._aug_phi(aug)
        aug_rev = self._aug_reveal(aug)
        phi_keys, succ_keys = {}, {}
        vphi = np.zeros(pm.shape)
        vsucc = np.zeros(pm.shape)

        deg1 = np.zeros((A, model.nx1))
        deg2 = np.zeros((A, model.nx2))
        deg1[0] = self._uniform_filler1
        deg2[0] = self._uniform_filler2
        for a in range(1, A):
            xa, xb = model.anchor_pair(a)
            deg1[a, xa] = 1.0
            deg2[a, xb] = 1.0

        if pe < 1.0:
            succ_joint = np.einsum("a,ax,paxm,ay,qayn->pqmnxy", mu, cond1, G1, cond2, G2)

        for p1 in range(cand.n1):
            for p2 in range(cand.n2):
                for m1 in (0, 1):
                    for m2 in (0, 1):
                        mass = pm[p1, p2, m1, m2]
                        if mass <= 0.0:
                            continue
                        phi_w = 1.0 if max(m1, m2) == 0 else pe
                        if phi_w > 0.0:
                            mu_w = mu * a1[p1, :, m1] * a2[p2, :, m2]
                            mu_new = mu_w / mu_w.sum()
                            nc1 = np.where(
                                mu_new[:, None] > 0, c1post[p1, :, m1, :], deg1
                            )
                            nc2 = np.where(
                                mu_new[:, None] > 0, c2post[p2, :, m2, :], deg2
                            )
                            v, ck = self._ctrl_node(t, x0, e, aug_phi, (mu_new, nc1, nc2))
                            vphi[p1, p2, m1, m2] = v
                            phi_keys[(p1, p2, m1, m2)] = ck
                        if max(m1, m2) == 1 and pe < 1.0:
                            j = succ_joint[p1, p2, m1, m2]
                            mu_new = np.zeros(A)
                            mu_new[1:] = j.reshape(-1)
                            mu_new /= mu_new.sum()
                            v, ck = self._ctrl_node(t, x0, e, aug_rev, (mu_new, deg1, deg2))
                            vsucc[p1, p2, m1, m2] = v
                            succ_keys[(p1, p2, m1, m2)] = ck

        for m1 in (0, 1):
            for m2 in (0, 1):
                phi_w = 1.0 if max(m1, m2) == 0 else pe
                if phi_w > 0.0:
                    w = w + pm[:, :, m1, m2] * phi_w * vphi[:, :, m1, m2]
                if max(m1, m2) == 1 and pe < 1.0:
                    w = w + pm[:, :, m1, m2] * (1.0 - pe) * vsucc[:, :, m1, m2]
        ctx = dict(kind="encrypted", pm=pm, pe=pe, phi_keys=phi_keys, succ_keys=succ_keys)
        return w, ctx

    # -- control stage ----------------------------------------------------------

    def _ctrl_D(self, t, x0):
        """Candidate-contracted stage cost, cached per (t, x0): the immediate
        cost of every prescription pair is then one tiny contraction with the
        belief, which keeps terminal layers cheap."""
        key = (t, x0)
        hit = self._dcache.get(key)
        if hit is None:
            L1, L2 = self.ctrl_set.tables1, self.ctrl_set.tables2
            c = self.model.cost[t, x0]
            if self.mode == "maxinfo":
                hit = np.einsum("pxu,qyv,xyuva->pqxya", L1, L2, c, optimize=True)
            else:
                hit = np.einsum("paxu,qayv,xyuvb->pqaxyb", L1, L2, c, optimize=True)
            self._dcache[key] = hit
        return hit

    def _ctrl_batch(self, t, x0, e, aug, U1, U2, need):
        """Solve a batch of control nodes sharing (t, x0, e, aug); beliefs
        are the per-agent product pairs U1[k1] x U2[k2] (maxinfo only).
        Returns (value matrix, key dict for needed entries)."""
        model = self.model
        K1, K2 = len(U1), len(U2)
        keys = {}
        vals = np.zeros((K1, K2))
        if t != model.horizon - 1 or self.mode != "maxinfo":
            for k1 in range(K1):
                for k2 in range(K2):
                    if need[k1, k2]:
                        v, ck = self._ctrl_node(t, x0, e, aug, (U1[k1], U2[k2]))
                        vals[k1, k2] = v
                        keys[(k1, k2)] = ck
            return vals, keys

        B1, B2 = np.stack(U1), np.stack(U2)
        D = self._ctrl_D(t, x0)
        val = np.einsum("kx,Ky,pqxya->kKpqa", B1, B2, D, optimize=True)
        worst = val.max(axis=-1)
        flat = worst.reshape(K1, K2, -1)
        cidx = flat.argmin(axis=-1)
        values = np.take_along_axis(flat, cidx[..., None], axis=-1)[..., 0]
        for k1 in range(K1):
            bk1 = _round_key(B1[k1])
            for k2 in range(K2):
                if not need[k1, k2]:
                    continue
                bkey = (bk1, _round_key(B2[k2]))
                key = self._key(t, CTRL, x0, e, aug, bkey)
                hit = self._memo.get(key)
                if hit is not None:
                    vals[k1, k2] = hit[0]
                    keys[(k1, k2)] = key
                    continue
                self._enter(key)
                value = float(values[k1, k2])
                qall = val[k1, k2, cidx[k1, k2] // self.ctrl_set.n2, cidx[k1, k2] % self.ctrl_set.n2]
                worst_ua = [int(a) for a in range(len(qall)) if qall[a] == qall.max()]
                record = NodeRecord(
                    key=key, t=t, stage=CTRL, x0=x0, e=e, aug=aug,
                    belief=self._public_belief((B1[k1], B2[k2])), value=value,
                    prescription=self.ctrl_set[int(cidx[k1, k2])],
                    worst_ua=worst_ua, children=[],
                )
                self._memo[key] = (value, record)
                vals[k1, k2] = value
                keys[(k1, k2)] = key
        return vals, keys

    def _ctrl_node(self, t, x0, e, aug, b):
        bkey = tuple(_round_key(a) for a in b)
        key = self._key(t, CTRL, x0, e, aug, bkey)
        hit = self._memo.get(key)
        if hit is not None:
            return hit[0], key
        self._enter(key)
        cand = self.ctrl_set
        val = self._ctrl_values(t, x0, e, aug, b, cand)
        worst = val.max(axis=2)
        flat = int(np.argmin(worst))
        c1, c2 = divmod(flat, cand.n2)
        value = float(worst[c1, c2])
        q = val[c1, c2]
        worst_ua = [int(a) for a in range(len(q)) if q[a] == q.max()]
        children = self._ctrl_children(t, x0, e, aug, b, cand, c1, c2)
        record = NodeRecord(
            key=key, t=t, stage=CTRL, x0=x0, e=e, aug=aug,
            belief=self._public_belief(b), value=value,
            prescription=cand[flat], worst_ua=worst_ua, children=children,
        )
        self._memo[key] = (value, record)
        return value, key

    def _ctrl_values(self, t, x0, e, aug, b, cand):
        model = self.model
        L1, L2 = cand.tables1, cand.tables2
        c = model.cost[t, x0]
        if self.mode == "maxinfo":
            pi1, pi2 = b
            if cand is self.ctrl_set:
                imm = np.einsum("x,y,pqxya->pqa", pi1, pi2, self._ctrl_D(t, x0))
            else:
                imm = np.einsum("x,y,pxu,qyv,xyuva->pqa", pi1, pi2, L1, L2, c)
        else:
            mu, cond1, cond2 = b
            if cand is self.ctrl_set:
                imm = np.einsum("a,ax,ay,pqaxyb->pqb", mu, cond1, cond2, self._ctrl_D(t, x0))
            else:
                imm = np.einsum("a,ax,ay,paxu,qayv,xyuvb->pqb", mu, cond1, cond2, L1, L2, c)
        if t == model.horizon - 1:
            return imm

        nexts = self._ctrl_push(t, x0, b, cand)
        k0row = model.k0[t, x0]                      # [UA, X0']
        kerow = model.channel.e_kernel[t, e]         # [E']
        cont = np.zeros(imm.shape)
        for o in range(model.nx0):
            if float(k0row[:, o].max()) == 0.0:
                continue
            for e2 in range(model.ne):
                if float(kerow[e2]) == 0.0:
                    continue
                vals = self._ctrl_child_values(t, x0, o, e2, aug, nexts)
                cont += vals[:, :, None] * (k0row[None, None, :, o] * kerow[e2])
        return imm + cont

    def _ctrl_push(self, t, x0, b, cand):
        model = self.model
        L1, L2 = cand.tables1, cand.tables2
        if self.mode == "maxinfo":
            pi1, pi2 = b
            n1 = np.einsum("x,pxu,xuy->py", pi1, L1, model.k1[t, x0])
            n2 = np.einsum("x,pxu,xuy->py", pi2, L2, model.k2[t, x0])
            n1 /= n1.sum(axis=1, keepdims=True)
            n2 /= n2.sum(axis=1, keepdims=True)
            return ("maxinfo", n1, n2)
        mu, cond1, cond2 = b
        n1 = np.einsum("ax,paxu,xuy->pay", cond1, L1, model.k1[t, x0])
        n2 = np.einsum("ax,paxu,xuy->pay", cond2, L2, model.k2[t, x0])
        n1 /= n1.sum(axis=2, keepdims=True)
        n2 /= n2.sum(axis=2, keepdims=True)
        return ("encrypted", mu, n1, n2)

    def _ctrl_child_values(self, t, x0, o, e2, aug, nexts):
        if nexts[0] == "maxinfo":
            _, n1, n2 = nexts
            id1, U1 = _intern_rows(n1[:, None, :], np.ones((len(n1), 1), dtype=bool))
            id2, U2 = _intern_rows(n2[:, None, :], np.ones((len(n2), 1), dtype=bool))
            sub = np.zeros((len(U1), len(U2)))
            for k1 in range(len(U1)):
                for k2 in range(len(U2)):
                    v, _ = self._comm_node(t + 1, o, e2, aug, (U1[k1], U2[k2]))
                    sub[k1, k2] = v
            return sub[id1[:, 0]][:, id2[:, 0]]
        _, mu, n1, n2 = nexts
        vals = np.zeros((len(n1), len(n2)))
        for q1 in range(len(n1)):
            for q2 in range(len(n2)):
                v, _ = self._comm_node(t + 1, o, e2, aug, (mu, n1[q1], n2[q2]))
                vals[q1, q2] = v
        return vals

    def _ctrl_children(self, t, x0, e, aug, b, cand, c1, c2):
        model = self.model
        if t == model.horizon - 1:
            return []
        single = CandidateSet(
            CTRL, self.mode, cand.tables1[c1][None], cand.tables2[c2][None], "explicit"
        )
        nexts = self._ctrl_push(t, x0, b, single)
        k0row = model.k0[t, x0]
        kerow = model.channel.e_kernel[t, e]
        children = []
        for o in range(model.nx0):
            reach = float(k0row[:, o].max())
            if reach == 0.0:
                continue
            for e2 in range(model.ne):
                if float(kerow[e2]) == 0.0:
                    continue
                if nexts[0] == "maxinfo":
                    child_b = (nexts[1][0], nexts[2][0])
                else:
                    child_b = (nexts[1], nexts[2][0], nexts[3][0])
                _, ck = self._comm_node(t + 1, o, e2, aug, child_b)
                children.append((("next", o, e2), float(kerow[e2]), ck))
        return children

    # -- tree materialization -----------------------------------------------

    def _public_belief(self, b):
        if self.mode == "maxinfo":
            return FactorizedBelief(tuple(map(float, b[0])), tuple(map(float, b[1])))
        mu, c1, c2 = b
        return AnchoredBelief(
            tuple(map(float, mu)),
            tuple(tuple(map(float, row)) for row in c1),
            tuple(tuple(map(float, row)) for row in c2),
        )

    def _materialize(self, roots):
        out = {}
        stack = [key for (_, _, _, key) in roots]
        while stack:
            key = stack.pop()
            if key in out:
                continue
            record = self._memo[key][1]
            out[key] = record
            for _, _, child in record.children:
                if child not in out:
                    stack.append(child)
        return out


def _safe_div(num, den):
    with np.errstate(invalid="ignore", divide="ignore"):
        out = num / den
    return np.where(den > 0, out, 0.0)


def _intern_rows(rows, mask):
    """rows: [n, m, X]; mask: [n, m] validity.  Returns (ids [n, m] with -1
    for invalid, unique row list)."""
    ids = np.full(rows.shape[:2], -1, dtype=int)
    seen = {}
    unique = []
    n, m = rows.shape[:2]
    for i in range(n):
        for j in range(m):
            if not mask[i, j]:
                continue
            k = rows[i, j].tobytes()
            idx = seen.get(k)
            if idx is None:
                idx = len(unique)
                seen[k] = idx
                unique.append(rows[i, j])
            ids[i, j] = idx
    return ids, unique


def _gather_pairs(vmat, id1, id2):
    """Value matrix lookup for id pairs; invalid ids contribute zero."""
    i = np.clip(id1, 0, None)
    j = np.clip(id2, 0, None)
    out = vmat[np.ix_(i, j)]
    out = np.where((id1[:, None] >= 0) & (id2[None, :] >= 0), out, 0.0)
    return out


def solve(model: GameModel, config: SolveConfig = None) -> SolveTree:
    """Build and solve the reachable belief tree; see DPSolver."""
    return DPSolver(model, config).solve()


def extract_policy(tree: SolveTree):
    """Queryable coordinator policy over the solved tree."""
    return CoordinatorPolicy(tree)


class CoordinatorPolicy:
    """The min-max team strategy in coordinator form: walk the tree along
    realized outcome classes, reading off prescriptions at each node."""

    def __init__(self, tree: SolveTree):
        self.tree = tree
        self._roots = {(x0, e): key for (x0, e, _, key) in tree.roots}

    @property
    def mode(self):
        return self.tree.mode

    @property
    def scenario_hash(self):
        return self.tree.scenario_hash

    def root_key(self, x0, e=0):
        try:
            return self._roots[(x0, e)]
        except KeyError:
            raise UnreachableNodeQueried(f"no root for (x0={x0}, e={e})")

    def node(self, key) -> NodeRecord:
        try:
            return self.tree.nodes[key]
        except KeyError:
            raise UnreachableNodeQueried(f"node {key!r} is not in the reachable tree")

    def prescriptions(self, key) -> PrescriptionPair:
        return self.node(key).prescription

    def child(self, key, edge):
        for ed, _, ck in self.node(key).children:
            if ed == edge:
                return ck
        raise UnreachableNodeQueried(f"no child for edge {edge!r} at {key!r}")

    def comm_edge(self, m1, m2, outcome_z):
        """Edge label for a realized communication outcome."""
        if self.mode == "maxinfo":
            if outcome_z is None:
                return ("phi", m1, m2)
            return ("rev", m1, m2, outcome_z[0], outcome_z[1])
        if outcome_z is None:
            return ("phi", m1, m2)
        return ("succ", m1, m2)
