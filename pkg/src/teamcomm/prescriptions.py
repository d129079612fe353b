"""Candidate prescription sets for the coordinator's stage minimizations.

A prescription maps an agent's private state (its local state, plus the
anchor value in encrypted mode) to a distribution over that agent's stage
actions.  The stage minimization runs over a product of per-agent candidate
lists, mirroring the product structure of the prescription spaces; the pair
order is canonical (agent-1 table major, tables in row-major lexicographic
order, rows enumerated mass-on-earlier-actions first) so ties break the same
way on every platform.

The finite sets approximate the behavioral continuum; whatever set is used,
the extracted strategy's guarantee is exact (see solver).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .belief import COMM
from .errors import SizeLimitExceeded

DEFAULT_PAIR_CAP = 10**6


@dataclass(frozen=True)
class PrescriptionPair:
    """Per-agent action tables for one stage.

    maxinfo tables are [X_i, A_i]; encrypted tables are [anchors, X_i, A_i].
    Every row is a probability vector over the stage's actions.
    """

    kind: str                 # COMM or CTRL
    mode: str                 # "maxinfo" or "encrypted"
    table1: np.ndarray
    table2: np.ndarray

    def row(self, agent, private_state):
        table = self.table1 if agent == 1 else self.table2
        return table[private_state]

    def key(self):
        return (self.kind, self.mode, self.table1.tobytes(), self.table2.tobytes())


class CandidateSet:
    """Product of two per-agent candidate table lists, in canonical order."""

    def __init__(self, kind, mode, tables1, tables2, provenance):
        self.kind = kind
        self.mode = mode
        self.tables1 = np.asarray(tables1, dtype=float)
        self.tables2 = np.asarray(tables2, dtype=float)
        self.provenance = provenance
        if len(self.tables1) == 0 or len(self.tables2) == 0:
            raise ValueError("empty candidate list")

    @property
    def n1(self):
        return len(self.tables1)

    @property
    def n2(self):
        return len(self.tables2)

    def __len__(self):
        return self.n1 * self.n2

    def __getitem__(self, i) -> PrescriptionPair:
        p1, p2 = divmod(i, self.n2)
        return PrescriptionPair(self.kind, self.mode, self.tables1[p1], self.tables2[p2])

    def pairs(self) -> Iterator[PrescriptionPair]:
        for i in range(len(self)):
            yield self[i]

    def pair_index(self, p1, p2):
        return p1 * self.n2 + p2

    def contains(self, pair: PrescriptionPair, tol=0.0) -> bool:
        a = any(np.allclose(t, pair.table1, atol=tol, rtol=0.0) for t in self.tables1)
        b = any(np.allclose(t, pair.table2, atol=tol, rtol=0.0) for t in self.tables2)
        return a and b

    def describe(self):
        return {
            "kind": self.kind,
            "mode": self.mode,
            "provenance": self.provenance,
            "n1": int(self.n1),
            "n2": int(self.n2),
        }


def _domain_shape(model, mode, agent):
    nx = model.nx1 if agent == 1 else model.nx2
    if mode == "encrypted":
        return (model.n_anchors, nx)
    return (nx,)


def _n_actions(model, kind, agent):
    if kind == COMM:
        return 2
    return model.nu1 if agent == 1 else model.nu2


def _compositions(q, parts):
    """All nonnegative integer vectors summing to q, mass on earlier
    coordinates first; q=1 yields the one-hot rows in action order."""
    if parts == 1:
        return [(q,)]
    out = []
    for head in range(q, -1, -1):
        for tail in _compositions(q - head, parts - 1):
            out.append((head,) + tail)
    return out


def _agent_tables(rows, domain_size, n_actions, cap_each):
    n_tables = len(rows) ** domain_size
    if n_tables > cap_each:
        raise SizeLimitExceeded(
            f"{n_tables} tables for one agent exceeds the per-agent cap {cap_each}"
        )
    rows = np.asarray(rows, dtype=float)
    idx = np.indices([len(rows)] * domain_size).reshape(domain_size, -1).T
    return rows[idx]  # [n_tables, domain_size, n_actions]


def _build(model, mode, kind, rows_for, provenance, cap):
    tables = []
    for agent in (1, 2):
        shape = _domain_shape(model, mode, agent)
        domain = int(np.prod(shape))
        acts = _n_actions(model, kind, agent)
        flat = _agent_tables(rows_for(acts), domain, acts, cap)
        tables.append(flat.reshape((len(flat),) + shape + (acts,)))
    n_pairs = len(tables[0]) * len(tables[1])
    if n_pairs > cap:
        raise SizeLimitExceeded(f"{n_pairs} prescription pairs exceeds the cap {cap}")
    return CandidateSet(kind, mode, tables[0], tables[1], provenance)


def enumerate_deterministic(model, mode, kind, cap=DEFAULT_PAIR_CAP) -> CandidateSet:
    """Every pair of deterministic maps from private state to an action."""

    def rows_for(acts):
        return [tuple(1 if j == a else 0 for j in range(acts)) for a in range(acts)]

    return _build(model, mode, kind, rows_for, "deterministic-enumeration", cap)


def simplex_grid(model, mode, kind, q, cap=DEFAULT_PAIR_CAP) -> CandidateSet:
    """Rows range over all probability vectors with denominator q.

    q=1 reproduces enumerate_deterministic exactly; grids nest for q | q'.
    """
    if q < 1:
        raise ValueError("grid resolution must be >= 1")

    def rows_for(acts):
        return [tuple(c / q for c in comp) for comp in _compositions(q, acts)]

    return _build(model, mode, kind, rows_for, f"simplex-grid({q})", cap)


def explicit_candidates(kind, mode, tables1, tables2) -> CandidateSet:
    """Caller-supplied per-agent table lists (used for forced sets and for
    encrypted instances where full enumeration exceeds any sensible cap)."""
    return CandidateSet(kind, mode, tables1, tables2, "explicit")


def _constant_table(model, mode, agent, kind, value):
    shape = _domain_shape(model, mode, agent)
    acts = _n_actions(model, kind, agent)
    table = np.zeros(shape + (acts,))
    table[..., value] = 1.0
    return table


def forced_prescription(value, mode, model, kind=COMM) -> PrescriptionPair:
    """Both agents map every private state to the degenerate distribution
    on ``value`` (the constrained DP's forced communicate / stay-silent)."""
    return PrescriptionPair(
        kind,
        mode,
        _constant_table(model, mode, 1, kind, value),
        _constant_table(model, mode, 2, kind, value),
    )


def forced_set(value, mode, model, kind=COMM) -> CandidateSet:
    pair = forced_prescription(value, mode, model, kind)
    return CandidateSet(kind, mode, pair.table1[None], pair.table2[None], "explicit")
