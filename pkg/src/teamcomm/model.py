"""Finite game instances: two cooperating agents with a costly, erasure-prone
communication channel, facing an adversary that drives the global state.

A scenario is a plain dict (usually loaded from JSON).  ``validate_model``
turns it into an immutable :class:`GameModel` holding numpy tables for the
solver plus, when every number in the scenario is rational, a parallel set of
exact ``Fraction`` tables used by the brute-force oracles.

Conventions:
  * All indices are 0-based internally; labels only exist at the JSON border.
  * Kernels and costs are stored per time step; scenarios may use the
    ``{"stationary": ...}`` shorthand, expanded at load time.
  * Probabilities may be JSON numbers or exact strings ``"p/q"``.
  * Row sums must be within 1e-12 of 1.  We refuse to renormalize: a bad row
    is an authoring bug, not noise.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Optional

import numpy as np

from .errors import ScenarioValidationError

INFO_STRUCTURES = ("maxinfo", "encrypted", "imperfect")

SUM_TOL = 1e-12


@dataclass(frozen=True)
class Violation:
    """One structured validation failure."""

    kind: str
    location: str
    detail: str = ""

    def __str__(self):
        s = f"{self.kind} at {self.location}"
        return f"{s} ({self.detail})" if self.detail else s


@dataclass(frozen=True)
class ConstraintSpec:
    """Communication constraints: minimum/maximum gap between successful
    exchanges and a total budget, tracked by the (s_a, s_b) counters."""

    s_min: int
    s_max: int
    n_max: int
    initial_clock: int = 0

    def as_dict(self):
        return {
            "s_min": self.s_min,
            "s_max": self.s_max,
            "n_max": self.n_max,
            "initial_clock": self.initial_clock,
        }


@dataclass(frozen=True)
class MarkovChannel:
    """Uncontrolled channel-state chain; a singleton state set recovers the
    static erasure channel."""

    e_labels: tuple
    init_e: np.ndarray        # [E]
    e_kernel: np.ndarray      # [T, E, E], row e -> distribution of next e

    @property
    def n(self):
        return len(self.e_labels)


class ExactTables:
    """Nested tuples of Fractions mirroring the float tables, present only
    when the scenario was written entirely with rational numbers."""

    __slots__ = (
        "init_x0", "init_x1", "init_x2", "k0", "k1", "k2",
        "cost", "rho", "pe", "ke", "init_e",
    )

    def __init__(self, **kw):
        for k in self.__slots__:
            setattr(self, k, kw[k])


@dataclass(frozen=True)
class GameModel:
    """A validated game instance.  Immutable; share freely across workers."""

    horizon: int
    x0_labels: tuple
    x1_labels: tuple
    x2_labels: tuple
    u1_labels: tuple
    u2_labels: tuple
    ua_labels: tuple
    init_x0: np.ndarray       # [X0]
    init_x1: np.ndarray       # [X1]
    init_x2: np.ndarray       # [X2]
    k0: np.ndarray            # [T, X0, UA, X0']
    k1: np.ndarray            # [T, X0, X1, U1, X1']
    k2: np.ndarray            # [T, X0, X2, U2, X2']
    cost: np.ndarray          # [T, X0, X1, X2, U1, U2, UA]
    rho: np.ndarray           # [X0, X1, X2]
    pe: np.ndarray            # [X0, E]
    channel: MarkovChannel
    info_structure: str
    constraints: Optional[ConstraintSpec]
    imperfect_obs: Optional[dict]
    exact: Optional[ExactTables]
    raw: dict = field(repr=False, default=None)

    @property
    def nx0(self):
        return len(self.x0_labels)

    @property
    def nx1(self):
        return len(self.x1_labels)

    @property
    def nx2(self):
        return len(self.x2_labels)

    @property
    def nu1(self):
        return len(self.u1_labels)

    @property
    def nu2(self):
        return len(self.u2_labels)

    @property
    def nua(self):
        return len(self.ua_labels)

    @property
    def ne(self):
        return self.channel.n

    @property
    def n_anchors(self):
        """Anchor values for encrypted mode: NONE plus every local-state pair."""
        return 1 + self.nx1 * self.nx2

    def anchor_pair(self, a):
        """Anchor index -> (x1, x2) pair, or None for the no-reveal anchor."""
        if a == 0:
            return None
        a -= 1
        return a // self.nx2, a % self.nx2

    def anchor_index(self, pair):
        if pair is None:
            return 0
        return 1 + pair[0] * self.nx2 + pair[1]

    def serialize(self) -> str:
        """Canonical JSON text; ``parse(serialize(m))`` round-trips bytes."""
        return canonical_json(self.raw)

    @cached_property
    def scenario_hash(self) -> str:
        return hashlib.sha256(self.serialize().encode()).hexdigest()


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=True)


def is_team_problem(model: GameModel) -> bool:
    """True when the adversary is vacuous (single action), which routes the
    instance to the adversary-free oracles."""
    return model.nua == 1


# ---------------------------------------------------------------------------
# parsing


def _parse_number(v, where, violations):
    """Return (float_value, Fraction_or_None)."""
    if isinstance(v, bool):
        violations.append(Violation("BadNumber", where, "boolean is not a number"))
        return 0.0, None
    if isinstance(v, int):
        return float(v), Fraction(v)
    if isinstance(v, float):
        if not math.isfinite(v):
            violations.append(Violation("NonFiniteCost", where, repr(v)))
            return 0.0, None
        return v, None
    if isinstance(v, str):
        try:
            fr = Fraction(v)
        except (ValueError, ZeroDivisionError):
            violations.append(Violation("BadNumber", where, repr(v)))
            return 0.0, None
        return float(fr), fr
    violations.append(Violation("BadNumber", where, type(v).__name__))
    return 0.0, None


class _TableReader:
    def __init__(self):
        self.violations = []
        self.all_exact = True

    def nested(self, data, dims, where):
        """Fill a float array of shape [size for _, size in dims].

        Returns (array, exact-nested-tuple-or-None).
        """
        arr = np.zeros([n for _, n in dims])
        exact = self._fill(data, dims, where, arr, ())
        return arr, exact

    def _fill(self, data, dims, where, arr, idx):
        if not dims:
            f, ex = _parse_number(data, where, self.violations)
            if ex is None:
                self.all_exact = False
            arr[idx] = f
            return ex
        name, size = dims[0]
        if not isinstance(data, (list, tuple)) or len(data) != size:
            got = len(data) if isinstance(data, (list, tuple)) else type(data).__name__
            self.violations.append(
                Violation("IndexOutOfRange", where, f"expected {size} entries for {name}, got {got}")
            )
            self.all_exact = False
            return None
        out = [
            self._fill(item, dims[1:], f"{where}[{name}={i}]", arr, idx + (i,))
            for i, item in enumerate(data)
        ]
        return tuple(out) if all(e is not None for e in out) else None

    def prob_row(self, data, size, where):
        arr, exact = self.nested(data, [("i", size)], where)
        if np.any(arr < 0):
            self.violations.append(Violation("NonStochasticKernel", where, "negative entry"))
        else:
            total = float(arr.sum())
            if abs(total - 1.0) > SUM_TOL:
                self.violations.append(Violation("NonStochasticKernel", where, f"row-sum {total!r}"))
        return arr, exact

    def prob_table(self, data, outer_dims, row_size, where):
        """Nested table whose innermost axis is a probability row."""
        arr = np.zeros([n for _, n in outer_dims] + [row_size])
        exact = self._fill_rows(data, outer_dims, row_size, where, arr, ())
        return arr, exact

    def _fill_rows(self, data, outer_dims, row_size, where, arr, idx):
        if not outer_dims:
            row, exact = self.prob_row(data, row_size, where)
            arr[idx] = row
            return exact
        name, size = outer_dims[0]
        if not isinstance(data, (list, tuple)) or len(data) != size:
            got = len(data) if isinstance(data, (list, tuple)) else type(data).__name__
            self.violations.append(
                Violation("IndexOutOfRange", where, f"expected {size} entries for {name}, got {got}")
            )
            self.all_exact = False
            return None
        out = [
            self._fill_rows(item, outer_dims[1:], row_size, f"{where}[{name}={i}]", arr, idx + (i,))
            for i, item in enumerate(data)
        ]
        return tuple(out) if all(e is not None for e in out) else None


def _per_time(container, key, horizon, violations):
    """Resolve the stationary/per_time shorthand to a list of T entries."""
    entry = container.get(key)
    if not isinstance(entry, dict) or not ({"stationary", "per_time"} & set(entry)):
        violations.append(
            Violation("BadTable", key, 'expected {"stationary": ...} or {"per_time": [...]}')
        )
        return None
    if "stationary" in entry:
        return [entry["stationary"]] * horizon
    per = entry["per_time"]
    if not isinstance(per, list) or len(per) != horizon:
        violations.append(Violation("IndexOutOfRange", f"{key}.per_time", f"expected {horizon} entries"))
        return None
    return per


def _space(container, key, violations):
    v = container.get(key)
    if not isinstance(v, list) or not v or not all(isinstance(s, str) for s in v):
        violations.append(Violation("BadSpace", key, "expected a non-empty list of labels"))
        return ("?",)
    if len(set(v)) != len(v):
        violations.append(Violation("BadSpace", key, "duplicate labels"))
    return tuple(v)


def _stack_exact(parts):
    return tuple(parts) if all(p is not None for p in parts) else None


def _normalize_erasure(v, nx0, ne):
    """Accept scalar, per-x0 list, or full [x0][e] table; emit [x0][e]."""
    if isinstance(v, (int, float, str)) and not isinstance(v, bool):
        return [[v] * ne for _ in range(nx0)]
    if isinstance(v, list) and v and not isinstance(v[0], list):
        return [[x] * ne for x in v]
    return v


# ---------------------------------------------------------------------------
# validation


def model_violations(raw: dict) -> list:
    """Validate a raw scenario dict; returns the (possibly empty) violation list."""
    try:
        _build(raw)
    except ScenarioValidationError as e:
        return e.violations
    return []


def validate_model(raw: dict) -> GameModel:
    """Validate and construct a GameModel; raises ScenarioValidationError
    listing every violation found."""
    return _build(raw)


def _build(raw: dict) -> GameModel:
    if not isinstance(raw, dict):
        raise ScenarioValidationError([Violation("BadScenario", "<root>", "not an object")])
    reader = _TableReader()
    violations = reader.violations

    horizon = raw.get("horizon")
    if not isinstance(horizon, int) or isinstance(horizon, bool) or horizon < 1:
        violations.append(Violation("BadHorizon", "horizon", repr(horizon)))
        horizon = 1

    x0_labels = _space(raw, "x0_space", violations)
    x1_labels = _space(raw, "x1_space", violations)
    x2_labels = _space(raw, "x2_space", violations)
    u1_labels = _space(raw, "u1_space", violations)
    u2_labels = _space(raw, "u2_space", violations)
    ua_labels = _space(raw, "ua_space", violations)
    nx0, nx1, nx2 = len(x0_labels), len(x1_labels), len(x2_labels)
    nu1, nu2, nua = len(u1_labels), len(u2_labels), len(ua_labels)

    info = raw.get("info_structure", "maxinfo")
    if info not in INFO_STRUCTURES:
        violations.append(Violation("BadInfoStructure", "info_structure", repr(info)))
        info = "maxinfo"

    init_x0, ex_i0 = reader.prob_row(raw.get("init_x0"), nx0, "init_x0")
    init_x1, ex_i1 = reader.prob_row(raw.get("init_x1"), nx1, "init_x1")
    init_x2, ex_i2 = reader.prob_row(raw.get("init_x2"), nx2, "init_x2")

    def time_kernel(key, outer_dims, row_size):
        entries = _per_time(raw, key, horizon, violations)
        if entries is None:
            return np.zeros([horizon] + [n for _, n in outer_dims] + [row_size]), None
        mats, exacts = [], []
        for t, entry in enumerate(entries):
            arr, ex = reader.prob_table(entry, outer_dims, row_size, f"{key}[t={t}]")
            mats.append(arr)
            exacts.append(ex)
        return np.stack(mats), _stack_exact(exacts)

    k0, ex_k0 = time_kernel("global_kernel", [("x0", nx0), ("ua", nua)], nx0)
    k1, ex_k1 = time_kernel("local_kernel_1", [("x0", nx0), ("x", nx1), ("u", nu1)], nx1)
    k2, ex_k2 = time_kernel("local_kernel_2", [("x0", nx0), ("x", nx2), ("u", nu2)], nx2)

    cost_dims = [("x0", nx0), ("x1", nx1), ("x2", nx2), ("u1", nu1), ("u2", nu2), ("ua", nua)]
    cost_entries = _per_time(raw, "stage_cost", horizon, violations)
    if cost_entries is None:
        cost, ex_cost = np.zeros([horizon] + [n for _, n in cost_dims]), None
    else:
        mats, exacts = [], []
        for t, entry in enumerate(cost_entries):
            arr, ex = reader.nested(entry, cost_dims, f"stage_cost[t={t}]")
            mats.append(arr)
            exacts.append(ex)
        cost = np.stack(mats)
        ex_cost = _stack_exact(exacts)

    rho, ex_rho = reader.nested(
        raw.get("comm_cost"), [("x0", nx0), ("x1", nx1), ("x2", nx2)], "comm_cost"
    )
    if np.any(rho < 0):
        bad = tuple(np.argwhere(rho < 0)[0])
        violations.append(
            Violation(
                "NegativeCommCost",
                f"comm_cost[x0={bad[0]}][x1={bad[1]}][x2={bad[2]}]",
                repr(float(rho[bad])),
            )
        )

    channel_raw = raw.get("channel")
    if channel_raw is None:
        e_labels = ("e0",)
        init_e = np.array([1.0])
        ex_init_e = (Fraction(1),)
        ke = np.ones((horizon, 1, 1))
        ex_ke = tuple((((Fraction(1),),),) * horizon)
    elif not isinstance(channel_raw, dict):
        violations.append(Violation("BadTable", "channel", "expected an object"))
        e_labels, init_e, ex_init_e = ("e0",), np.array([1.0]), None
        ke, ex_ke = np.ones((horizon, 1, 1)), None
    else:
        e_labels = _space(channel_raw, "e_space", violations)
        init_e, ex_init_e = reader.prob_row(channel_raw.get("init_e"), len(e_labels), "channel.init_e")
        entries = _per_time(channel_raw, "e_kernel", horizon, violations)
        if entries is None:
            ke, ex_ke = np.zeros((horizon, len(e_labels), len(e_labels))), None
        else:
            mats, exacts = [], []
            for t, entry in enumerate(entries):
                arr, ex = reader.prob_table(entry, [("e", len(e_labels))], len(e_labels), f"channel.e_kernel[t={t}]")
                mats.append(arr)
                exacts.append(ex)
            ke, ex_ke = np.stack(mats), _stack_exact(exacts)
    ne = len(e_labels)

    pe_raw = _normalize_erasure(raw.get("erasure_prob"), nx0, ne)
    pe, ex_pe = reader.nested(pe_raw, [("x0", nx0), ("e", ne)], "erasure_prob")
    if np.any(pe < 0) or np.any(pe > 1):
        bad = tuple(np.argwhere((pe < 0) | (pe > 1))[0])
        violations.append(
            Violation("BadErasureProb", f"erasure_prob[x0={bad[0]}][e={bad[1]}]", repr(float(pe[bad])))
        )

    constraints = None
    c = raw.get("constraints")
    if c is not None:
        ok = isinstance(c, dict) and all(
            isinstance(c.get(k, 0), int) and not isinstance(c.get(k, 0), bool)
            for k in ("s_min", "s_max", "n_max", "initial_clock")
        )
        if not ok:
            violations.append(Violation("BadConstraint", "constraints", "expected integer fields"))
        else:
            spec = ConstraintSpec(
                s_min=c.get("s_min", 0),
                s_max=c.get("s_max", 10**9),
                n_max=c.get("n_max", horizon),
                initial_clock=c.get("initial_clock", c.get("s_min", 0)),
            )
            if spec.s_min < 0 or spec.s_max < spec.s_min or spec.n_max < 0 or spec.initial_clock < 0:
                violations.append(Violation("BadConstraint", "constraints", str(spec.as_dict())))
            else:
                constraints = spec

    imperfect_obs = raw.get("imperfect_obs")
    if imperfect_obs is not None:
        if not isinstance(imperfect_obs, dict) or "y_space" not in imperfect_obs or "table" not in imperfect_obs:
            violations.append(Violation("BadObservationKernel", "imperfect_obs", "needs y_space and table"))
        else:
            y_labels = _space(imperfect_obs, "y_space", violations)
            dims = [("x0", nx0), ("m1", 2), ("m2", 2), ("succ", 2)]
            reader.prob_table(imperfect_obs["table"], dims, len(y_labels), "imperfect_obs.table")

    if not np.all(np.isfinite(cost)):
        violations.append(Violation("NonFiniteCost", "stage_cost"))
    if not np.all(np.isfinite(rho)):
        violations.append(Violation("NonFiniteCost", "comm_cost"))

    if violations:
        raise ScenarioValidationError(violations)

    exact = None
    if reader.all_exact:
        parts = dict(
            init_x0=ex_i0, init_x1=ex_i1, init_x2=ex_i2,
            k0=ex_k0, k1=ex_k1, k2=ex_k2, cost=ex_cost, rho=ex_rho,
            pe=ex_pe, ke=ex_ke, init_e=ex_init_e,
        )
        if all(v is not None for v in parts.values()):
            exact = ExactTables(**parts)

    normalized = dict(raw)
    normalized["erasure_prob"] = pe_raw
    normalized.setdefault("info_structure", "maxinfo")

    return GameModel(
        horizon=horizon,
        x0_labels=x0_labels, x1_labels=x1_labels, x2_labels=x2_labels,
        u1_labels=u1_labels, u2_labels=u2_labels, ua_labels=ua_labels,
        init_x0=init_x0, init_x1=init_x1, init_x2=init_x2,
        k0=k0, k1=k1, k2=k2, cost=cost, rho=rho, pe=pe,
        channel=MarkovChannel(e_labels, init_e, ke),
        info_structure=info,
        constraints=constraints,
        imperfect_obs=imperfect_obs,
        exact=exact,
        raw=normalized,
    )
