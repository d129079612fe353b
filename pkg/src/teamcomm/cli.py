"""Batch front-end: solve, simulate, evaluate, reduce, and check subcommands.

Every artifact embeds the scenario content hash; cross-artifact commands
refuse mismatched inputs (exit 4).  All outputs are deterministic functions
of (inputs, flags, seed); the --threads flag parallelizes episode simulation
without changing a single output byte.

Exit codes: 0 ok, 1 check failed, 2 scenario validation error,
3 size/node cap exceeded, 4 artifact hash mismatch.

File formats (JSON, floats as shortest round-trip decimals):
  * scenario: see README (spaces, init vectors, kernels, costs, channel,
    constraints; probabilities as numbers or "p/q" strings).
  * solve tree: {"kind": "solve-tree", scenario_hash, mode, horizon,
    constraints, provenances, root_value, roots: [[x0, e, prob, node_id]],
    nodes: [{t, stage, x0, e, aug, belief, value, prescription, worst_ua,
    children: [[edge, prob, child_id]]}]}.  Communication edges carry the
    outcome-class probability under the chosen prescription; control edges
    carry the channel-state transition probability (the global-state part
    depends on the adversary's action).
  * history strategy: {"kind": "team"|"adversary", scenario_hash,
    tables: [[key, dist], ...]} with keys as nested lists (null = erased).
CSV schemas:
  * episodes.csv: episode,t,x0,x1,x2,m1,m2,zer,ua,u1,u2,stage_cost,comm_cost
  * checks.csv:   property,location,deviation
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time

import numpy as np

from .belief import AnchoredBelief, FactorizedBelief
from .errors import (
    NodeCapExceeded,
    PolicyModelMismatch,
    ScenarioValidationError,
    SizeLimitExceeded,
    TeamCommError,
)
from .evaluation import (
    check_belief_anchor,
    check_conditional_independence,
    exact_cost,
    monte_carlo_cost,
)
from .model import ConstraintSpec, validate_model
from .prescriptions import PrescriptionPair
from .solver import CoordinatorPolicy, NodeRecord, SolveConfig, SolveTree, solve
from .strategy import (
    BeliefTeamStrategy,
    HistoryAdversaryStrategy,
    HistoryStrategy,
    HistoryTeamStrategy,
    ReducedTeamStrategy,
    SeededRandomAdversary,
    SeededRandomTeamStrategy,
    UniformAdversary,
    adversary_best_response,
    max_cost_gap,
    psi_factorization_gap,
    reduce_strategy,
    run_episode,
)

EXIT_FAIL = 1
EXIT_VALIDATION = 2
EXIT_CAPS = 3
EXIT_HASH = 4

TOLERANCES = {"ci": 1e-12, "anchor": 1e-12, "saddle": 1e-9, "reduction": 1e-9}


# ---------------------------------------------------------------------------
# artifact (de)serialization


def _belief_to_json(b):
    if isinstance(b, FactorizedBelief):
        return {"pi1": list(b.pi1), "pi2": list(b.pi2)}
    return {
        "mu": list(b.mu),
        "cond1": [list(r) for r in b.cond1],
        "cond2": [list(r) for r in b.cond2],
    }


def _belief_from_json(d):
    if "pi1" in d:
        return FactorizedBelief(tuple(d["pi1"]), tuple(d["pi2"]))
    return AnchoredBelief(
        tuple(d["mu"]),
        tuple(tuple(r) for r in d["cond1"]),
        tuple(tuple(r) for r in d["cond2"]),
    )


def tree_to_json(tree: SolveTree) -> dict:
    order = sorted(tree.nodes)
    ids = {key: i for i, key in enumerate(order)}
    nodes = []
    for key in order:
        n = tree.nodes[key]
        nodes.append(
            {
                "t": n.t,
                "stage": n.stage,
                "x0": n.x0,
                "e": n.e,
                "aug": list(n.aug) if n.aug is not None else None,
                "belief": _belief_to_json(n.belief),
                "value": n.value,
                "prescription": {
                    "kind": n.prescription.kind,
                    "mode": n.prescription.mode,
                    "table1": n.prescription.table1.tolist(),
                    "table2": n.prescription.table2.tolist(),
                },
                "worst_ua": n.worst_ua,
                "children": [[list(edge), prob, ids[ck]] for edge, prob, ck in n.children],
            }
        )
    return {
        "kind": "solve-tree",
        "scenario_hash": tree.scenario_hash,
        "mode": tree.mode,
        "horizon": tree.horizon,
        "constraints": tree.constraints.as_dict() if tree.constraints else None,
        "comm_provenance": tree.comm_provenance,
        "ctrl_provenance": tree.ctrl_provenance,
        "root_value": tree.root_value,
        "roots": [[x0, e, prob, ids[key]] for x0, e, prob, key in tree.roots],
        "nodes": nodes,
    }


def _rebuild_key(n, belief):
    from .solver import _belief_key

    aug = tuple(n["aug"]) if n["aug"] is not None else None
    return (n["t"], n["stage"], n["x0"], n["e"], aug, _belief_key(belief))


def tree_from_json(data: dict) -> SolveTree:
    if data.get("kind") != "solve-tree":
        raise TeamCommError("not a solve-tree file")
    keys = []
    records = {}
    for n in data["nodes"]:
        belief = _belief_from_json(n["belief"])
        keys.append(_rebuild_key(n, belief))
    for n, key in zip(data["nodes"], keys):
        belief = _belief_from_json(n["belief"])
        p = n["prescription"]
        record = NodeRecord(
            key=key,
            t=n["t"],
            stage=n["stage"],
            x0=n["x0"],
            e=n["e"],
            aug=tuple(n["aug"]) if n["aug"] is not None else None,
            belief=belief,
            value=n["value"],
            prescription=PrescriptionPair(
                p["kind"], p["mode"], np.asarray(p["table1"]), np.asarray(p["table2"])
            ),
            worst_ua=n["worst_ua"],
            children=[
                (tuple(edge), prob, keys[cid]) for edge, prob, cid in n["children"]
            ],
        )
        records[key] = record
    constraints = None
    if data["constraints"]:
        constraints = ConstraintSpec(**data["constraints"])
    return SolveTree(
        scenario_hash=data["scenario_hash"],
        mode=data["mode"],
        horizon=data["horizon"],
        constraints=constraints,
        comm_provenance=data["comm_provenance"],
        ctrl_provenance=data["ctrl_provenance"],
        root_value=data["root_value"],
        roots=[(x0, e, prob, keys[nid]) for x0, e, prob, nid in data["roots"]],
        nodes=records,
    )


def _key_to_json(obj):
    if obj is None or isinstance(obj, (int, float, str)):
        return obj
    return [_key_to_json(v) for v in obj]


def _key_from_json(obj):
    if obj is None or isinstance(obj, (int, float, str)):
        return obj
    return tuple(_key_from_json(v) for v in obj)


def strategy_to_json(strategy: HistoryStrategy) -> dict:
    rows = sorted(
        ((_key_to_json(k), list(map(float, v))) for k, v in strategy.tables.items()),
        key=lambda kv: json.dumps(kv[0]),
    )
    return {
        "kind": strategy.kind,
        "scenario_hash": strategy.scenario_hash,
        "tables": [[k, v] for k, v in rows],
    }


def strategy_from_json(data: dict) -> HistoryStrategy:
    if data.get("kind") not in ("team", "adversary"):
        raise TeamCommError("not a history-strategy file")
    tables = {_key_from_json(k): tuple(v) for k, v in data["tables"]}
    return HistoryStrategy(data["kind"], tables, data.get("scenario_hash"))


def reduction_to_json(model, artifacts) -> dict:
    def dump_dist_map(d):
        return [
            [_key_to_json(k), [[_key_to_json(h), p] for h, p in sorted(v.items(), key=repr)]]
            for k, v in sorted(d.items(), key=repr)
        ]

    def dump_rows(d):
        return [
            [_key_to_json(k), [list(map(float, row)) for row in rows]]
            for k, rows in sorted(d.items(), key=repr)
        ]

    return {
        "kind": "reduction-artifacts",
        "scenario_hash": artifacts.scenario_hash,
        "horizon": artifacts.horizon,
        "psi": dump_dist_map(artifacts.psi),
        "psi_plus": dump_dist_map(artifacts.psi_plus),
        "phi": dump_dist_map(artifacts.phi),
        "phi_plus": dump_dist_map(artifacts.phi_plus),
        "fbar": dump_rows(artifacts.fbar),
        "gbar": dump_rows(artifacts.gbar),
    }


# ---------------------------------------------------------------------------
# shared option handling


def _load_scenario(args):
    with open(args.scenario) as fh:
        raw = json.load(fh)
    if getattr(args, "mode", None):
        raw = dict(raw)
        raw["info_structure"] = args.mode
    return validate_model(raw)


def _parse_constraints(text):
    """SMIN:SMAX:N[:CLOCK]; the solver-side spec, not part of the scenario."""
    if not text:
        return None
    parts = [int(v) for v in text.split(":")]
    if len(parts) not in (3, 4):
        raise TeamCommError("constraints must be SMIN:SMAX:N[:CLOCK]")
    return ConstraintSpec(
        s_min=parts[0],
        s_max=parts[1],
        n_max=parts[2],
        initial_clock=parts[3] if len(parts) == 4 else parts[0],
    )


def _load_tree(path, model):
    with open(path) as fh:
        tree = tree_from_json(json.load(fh))
    if tree.scenario_hash != model.scenario_hash:
        raise PolicyModelMismatch(
            f"tree was solved for scenario {tree.scenario_hash[:12]}..., "
            f"got {model.scenario_hash[:12]}..."
        )
    return tree


def _resolve_adversary(args, model, team=None):
    name = getattr(args, "adversary", "uniform") or "uniform"
    if name == "uniform":
        return UniformAdversary()
    if name == "best-response":
        if team is None:
            raise TeamCommError("best-response adversary needs a team strategy to respond to")
        _, strat = adversary_best_response(model, team)
        return HistoryAdversaryStrategy(strat)
    if name.startswith("fixed:"):
        with open(name[6:]) as fh:
            strat = strategy_from_json(json.load(fh))
        if strat.scenario_hash and strat.scenario_hash != model.scenario_hash:
            raise PolicyModelMismatch("fixed adversary strategy hash mismatch")
        return HistoryAdversaryStrategy(strat, uniform_fallback=True)
    raise TeamCommError(f"unknown adversary spec {name!r}")


def _candidate_spec(grid, deterministic_only):
    if deterministic_only or grid is None:
        return ("det",)
    return ("grid", grid)


def _write_checks_csv(path, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["property", "location", "deviation"])
        for prop, loc, dev in rows:
            w.writerow([prop, loc, repr(float(dev))])


# ---------------------------------------------------------------------------
# subcommands


def cmd_solve(args):
    model = _load_scenario(args)
    config = SolveConfig(
        comm_candidates=_candidate_spec(args.comm_grid, args.deterministic_only),
        ctrl_candidates=_candidate_spec(args.ctrl_grid, args.deterministic_only),
        constraints=_parse_constraints(args.constraints),
    )
    t0 = time.time()
    tree = solve(model, config)
    wall = time.time() - t0
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(tree_to_json(tree), fh)
    print(
        f"value={tree.root_value!r} nodes={tree.node_count} "
        f"comm={tree.comm_provenance['provenance']} ctrl={tree.ctrl_provenance['provenance']} "
        f"wall={wall:.3f}s" + (f" out={args.out}" if args.out else "")
    )
    return 0


def cmd_simulate(args):
    model = _load_scenario(args)
    tree = _load_tree(args.tree, model)
    policy = CoordinatorPolicy(tree)
    adversary = _resolve_adversary(args, model, policy)
    episodes = args.episodes

    def one(i):
        return run_episode(model, policy, adversary, seed=[args.seed, i])

    if args.threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            results = list(pool.map(one, range(episodes)))
    else:
        results = [one(i) for i in range(episodes)]

    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(
            ["episode", "t", "x0", "x1", "x2", "m1", "m2", "zer", "ua", "u1", "u2",
             "stage_cost", "comm_cost"]
        )
        for i, r in enumerate(results):
            for row in r.rows:
                w.writerow(
                    [i, row["t"], row["x0"], row["x1"], row["x2"], row["m1"], row["m2"],
                     row["zer"], row["ua"], row["u1"], row["u2"],
                     repr(row["stage_cost"]), repr(row["comm_cost"])]
                )
    costs = np.array([r.cost for r in results])
    se = float(costs.std(ddof=1) / np.sqrt(len(costs))) if len(costs) > 1 else 0.0
    print(f"episodes={episodes} mean={float(costs.mean())!r} se={se!r} out={args.out}")
    return 0


def cmd_evaluate(args):
    model = _load_scenario(args)
    rows = []
    if args.tree:
        tree = _load_tree(args.tree, model)
        policy = CoordinatorPolicy(tree)
        team = policy
        rows.append(("root_value", tree.root_value))
    else:
        with open(args.strategy) as fh:
            strat = strategy_from_json(json.load(fh))
        if strat.scenario_hash and strat.scenario_hash != model.scenario_hash:
            raise PolicyModelMismatch("strategy hash mismatch")
        team = HistoryTeamStrategy(strat, uniform_fallback=True)
    adversary = _resolve_adversary(args, model, team)
    j = exact_cost(model, team, adversary)
    rows.append((f"exact_cost[{args.adversary}]", j))
    if args.episodes:
        mean, se = monte_carlo_cost(model, team, adversary, args.episodes, args.seed, args.threads)
        rows.append(("mc_mean", mean))
        rows.append(("mc_se", se))
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["metric", "value"])
        for k, v in rows:
            w.writerow([k, repr(float(v))])
    for k, v in rows:
        print(f"{k}={v!r}")
    return 0


def cmd_reduce(args):
    model = _load_scenario(args)
    if args.strategy:
        with open(args.strategy) as fh:
            strat = strategy_from_json(json.load(fh))
        if strat.scenario_hash and strat.scenario_hash != model.scenario_hash:
            raise PolicyModelMismatch("strategy hash mismatch")
        team = HistoryTeamStrategy(strat, uniform_fallback=True)
    else:
        team = SeededRandomTeamStrategy(args.seed)
    artifacts = reduce_strategy(model, team)
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(reduction_to_json(model, artifacts), fh)
    status = 0
    if args.check:
        import itertools

        reduced = ReducedTeamStrategy(artifacts)
        gap = max_cost_gap(model, team, reduced)
        fact = psi_factorization_gap(model, artifacts)
        rows = []
        from .strategy import OpenLoopAdversary

        for seq in itertools.product(range(model.nua), repeat=model.horizon):
            a = OpenLoopAdversary(seq)
            jf = exact_cost(model, team, a)
            jr = exact_cost(model, reduced, a)
            rows.append((f"openloop{list(seq)}", abs(jf - jr)))
        rows.append(("max_gap_all_strategies", gap))
        rows.append(("psi_factorization", fact))
        _write_checks_csv(args.report, [("reduction", loc, dev) for loc, dev in rows])
        ok = gap <= TOLERANCES["reduction"] and fact <= 1e-12
        print(
            f"max|dJ|={gap:.3e} psi_factorization={fact:.3e} "
            f"{'PASS' if ok else 'FAIL'}"
        )
        status = 0 if ok else EXIT_FAIL
    if args.out:
        print(f"artifacts={args.out}")
    return status


def cmd_check(args):
    model = _load_scenario(args)
    tol = TOLERANCES[args.property]
    rows = []
    if args.property == "saddle":
        tree = _load_tree(args.tree, model)
        policy = CoordinatorPolicy(tree)
        br, _ = adversary_best_response(model, policy)
        dev = abs(br - tree.root_value)
        rows.append(("saddle", "root", dev))
    elif args.property == "ci":
        dev = 0.0
        for k in range(args.pairs):
            team = SeededRandomTeamStrategy((args.seed, 2 * k))
            adv = SeededRandomAdversary((args.seed, 2 * k + 1))
            rep = check_conditional_independence(model, team, adv)
            rows.extend(("ci", f"pair{k}:{loc}", d) for loc, d in rep.rows)
            dev = max(dev, rep.max_deviation)
    elif args.property == "anchor":
        if model.info_structure != "encrypted":
            raise TeamCommError("anchor check needs an encrypted-mode scenario")
        team = BeliefTeamStrategy(model, seed=args.seed)
        rep = check_belief_anchor(model, team, SeededRandomAdversary((args.seed, 1)))
        rows.extend(("anchor", loc, d) for loc, d in rep.rows)
        dev = rep.max_deviation
    elif args.property == "reduction":
        team = SeededRandomTeamStrategy(args.seed)
        artifacts = reduce_strategy(model, team)
        reduced = ReducedTeamStrategy(artifacts)
        gap = max_cost_gap(model, team, reduced)
        fact = psi_factorization_gap(model, artifacts)
        rows.append(("reduction", "max_gap_all_strategies", gap))
        rows.append(("reduction", "psi_factorization", fact))
        dev = max(gap, fact if fact > 1e-12 else 0.0)
    else:
        raise TeamCommError(f"unknown property {args.property!r}")
    if args.out:
        _write_checks_csv(args.out, rows)
    ok = dev <= tol
    print(f"property={args.property} deviation={dev:.3e} tol={tol:g} {'PASS' if ok else 'FAIL'}")
    return 0 if ok else EXIT_FAIL


# ---------------------------------------------------------------------------
# argument parsing


def build_parser():
    p = argparse.ArgumentParser(
        prog="teamcomm",
        description="Min-max communication/control games against an adversary",
    )
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, tree=False):
        sp.add_argument("--scenario", required=True)
        sp.add_argument("--mode", choices=["maxinfo", "encrypted"], default=None)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--threads", type=int, default=1)
        if tree:
            sp.add_argument("--tree", required=False)

    sp = sub.add_parser("solve", help="solve the min-max DP and write the tree")
    common(sp)
    sp.add_argument("--comm-grid", type=int, default=None)
    sp.add_argument("--ctrl-grid", type=int, default=None)
    sp.add_argument("--deterministic-only", action="store_true")
    sp.add_argument("--constraints", default=None, metavar="SMIN:SMAX:N[:CLOCK]")
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("simulate", help="seeded episodes against an adversary")
    common(sp, tree=True)
    sp.add_argument("--episodes", type=int, default=1000)
    sp.add_argument("--adversary", default="uniform")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("evaluate", help="exact (and Monte-Carlo) cost of a strategy")
    common(sp, tree=True)
    sp.add_argument("--strategy", default=None)
    sp.add_argument("--adversary", default="uniform")
    sp.add_argument("--episodes", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("reduce", help="private-information reduction of a strategy")
    common(sp)
    sp.add_argument("--strategy", default=None)
    sp.add_argument("--check", action="store_true")
    sp.add_argument("--out", default=None)
    sp.add_argument("--report", default="reduction_checks.csv")
    sp.set_defaults(func=cmd_reduce)

    sp = sub.add_parser("check", help="structural property checks with PASS/FAIL")
    common(sp, tree=True)
    sp.add_argument("--property", required=True, choices=["ci", "anchor", "saddle", "reduction"])
    sp.add_argument("--pairs", type=int, default=3)
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_check)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ScenarioValidationError as e:
        first = e.violations[0] if e.violations else "invalid scenario"
        print(f"validation error: {first}", file=sys.stderr)
        return EXIT_VALIDATION
    except (SizeLimitExceeded, NodeCapExceeded) as e:
        print(f"cap exceeded: {e}", file=sys.stderr)
        return EXIT_CAPS
    except PolicyModelMismatch as e:
        print(f"hash mismatch: {e}", file=sys.stderr)
        return EXIT_HASH
    except TeamCommError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
