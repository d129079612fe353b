"""Sweep prescription-grid resolutions on a scenario and verify, per grid,
that the adversary's exact best response to the extracted policy matches the
DP root value (the solver's guarantee is exact for any candidate set).

Usage:  python3 scripts/solve_grid_sweep.py [scenario.json] [q1 q2 ...]
"""

import json
import pathlib
import sys
import time

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from teamcomm.model import validate_model
from teamcomm.solver import SolveConfig, extract_policy, solve
from teamcomm.strategy import adversary_best_response

DEFAULT = pathlib.Path(__file__).resolve().parents[1] / "scenarios" / "s1.json"


def main():
    path = sys.argv[1] if len(sys.argv) > 1 else str(DEFAULT)
    grids = [int(g) for g in sys.argv[2:]] or [1, 2, 4]
    model = validate_model(json.loads(pathlib.Path(path).read_text()))
    print(f"scenario={path} hash={model.scenario_hash[:12]}")
    prev = None
    for q in grids:
        cfg = SolveConfig(("grid", q), ("grid", q))
        t0 = time.time()
        tree = solve(model, cfg)
        policy = extract_policy(tree)
        br, _ = adversary_best_response(model, policy)
        wall = time.time() - t0
        drop = "" if prev is None else f" drop={prev - tree.root_value:+.3e}"
        print(
            f"q={q}: value={tree.root_value:.12f} nodes={tree.node_count} "
            f"|BR-root|={abs(br - tree.root_value):.2e} wall={wall:.2f}s{drop}"
        )
        prev = tree.root_value


if __name__ == "__main__":
    main()
