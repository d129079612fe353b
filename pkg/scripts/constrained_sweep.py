"""Sweep communication constraints on the adversary-free scenario and print
how the guaranteed cost degrades as the allowed communication pattern
tightens (minimum gap, maximum gap, total budget).

Usage:  python3 scripts/constrained_sweep.py
"""

import json
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from teamcomm.model import ConstraintSpec, validate_model
from teamcomm.solver import SolveConfig, solve

SCENARIO = pathlib.Path(__file__).resolve().parents[1] / "scenarios" / "team_constrained.json"


def main():
    model = validate_model(json.loads(SCENARIO.read_text()))
    base = solve(model, SolveConfig(("det",), ("det",)))
    print(f"unconstrained value={base.root_value:.12f}")
    T = model.horizon
    for s_min, s_max, n_max in [
        (0, T, T), (0, 2, 1), (1, 2, 2), (1, 2, 1), (0, 1, T), (2, 2, T),
    ]:
        spec = ConstraintSpec(s_min=s_min, s_max=s_max, n_max=n_max, initial_clock=s_min)
        tree = solve(model, SolveConfig(("det",), ("det",), constraints=spec))
        print(
            f"s_min={s_min} s_max={s_max} N={n_max}: value={tree.root_value:.12f} "
            f"(+{tree.root_value - base.root_value:.6f}) nodes={tree.node_count}"
        )


if __name__ == "__main__":
    main()
