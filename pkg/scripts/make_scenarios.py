"""Regenerate the committed scenario files in scenarios/.

Run from the repository root:  python3 scripts/make_scenarios.py
"""

import json
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from teamcomm.model import validate_model
from teamcomm.random_scenarios import random_scenario

OUT = pathlib.Path(__file__).resolve().parents[1] / "scenarios"

SEED_S1 = 20240501


def emit(name, raw):
    validate_model(raw)  # refuse to write a broken scenario
    path = OUT / f"{name}.json"
    path.write_text(json.dumps(raw, indent=1) + "\n")
    print(f"wrote {path}")


def main():
    OUT.mkdir(exist_ok=True)

    # Canonical desk-scale scenario: two binary agents, binary global state,
    # binary adversary, attempt cost 1, erasure probability 1/5, generic
    # rational costs.  Local transitions ignore the control action so the
    # reachable belief tree stays small under fine prescription grids.
    s1 = random_scenario(
        SEED_S1, horizon=2, pe="1/5", rho="1", local_action_dependent=False
    )
    s1["name"] = "s1"
    emit("s1", s1)

    enc = dict(s1)
    enc["name"] = "s1_encrypted"
    enc["info_structure"] = "encrypted"
    emit("s1_encrypted", enc)

    markov = dict(s1)
    markov["name"] = "s1_markov2"
    markov["channel"] = {
        "e_space": ["good", "bad"],
        "init_e": ["3/4", "1/4"],
        "e_kernel": {"stationary": [["5/8", "3/8"], ["1/8", "7/8"]]},
    }
    emit("s1_markov2", markov)

    # Adversary-free instance with control-dependent local dynamics, used by
    # the constrained-communication tests.
    team = random_scenario(
        SEED_S1 + 1, horizon=2, nua=1, pe="1/8", rho="1/2", local_action_dependent=True
    )
    team["name"] = "team_constrained"
    emit("team_constrained", team)

    # One-step fully generic instance for the single-stage min-max oracle.
    one = random_scenario(SEED_S1 + 2, horizon=1, pe="1/4", rho="3/4")
    one["name"] = "onestep"
    emit("onestep", one)


if __name__ == "__main__":
    main()
