import json
import pathlib

import pytest

from teamcomm.model import validate_model

SCENARIOS = pathlib.Path(__file__).resolve().parents[1] / "scenarios"


def load_raw(name):
    return json.loads((SCENARIOS / f"{name}.json").read_text())


def load_model(name, **overrides):
    raw = load_raw(name)
    raw.update(overrides)
    return validate_model(raw)


@pytest.fixture(scope="session")
def s1():
    return load_model("s1")


@pytest.fixture(scope="session")
def s1_encrypted():
    return load_model("s1_encrypted")


@pytest.fixture(scope="session")
def s1_markov2():
    return load_model("s1_markov2")


@pytest.fixture(scope="session")
def onestep():
    return load_model("onestep")


@pytest.fixture(scope="session")
def team_constrained():
    return load_model("team_constrained")


def tiny_scenario(**overrides):
    """Minimal hand-written scenario: everything binary, uniform-ish."""
    raw = {
        "horizon": 2,
        "x0_space": ["g0", "g1"],
        "x1_space": ["a0", "a1"],
        "x2_space": ["b0", "b1"],
        "u1_space": ["u0", "u1"],
        "u2_space": ["v0", "v1"],
        "ua_space": ["w0", "w1"],
        "init_x0": ["1/2", "1/2"],
        "init_x1": ["1/2", "1/2"],
        "init_x2": ["1/2", "1/2"],
        "global_kernel": {
            "stationary": [
                [["3/4", "1/4"], ["1/4", "3/4"]],
                [["1/2", "1/2"], ["5/8", "3/8"]],
            ]
        },
        "local_kernel_1": {
            "stationary": [
                [[["7/8", "1/8"], ["1/8", "7/8"]], [["1/4", "3/4"], ["3/4", "1/4"]]],
                [[["5/8", "3/8"], ["3/8", "5/8"]], [["1/2", "1/2"], ["1/8", "7/8"]]],
            ]
        },
        "local_kernel_2": {
            "stationary": [
                [[["3/4", "1/4"], ["1/2", "1/2"]], [["1/8", "7/8"], ["7/8", "1/8"]]],
                [[["1/4", "3/4"], ["5/8", "3/8"]], [["3/8", "5/8"], ["3/4", "1/4"]]],
            ]
        },
        "stage_cost": {
            "stationary": [
                [
                    [[[["0", "1"], ["1/2", "3/2"]], [["1", "0"], ["2", "1/4"]]],
                     [[["1/4", "5/4"], ["3/4", "1"]], [["0", "2"], ["1", "1/2"]]]],
                    [[[["1", "1/4"], ["0", "3/4"]], [["1/2", "1"], ["5/4", "0"]]],
                     [[["3/2", "1/2"], ["1", "2"]], [["1/4", "1"], ["0", "1"]]]],
                ],
                [
                    [[[["1/2", "0"], ["1", "1/4"]], [["3/4", "3/2"], ["0", "1"]]],
                     [[["2", "1"], ["1/4", "0"]], [["1", "3/4"], ["1/2", "5/4"]]]],
                    [[[["0", "1/2"], ["3/4", "1"]], [["1", "1/4"], ["3/2", "0"]]],
                     [[["1/4", "2"], ["0", "1"]], [["1", "1/2"], ["5/4", "3/4"]]]],
                ],
            ]
        },
        "comm_cost": [[["1", "1"], ["1", "1"]], [["1", "1"], ["1", "1"]]],
        "erasure_prob": "1/5",
    }
    raw.update(overrides)
    return raw


def tiny_model(**overrides):
    return validate_model(tiny_scenario(**overrides))
