"""Seeded random scenario dicts for tests and experiments.

Every probability and cost is an exact rational string, so the generated
models carry exact tables and the brute-force oracles run without float
noise.  Local kernels can be made control-action-independent: belief
pushforwards then coincide across control prescriptions, which keeps the
reachable belief tree small enough for fine prescription grids while leaving
communication dynamics, costs, and the adversary fully generic.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np


def _frac(num, den):
    f = Fraction(num, den)
    return f"{f.numerator}/{f.denominator}" if f.denominator != 1 else str(f.numerator)


def _row(rng, n, denom):
    # positive entries; exact sum denom/denom
    cuts = sorted(rng.choice(np.arange(1, denom), size=n - 1, replace=False)) if n > 1 else []
    parts = np.diff([0] + list(cuts) + [denom])
    return [_frac(int(p), denom) for p in parts]


def _labels(prefix, n):
    return [f"{prefix}{i}" for i in range(n)]


def random_scenario(
    seed,
    horizon=2,
    nx0=2,
    nx1=2,
    nx2=2,
    nu1=2,
    nu2=2,
    nua=2,
    pe="1/5",
    rho="1",
    info_structure="maxinfo",
    local_action_dependent=True,
    channel_states=1,
    constraints=None,
    denom=16,
    cost_denom=16,
    cost_max_num=32,
) -> dict:
    rng = np.random.default_rng(seed)

    def kernel_rows(outer_shape, n, action_axis=None):
        flat = []
        total = int(np.prod(outer_shape))
        base = {}
        for i in range(total):
            idx = np.unravel_index(i, outer_shape)
            if action_axis is not None and not local_action_dependent:
                key = tuple(v for ax, v in enumerate(idx) if ax != action_axis)
                if key not in base:
                    base[key] = _row(rng, n, denom)
                flat.append(base[key])
            else:
                flat.append(_row(rng, n, denom))
        out = np.empty(total, dtype=object)
        out[:] = flat
        return out.reshape(outer_shape).tolist()

    def costs(shape):
        vals = rng.integers(0, cost_max_num + 1, size=shape)
        out = np.empty(vals.size, dtype=object)
        out[:] = [_frac(int(v), cost_denom) for v in vals.ravel()]
        return out.reshape(shape).tolist()

    scenario = {
        "name": f"random-{seed}",
        "horizon": horizon,
        "info_structure": info_structure,
        "x0_space": _labels("g", nx0),
        "x1_space": _labels("a", nx1),
        "x2_space": _labels("b", nx2),
        "u1_space": _labels("u", nu1),
        "u2_space": _labels("v", nu2),
        "ua_space": _labels("w", nua),
        "init_x0": _row(rng, nx0, denom),
        "init_x1": _row(rng, nx1, denom),
        "init_x2": _row(rng, nx2, denom),
        "global_kernel": {"stationary": kernel_rows((nx0, nua), nx0)},
        "local_kernel_1": {"stationary": kernel_rows((nx0, nx1, nu1), nx1, action_axis=2)},
        "local_kernel_2": {"stationary": kernel_rows((nx0, nx2, nu2), nx2, action_axis=2)},
        "stage_cost": {"stationary": costs((nx0, nx1, nx2, nu1, nu2, nua))},
        "comm_cost": np.full((nx0, nx1, nx2), rho, dtype=object).tolist(),
        "erasure_prob": pe,
    }
    if channel_states > 1:
        scenario["channel"] = {
            "e_space": _labels("e", channel_states),
            "init_e": _row(rng, channel_states, denom),
            "e_kernel": {"stationary": kernel_rows((channel_states,), channel_states)},
        }
    if constraints is not None:
        scenario["constraints"] = dict(constraints)
    return scenario
