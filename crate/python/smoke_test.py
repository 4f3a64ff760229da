"""Smoke test of the Python bindings: generate, solve, validate, sweep."""

import json

import vnfpr_py


def test_round_trip():
    instance = vnfpr_py.generate(case="vpn", seed=3, pair_seed=3, demands=3, max_copies=1)
    assert len(json.loads(instance)["demands"]) == 3

    solution, trace = vnfpr_py.solve(instance, objective="te-nfv", node_limit=10)
    stages = [json.loads(line) for line in trace.splitlines()]
    assert [s["stage"] for s in stages if s["record"] == "stage"][:1] == ["te"]

    report = json.loads(vnfpr_py.validate(instance, solution))
    assert report["feasible"], report["violations"]

    rows = vnfpr_py.alpha_sweep(instance, [0.0, 0.2], node_limit=10)
    costs = [cost for _, _, cost, _ in rows]
    assert all(b <= a for a, b in zip(costs, costs[1:]))


def test_bad_variant_raises():
    instance = vnfpr_py.generate(demands=1)
    try:
        vnfpr_py.solve(instance, variant="nope")
    except ValueError:
        return
    raise AssertionError("expected ValueError")


if __name__ == "__main__":
    test_round_trip()
    test_bad_variant_raises()
    print("ok")
