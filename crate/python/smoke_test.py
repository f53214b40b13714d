"""Smoke test for the compiled `coalesce` extension module."""

import json
import math

import coalesce


def main():
    grid = coalesce.MassGrid.geometric()
    assert len(grid) == 70
    state = coalesce.discretize(grid, "gamma", 4.19e-9, 1e4, shape=2.0)
    assert 0.99e4 < state.total_number() <= 1e4

    x_lo = (2.046e-8 - 1.893e-8) / 0.089
    _, e_hi = coalesce.constraint_bounds(2.046e-8, 1.089, x_lo, x_lo * math.sqrt(2))
    assert abs(e_hi - 1.893e-8) / 1.893e-8 < 1e-10

    s = coalesce.refined_interval(2.7, 1.5, 1.0, 2.0)
    assert abs(s.s_lo - 1.7) < 1e-12 and abs(s.s_hi - 1.9) < 1e-12
    assert abs(s.draw(0.5) - 1.8) < 1e-12
    legacy = coalesce.legacy_interval(2.7, 1.5, 1.0, 2.0)
    assert legacy.s_lo < s.s_lo

    assert coalesce.kernel("golovin_sum", 1.0, 2.0, coefficient=1500.0) == 4500.0

    config = json.dumps({
        "initial": {"kind": "exponential", "mean_mass_g": 4.19e-9, "total_number": 2000},
        "kernel": {"kind": "golovin_sum", "coefficient": 1500},
        "engine": {"max_time_s": 60, "snapshot_times_s": [0, 30, 60], "seed": 3},
    })
    result = json.loads(coalesce.run(config))
    assert result["violations"] == []
    assert result["ledger"]["max_number_step_error"] == 0.0
    assert len(result["snapshots"]) == 3

    ens = json.loads(coalesce.ensemble(config, realizations=8))
    n0 = ens["snapshots"][0]["moment_mean"][0]
    l0 = ens["snapshots"][0]["moment_mean"][1]
    expected = coalesce.analytic_number("golovin_sum", n0, l0, 1.0, 60.0, coefficient=1500.0)
    last = ens["snapshots"][-1]
    se = math.sqrt(last["moment_variance"][0] / last["count"])
    assert abs(last["moment_mean"][0] - expected) < 5 * se + 1.0, (last["moment_mean"][0], expected)

    try:
        coalesce.run(config.replace("golovin_sum", "bogus"))
    except ValueError as e:
        assert "kernel.kind" in str(e)
    else:
        raise AssertionError("bad kernel accepted")

    print("python smoke test passed:", coalesce.__version__, coalesce.RNG_ALGORITHM)


if __name__ == "__main__":
    main()
