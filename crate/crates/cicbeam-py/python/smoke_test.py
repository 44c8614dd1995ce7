"""Smoke test for the cicbeam_py extension: run after `maturin develop`."""

import math

import cicbeam_py as cb


def main():
    t = cb.Topology.reference()
    assert t.occupied == [1, 2, 3]
    assert t.available == [4, 5, 6, 7, 8]

    table = cb.dof_table(t, 8)
    assert [row[1] for row in table] == [1, 1, 2, 3, 3, 4, 5, 5]
    assert [row[2] for row in table] == [1, 2, 3, 4, 5, 5, 5, 5]
    assert [row[3] for row in table] == [0, 0, 0, 1, 2, 3, 4, 5]
    dof, assoc = cb.max_dof(t, 5)
    assert dof == 3 and len(assoc) == 3
    assert cb.theorem1_feasible(t, 5, "[[4,7],[5,8],[6]]")
    assert not cb.theorem1_feasible(t, 2, [[4, 7], [5, 8], [6]])
    sets = cb.derive_sets(t, "[[5],[6],[7]]")
    assert sets["gamma"][1] == [2]

    sigma2 = cb.noise_power(-169.0, 10e6)
    assert abs(sigma2 - 1.2589e-13) / 1.2589e-13 < 1e-3

    ch = cb.ChannelSet.sample(t, 5, seed=0)
    assert len(ch.channel(6)) == 5 and isinstance(ch.channel(6)[0], complex)
    p = cb.dbm_to_watts(23.0)

    zf = cb.zf_design(ch, t, "[[5],[6],[7]]", p)
    assert abs(zf["power"] - p) < 1e-12

    run = cb.run_sca(ch, t, "[[4,7],[5,8],[6]]", p, -60.0)
    rates = run["sum_rates"]
    assert all(b >= a - 1e-9 for a, b in zip(rates, rates[1:]))
    assert run["converged"]

    comp, s, _ = cb.comp_capacity(ch, t, p)
    assert comp >= run["sum_rate"]
    assert len(s) == 5

    cap, powers, mu = cb.water_fill([2.0, 1.0], 1.0, 3.0)
    assert abs(cap - 4.174) < 1e-3 and abs(mu - 2.125) < 1e-12

    f, grad = cb.eval_surrogate(1.0, 0.5, 1.0, 2.0, (1.0, 0.5, math.sqrt(0.5)))
    assert abs(f - (1.25 - 2.0)) < 1e-12 and len(grad) == 4

    sc = cb.Scenario.reference().replace(seed=1)
    best = cb.optimize(sc, association_cap=4)
    assert best["dof"] == 3 and best["sum_rate"] > 0

    try:
        cb.theorem1_feasible(t, 5, "[[4,")
    except ValueError:
        pass
    else:
        raise AssertionError("malformed association accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
