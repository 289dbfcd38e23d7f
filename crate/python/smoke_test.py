"""Smoke test for the pytiltcopula extension module.

Build and install first:
    cd crates/python && maturin build --release -o dist && pip install dist/*.whl
"""
import math

import pytiltcopula as tc


def main():
    rho0 = [[1.0, 0.0], [0.0, 1.0]]
    g = tc.Model.gaussian(rho0, ["std-normal"])
    assert g.dim == 2 and g.name == "gaussian"

    exact = g.corner_prob(p=1.857)
    assert abs(exact - 1.0e-3) < 2e-5, exact

    sol = tc.solve_theta(g, "mvn-shift", p=1.857, seed=3)
    assert sol["converged"]
    assert all(abs(t - 2.09) < 0.1 for t in sol["theta"]), sol["theta"]

    r = tc.estimate(g, "is-t1", p=1.857, n=500, reps=200, seed=7)
    se = r["sd"] / math.sqrt(r["reps"])
    assert abs(r["u_hat"] - exact) < 4 * se, (r["u_hat"], exact, se)

    fam = tc.TiltFamily.trunc_exp_product(2)
    assert fam.psi([0.0, 0.0]) == 0.0
    stat, log_lr = fam.sample([0.0, 0.0], seed=1)
    assert log_lr == 0.0 and len(stat) == 2

    c = tc.Model.clayton(3.0)
    assert abs(tc.clayton_corner_prob(3.0, 0.98341) - 1.0488e-3) < 1e-6

    v = tc.Model.vine("3d")
    u = [0.3, 0.6, 0.9]
    back = v.rosenblatt_inverse(v.rosenblatt_forward(u))
    assert max(abs(a - b) for a, b in zip(u, back)) < 1e-7

    try:
        tc.estimate(g, "is-t9", p=1.0)
    except ValueError:
        pass
    else:
        raise AssertionError("unknown method accepted")

    print("smoke test ok:", c, f"u={r['u_hat']:.4e}", f"theta_t2={sol['theta']}")


if __name__ == "__main__":
    main()
