#!/usr/bin/env python3
"""Independent numpy oracle for the hand-derived values frozen in the unit tests.

Run: python3 tests/oracle/derived.py
Each printed value is copied verbatim into the matching C++ test.
"""
import numpy as np
from scipy.integrate import solve_ivp


def coupling_fwd(z, t1, t2):
    h = len(z) // 2
    z1, z2 = z[:h], z[h:]
    v1 = z1 + z2 @ t2
    v2 = z2 + v1 @ t1
    return np.concatenate([v1, v2])


def coupling_inv(v, t1, t2):
    h = len(v) // 2
    v1, v2 = v[:h], v[h:]
    z2 = v2 - v1 @ t1
    z1 = v1 - z2 @ t2
    return np.concatenate([z1, z2])


def main():
    out = {}
    out["matmul"] = (np.array([[1, 2], [3, 4]]) @ np.array([[1], [1]])).ravel().tolist()
    out["mse_zero_vs_one"] = float(np.mean((np.zeros(2) - np.ones(2)) ** 2))
    out["mse_3_vs_0"] = 9.0
    # L = (W x - y)^2 with W=2, x=3, y=0
    W, x, y = 2.0, 3.0, 0.0
    out["dL_dW"] = 2 * (W * x - y) * x

    t1 = np.array([[-0.25]])
    t2 = np.array([[0.5]])
    fwd = coupling_fwd(np.array([1.0, 2.0]), t1, t2)
    out["coupling_fwd"] = fwd.tolist()
    out["coupling_inv"] = coupling_inv(fwd, t1, t2).tolist()

    # KAE-style linear model, identity encoder/decoder, row convention z K.
    K = np.array([[0.0, 1.0], [-1.0, 0.0]])
    x0 = np.array([1.0, 0.0])
    targets = [np.array([0.5, 0.5]), np.array([0.0, 0.0])]
    z = x0.copy()
    acc = 0.0
    for tgt in targets:
        z = z @ K
        acc += np.sum((z - tgt) ** 2)
    out["loss_forward_k2"] = acc / (2 * 1)

    # KIA depth 1 with the coupling above, one backward step from (2, 1.5)
    back = coupling_inv(np.array([2.0, 1.5]), t1, t2)
    out["loss_backward_k1"] = float(np.sum((back - np.array([1.0, 1.0])) ** 2))

    out["total_loss"] = 1 * 2 + 1 * 4 + 0.5 * 6
    out["adam_first_step"] = -0.001 * 1.0 / (np.sqrt(1.0) + 1e-8)

    # Relative errors.
    out["rel_34"] = float(np.linalg.norm([-3, -4]) / np.linalg.norm([3, 4]))
    out["rel_10_11"] = float(np.linalg.norm([0, 1]) / np.linalg.norm([1, 0]))

    # Small-angle pendulum period, g = 9.8, l = 1, measured from a reference integrator.
    sol = solve_ivp(lambda t, s: [s[1], -9.8 * np.sin(s[0])], [0, 20], [0.01, 0.0],
                    rtol=1e-12, atol=1e-14, dense_output=True, events=lambda t, s: s[1])
    crossings = [t for t in sol.t_events[0] if t > 1e-6]
    out["period_analytic"] = 2 * np.pi * np.sqrt(1 / 9.8)
    out["period_reference"] = 2 * (crossings[1] - crossings[0]) if len(crossings) > 1 else float("nan")

    # Random 2x2 Celsius MAE from a naive loop.
    rng = np.random.default_rng(7)
    a = rng.normal(size=(2, 2))
    b = rng.normal(size=(2, 2))
    tot = 0.0
    for i in range(2):
        for j in range(2):
            tot += abs(a[i, j] - b[i, j])
    out["mae_2x2"] = {"pred": a.ravel().tolist(), "true": b.ravel().tolist(), "mae": tot / 4}

    for k, v in out.items():
        print(f"{k}: {v!r}")


if __name__ == "__main__":
    main()
