"""Reference values for the test suite, computed without importing modalflow.

Run ``python scripts/compute_oracles.py`` and compare with the constants frozen
in ``tests/oracles.py``.
"""
import numpy as np
import mpmath as mp
from scipy import optimize, stats

mp.mp.dps = 30


def phi(x):
    return mp.exp(-x * x / 2) / mp.sqrt(2 * mp.pi)


def mix1(x):
    return 0.5 * phi(x) + 0.5 * phi(x - 3.5)


def mix1_grad(x):
    return -0.5 * x * phi(x) - 0.5 * (x - 3.5) * phi(x - 3.5)


MIX2_W = [0.5, 0.5]
MIX2_MU = [np.zeros(2), np.array([3.0, 1.0])]
MIX2_COV = [np.eye(2), np.diag([1.5, 0.5])]


def mix2(x):
    return sum(w * stats.multivariate_normal(m, c).pdf(x) for w, m, c in zip(MIX2_W, MIX2_MU, MIX2_COV))


def mix2_grad(x):
    out = np.zeros(2)
    for w, m, c in zip(MIX2_W, MIX2_MU, MIX2_COV):
        p = np.linalg.inv(c)
        out += -w * stats.multivariate_normal(m, c).pdf(x) * (p @ (x - m))
    return out


def main():
    out = {}
    out["phi0"] = phi(0)
    out["phi1"] = phi(1)
    out["inv2pi"] = 1 / (2 * mp.pi)
    out["kde_012_at_1"] = (2 * phi(1) + phi(0)) / 3
    out["zeta1d_level"] = phi(1) + mp.mpf("0.05")
    f10 = mp.exp(-0.5) / (2 * mp.pi)
    out["zeta2d_radius"] = mp.sqrt(-2 * mp.log(2 * mp.pi * (f10 + mp.mpf("0.05"))))
    out["proj_1d_t03"] = mp.sqrt(-2 * mp.log(mp.mpf("0.3") * mp.sqrt(2 * mp.pi)))
    out["proj_1d_t025"] = mp.sqrt(-2 * mp.log(mp.mpf("0.25") * mp.sqrt(2 * mp.pi)))
    out["proj_2d_t01_radius"] = mp.sqrt(-2 * mp.log(2 * mp.pi * mp.mpf("0.1")))
    out["max_abs_x_phi"] = phi(1)
    # D_mix1 critical points
    out["mix1_left_mode"] = mp.findroot(mix1_grad, 0.0)
    out["mix1_right_mode"] = mp.findroot(mix1_grad, 3.5)
    out["mix1_mode_level"] = mix1(out["mix1_left_mode"])
    out["mix1_saddle_level"] = mix1(mp.mpf("1.75"))
    # D_mix1 basin membership by a dense fine-step Euler ascent
    for x0 in (1.0, -1.0, 4.0, 2.8):
        x = x0
        for _ in range(200000):
            x += 0.01 * float(mix1_grad(x)) / float(mix1(x))
        out[f"mix1_euler_end_{x0}"] = x
    # boundary max on [0.95, 1.05]
    xs = np.linspace(0.95, 1.05, 100001)
    vals = np.array([float(mix1(v)) for v in xs[::100]])
    out["mix1_ball_argmax"] = xs[::100][int(np.argmax(vals))]
    # backward Euler step for the standard normal
    out["backward_euler"] = optimize.brentq(lambda y: y - 1.0 + 0.1 * y * float(phi(y)), 0.0, 1.0, xtol=1e-15)
    # D_mix2 modes and saddle
    m_hi = optimize.root(mix2_grad, [3.0, 1.0], tol=1e-14).x
    m_lo = optimize.root(mix2_grad, [0.0, 0.0], tol=1e-14).x
    seg = [m_lo + s * (m_hi - m_lo) for s in np.linspace(0, 1, 2001)]
    s0 = seg[int(np.argmin([mix2(p) for p in seg]))]
    sad = optimize.root(mix2_grad, s0, tol=1e-14).x
    out["mix2_mode_hi"] = m_hi.tolist()
    out["mix2_mode_lo"] = m_lo.tolist()
    out["mix2_mode_levels"] = [mix2(m_hi), mix2(m_lo)]
    out["mix2_saddle"] = sad.tolist()
    out["mix2_saddle_level"] = mix2(sad)
    # Hausdorff: point (0,0) vs segment (1,0)-(2,0) by dense sampling
    ts = np.linspace(0, 1, 1000001)
    seg_pts = np.column_stack([1 + ts, np.zeros_like(ts)])
    out["hausdorff_point_segment"] = max(np.linalg.norm(seg_pts, axis=1).max(), np.linalg.norm(seg_pts, axis=1).min())
    # ARI of a 50/50 split against a single cluster
    from math import comb
    sum_ab = comb(50, 2) * 2
    sum_a = comb(50, 2) * 2
    sum_b = comb(100, 2)
    expected = sum_a * sum_b / comb(100, 2)
    out["ari_split_vs_one"] = (sum_ab - expected) / (0.5 * (sum_a + sum_b) - expected)
    for k, v in out.items():
        if isinstance(v, list):
            print(f"{k} = {[float(x) for x in v]!r}")
        else:
            print(f"{k} = {float(v)!r}")


if __name__ == "__main__":
    main()
