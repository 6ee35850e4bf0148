"""Measured gradient-norm decay of gd, fgm, and fgm+ogmg side by side.

On smooth convex problems the three have certified decay exponents -1, -3,
and -4 for the squared gradient norm (min over the run for the first two,
at the horizon for the composition). This script fits log-log slopes to
the measured traces and overlays the certified envelopes; the fitted
slopes should sit at or below the certified exponents.
"""

import matplotlib.pyplot as plt
import numpy as np

from smallgrad import methods, problems
from smallgrad.harness import fit_loglog_slope


def spectrum_quadratic(dim=40, lo=1e-5, seed=0):
    # zero linear term keeps the optimum at the origin, so the decay is a
    # clean power law instead of plateauing at the far-away-optimum scale
    base = problems.random_quadratic(dim, L=1.0, seed=seed, lo_frac=lo)
    return problems.make_quadratic(base.spec["Q"], np.zeros(dim), base.L)


def min_norms(trace):
    return np.minimum.accumulate(trace.grad_norm_sq)


if __name__ == "__main__":
    p = spectrum_quadratic()
    x0 = np.random.default_rng(1).standard_normal(40)
    K = 512
    k = np.arange(1, K + 1)

    gd = min_norms(methods.run_gd(p, x0, K))[1:]
    fgm = min_norms(methods.run_fgm(p, x0, K))[1:]

    horizons = np.array([8, 16, 32, 64, 128, 256, 512])
    comp = np.array([
        methods.run_fgm_then_ogmg(p, x0, int(h)).grad_norm_sq[int(h)]
        for h in horizons
    ])

    print(f"{'method':12s} {'quantity':26s} slope")
    print(f"{'gd':12s} {'min ||grad||^2':26s} {fit_loglog_slope(k, gd):6.2f}")
    print(f"{'fgm':12s} {'min ||grad||^2':26s} {fit_loglog_slope(k, fgm):6.2f}")
    print(f"{'fgm+ogmg':12s} {'||grad||^2 at horizon':26s} "
          f"{fit_loglog_slope(horizons, comp):6.2f}")

    gap0 = p.value(x0) - p.f_star
    D_sq = float(np.dot(x0 - p.x_star, x0 - p.x_star))

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.loglog(k, gd, label="gd")
    ax.loglog(k, fgm, label="fgm")
    ax.loglog(horizons, comp, "o-", label="fgm+ogmg (terminal)")
    ax.loglog(k, 2.0 * p.L * gap0 / (2.0 * k + 1.0), "--", lw=1,
              label="2L(f0-f*)/(2k+1)")
    ax.loglog(k, 18.0 * p.L**2 * D_sq / ((k + 1.0) * (k + 2.0) * (k + 3.0)),
              "--", lw=1, label="18L^2D^2/((k+1)(k+2)(k+3))")
    ax.set_xlabel("k")
    ax.set_ylabel("squared gradient norm")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig("rate_comparison.svg")
    print("wrote rate_comparison.svg")
