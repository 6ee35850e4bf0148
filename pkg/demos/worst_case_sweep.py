"""Find the planar operator instance where a stationary method stalls.

Any method whose step is a fixed polynomial in the operator (forward,
averaged, or a whole anchored block treated as one step) has residual
norm sqrt(eta^2 + alpha^2) |c_0(eta + i alpha)|^K on the rotation family,
so sweeping (eta, alpha) along the cocoercivity boundary alpha^2 =
L eta - eta^2 exhibits the instance that saturates the L/(4p sqrt(5K))
floor. No amount of step tuning moves the exponent: the sup ratio decays
like 1/sqrt(K), matching the forward step's upper bound.
"""

import numpy as np

from smallgrad import lowerbound

if __name__ == "__main__":
    L = 1.0
    print("method        K    sup ratio    L/(4p sqrt(5K))   argmax eta")
    for tag, kw in (("gda", dict(eta=1.0)),
                    ("km", dict(alpha=0.5)),
                    ("halpern", dict(steps=8))):
        m = lowerbound.method_to_scli(tag, L=L, **kw)
        for K in (4, 16, 64):
            s = lowerbound.sweep_hard_instances(m, K=K, L=L)
            at = int(np.argmax(s.ratio))
            print(f"{tag:<10s} {K:>4d} {s.sup:>12.6f} {s.theorem_bound:>17.6f}"
                  f" {s.eta[at]:>12.5f}")

    # the sup bound behind the theorem, checked on explicit polynomials:
    # max_y y |r(y)|^k stays above L/(40 p^2 k) whenever r(0) = 1
    print()
    for r, label in (([1.0, -1.0], "1 - y"),
                     ([1.0, -2.0, 1.0], "(1 - y)^2"),
                     ([1.0, 0.5, -1.5], "1 + y/2 - 3y^2/2")):
        for k in (1, 2, 4):
            sup, ok = lowerbound.poly_sup_check(r, k, L=L)
            p_eff = max(1, len(r) - 1)
            print(f"r(y) = {label:<18s} k = {k}: sup = {sup:.4f} "
                  f"> {L / (40 * p_eff ** 2 * k):.5f}  ({ok})")
