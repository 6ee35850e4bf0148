"""Worst-case instances for stationary linear iterative methods.

A method that maps u_{k-1} to C_0(A) u_{k-1} + N(A) b on linear operators
F(u) = A u + b is pinned down by two real polynomials.  On the planar
family A = [[eta I, alpha I], [-alpha I, eta I]] everything reduces to
scalar complex arithmetic: the eigenvalues of A are eta +- alpha i, so
after K steps from u_0 = 0

    ||F(u_K)|| / ||u* - u_0|| = sqrt(eta^2 + alpha^2) |c_0(eta + alpha i)|^K,

where c_0 is the scalar polynomial of C_0.  Sweeping eta over the curve
alpha^2 = L eta - eta^2 (the cocoercivity boundary) exhibits instances
forcing

    sup ||F(u_K)|| >= L D / (4 p sqrt(5 K))

for any consistent method whose N has degree at most p - 1.  This module
builds the polynomials for the shipped methods, evaluates the closed form,
cross-checks it against explicit matrix iteration, and runs the sweep.

Polynomials are plain ndarrays of ascending real coefficients; complex
evaluation is Horner on (re, im) pairs.
"""

import math
from dataclasses import dataclass

import numpy as np

GRID_FLOOR_FRAC = 1e-7  # smallest eta on the sweep grid, as a fraction of L
SWEEP_SLACK = 1e-3      # allowed grid shortfall against the guaranteed sup


@dataclass(frozen=True)
class ScliMethod:
    """One step u_k = C_0(A) u_{k-1} + N(A) b as two real polynomials.

    c0 holds the p+1 ascending coefficients of C_0 (c0[0] must be 1: the
    method keeps fixed points fixed); n holds the p coefficients of N.
    """

    c0: np.ndarray
    n: np.ndarray
    p: int

    def __post_init__(self):
        c0 = np.array(self.c0, dtype=float)
        n = np.array(self.n, dtype=float)
        if c0.ndim != 1 or n.ndim != 1 or len(c0) != len(n) + 1:
            raise ValueError("c0 must have exactly one more coefficient than n")
        if len(c0) != self.p + 1:
            raise ValueError("degree bound p=%d does not match %d coefficients"
                             % (self.p, len(c0)))
        if c0[0] != 1.0:
            raise ValueError("C_0(0) must equal 1, got %r" % c0[0])
        c0.setflags(write=False)
        n.setflags(write=False)
        object.__setattr__(self, "c0", c0)
        object.__setattr__(self, "n", n)


def method_to_scli(method, L=1.0, eta=None, alpha=None, steps=None):
    """Express a shipped method as one stationary linear step.

    Parameters
    ----------
    method : str
        'gda' (needs eta), 'km' (needs alpha), or 'halpern' (needs steps;
        the whole anchored run of that many steps becomes a single
        degree-`steps` update).
    L : float
        Smoothness constant of the operator class.
    eta, alpha, steps
        Method parameter, see above.

    Returns
    -------
    ScliMethod

    Notes
    -----
    'km' with averaging weight alpha on the displacement map u - (2/L)F(u)
    collapses to 'gda' with step 2*alpha/L; the polynomials come out
    identical.  The anchored unroll keeps the affine part separate so the
    identity C_0(y) = 1 + N(y) y survives the recursion exactly.
    """
    if L <= 0:
        raise ValueError("L must be positive")
    if method == "gda":
        if eta is None:
            raise ValueError("gda needs eta")
        return ScliMethod(np.array([1.0, -eta]), np.array([-eta]), 1)
    if method == "km":
        if alpha is None:
            raise ValueError("km needs alpha")
        step = (2.0 * alpha) / L
        return ScliMethod(np.array([1.0, -step]), np.array([-step]), 1)
    if method == "halpern":
        if steps is None or steps < 1:
            raise ValueError("halpern needs steps >= 1")
        # u_k = lam_k u_0 + (1 - lam_k)(1 - 2y/L) u_{k-1}
        #       - (1 - lam_k)(2/L) b,  lam_k = 1/(k+1).
        # Recursing on d = c - 1 keeps the constant coefficient exactly 1:
        # d_k = (1 - lam_k)(damp * d_{k-1} + (damp - 1)) has no constant term.
        d = np.array([0.0])
        n = np.array([0.0])
        damp = np.array([1.0, -2.0 / L])
        for k in range(1, steps + 1):
            lam = 1.0 / (k + 1.0)
            nd = np.convolve(damp, d)
            nd[1] -= 2.0 / L
            d = (1.0 - lam) * nd
            n = (1.0 - lam) * np.convolve(damp, n)
            n[0] -= (1.0 - lam) * (2.0 / L)
        c = d
        c[0] += 1.0
        return ScliMethod(c, n[:steps], steps)
    raise ValueError("unsupported method '%s'" % method)


def consistency_check(m):
    """Max coefficient residual of C_0(y) - 1 - N(y) y.

    Zero (up to rounding) for every fixed-point-convergent method; a
    tampered N shows up as a nonzero residual.
    """
    shifted = np.concatenate([[1.0], m.n])
    return float(np.max(np.abs(m.c0 - shifted)))


def _require_consistent(m):
    scale = max(1.0, float(np.max(np.abs(m.c0))), float(np.max(np.abs(m.n))))
    if consistency_check(m) > 1e-12 * scale:
        raise ValueError("method is inconsistent: C_0(y) != 1 + N(y) y")


def _require_cocoercive(eta, alpha, L):
    if eta < 0.0 or alpha < 0.0 or eta > L:
        raise ValueError("need 0 <= eta <= L and alpha >= 0")
    if eta * eta + alpha * alpha - L * eta > 1e-12 * L * L:
        raise ValueError(
            "(eta=%g, alpha=%g) is not 1/L-cocoercive for L=%g" % (eta, alpha, L)
        )


def _c0_modulus(m, eta, alpha):
    """|c_0(eta + alpha i)| via Horner on (re, im) pairs; vectorized."""
    re = np.full_like(np.asarray(eta, dtype=float), m.c0[-1])
    im = np.zeros_like(re)
    for coef in m.c0[-2::-1]:
        re, im = coef + re * eta - im * alpha, re * alpha + im * eta
    return np.sqrt(re * re + im * im)


def eval_scli_norm(m, K, eta, alpha, L, D=1.0):
    """Worst-case ||F(u_K)|| on the planar instance, for ||u* - u_0|| = D.

    Equals sqrt(eta^2 + alpha^2) * |c_0(eta + alpha i)|^K for D = 1; the
    value scales linearly in D.

    Parameters
    ----------
    m : ScliMethod
        Must be consistent.
    K : int
        Number of applications of the step.
    eta, alpha : float
        Instance parameters; must satisfy eta^2 + alpha^2 <= L eta.
    L : float
        Cocoercivity constant defining the instance class.
    D : float
        Distance from the start to the solution.
    """
    if K < 0:
        raise ValueError("K must be nonnegative")
    _require_consistent(m)
    _require_cocoercive(eta, alpha, L)
    mod = float(_c0_modulus(m, float(eta), float(alpha)))
    return float(np.sqrt(eta * eta + alpha * alpha) * mod**K * D)


def simulate_scli(m, K, eta, alpha, b, L):
    """Run the step literally on the d=2 instance and return ||F(u_K)||/D.

    Independent route used to cross-check eval_scli_norm: builds the 2x2
    matrices C_0(A) and N(A) by matrix Horner, iterates from u_0 = 0, and
    normalizes by D = ||A^{-1} b||.
    """
    _require_cocoercive(eta, alpha, L)
    b = np.asarray(b, dtype=float)
    if b.shape != (2,) or not np.any(b):
        raise ValueError("b must be a nonzero length-2 vector")
    A = np.array([[eta, alpha], [-alpha, eta]])
    eye = np.eye(2)

    def matpoly(coeffs):
        M = coeffs[-1] * eye
        for coef in coeffs[-2::-1]:
            M = M @ A + coef * eye
        return M

    C0 = matpoly(m.c0)
    N = matpoly(m.n) if len(m.n) else np.zeros((2, 2))
    u = np.zeros(2)
    for _ in range(K):
        u = C0 @ u + N @ b
    F = A @ u + b
    D = float(np.linalg.norm(np.linalg.solve(A, b)))
    return float(np.linalg.norm(F)) / D


def _golden_max(fun, lo, hi, iters=60):
    # golden-section maximization on a bracket; fun is scalar -> scalar
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = float(lo), float(hi)
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fun(c), fun(d)
    for _ in range(iters):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fun(d)
    return max(fc, fd)


def _refine_best(fun, xs, values, n_brackets=3):
    # local refinement around the best few grid points
    best = float(np.max(values))
    order = np.argsort(values)[::-1]
    seen = set()
    for i in order[: 3 * n_brackets]:
        if len(seen) >= n_brackets:
            break
        if any(abs(int(i) - j) <= 1 for j in seen):
            continue
        seen.add(int(i))
        lo = xs[max(int(i) - 1, 0)]
        hi = xs[min(int(i) + 1, len(xs) - 1)]
        if hi > lo:
            best = max(best, _golden_max(fun, lo, hi))
    return best


@dataclass(frozen=True)
class HardInstanceSweep:
    """Result of maximizing the residual ratio over the boundary curve.

    eta, alpha, ratio are the grid (alpha^2 = L eta - eta^2 exactly);
    sup includes the local refinement and therefore may exceed
    max(ratio).
    """

    eta: np.ndarray
    alpha: np.ndarray
    ratio: np.ndarray
    K: int
    L: float
    p: int
    sup: float

    def __post_init__(self):
        for name in ("eta", "alpha", "ratio"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def theorem_bound(self):
        return self.L / (4.0 * self.p * np.sqrt(5.0 * self.K))

    @property
    def margin(self):
        return self.sup / self.theorem_bound


def sweep_hard_instances(m, K, L=1.0, grid_size=10_000):
    """Maximize ||F(u_K)||/D over the hard-instance curve.

    Evaluates the closed-form ratio on a logarithmic eta grid over
    (0, L] with alpha^2 = L eta - eta^2, refines around the best grid
    points by golden section, and checks the result against the
    guaranteed lower bound L/(4 p sqrt(5 K)).

    Raises
    ------
    RuntimeError
        If the swept sup falls below the guaranteed bound (modulo grid
        slack); this would mean the closed form or the method polynomials
        are wrong, so it is an internal-error signal, not a report.
    """
    if grid_size < 1000:
        raise ValueError("grid_size must be at least 1000")
    if K < 1:
        raise ValueError("K must be positive")
    _require_consistent(m)
    etas = np.geomspace(GRID_FLOOR_FRAC * L, L, grid_size)
    alphas = np.sqrt(np.maximum(L * etas - etas * etas, 0.0))
    mods = _c0_modulus(m, etas, alphas)
    ratios = np.sqrt(etas * etas + alphas * alphas) * mods**K

    def ratio_at(eta):
        alpha = math.sqrt(max(L * eta - eta * eta, 0.0))
        return float(
            math.sqrt(eta * eta + alpha * alpha) * _c0_modulus(m, eta, alpha) ** K
        )

    sup = _refine_best(ratio_at, etas, ratios)
    sweep = HardInstanceSweep(etas, alphas, ratios, K, L, m.p, sup)
    if sup < sweep.theorem_bound * (1.0 - SWEEP_SLACK):
        raise RuntimeError(
            "swept sup %.6g fell below the guaranteed bound %.6g"
            % (sup, sweep.theorem_bound)
        )
    return sweep


def sweep_to_csv(s):
    """CSV rows (eta, alpha, ratio) plus a '#' summary line."""
    lines = ["eta,alpha,ratio"]
    for e, a, r in zip(s.eta, s.alpha, s.ratio):
        lines.append("%s,%s,%s" % (format(e, ".17g"), format(a, ".17g"),
                                   format(r, ".17g")))
    lines.append("# sup=%.17g bound=%.17g margin=%.17g"
                 % (s.sup, s.theorem_bound, s.margin))
    return "\n".join(lines) + "\n"


def real_part_poly(m, L):
    """Coefficients of Re c_0(eta + alpha i) on the curve alpha^2 = L eta - eta^2.

    The imaginary unit only enters even powers of alpha in the real part,
    so substituting alpha^2 = L eta - eta^2 leaves a real polynomial in eta
    of the same degree:

        Re c_0 = sum_j r_j sum_t (-1)^t C(j, 2t) eta^(j-t) (L - eta)^t.
    """
    p = m.p
    out = np.zeros(p + 1)
    for j, rj in enumerate(m.c0):
        if rj == 0.0:
            continue
        for t in range(j // 2 + 1):
            # (L - eta)^t expanded, then shifted by eta^(j-t)
            binom = np.array(
                [math.comb(t, s) * L ** (t - s) * (-1.0) ** s for s in range(t + 1)]
            )
            term = np.zeros(j + 1)
            term[j - t : j + 1] = binom
            out[: j + 1] += rj * (-1.0) ** t * math.comb(j, 2 * t) * term
    return out


def poly_sup_check(r, k, L=1.0):
    """Maximize y |r(y)|^k over (0, L] and compare to L/(40 p^2 k).

    Parameters
    ----------
    r : array_like
        Ascending real coefficients with r[0] = 1.
    k : int
        Power; must be >= 1.
    L : float
        Right end of the search interval.

    Returns
    -------
    (sup, satisfied) : (float, bool)
        The maximized value and whether it exceeds the guaranteed bound.
        The effective degree is floored at 1 so the bound stays finite
        for constant polynomials.
    """
    r = np.asarray(r, dtype=float)
    if r.ndim != 1 or len(r) < 1 or r[0] != 1.0:
        raise ValueError("r must be a coefficient vector with r(0) = 1")
    if k < 1:
        raise ValueError("k must be >= 1")
    nz = np.nonzero(r)[0]
    p_eff = max(1, int(nz[-1]))

    def val(y):
        # the maximizer is guaranteed to lie in [L/(20 p^2 k), L], but the
        # grid covers all of (0, L] anyway
        acc = r[-1]
        for coef in r[-2::-1]:
            acc = acc * y + coef
        return float(y * abs(acc) ** k)

    ys = np.geomspace(GRID_FLOOR_FRAC * L, L, 4000)
    vals = np.array([val(y) for y in ys])
    sup = _refine_best(val, ys, vals)
    bound = L / (40.0 * p_eff * p_eff * k)
    return sup, bool(sup > bound)
