"""Problem oracles for gradient-norm minimization.

Two oracle families: smooth convex functions (value + gradient, smoothness
constant L) and cocoercive operators (modulus 1/L). Factories build the
canonical test instances (quadratics, log-sum-exp, the rotation operator
family and its saddle-function twin), and sampled verifiers spot-check the
defining inequalities on random pairs, since those inequalities are
universally quantified and can only be spot-checked numerically.

Oracles are pure functions and problem objects are immutable after
construction, so instances are safe to share across concurrent runs.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.special import logsumexp as _logsumexp, softmax as _softmax

from . import kvdoc

__all__ = [
    "SmoothProblem",
    "OperatorProblem",
    "LinearOperatorSpec",
    "VerifierReport",
    "tol_zero",
    "make_quadratic",
    "random_quadratic",
    "make_logsumexp",
    "centered_logsumexp",
    "with_reference_optimum",
    "make_rotation_operator",
    "make_saddle_quadratic",
    "gradient_as_operator",
    "verify_smooth_convex",
    "verify_cocoercive",
    "problem_to_text",
    "problem_from_text",
]


def tol_zero(L: float, ref_norm: float) -> float:
    """Absolute tolerance for declaring a gradient/operator value zero."""
    return 1e-10 * L * (1.0 + ref_norm)


def _frozen(a: Optional[np.ndarray]) -> Optional[np.ndarray]:
    if a is None:
        return None
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SmoothProblem:
    """Value + gradient oracle for an L-smooth convex function.

    Attributes
    ----------
    dim : int
        Ambient dimension.
    value, grad : callable
        Oracles ``x -> f(x)`` and ``x -> grad f(x)``.
    L : float
        Smoothness constant (gradient Lipschitz constant).
    x_star, f_star : optional
        Known minimizer and minimum value, when available.
    spec : dict
        Construction record used for serialization; not part of the oracle.
    """

    dim: int
    value: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    L: float
    x_star: Optional[np.ndarray] = None
    f_star: Optional[float] = None
    spec: dict = field(default_factory=dict, repr=False)


@dataclass(frozen=True)
class OperatorProblem:
    """Oracle for a 1/L-cocoercive operator F, with optional zero u_star."""

    dim: int
    operator: Callable[[np.ndarray], np.ndarray]
    L: float
    u_star: Optional[np.ndarray] = None
    spec: dict = field(default_factory=dict, repr=False)


@dataclass(frozen=True)
class LinearOperatorSpec:
    """Block parameters of F(u) = A u + b with A = [[eta I, alpha I], [-alpha I, eta I]].

    Cocoercive with modulus 1/L iff eta^2 + alpha^2 <= L * eta; the unique
    zero -A^{-1} b exists iff eta^2 + alpha^2 > 0.
    """

    eta: float
    alpha: float
    half_dim: int
    offset: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "offset", _frozen(self.offset))
        if self.offset.shape != (2 * self.half_dim,):
            raise ValueError(
                f"offset must have length {2 * self.half_dim}, got {self.offset.shape}"
            )
        if self.eta < 0 or self.alpha < 0:
            raise ValueError("block parameters eta, alpha must be nonnegative")


# ---------------------------------------------------------------------------
# smooth instances


def make_quadratic(Q: np.ndarray, c: np.ndarray, L: float) -> SmoothProblem:
    """Build f(x) = 1/2 x'Qx + c'x for symmetric 0 <= Q <= L*I.

    Parameters
    ----------
    Q : (d, d) array
        Symmetric positive semidefinite matrix.
    c : (d,) array
        Linear term. Must lie in range(Q) if Q is singular.
    L : float
        Claimed smoothness constant; the spectrum of Q is checked against it
        (exactly for d <= 512, by sampled Rayleigh quotients above that).

    Returns
    -------
    SmoothProblem
        With x_star solving Q x = -c and f_star = f(x_star).
    """
    Q = np.array(Q, dtype=float)
    c = np.array(c, dtype=float)
    d = Q.shape[0]
    if Q.shape != (d, d) or c.shape != (d,):
        raise ValueError(f"dimension mismatch: Q {Q.shape}, c {c.shape}")
    if L <= 0:
        raise ValueError("L must be positive")
    if not np.allclose(Q, Q.T, rtol=0.0, atol=1e-12 * max(1.0, L)):
        raise ValueError("Q must be symmetric")
    Q = 0.5 * (Q + Q.T)

    tol = 1e-9 * L
    if d <= 512:
        eigs = np.linalg.eigvalsh(Q)
        lo, hi = eigs[0], eigs[-1]
    else:
        rng = np.random.default_rng(0)
        V = rng.standard_normal((64, d))
        quot = np.einsum("ij,ij->i", V @ Q, V) / np.einsum("ij,ij->i", V, V)
        lo, hi = quot.min(), quot.max()
    if hi > L + tol:
        raise ValueError(f"spectral bound {hi:.6g} exceeds L = {L:.6g}")
    if lo < -tol:
        raise ValueError(f"Q has negative curvature {lo:.6g}")

    x_star, *_ = np.linalg.lstsq(Q, -c, rcond=None)
    if np.linalg.norm(Q @ x_star + c) > tol_zero(L, np.linalg.norm(x_star)):
        raise ValueError("c is not in the range of Q; no minimizer exists")

    Q_ro, c_ro = _frozen(Q), _frozen(c)

    def value(x):
        return 0.5 * float(x @ (Q_ro @ x)) + float(c_ro @ x)

    def grad(x):
        return Q_ro @ x + c_ro

    x_star = _frozen(x_star)
    return SmoothProblem(
        dim=d,
        value=value,
        grad=grad,
        L=float(L),
        x_star=x_star,
        f_star=value(x_star),
        spec={"kind": "quadratic", "Q": Q_ro, "c": c_ro},
    )


def random_quadratic(dim: int, L: float = 1.0, seed: int = 0, lo_frac: float = 1e-3) -> SmoothProblem:
    """Randomly rotated quadratic with log-spaced spectrum in [lo_frac*L, L]."""
    rng = np.random.default_rng(seed)
    V, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    lam = np.geomspace(lo_frac * L, L, dim)
    Q = (V * lam) @ V.T
    Q = 0.5 * (Q + Q.T)
    # QR roundoff can push the top eigenvalue a hair past L
    Q *= L / max(L, float(np.linalg.eigvalsh(Q)[-1]))
    c = rng.standard_normal(dim)
    return make_quadratic(Q, c, L)


def make_logsumexp(rows: np.ndarray, rho: float, L: Optional[float] = None) -> SmoothProblem:
    """Build f(x) = rho * log(sum_i exp(a_i'x / rho)) for rows a_i.

    Evaluation is overflow-safe (shifted log-sum-exp). When L is not
    supplied, it is estimated as 1.01 * lambda_max(rows' rows) / rho with
    lambda_max from 50 power-iteration steps.

    Parameters
    ----------
    rows : (m, d) array
        One row per exponential term; m >= 1.
    rho : float
        Smoothing scale, positive.
    L : float, optional
        Caller-supplied smoothness bound; estimated when omitted.
    """
    rows = np.array(rows, dtype=float)
    if rows.ndim != 2 or rows.shape[0] < 1:
        raise ValueError("rows must be a nonempty (m, d) matrix")
    if rho <= 0:
        raise ValueError("rho must be positive")
    m, d = rows.shape

    if L is None:
        G = rows.T @ rows if d <= m else rows @ rows.T
        v = np.ones(G.shape[0]) / np.sqrt(G.shape[0])
        for _ in range(50):
            w = G @ v
            n = np.linalg.norm(w)
            if n == 0.0:
                break
            v = w / n
        L = 1.01 * float(v @ (G @ v)) / rho

    rows_ro = _frozen(rows)

    def value(x):
        return rho * float(_logsumexp(rows_ro @ x / rho))

    def grad(x):
        return rows_ro.T @ _softmax(rows_ro @ x / rho)

    return SmoothProblem(
        dim=d,
        value=value,
        grad=grad,
        L=float(L),
        spec={"kind": "logsumexp", "rows": rows_ro, "rho": float(rho)},
    )


def centered_logsumexp(dim: int, m: int, rho: float = 1.0, seed: int = 0) -> SmoothProblem:
    """Log-sum-exp instance whose rows sum to zero, so x = 0 is optimal.

    Useful as a non-quadratic test instance with an independently known
    optimum (f(0) = rho * log m) for cross-checking the reference solve.
    """
    rng = np.random.default_rng(seed)
    rows = rng.standard_normal((m, dim))
    rows -= rows.mean(axis=0)
    return make_logsumexp(rows, rho)


def with_reference_optimum(p: SmoothProblem, x0: np.ndarray, budget: int = 100_000) -> SmoothProblem:
    """Attach a numerically computed optimum to a smooth problem.

    Runs the fast gradient method from x0 up to half the oracle budget, then
    polishes with plain gradient steps (monotone in gradient norm) until
    ||grad f(x)|| <= 1e-12 * L * ||x0||. Raises if the budget is exhausted
    before that tolerance is met.
    """
    x0 = np.asarray(x0, dtype=float)
    L = p.L
    target = 1e-12 * L * np.linalg.norm(x0)

    x = x0.copy()
    g = p.grad(x)
    best_x, best_n = x.copy(), np.linalg.norm(g)
    calls = 1

    # accelerated phase
    v = x.copy()
    B_prev, b_prev = 1.0, 1.0
    while calls < budget // 2 and best_n > target:
        b = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * B_prev))
        B = B_prev + b
        v = v - (b_prev / L) * g
        x = (B_prev / B) * (x - g / L) + (b / B) * v
        g = p.grad(x)
        calls += 1
        n = np.linalg.norm(g)
        if n < best_n:
            best_x, best_n = x.copy(), n
        B_prev, b_prev = B, b

    # monotone polish
    x = best_x
    g = p.grad(x)
    calls += 1
    n = np.linalg.norm(g)
    while n > target and calls < budget:
        x = x - g / L
        g = p.grad(x)
        calls += 1
        n = np.linalg.norm(g)

    if n > target:
        raise RuntimeError(
            f"reference solve stalled at ||grad|| = {n:.3e} (target {target:.3e}) "
            f"after {calls} oracle calls"
        )
    x = _frozen(x)
    return replace(p, x_star=x, f_star=p.value(x))


# ---------------------------------------------------------------------------
# operator instances


def _check_cocoercive_params(eta: float, alpha: float, L: float) -> None:
    if L <= 0:
        raise ValueError("L must be positive")
    if eta < 0 or eta > L * (1.0 + 1e-12):
        raise ValueError(f"eta must lie in [0, L], got {eta}")
    slack = eta * eta + alpha * alpha - L * eta
    if slack > 1e-12 * L * L:
        raise ValueError(
            f"alpha^2 = {alpha * alpha:.6g} exceeds L*eta - eta^2 = {L * eta - eta * eta:.6g}; "
            "operator is not 1/L-cocoercive"
        )


def _block_zero(eta: float, alpha: float, b: np.ndarray) -> Optional[np.ndarray]:
    # u* = -A^{-1} b via the closed-form 2x2 block inverse
    s = eta * eta + alpha * alpha
    if s == 0.0:
        return None
    h = b.size // 2
    b1, b2 = b[:h], b[h:]
    x = -(eta * b1 - alpha * b2) / s
    y = -(alpha * b1 + eta * b2) / s
    return np.concatenate([x, y])


def make_rotation_operator(spec: LinearOperatorSpec, L: float) -> OperatorProblem:
    """Linear operator F(u) = A u + b, A = [[eta I, alpha I], [-alpha I, eta I]].

    The identities <F(u)-F(v), u-v> = eta ||u-v||^2 and
    ||F(u)-F(v)||^2 = (eta^2 + alpha^2) ||u-v||^2 make this family exactly
    1/L-cocoercive when eta^2 + alpha^2 <= L*eta; the hard worst-case curve
    is alpha^2 = L*eta - eta^2. Rejects parameters off the cocoercive set
    (e.g. the purely bilinear eta = 0, alpha > 0 case).
    """
    _check_cocoercive_params(spec.eta, spec.alpha, L)
    h = spec.half_dim
    eta, alpha, b = spec.eta, spec.alpha, spec.offset
    b1_ro, b2_ro = _frozen(b[:h]), _frozen(b[h:])

    def operator(u):
        x, y = u[:h], u[h:]
        return np.concatenate([eta * x + alpha * y + b1_ro, -alpha * x + eta * y + b2_ro])

    return OperatorProblem(
        dim=2 * h,
        operator=operator,
        L=float(L),
        u_star=_frozen(_block_zero(eta, alpha, b)),
        spec={"kind": "rotation", "eta": eta, "alpha": alpha, "b": _frozen(b)},
    )


def make_saddle_quadratic(
    eta: float, alpha: float, b1: np.ndarray, b2: np.ndarray, L: float
) -> OperatorProblem:
    """Saddle operator of phi(x, y) = eta/2 x'x - eta/2 y'y + alpha x'y + b1'x - b2'y.

    Returns [grad_x phi; -grad_y phi], computed from the gradient expressions
    of phi. Must coincide pointwise with the rotation-operator form of the
    same parameters; tests rely on these being independent code paths.
    """
    b1 = np.array(b1, dtype=float)
    b2 = np.array(b2, dtype=float)
    if b1.shape != b2.shape or b1.ndim != 1:
        raise ValueError("b1 and b2 must be 1-D vectors of equal length")
    _check_cocoercive_params(eta, alpha, L)
    h = b1.size
    b1_ro, b2_ro = _frozen(b1), _frozen(b2)

    def operator(u):
        x, y = u[:h], u[h:]
        gx = eta * x + alpha * y + b1_ro
        gy = -eta * y + alpha * x - b2_ro
        return np.concatenate([gx, -gy])

    b = np.concatenate([b1, b2])
    return OperatorProblem(
        dim=2 * h,
        operator=operator,
        L=float(L),
        u_star=_frozen(_block_zero(eta, alpha, b)),
        spec={"kind": "saddle", "eta": eta, "alpha": alpha, "b1": b1_ro, "b2": b2_ro},
    )


def gradient_as_operator(p: SmoothProblem) -> OperatorProblem:
    """View the gradient of a smooth convex function as a cocoercive operator."""
    return OperatorProblem(
        dim=p.dim, operator=p.grad, L=p.L, u_star=p.x_star, spec={"kind": "gradient", "of": p.spec}
    )


# ---------------------------------------------------------------------------
# sampled verification


@dataclass(frozen=True)
class VerifierReport:
    """Worst relative violations of the defining inequalities, per check."""

    checks: dict
    n_samples: int
    tol: float

    @property
    def worst(self) -> float:
        return max(self.checks.values())

    @property
    def passed(self) -> bool:
        return self.worst <= self.tol


def _ball_points(center: np.ndarray, radius: float, n: int, rng) -> np.ndarray:
    d = center.size
    raw = rng.standard_normal((n, d))
    raw /= np.linalg.norm(raw, axis=1, keepdims=True)
    r = radius * rng.random(n) ** (1.0 / d)
    return center[None, :] + raw * r[:, None]


def verify_smooth_convex(
    p: SmoothProblem, n_samples: int = 1000, radius: float = 1.0, seed: int = 0, tol: float = 1e-10
) -> VerifierReport:
    """Spot-check smoothness, the upper quadratic bound, and the
    interpolation inequality (1/2L)||grad f(y) - grad f(x)||^2 <=
    f(y) - f(x) - <grad f(x), y - x> on random pairs in a ball.

    Violations are reported relative to the scale of the terms involved;
    nothing is thrown, the report carries the worst violation per check.
    Deterministic for a fixed seed.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rng = np.random.default_rng(seed)
    center = p.x_star if p.x_star is not None else np.zeros(p.dim)
    X = _ball_points(center, radius, n_samples, rng)
    Y = _ball_points(center, radius, n_samples, rng)
    L = p.L

    worst_lip = -np.inf
    worst_ub = -np.inf
    worst_interp = -np.inf
    for x, y in zip(X, Y):
        fx, fy = p.value(x), p.value(y)
        gx, gy = p.grad(x), p.grad(y)
        dx = y - x
        dg = gy - gx
        gap = fy - fx - float(gx @ dx)
        scale = max(1.0, abs(fx), abs(fy), 0.5 * L * float(dx @ dx))

        lip = np.linalg.norm(dg) - L * np.linalg.norm(dx)
        worst_lip = max(worst_lip, lip / max(1.0, L * np.linalg.norm(dx)))
        worst_ub = max(worst_ub, (gap - 0.5 * L * float(dx @ dx)) / scale)
        worst_interp = max(worst_interp, (float(dg @ dg) / (2.0 * L) - gap) / scale)

    checks = {"lipschitz": worst_lip, "upper_bound": worst_ub, "interpolation": worst_interp}
    if p.x_star is not None:
        gstar = np.linalg.norm(p.grad(p.x_star))
        checks["stationarity"] = gstar - tol_zero(L, np.linalg.norm(p.x_star))
        if p.f_star is not None:
            checks["optimal_value"] = abs(p.value(p.x_star) - p.f_star) / max(1.0, abs(p.f_star))
    return VerifierReport(checks=checks, n_samples=n_samples, tol=tol)


def verify_cocoercive(
    p: OperatorProblem, n_samples: int = 1000, radius: float = 1.0, seed: int = 0, tol: float = 1e-10
) -> VerifierReport:
    """Spot-check monotonicity and 1/L-cocoercivity of the operator, plus the
    star inequality <F(u), u - u*> >= (1/L)||F(u)||^2 when u* is known."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rng = np.random.default_rng(seed)
    center = p.u_star if p.u_star is not None else np.zeros(p.dim)
    U = _ball_points(center, radius, n_samples, rng)
    V = _ball_points(center, radius, n_samples, rng)
    L = p.L

    worst_mon = -np.inf
    worst_coco = -np.inf
    worst_star = -np.inf
    for u, v in zip(U, V):
        Fu, Fv = p.operator(u), p.operator(v)
        dF = Fu - Fv
        du = u - v
        inner = float(dF @ du)
        scale = max(1.0, abs(inner), float(dF @ dF) / L)
        worst_mon = max(worst_mon, -inner / scale)
        worst_coco = max(worst_coco, (float(dF @ dF) / L - inner) / scale)
        if p.u_star is not None:
            gap = float(Fu @ (u - p.u_star))
            s = max(1.0, abs(gap), float(Fu @ Fu) / L)
            worst_star = max(worst_star, (float(Fu @ Fu) / L - gap) / s)

    checks = {"monotone": worst_mon, "cocoercive": worst_coco}
    if p.u_star is not None:
        checks["star_gap"] = worst_star
        checks["zero_at_star"] = float(
            np.linalg.norm(p.operator(p.u_star)) - tol_zero(L, np.linalg.norm(p.u_star))
        )
    return VerifierReport(checks=checks, n_samples=n_samples, tol=tol)


# ---------------------------------------------------------------------------
# serialization


def problem_keyvals(p) -> list:
    """(key, value) pairs describing a problem instance."""
    spec = p.spec
    kind = spec.get("kind")
    pairs = [("kind", kind), ("dim", p.dim), ("L", p.L)]
    if kind == "quadratic":
        pairs += [("Q", spec["Q"]), ("c", spec["c"])]
    elif kind == "logsumexp":
        pairs += [("rows", spec["rows"]), ("rho", spec["rho"])]
    elif kind == "rotation":
        pairs += [("eta", spec["eta"]), ("alpha", spec["alpha"]), ("b", spec["b"])]
    elif kind == "saddle":
        pairs += [
            ("eta", spec["eta"]),
            ("alpha", spec["alpha"]),
            ("b1", spec["b1"]),
            ("b2", spec["b2"]),
        ]
    else:
        raise ValueError(f"problem of kind {kind!r} is not serializable")
    if isinstance(p, SmoothProblem):
        if p.x_star is not None:
            pairs.append(("x_star", p.x_star))
        if p.f_star is not None:
            pairs.append(("f_star", p.f_star))
    elif p.u_star is not None:
        pairs.append(("u_star", p.u_star))
    return pairs


def problem_to_text(p) -> str:
    return kvdoc.dumps(problem_keyvals(p))


def problem_from_keyvals(doc: dict):
    """Rebuild a problem from parsed key-value entries (see problem_to_text)."""
    kind = doc["kind"]
    L = kvdoc.get_float(doc, "L")
    if kind == "quadratic":
        p = make_quadratic(kvdoc.get_matrix(doc, "Q"), kvdoc.get_vector(doc, "c"), L)
    elif kind == "logsumexp":
        p = make_logsumexp(kvdoc.get_matrix(doc, "rows"), kvdoc.get_float(doc, "rho"), L)
    elif kind == "rotation":
        b = kvdoc.get_vector(doc, "b")
        spec = LinearOperatorSpec(
            eta=kvdoc.get_float(doc, "eta"),
            alpha=kvdoc.get_float(doc, "alpha"),
            half_dim=b.size // 2,
            offset=b,
        )
        p = make_rotation_operator(spec, L)
    elif kind == "saddle":
        p = make_saddle_quadratic(
            kvdoc.get_float(doc, "eta"),
            kvdoc.get_float(doc, "alpha"),
            kvdoc.get_vector(doc, "b1"),
            kvdoc.get_vector(doc, "b2"),
            L,
        )
    else:
        raise ValueError(f"unknown problem kind {kind!r}")

    # stored optimum wins over the recomputed one so round-trips are exact
    if isinstance(p, SmoothProblem):
        if "x_star" in doc:
            p = replace(p, x_star=_frozen(kvdoc.get_vector(doc, "x_star")))
        if "f_star" in doc:
            p = replace(p, f_star=kvdoc.get_float(doc, "f_star"))
    elif "u_star" in doc:
        p = replace(p, u_star=_frozen(kvdoc.get_vector(doc, "u_star")))
    return p


def problem_from_text(text: str):
    return problem_from_keyvals(kvdoc.loads(text))
