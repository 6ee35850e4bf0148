"""Iteration schemes that make gradients (or operator values) small.

Seven runners, each producing an immutable step-by-step Trace that the
certificate module can re-check offline: plain gradient descent, the fast
gradient method, the fixed-horizon small-gradient method (which must know
its final iteration count up front and cannot be warm-extended), the
two-phase composition of the last two, and, on cocoercive operators,
plain descent-ascent, Krasnoselskii-Mann averaging, and anchored (Halpern)
iteration.

Every runner calls the gradient/operator oracle exactly once per recorded
point and stores that value verbatim in the trace; certificates recompute
nothing, so a trace is a complete witness of the run. Non-finite oracle
output aborts immediately with the offending step index, since a
certificate over NaNs would be vacuous.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .problems import OperatorProblem, SmoothProblem
from .schedules import (
    FgmSchedule,
    OgmgSchedule,
    fgm_schedule,
    ogmg_schedule,
    validate_schedule,
)

__all__ = [
    "Trace",
    "GdaParams",
    "HalpernParams",
    "NonexpansiveMap",
    "run_gd",
    "run_fgm",
    "run_ogmg",
    "run_fgm_then_ogmg",
    "run_gda",
    "run_km",
    "run_halpern",
]


@dataclass(frozen=True)
class Trace:
    """Complete record of one run: iterates, oracle values, and bookkeeping.

    Attributes
    ----------
    method : str
        One of "gd", "fgm", "ogmg", "fgm+ogmg", "gda", "km", "halpern".
    K : int
        Horizon; arrays hold K+1 records, one per iterate.
    x, g : (K+1, d) arrays
        Iterates and the oracle value at each iterate.
    grad_norm_sq : (K+1,) array
        Squared norms of g, precomputed once.
    values : (K+1,) array or None
        f(x_k) for smooth problems; None for operator problems.
    aux : dict
        Method-specific sequences (fast gradient: v_0..v_{K+1}; fixed-horizon
        method: y, v, and the weighted gradient accumulator).
    split : int or None
        For the composed run, the index where the second phase starts.
    phases : tuple
        For the composed run, the two underlying single-method traces.
    oracle_calls : int
        Number of gradient/operator oracle invocations made by the run.
    """

    method: str
    K: int
    x: np.ndarray
    g: np.ndarray
    grad_norm_sq: np.ndarray
    values: Optional[np.ndarray]
    problem: object
    schedule: object = None
    aux: dict = field(default_factory=dict)
    params: dict = field(default_factory=dict)
    split: Optional[int] = None
    phases: tuple = ()
    oracle_calls: int = 0

    def __post_init__(self):
        if self.x.shape[0] != self.K + 1 or self.g.shape[0] != self.K + 1:
            raise ValueError(f"trace must hold K+1 = {self.K + 1} records")
        for arr in (self.x, self.g, self.grad_norm_sq, self.values, *self.aux.values()):
            if isinstance(arr, np.ndarray):
                arr.setflags(write=False)

    @property
    def grad_norms(self) -> np.ndarray:
        return np.sqrt(self.grad_norm_sq)


@dataclass(frozen=True)
class GdaParams:
    """Step size for descent-ascent; must satisfy 0 < eta < 2/L at run time."""

    eta: float


@dataclass(frozen=True)
class HalpernParams:
    """Anchor weights lambda_k = 1/(k+1) and the certified weight pair.

    lambda_k equals B_k / (A_k L + B_k) for B_k = k+1 and A_k = k(k+1)/L,
    which is the form the potential certificate uses.
    """

    K: int
    L: float

    @property
    def lambdas(self) -> np.ndarray:
        return 1.0 / (np.arange(self.K + 1) + 1.0)

    def weight_A(self, k: int) -> float:
        return k * (k + 1) / self.L

    def weight_B(self, k: int) -> float:
        return float(k + 1)


class NonexpansiveMap:
    """T = Id - (2/L) F for a 1/L-cocoercive F; nonexpansive by construction.

    Carrying F explicitly lets the averaged iteration evaluate its step in
    displacement form, which avoids the cancellation of forming T(u) - u
    near a fixed point and makes the equivalence with descent-ascent exact
    rather than up to rounding.
    """

    def __init__(self, operator: Callable[[np.ndarray], np.ndarray], L: float):
        if L <= 0:
            raise ValueError("L must be positive")
        self.operator = operator
        self.L = float(L)

    @classmethod
    def from_problem(cls, p: OperatorProblem) -> "NonexpansiveMap":
        return cls(p.operator, p.L)

    def __call__(self, u: np.ndarray) -> np.ndarray:
        return u - (2.0 / self.L) * self.operator(u)


def _checked(vec: np.ndarray, k: int, what: str) -> np.ndarray:
    if not np.all(np.isfinite(vec)):
        raise FloatingPointError(f"non-finite {what} at step k={k}")
    return vec


def _norms_sq(g: np.ndarray) -> np.ndarray:
    return np.einsum("ij,ij->i", g, g)


def _smooth_records(p: SmoothProblem, x: np.ndarray) -> np.ndarray:
    vals = np.array([p.value(xi) for xi in x])
    if not np.all(np.isfinite(vals)):
        raise FloatingPointError("non-finite function value along trace")
    return vals


def run_gd(p: SmoothProblem, x0: np.ndarray, K: int) -> Trace:
    """Gradient descent x_{k+1} = x_k - (1/L) grad f(x_k) for K steps."""
    if K < 1:
        raise ValueError("K must be >= 1")
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (p.dim,):
        raise ValueError(f"x0 must have shape ({p.dim},)")
    L = p.L
    x = np.empty((K + 1, p.dim))
    g = np.empty((K + 1, p.dim))
    x[0] = x0
    for k in range(K):
        g[k] = _checked(p.grad(x[k]), k, "gradient")
        x[k + 1] = x[k] - g[k] / L
    g[K] = _checked(p.grad(x[K]), K, "gradient")
    return Trace(
        method="gd",
        K=K,
        x=x,
        g=g,
        grad_norm_sq=_norms_sq(g),
        values=_smooth_records(p, x),
        problem=p,
        oracle_calls=K + 1,
    )


def run_fgm(p: SmoothProblem, x0: np.ndarray, K: int, s: Optional[FgmSchedule] = None) -> Trace:
    """Fast gradient method with the forward averaging schedule.

    x_k = (B_{k-1}/B_k)(x_{k-1} - grad f(x_{k-1})/L) + (b_k/B_k) v_k with
    v_k = v_{k-1} - (b_{k-1}/L) grad f(x_{k-1}), v_0 = x_0. The trace
    records v_0 .. v_{K+1}; the extra final entry closes the telescoping
    bound the certificate checks.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    if s is None:
        s = fgm_schedule(K, B0=1.0, L=p.L)
    if s.K != K:
        raise ValueError(f"schedule horizon {s.K} does not match K={K}")
    if s.L != p.L:
        raise ValueError(f"schedule built for L={s.L}, problem has L={p.L}")
    rep = validate_schedule(s)
    if not rep.passed:
        raise ValueError(f"invalid schedule: {rep.failures()}")

    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (p.dim,):
        raise ValueError(f"x0 must have shape ({p.dim},)")
    L, b, B = p.L, s.b, s.B
    x = np.empty((K + 1, p.dim))
    g = np.empty((K + 1, p.dim))
    v = np.empty((K + 2, p.dim))
    x[0] = x0
    v[0] = x0
    g[0] = _checked(p.grad(x[0]), 0, "gradient")
    for k in range(1, K + 1):
        v[k] = v[k - 1] - (b[k - 1] / L) * g[k - 1]
        x[k] = (B[k - 1] / B[k]) * (x[k - 1] - g[k - 1] / L) + (b[k] / B[k]) * v[k]
        g[k] = _checked(p.grad(x[k]), k, "gradient")
    v[K + 1] = v[K] - (b[K] / L) * g[K]
    return Trace(
        method="fgm",
        K=K,
        x=x,
        g=g,
        grad_norm_sq=_norms_sq(g),
        values=_smooth_records(p, x),
        problem=p,
        schedule=s,
        aux={"v": v},
        oracle_calls=K + 1,
    )


def run_ogmg(p: SmoothProblem, x0: np.ndarray, K: int, s: Optional[OgmgSchedule] = None) -> Trace:
    """Fixed-horizon small-gradient method driven by the backward A-sequence.

    For k = 1 .. K-1:
        y_{k-1} = x_{k-1} - grad f(x_{k-1})/L
        x_k     = (A_k/A_{k+1}) y_{k-1} + (a_{k+1}/A_{k+1}) v_{k-1}
                  - g_{k-1} / (a_{k+1} L)
        v_k     = v_{k-1} - (A_{k+1}/a_{k+1}) grad f(x_k)/L
        g_k     = g_{k-1} + a_{k+1} grad f(x_k)
    seeded with v_0 = x_0 - (A_1/(a_1 L)) grad f(x_0), g_0 = a_1 grad f(x_0),
    and closed by the distinct final step x_K = y_{K-1} - g_{K-1}/(A_K L).
    The horizon is baked into the schedule; there is no warm extension.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    if s is None:
        s = ogmg_schedule(K)
    if s.K != K:
        raise ValueError(
            f"schedule horizon {s.K} does not match K={K}; "
            "this method cannot run past the horizon it was built for"
        )
    rep = validate_schedule(s)
    if not rep.passed:
        raise ValueError(f"invalid schedule: {rep.failures()}")

    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (p.dim,):
        raise ValueError(f"x0 must have shape ({p.dim},)")
    L, A, a = p.L, s.A, s.a
    x = np.empty((K + 1, p.dim))
    g = np.empty((K + 1, p.dim))
    y = np.empty((K, p.dim))
    v = np.empty((K, p.dim))
    gacc = np.empty((K, p.dim))

    x[0] = x0
    g[0] = _checked(p.grad(x[0]), 0, "gradient")
    y[0] = x[0] - g[0] / L
    v[0] = x[0] - (A[1] / (a[1] * L)) * g[0]
    gacc[0] = a[1] * g[0]
    for k in range(1, K):
        x[k] = (A[k] / A[k + 1]) * y[k - 1] + (a[k + 1] / A[k + 1]) * v[k - 1] - gacc[k - 1] / (
            a[k + 1] * L
        )
        g[k] = _checked(p.grad(x[k]), k, "gradient")
        y[k] = x[k] - g[k] / L
        v[k] = v[k - 1] - (A[k + 1] / a[k + 1]) * g[k] / L
        gacc[k] = gacc[k - 1] + a[k + 1] * g[k]
    x[K] = y[K - 1] - gacc[K - 1] / (A[K] * L)
    g[K] = _checked(p.grad(x[K]), K, "gradient")
    return Trace(
        method="ogmg",
        K=K,
        x=x,
        g=g,
        grad_norm_sq=_norms_sq(g),
        values=_smooth_records(p, x),
        problem=p,
        schedule=s,
        aux={"y": y, "v": v, "gacc": gacc},
        oracle_calls=K + 1,
    )


def run_fgm_then_ogmg(p: SmoothProblem, x0: np.ndarray, K: int) -> Trace:
    """Fast gradient method for floor(K/2) steps, then the fixed-horizon
    small-gradient method for the remaining ceil(K/2) from the seam point.

    The seam point is recorded once but its gradient is evaluated by both
    phases, so the run spends K+2 oracle calls for K+1 records.
    """
    if K < 2:
        raise ValueError("K must be >= 2")
    K1 = K // 2
    K2 = K - K1
    t1 = run_fgm(p, x0, K1)
    t2 = run_ogmg(p, t1.x[K1], K2)
    x = np.vstack([t1.x, t2.x[1:]])
    g = np.vstack([t1.g, t2.g[1:]])
    return Trace(
        method="fgm+ogmg",
        K=K,
        x=x,
        g=g,
        grad_norm_sq=_norms_sq(g),
        values=np.concatenate([t1.values, t2.values[1:]]),
        problem=p,
        split=K1,
        phases=(t1, t2),
        oracle_calls=t1.oracle_calls + t2.oracle_calls,
    )


def run_gda(p: OperatorProblem, u0: np.ndarray, K: int, params: Optional[GdaParams] = None) -> Trace:
    """Descent-ascent u_{k+1} = u_k - eta F(u_k); default eta = 1/L."""
    if K < 1:
        raise ValueError("K must be >= 1")
    if params is None:
        params = GdaParams(eta=1.0 / p.L)
    eta = params.eta
    if not 0.0 < eta < 2.0 / p.L:
        raise ValueError(f"eta must lie in (0, 2/L) = (0, {2.0 / p.L:.6g}), got {eta}")
    u0 = np.asarray(u0, dtype=float)
    if u0.shape != (p.dim,):
        raise ValueError(f"u0 must have shape ({p.dim},)")
    u = np.empty((K + 1, p.dim))
    g = np.empty((K + 1, p.dim))
    u[0] = u0
    for k in range(K):
        g[k] = _checked(p.operator(u[k]), k, "operator value")
        u[k + 1] = u[k] - eta * g[k]
    g[K] = _checked(p.operator(u[K]), K, "operator value")
    return Trace(
        method="gda",
        K=K,
        x=u,
        g=g,
        grad_norm_sq=_norms_sq(g),
        values=None,
        problem=p,
        params={"eta": eta},
        oracle_calls=K + 1,
    )


def run_km(T, u0: np.ndarray, K: int, alphas=0.5) -> Trace:
    """Averaged iteration u_{k+1} = (1 - alpha_k) u_k + alpha_k T(u_k).

    When T is a NonexpansiveMap (T = Id - (2/L) F), the step is evaluated
    in displacement form u_k - ((2 * alpha_k)/L) F(u_k), the identical
    arithmetic of run_gda with eta_k = 2 alpha_k / L; the recorded g is then
    F(u_k). For a bare callable T the averaged form u_k + alpha_k (T(u_k) -
    u_k) is used and g records the fixed-point residual u_k - T(u_k).
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    u0 = np.asarray(u0, dtype=float)
    alphas = np.broadcast_to(np.asarray(alphas, dtype=float), (K,)).copy()
    if np.any(alphas <= 0.0) or np.any(alphas >= 1.0):
        raise ValueError("every alpha_k must lie in (0, 1)")

    u = np.empty((K + 1, u0.size))
    g = np.empty((K + 1, u0.size))
    u[0] = u0
    if isinstance(T, NonexpansiveMap):
        L = T.L
        for k in range(K):
            g[k] = _checked(T.operator(u[k]), k, "operator value")
            u[k + 1] = u[k] - ((2.0 * alphas[k]) / L) * g[k]
        g[K] = _checked(T.operator(u[K]), K, "operator value")
    else:
        for k in range(K):
            Tu = _checked(np.asarray(T(u[k]), dtype=float), k, "map value")
            g[k] = u[k] - Tu
            u[k + 1] = u[k] + alphas[k] * (Tu - u[k])
        g[K] = u[K] - _checked(np.asarray(T(u[K]), dtype=float), K, "map value")
    return Trace(
        method="km",
        K=K,
        x=u,
        g=g,
        grad_norm_sq=_norms_sq(g),
        values=None,
        problem=T,
        params={"alphas": alphas},
        oracle_calls=K + 1,
    )


def run_halpern(p: OperatorProblem, u0: np.ndarray, K: int) -> Trace:
    """Anchored iteration u_k = (1/(k+1)) u_0 + (k/(k+1))(u_{k-1} - (2/L) F(u_{k-1})).

    The anchor weight applies while producing u_k (not u_{k+1}); under this
    convention u_1 moves away from u_0 and the certified envelope
    L D / (k + 1) holds from the first step. The commonly displayed variant
    that anchors while producing u_{k+1} leaves u_1 = u_0 and fails that
    bound on F = L * Id, so it is deliberately not implemented.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    u0 = np.asarray(u0, dtype=float)
    if u0.shape != (p.dim,):
        raise ValueError(f"u0 must have shape ({p.dim},)")
    L = p.L
    params = HalpernParams(K=K, L=L)
    lam = params.lambdas
    u = np.empty((K + 1, p.dim))
    g = np.empty((K + 1, p.dim))
    u[0] = u0
    for k in range(1, K + 1):
        g[k - 1] = _checked(p.operator(u[k - 1]), k - 1, "operator value")
        u[k] = lam[k] * u0 + (1.0 - lam[k]) * (u[k - 1] - (2.0 / L) * g[k - 1])
    g[K] = _checked(p.operator(u[K]), K, "operator value")
    return Trace(
        method="halpern",
        K=K,
        x=u,
        g=g,
        grad_norm_sq=_norms_sq(g),
        values=None,
        problem=p,
        params={"lambdas": lam},
        oracle_calls=K + 1,
    )
