"""Coefficient schedules for the accelerated methods.

Two schedule families drive the accelerated runs: the forward (b_k, B_k)
recursion behind the fast gradient method, and the backward A_k sequence
behind the gradient-norm-optimal final-iterate method, which must be
precomputed for a fixed horizon K before the first step. Both are exposed
as validated, serializable objects, together with the dense step-coefficient
table (beta) that certifies the A-sequence actually yields a method of the
required linear-span form.

The A-sequence is computed through its reciprocal: with D_n = 1/A_{K-n},
the backward definition of A collapses onto the same recursion that
generates B_k from B_0 = 1. Computing D forward with literally the same
arithmetic as the B recursion keeps the two schedules bitwise consistent
and avoids the cancellation the backward square-root form suffers for
small A. The backward form is still evaluated inside validate_schedule as
a residual check.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kvdoc

__all__ = [
    "FgmSchedule",
    "OgmgSchedule",
    "ValidationReport",
    "fgm_schedule",
    "ogmg_schedule",
    "ogmg_betas",
    "validate_schedule",
    "schedule_to_text",
    "schedule_from_text",
]

BETA_TABLE_MAX_K = 200  # dense K x K table; beyond this only the A-sequence is needed


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class FgmSchedule:
    """Forward averaging schedule: b_0 = B_0, b_k^2 = B_k = B_{k-1} + b_k."""

    K: int
    L: float
    b: np.ndarray
    B: np.ndarray
    a: np.ndarray  # a_k = B_k / (2L)


@dataclass(frozen=True)
class OgmgSchedule:
    """Backward schedule A_0 < ... < A_K = 1 with steps a_k = A_k - A_{k-1}, a_0 = A_0."""

    K: int
    A: np.ndarray
    a: np.ndarray


def _bB_recursion(K: int, B0: float) -> tuple[np.ndarray, np.ndarray]:
    # b_k is the positive root of b^2 - b - B_{k-1} = 0
    b = np.empty(K + 1)
    B = np.empty(K + 1)
    b[0] = B[0] = B0
    for k in range(1, K + 1):
        b[k] = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * B[k - 1]))
        B[k] = B[k - 1] + b[k]
    return b, B


def fgm_schedule(K: int, B0: float = 1.0, L: float = 1.0) -> FgmSchedule:
    """Coefficients for the fast gradient method over K steps.

    Parameters
    ----------
    K : int
        Horizon, at least 1.
    B0 : float
        Initial weight; the default 1 is the one value for which b_0 = B_0
        and b_0^2 = B_0 hold simultaneously.
    L : float
        Smoothness constant entering the weights a_k = B_k / (2L).
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    if B0 <= 0 or L <= 0:
        raise ValueError("B0 and L must be positive")
    b, B = _bB_recursion(K, float(B0))
    return FgmSchedule(K=K, L=float(L), b=_frozen(b), B=_frozen(B), a=_frozen(B / (2.0 * L)))


def ogmg_schedule(K: int) -> OgmgSchedule:
    """Backward A-sequence for the fixed-horizon small-gradient method.

    A_K = 1 and A_k is the unique solution in (0, A_{k+1}) of
    A_k = A_{k+1} (1 + A_{k+1}/2 - sqrt(A_{k+1} (4 + A_{k+1})) / 2),
    computed forward through the reciprocal sequence D_n = 1/A_{K-n}.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    _, D = _bB_recursion(K, 1.0)
    A = 1.0 / D[::-1]
    a = np.empty(K + 1)
    a[0] = A[0]
    a[1:] = np.diff(A)
    return OgmgSchedule(K=K, A=_frozen(A), a=_frozen(a))


def ogmg_betas(s: OgmgSchedule) -> np.ndarray:
    """Dense step-coefficient table beta[j, k] for 0 <= j <= k <= K-1.

    The table realizes the iterates as x_k = x_0 - (1/L) sum_j beta[j, k] g_j.
    The diagonal is 1 by definition; the last column comes from the equality
    form of the growth-limiting condition,
    beta[k, K-1] = A_{k+1}/a_{k+1} - a_{k+1}/A_K, and interior entries follow
    the backward recursion
    A_k beta[j, k-1] = A_{k+1} beta[j, k] - a_{k+1} A_{j+1}/a_{j+1}
                       - a_{j+1} A_{k+1}/a_{k+1}   (j <= k-2).
    Entries with j > k are zero padding. O(K^2) memory, so capped at
    K <= BETA_TABLE_MAX_K; the running method itself only needs {A_k}.
    """
    K, A, a = s.K, s.A, s.a
    if K > BETA_TABLE_MAX_K:
        raise ValueError(f"beta table is dense in K^2; capped at K <= {BETA_TABLE_MAX_K}")
    beta = np.zeros((K, K))
    for k in range(K):
        beta[k, k] = 1.0
    for j in range(K - 1):
        beta[j, K - 1] = A[j + 1] / a[j + 1] - a[j + 1] / A[K]
    for k in range(K - 1, 0, -1):
        for j in range(k - 1):
            beta[j, k - 1] = (
                A[k + 1] * beta[j, k]
                - a[k + 1] * A[j + 1] / a[j + 1]
                - a[j + 1] * A[k + 1] / a[k + 1]
            ) / A[k]
    return beta


@dataclass(frozen=True)
class ValidationReport:
    """Signed residuals per schedule condition; residual <= tolerance passes."""

    kind: str
    residuals: dict
    tolerances: dict

    @property
    def passed(self) -> bool:
        return all(self.residuals[k] <= self.tolerances[k] for k in self.residuals)

    def failures(self) -> dict:
        return {
            k: r for k, r in self.residuals.items() if r > self.tolerances[k]
        }


def _validate_fgm(s: FgmSchedule) -> ValidationReport:
    k = np.arange(s.K + 1, dtype=float)
    res = {
        "b0_equals_B0": abs(s.b[0] - s.B[0]) / s.B[0],
        "root_identity": float(np.max(np.abs(s.b[1:] ** 2 - s.B[1:]) / s.B[1:])) if s.K >= 1 else 0.0,
        "partial_sum": float(np.max(np.abs(s.B - np.cumsum(s.b)) / s.B)),
        "weights": float(np.max(np.abs(s.a - s.B / (2.0 * s.L)) / s.a)),
        "growth_quadratic": float(np.max(((k + 1) * (k + 2) / 4.0 - s.B) / s.B)),
        "growth_cubic_sum": float(
            np.max(((k + 1) * (k + 2) * (k + 3) / 12.0 - np.cumsum(s.B)) / np.cumsum(s.B))
        ),
    }
    tol = {
        "b0_equals_B0": 1e-12,
        "root_identity": 1e-12,
        "partial_sum": 1e-12,
        "weights": 1e-12,
        "growth_quadratic": 1e-9,
        "growth_cubic_sum": 1e-9,
    }
    return ValidationReport(kind="fgm", residuals=res, tolerances=tol)


def _validate_ogmg(s: OgmgSchedule) -> ValidationReport:
    K, A, a = s.K, s.A, s.a
    n = np.arange(K + 1, dtype=float)
    D = 1.0 / A[::-1]

    # backward closed form, evaluated as a residual of the forward sequence
    nxt = A[1:]
    back = nxt * (1.0 + 0.5 * nxt - 0.5 * np.sqrt(nxt * (4.0 + nxt)))
    res = {
        "terminal": abs(A[K] - 1.0),
        "positive_steps": float(-np.min(a)),
        "recursive_1": float(
            np.max(np.abs(1.0 / A[:-1] - 1.0 / A[1:] - A[1:] / a[1:]) * A[:-1])
        ),
        "backward_expression": float(np.max(np.abs(A[:-1] - back) / A[:-1])),
        "reciprocal_lower_bound": float(np.max(((n + 2) ** 2 / 4.0 - D) / D)),
        "final_step_ratio": (a[K] / A[K] - (np.sqrt(5.0) - 1.0) / 2.0) / ((np.sqrt(5.0) - 1.0) / 2.0),
        "max_growth": float(np.max(a[1:] ** 2 / A[1:] - A[K]) / A[K]),
    }
    tol = {
        "terminal": 1e-14,
        "positive_steps": 0.0,
        "recursive_1": 1e-12,
        "backward_expression": 1e-12,
        "reciprocal_lower_bound": 1e-9,
        "final_step_ratio": 1e-12,
        "max_growth": 1e-12,
    }

    if K <= BETA_TABLE_MAX_K:
        beta = ogmg_betas(s)
        res["beta_nonnegative"] = float(-np.min(beta))
        worst1 = 0.0
        worst2 = 0.0
        for q in range(K - 1):
            lhs = beta[q, K - 1] + a[q + 1] / A[K]
            rhs = A[q + 1] / a[q + 1]
            worst1 = max(worst1, abs(lhs - rhs) / rhs)
        for kk in range(1, K):
            for j in range(kk):
                lhs = A[kk + 1] * beta[j, kk]
                rhs = (
                    A[kk] * beta[j, kk - 1]
                    + a[kk + 1] * A[j + 1] / a[j + 1]
                    + a[j + 1] * A[kk + 1] / a[kk + 1]
                )
                worst2 = max(worst2, abs(lhs - rhs) / max(1.0, abs(rhs)))
        res["growth_condition_equality"] = worst1
        res["step_consistency"] = worst2
        tol["beta_nonnegative"] = 1e-12
        tol["growth_condition_equality"] = 1e-12
        tol["step_consistency"] = 1e-10
    return ValidationReport(kind="ogmg", residuals=res, tolerances=tol)


def validate_schedule(s) -> ValidationReport:
    """Check every defining condition of a schedule and report residuals.

    For the backward schedule this includes the step recursion residual,
    which is what actually rejects sequences growing faster than
    quadratically: the max-growth inequality a_{k+1}^2/A_{k+1} <= A_K holds
    for every increasing positive sequence (a_{k+1} <= A_{k+1} <= A_K), so
    it can never fire on its own.
    """
    if isinstance(s, FgmSchedule):
        return _validate_fgm(s)
    if isinstance(s, OgmgSchedule):
        return _validate_ogmg(s)
    raise TypeError(f"not a schedule: {type(s).__name__}")


def schedule_to_text(s) -> str:
    if isinstance(s, FgmSchedule):
        pairs = [("kind", "fgm"), ("K", s.K), ("L", s.L), ("b", s.b), ("B", s.B), ("a", s.a)]
    elif isinstance(s, OgmgSchedule):
        pairs = [("kind", "ogmg"), ("K", s.K), ("A", s.A), ("a", s.a)]
    else:
        raise TypeError(f"not a schedule: {type(s).__name__}")
    return kvdoc.dumps(pairs)


def schedule_from_text(text: str):
    doc = kvdoc.loads(text)
    kind = doc["kind"]
    K = kvdoc.get_int(doc, "K")
    if kind == "fgm":
        return FgmSchedule(
            K=K,
            L=kvdoc.get_float(doc, "L"),
            b=_frozen(kvdoc.get_vector(doc, "b")),
            B=_frozen(kvdoc.get_vector(doc, "B")),
            a=_frozen(kvdoc.get_vector(doc, "a")),
        )
    if kind == "ogmg":
        return OgmgSchedule(
            K=K, A=_frozen(kvdoc.get_vector(doc, "A")), a=_frozen(kvdoc.get_vector(doc, "a"))
        )
    raise ValueError(f"unknown schedule kind {kind!r}")
