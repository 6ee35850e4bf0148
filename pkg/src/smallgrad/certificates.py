"""Certificates that replay a method's per-step analysis on a recorded trace.

A certificate re-queries the problem oracle at every recorded point, forms
the potential C_k that the method's convergence argument keeps non-increasing
(or bounded), and reports the worst violation of the per-step inequality
together with any side conditions the argument needs.  Reports are data: a
failed inequality never raises.  Malformed inputs (wrong method, missing
optimum, horizon mismatch) raise ValueError, since no meaningful report
exists for them.

Two tolerance families are used throughout:

* potential inequalities: tau  = 1e-9 * max(1, |C_0|)
* closed-form envelopes:  tau' = 1e-8 * envelope(0)

Checkers that need the optimum (check_fgm, check_gda) are test-suite tools;
check_ogmg and check_halpern are optimum-free and safe to run on problems
whose solution is unknown.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from . import kvdoc


def potential_tol(c0):
    """Tolerance for per-step potential inequalities, from the value of C_0."""
    return 1e-9 * max(1.0, abs(float(c0)))


def envelope_tol(bound0):
    """Tolerance for rate envelopes, from the envelope value at k = 0."""
    return 1e-8 * float(bound0)


@dataclass(frozen=True)
class SideCheck:
    """One named scalar condition attached to a certificate.

    violation is the largest amount by which the condition was exceeded
    (negative when it holds with room to spare); the check passes when
    violation <= tol.
    """

    name: str
    violation: float
    tol: float

    @property
    def passed(self):
        return bool(self.violation <= self.tol)


@dataclass(frozen=True)
class CertificateReport:
    """Outcome of replaying one potential-function argument on a trace.

    Parameters
    ----------
    method : str
        Method tag of the certified trace.
    potential : (K+1,) ndarray
        C_k evaluated at every recorded step.
    delta : (K+1,) ndarray
        C_k - C_{k-1}; delta[0] = 0.
    slack : (K+1,) ndarray
        Allowed telescoping slack E_k for the transition ending at k;
        zero where the argument allows none.
    violation : (K+1,) ndarray
        Amount by which the asserted inequality at step k was exceeded.
        Rows where the argument asserts nothing hold 0.
    tol : float
        potential_tol(C_0); the row inequalities pass iff
        max(violation) <= tol.
    side_checks : tuple of SideCheck
        Auxiliary conditions (oracle replay consistency, averaged or
        terminal bounds, envelopes), each with its own tolerance.
    """

    method: str
    potential: np.ndarray
    delta: np.ndarray
    slack: np.ndarray
    violation: np.ndarray
    tol: float
    side_checks: Tuple[SideCheck, ...] = ()

    def __post_init__(self):
        for name in ("potential", "delta", "slack", "violation"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def K(self):
        return len(self.potential) - 1

    @property
    def worst_violation(self):
        return float(np.max(self.violation))

    @property
    def passed(self):
        rows_ok = self.worst_violation <= self.tol
        return bool(rows_ok and all(sc.passed for sc in self.side_checks))

    def side(self, name):
        """Look up a side check by name."""
        for sc in self.side_checks:
            if sc.name == name:
                return sc
        raise KeyError("no side check named '%s'" % name)


def _require_method(trace, expected, checker):
    if trace.method != expected:
        raise ValueError(
            "%s expects a '%s' trace, got '%s'" % (checker, expected, trace.method)
        )


def _schedule_for(trace, s, checker):
    s = trace.schedule if s is None else s
    if s is None:
        raise ValueError("%s needs the schedule the trace was run with" % checker)
    if s.K != trace.K:
        raise ValueError(
            "schedule horizon K=%d does not match trace horizon K=%d" % (s.K, trace.K)
        )
    return s


def _replay_smooth(trace, p):
    f = np.array([float(p.value(xk)) for xk in trace.x])
    g = np.stack([np.asarray(p.grad(xk), dtype=float) for xk in trace.x])
    return f, g


def _replay_operator(trace, p):
    return np.stack([np.asarray(p.operator(uk), dtype=float) for uk in trace.x])


def _sq_norms(rows):
    return np.einsum("kd,kd->k", rows, rows)


def _replay_side(trace, g, f=None):
    # Recorded numbers must agree with a fresh oracle replay at the recorded
    # points; a trace whose stored values were edited fails here even when
    # the stored numbers are internally consistent.
    diff = trace.g - g
    gscale = 1.0 + float(np.sqrt(np.max(_sq_norms(g))))
    worst = float(np.sqrt(np.max(_sq_norms(diff)))) / gscale
    if f is not None and trace.values is not None:
        fscale = 1.0 + float(np.max(np.abs(f)))
        worst = max(worst, float(np.max(np.abs(trace.values - f))) / fscale)
    return SideCheck("oracle_replay", worst, 1e-12)


def _f_star(p):
    if p.f_star is not None:
        return float(p.f_star)
    if p.x_star is not None:
        return float(p.value(p.x_star))
    return None


def check_gd(trace, p):
    """Certify a gradient-descent trace with step 1/L.

    Asserts that C_k = (k/L)||grad f(x_k)||^2 + f(x_k) is non-increasing,
    and that the running average of squared gradient norms stays below
    2L(f(x_0) - f(x_{k+1}))/(k+1), the bound that needs no convexity.

    Parameters
    ----------
    trace : Trace
        Output of run_gd.
    p : SmoothProblem

    Returns
    -------
    CertificateReport
    """
    _require_method(trace, "gd", "check_gd")
    L, K = p.L, trace.K
    f, g = _replay_smooth(trace, p)
    gns = _sq_norms(g)

    k = np.arange(K + 1, dtype=float)
    C = (k / L) * gns + f
    delta = np.zeros(K + 1)
    delta[1:] = np.diff(C)
    slack = np.zeros(K + 1)
    violation = delta - slack
    tol = potential_tol(C[0])

    counts = np.arange(1, K + 1, dtype=float)
    avg = np.cumsum(gns)[:K] / counts
    avg_bound = 2.0 * L * (f[0] - f[1:]) / counts
    averaged = SideCheck("averaged_grad_bound", float(np.max(avg - avg_bound)), tol)

    return CertificateReport(
        "gd", C, delta, slack, violation, tol,
        (_replay_side(trace, g, f), averaged),
    )


def check_fgm(trace, p, s=None):
    """Certify a fast-gradient trace against its telescoping potential.

    The potential C_k = sum_{i<k} a_i ||grad f(x_i)||^2 + B_k (f(x_k) - f*)
    may rise by at most E_k = (L/2)(||x* - v_k||^2 - ||x* - v_{k+1}||^2)
    per step.  Side checks assert the terminal budget
    C_k <= B_0 (f(x_0) - f*) + (L/2)||x* - x_0||^2, the weighted gradient
    sum sum_{i<=k} (B_i/2L)||grad f(x_i)||^2 against the same budget, and
    the running-minimum envelope 18 L^2 D^2 / ((k+1)(k+2)(k+3)).

    Requires p.x_star: this certificate is a test-suite tool, not a
    production monitor.
    """
    _require_method(trace, "fgm", "check_fgm")
    s = _schedule_for(trace, s, "check_fgm")
    if p.x_star is None:
        raise ValueError("check_fgm requires a problem with known x_star")
    L, K = p.L, trace.K
    f_star = _f_star(p)
    f, g = _replay_smooth(trace, p)
    gns = _sq_norms(g)

    v = trace.aux["v"]
    dsq = _sq_norms(v - p.x_star[None, :])
    partial = np.zeros(K + 1)
    partial[1:] = np.cumsum(s.a * gns)[:K]
    C = partial + s.B * (f - f_star)
    delta = np.zeros(K + 1)
    delta[1:] = np.diff(C)
    slack = np.zeros(K + 1)
    slack[1:] = 0.5 * L * (dsq[1 : K + 1] - dsq[2 : K + 2])
    violation = delta - slack
    tol = potential_tol(C[0])

    d0_sq = float(np.dot(trace.x[0] - p.x_star, trace.x[0] - p.x_star))
    budget = C[0] + 0.5 * L * d0_sq
    terminal = SideCheck("terminal_budget", float(np.max(C - budget)), tol)
    weighted = np.cumsum((s.B / (2.0 * L)) * gns)
    weighted_sum = SideCheck("weighted_grad_sum", float(np.max(weighted - budget)), tol)

    kk = np.arange(K + 1, dtype=float)
    env = 18.0 * L**2 * d0_sq / ((kk + 1.0) * (kk + 2.0) * (kk + 3.0))
    mins = np.minimum.accumulate(gns)
    min_grad = SideCheck(
        "min_grad_envelope", float(np.max(mins - env)), envelope_tol(env[0])
    )

    return CertificateReport(
        "fgm", C, delta, slack, violation, tol,
        (_replay_side(trace, g, f), terminal, weighted_sum, min_grad),
    )


def check_ogmg(trace, p, s=None):
    """Certify a fixed-horizon trace anchored at its own final point.

    The potential
    C_k = A_k [ (1/2L)||grad f(x_k)||^2 + (1/2L)||grad f(x_K)||^2
                + f(x_k) - f(x_K) ]
    is not monotone step by step; the argument only needs C_K <= C_0, which
    is what the violation row at k = K records.  When f* is available the
    final squared gradient norm is also checked against
    16 L (f(x_0) - f*) / (K+2)^2.  No optimum is required otherwise.
    """
    _require_method(trace, "ogmg", "check_ogmg")
    s = _schedule_for(trace, s, "check_ogmg")
    L, K = p.L, trace.K
    f, g = _replay_smooth(trace, p)
    gns = _sq_norms(g)

    C = s.A * (gns / (2.0 * L) + gns[K] / (2.0 * L) + f - f[K])
    delta = np.zeros(K + 1)
    delta[1:] = np.diff(C)
    slack = np.zeros(K + 1)
    violation = np.zeros(K + 1)
    violation[K] = C[K] - C[0]
    tol = potential_tol(C[0])

    side = [_replay_side(trace, g, f)]
    f_star = _f_star(p)
    if f_star is not None:
        bound = 16.0 * L * (f[0] - f_star) / (K + 2.0) ** 2
        side.append(SideCheck("final_rate", float(gns[K] - bound), tol))

    return CertificateReport("ogmg", C, delta, slack, violation, tol, tuple(side))


def check_gda(trace, p):
    """Certify a forward-step trace on a cocoercive operator.

    For the analyzed step 1/L the potential
    C_k = (k/2L)||F(u_k)||^2 + <F(u_k), u_k - u*> may rise by at most
    (L/2)(||u_k - u*||^2 - ||u_{k+1} - u*||^2) per step, and the operator
    norm obeys the envelope L||u_0 - u*|| / sqrt(k/2 + 1).  The slack for
    the last transition needs u_{K+1}, which is recomputed here from the
    recorded final operator value.  For any other step in (0, 2/L) the
    potential rows are reported but not asserted, and only the operator
    norm monotonicity is checked.

    Requires p.u_star.
    """
    _require_method(trace, "gda", "check_gda")
    if p.u_star is None:
        raise ValueError("check_gda requires a problem with known u_star")
    L, K = p.L, trace.K
    F = _replay_operator(trace, p)
    Fns = _sq_norms(F)
    eta = float(trace.params["eta"])

    kk = np.arange(K + 1, dtype=float)
    C = (kk / (2.0 * L)) * Fns + np.einsum("kd,kd->k", F, trace.x - p.u_star[None, :])
    delta = np.zeros(K + 1)
    delta[1:] = np.diff(C)
    slack = np.zeros(K + 1)
    violation = np.zeros(K + 1)
    tol = potential_tol(C[0])

    side = [_replay_side(trace, F)]
    norms = np.sqrt(Fns)
    mono_tol = 1e-12 * (1.0 + float(norms[0]))
    if K >= 1:
        mono = float(np.max(np.diff(norms)))
    else:
        mono = 0.0
    side.append(SideCheck("operator_norm_monotone", mono, mono_tol))

    # The potential argument is tied to the step it analyzes; exact match
    # is intended, run_gda builds its default step from the same expression.
    if eta == 1.0 / L:
        u_next = trace.x[K] - eta * F[K]
        u_all = np.vstack([trace.x, u_next[None, :]])
        dsq = _sq_norms(u_all - p.u_star[None, :])
        slack[1:] = 0.5 * L * (dsq[1 : K + 1] - dsq[2 : K + 2])
        violation = delta - slack
        D = float(np.sqrt(dsq[0]))
        env = L * D / np.sqrt(kk / 2.0 + 1.0)
        side.append(
            SideCheck("operator_norm_envelope", float(np.max(norms - env)),
                      envelope_tol(env[0]))
        )

    return CertificateReport("gda", C, delta, slack, violation, tol, tuple(side))


def check_halpern(trace, p):
    """Certify an anchored trace on a cocoercive operator.

    Asserts C_k = (k(k+1)/L)||F(u_k)||^2 + (k+1)<F(u_k), u_k - u_0> <= 0
    for every k >= 1; the anchor is the initial point, so no optimum is
    needed.  When u* is known the envelope L||u_0 - u*||/(k+1) is checked
    as well.
    """
    _require_method(trace, "halpern", "check_halpern")
    L, K = p.L, trace.K
    F = _replay_operator(trace, p)
    Fns = _sq_norms(F)

    kk = np.arange(K + 1, dtype=float)
    A = kk * (kk + 1.0) / L
    B = kk + 1.0
    C = A * Fns + B * np.einsum("kd,kd->k", F, trace.x - trace.x[0][None, :])
    delta = np.zeros(K + 1)
    delta[1:] = np.diff(C)
    slack = np.zeros(K + 1)
    violation = np.zeros(K + 1)
    violation[1:] = C[1:]
    tol = potential_tol(C[0])

    side = [_replay_side(trace, F)]
    if p.u_star is not None:
        D = float(np.linalg.norm(trace.x[0] - p.u_star))
        env = L * D / (kk + 1.0)
        side.append(
            SideCheck("operator_norm_envelope",
                      float(np.max(np.sqrt(Fns) - env)), envelope_tol(env[0]))
        )

    return CertificateReport("halpern", C, delta, slack, violation, tol, tuple(side))


@dataclass(frozen=True)
class RateEnvelope:
    """Tabulated closed-form bound for one method's certified quantity.

    bounds[k] is the theoretical ceiling at step k for k = 0..K; it is
    strictly positive and non-increasing by construction (enforced here).
    """

    method: str
    quantity: str
    bounds: np.ndarray

    def __post_init__(self):
        arr = np.array(self.bounds, dtype=float)
        if arr.ndim != 1 or len(arr) < 1:
            raise ValueError("bounds must be a nonempty 1-D array")
        if not np.all(arr > 0.0):
            raise ValueError("envelope must be strictly positive; "
                             "degenerate instance (started at the optimum?)")
        if np.any(np.diff(arr) > 0.0):
            raise ValueError("envelope must be non-increasing in k")
        arr.setflags(write=False)
        object.__setattr__(self, "bounds", arr)

    @property
    def K(self):
        return len(self.bounds) - 1

    @property
    def tol(self):
        return envelope_tol(self.bounds[0])

    def bound(self, k):
        return float(self.bounds[k])


def _initial_gap(p, x0):
    f_star = _f_star(p)
    if f_star is None:
        raise ValueError("envelope needs f_star (or x_star) on the problem")
    return float(p.value(x0)) - f_star


def _initial_dist_sq(p, x0, attr):
    star = getattr(p, attr)
    if star is None:
        raise ValueError("envelope needs %s on the problem" % attr)
    d = np.asarray(x0, dtype=float) - star
    return float(np.dot(d, d))


def rate_envelope(method, p, x0, K):
    """Tabulate the closed-form rate bound of a method for k = 0..K.

    Parameters
    ----------
    method : str
        One of 'gd', 'fgm', 'fgm_min_grad', 'ogmg', 'gda', 'halpern'.
    p : SmoothProblem or OperatorProblem
        Must carry the constants the formula needs (f_star or x_star for
        the smooth methods, u_star for the operator methods).
    x0 : (d,) array
        Starting point; sets f(x0) - f* or D = ||x0 - x*||.
    K : int
        Last step to tabulate.

    Returns
    -------
    RateEnvelope

    Notes
    -----
    * gd           : ||grad f(x_k)||^2 <= 2L(f(x0) - f*) / (2k+1)
    * fgm          : f(x_k) - f*       <= 4 L D^2 / ((k+1)(k+2))
    * fgm_min_grad : min_{i<=k}||grad f(x_i)||^2
                                       <= 18 L^2 D^2 / ((k+1)(k+2)(k+3))
    * ogmg         : ||grad f(x_K)||^2 <= 16 L (f(x0) - f*) / (K+2)^2,
                     tabulated as a function of the horizon
    * gda          : ||F(u_k)||        <= L D / sqrt(k/2 + 1)
    * halpern      : ||F(u_k)||        <= L D / (k+1)
    """
    if K < 0:
        raise ValueError("K must be nonnegative")
    k = np.arange(K + 1, dtype=float)
    L = p.L
    if method == "gd":
        bounds = 2.0 * L * _initial_gap(p, x0) / (2.0 * k + 1.0)
        quantity = "grad_norm_sq"
    elif method == "fgm":
        D2 = _initial_dist_sq(p, x0, "x_star")
        bounds = 4.0 * L * D2 / ((k + 1.0) * (k + 2.0))
        quantity = "value_gap"
    elif method == "fgm_min_grad":
        D2 = _initial_dist_sq(p, x0, "x_star")
        bounds = 18.0 * L**2 * D2 / ((k + 1.0) * (k + 2.0) * (k + 3.0))
        quantity = "min_grad_norm_sq"
    elif method == "ogmg":
        bounds = 16.0 * L * _initial_gap(p, x0) / (k + 2.0) ** 2
        quantity = "grad_norm_sq_at_horizon"
    elif method == "gda":
        D2 = _initial_dist_sq(p, x0, "u_star")
        bounds = L * np.sqrt(D2) / np.sqrt(k / 2.0 + 1.0)
        quantity = "operator_norm"
    elif method == "halpern":
        D2 = _initial_dist_sq(p, x0, "u_star")
        bounds = L * np.sqrt(D2) / (k + 1.0)
        quantity = "operator_norm"
    else:
        raise ValueError("unknown method tag '%s'" % method)
    return RateEnvelope(method, quantity, bounds)


def report_to_text(r):
    """Serialize a report: summary block, then one row per step.

    Row columns are (k, potential, delta, slack, violation).
    """
    pairs = [
        ("method", r.method),
        ("K", r.K),
        ("tolerance", r.tol),
        ("passed", r.passed),
        ("worst_violation", r.worst_violation),
    ]
    for sc in r.side_checks:
        pairs.append(("check.%s.violation" % sc.name, sc.violation))
        pairs.append(("check.%s.tol" % sc.name, sc.tol))
        pairs.append(("check.%s.passed" % sc.name, sc.passed))
    pairs.append(("columns", "k potential delta slack violation"))
    for k in range(r.K + 1):
        pairs.append(
            ("row.%d" % k,
             [float(k), r.potential[k], r.delta[k], r.slack[k], r.violation[k]])
        )
    return kvdoc.dumps(pairs)
