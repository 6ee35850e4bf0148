"""Acceptance gate: one test per shipped guarantee, tolerances pinned.

Each test asserts a guarantee end to end on a fixed random suite, with the
inequality written out inline rather than routed through the library's own
envelope helpers, so a regression in either the methods or the certificate
constants shows up as a red line here.
"""

import dataclasses
import shutil
import time

import numpy as np
import pytest

from smallgrad import certificates as ct
from smallgrad import harness as hn
from smallgrad import lowerbound as lb
from smallgrad import methods as mt
from smallgrad import problems as pb
from smallgrad import schedules as sch
from smallgrad.cli import main as cli_main

REL = 1.0 + 1e-8  # multiplicative slack on the certified envelopes


def quadratic_suite(n=20, max_dim=50):
    out = []
    for i in range(n):
        rng = np.random.default_rng(1000 + i)
        dim = int(rng.integers(2, max_dim + 1))
        L = float(rng.uniform(0.5, 4.0))
        p = pb.random_quadratic(dim, L=L, seed=i)
        out.append((p, rng.standard_normal(dim)))
    return out


def logsumexp_instance():
    p = pb.centered_logsumexp(dim=25, m=60, rho=0.8, seed=7)
    x0 = np.random.default_rng(77).standard_normal(25)
    return p, x0, float(p.value(np.zeros(25)))


def smooth_suite():
    suite = [(p, x0, float(p.f_star)) for p, x0 in quadratic_suite()]
    suite.append(logsumexp_instance())
    return suite


def rotation_suite(n=20):
    out = []
    for i in range(n):
        rng = np.random.default_rng(500 + i)
        L = float(rng.uniform(0.5, 3.0))
        eta = float(rng.uniform(0.05, 0.95)) * L
        alpha = float(rng.uniform(0.2, 1.0)) * np.sqrt(L * eta - eta * eta)
        h = int(rng.integers(1, 6))
        spec = pb.LinearOperatorSpec(eta=eta, alpha=alpha, half_dim=h,
                                     offset=rng.standard_normal(2 * h))
        p = pb.make_rotation_operator(spec, L)
        out.append((p, rng.standard_normal(2 * h)))
    return out


def test_gd_gradient_norm_decays_at_certified_rate():
    start = time.perf_counter()
    for p, x0, f_star in smooth_suite():
        t = mt.run_gd(p, x0, K=1000)
        gap0 = float(p.value(x0)) - f_star
        k = np.arange(1001, dtype=float)
        bound = 2.0 * p.L * gap0 / (2.0 * k + 1.0)
        worst = float(np.max(t.grad_norm_sq - bound * REL))
        assert worst <= 0.0, worst
    assert time.perf_counter() - start < 5.0


def test_fgm_value_and_min_gradient_rates():
    for p, x0, f_star in smooth_suite():
        x_star = p.x_star if p.x_star is not None else np.zeros(len(x0))
        D_sq = float(np.dot(x0 - x_star, x0 - x_star))
        t = mt.run_fgm(p, x0, K=1000)
        k = np.arange(1001, dtype=float)
        gap_bound = 4.0 * p.L * D_sq / ((k + 1.0) * (k + 2.0))
        assert np.all(t.values - f_star <= gap_bound * REL)
        min_bound = 18.0 * p.L**2 * D_sq / ((k + 1.0) * (k + 2.0) * (k + 3.0))
        running_min = np.minimum.accumulate(t.grad_norm_sq)
        assert np.all(running_min <= min_bound * REL)


def test_ogmg_terminal_gradient_bound_and_potential():
    for p, x0 in quadratic_suite():
        gap0 = float(p.value(x0)) - float(p.f_star)
        for K in (1, 2, 5, 10, 20, 50, 100):
            t = mt.run_ogmg(p, x0, K=K)
            assert t.grad_norm_sq[K] <= 16.0 * p.L * gap0 / (K + 2) ** 2
            rep = ct.check_ogmg(t, p)
            assert rep.potential[K] <= rep.potential[0] + rep.tol

    # one isotropic step conserves the potential exactly
    iso = pb.make_quadratic(2.5 * np.eye(3), np.zeros(3), L=2.5)
    rep = ct.check_ogmg(mt.run_ogmg(iso, np.array([1.0, -2.0, 0.5]), K=1), iso)
    c0 = rep.potential[0]
    assert abs(rep.potential[1] - c0) <= 1e-12 * max(1.0, abs(c0))


def test_ogmg_schedule_growth_and_step_conditions():
    for K in (1, 2, 7, 63, 1000, 10_000):
        s = sch.ogmg_schedule(K)
        assert 1.0 / s.A[0] >= (K + 2) ** 2 / 4.0
        rep = sch.validate_schedule(s)
        assert rep.residuals["recursive_1"] <= 1e-12

    for K in (1, 2, 3, 5, 8, 13, 34, 89, 144, 200):
        rep = sch.validate_schedule(sch.ogmg_schedule(K))
        if K >= 2:
            assert rep.residuals["beta_nonnegative"] <= 0.0
            assert rep.residuals["step_consistency"] <= 1e-10

    # cubic growth keeps a_{k+1}^2/A_{k+1} <= A_K, so only the step
    # recursion can reject it; it must
    K = 12
    A = ((np.arange(K + 1) + 1.0) / (K + 1.0)) ** 3
    a = np.concatenate([[A[0]], np.diff(A)])
    bad = sch.validate_schedule(sch.OgmgSchedule(K=K, A=A, a=a))
    assert not bad.passed
    assert bad.residuals["recursive_1"] > 1e-6


def test_ogmg_recursive_matches_beta_reconstruction():
    for i in range(10):
        rng = np.random.default_rng(300 + i)
        dim = int(rng.integers(2, 12))
        p = pb.random_quadratic(dim, L=float(rng.uniform(0.5, 3.0)), seed=i)
        x0 = rng.standard_normal(dim)
        K = int(rng.integers(2, 51))
        s = sch.ogmg_schedule(K)
        t = mt.run_ogmg(p, x0, K, s)
        beta = sch.ogmg_betas(s)
        for k in range(1, K):
            xk = x0 - (1.0 / p.L) * np.tensordot(beta[:k, k], t.g[:k], axes=(0, 0))
            err = float(np.linalg.norm(xk - t.x[k]))
            assert err <= 1e-8 * (1.0 + float(np.linalg.norm(t.x[k]))), (i, k)


def test_gda_rate_and_km_bitwise_equivalence():
    for p, u0 in rotation_suite():
        t = mt.run_gda(p, u0, K=1000)
        D = float(np.linalg.norm(u0 - p.u_star))
        k = np.arange(1001, dtype=float)
        bound = p.L * D / np.sqrt(k / 2.0 + 1.0)
        assert np.all(t.grad_norms <= bound * REL)

        km = mt.run_km(mt.NonexpansiveMap.from_problem(p), u0, K=1000, alphas=0.5)
        assert np.array_equal(km.x, t.x)
        assert np.array_equal(km.g, t.g)


def test_halpern_rate_potential_and_tightness():
    for p, u0 in rotation_suite():
        t = mt.run_halpern(p, u0, K=1000)
        D = float(np.linalg.norm(u0 - p.u_star))
        k = np.arange(1001, dtype=float)
        assert np.all(t.grad_norms <= p.L * D / (k + 1.0) * REL)
        rep = ct.check_halpern(t, p)
        assert float(np.max(rep.potential)) <= rep.tol

    # anchored step from (1, 0) on the eta = alpha = 1/2 instance lands
    # exactly on the envelope: ||F(u_1)|| / (L D) = 1/2
    spec = pb.LinearOperatorSpec(eta=0.5, alpha=0.5, half_dim=1,
                                 offset=np.zeros(2))
    p = pb.make_rotation_operator(spec, L=1.0)
    t = mt.run_halpern(p, np.array([1.0, 0.0]), K=1)
    ratio = t.grad_norms[1] / (p.L * np.linalg.norm(np.array([1.0, 0.0]) - p.u_star))
    assert abs(ratio - 0.5) <= 1e-12


def test_worst_case_sweep_attains_theorem_bound():
    m = lb.method_to_scli("gda", L=1.0, eta=1.0)
    for K in (4, 16, 64):
        sweep = lb.sweep_hard_instances(m, K=K, L=1.0)
        assert sweep.sup >= 1.0 / (4.0 * np.sqrt(5.0 * K)) * 0.999

    # closed-form polynomial evaluation against the planar simulation
    rng = np.random.default_rng(8)
    for K in (4, 16, 64):
        for _ in range(5):
            eta = float(rng.uniform(0.005, 0.05))
            alpha = 0.8 * float(np.sqrt(eta - eta * eta))
            b = rng.standard_normal(2)
            closed = lb.eval_scli_norm(m, K, eta, alpha, L=1.0)
            simulated = lb.simulate_scli(m, K, eta, alpha, b, L=1.0)
            assert abs(closed - simulated) <= 1e-10 * max(1.0, closed)


def test_polynomial_sup_exceeds_guaranteed_bound():
    start = time.perf_counter()
    rng = np.random.default_rng(42)
    for i in range(50):
        deg = int(rng.integers(1, 6))
        r = np.concatenate([[1.0], rng.standard_normal(deg)])
        p_eff = max(1, int(np.nonzero(r)[0][-1]))
        for k in (1, 2, 4):
            sup, satisfied = lb.poly_sup_check(r, k, L=1.0)
            assert satisfied, (i, k, sup, 1.0 / (40.0 * p_eff**2 * k))
    assert time.perf_counter() - start < 10.0


def test_composed_method_gradient_decay_slope():
    # isotropic floor eps*I plus a rotated log-spaced spectrum; the floor
    # keeps the largest horizons in the linear-decay regime, so the fit
    # brackets the quartic target instead of sitting on the shallow
    # entry transient
    horizons = [8, 16, 32, 64, 128, 256]
    eps_iso, dim = 1e-3, 40
    ks, ys = [], []
    for seed in range(12):
        rng = np.random.default_rng(seed)
        V, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
        lam = eps_iso + (1.0 - eps_iso) * np.geomspace(1e-6, 1.0, dim)
        Q = (V * lam) @ V.T
        p = pb.make_quadratic(0.5 * (Q + Q.T), np.zeros(dim), L=1.0)
        x0 = rng.standard_normal(dim)
        for K in horizons:
            ks.append(K)
            ys.append(mt.run_fgm_then_ogmg(p, x0, K).grad_norm_sq[K])
    slope = hn.fit_loglog_slope(ks, ys)
    assert slope <= -3.8, slope


MUTATIONS = {}


def mutation(fn):
    MUTATIONS[fn.__name__] = fn
    return fn


@mutation
def break_potential(trace, p):
    # every oracle record stays consistent with the tampered points, so
    # only the potential or telescoping-budget argument can object; the
    # target is whatever each argument anchors on: the step-budget
    # sequence v for the momentum method, the final point for the
    # horizon-anchored one, a mid-run point otherwise
    if trace.method == "fgm":
        v = trace.aux["v"].copy()
        j = trace.K // 2 + 1
        v[j] = p.x_star + 3.0 * (v[j] - p.x_star)
        return {"aux": dict(trace.aux, v=v)}
    j = trace.K if trace.method == "ogmg" else trace.K // 2
    x, g = trace.x.copy(), trace.g.copy()
    x[j] = x[j] + 50.0
    oracle = p.grad if hasattr(p, "grad") else p.operator
    g[j] = oracle(x[j])
    out = {"x": x, "g": g}
    if trace.values is not None:
        values = trace.values.copy()
        values[j] = p.value(x[j])
        out["values"] = values
    return out


@mutation
def swap_iterates(trace, p):
    i, j = trace.K // 3, (2 * trace.K) // 3
    x = trace.x.copy()
    x[[i, j]] = x[[j, i]]
    return {"x": x}


@mutation
def scale_gradients(trace, p):
    return {"g": 1.01 * trace.g}


@mutation
def teleport_final(trace, p):
    x = trace.x.copy()
    x[trace.K] = x[0]
    return {"x": x}


@mutation
def poison_nan(trace, p):
    g = trace.g.copy()
    g[trace.K // 2, 0] = np.nan
    return {"g": g}


def test_certificates_reject_tampered_traces(tmp_path):
    quad = {"kind": "random_quadratic", "dim": 8, "L": 1.0, "seed": 3,
            "lo_frac": 1e-3}
    rot = {"kind": "random_rotation", "half_dim": 4, "L": 1.0, "seed": 5}
    for method in ("gd", "fgm", "ogmg", "gda", "halpern"):
        inline = rot if method in ("gda", "halpern") else quad
        clean = tmp_path / method
        hn.run_config(hn.ExperimentConfig(method=method, K=40,
                                          problem_inline=inline,
                                          out=str(clean)))
        assert cli_main(["check", str(clean)]) == 0, method
        for name, tamper in MUTATIONS.items():
            d = tmp_path / f"{method}-{name}"
            shutil.copytree(clean, d)
            p, trace, _ = hn.load_run(d)
            bad = dataclasses.replace(trace, **tamper(trace, p))
            (d / "trace.kv").write_text(hn.trace_to_text(bad), encoding="utf-8")
            assert cli_main(["check", str(d)]) != 0, (method, name)
