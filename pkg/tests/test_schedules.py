"""Tests for the forward b/B recursion, the backward A-sequence, and the
step-coefficient table, against hand-derived values frozen here."""

import dataclasses

import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smallgrad import schedules as sch

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0

# hand oracle, two recursion steps from B0 = 1:
#   b1 = (1+sqrt(5))/2, B1 = 1 + b1, b2 = (1+sqrt(1+4 B1))/2, B2 = B1 + b2
B1_HAND = 2.618033988749895
B2_HAND = 4.811561074080949


# ---------------------------------------------------------------------------
# forward schedule


def test_fgm_first_steps_match_hand_values():
    s = sch.fgm_schedule(2, B0=1.0, L=1.0)
    npt.assert_allclose(s.b[1], (1.0 + np.sqrt(5.0)) / 2.0, rtol=1e-15)
    npt.assert_allclose(s.B[1], B1_HAND, rtol=1e-15)
    npt.assert_allclose(s.B[2], B2_HAND, rtol=1e-14)
    assert s.B[2] >= 3.0  # quadratic growth floor at k = 2
    npt.assert_allclose(s.a, s.B / 2.0, rtol=0, atol=0)


def test_fgm_rejects_bad_arguments():
    with pytest.raises(ValueError):
        sch.fgm_schedule(0)
    with pytest.raises(ValueError):
        sch.fgm_schedule(3, B0=-1.0)
    with pytest.raises(ValueError):
        sch.fgm_schedule(3, L=0.0)


@settings(deadline=None)
@given(K=st.integers(min_value=1, max_value=60), B0=st.floats(min_value=0.5, max_value=4.0))
def test_fgm_recursion_identities(K, B0):
    s = sch.fgm_schedule(K, B0=B0, L=2.0)
    npt.assert_allclose(s.b[1:] ** 2, s.B[1:], rtol=1e-12)
    assert np.all(np.diff(s.B) > 0)
    assert np.all(s.b[1:] > 1.0)
    assert s.b[0] == s.B[0] == B0


def test_fgm_growth_bounds_up_to_large_horizon():
    s = sch.fgm_schedule(10_000, B0=1.0, L=1.0)
    k = np.arange(10_001, dtype=float)
    assert np.all(s.B >= (k + 1) * (k + 2) / 4.0 * (1.0 - 1e-9))
    assert np.all(np.cumsum(s.B) >= (k + 1) * (k + 2) * (k + 3) / 12.0 * (1.0 - 1e-9))


# ---------------------------------------------------------------------------
# backward schedule


def test_ogmg_horizon_one_matches_hand_values():
    s = sch.ogmg_schedule(1)
    npt.assert_allclose(s.A[0], (3.0 - np.sqrt(5.0)) / 2.0, rtol=1e-15)
    assert s.A[1] == 1.0
    npt.assert_allclose(s.a[1], GOLDEN, rtol=1e-15)


def test_ogmg_horizon_two_matches_hand_values():
    s = sch.ogmg_schedule(2)
    npt.assert_allclose(s.A[0], 1.0 / B2_HAND, rtol=1e-14)
    assert 1.0 / s.A[0] >= 4.0  # (2+2)^2 / 4


@pytest.mark.parametrize("K", [1, 2, 5, 30, 200])
def test_ogmg_growth_ratio_bound(K):
    s = sch.ogmg_schedule(K)
    assert s.A[K] / s.A[0] >= (K + 2) ** 2 / 4.0


def test_ogmg_final_step_ratio_is_golden():
    s = sch.ogmg_schedule(9)
    npt.assert_allclose(s.a[9] / s.A[9], GOLDEN, rtol=1e-14)


def test_ogmg_reciprocal_equals_forward_sequence():
    # the two schedules share one recursion, so this holds bitwise
    og = sch.ogmg_schedule(37)
    fg = sch.fgm_schedule(37, B0=1.0, L=3.0)
    npt.assert_array_equal(og.A, 1.0 / fg.B[::-1])


def test_ogmg_recursion_residual_small_at_large_horizon():
    s = sch.ogmg_schedule(10_000)
    rep = sch.validate_schedule(s)
    assert rep.residuals["recursive_1"] <= 1e-12
    assert rep.residuals["reciprocal_lower_bound"] <= 1e-9
    assert rep.passed, rep.failures()


# ---------------------------------------------------------------------------
# beta table


def test_betas_horizon_one_is_identity():
    npt.assert_array_equal(sch.ogmg_betas(sch.ogmg_schedule(1)), [[1.0]])


def test_betas_horizon_two_last_column():
    s = sch.ogmg_schedule(2)
    beta = sch.ogmg_betas(s)
    npt.assert_allclose(beta[0, 1], s.A[1] / s.a[1] - s.a[1] / s.A[2], rtol=1e-15)
    npt.assert_array_equal(np.diag(beta), [1.0, 1.0])


def test_betas_satisfy_step_consistency():
    rep = sch.validate_schedule(sch.ogmg_schedule(60))
    assert rep.residuals["step_consistency"] <= 1e-10
    assert rep.residuals["beta_nonnegative"] <= 1e-12


def test_betas_capped():
    with pytest.raises(ValueError, match="capped"):
        sch.ogmg_betas(sch.ogmg_schedule(sch.BETA_TABLE_MAX_K + 1))


# ---------------------------------------------------------------------------
# validation


def test_validate_passes_on_generated_schedules():
    assert sch.validate_schedule(sch.fgm_schedule(80, B0=1.0, L=0.7)).passed
    assert sch.validate_schedule(sch.ogmg_schedule(80)).passed


def test_validate_flags_tampered_forward_schedule():
    s = sch.fgm_schedule(10)
    B = s.B.copy()
    B[5] *= 1.0001
    bad = dataclasses.replace(s, B=B)
    rep = sch.validate_schedule(bad)
    assert not rep.passed
    assert rep.residuals["root_identity"] > 1e-12


def test_validate_rejects_cubic_growth():
    # A_k ~ k^3 keeps every a_{k+1} below A_K, so the max-growth inequality
    # cannot fire on its own; the step recursion is what rejects it
    K = 12
    A = ((np.arange(K + 1) + 1.0) / (K + 1.0)) ** 3
    a = np.concatenate([[A[0]], np.diff(A)])
    bad = sch.OgmgSchedule(K=K, A=A, a=a)
    rep = sch.validate_schedule(bad)
    assert not rep.passed
    assert rep.residuals["max_growth"] <= 1e-12
    assert rep.residuals["recursive_1"] > 1e-6
    assert rep.residuals["backward_expression"] > 1e-6


def test_validate_rejects_non_schedule():
    with pytest.raises(TypeError):
        sch.validate_schedule(object())


def test_schedule_text_round_trip():
    for s in (sch.fgm_schedule(7, B0=1.0, L=2.5), sch.ogmg_schedule(7)):
        t = sch.schedule_from_text(sch.schedule_to_text(s))
        assert t.K == s.K
        for name in ("b", "B", "a") if isinstance(s, sch.FgmSchedule) else ("A", "a"):
            npt.assert_array_equal(getattr(t, name), getattr(s, name))
