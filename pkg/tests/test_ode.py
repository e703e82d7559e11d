import dataclasses

import numpy as np
import pytest

from nodalshoot.model import Geometry, SystemParams
from nodalshoot.ode import (IntegrationError, IntegratorConfig, ShootState, integrate,
                            integrate_with_sensitivity, ode_defect, origin_series_start, rhs, shoot)

import oracle

SCALAR = SystemParams([1.0], [1.0], [[0.0]])
ENTIRE = SystemParams([0.0], [1.0], [[0.0]], Geometry.ENTIRE3D)
CFG = IntegratorConfig()


def state(r, u, du):
    return ShootState(r, np.array(u, float), np.array(du, float))


# --- rhs -------------------------------------------------------------------------

def test_rhs_cancellation():
    d = rhs(SCALAR, 0.5, state(0.5, [1], [0]))
    assert d.u[0] == 0.0 and d.du[0] == 0.0


def test_rhs_entire_cubic_only():
    assert rhs(ENTIRE, 1.0, state(1, [1], [0])).du[0] == -1.0


def test_rhs_coupled_substitution():
    p = SystemParams.coupled([1, 1], [1, 1], 0.5)
    d = rhs(p, 1.0, state(1, [1, 1], [0, 0]))
    np.testing.assert_allclose(d.du, [-0.5, -0.5])


def test_rhs_first_order_term_and_line():
    d = rhs(SCALAR, 2.0, state(2, [0], [1]))
    assert d.du[0] == -1.0  # -(2/r) u'
    line = SystemParams([0.0], [1.0], [[0.0]], Geometry.LINE)
    assert rhs(line, 0.0, state(0, [2], [5])).du[0] == -8.0


def test_rhs_origin_error():
    with pytest.raises(ValueError, match="origin requires series start"):
        rhs(SCALAR, 0.0, state(0, [1], [0]))


# --- origin series ---------------------------------------------------------------

def test_series_start_scalar():
    h0 = 1e-3
    s = origin_series_start(SCALAR, [2.0], h0)
    assert s.u[0] == pytest.approx(2 - h0 ** 2, rel=1e-15)
    assert s.du[0] == pytest.approx(-2 * h0, rel=1e-15)


def test_series_start_zero_and_entire():
    s = origin_series_start(SCALAR, [0.0])
    assert s.u[0] == 0.0 and s.du[0] == 0.0
    h0 = 1e-2
    e = origin_series_start(ENTIRE, [1.0], h0)
    assert e.du[0] == pytest.approx(2 * (-1 / 6) * h0, rel=1e-14)


def test_series_start_matches_oracle_expansion():
    # the O(r⁴) term is the leading difference to the fourth-order oracle start
    h0 = 1e-3
    for a in (0.5, 3.0, 50.0):
        s = origin_series_start(SCALAR, [a], h0)
        u4, du4 = oracle.series_start(1.0, 1.0, np.array([a]), h0)
        d = (1 - 3 * a ** 2) * (a - a ** 3) / 120
        assert abs(s.u[0] - u4[0]) <= 2 * abs(d) * h0 ** 4 + 1e-15 * a


def test_series_start_errors():
    with pytest.raises(ValueError):
        origin_series_start(SCALAR, [1.0], 0.0)
    line = SystemParams([0.0], [1.0], [[0.0]], Geometry.LINE)
    with pytest.raises(ValueError):
        origin_series_start(line, [1.0])


def test_series_start_sensitivity_consistent():
    p = SystemParams.coupled([1, 2], [1, 1.5], 0.3)
    a = np.array([1.2, -0.7])
    h0, eps = 1e-2, 1e-6
    s = origin_series_start(p, a, h0, sensitivity=True)
    for j in range(2):
        e = np.eye(2)[j] * eps
        up, dn = origin_series_start(p, a + e, h0), origin_series_start(p, a - e, h0)
        col = np.concatenate([up.u - dn.u, up.du - dn.du]) / (2 * eps)
        np.testing.assert_allclose(s.sensitivity[:, j], col, rtol=1e-7, atol=1e-10)


# --- integrate -------------------------------------------------------------------

def test_zero_start_zero_profile():
    res = shoot(SCALAR, CFG, [0.0])
    assert res.reason == "reached_end"
    assert not res.events
    assert np.all(res.profile.values == 0)


def test_near_linear_regime():
    res = shoot(SCALAR, CFG, [0.1])
    assert res.node_counts[0] == 0 and not res.crossings[0]
    assert abs(res.final.u[0] - 0.1 * np.sinh(1.0)) <= 2e-3
    ref = oracle.rk4_scalar(1.0, 1.0, 0.1)[0][0]
    assert res.final.u[0] == pytest.approx(ref, abs=1e-10)


def test_entire_oscillation_events():
    # the RK4 oracle puts the third zero of the a=1 trajectory beyond r=50
    for r_max in (50.0, 200.0):
        cfg = dataclasses.replace(CFG, r_max=r_max)
        res = shoot(ENTIRE, cfg, [1.0], n_samples=0)
        nodes = oracle.rk4_scalar(0.0, 1.0, 1.0, h=1e-3, r_end=r_max)[2][0]
        assert len(res.crossings[0]) == res.node_counts[0] == nodes
    assert nodes >= 3


def test_events_bracket_sign_changes(scalar_records):
    rec = scalar_records[(1.0, 3)]
    res = shoot(rec.params, CFG, rec.amplitudes, n_samples=0)
    assert len(res.crossings[0]) == 3
    for rz in res.crossings[0]:
        probe = np.array([rz - 1e-7, rz + 1e-7])
        vals = shoot(rec.params, CFG, rec.amplitudes, r_eval=probe).profile.values[0]
        assert vals[0] * vals[1] < 0


def test_profile_crossings_recorded(scalar_records):
    rec = scalar_records[(2.0, 2)]
    zc = rec.profile.zero_crossings[0]
    assert zc.size == 2 and np.all(np.diff(zc) > 0)


def test_grazing_logged_not_counted():
    cfg = dataclasses.replace(CFG, r_max=3.0, zero_tol=1e-3)
    p = SystemParams([1.0], [1e-6], [[0.0]])
    grazes = 0
    for du in np.linspace(-0.0296, -0.0284, 25):
        res = integrate(p, cfg, state(0.5, [0.01], [du]), r_eval=np.linspace(0.5, 3.0, 2001))
        kinds = {e.kind for e in res.events}
        if "graze" in kinds:
            grazes += 1
            assert res.node_counts[0] == 0
            assert np.min(res.profile.values[0]) > 0
    assert grazes > 0


def test_blowup_and_underflow():
    p = SystemParams.coupled([1, 1], [1, 1], -10.0)
    res = shoot(p, CFG, [2.0, 2.0], n_samples=0)
    assert res.reason == "blowup" and 0 < res.escape_radius < 1
    cfg = dataclasses.replace(CFG, blowup_threshold=1e300)
    with pytest.raises(IntegrationError, match="stiffness/blow-up at r="):
        shoot(p, cfg, [2.0, 2.0], n_samples=0)


def test_deterministic():
    a = shoot(SCALAR, CFG, [37.0], sensitivity=True)
    b = shoot(SCALAR, CFG, [37.0], sensitivity=True)
    assert np.array_equal(a.profile.values, b.profile.values)
    assert np.array_equal(a.sensitivity_samples, b.sensitivity_samples)
    assert [e.r for e in a.events] == [e.r for e in b.events]


def test_sensitivity_does_not_change_steps():
    a = shoot(SCALAR, CFG, [104.0])
    b = shoot(SCALAR, CFG, [104.0], sensitivity=True)
    assert np.array_equal(a.profile.values, b.profile.values) and a.n_steps == b.n_steps


def test_config_validation():
    with pytest.raises(ValueError):
        IntegratorConfig(rel_tol=0)
    with pytest.raises(ValueError):
        IntegratorConfig(r_max=-1)


# --- invariants ------------------------------------------------------------------

def test_odd_symmetry_exact():
    p = SystemParams.coupled([1, 1.5], [1, 2], 0.3)
    a = shoot(p, CFG, [5.0, 3.0])
    b = shoot(p, CFG, [-5.0, 3.0])
    assert np.array_equal(b.profile.values[0], -a.profile.values[0])
    assert np.array_equal(b.profile.values[1], a.profile.values[1])


def test_entire_scaling():
    sigma = 2.0
    cfg = dataclasses.replace(CFG, r_max=20.0)
    grid = np.linspace(0.0, 20.0, 401)
    base = shoot(ENTIRE, cfg, [1.0], r_eval=grid).profile
    cfg2 = dataclasses.replace(CFG, r_max=20.0 / sigma)
    scaled = shoot(ENTIRE, cfg2, [sigma], r_eval=grid / sigma).profile
    assert np.max(np.abs(scaled.values[0] - sigma * base.values[0])) <= 1e-6


def test_oracle_equivalence_lambda1(scalar_records):
    keep = 100
    h = 1e-4
    amps = np.array([scalar_records[(1.0, P)].amplitudes[0] for P in range(4)])
    _, _, _, samples = oracle.rk4_scalar(1.0, 1.0, amps, h=h, keep_every=keep)
    radii = h + np.arange(samples.shape[0]) * keep * h
    for k, a in enumerate(amps):
        adaptive = shoot(SCALAR, CFG, [a], r_eval=radii).profile.values[0]
        assert np.max(np.abs(adaptive - samples[:, k])) <= 1e-6


# --- sensitivity -----------------------------------------------------------------

def test_jacobian_diagonal_when_uncoupled():
    p = SystemParams.coupled([1, 2], [1, 1], 0.0)
    _, J = integrate_with_sensitivity(p, CFG, [3.0, 5.0])
    assert J[0, 1] == 0.0 and J[1, 0] == 0.0


def test_jacobian_at_zero_closed_form():
    lam = np.array([1.0, 2.5])
    p = SystemParams(lam, [1, 1], [[0, 0.4], [0.4, 0]])
    _, J = integrate_with_sensitivity(p, CFG, [0.0, 0.0])
    np.testing.assert_allclose(np.diag(J), np.sinh(np.sqrt(lam)) / np.sqrt(lam), rtol=1e-9)
    assert J[0, 1] == 0.0


def test_jacobian_vs_central_difference_scalar():
    eps = 1e-6
    _, J = integrate_with_sensitivity(SCALAR, CFG, [1.5])
    tight = CFG.tightened(1e-13, 1e-15)
    up = shoot(SCALAR, tight, [1.5 + eps], n_samples=0).final.u[0]
    dn = shoot(SCALAR, tight, [1.5 - eps], n_samples=0).final.u[0]
    assert J[0, 0] == pytest.approx((up - dn) / (2 * eps), rel=1e-5)


def test_ball_only_for_sensitivity():
    with pytest.raises(ValueError):
        integrate_with_sensitivity(ENTIRE, CFG, [1.0])


def test_ode_defect_small_on_converged(scalar_records):
    assert scalar_records[(1.0, 0)].ode_residual <= 1e-9
    assert scalar_records[(5.0, 3)].ode_residual <= 1e-6


def test_ode_defect_detects_non_solution():
    r = np.linspace(0, 1, 401)
    from nodalshoot.model import SampledProfile
    prof = SampledProfile(r, (1 - r ** 2)[None], (-2 * r)[None])
    # u'' - u'' model = -6 - (u - u³), largest where u = 1/√3
    assert ode_defect(SCALAR, prof) == pytest.approx(6 + 2 / (3 * np.sqrt(3)), rel=1e-6)  # grid misses the peak
