import dataclasses

import numpy as np
import pytest

from nodalshoot.liouville import (BLOWS_UP, OSCILLATES, UNDECIDED, apriori_sweep, classify_entire,
                                  liouville_sweep, shooting_grid)
from nodalshoot.model import Geometry, SystemParams
from nodalshoot.ode import IntegratorConfig, ShootState, integrate

import oracle

GEOMS = (Geometry.ENTIRE3D, Geometry.LINE, Geometry.HALFLINE)


def entire(geom, beta=0.0, n=2):
    if n == 1:
        return SystemParams([0.0], [1.0], [[0.0]], geom)
    return SystemParams.coupled([0.0, 0.0], [1.0, 1.0], beta, geom)


def test_zero_data_trivial():
    c = classify_entire(entire(Geometry.ENTIRE3D), [0.0, 0.0], (1, 1))
    assert c.verdict == UNDECIDED and c.trivial and c.node_counts == (0, 0)


def test_entire3d_oscillates():
    c = classify_entire(entire(Geometry.ENTIRE3D, n=1), [1.0], (0,), R_max=50.0)
    assert c.verdict == OSCILLATES and c.node_counts[0] > 0
    nodes = oracle.rk4_scalar(0.0, 1.0, 1.0, h=1e-3, r_end=50.0)[2][0]
    assert nodes > 0


def test_line_oscillates():
    c = classify_entire(entire(Geometry.LINE, n=1), [1.0], (2,), R_max=100.0)
    assert c.verdict == OSCILLATES and c.node_counts[0] == 3
    nodes = oracle.rk4_scalar(0.0, 1.0, 1.0, h=1e-3, r_end=100.0, dim=1)[2][0]
    assert nodes >= 3


def test_blow_up_verdict():
    p = SystemParams.coupled([0, 0], [1, 1], -10.0, Geometry.ENTIRE3D)
    c = classify_entire(p, [2.0, 2.0], (1, 1))
    assert c.verdict == BLOWS_UP and c.escape_radius is not None and c.escape_radius < 1


def test_ball_rejected():
    with pytest.raises(ValueError):
        classify_entire(SystemParams([1.0], [1.0], [[0.0]]), [1.0], (0,))


def test_shooting_grid_shape_and_range():
    g = shooting_grid(40, 2, 0.5, 100.0, seed=3)
    assert g.shape == (40, 2) and np.all(g >= 0)
    norms = np.linalg.norm(g, axis=1)
    assert np.all((norms >= 0.5 - 1e-12) & (norms <= 100.0 + 1e-12))
    np.testing.assert_array_equal(g, shooting_grid(40, 2, 0.5, 100.0, seed=3))


@pytest.mark.parametrize("geom", GEOMS)
def test_verdict_stable_in_horizon(geom):
    p = entire(geom, 0.5)
    for data in shooting_grid(10, 2, 0.5, 100.0, seed=5):
        short = classify_entire(p, data, (1, 1), R_max=150.0)
        long = classify_entire(p, data, (1, 1), R_max=300.0)
        if short.verdict != UNDECIDED:
            assert long.verdict == short.verdict


@pytest.mark.parametrize("geom", [Geometry.ENTIRE3D, Geometry.LINE])
@pytest.mark.parametrize("sigma", [2.0, 0.5])
def test_scaling_coherence(geom, sigma):
    p = entire(geom, 0.0)
    for data in shooting_grid(8, 2, 0.5, 50.0, seed=9):
        base = classify_entire(p, data, (3, 3), R_max=100.0)
        scaled = classify_entire(p, sigma * data, (3, 3), R_max=100.0 / sigma)
        assert scaled.verdict == base.verdict


def test_halfline_is_odd_line_solution():
    cfg = dataclasses.replace(IntegratorConfig(), r_max=60.0)
    half = SystemParams([0.0], [1.0], [[0.0]], Geometry.HALFLINE)
    line = SystemParams([0.0], [1.0], [[0.0]], Geometry.LINE)
    grid = np.linspace(0.0, 60.0, 601)
    s = 0.8
    start = ShootState(0.0, np.array([0.0]), np.array([s]))
    rh = integrate(half, cfg, start, r_eval=grid)
    rl = integrate(line, cfg, start, r_eval=grid)
    np.testing.assert_allclose(rh.profile.values, rl.profile.values, atol=1e-12)
    assert rh.node_counts[0] == rl.node_counts[0] > 0
    # the reflection r -> -r maps the slope s to -s and the solution to -u
    flipped = integrate(line, cfg, ShootState(0.0, np.array([0.0]), np.array([-s])),
                        r_eval=grid).profile.values
    assert np.array_equal(flipped, -rl.profile.values)
    c = classify_entire(half, [s], (100,), R_max=60.0)
    assert c.node_counts[0] == rh.node_counts[0]


@pytest.mark.parametrize("beta", [0.0, 0.5])
def test_sweep_no_undecided(beta):
    pts = shooting_grid(25, 2, 0.5, 100.0, seed=3)
    rep = liouville_sweep([1.0, 1.0], [beta], pts, (1, 1), R_max=300.0)
    assert len(rep.rows) == 75
    assert rep.undecided_nontrivial == 0


def test_sweep_reports_zero_point_apart():
    pts = shooting_grid(4, 2, 0.5, 100.0)
    rep = liouville_sweep([1.0, 1.0], [0.0], pts, (1, 1), R_max=100.0, include_zero=True)
    assert rep.trivial == 3
    assert rep.undecided_nontrivial == 0
    for cnt in rep.counts().values():
        assert cnt["trivial"] == 1


def test_sweep_jobs_independent():
    pts = shooting_grid(6, 2, 0.5, 100.0)
    a = liouville_sweep([1.0, 1.0], [-0.01, 0.5], pts, (1, 1), R_max=100.0)
    b = liouville_sweep([1.0, 1.0], [-0.01, 0.5], pts, (1, 1), R_max=100.0, jobs=3)
    assert [(k, g, c.to_dict()) for k, g, c in a.rows] == [(k, g, c.to_dict()) for k, g, c in b.rows]


# --- a priori sweep --------------------------------------------------------------

@pytest.fixture(scope="module")
def apriori():
    base = SystemParams.coupled([1.0, 1.0], [1.0, 1.0], 0.0)
    return apriori_sweep(base, [-0.02, 0.0, 0.5, 1.0], (0, 0))


def test_apriori_all_finite(apriori):
    assert apriori.all_finite
    assert apriori.ratio <= 10
    assert np.isfinite(apriori.empirical_C)


def test_apriori_zero_row_is_amplitude(apriori):
    row = apriori.rows[1]
    assert row.beta == 0.0
    assert row.sup_norm == pytest.approx(oracle.FROZEN_AMPLITUDES[(1.0, 0)], rel=1e-9)
    assert row.sup_norm == pytest.approx(np.max(row.amplitudes), rel=1e-12)


def test_apriori_sign_flip(apriori):
    a = oracle.FROZEN_AMPLITUDES[(1.0, 0)]
    base = SystemParams.coupled([1.0, 1.0], [1.0, 1.0], 0.0)
    flipped = apriori_sweep(base, [0.5], (0, 0), seed_amplitudes=[-a, a])
    assert flipped.rows[0].sup_norm == pytest.approx(apriori.rows[2].sup_norm, rel=1e-10)
