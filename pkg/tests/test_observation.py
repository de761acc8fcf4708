import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import chisquare

from activetrack.kinematics import AgentState, WorldState
from activetrack.observation import (
    LIK_FLOOR,
    AoaGrid,
    DegenerateGeometryError,
    ObservationTable,
    SyntheticTableParams,
    TableFormatError,
    build_synthetic_table,
    gaussian_bin_mass,
    interpolate_params,
    likelihood,
    likelihood_batch,
    make_observation,
    observation_pmf,
    params_batch,
    pmf_batch,
    quantized_gaussian,
    relative_geometry,
    relative_geometry_batch,
    sample_observation,
    synthetic_sigma,
)

GRID = AoaGrid(5.0)


def world(rx, ry, rth, sx, sy):
    return WorldState(AgentState(rx, ry, rth, 0.3), AgentState(sx, sy, 0.0, 0.3))


def constant_table(mu, sigma):
    d = np.array([0.0, 10.0])
    a = np.array([0.0, 180.0])
    return ObservationTable(d, a, np.full((2, 2), mu), np.full((2, 2), sigma))


def test_grid_layout():
    assert GRID.num_bins == 37
    assert GRID.bins[0] == 0 and GRID.bins[-1] == 180
    assert GRID.edges()[0] == -2.5 and GRID.edges()[-1] == 182.5
    with pytest.raises(ValueError):
        AoaGrid(7.0)


@pytest.mark.parametrize("w, dist, aoa", [
    (world(0, 0, 0, 1, 0), 1.0, 0.0),
    (world(0, 0, 0, 0, 2), 2.0, 90.0),
    (world(0, 0, 90, 1, 1), math.sqrt(2), 45.0),
    (world(0, 0, 0, -1, 0), 1.0, 180.0),
])
def test_relative_geometry_examples(w, dist, aoa):
    d, a = relative_geometry(w)
    assert d == pytest.approx(dist)
    assert a == pytest.approx(aoa)


def test_relative_geometry_coincident():
    with pytest.raises(DegenerateGeometryError):
        relative_geometry(world(1, 1, 0, 1, 1))


@given(st.floats(-10, 10), st.floats(-10, 10), st.floats(-180, 179.9))
def test_folding_is_mirror_symmetric(sx, sy, th):
    """Mirror images across the array axis share the folded angle."""
    if math.hypot(sx, sy) < 1e-6:
        return
    r = np.array([0.0, 0.0, th, 0.0])
    rad = math.radians(th)
    ax = np.array([math.cos(rad), math.sin(rad)])
    p = np.array([sx, sy])
    mirror = 2 * (p @ ax) * ax - p
    _, a1 = relative_geometry_batch(r, np.array([sx, sy, 0, 0]))
    _, a2 = relative_geometry_batch(r, np.array([mirror[0], mirror[1], 0, 0]))
    assert 0 <= a1 <= 180
    assert a1 == pytest.approx(a2, abs=1e-6)


def test_interpolation_identity_midpoint_and_clamp(table):
    i, j = 3, 7
    mu, sigma = interpolate_params(table, table.distance_knots[i], table.aoa_knots[j])
    assert (mu, sigma) == (table.mu[i, j], table.sigma[i, j])
    dm = 0.5 * (table.distance_knots[i] + table.distance_knots[i + 1])
    mu, sigma = interpolate_params(table, dm, table.aoa_knots[j])
    assert mu == pytest.approx(0.5 * (table.mu[i, j] + table.mu[i + 1, j]))
    assert sigma == pytest.approx(0.5 * (table.sigma[i, j] + table.sigma[i + 1, j]))
    assert interpolate_params(table, -3.0, 40.0) == interpolate_params(table, 0.0, 40.0)
    assert interpolate_params(table, 99.0, 40.0) == interpolate_params(
        table, table.distance_knots[-1], 40.0)


def test_compiled_params_match_reference(table):
    rng = np.random.default_rng(0)
    n = 2000
    robot = np.column_stack([rng.uniform(-1, 12, n), rng.uniform(-1, 6, n),
                             rng.uniform(-180, 180, n), np.zeros(n)])
    source = np.column_stack([rng.uniform(-1, 12, n), rng.uniform(-1, 6, n), np.zeros((n, 2))])
    mu, sigma = params_batch(table, robot, source)
    ref_mu, ref_sigma = interpolate_params(table, *relative_geometry_batch(robot, source))
    np.testing.assert_allclose(mu, ref_mu, atol=1e-9)
    np.testing.assert_allclose(sigma, ref_sigma, atol=1e-9)


def test_quantized_gaussian_center_mass():
    pmf = quantized_gaussian(90.0, 10.0, GRID)
    raw = gaussian_bin_mass(90.0, 10.0, 90.0, 5.0)
    assert raw == pytest.approx(0.1974, abs=1e-4)
    assert pmf[18] == pytest.approx(raw, abs=1e-6)


def test_quantized_gaussian_narrow_limit():
    pmf = quantized_gaussian(42.0, 0.01, GRID)
    assert pmf[8] == pytest.approx(1.0)
    assert pmf.sum() - pmf[8] < 1e-12


@given(st.floats(0, 180), st.floats(0.05, 200))
def test_pmf_normalized(mu, sigma):
    pmf = quantized_gaussian(mu, sigma, GRID)
    assert pmf.sum() == pytest.approx(1.0, abs=1e-12)
    assert np.all(pmf >= 0)


def test_pmf_batch_matches_single(table):
    w = world(1.0, 2.0, 30.0, 4.0, 3.5)
    single = observation_pmf(table, GRID, w)
    batch = pmf_batch(table, GRID, w.robot.as_array()[None], w.source.as_array()[None])[0]
    np.testing.assert_allclose(batch, single, atol=1e-12)


def test_sample_observation_one_hot_and_uniform():
    rng = np.random.default_rng(1)
    one_hot = np.zeros(37)
    one_hot[11] = 1.0
    assert all(sample_observation(one_hot, rng, GRID).bin_index == 11 for _ in range(100))
    n = 100_000
    counts = np.bincount([sample_observation(np.full(37, 1 / 37), rng).bin_index
                          for _ in range(n)], minlength=37)
    sd = math.sqrt(n * (1 / 37) * (36 / 37))
    # 3 sigma per bin would fail somewhere ~10% of the time across 37 bins
    assert np.all(np.abs(counts - n / 37) <= 4 * sd)
    assert chisquare(counts).pvalue > 0.01


def test_sample_observation_seeded():
    pmf = quantized_gaussian(60.0, 15.0, GRID)
    r1, r2 = np.random.default_rng(9), np.random.default_rng(9)
    a = [sample_observation(pmf, r1).bin_index for _ in range(50)]
    b = [sample_observation(pmf, r2).bin_index for _ in range(50)]
    assert a == b


def test_likelihood_equals_pmf_entry(table):
    w = world(1.0, 1.0, 0.0, 3.0, 4.0)
    pmf = observation_pmf(table, GRID, w)
    for b in range(37):
        lik = likelihood(table, GRID, w, make_observation(GRID, b))
        assert lik == max(pmf[b], LIK_FLOOR)


def test_likelihood_floor():
    tab = constant_table(10.0, 2.0)
    w = world(0, 0, 0, 1, 1)
    assert likelihood(tab, GRID, w, make_observation(GRID, 36)) == LIK_FLOOR


def test_likelihood_batch_matches_pmf(table):
    rng = np.random.default_rng(2)
    robot = np.column_stack([rng.uniform(0, 7, 50), rng.uniform(0, 5, 50),
                             rng.uniform(-180, 180, 50), np.zeros(50)])
    source = np.column_stack([rng.uniform(0, 7, 50), rng.uniform(0, 5, 50), np.zeros((50, 2))])
    pmf = pmf_batch(table, GRID, robot, source)
    for b in (0, 5, 18, 36):
        np.testing.assert_allclose(likelihood_batch(table, GRID, robot, source, b),
                                   np.maximum(pmf[:, b], LIK_FLOOR), rtol=1e-9, atol=1e-15)


def test_likelihood_symmetric_about_axis(table):
    a = likelihood(table, GRID, world(2, 2, 0, 4, 3), make_observation(GRID, 6))
    b = likelihood(table, GRID, world(2, 2, 0, 4, 1), make_observation(GRID, 6))
    assert a == pytest.approx(b, rel=1e-12)


def test_observation_frequencies_match_pmf(table):
    w = world(1.0, 1.0, 20.0, 3.0, 2.5)
    pmf = observation_pmf(table, GRID, w)
    rng = np.random.default_rng(4)
    n = 100_000
    counts = np.bincount([sample_observation(pmf, rng).bin_index for _ in range(n)], minlength=37)
    keep = pmf * n >= 5
    expected = pmf[keep] * n
    observed = counts[keep]
    expected *= observed.sum() / expected.sum()
    assert chisquare(observed, expected).pvalue > 0.01


def test_synthetic_sigma_example():
    assert synthetic_sigma(1.0, 90.0, SyntheticTableParams()) == pytest.approx(3.5)
    flat = SyntheticTableParams(kappa=0.0)
    vals = [synthetic_sigma(2.0, a, flat) for a in (0, 45, 90, 180)]
    assert np.allclose(vals, vals[0])


def test_synthetic_table_shape_and_validation():
    tab = build_synthetic_table()
    assert tab.mu.shape == (19, 37)
    np.testing.assert_array_equal(tab.mu[0], tab.aoa_knots)
    with pytest.raises(ValueError):
        build_synthetic_table(SyntheticTableParams(sigma0=0.0))


def test_table_round_trip(tmp_path, table):
    path = tmp_path / "table.csv"
    table.save(path)
    assert ObservationTable.load(path) == table


def test_table_load_errors(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("d,a,m,s\n0,0,0,1\n")
    with pytest.raises(TableFormatError):
        ObservationTable.load(bad)
    bad.write_text("distance_m,aoa_deg,mu_deg,sigma_deg\n0,0,0,1\n0,5,5,1\n1,0,0,1\n")
    with pytest.raises(TableFormatError):
        ObservationTable.load(bad)
    bad.write_text("distance_m,aoa_deg,mu_deg,sigma_deg\n0,0,0,-1\n")
    with pytest.raises(TableFormatError):
        ObservationTable.load(bad)
