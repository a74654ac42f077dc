"""Simulator against scalar reference updates and its world invariants."""

import numpy as np
import pytest

import stci
from stci.core import DivergenceError, GridSpec, InterventionSpec, ValidationError, region_mask
from stci.datagen import DiffusionParams, apply_intervention, generate, step, true_effects
from tests.test_kernels import scalar_laplacian, scalar_neighborhood_mean


def scalar_step(z, x, y, p):
    """Reference update with plain loops, mirroring the generating equations."""
    dt = p.dt
    lap_z = scalar_laplacian(z)
    z_new = z + dt * p.d_z * lap_z
    x_new = x + dt * (p.d_x * scalar_laplacian(x) + p.alpha * lap_z)
    y_rhs = (
        p.d_y * scalar_laplacian(y)
        + p.beta * lap_z
        + p.gamma * scalar_laplacian(x)
    )
    if p.interference:
        y_rhs = y_rhs + p.beta2 * scalar_neighborhood_mean(x, p.neighborhood_radius)
    return z_new, x_new, y + dt * y_rhs


def test_step_matches_scalar_reference(rng):
    p = DiffusionParams()
    z = rng.standard_normal((4, 4))
    x = rng.standard_normal((4, 4))
    y = rng.standard_normal((4, 4))
    got = step(z, x, y, p)
    want = scalar_step(z, x, y, p)
    for g, w in zip(got, want):
        np.testing.assert_allclose(g, w, atol=1e-12)


def test_step_without_interference_drops_spillover_term(rng):
    z = rng.standard_normal((4, 4))
    x = rng.standard_normal((4, 4))
    y = rng.standard_normal((4, 4))
    p_off = DiffusionParams().without_interference()
    _, _, y_off = step(z, x, y, p_off)
    want = y + p_off.dt * (
        p_off.d_y * scalar_laplacian(y)
        + p_off.beta * scalar_laplacian(z)
        + p_off.gamma * scalar_laplacian(x)
    )
    np.testing.assert_allclose(y_off, want, atol=1e-12)
    assert p_off.beta2 == 0.0 and p_off.interference is False


def test_interference_term_isolated(rng):
    p = DiffusionParams(d_y=0.0, beta=0.0, gamma=0.0, beta2=0.5)
    z = rng.standard_normal((5, 5))
    x = rng.standard_normal((5, 5))
    y = rng.standard_normal((5, 5))
    _, _, y_new = step(z, x, y, p)
    want = y + p.dt * p.beta2 * scalar_neighborhood_mean(x, 1)
    np.testing.assert_allclose(y_new, want, atol=1e-12)


def tiny_setup(n=8, steps=20, **kwargs):
    grid = GridSpec(n_rows=n, n_cols=n, n_steps=steps, lag=1)
    spec = InterventionSpec(
        region=region_mask(n, n, (2, 5), (2, 5)), **kwargs
    )
    return grid, spec


def test_generate_first_step_matches_scalar_reference():
    grid, spec = tiny_setup(steps=2)
    p = DiffusionParams()
    ds = generate(grid, p, spec, seed=9)
    z0 = ds.z[0].astype(np.float64)
    x0 = ds.x[0].astype(np.float64)
    y0 = ds.y[0].astype(np.float64)
    z1, x1, y1 = scalar_step(z0, x0, y0, p)
    np.testing.assert_allclose(ds.z[1], z1, atol=1e-6)
    np.testing.assert_allclose(ds.x[1], x1, atol=1e-6)
    np.testing.assert_allclose(ds.y[1], y1, atol=1e-6)
    x_cf0 = ds.x_cf[0].astype(np.float64)
    _, _, y_cf1 = scalar_step(z0, x_cf0, y0, p)
    np.testing.assert_allclose(ds.y_cf[1], y_cf1, atol=1e-6)


def test_generate_is_deterministic():
    grid, spec = tiny_setup()
    p = DiffusionParams(noise_std_x=0.01, noise_std_y=0.01)
    a = generate(grid, p, spec, seed=7)
    b = generate(grid, p, spec, seed=7)
    for name in a.fields():
        assert np.array_equal(a.fields()[name], b.fields()[name]), name
    c = generate(grid, p, spec, seed=8)
    assert not np.array_equal(a.y, c.y)


def test_world_splitting_at_start_step():
    grid, spec = tiny_setup(steps=20, start_step=5)
    ds = generate(grid, DiffusionParams(), spec, seed=4)
    assert np.array_equal(ds.x_cf[:5], ds.x[:5])
    assert np.array_equal(ds.y_cf[:5], ds.y[:5])
    assert np.array_equal(ds.y_cf[5], ds.y[5])
    assert not np.array_equal(ds.x_cf[5], ds.x[5])
    assert not np.array_equal(ds.y_cf[6:], ds.y[6:])


def test_identity_intervention_gives_equal_worlds():
    grid, spec = tiny_setup(update_factor=1.0)
    ds = generate(grid, DiffusionParams(noise_std_y=0.01), spec, seed=6)
    assert np.array_equal(ds.x_cf, ds.x)
    assert np.array_equal(ds.y_cf, ds.y)
    eff = true_effects(ds)
    assert eff.date == 0.0 and eff.iate == 0.0 and eff.late == 0.0


def test_counterfactual_treatment_agrees_outside_region():
    grid, spec = tiny_setup(update_factor=0.3)
    ds = generate(grid, DiffusionParams(), spec, seed=1)
    outside = ~spec.region
    assert np.array_equal(ds.x_cf[:, outside], ds.x[:, outside])
    inside_factual = ds.x[:, spec.region].astype(np.float64)
    inside_cf = ds.x_cf[:, spec.region].astype(np.float64)
    np.testing.assert_allclose(inside_cf, 0.3 * inside_factual, atol=1e-6)


def test_no_outcome_pathway_means_zero_effect():
    grid, spec = tiny_setup()
    p = DiffusionParams(gamma=0.0, beta2=0.0)
    ds = generate(grid, p, spec, seed=2)
    assert np.array_equal(ds.y_cf, ds.y)
    eff = true_effects(ds)
    assert eff.late == 0.0


def test_shared_noise_between_worlds():
    grid, spec = tiny_setup(update_factor=1.0)
    p = DiffusionParams(noise_std_x=0.05, noise_std_y=0.05)
    ds = generate(grid, p, spec, seed=13)
    assert np.array_equal(ds.y_cf, ds.y)


def test_divergence_raises_with_location():
    grid, spec = tiny_setup(steps=50)
    p = DiffusionParams(alpha=1.0e6, gamma=1.0e6)
    with pytest.raises(DivergenceError) as err:
        generate(grid, p, spec, seed=0)
    assert err.value.step is not None
    assert err.value.variable in ("X", "Y", "Z", "Y_cf")


def test_stability_validation():
    with pytest.raises(ValidationError):
        DiffusionParams(dt=30.0)
    with pytest.raises(ValidationError):
        DiffusionParams(noise_std_x=-0.1)


def test_apply_intervention_behavior(rng):
    region = region_mask(6, 6, (1, 3), (1, 3))
    spec = InterventionSpec(region=region, update_factor=0.5, start_step=4)
    x = rng.standard_normal((6, 6))
    before = apply_intervention(x, spec, 3)
    np.testing.assert_array_equal(before, x)
    assert before is not x
    after = apply_intervention(x, spec, 4)
    np.testing.assert_array_equal(after[~region], x[~region])
    np.testing.assert_allclose(after[region], 0.5 * x[region])
    with pytest.raises(ValidationError):
        apply_intervention(np.zeros((3, 3)), spec, 0)


def test_true_effects_lag_validation(tiny_dataset):
    with pytest.raises(ValidationError):
        true_effects(tiny_dataset, lag=0)
    with pytest.raises(ValidationError):
        true_effects(tiny_dataset, lag=tiny_dataset.grid.n_steps)
    eff = true_effects(tiny_dataset, lag=3)
    assert np.isfinite(eff.late)


def test_region_must_match_grid():
    grid = GridSpec(n_rows=8, n_cols=8, n_steps=5)
    spec = InterventionSpec(region=region_mask(6, 6, (1, 3), (1, 3)))
    with pytest.raises(ValidationError):
        generate(grid, DiffusionParams(), spec, seed=0)


def test_start_step_beyond_range_rejected():
    grid, spec = tiny_setup(steps=10, start_step=10)
    with pytest.raises(ValidationError):
        generate(grid, DiffusionParams(), spec, seed=0)
