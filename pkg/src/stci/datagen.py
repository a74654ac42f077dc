"""Diffusion-based benchmark generator with a counterfactual oracle.

Three coupled fields evolve on an N x M grid: a covariate Z diffusing
freely, a treatment X driven by Z, and an outcome Y driven by both plus,
optionally, the neighborhood mean of X (spatial interference). A second
outcome trajectory is generated under a sustained multiplicative
intervention on X, sharing every noise draw with the factual world, so
the difference of the two outcome fields is the ground-truth effect.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .core import (
    CausalDataset,
    DivergenceError,
    GridSpec,
    InterventionSpec,
    ValidationError,
)
from .effects import EffectEstimates, estimate_date, estimate_iate, estimate_late
from .kernels import laplacian, neighborhood_mean

DIVERGENCE_LIMIT = 1.0e6


@dataclass(frozen=True)
class DiffusionParams:
    """Coefficients of the generating equations.

    The stability bound dt * max(d) <= 0.25 keeps the five-point
    diffusion update non-oscillatory.
    """

    d_x: float = 0.01
    d_y: float = 0.01
    d_z: float = 0.01
    dt: float = 0.1
    alpha: float = 0.5
    beta: float = 0.3
    gamma: float = 0.7
    beta2: float = 0.5
    lag: int = 1
    neighborhood_radius: int = 1
    interference: bool = True
    noise_std_x: float = 0.0
    noise_std_y: float = 0.0
    init_amplitude: float = 0.05

    def __post_init__(self):
        if min(self.d_x, self.d_y, self.d_z) < 0:
            raise ValidationError("diffusion coefficients must be nonnegative")
        if self.dt <= 0:
            raise ValidationError("dt must be positive")
        if self.neighborhood_radius < 1:
            raise ValidationError("neighborhood_radius must be >= 1")
        if self.dt * max(self.d_x, self.d_y, self.d_z) > 0.25:
            raise ValidationError(
                "unstable configuration: dt * max(d_x, d_y, d_z) must be <= 0.25"
            )
        if min(self.noise_std_x, self.noise_std_y) < 0:
            raise ValidationError("noise standard deviations must be nonnegative")
        if self.lag < 1:
            raise ValidationError("lag must be >= 1")

    def without_interference(self):
        """Matched configuration with the spillover pathway removed."""
        return replace(self, interference=False, beta2=0.0)

    def to_manifest(self):
        return {
            "d_x": self.d_x,
            "d_y": self.d_y,
            "d_z": self.d_z,
            "dt": self.dt,
            "alpha": self.alpha,
            "beta": self.beta,
            "gamma": self.gamma,
            "beta2": self.beta2,
            "lag": self.lag,
            "neighborhood_radius": self.neighborhood_radius,
            "interference": self.interference,
            "noise_std_x": self.noise_std_x,
            "noise_std_y": self.noise_std_y,
            "init_amplitude": self.init_amplitude,
        }

    @staticmethod
    def from_manifest(d):
        return DiffusionParams(**d)


def apply_intervention(x_t, spec, t):
    """Rewrite X inside the treated region once the intervention starts."""
    x_t = np.asarray(x_t)
    if x_t.shape != spec.region.shape:
        raise ValidationError(
            f"field shape {x_t.shape} does not match region {spec.region.shape}"
        )
    if t < spec.start_step:
        return x_t.copy()
    out = x_t.copy()
    out[spec.region] = out[spec.region] * spec.update_factor
    return out


def _check_finite(name, arr, t):
    if not np.isfinite(arr).all() or np.abs(arr).max() > DIVERGENCE_LIMIT:
        raise DivergenceError(
            f"{name} diverged at step {t} (|max| > {DIVERGENCE_LIMIT:g})",
            variable=name,
            step=t,
        )


def step(z_prev, x_prev, y_prev, params, rng=None):
    """One factual update of (Z, X, Y); all stencils use the previous state."""
    dt = params.dt
    lap_z = laplacian(z_prev)
    z_t = z_prev + dt * (params.d_z * lap_z)
    x_t = x_prev + dt * (params.d_x * laplacian(x_prev) + params.alpha * lap_z)
    y_rhs = (
        params.d_y * laplacian(y_prev)
        + params.beta * lap_z
        + params.gamma * laplacian(x_prev)
    )
    if params.interference:
        y_rhs = y_rhs + params.beta2 * neighborhood_mean(
            x_prev, params.neighborhood_radius
        )
    y_t = y_prev + dt * y_rhs
    if rng is not None and params.noise_std_x > 0:
        x_t = x_t + rng.normal(0.0, params.noise_std_x, size=x_t.shape)
    if rng is not None and params.noise_std_y > 0:
        y_t = y_t + rng.normal(0.0, params.noise_std_y, size=y_t.shape)
    return z_t, x_t, y_t


def _initial_field(rng, n_rows, n_cols, amplitude):
    """Centered uniform noise, box-blurred once so the Laplacian is bounded."""
    raw = rng.uniform(-amplitude, amplitude, size=(n_rows, n_cols))
    p = np.pad(raw, 1, mode="edge")
    acc = np.zeros_like(raw)
    for di in range(3):
        for dj in range(3):
            acc += p[di : di + n_rows, dj : dj + n_cols]
    return acc / 9.0


def generate(grid, params, spec, seed):
    """Run both worlds for T steps and return the assembled dataset.

    The counterfactual treatment at each step is the factual field with
    the region rewritten (so the two agree outside the region exactly),
    while the counterfactual outcome integrates its own trajectory with
    the rewritten treatment substituted. Noise draws are shared between
    worlds. Deterministic: the same seed gives a bit-identical dataset.
    """
    if spec.region.shape != (grid.n_rows, grid.n_cols):
        raise ValidationError(
            f"region shape {spec.region.shape} does not match "
            f"grid {grid.n_rows}x{grid.n_cols}"
        )
    if spec.start_step >= grid.n_steps:
        raise ValidationError("start_step must lie inside the simulated range")

    n_steps, n_rows, n_cols = grid.shape
    dt = params.dt
    rng = np.random.default_rng(seed)

    z = _initial_field(rng, n_rows, n_cols, params.init_amplitude)
    x = _initial_field(rng, n_rows, n_cols, params.init_amplitude)
    y = _initial_field(rng, n_rows, n_cols, params.init_amplitude)
    y_cf = y.copy()
    x_cf = apply_intervention(x, spec, 0)

    xs = np.empty(grid.shape)
    zs = np.empty(grid.shape)
    ys = np.empty(grid.shape)
    xs_cf = np.empty(grid.shape)
    ys_cf = np.empty(grid.shape)
    xs[0], zs[0], ys[0], xs_cf[0], ys_cf[0] = x, z, y, x_cf, y_cf

    for t in range(1, n_steps):
        eps_x = (
            rng.normal(0.0, params.noise_std_x, size=(n_rows, n_cols))
            if params.noise_std_x > 0
            else None
        )
        eps_y = (
            rng.normal(0.0, params.noise_std_y, size=(n_rows, n_cols))
            if params.noise_std_y > 0
            else None
        )

        lap_z = laplacian(z)
        z_new = z + dt * (params.d_z * lap_z)
        x_new = x + dt * (params.d_x * laplacian(x) + params.alpha * lap_z)

        y_rhs = (
            params.d_y * laplacian(y)
            + params.beta * lap_z
            + params.gamma * laplacian(x)
        )
        y_cf_rhs = (
            params.d_y * laplacian(y_cf)
            + params.beta * lap_z
            + params.gamma * laplacian(x_cf)
        )
        if params.interference:
            m = params.neighborhood_radius
            y_rhs = y_rhs + params.beta2 * neighborhood_mean(x, m)
            y_cf_rhs = y_cf_rhs + params.beta2 * neighborhood_mean(x_cf, m)
        y_new = y + dt * y_rhs
        y_cf_new = y_cf + dt * y_cf_rhs

        if eps_x is not None:
            x_new = x_new + eps_x
        if eps_y is not None:
            y_new = y_new + eps_y
            y_cf_new = y_cf_new + eps_y

        z, x, y, y_cf = z_new, x_new, y_new, y_cf_new
        x_cf = apply_intervention(x, spec, t)

        _check_finite("Z", z, t)
        _check_finite("X", x, t)
        _check_finite("Y", y, t)
        _check_finite("Y_cf", y_cf, t)

        xs[t], zs[t], ys[t], xs_cf[t], ys_cf[t] = x, z, y, x_cf, y_cf

    dataset = CausalDataset(
        grid=grid,
        x=xs.astype(np.float32),
        z=zs.astype(np.float32),
        y=ys.astype(np.float32),
        x_cf=xs_cf.astype(np.float32),
        y_cf=ys_cf.astype(np.float32),
        params=params,
        intervention=spec,
        seed=seed,
    )
    return dataset.validate()


def true_effects(dataset, lag=None):
    """Oracle effect estimates from the stored counterfactual world."""
    if lag is None:
        lag = dataset.grid.lag
    if not 1 <= lag < dataset.grid.n_steps:
        raise ValidationError(f"lag {lag} out of range for T={dataset.grid.n_steps}")
    region = dataset.intervention.region
    y_cf = dataset.y_cf.astype(np.float64)
    y_f = dataset.y.astype(np.float64)
    tau_map = y_cf[lag:] - y_f[lag:]
    return EffectEstimates(
        tau_map=tau_map,
        date=estimate_date(y_cf, y_f, region, lag),
        iate=estimate_iate(y_cf, y_f, region, lag),
        late=estimate_late(y_cf, y_f, lag),
        lag=lag,
        region=region,
    )
