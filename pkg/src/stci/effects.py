"""Treatment-effect estimators and evaluation metrics.

All estimators compare an outcome field under intervention against the
factual one, shifted by the temporal lag: the valid samples are
(y_cf - y_f)[lag:]. DATE averages over the treated region S, IATE over
its complement S', LATE over the whole grid. Callers holding arrays that
are already aligned to target times pass lag=0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ValidationError, check_region


@dataclass
class EffectEstimates:
    """Per-pixel effect map plus the three scalar summaries."""

    tau_map: np.ndarray
    date: float
    iate: float
    late: float
    lag: int
    region: np.ndarray

    def series(self):
        """Per-timestep DATE/IATE/LATE curves as a dict of 1D arrays."""
        inside = self.region
        return {
            "date": self.tau_map[:, inside].mean(axis=1),
            "iate": self.tau_map[:, ~inside].mean(axis=1),
            "late": self.tau_map.mean(axis=(1, 2)),
        }


def _lagged_diff(y_cf, y_f, lag):
    y_cf = np.asarray(y_cf, dtype=np.float64)
    y_f = np.asarray(y_f, dtype=np.float64)
    if y_cf.shape != y_f.shape:
        raise ValidationError(
            f"outcome shapes differ: {y_cf.shape} vs {y_f.shape}"
        )
    if not 0 <= lag < y_cf.shape[0]:
        raise ValidationError(f"lag {lag} out of range for {y_cf.shape[0]} steps")
    return y_cf[lag:] - y_f[lag:]


def estimate_date(y_cf, y_f, region, lag=1):
    """Direct effect: mean outcome difference over the treated region."""
    region = check_region(region)
    diff = _lagged_diff(y_cf, y_f, lag)
    return float(diff[:, region].mean())


def estimate_iate(y_cf, y_f, region, lag=1):
    """Indirect effect: mean outcome difference over the untreated region."""
    region = check_region(region)
    diff = _lagged_diff(y_cf, y_f, lag)
    return float(diff[:, ~region].mean())


def estimate_late(y_cf, y_f, lag=1):
    """Overall lagged effect: mean outcome difference over the whole grid."""
    diff = _lagged_diff(y_cf, y_f, lag)
    return float(diff.mean())


def estimate_all(y_cf, y_f, region, lag=1):
    """All three estimators on a shared effect map."""
    region = check_region(region)
    tau_map = _lagged_diff(y_cf, y_f, lag)
    return EffectEstimates(
        tau_map=tau_map,
        date=float(tau_map[:, region].mean()),
        iate=float(tau_map[:, ~region].mean()),
        late=float(tau_map.mean()),
        lag=lag,
        region=region,
    )


def sqrt_pehe(tau_true, tau_pred, region=None):
    """Root mean squared error between true and predicted effect maps.

    With a region, only that subset of pixels enters the mean (the
    DATE/IATE flavors); without one, the whole grid does (LATE flavor).
    """
    tau_true = np.asarray(tau_true, dtype=np.float64)
    tau_pred = np.asarray(tau_pred, dtype=np.float64)
    if tau_true.shape != tau_pred.shape:
        raise ValidationError(
            f"effect map shapes differ: {tau_true.shape} vs {tau_pred.shape}"
        )
    err = tau_true - tau_pred
    if region is not None:
        err = err[..., region] if err.ndim == 3 else err[region]
    return float(np.sqrt(np.mean(np.square(err))))


def rmse(y_true, y_pred):
    """Root mean squared error between outcome fields."""
    y_true = np.asarray(y_true, dtype=np.float64)
    y_pred = np.asarray(y_pred, dtype=np.float64)
    if y_true.shape != y_pred.shape:
        raise ValidationError(
            f"outcome shapes differ: {y_true.shape} vs {y_pred.shape}"
        )
    return float(np.sqrt(np.mean(np.square(y_true - y_pred))))


REPORT_KEYS = (
    "date_pehe",
    "iate_pehe",
    "late_pehe",
    "rmse",
    "oracle_date",
    "oracle_iate",
    "oracle_late",
    "predicted_date",
    "predicted_iate",
    "predicted_late",
)


def evaluation_report(dataset, y_hat_f, y_hat_cf, history_len, lag):
    """Score aligned predictions against the dataset's oracle.

    The prediction arrays cover target times t + lag for t in
    [history_len, T - lag), exactly what the model emits. Returns the
    flat report dict: the three PEHE flavors, RMSE, and oracle vs
    predicted effect scalars.
    """
    region = check_region(dataset.intervention.region)
    start = history_len + lag
    y_true = dataset.y[start:].astype(np.float64)
    y_cf_true = dataset.y_cf[start:].astype(np.float64)
    if y_hat_f.shape != y_true.shape or y_hat_cf.shape != y_true.shape:
        raise ValidationError(
            f"prediction shape {y_hat_f.shape} does not match "
            f"the aligned window {y_true.shape}"
        )
    tau_true = y_cf_true - y_true
    tau_pred = np.asarray(y_hat_cf, dtype=np.float64) - np.asarray(
        y_hat_f, dtype=np.float64
    )
    oracle = estimate_all(y_cf_true, y_true, region, lag=0)
    predicted = estimate_all(y_hat_cf, y_hat_f, region, lag=0)
    return {
        "date_pehe": sqrt_pehe(tau_true, tau_pred, region),
        "iate_pehe": sqrt_pehe(tau_true, tau_pred, ~region),
        "late_pehe": sqrt_pehe(tau_true, tau_pred),
        "rmse": rmse(y_true, y_hat_f),
        "oracle_date": oracle.date,
        "oracle_iate": oracle.iate,
        "oracle_late": oracle.late,
        "predicted_date": predicted.date,
        "predicted_iate": predicted.iate,
        "predicted_late": predicted.late,
    }
