"""Evaluation metrics: voltage-magnitude MAPE, voltage-angle MAE in degrees
with wrap-around, RMSE over stacked real and imaginary parts, and Student-t
confidence intervals over repeated runs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats


class MetricsError(Exception):
    pass


@dataclass(frozen=True)
class EstimateReport:
    mape_magnitude: float  # percent
    mae_angle: float  # degrees
    rmse: float  # per-unit
    n_runs: int = 1
    ci95: dict[str, float] | None = None

    def __post_init__(self):
        if min(self.mape_magnitude, self.mae_angle, self.rmse) < 0:
            raise MetricsError("metrics must be nonnegative")
        if self.ci95 is not None and self.n_runs < 2:
            raise MetricsError("confidence intervals require at least two runs")

    def to_dict(self) -> dict:
        return {
            "mape_magnitude_pct": self.mape_magnitude,
            "mae_angle_deg": self.mae_angle,
            "rmse": self.rmse,
            "n_runs": self.n_runs,
            "ci95": self.ci95,
        }


def wrap_degrees(delta: np.ndarray) -> np.ndarray:
    """Map angle differences into (-180, 180]."""
    return 180.0 - np.mod(180.0 - np.asarray(delta), 360.0)


def evaluate_estimate(v_est: np.ndarray, v_true: np.ndarray) -> EstimateReport:
    """Single-run errors, averaged jointly over time steps and phases."""
    v_est = np.asarray(v_est, dtype=complex)
    v_true = np.asarray(v_true, dtype=complex)
    if v_est.shape != v_true.shape:
        raise MetricsError(f"shape mismatch: {v_est.shape} vs {v_true.shape}")
    mag_true = np.abs(v_true)
    if np.min(mag_true) == 0:
        raise MetricsError("true voltage has a zero-magnitude entry")
    mape = 100.0 * np.mean(np.abs(np.abs(v_est) - mag_true) / mag_true)
    delta = np.degrees(np.angle(v_est) - np.angle(v_true))
    mae = np.mean(np.abs(wrap_degrees(delta)))
    diff = v_est - v_true
    rmse = np.sqrt(np.mean(diff.real**2 + diff.imag**2))
    return EstimateReport(
        mape_magnitude=float(mape), mae_angle=float(mae), rmse=float(rmse)
    )


def confidence_interval(samples) -> tuple[float, float]:
    """Mean and 95% Student-t half-width."""
    samples = np.asarray(samples, dtype=float)
    n = samples.size
    if n < 2:
        raise MetricsError("confidence interval requires at least two samples")
    mean = float(np.mean(samples))
    s = float(np.std(samples, ddof=1))
    t = float(stats.t.ppf(0.975, n - 1))
    return mean, t * s / np.sqrt(n)


def aggregate_reports(reports: list[EstimateReport]) -> EstimateReport:
    """Combine per-run reports into means with 95% half-widths."""
    if not reports:
        raise MetricsError("no reports to aggregate")
    if len(reports) == 1:
        return reports[0]
    fields = {
        "mape_magnitude_pct": [r.mape_magnitude for r in reports],
        "mae_angle_deg": [r.mae_angle for r in reports],
        "rmse": [r.rmse for r in reports],
    }
    means, ci = {}, {}
    for name, vals in fields.items():
        means[name], ci[name] = confidence_interval(vals)
    return EstimateReport(
        mape_magnitude=means["mape_magnitude_pct"],
        mae_angle=means["mae_angle_deg"],
        rmse=means["rmse"],
        n_runs=len(reports),
        ci95=ci,
    )


def voltage_from_matrix(x: np.ndarray) -> np.ndarray:
    """Complex voltage time series (T, |P|) from the first two rows of each
    time block of a measurement-shaped matrix."""
    m = x.shape[0]
    if m % 5 != 0:
        raise MetricsError("row count is not a multiple of 5")
    t_steps = m // 5
    v = np.empty((t_steps, x.shape[1]), dtype=complex)
    for t in range(t_steps):
        v[t] = x[5 * t] + 1j * x[5 * t + 1]
    return v
