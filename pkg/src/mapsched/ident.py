"""Viscous-coefficient identification from steady-state voltage/velocity data.

At steady state the motor obeys V = (Rm*b/Kt + Ke) * omega, so the slope of
an origin-constrained regression of voltage on velocity yields b directly.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, ParameterError
from .motor import MotorParams


@dataclass(frozen=True)
class SteadyStateSample:
    """One steady-state operating point: applied voltage and settled velocity."""

    voltage: float
    velocity: float

    def __post_init__(self):
        if self.velocity != 0.0 and self.voltage * self.velocity < 0.0:
            raise ParameterError(
                "steady-state voltage and velocity must share a sign "
                f"(got V={self.voltage}, omega={self.velocity})"
            )


@dataclass(frozen=True)
class IdentResult:
    slope: float            # V*s/rad
    viscous_coeff: float    # N*m*s/rad
    residual_rms: float     # V
    warning: str | None = None


def regress_slope(samples) -> tuple[float, float]:
    """Least-squares slope of V = mu * omega through the origin.

    Returns (mu, residual_rms). Requires at least two samples with distinct
    velocities; all-zero velocities are degenerate.
    """
    samples = list(samples)
    if len(samples) < 2:
        raise ParameterError("need at least 2 steady-state samples")
    omega = np.array([s.velocity for s in samples])
    volts = np.array([s.voltage for s in samples])
    if np.all(omega == 0.0):
        raise ParameterError("all velocities are zero; slope is undefined")
    if np.unique(omega).size < 2:
        raise ParameterError("need at least two distinct velocities")
    mu = float(np.dot(volts, omega) / np.dot(omega, omega))
    residual_rms = float(np.sqrt(np.mean((volts - mu * omega) ** 2)))
    return mu, residual_rms


def regress_slope_with_intercept(samples) -> tuple[float, float, float]:
    """Diagnostic fit V = mu*omega + c; not used for the coefficient itself."""
    samples = list(samples)
    if len(samples) < 2:
        raise ParameterError("need at least 2 steady-state samples")
    omega = np.array([s.velocity for s in samples])
    volts = np.array([s.voltage for s in samples])
    if np.unique(omega).size < 2:
        raise ParameterError("need at least two distinct velocities")
    design = np.column_stack([omega, np.ones_like(omega)])
    (mu, c), *_ = np.linalg.lstsq(design, volts, rcond=None)
    resid = volts - (mu * omega + c)
    return float(mu), float(c), float(np.sqrt(np.mean(resid**2)))


def regress_slope_weighted(samples, sigmas) -> tuple[float, float]:
    """Origin-constrained fit with inverse-variance weights on the voltages."""
    samples = list(samples)
    w = 1.0 / np.asarray(sigmas, dtype=float) ** 2
    if len(w) != len(samples):
        raise ParameterError("one sigma per sample required")
    omega = np.array([s.velocity for s in samples])
    volts = np.array([s.voltage for s in samples])
    if np.all(omega == 0.0):
        raise ParameterError("all velocities are zero; slope is undefined")
    mu = float(np.sum(w * volts * omega) / np.sum(w * omega**2))
    residual_rms = float(np.sqrt(np.mean((volts - mu * omega) ** 2)))
    return mu, residual_rms


def viscous_from_slope(params: MotorParams, mu: float) -> float:
    """b = (Kt/Rm) * (mu - Ke); may be negative, the caller decides what to do."""
    return params.Kt / params.Rm * (mu - params.Ke)


def identify(params: MotorParams, samples) -> IdentResult:
    """Full identification: regress the slope, convert to b, flag b <= 0."""
    mu, residual_rms = regress_slope(samples)
    b = viscous_from_slope(params, mu)
    warning = None
    if b <= 0.0:
        warning = (
            f"identified viscous coefficient is non-positive ({b:.4e}); "
            "slope does not exceed the back-EMF constant"
        )
    return IdentResult(slope=mu, viscous_coeff=b, residual_rms=residual_rms, warning=warning)


def read_samples_csv(path) -> list[SteadyStateSample]:
    """Read (voltage, velocity) rows from a two-column CSV; header optional."""
    rows = []
    with Path(path).open(newline="") as fh:
        for i, row in enumerate(csv.reader(fh)):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) < 2:
                raise ConfigError(f"{path}: row {i + 1} needs two columns (voltage, velocity)")
            try:
                v, w = float(row[0]), float(row[1])
            except ValueError:
                if i == 0:
                    continue  # header row
                raise ConfigError(f"{path}: row {i + 1} is not numeric") from None
            rows.append(SteadyStateSample(voltage=v, velocity=w))
    if not rows:
        raise ConfigError(f"{path}: no samples found")
    return rows
