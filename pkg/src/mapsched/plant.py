"""Truth-plant integration with backend selection.

The compiled kernel is preferred when the extension built; set
MAPS_PURE_PYTHON=1 to force the pure-Python fallback (used by the
backend-comparison benchmark).
"""

from __future__ import annotations

import math
import os

import numpy as np

from .errors import NumericalError, ParameterError
from .motor import OMEGA_REST, FrictionModel, MotorParams

if os.environ.get("MAPS_PURE_PYTHON", "") == "1":
    from . import _plant_py as _kernel

    BACKEND = "python"
else:
    try:
        from . import _plant_cy as _kernel  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        from . import _plant_py as _kernel

        BACKEND = "python"

# inner RK4 step small enough for the stiff electrical time constant
MAX_INNER_STEP = 1e-5


def default_substeps(dt: float) -> int:
    return max(1, math.ceil(dt / MAX_INNER_STEP))


def plant_step(state, u: float, f: FrictionModel, params: MotorParams,
               dt: float, substeps: int | None = None,
               tau_ext: float = 0.0) -> np.ndarray:
    """Advance the nonlinear truth plant one control tick of length dt.

    Integrates theta' = omega, Jeq omega' = Kt i + tau_ext - tau_fric,
    Lm i' = -Rm i - Ke omega + u with fixed-step RK4 at dt/substeps.
    """
    if substeps is None:
        substeps = default_substeps(dt)
    if substeps < 1:
        raise ParameterError("substeps must be at least 1")
    theta, omega, cur = (float(v) for v in np.asarray(state, dtype=float).reshape(3))
    theta, omega, cur = _kernel.motor_rk4(
        theta, omega, cur, float(u), float(dt), int(substeps),
        params.Kt, params.Ke, params.Jeq, params.Lm, params.Rm,
        f.tau_s, f.tau_c, f.b, OMEGA_REST, float(tau_ext),
    )
    if not (math.isfinite(theta) and math.isfinite(omega) and math.isfinite(cur)):
        raise NumericalError(
            f"truth plant diverged (state=({theta}, {omega}, {cur}), u={u}, b={f.b})"
        )
    return np.array([theta, omega, cur])
