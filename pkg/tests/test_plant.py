import math

import numpy as np
import pytest

from mapsched import _plant_py
from mapsched.errors import ParameterError
from mapsched.motor import FrictionModel
from mapsched.plant import BACKEND, default_substeps, plant_step

try:
    from mapsched import _plant_cy
except ImportError:
    _plant_cy = None


KERNEL_ARGS = dict(
    kt=0.042, ke=0.042, jeq=2.06e-5, lm=1.16e-3, rm=8.4,
    tau_s=0.003, tau_c=0.002, b=2.46e-6, omega_rest=1e-6, tau_ext=0.0,
)


def test_default_substeps_keeps_inner_step_small():
    assert default_substeps(0.002) == 200
    assert 0.002 / default_substeps(0.002) <= 1e-5
    assert default_substeps(1e-6) == 1


def test_equilibrium_under_stiction(motor):
    f = FrictionModel(tau_s=0.003, tau_c=0.002, b=2.46e-6)
    state = plant_step(np.zeros(3), 0.0, f, motor.params, 0.002)
    assert np.array_equal(state, np.zeros(3))


def test_small_torque_does_not_break_away(motor):
    # voltage small enough that Kt*i stays below the stiction threshold
    f = FrictionModel(tau_s=0.003, tau_c=0.002, b=2.46e-6)
    state = np.zeros(3)
    for _ in range(500):
        state = plant_step(state, 0.3, f, motor.params, 0.002)
    assert state[1] == 0.0
    assert state[0] == 0.0
    assert state[2] > 0.0  # current flows, rotor held


def test_steady_state_velocity_matches_regression_model(motor):
    # after 2 s at constant voltage the speed sits on the steady-state line
    # omega = V / (Rm*b/Kt + Ke) used by the identification procedure
    b = 2.46e-6
    f = FrictionModel(tau_s=0.003, tau_c=0.0, b=b)
    p = motor.params
    state = np.zeros(3)
    for _ in range(1000):
        state = plant_step(state, 1.0, f, p, 0.002)
    expected = 1.0 / (p.Rm * b / p.Kt + p.Ke)
    assert state[1] == pytest.approx(expected, rel=0.02)


def test_substep_doubling_converged(motor):
    f = FrictionModel(tau_s=0.003, tau_c=0.002, b=1.63e-4)
    start = np.array([0.1, 3.0, -0.02])
    a = plant_step(start, 2.0, f, motor.params, 0.002, substeps=200)
    b = plant_step(start, 2.0, f, motor.params, 0.002, substeps=400)
    assert np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-12)) < 1e-9


def test_passive_decay_with_zero_input(motor):
    f = FrictionModel(tau_s=0.003, tau_c=0.002, b=2.46e-6)
    state = np.array([0.0, 5.0, 0.0])
    norms = []
    for _ in range(1000):
        state = plant_step(state, 0.0, f, motor.params, 0.002)
        norms.append(float(np.linalg.norm(state)))
    # after the initial transient the norm never grows beyond the Coulomb
    # chatter resolution of the fixed-step integrator
    tail = np.array(norms[250:])
    assert np.all(np.diff(tail) <= 1e-8)
    assert tail[-1] <= tail[0] + 1e-6
    assert abs(state[1]) < 1e-3  # spun down


def test_substeps_must_be_positive(motor):
    f = FrictionModel()
    with pytest.raises(ParameterError):
        plant_step(np.zeros(3), 0.0, f, motor.params, 0.002, substeps=0)


@pytest.mark.skipif(_plant_cy is None, reason="compiled kernel not built")
class TestBackendEquivalence:
    def test_single_tick_bitwise(self):
        args = (0.1, 3.7, -0.05, 2.5, 0.002, 200, *KERNEL_ARGS.values())
        assert _plant_py.motor_rk4(*args) == _plant_cy.motor_rk4(*args)

    def test_long_horizon_bitwise(self):
        sa = sb = (0.0, 0.0, 0.0)
        for k in range(300):
            u = 2.0 * math.sin(2.0 * math.pi * 0.5 * k * 0.002)
            sa = _plant_py.motor_rk4(*sa, u, 0.002, 200, *KERNEL_ARGS.values())
            sb = _plant_cy.motor_rk4(*sb, u, 0.002, 200, *KERNEL_ARGS.values())
        assert sa == sb

    def test_selected_backend_reported(self):
        assert BACKEND in ("compiled", "python")
