# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled RK4 kernel for the nonlinear motor truth plant.

Hot path of every scenario run: the electrical pole forces ~10 microsecond
substeps, i.e. hundreds of RK4 stages per 2 ms control tick. Arithmetic and
operation order mirror _plant_py.py so both backends agree.
"""

from libc.math cimport fabs, isfinite


cdef inline double _domega(double omega, double cur, double tau_ext,
                           double kt, double jeq, double tau_s, double tau_c,
                           double b, double omega_rest) noexcept nogil:
    cdef double tau_m = kt * cur + tau_ext
    cdef double sgn
    if fabs(omega) < omega_rest and fabs(tau_m) < tau_s:
        return 0.0
    if omega > 0.0:
        sgn = 1.0
    elif omega < 0.0:
        sgn = -1.0
    else:
        sgn = 0.0
    return (tau_m - (tau_c * sgn + b * omega)) / jeq


def motor_rk4(double theta, double omega, double cur, double u,
              double dt, int substeps,
              double kt, double ke, double jeq, double lm, double rm,
              double tau_s, double tau_c, double b, double omega_rest,
              double tau_ext):
    """Advance (theta, omega, current) by dt using `substeps` RK4 steps with
    the input voltage and external torque held constant."""
    cdef double h = dt / substeps
    cdef int i
    cdef double k1t, k1w, k1c, k2t, k2w, k2c, k3t, k3w, k3c, k4t, k4w, k4c
    cdef double w2, c2, w3, c3, w4, c4
    with nogil:
        for i in range(substeps):
            k1t = omega
            k1w = _domega(omega, cur, tau_ext, kt, jeq, tau_s, tau_c, b, omega_rest)
            k1c = (u - rm * cur - ke * omega) / lm

            w2 = omega + 0.5 * h * k1w
            c2 = cur + 0.5 * h * k1c
            k2t = w2
            k2w = _domega(w2, c2, tau_ext, kt, jeq, tau_s, tau_c, b, omega_rest)
            k2c = (u - rm * c2 - ke * w2) / lm

            w3 = omega + 0.5 * h * k2w
            c3 = cur + 0.5 * h * k2c
            k3t = w3
            k3w = _domega(w3, c3, tau_ext, kt, jeq, tau_s, tau_c, b, omega_rest)
            k3c = (u - rm * c3 - ke * w3) / lm

            w4 = omega + h * k3w
            c4 = cur + h * k3c
            k4t = w4
            k4w = _domega(w4, c4, tau_ext, kt, jeq, tau_s, tau_c, b, omega_rest)
            k4c = (u - rm * c4 - ke * w4) / lm

            theta = theta + (h / 6.0) * (k1t + 2.0 * k2t + 2.0 * k3t + k4t)
            omega = omega + (h / 6.0) * (k1w + 2.0 * k2w + 2.0 * k3w + k4w)
            cur = cur + (h / 6.0) * (k1c + 2.0 * k2c + 2.0 * k3c + k4c)
    return theta, omega, cur
