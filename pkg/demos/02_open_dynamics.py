#!/usr/bin/env python3
"""Lindblad propagation two ways: fixed-step RK4 against the superoperator
exponential.

The RK4 stepper is what training uses (it only ever multiplies dense
(N+1) x (N+1) matrices); the exponential route builds the full (N+1)^2
Liouvillian and is exact up to scipy's expm, so it serves as the reference.
They have to agree to many digits, with and without dissipation.
"""
import time

import numpy as np

from squeezerl import (
    IntegratorConfig,
    NoiseParams,
    build_spin_operators,
    coherent_spin_state,
    evolve_segment,
    propagate_exact,
    purity,
)

N = 12
SEGMENT = 0.02   # same segment length the control problem uses at t_final = 2


def max_diff(a, b):
    return float(np.abs(a - b).max())


def chain(rho, omega, n_segments, ops, noise, integrator=None):
    for _ in range(n_segments):
        rho = evolve_segment(rho, omega, SEGMENT, ops, noise, integrator)
    return rho


def main():
    ops = build_spin_operators(N)
    rho0 = coherent_spin_state(N, np.pi / 2, 0.0)
    omega = 1.34
    evolve_segment(rho0, omega, SEGMENT, ops, NoiseParams())  # jit warmup

    cases = [
        ("closed system", NoiseParams()),
        ("open, gamma = gamma_z = 0.001", NoiseParams(gamma=0.001, gamma_z=0.001)),
        ("open + thermal, n_th = 0.5", NoiseParams(gamma=0.001, gamma_z=0.001, n_th=0.5)),
    ]
    for label, noise in cases:
        t0 = time.perf_counter()
        rk4 = chain(rho0, omega, 50, ops, noise)
        t_rk4 = time.perf_counter() - t0
        t0 = time.perf_counter()
        exact = propagate_exact(rho0, omega, 50 * SEGMENT, ops, noise)
        t_exact = time.perf_counter() - t0
        print(f"\n== {label}, constant drive to t = 1.0 ==")
        print(f"max |rho_rk4 - rho_expm| = {max_diff(rk4, exact):.3e}"
              f"   (rk4 {t_rk4 * 1e3:.0f} ms, expm {t_exact * 1e3:.0f} ms)")
        print(f"trace error = {abs(np.trace(rk4).real - 1.0):.2e},"
              f"  purity = {purity(rk4):.8f}")

    # Fourth order in the substep: halving dt should cut the one-segment
    # error by about 16x until roundoff takes over.
    noise = NoiseParams(gamma=0.001, gamma_z=0.001)
    exact = propagate_exact(rho0, 2.0, SEGMENT, ops, noise)
    print("\n== substep convergence on a single segment (omega = 2) ==")
    prev = None
    for substeps in (1, 2, 4, 8, 16):
        cfg = IntegratorConfig(substeps_per_segment=substeps)
        err = max_diff(evolve_segment(rho0, 2.0, SEGMENT, ops, noise, cfg), exact)
        note = "" if prev is None else f"   {prev / err:5.1f}x smaller"
        print(f"  substeps = {substeps:2d}:  error = {err:.3e}{note}")
        prev = err
    auto = IntegratorConfig().substeps_for(SEGMENT)
    print(f"default policy picks {auto} substeps for a {SEGMENT} segment (dt = 0.001)")


if __name__ == "__main__":
    main()
