#!/usr/bin/env python3
"""Dicke-basis spin operators and coherent spin states, checked by hand.

Everything here is small enough to eyeball: the su(2) algebra, the Casimir
invariant, first and second moments of coherent states, and the quantum
Fisher information of the two states that bracket the metrological range
(a coherent state at F = N, a GHZ state at F = N^2).
"""
import numpy as np

from squeezerl import (
    build_spin_operators,
    coherent_spin_state,
    css_state_vector,
    expectation,
    purity,
    qfi,
    xi_perp_squared,
    xi_z_squared,
)


def section(title):
    print()
    print(title)
    print("-" * len(title))


def variance(rho, op):
    return expectation(rho, op @ op) - expectation(rho, op) ** 2


def main():
    ops = build_spin_operators(4)
    section(f"operators for N = {ops.n_atoms} atoms (j = {ops.j}, dim = {ops.dim})")
    print("Jz diagonal:", np.diag(ops.jz).real)
    comm = ops.jx @ ops.jy - ops.jy @ ops.jx
    print(f"max |[Jx, Jy] - i Jz| = {np.abs(comm - 1j * ops.jz).max():.3e}")
    casimir = ops.jx @ ops.jx + ops.jy @ ops.jy + ops.jz @ ops.jz
    print("Casimir diagonal:", np.diag(casimir).real, f" expected {ops.j * (ops.j + 1)}")

    n = 20
    ops = build_spin_operators(n)
    j = ops.j

    section(f"coherent spin state moments (N = {n})")
    rho = coherent_spin_state(n, 0.0, 0.0)
    print(f"north pole: <Jz> = {expectation(rho, ops.jz):.6f}  (j = {j})")
    print(f"            Var(Jx) = {variance(rho, ops.jx):.6f}, "
          f"Var(Jy) = {variance(rho, ops.jy):.6f}  (j/2 = {j / 2})")

    theta, phi = 1.1, 0.7
    rho = coherent_spin_state(n, theta, phi)
    jvec = np.array([expectation(rho, op) for op in (ops.jx, ops.jy, ops.jz)])
    unit = np.array([np.sin(theta) * np.cos(phi),
                     np.sin(theta) * np.sin(phi),
                     np.cos(theta)])
    print(f"tilted (theta = {theta}, phi = {phi}):")
    print(f"  <J>      = {np.round(jvec, 6)}")
    print(f"  j * n    = {np.round(j * unit, 6)}")
    print(f"  purity   = {purity(rho):.12f}")

    section("transverse squeezing parameter of any coherent state is exactly 1")
    for th, ph in [(np.pi / 2, 0.0), (np.pi / 2, 1.3), (2.2, 4.0)]:
        rho = coherent_spin_state(n, th, ph)
        xi_perp, _ = xi_perp_squared(rho, ops)
        print(f"  theta = {th:.3f}, phi = {ph:.3f}:  xi_perp^2 = {xi_perp:.12f}, "
              f"xi_z^2 = {xi_z_squared(rho, ops):.6f}")
    print("xi_z^2 follows sin^2(theta), pure geometry; genuine squeezing needs")
    print("xi_perp^2 < 1, or xi_z^2 < 1 with the mean spin on the equator")

    section("quantum Fisher information for rotations about z")
    rho = coherent_spin_state(n, np.pi / 2, 0.0)
    print(f"  coherent state on the equator: F = {qfi(rho, ops.jz):.6f}  (N = {n})")
    ghz = (css_state_vector(n, 0.0, 0.0) + css_state_vector(n, np.pi, 0.0)) / np.sqrt(2)
    rho = np.outer(ghz, ghz.conj())
    print(f"  GHZ superposition of poles:    F = {qfi(rho, ops.jz):.6f}  (N^2 = {n ** 2})")
    print("anything above N certifies entanglement; N^2 is the Heisenberg limit")


if __name__ == "__main__":
    main()
