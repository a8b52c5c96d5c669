"""Squeezing parameters, quantum Fisher information, and Husimi grids."""

import math

import numpy as np
import pytest

from conftest import random_density_matrix, scan_xi_perp
from squeezerl import (
    averaged_qfi,
    build_spin_operators,
    coherent_spin_state,
    css_state_vector,
    expectation,
    husimi_grid,
    husimi_grid_axes,
    mean_spin_frame,
    qfi,
    squeezing_report,
    to_decibels,
    xi_perp_squared,
    xi_z_squared,
)
from squeezerl.dynamics import NoiseParams, evolve_segment


def _random_framed_state(ops, rng):
    """Random mixed state with a well-defined mean-spin direction."""
    while True:
        rank = int(rng.integers(1, ops.dim + 1))
        rho = random_density_matrix(ops.dim, rng, rank)
        mx = expectation(rho, ops.jx)
        my = expectation(rho, ops.jy)
        mz = expectation(rho, ops.jz)
        if math.sqrt(mx * mx + my * my + mz * mz) > 1e-3:
            return rho


def test_frame_roundtrip(ops20):
    theta, phi = 1.0, 2.0
    rho = coherent_spin_state(20, theta, phi)
    frame = mean_spin_frame(rho, ops20)
    assert frame.theta == pytest.approx(theta, abs=1e-10)
    assert frame.phi == pytest.approx(phi, abs=1e-10)
    assert frame.norm == pytest.approx(10.0, rel=1e-12)


def test_frame_negative_phi_branch(ops20):
    rho = coherent_spin_state(20, math.pi / 2, -0.75)
    frame = mean_spin_frame(rho, ops20)
    assert frame.phi == pytest.approx(-0.75, abs=1e-10)


def test_frame_pole_convention(ops20):
    rho = coherent_spin_state(20, 0.0, 0.0)
    frame = mean_spin_frame(rho, ops20)
    assert frame.theta == pytest.approx(0.0, abs=1e-8)
    assert frame.phi == 0.0


def test_frame_on_meridian_uses_positive_sign(ops20):
    # <Jy> = 0, <Jx> < 0: sign(0) -> +1 puts phi at +pi, not -pi
    rho = coherent_spin_state(20, math.pi / 2, math.pi)
    frame = mean_spin_frame(rho, ops20)
    assert frame.phi == pytest.approx(math.pi, abs=1e-10)


def test_frame_undefined_for_isotropic_state(ops4):
    rho = np.eye(ops4.dim, dtype=complex) / ops4.dim
    with pytest.raises(ValueError):
        mean_spin_frame(rho, ops4)


def test_frame_basis_orthonormal(ops20, rng):
    rho = _random_framed_state(ops20, rng)
    frame = mean_spin_frame(rho, ops20)
    n3 = np.array([
        math.sin(frame.theta) * math.cos(frame.phi),
        math.sin(frame.theta) * math.sin(frame.phi),
        math.cos(frame.theta)])
    assert abs(frame.n1 @ frame.n2) < 1e-12
    assert abs(frame.n1 @ n3) < 1e-12
    assert abs(frame.n2 @ n3) < 1e-12
    assert np.allclose(np.cross(frame.n1, frame.n2), -n3, atol=1e-12)


def test_css_squeezing_is_unity(ops20):
    rho = coherent_spin_state(20, math.pi / 2, 0.0)
    assert xi_z_squared(rho, ops20) == pytest.approx(1.0, rel=1e-12)
    xi2, varphi = xi_perp_squared(rho, ops20)
    assert xi2 == pytest.approx(1.0, rel=1e-12)
    assert varphi == pytest.approx(math.pi / 2, abs=1e-12)


def test_css_squeezing_unity_any_orientation(ops20, rng):
    for _ in range(5):
        theta = rng.uniform(0.2, math.pi - 0.2)
        phi = rng.uniform(-math.pi, math.pi)
        rho = coherent_spin_state(20, theta, phi)
        xi2, _ = xi_perp_squared(rho, ops20)
        assert xi2 == pytest.approx(1.0, rel=1e-10)


@pytest.mark.parametrize("n_atoms", [4, 10, 20])
def test_xi_perp_matches_angular_scan(n_atoms, rng):
    ops = build_spin_operators(n_atoms)
    for _ in range(50):
        rho = _random_framed_state(ops, rng)
        want, _ = scan_xi_perp(rho, ops)
        got, varphi = xi_perp_squared(rho, ops)
        assert got == pytest.approx(want, rel=1e-6)
        assert 0.0 <= varphi < math.pi + 1e-12


def test_varphi_is_the_minimizing_angle(ops20, rng):
    """Variance evaluated at the reported angle equals the reported minimum."""
    for _ in range(10):
        rho = _random_framed_state(ops20, rng)
        frame = mean_spin_frame(rho, ops20)
        xi2, varphi = xi_perp_squared(rho, ops20)
        axis = math.cos(varphi) * frame.n1 + math.sin(varphi) * frame.n2
        jn = axis[0] * ops20.jx + axis[1] * ops20.jy + axis[2] * ops20.jz
        var = expectation(rho, jn @ jn) - expectation(rho, jn) ** 2
        xi_at_angle = ops20.n_atoms * var / frame.norm ** 2
        assert xi_at_angle == pytest.approx(xi2, rel=1e-9, abs=1e-12)


def test_qfi_shift_invariance(ops20, rng):
    for _ in range(5):
        rho = _random_framed_state(ops20, rng)
        base = qfi(rho, ops20.jz)
        shifted = qfi(rho, ops20.jz + 3.7 * np.eye(ops20.dim))
        assert shifted == pytest.approx(base, rel=1e-8)


def test_qfi_pure_state_is_four_variances(ops20, rng):
    for theta, phi in ((math.pi / 2, 0.0), (1.0, 2.0), (2.5, -1.0)):
        rho = coherent_spin_state(20, theta, phi)
        for g in (ops20.jx, ops20.jy, ops20.jz):
            var = expectation(rho, g @ g) - expectation(rho, g) ** 2
            assert qfi(rho, g) == pytest.approx(4.0 * var, rel=1e-8, abs=1e-9)


def test_qfi_css_along_z_is_n(ops20):
    rho = coherent_spin_state(20, math.pi / 2, 0.0)
    assert qfi(rho, ops20.jz) == pytest.approx(20.0, rel=1e-9)


def test_averaged_qfi_css(ops20):
    rho = coherent_spin_state(20, math.pi / 2, 0.0)
    assert averaged_qfi(rho, ops20) == pytest.approx(2 / (3 * 20), rel=1e-9)


def test_qfi_ghz_reaches_heisenberg(ops20):
    vec = np.zeros(ops20.dim, dtype=complex)
    vec[0] = vec[-1] = 1 / math.sqrt(2)
    rho = np.outer(vec, vec.conj())
    assert qfi(rho, ops20.jz) == pytest.approx(400.0, rel=1e-9)


def test_qfi_maximally_mixed_vanishes(ops20):
    rho = np.eye(ops20.dim, dtype=complex) / ops20.dim
    assert abs(qfi(rho, ops20.jz)) < 1e-10
    assert abs(averaged_qfi(rho, ops20)) < 1e-10


def test_qfi_monotone_under_dephasing(ops20):
    """Noise should not raise the metrological power of the CSS probe."""
    rho = coherent_spin_state(20, math.pi / 2, 0.0)
    noise = NoiseParams(gamma=0.0, gamma_z=0.2, n_th=0.0)
    before = qfi(rho, ops20.jz)
    for _ in range(5):
        rho = evolve_segment(rho, 0.0, 0.1, ops20, noise)
    assert qfi(rho, ops20.jz) <= before + 1e-9


def test_qfi_shape_mismatch(ops4):
    rho = coherent_spin_state(4, 1.0, 0.0)
    with pytest.raises(ValueError):
        qfi(rho, np.eye(3))


def test_husimi_axes_are_cell_centered():
    theta, phi = husimi_grid_axes(10, 16)
    assert theta[0] == pytest.approx(math.pi / 20)
    assert theta[-1] == pytest.approx(math.pi - math.pi / 20)
    assert phi[0] == pytest.approx(math.pi / 16)
    assert np.all(np.diff(theta) > 0)
    with pytest.raises(ValueError):
        husimi_grid_axes(0, 16)


def test_husimi_css_peaks_at_its_center(ops20):
    rho = coherent_spin_state(20, math.pi / 2, 0.0)
    grid = husimi_grid(rho, ops20, 200, 400)
    theta, phi = husimi_grid_axes(200, 400)
    i, j = np.unravel_index(np.argmax(grid), grid.shape)
    assert abs(theta[i] - math.pi / 2) < math.pi / 200
    assert min(phi[j], 2 * math.pi - phi[j]) < 2 * math.pi / 400 + 1e-12
    assert grid.max() > 0.99


def test_husimi_range_and_hermiticity_of_input(ops4, rng):
    rho = random_density_matrix(ops4.dim, rng)
    grid = husimi_grid(rho, ops4, 40, 80)
    assert grid.min() >= 0.0
    assert grid.max() <= 1.0
    with pytest.raises(ValueError):
        husimi_grid(np.eye(3), ops4, 10, 10)


@pytest.mark.parametrize("state", ["css", "mixed", "squeezed"])
def test_husimi_resolution_of_identity(ops20, rng, state):
    """Midpoint quadrature of Q sin(theta) tends to 4 pi / (N + 1)."""
    if state == "css":
        rho = coherent_spin_state(20, 1.2, 0.4)
    elif state == "mixed":
        rho = random_density_matrix(ops20.dim, rng)
    else:
        rho = coherent_spin_state(20, math.pi / 2, 0.0)
        for _ in range(10):
            rho = evolve_segment(rho, 0.0, 0.02, ops20,
                                 NoiseParams(0.001, 0.001, 0.0))
    n_theta, n_phi = 200, 400
    grid = husimi_grid(rho, ops20, n_theta, n_phi)
    theta, _ = husimi_grid_axes(n_theta, n_phi)
    cell = (math.pi / n_theta) * (2 * math.pi / n_phi)
    integral = float((grid * np.sin(theta)[:, None]).sum() * cell)
    want = 4 * math.pi / 21
    assert integral == pytest.approx(want, rel=0.02)


def test_decibel_examples():
    assert to_decibels(1.0) == pytest.approx(0.0, abs=1e-12)
    assert to_decibels(0.1) == pytest.approx(-10.0, rel=1e-12)
    assert to_decibels(0.316227766) == pytest.approx(-5.0, abs=1e-6)
    arr = to_decibels(np.array([1.0, 100.0]))
    assert np.allclose(arr, [0.0, 20.0])
    assert math.isnan(to_decibels(float("nan")))
    with pytest.raises(ValueError):
        to_decibels(0.0)
    with pytest.raises(ValueError):
        to_decibels(-0.3)
    with pytest.raises(ValueError):
        to_decibels(np.array([1.0, -1.0]))


def test_squeezing_report_consistency(ops20, rng):
    rho = _random_framed_state(ops20, rng)
    report = squeezing_report(rho, ops20)
    assert report.xi_z_sq == pytest.approx(xi_z_squared(rho, ops20), rel=1e-12)
    xi2, varphi = xi_perp_squared(rho, ops20)
    assert report.xi_perp_sq == pytest.approx(xi2, rel=1e-12)
    assert report.varphi == varphi
    assert report.xi_z_db == pytest.approx(10 * math.log10(report.xi_z_sq), rel=1e-9)


def test_one_axis_twisting_squeezes(ops20):
    """Free twisting drives xi_perp below 1 while xi_z stays above."""
    closed = NoiseParams(gamma=0.0, gamma_z=0.0, n_th=0.0)
    rho = coherent_spin_state(20, math.pi / 2, 0.0)
    for _ in range(10):
        rho = evolve_segment(rho, 0.0, 0.02, ops20, closed)
    xi2, _ = xi_perp_squared(rho, ops20)
    assert xi2 < 0.6
    assert xi_z_squared(rho, ops20) > 1.0
