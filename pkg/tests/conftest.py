"""Shared pytest plumbing.

The acceptance module registers one line per criterion on the pytest config
object; the terminal-summary hook reprints them after the run so the
pass/fail ledger is visible even though test stdout is captured.
"""

import numpy as np
import pytest

from squeezerl import build_spin_operators


def pytest_configure(config):
    config._acceptance_lines = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", None)
    if lines:
        terminalreporter.write_sep("-", "acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def ops4():
    return build_spin_operators(4)


@pytest.fixture(scope="session")
def ops20():
    return build_spin_operators(20)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)


def random_density_matrix(dim: int, rng, rank: int | None = None) -> np.ndarray:
    """Random full- or low-rank valid state via a Ginibre factor."""
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def scan_xi_perp(rho: np.ndarray, ops, n_angles: int = 3600):
    """Dense angular-scan oracle for the transverse squeezing parameter.

    Evaluates Var(J . n(varphi)) directly from the rotated operator at
    `n_angles` angles across [0, pi) and returns (min normalized variance,
    argmin angle). Deliberately avoids the closed-form minimization.
    """
    from squeezerl.metrics import mean_spin_frame

    frame = mean_spin_frame(rho, ops)
    angles = np.pi * np.arange(n_angles) / n_angles
    axes = (np.cos(angles)[:, None] * frame.n1[None, :]
            + np.sin(angles)[:, None] * frame.n2[None, :])
    stack = np.stack([ops.jx, ops.jy, ops.jz])
    jn = np.einsum("ka,aij->kij", axes, stack)
    means = np.einsum("ij,kji->k", rho, jn).real
    seconds = np.einsum("ij,kjl,kli->k", rho, jn, jn).real
    variances = seconds - means ** 2
    k = int(np.argmin(variances))
    xi = ops.n_atoms * variances[k] / frame.norm ** 2
    return float(xi), float(angles[k])
