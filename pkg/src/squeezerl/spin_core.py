"""Collective spin operators and coherent spin states.

N two-level atoms restricted to the maximal-spin (symmetric) sector j = N/2.
Everything lives in the (N+1)-dimensional Dicke basis |j, m> ordered
m = j, j-1, ..., -j, so row 0 is the fully polarized "north pole" state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SpinOperators:
    """Dense collective spin operators for a fixed atom number."""

    n_atoms: int
    j: float
    dim: int
    jx: np.ndarray
    jy: np.ndarray
    jz: np.ndarray
    jplus: np.ndarray
    jminus: np.ndarray


def build_spin_operators(n_atoms: int) -> SpinOperators:
    """Construct Jx, Jy, Jz, J+, J- in the |j, m> basis (m descending).

    Matrix elements: J+|j,m> = sqrt(j(j+1) - m(m+1)) |j,m+1>, Jz diagonal.
    """
    if not isinstance(n_atoms, (int, np.integer)) or n_atoms < 1:
        raise ValueError(f"n_atoms must be a positive integer, got {n_atoms!r}")
    n = int(n_atoms)
    j = n / 2.0
    dim = n + 1

    m = j - np.arange(dim)  # m = j ... -j
    jz = np.diag(m).astype(np.complex128)

    # raising J+ maps column i (m_i) to row i-1 (m_i + 1)
    i = np.arange(1, dim)
    ladder = np.sqrt(i * (n - i + 1.0))
    jplus = np.diag(ladder, k=1).astype(np.complex128)
    jminus = jplus.conj().T

    jx = (jplus + jminus) / 2.0
    jy = (jplus - jminus) / 2.0j
    return SpinOperators(n_atoms=n, j=j, dim=dim, jx=jx, jy=jy, jz=jz,
                         jplus=jplus, jminus=jminus)


def css_state_vector(n_atoms: int, theta: float, phi: float) -> np.ndarray:
    """Amplitudes of the coherent spin state |theta, phi>.

    theta = 0 is the north pole |j, j> (all atoms up, <Jz> = +N/2); the mean
    spin points along (sin t cos p, sin t sin p, cos t) with length N/2.
    """
    if not isinstance(n_atoms, (int, np.integer)) or n_atoms < 1:
        raise ValueError(f"n_atoms must be a positive integer, got {n_atoms!r}")
    n = int(n_atoms)
    c, s = math.cos(theta / 2.0), math.sin(theta / 2.0)
    # index i = j - m counts flipped atoms; binomials taken exactly then floated
    amp = np.array(
        [math.sqrt(math.comb(n, i)) * c ** (n - i) * s ** i for i in range(n + 1)],
        dtype=np.float64,
    )
    phase = np.exp(1j * phi * np.arange(n + 1))
    vec = amp * phase
    nrm = np.linalg.norm(vec)
    return vec / nrm


def coherent_spin_state(n_atoms: int, theta: float, phi: float) -> np.ndarray:
    """Density matrix of the pure coherent spin state |theta, phi><theta, phi|."""
    vec = css_state_vector(n_atoms, theta, phi)
    return np.outer(vec, vec.conj())


def expectation(rho: np.ndarray, op: np.ndarray) -> float:
    """Re Tr[rho op] for a Hermitian observable."""
    if rho.shape != op.shape or rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"shape mismatch: rho {rho.shape} vs op {op.shape}")
    # trace of a product without forming it
    return float(np.einsum("ij,ji->", rho, op).real)


def purity(rho: np.ndarray) -> float:
    """Tr[rho^2]; 1 for pure states, >= 1/dim for valid density matrices."""
    # Hermitian rho: Tr[rho^2] = sum |rho_ij|^2
    return float(np.vdot(rho, rho).real)


def hermitize(rho: np.ndarray) -> np.ndarray:
    """Symmetrize away the anti-Hermitian part left by floating-point drift."""
    return (rho + rho.conj().T) / 2.0
