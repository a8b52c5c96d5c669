"""Squeezing, Fisher-information, and phase-space metrics.

All squeezing quantities are defined in the mean-spin frame: theta/phi locate
<J>, and the transverse plane is spanned by

    n1 = (-sin phi, cos phi, 0)
    n2 = (cos theta cos phi, cos theta sin phi, -sin theta)

both orthogonal to <J> (note n1 x n2 = -<J>/|<J>|). A transverse direction
is parametrized as n(varphi) = cos(varphi) n1 + sin(varphi) n2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .spin_core import SpinOperators, css_state_vector, expectation, hermitize

MEAN_SPIN_TOL = 1e-9
QFI_EIGEN_CUTOFF = 1e-12


@dataclass(frozen=True)
class MeanSpinFrame:
    """Polar/azimuthal angles of the mean spin and its length |<J>|."""

    theta: float
    phi: float
    norm: float

    @property
    def n1(self) -> np.ndarray:
        return np.array([-math.sin(self.phi), math.cos(self.phi), 0.0])

    @property
    def n2(self) -> np.ndarray:
        return np.array([
            math.cos(self.theta) * math.cos(self.phi),
            math.cos(self.theta) * math.sin(self.phi),
            -math.sin(self.theta),
        ])


@dataclass(frozen=True)
class SqueezingReport:
    """Both squeezing parameters of a state, linear and in decibels."""

    xi_z_sq: float
    xi_perp_sq: float
    varphi: float
    xi_z_db: float
    xi_perp_db: float


def mean_spin_frame(rho: np.ndarray, ops: SpinOperators) -> MeanSpinFrame:
    """Orientation of <J>; raises ValueError when |<J>| < 1e-9.

    phi = sign(<Jy>) arccos(<Jx> / (|<J>| sin theta)), with sign(0) taken as
    +1 so states on the <Jy> = 0 meridian get phi in {0, pi}; at the poles
    (sin theta ~ 0) phi is conventionally 0.
    """
    mx = expectation(rho, ops.jx)
    my = expectation(rho, ops.jy)
    mz = expectation(rho, ops.jz)
    norm = math.sqrt(mx * mx + my * my + mz * mz)
    if norm < MEAN_SPIN_TOL:
        raise ValueError(
            f"mean spin length {norm:.3e} below {MEAN_SPIN_TOL}; frame undefined")
    theta = math.acos(min(1.0, max(-1.0, mz / norm)))
    sin_theta = math.sin(theta)
    if sin_theta * norm < MEAN_SPIN_TOL:
        phi = 0.0
    else:
        c = min(1.0, max(-1.0, mx / (norm * sin_theta)))
        sign = -1.0 if my < 0 else 1.0
        phi = sign * math.acos(c)
    return MeanSpinFrame(theta=theta, phi=phi, norm=norm)


def xi_z_squared(rho: np.ndarray, ops: SpinOperators) -> float:
    """Squeezing along the fixed z axis: N Var(Jz) / |<J>|^2."""
    frame = mean_spin_frame(rho, ops)  # validates |<J>|
    jz_mean = expectation(rho, ops.jz)
    jz2_mean = expectation(rho, ops.jz @ ops.jz)
    var = jz2_mean - jz_mean * jz_mean
    return ops.n_atoms * var / (frame.norm * frame.norm)


def _transverse_ops(frame: MeanSpinFrame, ops: SpinOperators):
    n1, n2 = frame.n1, frame.n2
    j_n1 = n1[0] * ops.jx + n1[1] * ops.jy + n1[2] * ops.jz
    j_n2 = n2[0] * ops.jx + n2[1] * ops.jy + n2[2] * ops.jz
    return j_n1, j_n2


def xi_perp_squared(rho: np.ndarray, ops: SpinOperators) -> tuple[float, float]:
    """Minimal transverse squeezing and its optimal angle.

    Var along n(varphi) is (T + A cos 2varphi + B sin 2varphi)/2 with
    T = <Jn1^2 + Jn2^2>, A = <Jn1^2 - Jn2^2>, B = <{Jn1, Jn2}>, minimized in
    closed form. Returns (xi_perp^2, varphi) with varphi in [0, pi).
    """
    frame = mean_spin_frame(rho, ops)
    j_n1, j_n2 = _transverse_ops(frame, ops)
    sq1 = expectation(rho, j_n1 @ j_n1)
    sq2 = expectation(rho, j_n2 @ j_n2)
    cross = expectation(rho, j_n1 @ j_n2 + j_n2 @ j_n1)
    t, a, b = sq1 + sq2, sq1 - sq2, cross
    r = math.hypot(a, b)
    xi2 = ops.n_atoms * (t - r) / (2.0 * frame.norm * frame.norm)
    if r < 1e-15:
        varphi = math.pi / 2.0  # isotropic transverse noise
    else:
        half = 0.5 * math.acos(min(1.0, max(-1.0, -a / r)))
        varphi = half if b <= 0 else math.pi - half
    return xi2, varphi


def _qfi_from_eigen(p: np.ndarray, gt: np.ndarray, cutoff: float) -> float:
    """QFI from rho's eigenvalues and the generator rotated to its eigenbasis."""
    absg2 = np.abs(gt) ** 2
    # <n|G^2|n> via the Hermitian row sums; variance per eigenvector
    var = absg2.sum(axis=1) - np.real(np.diag(gt)) ** 2
    out = 4.0 * float(p @ var)
    s = p[:, None] + p[None, :]
    weight = np.where(s > cutoff, 8.0 * p[:, None] * p[None, :] / np.where(s > 0, s, 1.0), 0.0)
    np.fill_diagonal(weight, 0.0)
    out -= float((weight * absg2).sum())
    if out < 0.0:
        if out < -1e-9:
            raise ArithmeticError(f"QFI evaluated to {out}, below roundoff floor")
        out = 0.0
    return out


def qfi(rho: np.ndarray, generator: np.ndarray,
        cutoff: float = QFI_EIGEN_CUTOFF) -> float:
    """Quantum Fisher information of rho for rotations generated by G.

    Spectral form: 4 sum_n p_n Var_n(G) - sum_{m != n} 8 p_m p_n/(p_m + p_n)
    |<m|G|n>|^2, with eigenvalues below `cutoff` treated as exactly zero.
    """
    if rho.shape != generator.shape:
        raise ValueError(f"shape mismatch: rho {rho.shape} vs generator {generator.shape}")
    w, v = np.linalg.eigh(hermitize(rho))
    p = np.where(w > cutoff, w, 0.0)
    gt = v.conj().T @ generator @ v
    return _qfi_from_eigen(p, gt, cutoff)


def averaged_qfi(rho: np.ndarray, ops: SpinOperators,
                 cutoff: float = QFI_EIGEN_CUTOFF) -> float:
    """Direction-averaged, normalized QFI: [F(Jx) + F(Jy) + F(Jz)] / (3 N^2).

    Exceeds 1/3 only for entangled states; 2/(3N) for a coherent spin state.
    """
    w, v = np.linalg.eigh(hermitize(rho))
    p = np.where(w > cutoff, w, 0.0)
    total = 0.0
    for g in (ops.jx, ops.jy, ops.jz):
        gt = v.conj().T @ g @ v
        total += _qfi_from_eigen(p, gt, cutoff)
    return total / (3.0 * ops.n_atoms ** 2)


def husimi_grid_axes(n_theta: int, n_phi: int) -> tuple[np.ndarray, np.ndarray]:
    """Cell-centered grid angles: theta in (0, pi), phi in (0, 2 pi)."""
    if n_theta < 1 or n_phi < 1:
        raise ValueError("grid sizes must be positive")
    theta = (np.arange(n_theta) + 0.5) * math.pi / n_theta
    phi = (np.arange(n_phi) + 0.5) * 2.0 * math.pi / n_phi
    return theta, phi


def husimi_grid(rho: np.ndarray, ops: SpinOperators,
                n_theta: int, n_phi: int) -> np.ndarray:
    """Husimi function Q(theta, phi) = <theta, phi| rho |theta, phi> on the grid.

    Raw overlap, no (N+1)/4pi density factor, so values lie in [0, 1] and the
    midpoint quadrature of Q sin(theta) over the sphere approaches 4pi/(N+1).
    Returns shape (n_theta, n_phi); axes from `husimi_grid_axes`.
    """
    if rho.shape != (ops.dim, ops.dim):
        raise ValueError(f"rho has shape {rho.shape}, expected {(ops.dim, ops.dim)}")
    theta, phi = husimi_grid_axes(n_theta, n_phi)
    n = ops.n_atoms
    i = np.arange(ops.dim)
    sqrt_comb = np.sqrt([float(math.comb(n, int(k))) for k in i])
    tt, pp = np.meshgrid(theta, phi, indexing="ij")
    tt, pp = tt.reshape(-1), pp.reshape(-1)
    # CSS amplitudes for every gridpoint at once: (n_points, dim)
    amp = sqrt_comb[None, :] * np.cos(tt / 2.0)[:, None] ** (n - i)[None, :] \
        * np.sin(tt / 2.0)[:, None] ** i[None, :]
    vecs = amp * np.exp(1j * pp[:, None] * i[None, :])
    q = np.einsum("pi,ij,pj->p", vecs.conj(), rho, vecs).real
    return np.clip(q, 0.0, 1.0).reshape(n_theta, n_phi)


def to_decibels(xi_squared):
    """10 log10(x) for scalars or arrays; rejects x <= 0, passes nan through."""
    arr = np.asarray(xi_squared, dtype=np.float64)
    if np.any(arr <= 0):
        raise ValueError("decibel conversion requires positive input")
    with np.errstate(invalid="ignore"):
        out = 10.0 * np.log10(arr)
    return float(out) if np.isscalar(xi_squared) else out


def squeezing_report(rho: np.ndarray, ops: SpinOperators) -> SqueezingReport:
    """Evaluate both squeezing parameters of a state in one call."""
    xi_z = xi_z_squared(rho, ops)
    xi_p, varphi = xi_perp_squared(rho, ops)
    return SqueezingReport(
        xi_z_sq=xi_z, xi_perp_sq=xi_p, varphi=varphi,
        xi_z_db=to_decibels(xi_z), xi_perp_db=to_decibels(xi_p),
    )
