"""Optional numba acceleration for the banded RK4 segment kernel.

The master-equation RHS for H = Jz^2 + omega Jx is banded: the drift matrix
is tridiagonal and every jump term shifts the density matrix by one row and
one column. The fused kernel below evaluates whole segments in one call.
Everything here must agree with the numpy implementation in dynamics.py to
floating-point roundoff; tests compare the two paths. Set SQUEEZERL_NO_NUMBA=1
to force the numpy path.
"""

from __future__ import annotations

import os

NUMBA_AVAILABLE = False

if not os.environ.get("SQUEEZERL_NO_NUMBA"):
    try:
        import numpy as np
        from numba import njit

        @njit(cache=True)
        def _rhs_banded(sp, dst, d0, au, al, cau, cal, lm2, lp2):
            # sp is the zero-padded source, offset (+1, +1)
            d = dst.shape[0]
            for i in range(d):
                for c in range(d):
                    v = d0[i, c] * sp[i + 1, c + 1]
                    v += au[i] * sp[i + 2, c + 1]
                    v += al[i] * sp[i, c + 1]
                    v += cau[c] * sp[i + 1, c + 2]
                    v += cal[c] * sp[i + 1, c]
                    v += lm2[i, c] * sp[i, c]
                    v += lp2[i, c] * sp[i + 2, c + 2]
                    dst[i, c] = v

        @njit(cache=True)
        def _fill_padded(sp, src):
            d = src.shape[0]
            for i in range(d):
                for c in range(d):
                    sp[i + 1, c + 1] = src[i, c]

        @njit(cache=True)
        def rk4_segment(y, substeps, dt, d0, au, al, cau, cal, lm2, lp2):
            """Advance y through `substeps` classical RK4 steps, in place."""
            d = y.shape[0]
            sp = np.zeros((d + 2, d + 2), np.complex128)
            k0 = np.empty((d, d), np.complex128)
            k1 = np.empty((d, d), np.complex128)
            k2 = np.empty((d, d), np.complex128)
            k3 = np.empty((d, d), np.complex128)
            stage = np.empty((d, d), np.complex128)
            half = 0.5 * dt
            sixth = dt / 6.0
            for _ in range(substeps):
                _fill_padded(sp, y)
                _rhs_banded(sp, k0, d0, au, al, cau, cal, lm2, lp2)
                for i in range(d):
                    for c in range(d):
                        stage[i, c] = y[i, c] + half * k0[i, c]
                _fill_padded(sp, stage)
                _rhs_banded(sp, k1, d0, au, al, cau, cal, lm2, lp2)
                for i in range(d):
                    for c in range(d):
                        stage[i, c] = y[i, c] + half * k1[i, c]
                _fill_padded(sp, stage)
                _rhs_banded(sp, k2, d0, au, al, cau, cal, lm2, lp2)
                for i in range(d):
                    for c in range(d):
                        stage[i, c] = y[i, c] + dt * k2[i, c]
                _fill_padded(sp, stage)
                _rhs_banded(sp, k3, d0, au, al, cau, cal, lm2, lp2)
                for i in range(d):
                    for c in range(d):
                        y[i, c] += sixth * (k0[i, c] + 2.0 * (k1[i, c] + k2[i, c])
                                            + k3[i, c])

        NUMBA_AVAILABLE = True
    except ImportError:  # numba not installed; numpy path takes over
        rk4_segment = None
else:
    rk4_segment = None
