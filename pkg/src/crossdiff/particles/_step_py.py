"""Pure-numpy stepping kernel.

This is the reference implementation of the hot loop; the Cython kernel in
``_step_cy.pyx`` performs the identical floating-point operations in the
identical order, so the two backends produce bit-identical trajectories
from the same pre-drawn random arrays (verified by the parity tests).

Layout invariants: ``x`` is strictly increasing (positions are kept on the
unwrapped line, the circle closes through the gap x[0] + 1 - x[N-1]); slots
never reorder, reflection only adjusts gaps.
"""
import numpy as np

BACKEND = "numpy"

# correction passes land on this gap rather than exactly zero: far below any
# physical gap scale but far above position roundoff, so repaired pairs do
# not collapse into representability jams
GAP_FLOOR = 1e-14


def _shift_down(src, out):
    """out[k] = src[k+1 mod n]"""
    out[:-1] = src[1:]
    out[-1] = src[0]
    return out


def _shift_up(src, out):
    """out[k] = src[k-1 mod n]"""
    out[1:] = src[:-1]
    out[0] = src[-1]
    return out


def step_positions(x, delta, bterm, f_left, f_right, ell, max_passes):
    """Advance positions one step; fills ``ell`` with per-pair regulator
    local-time increments and returns the number of correction passes used
    (negative if ``max_passes`` was exceeded).

    Parameters
    ----------
    x : (N,) float64, strictly increasing unwrapped positions (updated in place)
    delta : (N,) free Gaussian displacements sigma_c sqrt(dt) xi
    bterm : (N,) per-pair bridge terms -2 nu^2 dt log(U), pair k = (k, k+1 mod N)
    f_left, f_right : (N,) per-pair push splits s_k/(s_k+s_next), s_next/(s_k+s_next)
    ell : (N,) float64 output buffer
    """
    n = x.shape[0]
    if n == 1:
        x += delta
        ell[0] = 0.0
        return 0
    scratch = np.empty((4, n))
    u0, uf, g, tmp = scratch
    u0[:-1] = x[1:] - x[:-1]
    u0[-1] = x[0] + 1.0 - x[-1]
    np.subtract(_shift_down(delta, uf), delta, out=uf)  # free gap increment
    uf += u0
    # minimum of the Brownian bridge from u0 to uf, then Skorokhod reflection
    d = u0 - uf
    m = 0.5 * (u0 + uf - np.sqrt(d * d + bterm))
    np.copyto(ell, np.where(m < 0.0, -m, 0.0))

    fl_next = _shift_down(f_left, np.empty(n))
    fr_prev = _shift_up(f_right, np.empty(n))
    passes = 0
    while True:
        np.add(uf, ell, out=g)
        g -= fl_next * _shift_down(ell, tmp)
        g -= fr_prev * _shift_up(ell, tmp)
        bad = g < 0.0
        if not bad.any():
            break
        passes += 1
        if passes > max_passes:
            return -1
        ell[bad] = (ell[bad] - g[bad]) + GAP_FLOOR

    x += delta
    x -= f_left * ell
    x += fr_prev * _shift_up(ell, tmp)
    return passes
