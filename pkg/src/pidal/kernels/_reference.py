"""NumPy reference implementation of the hot kernels.

Mirrors the native extension operation for operation so the two backends
produce matching floating-point results.  Arrays wrap periodically; the
dual fields ``pv``/``ph`` are updated in place.
"""

import numpy as np

BACKEND = "reference"


def chambolle_sweep(r, beta, step, iters, pv, ph):
    """Run ``iters`` fixed-point sweeps of the dual total-variation scheme.

    Each sweep forms the current primal candidate ``w = div(p) + r/beta``,
    takes one projected gradient step of size ``step`` on the dual field,
    and renormalizes so the per-pixel dual magnitude stays at most 1.

    Parameters
    ----------
    r : (H, W) ndarray
        Input image of the denoising problem.
    beta : float
        Strength of the total-variation penalty (must be > 0).
    step : float
        Dual step size; the scheme is convergent for step <= 1/8.
    iters : int
        Number of sweeps to run (>= 0).
    pv, ph : (H, W) ndarray
        Vertical / horizontal dual components, modified in place.

    Returns
    -------
    (H, W) ndarray
        The primal image ``r + beta * div(p)`` after the final sweep.
    """
    rb = r / beta
    for _ in range(iters):
        w = (pv - np.roll(pv, 1, 0)) + (ph - np.roll(ph, 1, 1)) + rb
        gv = np.roll(w, -1, 0) - w
        gh = np.roll(w, -1, 1) - w
        mag = np.sqrt(gv * gv + gh * gh)
        pv[...] = (pv + step * gv) / (1.0 + step * mag)
        ph[...] = (ph + step * gh) / (1.0 + step * mag)
    w = (pv - np.roll(pv, 1, 0)) + (ph - np.roll(ph, 1, 1)) + rb
    return beta * w
