"""Proximity operators for the splitting solvers.

All operators evaluate ``argmin_v g(v) + (mu/2) ||v - nu||^2`` for their
respective ``g``:

* Poisson negative log-likelihood — exact closed form per pixel.
* ``tau * ||.||_1`` — soft thresholding.
* Indicator of the nonnegative orthant — clipping at 0.
* ``beta * TV`` — no closed form; approximated by a fixed number of dual
  fixed-point sweeps (:func:`tv_denoise`) whose dual field can be carried
  across calls (warm start).  :func:`tv_prox_gap` certifies the quality of
  the current primal-dual pair via the duality gap.
"""

from dataclasses import dataclass
import math

import numpy as np

from pidal import kernels

__all__ = [
    "CHAMBOLLE_STEP",
    "ChambolleState",
    "neg_log_likelihood",
    "poisson_prox",
    "project_nonneg",
    "soft_threshold",
    "tv_denoise",
    "tv_prox_gap",
    "tv_value",
    "xi",
]

# Dual step size; the fixed-point scheme is provably convergent up to 1/8
# with this discretization, and 1/8 is kept rather than tuned.
CHAMBOLLE_STEP = 0.125


def xi(z, y):
    """Single-pixel Poisson data term (constant term omitted).

    ``z < 0`` gives ``inf``; otherwise ``z - y*log(z)`` with the
    conventions ``0*log(0) = 0`` (so ``xi(0, 0) == 0``) and
    ``y*log(0) = -inf`` for ``y > 0`` (so ``xi(0, y>0) == inf``).
    """
    z = float(z)
    y = float(y)
    if y < 0 or y != int(y):
        raise ValueError(f"y must be a nonnegative integer, got {y}")
    if z < 0:
        return math.inf
    if y == 0:
        return z
    if z == 0:
        return math.inf
    return z - y * math.log(z)


def neg_log_likelihood(z, y):
    """Poisson negative log-likelihood of intensities ``z`` for counts ``y``.

    The count-dependent constant (log of factorials) is omitted, so values
    are comparable across iterates but not across observations.  Returns
    ``inf`` outside the domain (any ``z < 0``, or ``z == 0`` where
    ``y > 0``).
    """
    z = np.asarray(z, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if z.shape != y.shape:
        raise ValueError(f"shape mismatch: z {z.shape} vs y {y.shape}")
    if (y < 0).any() or not (y == np.rint(y)).all():
        raise ValueError("y must contain nonnegative integers")
    if (z < 0).any():
        return math.inf
    total = float(z.sum())
    mask = y > 0
    zpos = z[mask]
    if (zpos == 0).any():
        return math.inf
    return total - float(np.sum(y[mask] * np.log(zpos)))


def poisson_prox(nu, y, mu):
    """Exact proximity operator of the Poisson data term.

    Solves, independently per pixel,
    ``argmin_{v} v - y*log(v) + (mu/2)*(v - nu)**2``,
    whose stationarity condition ``mu*v**2 + (1 - mu*nu)*v - y = 0`` has
    the unique nonnegative root

    ``v = ((nu - 1/mu) + sqrt((nu - 1/mu)**2 + 4*y/mu)) / 2``.

    The subtraction-free rearrangement ``(2*y/mu) / (sqrt(...) - a)`` is
    used where ``a = nu - 1/mu < 0`` to avoid cancellation.

    Parameters
    ----------
    nu : ndarray or float
        Prox argument (any real values).
    y : ndarray or float
        Nonnegative photon counts, same shape as ``nu``.
    mu : float
        Penalty weight, > 0.
    """
    if mu <= 0:
        raise ValueError(f"mu must be > 0, got {mu}")
    nu = np.asarray(nu, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if nu.shape != y.shape:
        raise ValueError(f"shape mismatch: nu {nu.shape} vs y {y.shape}")
    if (y < 0).any():
        raise ValueError("y must be nonnegative")
    a = nu - 1.0 / mu
    s = np.sqrt(a * a + 4.0 * y / mu)
    plus = 0.5 * (a + s)
    denom = s - a
    with np.errstate(divide="ignore", invalid="ignore"):
        stable = np.where(denom > 0, (2.0 * y / mu) / np.where(denom > 0, denom, 1.0), 0.0)
    return np.where(a >= 0, plus, stable)


def soft_threshold(v, thresh):
    """Proximity operator of ``thresh * ||.||_1`` (entrywise shrinkage)."""
    if thresh < 0:
        raise ValueError(f"threshold must be >= 0, got {thresh}")
    v = np.asarray(v, dtype=np.float64)
    return np.sign(v) * np.maximum(np.abs(v) - thresh, 0.0)


def project_nonneg(v):
    """Euclidean projection onto the nonnegative orthant."""
    return np.maximum(np.asarray(v, dtype=np.float64), 0.0)


def tv_value(x):
    """Isotropic total variation with periodic forward differences."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError(f"expected a 2-D image, got shape {x.shape}")
    dh = np.roll(x, -1, axis=1) - x
    dv = np.roll(x, -1, axis=0) - x
    return float(np.sum(np.sqrt(dh * dh + dv * dv)))


@dataclass
class ChambolleState:
    """Dual field of the total-variation prox, carried between calls.

    Attributes
    ----------
    pv, ph : (H, W) ndarray
        Vertical / horizontal dual components; the per-pixel magnitude
        ``sqrt(pv**2 + ph**2)`` stays <= 1 under the update scheme.
    """

    pv: np.ndarray
    ph: np.ndarray

    @classmethod
    def zeros(cls, shape):
        return cls(pv=np.zeros(shape), ph=np.zeros(shape))

    def copy(self):
        return ChambolleState(pv=self.pv.copy(), ph=self.ph.copy())

    def max_magnitude(self):
        return float(np.sqrt(self.pv**2 + self.ph**2).max())


def _divergence(state):
    return (state.pv - np.roll(state.pv, 1, axis=0)) + (state.ph - np.roll(state.ph, 1, axis=1))


def tv_denoise(r, beta, iters, state=None):
    """Approximate the TV proximity operator by dual fixed-point sweeps.

    Runs ``iters`` sweeps of the projected-gradient scheme on the dual
    problem, starting from ``state`` (or a zero dual field when None), and
    returns the primal image together with the updated state.  The state
    is mutated in place; passing it back in resumes where the previous
    call stopped (warm start).

    Parameters
    ----------
    r : (H, W) ndarray
        Noisy input image.
    beta : float
        TV weight, > 0.
    iters : int
        Number of sweeps, >= 0.
    state : ChambolleState, optional
        Caller-owned dual field to resume from.

    Returns
    -------
    (out, state) : ((H, W) ndarray, ChambolleState)
    """
    r = np.ascontiguousarray(r, dtype=np.float64)
    if r.ndim != 2:
        raise ValueError(f"expected a 2-D image, got shape {r.shape}")
    if beta <= 0:
        raise ValueError(f"beta must be > 0, got {beta}")
    iters = int(iters)
    if iters < 0:
        raise ValueError(f"iters must be >= 0, got {iters}")
    if state is None:
        state = ChambolleState.zeros(r.shape)
    if state.pv.shape != r.shape or state.ph.shape != r.shape:
        raise ValueError(f"state shape {state.pv.shape} does not match image {r.shape}")
    state.pv = np.ascontiguousarray(state.pv, dtype=np.float64)
    state.ph = np.ascontiguousarray(state.ph, dtype=np.float64)
    out = kernels.chambolle_sweep(r, float(beta), CHAMBOLLE_STEP, iters, state.pv, state.ph)
    return out, state


def tv_prox_gap(r, beta, state):
    """Duality gap certifying the current TV-prox primal-dual pair.

    For the primal candidate ``v = r + beta * div(p)`` implied by the dual
    field, the gap ``beta * (TV(v) - <p, grad v>)`` is nonnegative and
    bounds the primal suboptimality of ``v``; it tends to 0 as the sweeps
    converge.
    """
    r = np.asarray(r, dtype=np.float64)
    if beta <= 0:
        raise ValueError(f"beta must be > 0, got {beta}")
    v = r + beta * _divergence(state)
    dh = np.roll(v, -1, axis=1) - v
    dv = np.roll(v, -1, axis=0) - v
    pairing = float(np.sum(state.pv * dv + state.ph * dh))
    return beta * (tv_value(v) - pairing)
