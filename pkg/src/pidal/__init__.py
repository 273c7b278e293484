"""Poisson image deconvolution via augmented-Lagrangian splitting.

Restores images blurred by a known periodic convolution and corrupted by
Poisson (photon-count) noise.  Three solver variants share one ADMM core:

* total-variation regularization (``pidal_tv``),
* frame-analysis regularization with an undecimated Haar frame (``pidal_fa``),
* frame-synthesis regularization over frame coefficients (``pidal_fs``).

Supporting modules: :mod:`pidal.imagekit` (images, PSFs, simulation,
metrics, file IO), :mod:`pidal.linops` (FFT-diagonalized convolution and
the Parseval frame), :mod:`pidal.prox` (proximity operators),
:mod:`pidal.admm` (the generic splitting driver), :mod:`pidal.pidal`
(the three solvers), :mod:`pidal.cli` (command-line front end).
"""

__version__ = "0.1.0"

from pidal.pidal import (  # noqa: F401
    PidalConfig,
    RunReport,
    check_existence_conditions,
    default_mu,
    default_tol,
    pidal_fa,
    pidal_fs,
    pidal_tv,
)
