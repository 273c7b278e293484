"""Backend selection for the hot numerical kernels.

At import time the compiled extension is preferred; if it is missing (pure
install) or the ``PIDAL_DISABLE_NATIVE`` environment variable is set to a
non-empty value other than ``0``, the NumPy reference implementation is used
instead.  Both expose the same functions with identical semantics:

``chambolle_sweep(r, beta, step, iters, pv, ph)``
    In-place dual sweeps for the total-variation proximity operator.

``BACKEND`` names the selected implementation ("native" or "reference").
"""

import os

from pidal.kernels import _reference as reference

native = None
if os.environ.get("PIDAL_DISABLE_NATIVE", "0") in ("", "0"):
    try:
        from pidal.kernels import _native as native
    except ImportError:
        native = None

if native is not None:
    BACKEND = "native"
    chambolle_sweep = native.chambolle_sweep
else:
    BACKEND = "reference"
    chambolle_sweep = reference.chambolle_sweep

__all__ = ["BACKEND", "chambolle_sweep", "native", "reference"]
