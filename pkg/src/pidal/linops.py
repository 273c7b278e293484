"""Linear operators: periodic convolution and an undecimated Haar frame.

Periodic (circular) boundary conditions are used everywhere, so every
convolution operator in play is diagonalized by the 2-D DFT.  An operator
is stored as its DFT diagonal; applying it or its adjoint costs one FFT
round trip, and the structured linear systems arising in the splitting
solvers are solved exactly in the Fourier domain.

The frame is the undecimated (shift-invariant) Haar system: per level the
low/high pair is applied along each axis with filters scaled by 1/2, which
makes the analysis operator Parseval — ``synthesis(analysis(x)) == x`` and
analysis preserves the Euclidean norm.  Coefficients are stored as a
``(3 * levels + 1, H, W)`` array: per level a (horizontal, vertical,
diagonal) detail triple, then the final approximation band last.
"""

import numpy as np

__all__ = [
    "CirculantOperator",
    "ParsevalFrame",
    "circulant_from_psf",
    "solve_fs_normal",
    "solve_ktk_plus_2i",
]

_IMAG_RESIDUE_TOL = 1e-10


def _real_part(spectrum_product, scale):
    """ifft2 and drop the imaginary residue after asserting it is roundoff."""
    full = np.fft.ifft2(spectrum_product)
    residue = np.abs(full.imag).max()
    if residue > _IMAG_RESIDUE_TOL * max(1.0, scale):
        raise ValueError(f"imaginary residue {residue:g} too large for real output")
    return np.ascontiguousarray(full.real)


class CirculantOperator:
    """A real periodic-convolution operator stored by its DFT diagonal.

    Attributes
    ----------
    shape : (int, int)
        Image shape the operator acts on.
    dft_diag : (H, W) complex ndarray
        Eigenvalues on the 2-D DFT basis.
    """

    def __init__(self, dft_diag):
        dft_diag = np.asarray(dft_diag, dtype=np.complex128)
        if dft_diag.ndim != 2 or dft_diag.size == 0:
            raise ValueError(f"dft_diag must be 2-D, got shape {dft_diag.shape}")
        self.dft_diag = dft_diag
        self.shape = dft_diag.shape
        self._abs2 = np.abs(dft_diag) ** 2

    @classmethod
    def identity(cls, shape):
        return cls(np.ones(shape, dtype=np.complex128))

    def _check(self, x, name):
        x = np.asarray(x, dtype=np.float64)
        if x.shape != self.shape:
            raise ValueError(f"{name} has shape {x.shape}, operator expects {self.shape}")
        return x

    def apply(self, x):
        """Return the periodic convolution of ``x`` with the kernel."""
        x = self._check(x, "input")
        scale = float(np.abs(x).max()) if x.size else 1.0
        return _real_part(self.dft_diag * np.fft.fft2(x), scale)

    def adjoint(self, x):
        """Apply the transpose operator (conjugate diagonal)."""
        x = self._check(x, "input")
        scale = float(np.abs(x).max()) if x.size else 1.0
        return _real_part(np.conj(self.dft_diag) * np.fft.fft2(x), scale)

    def injectivity_margin(self):
        """Smallest eigenvalue magnitude; 0 means a nontrivial null space."""
        return float(np.abs(self.dft_diag).min())

    def spatial_kernel(self):
        """The kernel embedded on the full grid (origin at index (0, 0))."""
        return _real_part(self.dft_diag, float(np.abs(self.dft_diag).max()))


def circulant_from_psf(psf, shape):
    """Build the periodic convolution operator for a PSF on a given grid.

    The kernel's center tap lands at grid index (0, 0) and the remaining
    taps wrap periodically, so blurring commutes with circular shifts and
    a symmetric kernel yields a self-adjoint operator.

    Parameters
    ----------
    psf : Psf
        Normalized kernel (odd side length s, s <= min(shape)).
    shape : (int, int)
        Image height and width.

    Returns
    -------
    CirculantOperator
    """
    h, w = int(shape[0]), int(shape[1])
    kernel = psf.kernel
    s0, s1 = kernel.shape
    if s0 > h or s1 > w:
        raise ValueError(f"psf {kernel.shape} does not fit in image shape {(h, w)}")
    embed = np.zeros((h, w))
    c0, c1 = s0 // 2, s1 // 2
    for a in range(s0):
        for b in range(s1):
            embed[(a - c0) % h, (b - c1) % w] += kernel[a, b]
    return CirculantOperator(np.fft.fft2(embed))


def solve_ktk_plus_2i(op, gamma):
    """Solve ``(K^T K + 2 I) z = gamma`` exactly in the Fourier domain."""
    gamma = op._check(gamma, "gamma")
    scale = float(np.abs(gamma).max()) if gamma.size else 1.0
    return _real_part(np.fft.fft2(gamma) / (op._abs2 + 2.0), scale)


class ParsevalFrame:
    """Undecimated Haar frame on periodic 2-D grids.

    Parameters
    ----------
    shape : (int, int)
        Image shape; both sides must be >= 2 ** levels.
    levels : int
        Number of dyadic scales (level ``l`` uses shifts of 2 ** (l - 1)).

    Notes
    -----
    With the 1/2-scaled filter pair ``lo = (x + shift(x)) / 2`` and
    ``hi = (x - shift(x)) / 2`` per axis, each level satisfies
    ``lo^T lo + hi^T hi = I`` exactly, hence analysis is Parseval and
    synthesis is its transpose as well as a left inverse.
    """

    def __init__(self, shape, levels):
        h, w = int(shape[0]), int(shape[1])
        levels = int(levels)
        max_levels = int(np.floor(np.log2(min(h, w))))
        if levels < 1 or levels > max_levels:
            raise ValueError(
                f"levels must be in [1, {max_levels}] for shape {(h, w)}, got {levels}"
            )
        self.shape = (h, w)
        self.levels = levels

    @property
    def subband_count(self):
        return 3 * self.levels + 1

    @property
    def approx_index(self):
        """Index of the approximation band in the coefficient stack."""
        return 3 * self.levels

    def coeff_shape(self):
        return (self.subband_count,) + self.shape

    def _check_image(self, x, name="image"):
        x = np.asarray(x, dtype=np.float64)
        if x.shape != self.shape:
            raise ValueError(f"{name} has shape {x.shape}, frame expects {self.shape}")
        return x

    def _check_coeffs(self, c, name="coefficients"):
        c = np.asarray(c, dtype=np.float64)
        if c.shape != self.coeff_shape():
            raise ValueError(f"{name} has shape {c.shape}, frame expects {self.coeff_shape()}")
        return c

    def analysis(self, x):
        """Map an image to its ``(3*levels + 1, H, W)`` coefficient stack."""
        a = self._check_image(x)
        out = np.empty(self.coeff_shape())
        for lev in range(self.levels):
            shift = 1 << lev
            lo_c = 0.5 * (a + np.roll(a, -shift, axis=1))
            hi_c = 0.5 * (a - np.roll(a, -shift, axis=1))
            out[3 * lev + 0] = 0.5 * (hi_c + np.roll(hi_c, -shift, axis=0))  # horizontal
            out[3 * lev + 1] = 0.5 * (lo_c - np.roll(lo_c, -shift, axis=0))  # vertical
            out[3 * lev + 2] = 0.5 * (hi_c - np.roll(hi_c, -shift, axis=0))  # diagonal
            a = 0.5 * (lo_c + np.roll(lo_c, -shift, axis=0))
        out[self.approx_index] = a
        return out

    def synthesis(self, coeffs):
        """Transpose of :func:`analysis`; a left inverse of it."""
        c = self._check_coeffs(coeffs)
        a = c[self.approx_index]
        for lev in reversed(range(self.levels)):
            shift = 1 << lev
            det_h, det_v, det_d = c[3 * lev], c[3 * lev + 1], c[3 * lev + 2]
            lo_c = 0.5 * (a + np.roll(a, shift, axis=0)) + 0.5 * (
                det_v - np.roll(det_v, shift, axis=0)
            )
            hi_c = 0.5 * (det_h + np.roll(det_h, shift, axis=0)) + 0.5 * (
                det_d - np.roll(det_d, shift, axis=0)
            )
            a = 0.5 * (lo_c + np.roll(lo_c, shift, axis=1)) + 0.5 * (
                hi_c - np.roll(hi_c, shift, axis=1)
            )
        return a


def solve_fs_normal(op, frame, gamma):
    """Solve the synthesis-form normal system over frame coefficients.

    Solves ``(W^T K^T K W + W^T W + I) s = gamma`` where ``W`` is frame
    synthesis and ``K`` the convolution operator.  Because ``W W^T = I``,
    the Woodbury identity collapses the inverse to

    ``gamma - W^T [ (I + (K^T K + I)^{-1})^{-1} ] (W gamma)``

    with the bracketed filter diagonal in the Fourier domain, so the cost
    is one synthesis, one FFT round trip, and one analysis.
    """
    gamma = frame._check_coeffs(gamma, "gamma")
    if frame.shape != op.shape:
        raise ValueError(f"operator shape {op.shape} != frame shape {frame.shape}")
    img = frame.synthesis(gamma)
    scale = float(np.abs(img).max()) if img.size else 1.0
    filt = 1.0 / (1.0 + 1.0 / (op._abs2 + 1.0))
    filtered = _real_part(filt * np.fft.fft2(img), scale)
    return gamma - frame.analysis(filtered)
