"""Images, point-spread functions, synthetic observations, metrics, file IO.

Images are plain 2-D float64 NumPy arrays throughout the package.  The
helpers here validate shapes and value ranges at the boundaries (loading,
simulation, metric evaluation) so the numerical core can assume well-formed
input.  File formats:

* PGM (P2 ASCII or P5 binary, maxval up to 65535) for integer images such
  as photon-count observations.
* A small CSV matrix format for float images: first line ``rows,cols``,
  then one comma-separated row per line, written with 17 significant
  digits so values round-trip exactly.

The bundled 256x256 cameraman test image lives in ``pidal/data``; the
``PIDAL_DATA_DIR`` environment variable points the loaders somewhere else
when set.
"""

from dataclasses import dataclass
import importlib.resources
import os
import pathlib

import numpy as np

__all__ = [
    "Psf",
    "bundled_data_dir",
    "isnr",
    "load_cameraman",
    "load_image",
    "mae",
    "make_psf",
    "poisson_sample",
    "read_csv_matrix",
    "read_pgm",
    "require_counts",
    "require_image",
    "scale_to_max",
    "write_csv_matrix",
    "write_pgm",
]

PGM_MAXVAL_LIMIT = 65535


def require_image(img, name="image", nonnegative=False):
    """Validate and return ``img`` as a finite 2-D float64 array.

    Parameters
    ----------
    img : array_like
        Candidate image.
    name : str
        Label used in error messages.
    nonnegative : bool
        When True, additionally require every entry >= 0.
    """
    out = np.asarray(img, dtype=np.float64)
    if out.ndim != 2 or out.size == 0:
        raise ValueError(f"{name} must be a non-empty 2-D array, got shape {out.shape}")
    if not np.isfinite(out).all():
        raise ValueError(f"{name} contains non-finite entries")
    if nonnegative and (out < 0).any():
        raise ValueError(f"{name} must be nonnegative (min is {out.min()!r})")
    return out


def require_counts(y, name="counts"):
    """Validate a photon-count image: nonnegative with integral entries."""
    out = require_image(y, name=name, nonnegative=True)
    if not (out == np.rint(out)).all():
        raise ValueError(f"{name} must have integer entries")
    return out


@dataclass(frozen=True)
class Psf:
    """A normalized point-spread function.

    Attributes
    ----------
    kernel : (s, s) ndarray
        Nonnegative entries summing to 1.
    kind : str
        One of ``gaussian``, ``uniform``, ``custom``.
    """

    kernel: np.ndarray
    kind: str

    def __post_init__(self):
        kernel = require_image(self.kernel, name="psf kernel", nonnegative=True)
        total = kernel.sum()
        if total <= 0:
            raise ValueError("psf kernel must have positive mass")
        object.__setattr__(self, "kernel", kernel / total)

    @classmethod
    def from_kernel(cls, kernel):
        """Wrap an arbitrary nonnegative kernel (normalized to unit sum)."""
        return cls(kernel=np.asarray(kernel, dtype=np.float64), kind="custom")


def make_psf(kind, size, sigma=None):
    """Build a standard blur kernel.

    Parameters
    ----------
    kind : str
        ``"gaussian"`` (requires ``sigma``) or ``"uniform"``.
    size : int
        Odd side length of the square kernel.
    sigma : float, optional
        Standard deviation in pixels for the Gaussian kind.

    Returns
    -------
    Psf
        Kernel normalized to unit sum (so blurring preserves total flux).
    """
    size = int(size)
    if size < 1 or size % 2 == 0:
        raise ValueError(f"psf size must be a positive odd integer, got {size}")
    if kind == "uniform":
        kernel = np.full((size, size), 1.0 / (size * size))
    elif kind == "gaussian":
        if sigma is None or sigma <= 0:
            raise ValueError("gaussian psf requires sigma > 0")
        half = size // 2
        grid = np.arange(-half, half + 1, dtype=np.float64)
        prof = np.exp(-(grid**2) / (2.0 * sigma**2))
        kernel = np.outer(prof, prof)
    else:
        raise ValueError(f"unknown psf kind {kind!r} (expected 'gaussian' or 'uniform')")
    return Psf(kernel=kernel, kind=kind)


def scale_to_max(img, peak):
    """Rescale ``img`` so its maximum equals ``peak`` exactly."""
    img = require_image(img)
    if peak <= 0:
        raise ValueError(f"peak must be > 0, got {peak}")
    top = img.max()
    if top <= 0:
        raise ValueError("image maximum must be strictly positive to rescale")
    return img / top * float(peak)  # divide first so the max lands on peak exactly


def poisson_sample(lam, seed):
    """Draw a Poisson count image with mean ``lam``.

    Uses a counter-based generator (Philox) keyed on ``seed`` so results
    are reproducible across platforms and runs.  Pixels with ``lam == 0``
    are always 0.

    Returns
    -------
    (H, W) ndarray of int64
    """
    lam = require_image(lam, name="intensity", nonnegative=True)
    rng = np.random.Generator(np.random.Philox(int(seed)))
    return rng.poisson(lam).astype(np.int64)


def isnr(observed, truth, estimate):
    """Improvement in signal-to-noise ratio, in dB.

    ``10 log10(||observed - truth||^2 / ||estimate - truth||^2)``; returns
    ``inf`` when the estimate matches the truth exactly.
    """
    observed = require_image(observed, name="observed")
    truth = require_image(truth, name="truth")
    estimate = require_image(estimate, name="estimate")
    if observed.shape != truth.shape or estimate.shape != truth.shape:
        raise ValueError("isnr arguments must share one shape")
    num = float(np.sum((observed - truth) ** 2))
    den = float(np.sum((estimate - truth) ** 2))
    if num == 0.0:
        raise ValueError("observed and truth coincide; isnr is undefined")
    if den == 0.0:
        return np.inf
    return 10.0 * np.log10(num / den)


def mae(truth, estimate):
    """Mean absolute error between two images of equal shape."""
    truth = require_image(truth, name="truth")
    estimate = require_image(estimate, name="estimate")
    if truth.shape != estimate.shape:
        raise ValueError("mae arguments must share one shape")
    return float(np.mean(np.abs(truth - estimate)))


# ---------------------------------------------------------------------------
# File IO
# ---------------------------------------------------------------------------


def write_pgm(path, img, binary=True, maxval=None):
    """Write an integer image as PGM.

    Parameters
    ----------
    path : path-like
    img : array_like
        2-D, nonnegative, integral entries.
    binary : bool
        True writes P5 (binary), False writes P2 (ASCII).
    maxval : int, optional
        Header maxval; defaults to ``max(img.max(), 1)``.  Values above
        255 use 16-bit big-endian samples (P5) as the format prescribes.
    """
    data = require_counts(img, name="pgm image").astype(np.int64)
    if maxval is None:
        maxval = max(int(data.max()), 1)
    maxval = int(maxval)
    if maxval < 1 or maxval > PGM_MAXVAL_LIMIT:
        raise ValueError(f"pgm maxval must be in [1, {PGM_MAXVAL_LIMIT}], got {maxval}")
    if int(data.max()) > maxval:
        raise ValueError(f"image max {int(data.max())} exceeds pgm maxval {maxval}")
    h, w = data.shape
    magic = "P5" if binary else "P2"
    header = f"{magic}\n{w} {h}\n{maxval}\n"
    path = pathlib.Path(path)
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        if binary:
            dtype = ">u2" if maxval > 255 else "u1"
            fh.write(np.ascontiguousarray(data, dtype=dtype).tobytes())
        else:
            lines = "\n".join(" ".join(str(v) for v in row) for row in data)
            fh.write((lines + "\n").encode("ascii"))


def _pgm_tokens(raw):
    """Yield whitespace-separated header tokens, skipping # comments."""
    pos = 0
    while True:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        if pos < len(raw) and raw[pos : pos + 1] == b"#":
            end = raw.find(b"\n", pos)
            pos = len(raw) if end < 0 else end + 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError("truncated pgm header")
        yield raw[start:pos], pos


def read_pgm(path):
    """Read a P2/P5 PGM file into an int64 array."""
    raw = pathlib.Path(path).read_bytes()
    tokens = _pgm_tokens(raw)
    magic, _ = next(tokens)
    if magic not in (b"P2", b"P5"):
        raise ValueError(f"unsupported pgm magic {magic!r}")
    (wtok, _), (htok, _), (mtok, mend) = next(tokens), next(tokens), next(tokens)
    w, h, maxval = int(wtok), int(htok), int(mtok)
    if w < 1 or h < 1 or not 1 <= maxval <= PGM_MAXVAL_LIMIT:
        raise ValueError(f"bad pgm dimensions {w}x{h} maxval={maxval}")
    if magic == b"P5":
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        start = mend + 1  # single whitespace byte after maxval
        count = h * w
        if len(raw) - start < count * dtype.itemsize:
            raise ValueError("truncated pgm pixel data")
        data = np.frombuffer(raw, dtype=dtype, count=count, offset=start)
    else:
        fields = raw[mend:].split()
        if len(fields) != h * w:
            raise ValueError(f"expected {h * w} ascii samples, got {len(fields)}")
        data = np.array([int(f) for f in fields], dtype=np.int64)
    out = data.astype(np.int64).reshape(h, w)
    if out.max() > maxval:
        raise ValueError("pgm sample exceeds declared maxval")
    return out


def write_csv_matrix(path, arr):
    """Write a float matrix as CSV: ``rows,cols`` header then the rows.

    Entries use 17 significant digits, enough for float64 round-trips.
    """
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2-D array, got shape {arr.shape}")
    h, w = arr.shape
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"{h},{w}\n")
        for row in arr:
            fh.write(",".join(format(v, ".17g") for v in row) + "\n")


def read_csv_matrix(path):
    """Read a matrix written by :func:`write_csv_matrix`."""
    with open(path, "r", encoding="ascii") as fh:
        first = fh.readline()
        try:
            h, w = (int(p) for p in first.strip().split(","))
        except ValueError as exc:
            raise ValueError(f"bad csv matrix header {first!r}") from exc
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if data.shape != (h, w):
        raise ValueError(f"csv matrix body {data.shape} does not match header ({h}, {w})")
    return data


def bundled_data_dir():
    """Directory holding bundled test data (override with PIDAL_DATA_DIR)."""
    override = os.environ.get("PIDAL_DATA_DIR")
    if override:
        return pathlib.Path(override)
    return pathlib.Path(str(importlib.resources.files("pidal") / "data"))


def load_image(path):
    """Load an image file by extension: ``.pgm`` or ``.csv``."""
    path = pathlib.Path(path)
    if path.suffix.lower() == ".pgm":
        return read_pgm(path).astype(np.float64)
    if path.suffix.lower() == ".csv":
        return read_csv_matrix(path)
    raise ValueError(f"unsupported image extension {path.suffix!r} (use .pgm or .csv)")


def load_cameraman():
    """Load the bundled 256x256 cameraman image as float64 in [0, 255]."""
    return read_pgm(bundled_data_dir() / "cameraman.pgm").astype(np.float64)
