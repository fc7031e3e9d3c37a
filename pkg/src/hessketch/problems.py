"""Reproducible synthetic inverse problems: deblurring, tomography, noise, images.

Two problem families are provided, both returning a :class:`Problem` bundle
(operator, noisy observation, ground truth):

* :func:`make_deblur` builds a square operator that blurs a ``size`` by
  ``size`` image with a point spread function under zero boundary
  conditions.  The forward map is 2-D convolution, the transpose is 2-D
  correlation; with an odd-sized kernel the two are exact adjoints.
* :func:`make_tomography` builds a rectangular parallel-beam transform.
  Rays are traced through the pixel grid and each matrix entry is the
  exact intersection length of a ray with a pixel, assembled once into a
  sparse matrix.

Ray geometry (documented so tests can rebuild the matrix independently):
the image occupies the box [0, grid] x [0, grid] with pixel (row j, col i)
covering x in [i, i+1), y in [j, j+1) and flat index ``j * grid + i``.
For angle index a of ``n_angles`` the angle is ``theta = pi * a / n_angles``;
ray direction is ``(cos theta, sin theta)`` and detector offsets are
``s = j + 0.5 - grid / 2`` for detector j, applied along the normal
``(-sin theta, cos theta)`` from the grid centre.  At ``theta = 0`` detector
j therefore runs along image row j.

Noise is injected at an *exact* relative level: the Gaussian perturbation is
rescaled so that ``norm(e) / norm(b_clean)`` equals the requested level to
machine precision.

Images travel as 16-bit binary PGM (P5, big-endian samples), which
round-trips the quantized values exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.signal
import scipy.sparse

from .linops import LinearOperator

__all__ = [
    "Problem",
    "Image",
    "ImageFormatError",
    "gaussian_psf",
    "motion_psf",
    "deblur_phantom",
    "tomography_phantom",
    "make_deblur",
    "make_tomography",
    "add_noise",
    "image_from_vector",
    "write_image",
    "read_image",
]


@dataclass
class Problem:
    """An inverse problem instance ``b = A x_true + e``.

    Parameters
    ----------
    operator : LinearOperator
        The forward map A.
    b : ndarray
        Noisy observation, length ``operator.rows``.
    x_true : ndarray or None
        Ground truth, length ``operator.cols``, when known.
    noise_level : float
        Relative noise level ``norm(e) / norm(A x_true)`` (exact).
    seed : int
        Seed used for the noise draw.
    image_shape : tuple or None
        (height, width) when ``x_true`` is a flattened image, so that
        reconstructions can be written back out as images.
    """

    operator: LinearOperator
    b: np.ndarray
    x_true: Optional[np.ndarray] = None
    noise_level: float = 0.0
    seed: int = 0
    image_shape: Optional[tuple] = None

    def __post_init__(self):
        self.b = np.asarray(self.b, dtype=float)
        if self.b.ndim != 1 or self.b.size != self.operator.rows:
            raise ValueError("observation length must match operator rows")
        if self.x_true is not None:
            self.x_true = np.asarray(self.x_true, dtype=float)
            if self.x_true.ndim != 1 or self.x_true.size != self.operator.cols:
                raise ValueError("ground truth length must match operator cols")
        if self.noise_level < 0:
            raise ValueError("noise level must be nonnegative")


@dataclass
class Image:
    """A grayscale image with values in [0, 1], stored row major.

    ``pixels`` has shape (height, width); row 0 is the top of the image.
    """

    width: int
    height: int
    pixels: np.ndarray

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("image dimensions must be positive")
        self.pixels = np.asarray(self.pixels, dtype=float)
        if self.pixels.shape != (self.height, self.width):
            raise ValueError("pixel array must have shape (height, width)")
        if not np.all(np.isfinite(self.pixels)):
            raise ValueError("pixel values must be finite")
        if self.pixels.min() < 0.0 or self.pixels.max() > 1.0:
            raise ValueError("pixel values must lie in [0, 1]")


class ImageFormatError(ValueError):
    """Raised for malformed image files; the message names a byte offset."""


# ---------------------------------------------------------------------------
# point spread functions


def gaussian_psf(sigma, radius=None):
    """Normalized 2-D Gaussian kernel with odd side length.

    ``sigma = 0`` degenerates to the 1x1 delta kernel (identity blur).
    ``radius`` defaults to ``ceil(3 * sigma)``, at least 1.
    """
    if sigma < 0:
        raise ValueError("sigma must be nonnegative")
    if sigma == 0:
        return np.ones((1, 1))
    if radius is None:
        radius = max(1, math.ceil(3.0 * sigma))
    if radius < 1:
        raise ValueError("radius must be at least 1")
    d = np.arange(-radius, radius + 1, dtype=float)
    g = np.exp(-(d**2) / (2.0 * sigma**2))
    kernel = np.outer(g, g)
    return kernel / kernel.sum()


def motion_psf(length, angle_deg, oversample=64):
    """Unit-mass line-segment kernel modelling linear motion blur.

    The segment has the given length in pixels, centred in the kernel, at
    ``angle_deg`` degrees from the horizontal axis.  Sample points along the
    segment are deposited with bilinear weights, so non-axis-aligned angles
    produce a smoothly rasterized line.  The kernel side length is odd.
    """
    if length < 1:
        raise ValueError("length must be at least 1")
    if not np.isfinite(angle_deg):
        raise ValueError("angle must be finite")
    half = math.ceil((length - 1.0) / 2.0)
    side = 2 * half + 1
    kernel = np.zeros((side, side))
    theta = math.radians(angle_deg)
    dc, dr = math.cos(theta), math.sin(theta)
    # snap axis-aligned directions so 90-degree blur is exactly vertical
    dc = 0.0 if abs(dc) < 1e-12 else dc
    dr = 0.0 if abs(dr) < 1e-12 else dr
    n_samples = max(2, int(round(length * oversample)) + 1)
    for t in np.linspace(-(length - 1.0) / 2.0, (length - 1.0) / 2.0, n_samples):
        pr, pc = half + t * dr, half + t * dc
        r0, c0 = int(math.floor(pr)), int(math.floor(pc))
        fr, fc = pr - r0, pc - c0
        for r, c, w in (
            (r0, c0, (1 - fr) * (1 - fc)),
            (r0, c0 + 1, (1 - fr) * fc),
            (r0 + 1, c0, fr * (1 - fc)),
            (r0 + 1, c0 + 1, fr * fc),
        ):
            if 0 <= r < side and 0 <= c < side and w > 0:
                kernel[r, c] += w
    return kernel / kernel.sum()


# ---------------------------------------------------------------------------
# phantoms


def deblur_phantom(size):
    """Deterministic test image with smooth regions and sharp edges.

    On a horizontal gradient background (0.10 to 0.35) sit a bright
    rectangle (0.85, rows [0.15, 0.45), cols [0.20, 0.55) in fractions of
    the side), a disc (0.70, centre (0.62, 0.40), radius 0.18), a dark disc
    (0.05, centre (0.30, 0.70), radius 0.08) and a thin bright vertical bar
    (0.95, col 0.78, rows [0.55, 0.90)).
    """
    s = size
    rows, cols = np.mgrid[0:s, 0:s].astype(float)
    img = 0.10 + 0.25 * cols / max(s - 1, 1)
    img[int(0.15 * s) : int(0.45 * s), int(0.20 * s) : int(0.55 * s)] = 0.85
    img[(rows - 0.62 * s) ** 2 + (cols - 0.40 * s) ** 2 <= (0.18 * s) ** 2] = 0.70
    img[(rows - 0.30 * s) ** 2 + (cols - 0.70 * s) ** 2 <= (0.08 * s) ** 2] = 0.05
    bar = max(1, s // 32)
    img[int(0.55 * s) : int(0.90 * s), int(0.78 * s) : int(0.78 * s) + bar] = 0.95
    return img


def tomography_phantom(grid):
    """Deterministic multi-disc absorption phantom, piecewise constant.

    Zero background with a large disc of absorption 0.55 (centre (0.50,
    0.50), radius 0.38 in fractions of the side), a dense disc of 1.0
    (centre (0.40, 0.42), radius 0.13), a lighter disc of 0.30 (centre
    (0.63, 0.58), radius 0.10) and a void of 0.0 (centre (0.52, 0.33),
    radius 0.05), applied in that order.
    """
    g = grid
    rows, cols = np.mgrid[0:g, 0:g] + 0.5
    img = np.zeros((g, g))
    discs = [
        (0.50, 0.50, 0.38, 0.55),
        (0.40, 0.42, 0.13, 1.00),
        (0.63, 0.58, 0.10, 0.30),
        (0.52, 0.33, 0.05, 0.00),
    ]
    for cr, cc, radius, value in discs:
        mask = (rows - cr * g) ** 2 + (cols - cc * g) ** 2 <= (radius * g) ** 2
        img[mask] = value
    return img


# ---------------------------------------------------------------------------
# problem builders


def make_deblur(size, psf, noise_level=0.0, seed=0):
    """Zero-boundary 2-D deblurring problem on the bundled phantom.

    ``psf`` is a 2-D kernel with odd side lengths strictly smaller than the
    image (see :func:`gaussian_psf` / :func:`motion_psf`).  The operator
    applies the blur matrix free; its transpose is correlation with the same
    kernel, which is the exact adjoint under zero boundary conditions.
    """
    if size < 8:
        raise ValueError("size must be at least 8")
    kernel = np.asarray(psf, dtype=float)
    if kernel.ndim != 2 or kernel.shape[0] % 2 == 0 or kernel.shape[1] % 2 == 0:
        raise ValueError("psf must be a 2-D kernel with odd side lengths")
    if kernel.shape[0] >= size or kernel.shape[1] >= size:
        raise ValueError("psf support must be smaller than the image")
    n = size * size

    def forward(v):
        img = np.asarray(v, dtype=float).reshape(size, size)
        return scipy.signal.convolve2d(
            img, kernel, mode="same", boundary="fill"
        ).ravel()

    def transpose(u):
        img = np.asarray(u, dtype=float).reshape(size, size)
        return scipy.signal.correlate2d(
            img, kernel, mode="same", boundary="fill"
        ).ravel()

    operator = LinearOperator(rows=n, cols=n, forward=forward, transpose=transpose)
    x_true = deblur_phantom(size).ravel()
    b_clean = forward(x_true)
    b, _ = add_noise(b_clean, noise_level, seed)
    return Problem(operator, b, x_true, noise_level, seed, (size, size))


def _trace_ray(origin, direction, grid):
    """Intersection lengths of one ray with the pixels of a grid x grid box.

    Returns (flat pixel indices, chord lengths).  Pixels are identified by
    the midpoint of each inter-crossing segment; slivers shorter than 1e-12
    from corner-grazing arithmetic are dropped.
    """
    t0, t1 = -np.inf, np.inf
    for axis in range(2):
        o, d = origin[axis], direction[axis]
        if abs(d) < 1e-12:
            if o <= 0.0 or o >= grid:
                return np.empty(0, dtype=int), np.empty(0)
        else:
            ta, tb = (0.0 - o) / d, (grid - o) / d
            if ta > tb:
                ta, tb = tb, ta
            t0, t1 = max(t0, ta), min(t1, tb)
    if not t1 > t0:
        return np.empty(0, dtype=int), np.empty(0)
    crossings = [np.array([t0, t1])]
    for axis in range(2):
        o, d = origin[axis], direction[axis]
        if abs(d) >= 1e-12:
            t = (np.arange(1.0, grid) - o) / d
            crossings.append(t[(t > t0) & (t < t1)])
    alphas = np.unique(np.concatenate(crossings))
    lengths = np.diff(alphas)
    mids = origin[None, :] + (0.5 * (alphas[:-1] + alphas[1:]))[:, None] * direction
    ci = np.clip(np.floor(mids[:, 0]).astype(int), 0, grid - 1)
    rj = np.clip(np.floor(mids[:, 1]).astype(int), 0, grid - 1)
    keep = lengths > 1e-12
    return (rj[keep] * grid + ci[keep]), lengths[keep]


def tomography_matrix(grid, n_angles):
    """Assemble the parallel-beam system matrix as sparse CSR.

    Row ``a * grid + j`` holds the chord lengths of detector j at angle
    index a, following the geometry documented in the module docstring.
    """
    centre = np.array([grid / 2.0, grid / 2.0])
    rows, cols, vals = [], [], []
    for a in range(n_angles):
        theta = math.pi * a / n_angles
        direction = np.array([math.cos(theta), math.sin(theta)])
        normal = np.array([-math.sin(theta), math.cos(theta)])
        for j in range(grid):
            origin = centre + (j + 0.5 - grid / 2.0) * normal
            idx, lengths = _trace_ray(origin, direction, grid)
            rows.extend([a * grid + j] * idx.size)
            cols.extend(idx.tolist())
            vals.extend(lengths.tolist())
    return scipy.sparse.csr_matrix(
        (vals, (rows, cols)), shape=(n_angles * grid, grid * grid)
    )


def make_tomography(grid, n_angles, noise_level=0.0, seed=0):
    """Parallel-beam tomography of the bundled absorption phantom.

    The operator has ``n_angles * grid`` rays (rows) and ``grid ** 2``
    pixels (columns); it is assembled once as a sparse matrix of exact
    ray-pixel intersection lengths.
    """
    if grid < 8:
        raise ValueError("grid must be at least 8")
    if n_angles < 2:
        raise ValueError("need at least 2 angles")
    K = tomography_matrix(grid, n_angles)
    operator = LinearOperator.from_matrix(K)
    x_true = tomography_phantom(grid).ravel()
    b_clean = K @ x_true
    b, _ = add_noise(b_clean, noise_level, seed)
    return Problem(operator, b, x_true, noise_level, seed, (grid, grid))


def add_noise(b_clean, level, seed):
    """Perturb a vector with Gaussian noise at an exact relative level.

    The Gaussian draw is normalized so ``norm(e) = level * norm(b_clean)``
    holds to machine precision, not merely in expectation.  Returns
    ``(b_clean + e, e)``.
    """
    b_clean = np.asarray(b_clean, dtype=float)
    if level < 0:
        raise ValueError("noise level must be nonnegative")
    if level == 0:
        return b_clean.copy(), np.zeros_like(b_clean)
    scale = np.linalg.norm(b_clean)
    if scale == 0:
        raise ValueError("relative noise level undefined for a zero vector")
    g = np.random.default_rng(seed).standard_normal(b_clean.size)
    e = (level * scale / np.linalg.norm(g)) * g
    return b_clean + e, e


# ---------------------------------------------------------------------------
# image I/O (binary PGM, 16-bit)


def image_from_vector(v, height, width, clip=True):
    """Reshape a flat solution vector into an Image, clipping to [0, 1]."""
    pixels = np.asarray(v, dtype=float).reshape(height, width)
    if clip:
        pixels = np.clip(pixels, 0.0, 1.0)
    return Image(width=width, height=height, pixels=pixels)


def write_image(image, path):
    """Write an Image as binary PGM with 16-bit big-endian samples.

    Values are clamped to [0, 1] and quantized to 0..65535; quantized
    values round-trip exactly through :func:`read_image`.
    """
    quant = np.round(np.clip(image.pixels, 0.0, 1.0) * 65535.0).astype(">u2")
    header = f"P5\n{image.width} {image.height}\n65535\n".encode("ascii")
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(quant.tobytes())


class _PgmScanner:
    def __init__(self, data):
        self.data = data
        self.pos = 0

    def fail(self, what):
        raise ImageFormatError(f"{what} at byte offset {self.pos}")

    def skip_separators(self):
        while self.pos < len(self.data):
            c = self.data[self.pos : self.pos + 1]
            if c.isspace():
                self.pos += 1
            elif c == b"#":
                while self.pos < len(self.data) and self.data[
                    self.pos : self.pos + 1
                ] not in (b"\n", b"\r"):
                    self.pos += 1
            else:
                return

    def token(self):
        self.skip_separators()
        start = self.pos
        while self.pos < len(self.data) and not self.data[
            self.pos : self.pos + 1
        ].isspace():
            self.pos += 1
        if self.pos == start:
            self.fail("unexpected end of header")
        return self.data[start : self.pos]

    def integer(self, what):
        tok = self.token()
        try:
            value = int(tok)
        except ValueError:
            self.pos -= len(tok)
            self.fail(f"invalid {what} {tok!r}")
        if value < 1:
            self.pos -= len(tok)
            self.fail(f"nonpositive {what}")
        return value


def read_image(path):
    """Read a binary PGM (P5) file into an Image.

    Accepts any maximum sample value up to 65535 (one- or two-byte
    samples per the format); values are scaled into [0, 1].  Malformed
    files raise :class:`ImageFormatError` naming the failing byte offset.
    """
    with open(path, "rb") as fh:
        data = fh.read()
    scan = _PgmScanner(data)
    if scan.token() != b"P5":
        scan.pos = 0
        scan.fail("missing P5 magic token")
    width = scan.integer("width")
    height = scan.integer("height")
    maxval = scan.integer("maximum sample value")
    if maxval > 65535:
        scan.fail("maximum sample value above 65535")
    if scan.pos >= len(data) or not data[scan.pos : scan.pos + 1].isspace():
        scan.fail("missing separator before samples")
    scan.pos += 1
    dtype = ">u2" if maxval > 255 else "u1"
    count = width * height
    body = data[scan.pos :]
    need = count * np.dtype(dtype).itemsize
    if len(body) < need:
        scan.pos = len(data)
        scan.fail("truncated sample data")
    samples = np.frombuffer(body[:need], dtype=dtype).astype(float)
    pixels = (samples / maxval).reshape(height, width)
    return Image(width=width, height=height, pixels=pixels)
