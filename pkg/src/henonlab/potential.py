"""Green functions, the Böttcher coordinate near infinity, and Julia slices.

``G+`` is the escape rate of forward orbits and vanishes exactly on the set
of points with bounded forward orbit; ``G-`` is the same for ``f^-1``.  A
slice restricts ``G+`` to a holomorphic disk and extracts the boundary of
its zero set, which approximates the support of the Laplacian of the
restriction.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import _kernels
from .core import (
    C2Point,
    backward_filtration_radius,
    factor_radius,
    filtration_radius,
    in_forward_region,
)

DEFAULT_CAP = 2000
ZERO_FACTOR = 10.0


class GreenValue(NamedTuple):
    value: float
    bounded: bool
    undecided: bool

    def __float__(self):
        return self.value


def _tables(fmap, direction):
    factors = fmap.factors if direction > 0 else fmap.inverse_factors()
    k = len(factors)
    dmax = max(f.degree for f in factors)
    polys = np.zeros((k, dmax + 1), dtype=complex)
    alpha = np.empty(k, dtype=complex)
    beta = np.empty(k, dtype=complex)
    abound = np.empty(k)
    for i, f in enumerate(factors):
        polys[i, dmax - f.degree:] = f.poly_coeffs
        if direction > 0:
            alpha[i], beta[i] = f.a, 1.0
        else:
            alpha[i], beta[i] = 1.0 / f.a, -1.0 / f.a
        abound[i] = abs(alpha[i]) / abs(beta[i]) + f.coeff_bound
    degrees = np.array([float(f.degree) for f in factors])
    if direction > 0:
        radius = filtration_radius(fmap)
    else:
        radius = backward_filtration_radius(fmap)
    return alpha, beta, polys, degrees, abound, radius


def green_field(fmap, points, tol=1e-8, cap=DEFAULT_CAP, direction=+1,
                tangents=None, threads=1):
    """Vectorized escape rate.

    Returns ``(g, grad, status)`` arrays: the Green value, the modulus of its
    gradient along the complex ``tangents`` (zero when none given), and the
    kernel status code per point (0 escaped, 1 bounded, 2 undecided).
    """
    pts = np.asarray(points, dtype=complex).reshape(-1, 2)
    if tangents is None:
        tan = np.zeros_like(pts)
    else:
        tan = np.broadcast_to(np.asarray(tangents, dtype=complex), pts.shape).reshape(-1, 2)
    if direction > 0:
        cur, prev, dcur, dprev = pts[:, 0], pts[:, 1], tan[:, 0], tan[:, 1]
    else:
        cur, prev, dcur, dprev = pts[:, 1], pts[:, 0], tan[:, 1], tan[:, 0]
    cur, prev = np.ascontiguousarray(cur), np.ascontiguousarray(prev)
    dcur, dprev = np.ascontiguousarray(dcur), np.ascontiguousarray(dprev)
    alpha, beta, polys, degrees, abound, radius = _tables(fmap, direction)
    n = len(cur)
    g = np.zeros(n)
    grad = np.zeros(n)
    status = np.zeros(n, dtype=np.int64)
    steps = np.zeros(n, dtype=np.int64)

    def run(sl):
        _kernels.green_kernel(cur[sl], prev[sl], dcur[sl], dprev[sl], alpha, beta,
                              polys, degrees, abound, radius, int(cap), float(tol),
                              g[sl], grad[sl], status[sl], steps[sl])

    if threads > 1 and n > 4096:
        bounds = np.linspace(0, n, threads + 1).astype(int)
        with ThreadPoolExecutor(threads) as pool:
            list(pool.map(run, [slice(a, b) for a, b in zip(bounds[:-1], bounds[1:])]))
    else:
        run(slice(0, n))
    shape = np.shape(points)[:-1]
    return g.reshape(shape), grad.reshape(shape), status.reshape(shape)


def escape_time(fmap, points, cap=256):
    """Full-map iterations until the forward escape region is entered (-1 if never)."""
    pts = np.asarray(points, dtype=complex)
    flat = pts.reshape(-1, 2)
    alpha, beta, polys, degrees, abound, radius = _tables(fmap, +1)
    n = len(flat)
    g, grad = np.zeros(n), np.zeros(n)
    status, steps = np.zeros(n, dtype=np.int64), np.zeros(n, dtype=np.int64)
    cur, prev = np.ascontiguousarray(flat[:, 0]), np.ascontiguousarray(flat[:, 1])
    zero = np.zeros(n, dtype=complex)
    # a huge tolerance stops the tail sum immediately; only the entry step matters
    _kernels.green_kernel(cur, prev, zero, zero, alpha, beta, polys, degrees, abound, radius,
                          int(cap), 1e300, g, grad, status, steps)
    k = len(fmap.factors)
    out = np.where(status == _kernels.ESCAPED, steps // k, -1)
    return out.reshape(pts.shape[:-1])


def _scalar(fmap, x, tol, cap, direction):
    if tol <= 0:
        raise ValueError("tol must be positive")
    g, _, status = green_field(fmap, np.asarray(x, dtype=complex).reshape(1, 2), tol, cap, direction)
    st = int(status[0])
    return GreenValue(float(g[0]), st == _kernels.BOUNDED, st == _kernels.UNDECIDED)


def green_plus(fmap, x, tol=1e-8, cap=DEFAULT_CAP):
    """Forward escape rate ``G+(x)`` with bounded/undecided flags."""
    return _scalar(fmap, x, tol, cap, +1)


def green_minus(fmap, x, tol=1e-8, cap=DEFAULT_CAP):
    """Backward escape rate ``G-(x)``; same algorithm run on ``f^-1``."""
    return _scalar(fmap, x, tol, cap, -1)


def bottcher_plus(fmap, x):
    """Böttcher coordinate ``phi+`` on the escape region ``V+``.

    Uses ``phi+(x) = z0 * exp(sum_j Log(u_{j+1} / u_j^{d_j}) / D_{j+1})`` along
    the factor-level sequence, with each ratio inside ``|r - 1| <= 1/2``.
    """
    pts = np.asarray(x, dtype=complex)
    single = pts.ndim == 1
    pts = pts.reshape(-1, 2)
    radius = filtration_radius(fmap)
    if not np.all(in_forward_region(pts, radius)):
        raise ValueError("bottcher_plus is only defined on the certified escape region V+")
    cur, prev = pts[:, 0].copy(), pts[:, 1].copy()
    logsum = np.zeros(len(cur), dtype=complex)
    logD = 0.0
    k = len(fmap.factors)
    j = 0
    with np.errstate(over="ignore", invalid="ignore"):
        while True:
            f = fmap.factors[j % k]
            new = f.a * prev + f.p(cur)
            ratio = new
            for _ in range(f.degree):
                ratio = ratio / cur
            logD += math.log(f.degree)
            term = np.log(ratio) * math.exp(-logD)
            logsum += term
            prev, cur = cur, new
            j += 1
            if np.max(np.abs(term)) < 1e-18 or np.max(np.abs(cur)) > 1e100:
                break
    out = pts[:, 0] * np.exp(logsum)
    return complex(out[0]) if single else out


# --------------------------------------------------------------------------- #
# Slices


@dataclass(frozen=True)
class TransversalDisk:
    center: C2Point
    tangent: tuple
    radius: float
    kind: str = "affine"

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("disk radius must be positive")
        t = np.asarray(self.tangent, dtype=complex)
        norm = np.linalg.norm(t)
        if norm == 0:
            raise ValueError("tangent must be nonzero")
        object.__setattr__(self, "tangent", tuple(complex(v) for v in t / norm))
        object.__setattr__(self, "center", C2Point(*map(complex, self.center)))

    def point(self, zeta):
        c = np.asarray(self.center, dtype=complex)
        t = np.asarray(self.tangent, dtype=complex)
        return c + np.asarray(zeta)[..., None] * t


@dataclass
class SliceSample:
    """Green values on a square parameter grid with the extracted boundary set.

    ``marked`` flags pixels judged to lie in the bounded set at this
    resolution; ``boundary`` are marked pixels with an unmarked 4-neighbor.
    """

    resolution: int
    radius: float
    zeta: np.ndarray
    green: np.ndarray
    threshold: np.ndarray
    marked: np.ndarray
    inside: np.ndarray
    status: np.ndarray
    zero_threshold: float
    rescale: float | None = None
    meta: dict = field(default_factory=dict)
    refined_points: np.ndarray | None = None
    refined_spacing: float | None = None

    @property
    def boundary_mask(self):
        return _boundary(self.marked, self.inside)

    @property
    def boundary_points(self):
        """Boundary pixel centers, or the adaptively refined set when available."""
        if self.refined_points is not None:
            return self.refined_points
        return self.zeta[self.boundary_mask]

    @property
    def nonharmonic(self):
        m = self.marked[self.inside]
        return bool(m.any() and (~m).any())

    def to_record(self):
        pts = self.boundary_points
        return {
            "resolution": self.resolution,
            "radius": self.radius,
            "zero_threshold": self.zero_threshold,
            "nonharmonic": self.nonharmonic,
            "marked_fraction": float(self.marked[self.inside].mean()),
            "undecided_count": int((self.status == _kernels.UNDECIDED).sum()),
            "boundary_count": int(len(pts)),
            "boundary": [[float(p.real), float(p.imag)] for p in pts],
            "green_max": float(self.green[self.inside].max()),
            "rescale": self.rescale,
            "refined_spacing": self.refined_spacing,
            "meta": self.meta,
        }

    def to_json(self):
        return json.dumps(self.to_record(), indent=1)


def _boundary(marked, inside):
    m = marked & inside
    free = ~marked & inside
    nb = np.zeros_like(m)
    nb[1:, :] |= free[:-1, :]
    nb[:-1, :] |= free[1:, :]
    nb[:, 1:] |= free[:, :-1]
    nb[:, :-1] |= free[:, 1:]
    return m & nb


def parameter_grid(radius, resolution):
    s = np.linspace(-radius, radius, resolution)
    zeta = s[None, :] + 1j * s[:, None]
    return zeta, 2 * radius / (resolution - 1)


def assemble_slice(zeta, spacing, g, grad, status, tol, radius, distance_estimate=True):
    """Classify grid pixels and package a :class:`SliceSample`.

    A pixel counts as bounded at this resolution when ``G < 10*tol`` or, with
    ``distance_estimate``, when ``G / |grad G|`` (a distance-to-zero-set
    estimate for a harmonic function) is below the grid spacing.
    """
    zero = ZERO_FACTOR * tol
    marked, threshold = _mark(g, grad, status, tol, spacing, distance_estimate)
    inside = np.abs(zeta) <= radius * (1 + 1e-12)
    res = zeta.shape[0]
    return SliceSample(res, radius, zeta, g, threshold, marked, inside, status, zero)


def _mark(g, grad, status, tol, spacing, distance_estimate):
    threshold = np.full(np.shape(g), ZERO_FACTOR * tol)
    if distance_estimate:
        threshold = np.maximum(threshold, spacing * grad)
    return (g < threshold) | (status != _kernels.ESCAPED), threshold


def refine_boundary(sample, field, levels, tol=1e-8, distance_estimate=True, margin=4.0,
                    max_cells=400_000):
    """Subdivide boundary pixels ``levels`` times and re-mark the children.

    ``field(zeta) -> (g, grad, status)`` evaluates the slice at arbitrary
    parameters.  A child is kept when it is marked and either escapes or has
    an unmarked 4-neighbor; a neighbor that was never evaluated inherits the status of its
    nearest evaluated ancestor.  This resolves thin (zero-area) boundary sets
    far below the base grid spacing.  ``G / |grad G|`` overestimates the
    distance to a thin zero set by the reciprocal Hoelder exponent, so the
    children are marked against ``margin`` times their spacing.  The refined centers replace
    ``sample.boundary_points``.
    """
    res = sample.resolution
    h = 2 * sample.radius / (res - 1)
    corner = sample.zeta[0, 0] - (0.5 + 0.5j) * h
    base = sample.marked
    known = []  # per refined level: (sorted keys, marked)
    cells = np.argwhere(sample.boundary_mask)  # (row, col)
    spacing = h

    def key(ij):
        return ij[:, 0].astype(np.int64) * (1 << 32) + ij[:, 1].astype(np.int64)

    def lookup(ij, level):
        out = np.zeros(len(ij), dtype=bool)
        todo = np.ones(len(ij), dtype=bool)
        cur = ij.copy()
        for lv in range(level, 0, -1):
            keys, marks = known[lv - 1]
            k = key(cur)
            pos = np.clip(np.searchsorted(keys, k), 0, len(keys) - 1)
            hit = todo & (keys[pos] == k) if len(keys) else np.zeros(len(ij), bool)
            out[hit] = marks[pos[hit]]
            todo &= ~hit
            cur = cur >> 1
        inb = todo & (cur[:, 0] >= 0) & (cur[:, 0] < res) & (cur[:, 1] >= 0) & (cur[:, 1] < res)
        out[inb] = base[cur[inb, 0], cur[inb, 1]]
        return out

    for level in range(1, levels + 1):
        spacing = h / 2 ** level
        kids = (cells[:, None, :] * 2 + np.array([[0, 0], [0, 1], [1, 0], [1, 1]])[None]).reshape(-1, 2)
        if len(kids) > max_cells:
            break
        zeta = corner + spacing * ((kids[:, 1] + 0.5) + 1j * (kids[:, 0] + 0.5))
        g, grad, status = field(zeta)
        marked, _ = _mark(g, grad, status, tol, margin * spacing, distance_estimate)
        k = key(kids)
        order = np.argsort(k)
        known.append((k[order], marked[order]))
        free = np.zeros(len(kids), dtype=bool)
        for d in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            free |= ~lookup(kids + np.array(d), level)
        # escaped cells inside the margin hug the zero set; genuinely bounded
        # cells are only kept on the edge of the bounded region
        keep = marked & (free | (status == _kernels.ESCAPED))
        cells = kids[keep]
        sample.refined_points = zeta[keep]
        sample.refined_spacing = spacing
        if len(cells) == 0:
            break
    sample.meta["refine_levels"] = len(known)
    return sample


def slice_green(fmap, disk, resolution=128, tol=1e-8, cap=DEFAULT_CAP,
                distance_estimate=True, threads=1, refine=0):
    """Sample ``G+`` on an affine transversal disk; ``refine`` levels of boundary subdivision."""
    if resolution < 16:
        raise ValueError("resolution must be at least 16")
    zeta, h = parameter_grid(disk.radius, resolution)
    pts = disk.point(zeta)
    g, grad, status = green_field(fmap, pts, tol, cap, +1,
                                  tangents=np.asarray(disk.tangent, dtype=complex), threads=threads)
    sample = assemble_slice(zeta, h, g, grad, status, tol, disk.radius, distance_estimate)
    sample.meta.update(kind=disk.kind, center=[[v.real, v.imag] for v in disk.center],
                       tangent=[[v.real, v.imag] for v in disk.tangent])
    if refine:
        tangent = np.asarray(disk.tangent, dtype=complex)

        def field(z):
            return green_field(fmap, disk.point(z), tol, cap, +1, tangents=tangent, threads=threads)

        refine_boundary(sample, field, refine, tol, distance_estimate)
    return sample


# --------------------------------------------------------------------------- #
# Images


def _shade(sample):
    g = np.where(sample.inside, sample.green, 0.0)
    top = g.max() if g.max() > 0 else 1.0
    level = np.sqrt(np.clip(g / top, 0, 1))
    gray = (255 * (1 - level)).astype(np.uint8)
    rgb = np.repeat(gray[..., None], 3, axis=2)
    rgb[~sample.inside] = (255, 255, 255)
    rgb[sample.marked & sample.inside] = (0, 0, 0)
    rgb[sample.boundary_mask] = (220, 30, 30)
    return rgb[::-1]


def write_ppm(sample, path):
    """Binary PPM (P6) heat map of ``G+`` with the boundary set in red."""
    rgb = _shade(sample)
    h, w, _ = rgb.shape
    with open(path, "wb") as fh:
        fh.write(b"P6\n%d %d\n255\n" % (w, h))
        fh.write(np.ascontiguousarray(rgb).tobytes())


def write_png(sample, path):
    from PIL import Image

    Image.fromarray(_shade(sample), "RGB").save(path)


def read_ppm(path):
    with open(path, "rb") as fh:
        data = fh.read()
    parts = data.split(maxsplit=4)
    if parts[0] != b"P6":
        raise ValueError("not a binary PPM")
    w, h, maxval = int(parts[1]), int(parts[2]), int(parts[3])
    if maxval != 255:
        raise ValueError("only 8-bit PPM supported")
    pix = np.frombuffer(parts[4][: w * h * 3], dtype=np.uint8)
    return pix.reshape(h, w, 3)


__all__ = [
    "GreenValue",
    "SliceSample",
    "TransversalDisk",
    "bottcher_plus",
    "factor_radius",
    "green_field",
    "green_minus",
    "green_plus",
    "slice_green",
    "write_ppm",
]
