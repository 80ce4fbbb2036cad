"""Stable and unstable manifolds of saddle cycles.

Local manifolds are power series ``psi`` with ``F(psi(t)) = psi(lam * t)``,
``F = f^n`` the first-return map of the cycle.  Coefficients are matched
order by order: ``(DF - lam^k I) psi_k = -E_k`` where ``E_k`` collects the
order-``k`` terms produced by the lower coefficients.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import core, periodic, potential
from ._kernels import ESCAPED

STABLE, UNSTABLE = "stable", "unstable"


class ResonanceError(ValueError):
    pass


# --------------------------------------------------------------------------- #
# Truncated series arithmetic


def _mul(a, b, order):
    return np.convolve(a, b)[: order + 1]


def _compose_map(fmap, series_z, series_w, order, n):
    """Apply ``f^n`` to a pair of truncated series."""
    z, w = series_z[: order + 1].copy(), series_w[: order + 1].copy()
    for _ in range(n):
        for f in fmap.factors:
            coeffs = f.poly_coeffs
            p = np.zeros(order + 1, dtype=complex)
            for c in coeffs:
                p = _mul(p, z, order)
                p[0] += c
            z, w = f.a * w + p, z
    return z, w


def _eval_series(coeffs, t):
    """Evaluate ``sum coeffs[k] t^k`` (coeffs shape (M+1, 2)) and its derivative."""
    t = np.asarray(t, dtype=complex)
    val = np.zeros(t.shape + (2,), dtype=complex)
    der = np.zeros(t.shape + (2,), dtype=complex)
    for c in coeffs[::-1]:
        der = der * t[..., None] + val
        val = val * t[..., None] + c
    return val, der


@dataclass
class LocalManifold:
    """Local stable or unstable manifold of the cycle point ``base.points[0]``."""

    fmap: object
    base: periodic.PeriodicOrbit
    kind: str
    multiplier: complex
    coeffs: np.ndarray
    validity_radius: float
    series_tol: float
    normalization: str = "unit_derivative"

    @property
    def order(self):
        return len(self.coeffs) - 1

    @property
    def period(self):
        return self.base.period

    @property
    def direction(self):
        return self.coeffs[1]

    def series(self, t):
        return _eval_series(self.coeffs, t)[0]

    def series_with_derivative(self, t):
        return _eval_series(self.coeffs, t)

    def defect(self, t):
        """Semiconjugacy defect ``|F(psi(t)) - psi(lam t)|`` for the unstable side
        evaluated as ``|F(psi(t / lam)) - psi(t)|`` so that both arguments stay in the disk."""
        t = np.asarray(t, dtype=complex)
        n = self.period
        if self.kind == UNSTABLE:
            inner = self.series(t / self.multiplier)
            outer = self.series(t)
        else:
            inner = self.series(t)
            outer = self.series(self.multiplier * t)
        img = inner
        with np.errstate(all="ignore"):
            for _ in range(n):
                img = core._forward(self.fmap, img)
        return np.max(np.abs(img - outer), axis=-1)


def local_series(fmap, saddle, kind=UNSTABLE, order=25, series_tol=1e-10, base_index=0):
    """Power-series manifold of a saddle cycle at ``saddle.points[base_index]``."""
    if saddle.classification != periodic.SADDLE:
        raise ValueError("local_series requires a saddle")
    if order < 2:
        raise ValueError("series order must be at least 2")
    pts = np.roll(saddle.points, -base_index, axis=0)
    n = saddle.period
    M = periodic.monodromy(fmap, pts)
    base = periodic.PeriodicOrbit(saddle.period, pts, M, saddle.lambda_s,
                                  saddle.lambda_u, saddle.classification, saddle.residual)
    lam = saddle.lambda_u if kind == UNSTABLE else saddle.lambda_s
    other = saddle.lambda_s if kind == UNSTABLE else saddle.lambda_u
    # eigenvector from the null space of M - lam I, better conditioned than eig for huge M
    A = M - lam * np.eye(2)
    if abs(A[0, 1]) + abs(A[0, 0]) >= abs(A[1, 0]) + abs(A[1, 1]):
        v = np.array([-A[0, 1], A[0, 0]])
    else:
        v = np.array([-A[1, 1], A[1, 0]])
    v = v / np.linalg.norm(v)
    big = np.argmax(np.abs(v))
    v = v * (abs(v[big]) / v[big])
    coeffs = np.zeros((order + 1, 2), dtype=complex)
    coeffs[0] = pts[0]
    coeffs[1] = v
    for k in range(2, order + 1):
        lk = lam ** k
        if min(abs(lk - lam), abs(lk - other)) < 1e-8:
            raise ResonanceError(f"resonance at order {k}: lambda^k close to a multiplier")
        trial = coeffs.copy()
        trial[k:] = 0
        z, w = _compose_map(fmap, trial[:, 0], trial[:, 1], k, n)
        rhs = -np.array([z[k], w[k]])
        coeffs[k] = np.linalg.solve(M - lk * np.eye(2), rhs)
    man = LocalManifold(fmap, base, kind, lam, coeffs, 0.0, series_tol)
    man.validity_radius = _validity_radius(man)
    return man


def _validity_radius(man, samples=64):
    theta = np.exp(2j * np.pi * np.arange(samples) / samples)
    best = 0.0
    for j in range(6, -40, -1):
        r = 2.0 ** j
        d = man.defect(r * theta)
        if np.all(np.isfinite(d)) and np.max(d) < man.series_tol:
            best = r
            break
    if best == 0.0:
        raise ValueError("series defect never falls below series_tol")
    return best


def extend(man, zeta, with_derivative=False):
    """Global manifold point ``psi(zeta)`` via the dynamics.

    Unstable: ``psi(zeta) = F^m(psi(lam^-m zeta))``; stable: ``F^-m`` applied to
    ``psi(lam_s^m zeta)``; ``m`` minimal with the inner argument in the disk.
    """
    zeta = complex(zeta)
    m = _levels(man, np.array([zeta]))[0]
    t = zeta * man.multiplier ** (-m) if man.kind == UNSTABLE else zeta * man.multiplier ** m
    val, der = man.series_with_derivative(t)
    scale = man.multiplier ** (-m) if man.kind == UNSTABLE else man.multiplier ** m
    der = der * scale
    n = man.period
    with np.errstate(all="ignore"):
        for _ in range(m * n):
            if man.kind == UNSTABLE:
                D = core.derivative(man.fmap, val)
                val = core.evaluate(man.fmap, val)
            else:
                val = core.evaluate_inverse(man.fmap, val)
                D = np.linalg.inv(core.derivative(man.fmap, val))
            der = D @ der
    val = np.asarray(val, dtype=complex)
    if with_derivative:
        return core.C2Point(*val), der
    return core.C2Point(*val)


def _levels(man, zeta):
    r = man.validity_radius
    lam = abs(man.multiplier)
    az = np.abs(zeta)
    with np.errstate(divide="ignore"):
        if man.kind == UNSTABLE:
            m = np.ceil(np.log(np.maximum(az, 1e-300) / r) / math.log(lam))
        else:
            m = np.ceil(np.log(np.maximum(az, 1e-300) / r) / -math.log(lam))
    return np.maximum(m, 0).astype(int)


# --------------------------------------------------------------------------- #
# Unstable slices


def green_on_manifold(man, zeta, tol=1e-8, cap=potential.DEFAULT_CAP, threads=1):
    """``G+ o psi`` and its gradient modulus on an unstable manifold.

    Uses ``G+(psi(zeta)) = d^(m n) G+(psi(lam^-m zeta))``, so only the local
    series is evaluated and no point far out on the manifold is formed.
    """
    zeta = np.asarray(zeta, dtype=complex)
    flat = zeta.ravel()
    levels = _levels(man, flat)
    g = np.zeros(flat.shape)
    grad = np.zeros(flat.shape)
    status = np.zeros(flat.shape, dtype=np.int64)
    dn = man.fmap.degree ** man.period
    for m in np.unique(levels):
        sel = levels == m
        t = flat[sel] * man.multiplier ** (-int(m))
        val, der = man.series_with_derivative(t)
        factor = float(dn) ** int(m)
        gi, gri, sti = potential.green_field(man.fmap, val, tol / factor, cap, +1,
                                             tangents=der, threads=threads)
        g[sel] = gi * factor
        grad[sel] = gri * factor * abs(man.multiplier) ** (-int(m))
        status[sel] = sti
    return g.reshape(zeta.shape), grad.reshape(zeta.shape), status.reshape(zeta.shape)


def green_normalization(man, tol=1e-10, samples=2048):
    """Radius ``s`` with ``max_{|zeta| <= s} G+ o psi = 1``.

    ``G+ o psi`` is subharmonic, so the disk maximum sits on the boundary
    circle and increases with the radius; ``s`` is found by bisection.
    """
    def circle_max(s):
        th = 2 * np.pi * np.arange(samples) / samples
        g, _, _ = green_on_manifold(man, s * np.exp(1j * th), tol)
        i = int(np.argmax(g))
        lo, hi = th[i] - 2 * np.pi / samples, th[i] + 2 * np.pi / samples
        best = g[i]
        for _ in range(4):
            fine = np.linspace(lo, hi, 33)
            gf, _, _ = green_on_manifold(man, s * np.exp(1j * fine), tol)
            j = int(np.argmax(gf))
            best = max(best, gf[j])
            step = fine[1] - fine[0]
            lo, hi = fine[j] - step, fine[j] + step
        return best

    lo, hi = 0.0, man.validity_radius
    while circle_max(hi) < 1.0:
        lo, hi = hi, hi * 2
        if hi > 1e12:
            raise ValueError("G+ stays below 1 on the manifold")
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if circle_max(mid) < 1.0:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-10 * hi:
            break
    return 0.5 * (lo + hi)


def unstable_slice(fmap, saddle, radius, resolution=256, tol=1e-8, manifold=None,
                   distance_estimate=True, normalize=True, threads=1, refine=0):
    """Sample ``G+ o psi_u`` on ``|zeta| <= radius``; see :func:`potential.assemble_slice`."""
    if resolution < 16:
        raise ValueError("resolution must be at least 16")
    man = manifold or local_series(fmap, saddle, UNSTABLE)
    zeta, h = potential.parameter_grid(radius, resolution)
    g, grad, status = green_on_manifold(man, zeta, tol, threads=threads)
    sample = potential.assemble_slice(zeta, h, g, grad, status, tol, radius, distance_estimate)
    if normalize:
        sample.rescale = green_normalization(man)
    sample.meta.update(kind="unstable", period=saddle.period,
                       lambda_u=[saddle.lambda_u.real, saddle.lambda_u.imag],
                       validity_radius=man.validity_radius)
    if refine:
        potential.refine_boundary(sample, lambda z: green_on_manifold(man, z, tol, threads=threads),
                                  refine, tol, distance_estimate)
    return sample


# --------------------------------------------------------------------------- #
# Homoclinic points


@dataclass
class HomoclinicConfig:
    max_land: int = 12
    radial_steps: int = 48
    transversality_floor: float = 1e-3
    newton_tol: float = 1e-13
    converge_tol: float = 1e-8
    order: int = 25


@dataclass
class HomoclinicPoint:
    saddle: periodic.PeriodicOrbit
    zeta: complex
    eta: complex
    landing: int
    transversality: float
    point: np.ndarray = field(repr=False, default=None)

    def to_row(self):
        return (self.zeta.real, self.zeta.imag, self.landing, self.transversality)


class HomoclinicList(list):
    def __init__(self, items=(), tangencies=()):
        super().__init__(items)
        self.tangencies = list(tangencies)


class _Charts:
    """Unstable and stable series at the same cycle point, plus chart coordinates."""

    def __init__(self, fmap, saddle, order=25):
        self.fmap = fmap
        self.saddle = saddle
        self.unstable = local_series(fmap, saddle, UNSTABLE, order)
        self.stable = local_series(fmap, saddle, STABLE, order)
        self.E = np.stack([self.unstable.direction, self.stable.direction], axis=1)
        self.Einv = np.linalg.inv(self.E)

    def stable_coordinate(self, q):
        """Solve ``q = psi_s(eta) + xi * e_u``; returns ``(xi, eta)`` arrays."""
        q = np.asarray(q, dtype=complex)
        base = self.stable.coeffs[0]
        lin = (q - base) @ self.Einv.T
        xi, eta = lin[..., 0], lin[..., 1]
        eu = self.unstable.direction
        with np.errstate(all="ignore"):
            for _ in range(20):
                val, der = self.stable.series_with_derivative(eta)
                r = val + xi[..., None] * eu - q
                # columns: d/dxi = e_u, d/deta = psi_s'(eta)
                a, b = eu[0], der[..., 0]
                c, d = eu[1], der[..., 1]
                det = a * d - b * c
                dxi = (d * r[..., 0] - b * r[..., 1]) / det
                deta = (-c * r[..., 0] + a * r[..., 1]) / det
                xi, eta = xi - dxi, eta - deta
                if np.nanmax(np.abs(np.concatenate([np.ravel(dxi), np.ravel(deta)])), initial=0) < 1e-15:
                    break
        return xi, eta

    def fundamental(self, zeta, r1):
        """Representative of ``zeta`` modulo ``zeta ~ lam_u zeta`` in ``[r1, r1 |lam_u|)``."""
        lam = self.unstable.multiplier
        m = math.floor(math.log(abs(zeta) / r1) / math.log(abs(lam)))
        return zeta * lam ** (-m), m


def _landing_newton(ch, zeta, eta, k, tol):
    """Solve ``f^k(psi_u(zeta)) = psi_s(eta)`` for ``(zeta, eta)``."""
    fmap = ch.fmap
    for _ in range(40):
        try:
            p, dp = extend(ch.unstable, zeta, with_derivative=True)
            x = np.asarray(p, dtype=complex)
            for _ in range(k):
                dp = core.derivative(fmap, x) @ dp
                x = np.asarray(core.evaluate(fmap, x), dtype=complex)
        except core.EscapeError:
            return None
        if abs(eta) > 4 * ch.stable.validity_radius:
            return None
        s, ds = ch.stable.series_with_derivative(eta)
        r = x - s
        J = np.stack([dp, -ds], axis=1)
        try:
            step = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError:
            return None
        zeta, eta = zeta + step[0], eta + step[1]
        if np.max(np.abs(step)) < tol * max(1.0, abs(zeta)):
            return zeta, eta, x, dp, ds
    return None


def _transversality(u, v):
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    c = abs(np.vdot(u, v)) / (nu * nv)
    return float(math.asin(min(1.0, math.sqrt(max(0.0, 1 - c * c)))))


def refine_homoclinic(fmap, saddle, zeta, landing, cfg=None, charts=None, r1=None):
    """Refine a homoclinic guess and return it in canonical (fundamental annulus) form."""
    cfg = cfg or HomoclinicConfig()
    ch = charts or _Charts(fmap, saddle, cfg.order)
    xi, eta = ch.stable_coordinate(np.asarray(extend_and_iterate(ch, zeta, landing)))
    sol = _landing_newton(ch, complex(zeta), complex(eta), landing, cfg.newton_tol)
    if sol is None:
        return None
    z, e, x, dp, ds = sol
    return _canonical_point(ch, z, e, landing, dp, ds, cfg, r1)


def extend_and_iterate(ch, zeta, k):
    x = np.asarray(extend(ch.unstable, zeta), dtype=complex)
    for _ in range(k):
        x = np.asarray(core.evaluate(ch.fmap, x), dtype=complex)
    return x


def _canonical_point(ch, zeta, eta, k, dp, ds, cfg, r1):
    r1 = r1 if r1 is not None else ch.unstable.validity_radius / abs(ch.unstable.multiplier)
    zc, m = ch.fundamental(zeta, r1)
    kc = k + m * ch.saddle.period
    if kc < 0:
        return None
    trans = _transversality(dp, ds)
    point = np.asarray(extend(ch.unstable, zc), dtype=complex)
    # verify landing and convergence to the cycle by direct iteration
    x = point.copy()
    dist = np.inf
    orbit_pts = ch.saddle.points
    try:
        for j in range(kc + cfg.max_land):
            x = np.asarray(core.evaluate(ch.fmap, x), dtype=complex)
            if j + 1 >= kc:
                dist = min(dist, float(np.min(np.linalg.norm(orbit_pts - x, axis=1))))
                if dist < cfg.converge_tol:
                    break
    except core.EscapeError:
        return None
    if dist >= cfg.converge_tol:
        return None
    return HomoclinicPoint(ch.saddle, complex(zc), complex(eta), kc, trans, point)


def find_homoclinic(fmap, saddle, annulus, angular_steps=64, cfg=None):
    """Transverse homoclinic points with unstable parameter in the annulus.

    The annulus is scanned on a polar grid; for every landing time ``k`` the
    stable-chart offset ``xi`` (zero exactly on the local stable manifold) is
    evaluated and its local minima are refined by Newton on ``(zeta, eta)``.
    """
    r1, r2 = annulus
    if r1 <= 0 or r2 <= r1:
        raise ValueError("annulus must satisfy 0 < r1 < r2")
    cfg = cfg or HomoclinicConfig()
    ch = _Charts(fmap, saddle, cfg.order)
    radii = np.linspace(r1, r2, cfg.radial_steps)
    angles = 2 * np.pi * np.arange(angular_steps) / angular_steps
    grid = radii[:, None] * np.exp(1j * angles[None, :])
    rs = ch.stable.validity_radius
    pts = np.empty(grid.shape + (2,), dtype=complex)
    for idx, z in np.ndenumerate(grid):
        try:
            pts[idx] = np.asarray(extend(ch.unstable, z), dtype=complex)
        except core.EscapeError:
            pts[idx] = np.nan
    found, tangencies = [], []
    with np.errstate(all="ignore"):
        x = pts.copy()
        for k in range(1, cfg.max_land + 1):
            x = core._forward(fmap, x)
            x[~np.isfinite(x).all(axis=-1) | (np.abs(x).max(axis=-1) > 1e100)] = np.nan
            xi, eta = ch.stable_coordinate(x)
            mag = np.abs(xi)
            ok = np.isfinite(mag) & (np.abs(eta) <= rs) & (mag <= rs)
            mag = np.where(ok, mag, np.inf)
            for (i, j) in _local_minima(mag):
                sol = _landing_newton(ch, complex(grid[i, j]), complex(eta[i, j]), k, cfg.newton_tol)
                if sol is None:
                    continue
                z, e, _, dp, ds = sol
                h = _canonical_point(ch, z, e, k, dp, ds, cfg, r1)
                if h is None:
                    continue
                target = found if h.transversality > cfg.transversality_floor else tangencies
                if not any(abs(h.zeta - g.zeta) < 1e-8 * max(1.0, abs(h.zeta)) for g in found + tangencies):
                    target.append(h)
    found.sort(key=lambda h: (h.landing, abs(h.zeta), np.angle(h.zeta)))
    return HomoclinicList(found, tangencies)


def _local_minima(mag):
    """Grid cells whose value is minimal among their 8 neighbors (angle is periodic)."""
    padded = np.pad(mag, ((1, 1), (0, 0)), constant_values=np.inf)
    padded = np.concatenate([padded[:, -1:], padded, padded[:, :1]], axis=1)
    core_ = padded[1:-1, 1:-1]
    is_min = np.isfinite(core_)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di == 0 and dj == 0:
                continue
            nb = padded[1 + di:padded.shape[0] - 1 + di, 1 + dj:padded.shape[1] - 1 + dj]
            is_min &= core_ <= nb
    return list(zip(*np.nonzero(is_min)))


def homoclinic_csv(points):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["zeta_re", "zeta_im", "landing_k", "transversality"])
    for h in points:
        w.writerow([repr(float(h.zeta.real)), repr(float(h.zeta.imag)), h.landing,
                    repr(float(h.transversality))])
    return buf.getvalue()


# --------------------------------------------------------------------------- #
# Slice geometry


@dataclass
class SliceGeometryReport:
    count: int
    angle: float
    residual: float
    free_angle: float
    free_residual: float
    diameter: float
    dimension: float
    r_squared: float
    scales: list
    counts: list
    degraded: bool

    def to_record(self):
        return {k: (list(map(float, v)) if isinstance(v, list) else v)
                for k, v in self.__dict__.items()}

    def to_json(self):
        return json.dumps(self.to_record(), indent=1)


def _as_xy(points):
    if isinstance(points, potential.SliceSample):
        points = points.boundary_points
    pts = np.asarray(points)
    if np.iscomplexobj(pts):
        pts = np.stack([pts.real, pts.imag], axis=1)
    return np.asarray(pts, dtype=float).reshape(-1, 2)


def diameter(xy, directions=360):
    th = np.pi * np.arange(directions) / directions
    proj = xy @ np.stack([np.cos(th), np.sin(th)])
    return float(np.max(proj.max(axis=0) - proj.min(axis=0)))


def _tls(xy):
    S = xy.T @ xy
    vals, vecs = np.linalg.eigh(S)
    u = vecs[:, -1]
    normal = vecs[:, 0]
    dist = xy @ normal
    return math.atan2(u[1], u[0]), float(np.sqrt(np.mean(dist ** 2)))


def box_counts(xy, diam, levels=range(3, 10), shifts=4):
    """Occupied boxes per dyadic scale, minimized over ``shifts**2`` grid offsets.

    The minimum over offsets removes most of the grid-placement excess that
    biases the slope at the coarse end.
    """
    lo = xy.min(axis=0)
    scales, counts = [], []
    offsets = np.arange(shifts) / shifts
    for j in levels:
        eps = diam / 2 ** j
        best = None
        for ox in offsets:
            for oy in offsets:
                idx = np.floor((xy - lo) / eps + (ox, oy)).astype(np.int64)
                c = len(np.unique(idx[:, 0] * (2 ** 40) + idx[:, 1]))
                best = c if best is None else min(best, c)
        counts.append(best)
        scales.append(eps)
    return scales, counts


def slice_geometry(sample, min_points=50):
    """Line fit through the origin, free line fit, and box-counting dimension."""
    xy = _as_xy(sample)
    if len(xy) < min_points:
        raise ValueError(f"slice_geometry needs at least {min_points} points, got {len(xy)}")
    diam = diameter(xy)
    angle, rms = _tls(xy)
    centroid = xy.mean(axis=0)
    fangle, frms = _tls(xy - centroid)
    # count in the principal-axis frame: dimension is rotation invariant, grid excess is not
    c, sn = math.cos(fangle), math.sin(fangle)
    aligned = (xy - centroid) @ np.array([[c, -sn], [sn, c]])
    scales, counts = box_counts(aligned, diam)
    usable = [(s, c) for s, c in zip(scales, counts) if 1 < c <= len(xy) / 2]
    degraded = len(usable) < 5
    if degraded:
        usable = usable[-2:] if len(usable) >= 2 else list(zip(scales, counts))[:2]
    x = np.log([1 / s for s, _ in usable])
    y = np.log([c for _, c in usable])
    slope, intercept = np.polyfit(x, y, 1)
    pred = slope * x + intercept
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1 - ss_res / ss_tot if ss_tot > 0 else 1.0
    dim = float(np.clip(slope, 0.0, 2.0))
    return SliceGeometryReport(len(xy), angle, rms / diam if diam else 0.0, fangle,
                               frms / diam if diam else 0.0, diam, dim, r2,
                               [s for s, _ in usable], [c for _, c in usable], degraded)


def realness_link(geometry, saddle, residual_cut=0.02):
    """If the slice is line-like, report how real the unstable multiplier is."""
    ratio = abs(saddle.lambda_u.imag) / abs(saddle.lambda_u)
    return {
        "line_like": geometry.residual < residual_cut,
        "imag_ratio": ratio,
        "consistent": (geometry.residual >= residual_cut) or ratio < residual_cut,
    }
