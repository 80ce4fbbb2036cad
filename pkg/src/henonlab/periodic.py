"""Periodic orbits: multistart Newton search, classification, and saddle census.

The default solver works on the cyclic system ``f(x_i) - x_{i+1} = 0``
(``2n`` complex unknowns), which stays well conditioned for long saddle
orbits where ``f^n`` itself does not.  Seeds come from three sources:

* continuation from ``z -> z^d`` along a complex detour path in parameter
  space, starting from the exactly known cycles of the monomial;
* symbolic itineraries placed by inverse-branch iteration, when the map is in
  a certified horseshoe regime;
* a grid over the dynamical bidisk, refined by direct Newton on ``f^n``.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from . import core

SADDLE, SINK, SOURCE, NEUTRAL = "saddle", "sink", "source", "neutral"


@dataclass
class SearchConfig:
    tol: float = 1e-10
    max_iter: int = 60
    dedup_radius: float = 1e-7
    neutral_band: float = 1e-6
    continuation: bool = True
    continuation_steps: int = 48
    itinerary: bool = True
    itinerary_sweeps: int = 80
    max_itinerary_words: int = 4096
    grid: int = 0
    grid_kind: str = "real"
    divergence: float = 1e6
    slack: int = 0


@dataclass
class PeriodicOrbit:
    """A cycle ``x_0 -> x_1 -> ... -> x_{n-1} -> x_0`` with its multipliers."""

    period: int
    points: np.ndarray
    monodromy: np.ndarray
    lambda_s: complex
    lambda_u: complex
    classification: str
    residual: float
    lower_period: bool = False

    @property
    def eigenvalues(self):
        return self.lambda_s, self.lambda_u

    @property
    def chi_u(self):
        if self.classification != SADDLE:
            return None
        return math.log(abs(self.lambda_u)) / self.period

    @property
    def is_saddle(self):
        return self.classification == SADDLE

    @property
    def key(self):
        """Identifier resolvable against the JSON orbit list."""
        z, w = self.points[0]
        return f"P{self.period}:{z.real:.10g}{z.imag:+.10g}j,{w.real:.10g}{w.imag:+.10g}j"

    def to_record(self):
        return {
            "id": self.key,
            "period": self.period,
            "points": [[[p.real, p.imag] for p in pt] for pt in self.points],
            "lambda_s": [self.lambda_s.real, self.lambda_s.imag],
            "lambda_u": [self.lambda_u.real, self.lambda_u.imag],
            "classification": self.classification,
            "chi_u": self.chi_u,
            "residual": self.residual,
            "lower_period": self.lower_period,
        }


class OrbitList(list):
    """Orbits found for one period, with the enumeration completeness."""

    def __init__(self, orbits=(), period=0, expected=0):
        super().__init__(orbits)
        self.period = period
        self.expected = expected

    @property
    def point_count(self):
        return sum(o.period for o in self)

    @property
    def completeness(self):
        return self.point_count / self.expected if self.expected else 0.0


# --------------------------------------------------------------------------- #
# Vectorized map tables (allow the degenerate a = 0 used by continuation)


@dataclass
class _Table:
    a: np.ndarray
    polys: np.ndarray  # (k, dmax+1) highest first, padded with leading zeros
    degrees: tuple

    @classmethod
    def from_map(cls, fmap):
        dmax = max(f.degree for f in fmap.factors)
        polys = np.zeros((len(fmap.factors), dmax + 1), dtype=complex)
        for i, f in enumerate(fmap.factors):
            polys[i, dmax - f.degree:] = f.poly_coeffs
        return cls(np.array([f.a for f in fmap.factors]), polys,
                   tuple(f.degree for f in fmap.factors))

    def scaled(self, s_a, s_c):
        """Table with ``a -> s_a * a`` and lower coefficients times ``s_c``."""
        polys = self.polys * s_c
        for i, d in enumerate(self.degrees):
            lead = polys.shape[1] - d - 1
            polys[i, lead] = 1.0
        return _Table(self.a * s_a, polys, self.degrees)

    def step(self, pts, with_jac=True):
        z, w = pts[..., 0], pts[..., 1]
        jac = None
        if with_jac:
            jac = np.zeros(z.shape + (2, 2), dtype=complex)
            jac[..., 0, 0] = 1.0
            jac[..., 1, 1] = 1.0
        for i in range(len(self.a)):
            row = self.polys[i]
            p = np.zeros_like(z)
            dp = np.zeros_like(z)
            for c in row:
                dp = dp * z + p
                p = p * z + c
            if with_jac:
                # [[p', a], [1, 0]] @ jac
                j0 = dp[..., None] * jac[..., 0, :] + self.a[i] * jac[..., 1, :]
                jac[..., 1, :] = jac[..., 0, :]
                jac[..., 0, :] = j0
            z, w = self.a[i] * w + p, z
        return np.stack([z, w], axis=-1), jac


# --------------------------------------------------------------------------- #
# Newton solvers


def _cyclic_residual(tab, X):
    FX, DF = tab.step(X)
    return FX - np.roll(X, -1, axis=1), DF


def _cyclic_jacobian(DF):
    m, n = DF.shape[:2]
    J = np.zeros((m, 2 * n, 2 * n), dtype=complex)
    eye = np.eye(2)
    for i in range(n):
        J[:, 2 * i:2 * i + 2, 2 * i:2 * i + 2] += DF[:, i]
        nxt = (i + 1) % n
        J[:, 2 * i:2 * i + 2, 2 * nxt:2 * nxt + 2] -= eye
    return J


def _norm(R):
    return np.max(np.abs(R.reshape(len(R), -1)), axis=1)


def cyclic_newton(tab, X, tol=1e-10, max_iter=60, divergence=1e6):
    """Damped Newton on the cyclic system for a batch ``X`` of shape (m, n, 2).

    Returns ``(X, residual, converged)``.
    """
    X = np.array(X, dtype=complex)
    m, n = X.shape[:2]
    if m == 0:
        return X, np.zeros(0), np.zeros(0, dtype=bool)
    active = np.ones(m, dtype=bool)
    with np.errstate(all="ignore"):
        R, DF = _cyclic_residual(tab, X)
        res = _norm(R)
        res[~np.isfinite(res)] = np.inf
        for _ in range(max_iter):
            active &= np.isfinite(res) & (np.max(np.abs(X.reshape(m, -1)), axis=1) < divergence)
            todo = active & (res >= tol * 1e-3)
            if not todo.any():
                break
            idx = np.nonzero(todo)[0]
            J = _cyclic_jacobian(DF[idx])
            try:
                delta = np.linalg.solve(J, -R[idx].reshape(len(idx), 2 * n, 1))[..., 0]
            except np.linalg.LinAlgError:
                delta = np.stack([_lstsq(Jk, -Rk.reshape(-1)) for Jk, Rk in zip(J, R[idx])])
            delta = delta.reshape(len(idx), n, 2)
            lam = np.ones(len(idx))
            Xi, resi, Ri, DFi = X[idx], res[idx], R[idx], DF[idx]
            pending = np.ones(len(idx), dtype=bool)
            for _ls in range(12):
                trial = Xi[pending] + lam[pending, None, None] * delta[pending]
                Rt, DFt = _cyclic_residual(tab, trial)
                rt = _norm(Rt)
                rt[~np.isfinite(rt)] = np.inf
                ok = rt < resi[pending] * (1 - 1e-4 * lam[pending]) + 1e-300
                # accept tiny residual improvements at the rounding floor
                ok |= (rt < tol) & np.isfinite(rt)
                pid = np.nonzero(pending)[0]
                acc = pid[ok]
                Xi[acc], resi[acc], Ri[acc], DFi[acc] = trial[ok], rt[ok], Rt[ok], DFt[ok]
                pending[acc] = False
                if not pending.any():
                    break
                lam[pending] *= 0.5
            stalled = idx[pending]
            X[idx], res[idx], R[idx], DF[idx] = Xi, resi, Ri, DFi
            # a failed line search at the rounding floor is convergence, otherwise stop
            active[stalled] = False
    converged = np.isfinite(res) & (res < tol)
    return X, res, converged


def _lstsq(J, r):
    return np.linalg.lstsq(J, r, rcond=None)[0]


def direct_newton(tab, x, n, tol=1e-10, max_iter=40, divergence=1e6):
    """Damped Newton on ``f^n(x) - x`` for seeds ``x`` of shape (m, 2)."""
    x = np.array(x, dtype=complex)

    def fn(pts):
        J = np.broadcast_to(np.eye(2, dtype=complex), pts.shape[:-1] + (2, 2)).copy()
        y = pts
        for _ in range(n):
            y, D = tab.step(y)
            J = D @ J
        return y - pts, J - np.eye(2)

    with np.errstate(all="ignore"):
        G, J = fn(x)
        res = np.max(np.abs(G), axis=1)
        res[~np.isfinite(res)] = np.inf
        for _ in range(max_iter):
            todo = np.isfinite(res) & (res > tol * 1e-3) & (np.max(np.abs(x), axis=1) < divergence)
            if not todo.any():
                break
            idx = np.nonzero(todo)[0]
            Jm = J[idx]
            det = Jm[:, 0, 0] * Jm[:, 1, 1] - Jm[:, 0, 1] * Jm[:, 1, 0]
            good = np.abs(det) > 1e-300
            idx, Jm, det = idx[good], Jm[good], det[good]
            g = G[idx]
            dz = -(Jm[:, 1, 1] * g[:, 0] - Jm[:, 0, 1] * g[:, 1]) / det
            dw = -(-Jm[:, 1, 0] * g[:, 0] + Jm[:, 0, 0] * g[:, 1]) / det
            delta = np.stack([dz, dw], axis=1)
            scale = np.maximum(1.0, np.max(np.abs(delta), axis=1))
            # cap the step length; direct Newton overshoots into the escape region
            trial = x[idx] + delta / scale[:, None]
            Gt, Jt = fn(trial)
            rt = np.max(np.abs(Gt), axis=1)
            x[idx], G[idx], J[idx] = trial, Gt, Jt
            res[idx] = np.where(np.isfinite(rt), rt, np.inf)
    return x, res


# --------------------------------------------------------------------------- #
# Seeds


def horseshoe_certified(fmap):
    """Sufficient condition for a hyperbolic full-shift horseshoe.

    For a single quadratic factor ``z^2 + c`` the map is a hyperbolic
    horseshoe when ``|c| > 2 (1 + |a|)^2``.
    """
    if len(fmap.factors) != 1 or fmap.factors[0].degree != 2:
        return False
    f = fmap.factors[0]
    return abs(f.coeffs[0]) > 2 * (1 + abs(f.a)) ** 2


def _roots_branch(f, v, s):
    """Branch ``s`` of the solution ``u`` of ``p(u) = v``."""
    d = f.degree
    omega = np.exp(2j * np.pi * s / d)
    if all(c == 0 for c in f.coeffs[1:]):
        return omega * (v - f.coeffs[0]) ** (1.0 / d)
    out = np.empty_like(v)
    for idx, vv in np.ndenumerate(v):
        coeffs = f.poly_coeffs.copy()
        coeffs[-1] -= vv
        roots = np.roots(coeffs)
        guide = omega[idx] * vv ** (1.0 / d) if np.ndim(omega) else omega * vv ** (1.0 / d)
        out[idx] = roots[np.argmin(np.abs(roots - guide))]
    return out


def itinerary_seeds(fmap, n, sweeps=80, max_words=4096):
    """One seed cycle per symbolic word, placed by inverse-branch iteration.

    The factor-level scalar sequence satisfies
    ``u_{j+1} = a_j u_{j-1} + p_j(u_j)``; each sweep replaces every ``u_j`` by
    the word's branch of ``p_j^{-1}(u_{j+1} - a_j u_{j-1})``.
    """
    k = len(fmap.factors)
    L = n * k
    alphabet = [range(fmap.factors[j % k].degree) for j in range(L)]
    total = math.prod(len(a) for a in alphabet)
    if total > max_words:
        return np.zeros((0, n, 2), dtype=complex)
    words = np.array(list(itertools.product(*alphabet)), dtype=float).reshape(total, L)
    radius = core.filtration_radius(fmap)
    U = np.zeros((total, L), dtype=complex)
    for j in range(L):
        f = fmap.factors[j % k]
        U[:, j] = _roots_branch(f, np.zeros(total, dtype=complex), words[:, j])
    a = np.array([fmap.factors[j % k].a for j in range(L)])
    with np.errstate(all="ignore"):
        for _ in range(sweeps):
            nxt = np.roll(U, -1, axis=1)
            prv = np.roll(U, 1, axis=1)
            V = nxt - a * prv
            for j in range(L):
                U[:, j] = _roots_branch(fmap.factors[j % k], V[:, j], words[:, j])
            U = np.clip(U.real, -4 * radius, 4 * radius) + 1j * np.clip(U.imag, -4 * radius, 4 * radius)
    # orbit points of f: x_i = (u_{ik}, u_{ik-1})
    X = np.empty((total, n, 2), dtype=complex)
    for i in range(n):
        X[:, i, 0] = U[:, (i * k) % L]
        X[:, i, 1] = U[:, (i * k - 1) % L]
    return X


def _monomial_cycles(tab, n):
    """All fixed points of ``f^n`` for the map with every ``a = 0`` and ``p = z^d``."""
    k = len(tab.degrees)
    D = math.prod(tab.degrees) ** n
    roots = np.concatenate([[0j], np.exp(2j * np.pi * np.arange(D - 1) / (D - 1))])
    L = n * k
    U = np.empty((len(roots), L), dtype=complex)
    U[:, 0] = roots
    for j in range(1, L):
        U[:, j] = U[:, j - 1] ** tab.degrees[(j - 1) % k]
    X = np.empty((len(roots), n, 2), dtype=complex)
    for i in range(n):
        X[:, i, 0] = U[:, (i * k) % L]
        X[:, i, 1] = U[:, (i * k - 1) % L]
    return X


# a path can pass close to a collision of cycles and merge branches; later detours are retries
DETOURS = (0.6180339887 + 0.7861513777j, 0.6180339887 - 0.7861513777j, -0.4142135624 + 1.3247179572j)


def continuation_seeds(fmap, n, steps=48, tol=1e-10, detour=DETOURS[0]):
    """Continue the cycles of ``z^d`` to ``fmap`` along a complex detour path.

    The path scales the coefficients by ``s(t) = t + gamma t (1 - t)`` with a
    non-real ``gamma`` so that it generically avoids bifurcation parameters
    (all of which are met by real paths).
    """
    tab = _Table.from_map(fmap)
    X = _monomial_cycles(tab, n)
    if len(X) > 20000:
        return np.zeros((0, n, 2), dtype=complex)
    alive = np.ones(len(X), dtype=bool)
    ts = np.linspace(0.0, 1.0, steps + 1) ** 1.5
    prev_X = None
    for t_prev, t in zip(ts[:-1], ts[1:]):
        s = t + detour * t * (1 - t)
        step_tab = tab.scaled(s, s)
        guess = X[alive]
        if prev_X is not None:
            # secant predictor
            guess = guess + (guess - prev_X[alive]) * 0.5
        prev = X.copy()
        Y, res, conv = cyclic_newton(step_tab, guess, tol=max(tol, 1e-9) if t < 1 else tol,
                                     max_iter=12 if t < 1 else 40)
        ok = conv | (res < 1e-6)
        X[alive] = Y
        idx = np.nonzero(alive)[0]
        alive[idx[~ok]] = False
        prev_X = prev
    return X[alive]


def grid_seeds(fmap, resolution, kind="real"):
    R = core.filtration_radius(fmap)
    s = np.linspace(-R, R, resolution)
    if kind == "real":
        zz, ww = np.meshgrid(s, s, indexing="ij")
        return np.stack([zz.ravel(), ww.ravel()], axis=1).astype(complex)
    axes = [s] * 4
    g = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 4)
    return np.stack([g[:, 0] + 1j * g[:, 1], g[:, 2] + 1j * g[:, 3]], axis=1)


# --------------------------------------------------------------------------- #
# Classification


def dominant_eigenvalue(M, det):
    """Largest-modulus eigenvalue of 2x2 ``M`` given its exact determinant."""
    tr = M[0, 0] + M[1, 1]
    h = tr / 2
    root = np.sqrt(h * h - det + 0j)
    l1, l2 = h + root, h - root
    return l1 if abs(l1) >= abs(l2) else l2


def monodromy(fmap, points):
    M = np.eye(2, dtype=complex)
    for x in points:
        M = core.derivative(fmap, x) @ M
    return M


def inverse_monodromy(fmap, points):
    """Product of ``Df^{-1}`` along the cycle traversed backward."""
    M = np.eye(2, dtype=complex)
    for x in points[::-1]:
        M = np.linalg.inv(core.derivative(fmap, x)) @ M
    return M


def multipliers(fmap, points):
    """``(lambda_small, lambda_big, monodromy)`` ordered by modulus.

    The large eigenvalue comes from the forward product and the small one
    from the backward product, so their product against ``Jac^n`` is a
    genuine consistency check.
    """
    n = len(points)
    jac_n = fmap.jacobian ** n
    M = monodromy(fmap, points)
    big = complex(dominant_eigenvalue(M, jac_n))
    if abs(abs(big) ** 2 - abs(jac_n)) <= 1e-9 * abs(big) ** 2:
        # equal moduli: the backward product cannot tell the two apart
        small = jac_n / big
    else:
        Minv = inverse_monodromy(fmap, points)
        small = complex(1.0 / dominant_eigenvalue(Minv, 1.0 / jac_n))
    if abs(small) > abs(big):
        small, big = big, small
    return small, big, M


def classify_multipliers(lam_s, lam_u, neutral_band=1e-6):
    m1, m2 = abs(lam_s), abs(lam_u)
    if min(abs(m1 - 1), abs(m2 - 1)) < neutral_band:
        return NEUTRAL
    if m1 < 1 < m2:
        return SADDLE
    if m2 < 1:
        return SINK
    return SOURCE


def classify(fmap, points, neutral_band=1e-6, residual=None, lower_period=False):
    """Build a :class:`PeriodicOrbit` from a verified cycle."""
    pts = _canonical(np.asarray(points, dtype=complex))
    lam_s, lam_u, M = multipliers(fmap, pts)
    cls = classify_multipliers(lam_s, lam_u, neutral_band)
    if residual is None:
        residual = cycle_residual(fmap, pts)
    return PeriodicOrbit(len(pts), pts, M, lam_s, lam_u, cls, residual, lower_period)


def cycle_residual(fmap, points):
    pts = np.asarray(points, dtype=complex)
    img = core.evaluate(fmap, pts)
    return float(np.max(np.abs(img - np.roll(pts, -1, axis=0))))


def _canonical(points):
    keys = [(p[0].real, p[0].imag, p[1].real, p[1].imag) for p in points]
    start = min(range(len(points)), key=lambda i: keys[i])
    return np.roll(points, -start, axis=0)


def _exact_period(X, radius):
    n = len(X)
    for m in range(1, n + 1):
        if n % m:
            continue
        if m == n or np.max(np.abs(np.roll(X, -m, axis=0) - X)) < radius:
            return m
    return n


# --------------------------------------------------------------------------- #
# Search


def _dedup(fmap, cycles, residuals, radius):
    """Merge candidate cycles that share a point; keep the best residual."""
    if not cycles:
        return []
    order = np.argsort(residuals, kind="stable")
    cycles = [cycles[i] for i in order]
    residuals = [residuals[i] for i in order]
    owner = np.concatenate([np.full(len(c), i) for i, c in enumerate(cycles)])
    P = np.concatenate(cycles)
    coords = np.stack([P[:, 0].real, P[:, 0].imag, P[:, 1].real, P[:, 1].imag], axis=1)
    scale = np.maximum(1.0, np.linalg.norm(core.derivative(fmap, P), ord=2, axis=(1, 2)))
    tree = cKDTree(coords)
    parent = list(range(len(cycles)))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i, j in tree.query_pairs(radius * float(scale.max())):
        oi, oj = owner[i], owner[j]
        if oi == oj or len(cycles[oi]) != len(cycles[oj]):
            continue
        if np.linalg.norm(coords[i] - coords[j]) < radius * max(scale[i], scale[j]):
            ri, rj = find(oi), find(oj)
            if ri != rj:
                parent[max(ri, rj)] = min(ri, rj)
    keep = sorted({find(i) for i in range(len(cycles))})
    return [(cycles[i], residuals[i]) for i in keep]


def find_periodic(fmap, n, seeds=None, cfg=None):
    """All period-``n`` cycles reachable from the seeds (default seeds if None).

    Cycles whose exact period is a proper divisor of ``n`` are kept, stored
    with their exact period and flagged ``lower_period``.
    """
    if n < 1:
        raise ValueError("period must be at least 1")
    cfg = cfg or SearchConfig()
    tab = _Table.from_map(fmap)
    batches = []
    if seeds is not None:
        seeds = np.asarray(seeds, dtype=complex)
        if seeds.ndim == 2:
            batches.append(_from_points(tab, fmap, seeds, n, cfg))
        else:
            batches.append(seeds)
    else:
        if cfg.continuation:
            batches.append(continuation_seeds(fmap, n, cfg.continuation_steps, cfg.tol))
        if cfg.itinerary and horseshoe_certified(fmap):
            batches.append(itinerary_seeds(fmap, n, cfg.itinerary_sweeps, cfg.max_itinerary_words))
        if cfg.grid:
            batches.append(_from_points(tab, fmap, grid_seeds(fmap, cfg.grid, cfg.grid_kind), n, cfg))
    orbits = _solve(tab, fmap, batches, n, cfg)
    expected = fmap.degree ** n
    if seeds is None and cfg.continuation:
        for detour in DETOURS[1:]:
            if sum(o.period for o in orbits) >= expected:
                break
            batches.append(continuation_seeds(fmap, n, cfg.continuation_steps, cfg.tol, detour))
            orbits = _solve(tab, fmap, batches, n, cfg)
    return OrbitList(orbits, n, fmap.degree ** n)


def _solve(tab, fmap, batches, n, cfg):
    batches = [b for b in batches if len(b)]
    X = np.concatenate(batches) if batches else np.zeros((0, n, 2), dtype=complex)
    X, res, conv = cyclic_newton(tab, X, cfg.tol, cfg.max_iter, cfg.divergence)
    cycles, residuals = [], []
    for Xi, ri in zip(X[conv], res[conv]):
        m = _exact_period(Xi, max(cfg.dedup_radius, 1e3 * cfg.tol))
        cycles.append(Xi[:m])
        residuals.append(float(ri))
    merged = _dedup(fmap, cycles, residuals, cfg.dedup_radius)
    orbits = [
        classify(fmap, c, cfg.neutral_band, residual=cycle_residual(fmap, c), lower_period=len(c) < n)
        for c, _ in merged
    ]
    orbits = [o for o in orbits if o.residual < cfg.tol]
    orbits.sort(key=lambda o: (o.period, tuple(_sort_key(o.points[0]))))
    return orbits


def _sort_key(p):
    return (round(p[0].real, 9), round(p[0].imag, 9), round(p[1].real, 9), round(p[1].imag, 9))


def _from_points(tab, fmap, pts, n, cfg):
    x, res = direct_newton(tab, pts, n, tol=cfg.tol, divergence=cfg.divergence)
    good = np.isfinite(res) & (res < 1e-6)
    x = x[good]
    X = np.empty((len(x), n, 2), dtype=complex)
    X[:, 0] = x
    with np.errstate(all="ignore"):
        for i in range(1, n):
            X[:, i] = tab.step(X[:, i - 1], with_jac=False)[0]
    return X


# --------------------------------------------------------------------------- #
# Census


@dataclass
class CensusRow:
    n: int
    fix_count: int
    sper_count: int
    ratio: float
    mean_chi_u: float
    weighted_chi_u: float
    low_confidence: bool
    orbits: list = field(default_factory=list, repr=False)

    HEADER = ("n", "fix_count", "sper_count", "ratio", "mean_chi_u", "weighted_chi_u",
              "low_confidence")

    def as_tuple(self):
        return (self.n, self.fix_count, self.sper_count, self.ratio, self.mean_chi_u,
                self.weighted_chi_u, self.low_confidence)


def census_row(fmap, orbits, n, slack=0):
    d_n = fmap.degree ** n
    fix = sum(o.period for o in orbits)
    saddles = [o for o in orbits if o.is_saddle]
    sper = sum(o.period for o in saddles)
    chi_sum = sum(o.period * o.chi_u for o in saddles)
    mean = chi_sum / sper if sper else float("nan")
    return CensusRow(n, fix, sper, sper / d_n, mean, chi_sum / d_n, fix < d_n - slack,
                     list(orbits))


def census(fmap, n_max, cfg=None):
    """Census rows ``n = 1..n_max`` of fixed points of ``f^n`` and saddles among them."""
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    cfg = cfg or SearchConfig()
    return [census_row(fmap, find_periodic(fmap, n, cfg=cfg), n, cfg.slack)
            for n in range(1, n_max + 1)]


def _fmt(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def census_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CensusRow.HEADER)
    for r in rows:
        w.writerow([_fmt(v) for v in r.as_tuple()])
    return buf.getvalue()


def orbits_json(orbits):
    return json.dumps([o.to_record() for o in orbits], indent=1)
