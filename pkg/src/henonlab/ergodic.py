"""Lyapunov exponents and Birkhoff statistics over saddle cycles."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import core, periodic


@dataclass
class ExponentEstimate:
    value: float
    method: str
    n: int
    uncertainty: float
    count_normalized: float | None = None
    low_confidence: bool = False
    direction: np.ndarray | None = field(default=None, repr=False)

    def to_record(self):
        rec = {"value_nats": self.value, "method": self.method, "n": self.n,
               "uncertainty": self.uncertainty, "low_confidence": self.low_confidence}
        if self.count_normalized is not None:
            rec["count_normalized_nats"] = self.count_normalized
        return rec


class BirkhoffEscape(core.EscapeError):
    def __init__(self, step, last):
        super().__init__(f"orbit escaped after {step} steps", step=step, last=last)
        self.partial_length = step


def _census_rows(fmap, n, rows=None, cfg=None):
    rows = {r.n: r for r in (rows or [])}
    for m in (n - 1, n):
        if m >= 1 and m not in rows:
            rows[m] = periodic.census_row(fmap, periodic.find_periodic(fmap, m, cfg=cfg), m,
                                          (cfg or periodic.SearchConfig()).slack)
    return rows


def lyapunov_saddle_average(fmap, n, rows=None, cfg=None):
    """``d^-n`` sum of ``chi_u`` over period-``n`` saddle points, plus the count-normalized mean.

    The uncertainty is the change from ``n - 1``.
    """
    rows = _census_rows(fmap, n, rows, cfg)
    row = rows[n]
    unc = abs(row.weighted_chi_u - rows[n - 1].weighted_chi_u) if n > 1 else 0.0
    if not math.isfinite(unc):
        unc = math.inf
    low = row.low_confidence or (n > 1 and rows[n - 1].low_confidence)
    return ExponentEstimate(row.weighted_chi_u, "saddle_average", n, unc, row.mean_chi_u, low)


def census_weighted(row):
    return ExponentEstimate(row.weighted_chi_u, "census_weighted", row.n, 0.0, row.mean_chi_u,
                            row.low_confidence)


def unstable_direction(fmap, orbit):
    """Unit eigenvector of the monodromy for ``lambda_u`` at ``orbit.points[0]``."""
    A = orbit.monodromy - orbit.lambda_u * np.eye(2)
    if abs(A[0, 0]) + abs(A[0, 1]) >= abs(A[1, 0]) + abs(A[1, 1]):
        v = np.array([-A[0, 1], A[0, 0]])
    else:
        v = np.array([-A[1, 1], A[1, 0]])
    return v / np.linalg.norm(v)


def lyapunov_birkhoff(fmap, seed, length, blocks=10, burn_in=0):
    """Average log-stretch of a tangent vector over ``length`` steps.

    ``seed`` is a :class:`periodic.PeriodicOrbit` (its cycle is replayed and
    the vector starts on the unstable eigendirection) or a point (the orbit
    is iterated and the vector starts generic).  The uncertainty is the
    standard error across ``blocks`` equal blocks.
    """
    if length < 1:
        raise ValueError("length must be positive")
    if isinstance(seed, periodic.PeriodicOrbit):
        pts = seed.points
        D = core.derivative(fmap, pts)
        v = unstable_direction(fmap, seed)

        def jac(i, x):
            return D[i % len(pts)], None
        x = None
    else:
        x = np.asarray(seed, dtype=complex)
        v = np.array([1.0, 0.5 + 0.25j]) / np.linalg.norm([1.0, 0.5 + 0.25j])

        def jac(i, x):
            try:
                Dx = core.derivative(fmap, x)
                nxt = np.asarray(core.evaluate(fmap, x), dtype=complex)
            except core.EscapeError:
                raise BirkhoffEscape(i, core.C2Point(*x)) from None
            return Dx, nxt
        for i in range(burn_in):
            Dx, x = jac(i, x)
            v = Dx @ v
            v = v / np.linalg.norm(v)
    logs = np.empty(length)
    for i in range(length):
        Dx, nxt = jac(i, x)
        v = Dx @ v
        s = np.linalg.norm(v)
        logs[i] = math.log(s)
        v = v / s
        if nxt is not None:
            x = nxt
    nb = max(1, min(blocks, length))
    means = np.array([b.mean() for b in np.array_split(logs, nb)])
    unc = float(means.std(ddof=1) / math.sqrt(nb)) if nb > 1 else 0.0
    return ExponentEstimate(float(logs.mean()), "birkhoff", length, unc, direction=v)


def lyapunov_ensemble(fmap, orbits):
    """Uniformly weighted Birkhoff exponents over saddle orbits (a mu-spread sample)."""
    vals = [lyapunov_birkhoff(fmap, o, o.period).value for o in orbits if o.is_saddle]
    if not vals:
        raise ValueError("no saddles in the ensemble")
    vals = np.array(vals)
    unc = float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else 0.0
    n = max(o.period for o in orbits)
    return ExponentEstimate(float(vals.mean()), "birkhoff", n, unc)


# --------------------------------------------------------------------------- #
# Birkhoff spectra


def _moments():
    """Default coordinate test functions with analytic gradient norms."""
    return {
        "re_z": (lambda z, w: z.real, lambda z, w: np.ones(z.shape)),
        "im_z": (lambda z, w: z.imag, lambda z, w: np.ones(z.shape)),
        "abs_z_sq": (lambda z, w: np.abs(z) ** 2, lambda z, w: 2 * np.abs(z)),
        "re_zw": (lambda z, w: (z * w).real, lambda z, w: np.hypot(np.abs(z), np.abs(w))),
        "abs_w_sq": (lambda z, w: np.abs(w) ** 2, lambda z, w: 2 * np.abs(w)),
    }


DEFAULT_FUNCTIONS = tuple(_moments())
PHI0 = "phi0_nats"


def _phi0_values(fmap, orbit):
    """``log |Df e_u|`` at each cycle point, ``e_u`` the transported unstable direction."""
    D = core.derivative(fmap, orbit.points)
    v = unstable_direction(fmap, orbit)
    out = np.empty(orbit.period)
    for i, Dk in enumerate(D):
        v = Dk @ v
        s = np.linalg.norm(v)
        out[i] = math.log(s)
        v = v / s
    return out


@dataclass
class BirkhoffSpectrum:
    n: int
    names: list
    values: np.ndarray  # (orbits, functions) Birkhoff averages
    weights: np.ndarray  # points per orbit
    orbit_ids: list
    reference: np.ndarray
    scales: np.ndarray  # C^1 norm estimates used to normalize
    rho: float
    j_n: int
    mask: np.ndarray
    degree: int

    @property
    def dispersion(self):
        """Point-weighted standard deviation of each column."""
        w = self.weights / self.weights.sum()
        mean = w @ self.values
        return np.sqrt(np.maximum(w @ (self.values - mean) ** 2, 0.0))

    @property
    def mask_count(self):
        return int(self.weights[self.mask].sum())

    @property
    def mask_ratio(self):
        return self.mask_count / self.degree ** self.n

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["orbit", "period", "in_sper_plus"] + list(self.names))
        for oid, wt, m, row in zip(self.orbit_ids, self.weights, self.mask, self.values):
            w.writerow([oid, int(wt), "true" if m else "false"] + [repr(float(v)) for v in row])
        return buf.getvalue()

    def summary(self):
        return {
            "n": self.n,
            "functions": list(self.names),
            "reference": [float(v) for v in self.reference],
            "dispersion": [float(v) for v in self.dispersion],
            "rho_n": self.rho,
            "j_n": self.j_n,
            "mask_count": self.mask_count,
            "mask_ratio": self.mask_ratio,
        }


def schedule_default(n):
    """``(rho_n, budget_n)``: deviation radius and the squared-norm budget for ``j_n``."""
    return n ** -0.25, n ** 0.125


def birkhoff_spectrum(fmap, n, orbits=None, test_functions=DEFAULT_FUNCTIONS, schedule=schedule_default,
                      reference=None, scales=None, cfg=None, j_n=None):
    """Per-orbit Birkhoff averages of the test functions and ``phi0`` over period-``n`` saddles.

    The filter keeps orbits whose averages of ``phi0`` and the first ``j_n``
    normalized moments all lie within ``rho_n`` of the reference.  Functions are
    centered at the reference and divided by a ``C^1`` norm estimate on the
    sample (``sup|phi - ref| + sup|grad phi|``; the gradient term is omitted
    for ``phi0``), and ``j_n`` is the largest count whose normalized squared
    norms stay within ``budget_n``.  ``reference`` defaults to this sample's
    own point-weighted means; pass the highest-``n`` means to follow the
    usual protocol.
    """
    if orbits is None:
        orbits = periodic.find_periodic(fmap, n, cfg=cfg)
    saddles = [o for o in orbits if o.is_saddle]
    funcs = _moments()
    names = [PHI0] + [t for t in test_functions if t in funcs]
    unknown = [t for t in test_functions if t not in funcs]
    if unknown:
        raise ValueError(f"unknown test functions: {unknown}")
    vals = np.zeros((len(saddles), len(names)))
    grads = np.zeros(len(names))
    pts_sup = np.zeros((len(saddles), len(names)))
    for i, o in enumerate(saddles):
        z, w = o.points[:, 0], o.points[:, 1]
        for j, name in enumerate(names[1:], start=1):
            phi, grad = funcs[name]
            v = phi(z, w)
            vals[i, j] = v.mean()
            pts_sup[i, j] = max(abs(v.max()), abs(v.min()))
            grads[j] = max(grads[j], float(np.max(grad(z, w))))
        p0 = _phi0_values(fmap, o)
        vals[i, 0] = p0.mean()
        pts_sup[i, 0] = np.max(np.abs(p0))
    weights = np.array([o.period for o in saddles], dtype=float)
    if reference is None:
        reference = (weights / weights.sum()) @ vals if len(saddles) else np.zeros(len(names))
    reference = np.asarray(reference, dtype=float)
    if scales is None:
        sup = np.max(np.abs(pts_sup), axis=0, initial=0.0) + np.abs(reference)
        scales = np.where(sup + grads > 0, sup + grads, 1.0)
    scales = np.asarray(scales, dtype=float)
    rho, budget = schedule(n)
    if j_n is None:
        # normalized moments have unit C^1 norm estimate on the sample
        normed = np.ones(len(names) - 1)
        j_n = int(np.sum(np.cumsum(normed ** 2 > budget) == 0))
    dev = np.abs(vals - reference) / scales
    mask = sper_plus_mask(dev, rho, j_n)
    return BirkhoffSpectrum(n, names, vals, weights, [o.key for o in saddles], reference, scales,
                            rho, j_n, mask, fmap.degree)


def sper_plus_mask(dev, rho, j_n):
    """Orbits whose normalized deviations for ``phi0`` and the first ``j_n`` moments are within ``rho``."""
    return np.all(dev[:, : j_n + 1] <= rho, axis=1)


def birkhoff_spectra(fmap, n_values, orbit_lists=None, cfg=None, **kwargs):
    """Spectra for several periods sharing the highest-``n`` reference and scales."""
    n_values = sorted(n_values)
    if orbit_lists is None:
        orbit_lists = {n: periodic.find_periodic(fmap, n, cfg=cfg) for n in n_values}
    top = birkhoff_spectrum(fmap, n_values[-1], orbit_lists[n_values[-1]], **kwargs)
    out = {}
    prev, prev_j = None, -1
    for n in n_values:
        sp = birkhoff_spectrum(fmap, n, orbit_lists[n], reference=top.reference,
                               scales=top.scales, **kwargs)
        # j_n is free below the norm budget: it grows by at most one moment per
        # period and holds back while admitting the next moment would shrink the mask
        dev = np.abs(sp.values - sp.reference) / sp.scales
        sp.j_n = min(sp.j_n, prev_j + 1)
        sp.mask = sper_plus_mask(dev, sp.rho, sp.j_n)
        while prev is not None and sp.j_n > 0 and sp.mask_ratio < prev:
            sp.j_n -= 1
            sp.mask = sper_plus_mask(dev, sp.rho, sp.j_n)
        prev, prev_j = sp.mask_ratio, sp.j_n
        out[n] = sp
    return out


# --------------------------------------------------------------------------- #
# Gap report


def lyapunov_gap_report(fmap, n_max, rows=None, cfg=None, exponent_tol=1e-9):
    """Spread of saddle exponents against the estimated exponent of the measure."""
    rows = rows or periodic.census(fmap, n_max, cfg)
    best = {}
    for r in rows:
        for o in r.orbits:
            if o.is_saddle and not o.lower_period:
                best[o.key] = o
    saddles = sorted(best.values(), key=lambda o: (o.chi_u, o.key))
    if not saddles:
        raise ValueError("no saddles found")
    lo, hi = saddles[0], saddles[-1]
    est = lyapunov_saddle_average(fmap, n_max, rows, cfg)
    unc = est.uncertainty if math.isfinite(est.uncertainty) else math.inf
    return {
        "n_max": n_max,
        "saddle_count": len(saddles),
        "chi_min": lo.chi_u,
        "chi_min_orbit": lo.key,
        "chi_max": hi.chi_u,
        "chi_max_orbit": hi.key,
        "chi_mu": est.value,
        "chi_mu_count_normalized": est.count_normalized,
        "chi_mu_uncertainty": unc,
        "gap_81": bool(len(saddles) > 1 and hi.chi_u - lo.chi_u > 2 * exponent_tol),
        "gap_82": bool(hi.chi_u - est.value > unc + exponent_tol),
        "low_confidence": any(r.low_confidence for r in rows),
    }


def gap_report_json(report):
    return json.dumps(report, indent=1, sort_keys=True)
