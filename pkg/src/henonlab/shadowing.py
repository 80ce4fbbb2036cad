"""Closing homoclinic excursions into periodic orbits and their multipliers.

A homoclinic point ``tau`` of a saddle ``p`` gives the orbit segment
``f^-N(tau), ..., tau, ..., f^(k+N-1)(tau)`` whose endpoints both sit close
to ``p``.  Closing the gap at the saddle chart and running Newton on the
cyclic system yields a genuine periodic orbit ``q_n`` of period ``2N + k``
whose unstable multiplier grows like ``c' * lambda_u(p)^n``.
"""

from __future__ import annotations

import cmath
import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import core, manifolds, periodic

EXTENDED_BITS = 120


class ClosingFailure(RuntimeError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


@dataclass
class ShadowConfig:
    tol: float = 1e-10
    max_iter: int = 60
    seed_gap_max: float = 0.5
    order: int = 25
    distance_floor: float = 1e-11


@dataclass
class PseudoOrbit:
    """Genuine orbit segment of a homoclinic point; only the wrap-around is broken."""

    points: np.ndarray
    back: int  # backward steps, in units of the saddle period
    forward: int  # forward steps past the landing, same units
    homoclinic: manifolds.HomoclinicPoint
    closing_gap: float
    head_param: complex  # unstable parameter of the first point
    tail_param: complex  # stable parameter of the image of the last point

    @property
    def period(self):
        return len(self.points)

    @property
    def tau_index(self):
        return self.back * self.homoclinic.saddle.period

    def pair_residuals(self, fmap):
        img = core._forward(fmap, self.points[:-1])
        return np.max(np.abs(img - self.points[1:]), axis=-1)


def _charts(fmap, h, order=25):
    return manifolds._Charts(fmap, h.saddle, order)


def _unstable_point(ch, zeta, steps_back):
    """``f^-steps_back`` of ``psi_u(zeta)`` via the series and forward maps only."""
    m = ch.saddle.period
    q, r = divmod(steps_back, m)
    if r == 0:
        return np.asarray(manifolds.extend(ch.unstable, zeta * ch.unstable.multiplier ** (-q)), dtype=complex)
    x = np.asarray(manifolds.extend(ch.unstable, zeta * ch.unstable.multiplier ** (-(q + 1))), dtype=complex)
    for _ in range(m - r):
        x = core._forward(ch.fmap, x)
    return x


def _stable_point(ch, eta, steps):
    """``f^steps`` of ``psi_s(eta)``, again without amplifying errors."""
    m = ch.saddle.period
    q, r = divmod(steps, m)
    x = np.asarray(manifolds.extend(ch.stable, eta * ch.stable.multiplier ** q), dtype=complex)
    for _ in range(r):
        x = core._forward(ch.fmap, x)
    return x


def build_pseudo_orbit(fmap, h, N, back=None, charts=None):
    """Orbit segment with ``back`` (default ``N``) and ``N`` return-map steps on either side.

    Backward points are read off the unstable series at ``lambda_u^-j zeta`` and
    forward points off the stable series at ``lambda_s^j eta``, so the segment
    is accurate to rounding even though direct iteration would not be.
    """
    back = N if back is None else back
    if back < 1 or N < 1:
        raise ValueError("N must be at least 1")
    ch = charts or _charts(fmap, h)
    m = h.saddle.period
    lam_u, lam_s = ch.unstable.multiplier, ch.stable.multiplier
    head_param = h.zeta * lam_u ** (-back)
    tail_param = h.eta * lam_s ** N
    ru, rs = ch.unstable.validity_radius, ch.stable.validity_radius
    if abs(head_param) > ru or abs(tail_param) > rs:
        need = max(math.ceil(math.log(abs(h.zeta) / ru) / math.log(abs(lam_u))),
                   math.ceil(math.log(abs(h.eta) / rs) / -math.log(abs(lam_s))), 1)
        raise ValueError(f"N too small: endpoints leave the saddle chart (minimal N = {need})")
    pts = [_unstable_point(ch, h.zeta, j) for j in range(back * m, 0, -1)]
    x = np.asarray(manifolds.extend(ch.unstable, h.zeta), dtype=complex)
    for _ in range(h.landing):
        pts.append(x)
        x = core._forward(fmap, x)
    pts.extend(_stable_point(ch, h.eta, j) for j in range(0, N * m))
    pts = np.array(pts, dtype=complex)
    tail = _stable_point(ch, h.eta, N * m)
    gap = float(np.linalg.norm(pts[0] - tail))
    return PseudoOrbit(pts, back, N, h, gap, head_param, tail_param)


def _bracket_seed(ch, pseudo):
    """Replace the first point by the one with unstable coordinate from the head
    and stable coordinate from the tail."""
    base = ch.unstable.coeffs[0]
    u = np.asarray(ch.unstable.series(pseudo.head_param)) - base
    s = np.asarray(ch.stable.series(pseudo.tail_param)) - base
    seed = pseudo.points.copy()
    seed[0] = base + u + s
    return seed


def close_orbit(fmap, pseudo, cfg=None, charts=None):
    """Shadow a pseudo-orbit by a genuine periodic orbit of the same length."""
    cfg = cfg or ShadowConfig()
    if pseudo.closing_gap > cfg.seed_gap_max:
        raise ClosingFailure(f"closing gap {pseudo.closing_gap:.3g} above seed_gap_max")
    ch = charts or _charts(fmap, pseudo.homoclinic, cfg.order)
    seed = _bracket_seed(ch, pseudo)
    tab = periodic._Table.from_map(fmap)
    X, res, ok = periodic.cyclic_newton(tab, seed[None], cfg.tol, cfg.max_iter)
    X, res = X[0], float(res[0])
    if not ok[0]:
        raise ClosingFailure(f"Newton did not converge (residual {res:.3g})", res)
    n = len(X)
    if periodic._exact_period(X, 1e-7) != n:
        raise ClosingFailure("Newton collapsed onto a lower period", res)
    lam_u_log, lam_s_log = log_multipliers(fmap, X)
    if (lam_u_log.real / math.log(2)) > EXTENDED_BITS:
        res = float(core.ext_forward_residual(fmap, X))
        precision = "extended"
    else:
        precision = "double"
    if res >= cfg.tol:
        raise ClosingFailure(f"residual {res:.3g} above tolerance", res)
    shift = float(np.max(np.abs(X - pseudo.points)))
    tau = pseudo.points[pseudo.tau_index]
    mid = float(np.linalg.norm(X[pseudo.tau_index] - tau))
    return ShadowOrbit(X, res, lam_u_log, lam_s_log, shift, mid, precision, pseudo)


@dataclass
class ShadowOrbit:
    """A closed orbit with multipliers kept in log space (they overflow doubles)."""

    points: np.ndarray
    residual: float
    lambda_u_log: complex
    lambda_s_log: complex
    shift: float
    mid_distance: float
    precision: str
    pseudo: PseudoOrbit = field(repr=False)

    @property
    def period(self):
        return len(self.points)

    @property
    def shadow_constant(self):
        """``max |q - pseudo| / closing_gap``."""
        return self.shift / self.pseudo.closing_gap if self.pseudo.closing_gap else math.inf

    def as_periodic(self, fmap):
        return periodic.classify(fmap, self.points, residual=self.residual)


def log_multipliers(fmap, points, max_sweeps=64):
    """``(log lambda_u, log lambda_s)`` of a cycle by renormalized tangent transport.

    A tangent vector is pushed around the cycle (power iteration onto the
    unstable line) while accumulating the log of each step's stretch, until
    one full sweep reproduces the previous one; the phase comes from the
    returned vector against the starting one.  ``log lambda_s`` follows from
    the exact Jacobian.
    """
    pts = np.asarray(points, dtype=complex)
    n = len(pts)
    D = core.derivative(fmap, pts)
    v = np.array([1.0, 0.3 + 0.1j])
    v = v / np.linalg.norm(v)
    prev = None
    for _ in range(max_sweeps):
        start = v
        total = 0.0
        for Dk in D:
            v = Dk @ v
            s = np.linalg.norm(v)
            total += math.log(s)
            v = v / s
        log_u = complex(total, cmath.phase(np.vdot(start, v)))
        if prev is not None and abs(log_u - prev) <= 1e-15 * max(1.0, abs(log_u)):
            break
        prev = log_u
    log_jac = cmath.log(fmap.jacobian) * n
    return log_u, log_jac - log_u


# --------------------------------------------------------------------------- #
# Asymptotics


@dataclass
class AsymptoticsRow:
    n: int
    N: int
    back: int
    lambda_u_log: complex
    lambda_s_log: complex
    normalized: complex
    normalized_stable: complex
    succ_ratio: complex | None
    mid_distance: float
    closing_gap: float
    residual: float
    precision: str


@dataclass
class AsymptoticsTable:
    saddle: periodic.PeriodicOrbit
    homoclinic: manifolds.HomoclinicPoint
    rows: list
    failures: list
    partial: bool = False

    HEADER = ("n", "lambda_u_log_re", "lambda_u_arg", "normalized_ratio_re",
              "normalized_ratio_im", "succ_ratio_abs", "mid_shadow_dist")

    @property
    def c_prime(self):
        return self.rows[-1].normalized

    @property
    def c(self):
        return self.rows[-1].normalized_stable

    @staticmethod
    def _spread(vals):
        vals = np.asarray(vals[-3:])
        ref = abs(vals[-1])
        return float(np.max(np.abs(vals[:, None] - vals[None, :])) / ref)

    @property
    def spread(self):
        return self._spread([r.normalized for r in self.rows])

    @property
    def stable_spread(self):
        return self._spread([r.normalized_stable for r in self.rows])

    def succ_ratio_errors(self):
        lam = abs(self.saddle.lambda_u) ** (1.0 / self.saddle.period)
        return [abs(abs(r.succ_ratio) - lam) / lam for r in self.rows if r.succ_ratio is not None]

    def distance_rate(self, floor=1e-11):
        """Fitted per-``N`` decay factor of the mid-segment shadowing distance."""
        pts = [(r.back + r.N, r.mid_distance) for r in self.rows
               if r.mid_distance > floor and r.back == r.N]
        if len(pts) < 2:
            pts = [(r.back + r.N, r.mid_distance) for r in self.rows if r.mid_distance > floor]
        if len(pts) < 2:
            return None
        x = np.array([p[0] for p in pts], dtype=float) / 2
        y = np.log([p[1] for p in pts])
        return float(math.exp(np.polyfit(x, y, 1)[0]))

    def theta(self):
        m = self.saddle.period
        return max(abs(self.saddle.lambda_s), 1 / abs(self.saddle.lambda_u)) ** (1.0 / m)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.HEADER)
        for r in self.rows:
            succ = abs(r.succ_ratio) if r.succ_ratio is not None else float("nan")
            w.writerow([r.n, repr(r.lambda_u_log.real), repr(r.lambda_u_log.imag),
                        repr(r.normalized.real), repr(r.normalized.imag), repr(float(succ)),
                        repr(r.mid_distance)])
        return buf.getvalue()

    def summary(self):
        rate = self.distance_rate()
        out = {
            "rows": len(self.rows),
            "partial": self.partial,
            "c_prime": [self.c_prime.real, self.c_prime.imag] if self.rows else None,
            "c": [self.c.real, self.c.imag] if self.rows else None,
            "spread": self.spread if len(self.rows) >= 3 else None,
            "stable_spread": self.stable_spread if len(self.rows) >= 3 else None,
            "succ_ratio_error": self.succ_ratio_errors()[-1] if self.succ_ratio_errors() else None,
            "distance_rate": rate,
            "theta": self.theta(),
            "failures": [[n, msg] for n, msg in self.failures],
        }
        try:
            nu, err = estimate_nu0(self)
            out["nu0"] = [nu.real, nu.imag]
            out["nu0_uncertainty"] = err
        except ValueError as exc:
            out["nu0"] = None
            out["nu0_error"] = str(exc)
        return out

    def to_json(self):
        return json.dumps(self.summary(), indent=1, sort_keys=True)


def multiplier_asymptotics(fmap, saddle, h, N_range=range(4, 17), cfg=None, shifted=True):
    """Close pseudo-orbits for each ``N`` and tabulate the multiplier growth.

    With ``shifted`` the variant with one fewer backward step is closed as well,
    so consecutive periods ``n`` appear and successive ratios are meaningful.
    """
    cfg = cfg or ShadowConfig()
    ch = _charts(fmap, h, cfg.order)
    m = saddle.period
    log_lam = cmath.log(saddle.lambda_u) / m
    log_lam_s = cmath.log(saddle.lambda_s) / m
    rows, failures = [], []
    for N in N_range:
        for back in ((N - 1, N) if shifted and N > 1 else (N,)):
            try:
                pseudo = build_pseudo_orbit(fmap, h, N, back, charts=ch)
                orb = close_orbit(fmap, pseudo, cfg, charts=ch)
            except (ClosingFailure, ValueError, core.EscapeError) as exc:
                failures.append(((back + N) * m + h.landing, str(exc)))
                if isinstance(exc, ClosingFailure) and rows:
                    break
                continue
            n = orb.period
            rows.append(AsymptoticsRow(
                n, N, back, orb.lambda_u_log, orb.lambda_s_log,
                cmath.exp(orb.lambda_u_log - n * log_lam),
                cmath.exp(orb.lambda_s_log - n * log_lam_s),
                None, orb.mid_distance, pseudo.closing_gap, orb.residual, orb.precision))
    rows.sort(key=lambda r: r.n)
    for a, b in zip(rows, rows[1:]):
        if b.n == a.n + 1:
            a.succ_ratio = cmath.exp(b.lambda_u_log - a.lambda_u_log)
    table = AsymptoticsTable(saddle, h, rows, failures, partial=len(rows) < 4)
    return table


def _aitken(seq):
    s = np.asarray(seq, dtype=complex)
    if len(s) < 3:
        return s[-1]
    d1 = s[-1] - s[-2]
    d2 = s[-1] - 2 * s[-2] + s[-3]
    if abs(d2) < 1e-14 * abs(s[-1]):
        return s[-1]
    return s[-1] - d1 * d1 / d2


def estimate_nu0(table, parity=None):
    """Limit of ``lambda_u(q_n) / lambda_u(p)^(2N)`` within one parity class.

    ``parity`` selects rows with ``back == N`` (0) or ``back == N - 1`` (1);
    by default the unshifted class is used.  Returns ``(nu0, uncertainty)``
    where the uncertainty is the change of the accelerated limit over the
    last step.
    """
    parity = 0 if parity is None else parity
    rows = [r for r in table.rows if r.N - r.back == parity]
    if len(rows) < 4:
        raise ValueError("need at least 4 rows of one parity class")
    m = table.saddle.period
    log_lam = cmath.log(table.saddle.lambda_u) / m
    seq = [cmath.exp(r.lambda_u_log - 2 * r.N * m * log_lam) for r in rows]
    est = _aitken(seq)
    prev = _aitken(seq[:-1])
    return complex(est), float(abs(est - prev))


def nu0_sequence(table, parity=0):
    """The raw sequence whose limit :func:`estimate_nu0` extrapolates."""
    m = table.saddle.period
    log_lam = cmath.log(table.saddle.lambda_u) / m
    return [cmath.exp(r.lambda_u_log - 2 * r.N * m * log_lam)
            for r in table.rows if r.N - r.back == parity]


def precision_budget(saddle, n):
    """True when ``lambda_u`` of a period-``n`` shadow orbit exceeds the double budget."""
    return n * math.log(abs(saddle.lambda_u)) / saddle.period > EXTENDED_BITS * math.log(2)
