"""Compositions of complex Hénon maps.

A factor acts on C^2 as ``(z, w) -> (a*w + p(z), z)`` with ``p`` monic of
degree ``d >= 2`` and no ``z^(d-1)`` term.  A :class:`ComposedAutomorphism`
applies its factors in list order.  Points are stored as complex arrays whose
last axis has length 2 (``[..., 0]`` is ``z``, ``[..., 1]`` is ``w``).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence

import mpmath
import numpy as np

DEFAULT_CEILING = 1e150
EXTENDED_DPS = 32


class C2Point(NamedTuple):
    z: complex
    w: complex


class EscapeError(ArithmeticError):
    """Raised when an intermediate modulus exceeds the overflow ceiling."""

    def __init__(self, message, step=None, last=None):
        super().__init__(message)
        self.step = step
        self.last = last


@dataclass(frozen=True)
class EscapeReport:
    """Outcome of :func:`iterate` when the orbit leaves the representable range."""

    escape_time: int
    last_point: C2Point


@dataclass(frozen=True)
class HenonFactor:
    a: complex
    coeffs: tuple = (0j,)
    degree: int = 2

    def __post_init__(self):
        if self.degree < 2:
            raise ValueError("factor degree must be at least 2")
        a = complex(self.a)
        if a == 0:
            raise ValueError("factor linear coefficient must be nonzero")
        coeffs = tuple(complex(c) for c in self.coeffs)
        if len(coeffs) > self.degree - 1:
            raise ValueError(
                f"degree {self.degree} factor takes at most {self.degree - 1} coefficients"
            )
        coeffs = coeffs + (0j,) * (self.degree - 1 - len(coeffs))
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def poly_coeffs(self):
        """Coefficients of p, highest degree first (numpy.polyval order)."""
        return np.array([1.0 + 0j, 0j] + list(self.coeffs[::-1]), dtype=complex)

    @property
    def coeff_bound(self):
        return sum(abs(c) for c in self.coeffs)

    def p(self, z):
        return np.polyval(self.poly_coeffs, z)

    def dp(self, z):
        return np.polyval(np.polyder(self.poly_coeffs), z)


@dataclass(frozen=True)
class ComposedAutomorphism:
    factors: tuple
    degree: int = field(init=False)
    jacobian: complex = field(init=False)

    def __post_init__(self):
        factors = tuple(self.factors)
        if not factors:
            raise ValueError("a composed automorphism needs at least one factor")
        object.__setattr__(self, "factors", factors)
        object.__setattr__(self, "degree", math.prod(f.degree for f in factors))
        object.__setattr__(self, "jacobian", complex(np.prod([-f.a for f in factors])))

    @classmethod
    def single(cls, a, c0=0.0, degree=2):
        """Map ``(z, w) -> (a*w + z^degree + c0, z)``."""
        coeffs = (complex(c0),) + (0j,) * (degree - 2)
        return cls((HenonFactor(complex(a), coeffs, degree),))

    @property
    def volume_class(self):
        j = abs(self.jacobian)
        if math.isclose(j, 1.0, rel_tol=1e-14):
            return "conservative"
        return "dissipative" if j < 1 else "volume_expanding"

    @property
    def is_real(self):
        return all(
            f.a.imag == 0 and all(c.imag == 0 for c in f.coeffs) for f in self.factors
        )

    def inverse_factors(self):
        """Factor order used when iterating backward."""
        return self.factors[::-1]


# --------------------------------------------------------------------------- #
# Evaluation (double precision, vectorized over leading axes)


def _as_points(x):
    arr = np.asarray(x, dtype=complex)
    if arr.shape[-1] != 2:
        raise ValueError("points must have a trailing axis of length 2")
    return arr


def _check(arr, ceiling, step=None):
    if not np.all(np.isfinite(arr)) or np.max(np.abs(arr), initial=0.0) > ceiling:
        raise EscapeError("orbit exceeded the overflow ceiling", step=step)


def _forward(fmap, pts):
    z, w = pts[..., 0], pts[..., 1]
    for f in fmap.factors:
        z, w = f.a * w + f.p(z), z
    return np.stack([z, w], axis=-1)


def _backward(fmap, pts):
    z, w = pts[..., 0], pts[..., 1]
    for f in fmap.inverse_factors():
        z, w = w, (z - f.p(w)) / f.a
    return np.stack([z, w], axis=-1)


def _wrap(x, out):
    if isinstance(x, C2Point) or np.ndim(x) == 1:
        return C2Point(complex(out[0]), complex(out[1]))
    return out


def evaluate(fmap, x, ceiling=DEFAULT_CEILING, precision="double"):
    if precision == "extended":
        return _wrap(x, _ext_forward(fmap, _as_points(x)))
    pts = _as_points(x)
    with np.errstate(over="ignore", invalid="ignore"):
        z, w = pts[..., 0], pts[..., 1]
        for f in fmap.factors:
            z, w = f.a * w + f.p(z), z
            _check(z, ceiling)
    return _wrap(x, np.stack([z, w], axis=-1))


def evaluate_inverse(fmap, x, ceiling=DEFAULT_CEILING, precision="double"):
    if precision == "extended":
        return _wrap(x, _ext_backward(fmap, _as_points(x)))
    pts = _as_points(x)
    with np.errstate(over="ignore", invalid="ignore"):
        z, w = pts[..., 0], pts[..., 1]
        for f in fmap.inverse_factors():
            z, w = w, (z - f.p(w)) / f.a
            _check(w, ceiling)
    return _wrap(x, np.stack([z, w], axis=-1))


def derivative(fmap, x, ceiling=DEFAULT_CEILING):
    """Jacobian matrix ``Df_x``; shape ``(..., 2, 2)``."""
    pts = _as_points(x)
    z, w = pts[..., 0], pts[..., 1]
    shape = z.shape
    jac = np.broadcast_to(np.eye(2, dtype=complex), shape + (2, 2)).copy()
    with np.errstate(over="ignore", invalid="ignore"):
        for f in fmap.factors:
            step = np.empty(shape + (2, 2), dtype=complex)
            step[..., 0, 0] = f.dp(z)
            step[..., 0, 1] = f.a
            step[..., 1, 0] = 1.0
            step[..., 1, 1] = 0.0
            jac = step @ jac
            z, w = f.a * w + f.p(z), z
            _check(z, ceiling)
    return jac


def iterate(fmap, x, n, ceiling=DEFAULT_CEILING):
    """Apply ``f`` (n > 0) or ``f^-1`` (n < 0) ``|n|`` times to one point.

    Leaving the representable range is a normal outcome and is returned as an
    :class:`EscapeReport` rather than raised.
    """
    pt = _as_points(x).reshape(2)
    step = _forward if n >= 0 else _backward
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(abs(int(n))):
            nxt = step(fmap, pt)
            if not np.all(np.isfinite(nxt)) or np.max(np.abs(nxt)) > ceiling:
                return EscapeReport(k + 1, C2Point(complex(pt[0]), complex(pt[1])))
            pt = nxt
    return C2Point(complex(pt[0]), complex(pt[1]))


def orbit(fmap, x, n):
    """The ``n + 1`` points ``x, f(x), ..., f^n(x)`` as an array; raises on escape."""
    out = np.empty((n + 1, 2), dtype=complex)
    out[0] = _as_points(x).reshape(2)
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(n):
            out[k + 1] = _forward(fmap, out[k])
            _check(out[k + 1], DEFAULT_CEILING, step=k + 1)
    return out


# --------------------------------------------------------------------------- #
# Filtration


def _largest_positive_root(coeffs_high_first):
    roots = np.roots(coeffs_high_first)
    real = [r.real for r in roots if abs(r.imag) <= 1e-9 * max(1.0, abs(r)) and r.real > 0]
    return max(real, default=0.0)


def factor_radius(f, alpha=None, beta=1.0):
    """Escape radius for the scalar recursion ``new = alpha*prev + beta*p(cur)``.

    Returns the smallest R such that ``|cur| >= max(|prev|, R)`` implies
    ``|new| >= 2|cur|`` and ``|new - beta*cur^d| <= |beta*cur^d| / 2``.
    """
    alpha = f.a if alpha is None else alpha
    d = f.degree
    b, al = abs(beta), abs(alpha)
    # |beta| t^d - |beta| sum |c_j| t^j - |alpha| t - 2t >= 0
    first = np.zeros(d + 1)
    first[0] = b
    second = np.zeros(d + 1)
    second[0] = b / 2
    for j, c in enumerate(f.coeffs):
        first[d - j] -= b * abs(c)
        second[d - j] -= b * abs(c)
    first[d - 1] -= al + 2.0
    second[d - 1] -= al
    return max(_largest_positive_root(first), _largest_positive_root(second), 1.0)


def filtration_radius(fmap):
    """Radius R of the forward escape region ``V+ = {|z| >= max(|w|, R)}``."""
    return max(factor_radius(f) for f in fmap.factors)


def backward_filtration_radius(fmap):
    """Radius of ``V- = {|w| >= max(|z|, R)}`` for iteration of ``f^-1``."""
    return max(factor_radius(f, alpha=1 / f.a, beta=-1 / f.a) for f in fmap.factors)


def in_forward_region(x, radius):
    pts = _as_points(x)
    az, aw = np.abs(pts[..., 0]), np.abs(pts[..., 1])
    return (az >= aw) & (az >= radius)


# --------------------------------------------------------------------------- #
# Extended precision (mpmath, ~32 significant digits)


def _ext_forward(fmap, pts):
    with mpmath.workdps(EXTENDED_DPS):
        flat = pts.reshape(-1, 2)
        out = []
        for z, w in flat:
            z, w = mpmath.mpc(z), mpmath.mpc(w)
            for f in fmap.factors:
                z, w = f.a * w + _ext_poly(f, z), z
            out.append((complex(z), complex(w)))
    return np.array(out, dtype=complex).reshape(pts.shape)


def _ext_backward(fmap, pts):
    with mpmath.workdps(EXTENDED_DPS):
        flat = pts.reshape(-1, 2)
        out = []
        for z, w in flat:
            z, w = mpmath.mpc(z), mpmath.mpc(w)
            for f in fmap.inverse_factors():
                z, w = w, (z - _ext_poly(f, w)) / f.a
            out.append((complex(z), complex(w)))
    return np.array(out, dtype=complex).reshape(pts.shape)


def _ext_poly(f, z):
    acc = mpmath.mpc(1)
    for c in [0j] + list(f.coeffs[::-1]):
        acc = acc * z + c
    return acc


def ext_forward_residual(fmap, points):
    """Max ``|f(x_i) - x_{i+1}|`` around a cycle, evaluated in extended precision."""
    pts = np.asarray(points, dtype=complex)
    n = len(pts)
    worst = mpmath.mpf(0)
    with mpmath.workdps(EXTENDED_DPS):
        for i in range(n):
            z, w = mpmath.mpc(pts[i, 0]), mpmath.mpc(pts[i, 1])
            for f in fmap.factors:
                z, w = f.a * w + _ext_poly(f, z), z
            nz, nw = pts[(i + 1) % n]
            err = max(abs(z - mpmath.mpc(nz)), abs(w - mpmath.mpc(nw)))
            worst = max(worst, err)
    return float(worst)


def ext_monodromy(fmap, points):
    """Monodromy product along a cycle in extended precision, as mpmath matrix."""
    with mpmath.workdps(EXTENDED_DPS):
        m = mpmath.eye(2)
        for z, w in np.asarray(points, dtype=complex):
            z, w = mpmath.mpc(z), mpmath.mpc(w)
            for f in fmap.factors:
                dp = mpmath.mpc(0)
                for k, c in enumerate(f.coeffs):
                    if k:
                        dp += k * c * z ** (k - 1)
                dp += f.degree * z ** (f.degree - 1)
                step = mpmath.matrix([[dp, f.a], [1, 0]])
                m = step * m
                z, w = f.a * w + _ext_poly(f, z), z
        return m


# --------------------------------------------------------------------------- #
# Map description files


def map_to_dict(fmap):
    return {
        "factors": [
            {
                "a": [f.a.real, f.a.imag],
                "coeffs": [[c.real, c.imag] for c in f.coeffs],
            }
            for f in fmap.factors
        ]
    }


def _complex(value, where):
    if (
        not isinstance(value, (list, tuple))
        or len(value) != 2
        or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)
    ):
        raise ValueError(f"{where}: expected [re, im] pair of numbers")
    return complex(float(value[0]), float(value[1]))


def map_errors(data):
    """All schema violations in a map description (empty list when valid)."""
    errors = []
    if not isinstance(data, dict):
        return ["map: expected a table with key 'factors'"]
    for key in data:
        if key != "factors":
            errors.append(f"map.{key}: unknown field")
    factors = data.get("factors")
    if not isinstance(factors, list) or not factors:
        errors.append("map.factors: expected a nonempty list")
        return errors
    for i, fac in enumerate(factors):
        where = f"map.factors[{i}]"
        if not isinstance(fac, dict):
            errors.append(f"{where}: expected a table")
            continue
        for key in fac:
            if key not in ("a", "coeffs"):
                errors.append(f"{where}.{key}: unknown field")
        try:
            a = _complex(fac.get("a"), f"{where}.a")
            if a == 0:
                errors.append(f"{where}.a: factor linear coefficient must be nonzero")
        except ValueError as exc:
            errors.append(str(exc))
        coeffs = fac.get("coeffs")
        if not isinstance(coeffs, list) or not coeffs:
            errors.append(f"{where}.coeffs: expected a nonempty list of [re, im] pairs")
            continue
        for j, c in enumerate(coeffs):
            try:
                _complex(c, f"{where}.coeffs[{j}]")
            except ValueError as exc:
                errors.append(str(exc))
    return errors


def map_from_dict(data):
    errors = map_errors(data)
    if errors:
        raise ValueError("; ".join(errors))
    factors = []
    for fac in data["factors"]:
        coeffs = tuple(complex(float(c[0]), float(c[1])) for c in fac["coeffs"])
        factors.append(
            HenonFactor(complex(float(fac["a"][0]), float(fac["a"][1])), coeffs, len(coeffs) + 1)
        )
    return ComposedAutomorphism(tuple(factors))


def load_map(path):
    path = Path(path)
    return map_from_dict(read_table(path))


def dump_map(fmap, path):
    write_table(map_to_dict(fmap), path)


def read_table(path):
    path = Path(path)
    if path.suffix.lower() == ".toml":
        import tomli

        with open(path, "rb") as fh:
            return tomli.load(fh)
    with open(path) as fh:
        return json.load(fh)


def write_table(data, path):
    path = Path(path)
    if path.suffix.lower() == ".toml":
        import tomli_w

        with open(path, "wb") as fh:
            tomli_w.dump(data, fh)
    else:
        with open(path, "w") as fh:
            json.dump(data, fh, indent=2)
            fh.write("\n")


def random_bidisk(rng, size, radius=1.0):
    """Uniform samples from the complex bidisk of the given radius."""
    r = radius * np.sqrt(rng.random((size, 2)))
    t = 2 * np.pi * rng.random((size, 2))
    return r * np.exp(1j * t)


__all__: Sequence[str] = [
    "C2Point",
    "ComposedAutomorphism",
    "EscapeError",
    "EscapeReport",
    "HenonFactor",
    "backward_filtration_radius",
    "derivative",
    "dump_map",
    "evaluate",
    "evaluate_inverse",
    "filtration_radius",
    "iterate",
    "load_map",
    "map_from_dict",
    "map_to_dict",
]
