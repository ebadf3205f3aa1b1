"""The symbol h(x) = sum_j sin^2(x_j/2) and its level sets on the torus.

Real torus points are reduced into (-pi, pi] so that the half-period
corners keep the representative pi.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

__all__ = [
    "TorusPoint",
    "FermiSample",
    "reduce_angle",
    "h_eval",
    "h_cos_form",
    "grad_h",
    "singular_points",
    "sample_fermi",
    "Polynomial",
    "H_lambda",
    "H_identity_residual",
]

MAX_SYMBOLIC_DIMENSION = 4


def reduce_angle(x):
    """Reduce angles into (-pi, pi]."""
    x = np.asarray(x, dtype=float)
    return np.pi - np.mod(np.pi - x, 2 * np.pi)


@dataclass(frozen=True)
class TorusPoint:
    """Point of T^d, optionally complexified by ``imag``."""

    coords: tuple[float, ...]
    imag: tuple[float, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "coords", tuple(float(c) for c in reduce_angle(self.coords)))
        if self.imag is not None:
            if len(self.imag) != len(self.coords):
                raise ValueError("imag part has the wrong length")
            object.__setattr__(self, "imag", tuple(float(c) for c in self.imag))

    @property
    def dimension(self) -> int:
        return len(self.coords)

    def as_array(self) -> np.ndarray:
        re = np.array(self.coords)
        return re if self.imag is None else re + 1j * np.array(self.imag)


def _as_points(x) -> np.ndarray:
    if isinstance(x, TorusPoint):
        return x.as_array()
    return np.asarray(x)


def h_eval(x):
    """h(x) = sum_j sin^2(x_j / 2) over the last axis; complex input allowed."""
    x = _as_points(x)
    return np.sum(np.sin(x / 2) ** 2, axis=-1)


def h_cos_form(x):
    """The equivalent form (d - sum_j cos x_j) / 2."""
    x = _as_points(x)
    return 0.5 * (x.shape[-1] - np.sum(np.cos(x), axis=-1))


def grad_h(x):
    """Gradient (1/2) sin x_j."""
    return 0.5 * np.sin(_as_points(x))


def _check_lambda(lam, d):
    if not 0 < lam < d:
        raise ValueError(f"lambda must lie in (0, {d})")


def singular_points(lam: float, d: int) -> list[TorusPoint]:
    """Corners of {0, pi}^d with h = lam, in lexicographic order (0 before pi).

    A corner with k coordinates equal to pi has h = k, so the set is
    empty unless lam is an integer.
    """
    _check_lambda(lam, d)
    out = []
    for corner in itertools.product((0, 1), repeat=d):
        if sum(corner) == lam:
            out.append(TorusPoint(tuple(math.pi * c for c in corner)))
    return out


@dataclass(frozen=True)
class FermiSample:
    """Sampled Fermi surface M_lam = {h = lam}."""

    lam: float
    dimension: int
    points: np.ndarray = field(repr=False)
    singular_points: tuple[TorusPoint, ...] = ()

    def __len__(self) -> int:
        return len(self.points)

    def all_points(self) -> np.ndarray:
        """Regular samples followed by the singular corners."""
        sing = np.array([p.coords for p in self.singular_points]).reshape(-1, self.dimension)
        return np.vstack([self.points, sing])

    def residuals(self) -> np.ndarray:
        return np.abs(h_eval(self.all_points()) - self.lam)

    def csv_rows(self):
        """Rows ``x_1..x_d, h_residual, is_singular``."""
        header = [f"x_{j + 1}" for j in range(self.dimension)] + ["h_residual", "is_singular"]
        rows = [header]
        nreg = len(self.points)
        for k, (pt, res) in enumerate(zip(self.all_points(), self.residuals())):
            rows.append([*(repr(float(c)) for c in pt), repr(float(res)), int(k >= nreg)])
        return rows


def _bisect_half_period(target: np.ndarray, complement: np.ndarray, iterations: int = 64) -> np.ndarray:
    """Solve sin^2(x/2) = target on [0, pi] by bisection (monotone there).

    ``complement`` is 1 - target computed without cancellation; where the
    target exceeds 1/2 the equivalent cos^2(x/2) = complement is bisected
    instead, which keeps roots near x = pi accurate.
    """
    use_cos = target > 0.5
    lo = np.zeros_like(target)
    hi = np.full_like(target, np.pi)
    for _ in range(iterations):
        mid = 0.5 * (lo + hi)
        below = np.where(use_cos, np.cos(mid / 2) ** 2 > complement, np.sin(mid / 2) ** 2 < target)
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)


def sample_fermi(lam: float, d: int = 2, resolution: int = 64, *, min_points: int | None = None) -> FermiSample:
    """Sample M_lam by root finding along grid lines.

    For each axis j and each node of the uniform ``resolution``-grid in
    the other coordinates, the equation h = lam is solved for x_j on
    [0, pi] and reflected to -x_j. Yields up to
    ``2 * d * resolution**(d-1)`` points.

    With ``min_points`` the resolution is raised until at least that
    many regular points exist, and the cloud is thinned to exactly
    ``min_points`` evenly spaced samples.
    """
    _check_lambda(lam, d)
    if resolution < 16:
        raise ValueError("resolution must be at least 16")
    if min_points is not None:
        res = resolution
        while True:
            sample = sample_fermi(lam, d, res)
            if len(sample) >= min_points:
                break
            res = int(math.ceil(res * max(1.25, (min_points / max(len(sample), 1)) ** (1 / max(d - 1, 1)))))
        keep = np.linspace(0, len(sample) - 1, min_points).round().astype(int)
        return FermiSample(sample.lam, d, sample.points[keep], sample.singular_points)
    nodes = -np.pi + 2 * np.pi * np.arange(resolution) / resolution
    chunks = []
    for j in range(d):
        if d > 1:
            grids = np.meshgrid(*([nodes] * (d - 1)), indexing="ij")
            rest = np.stack([g.ravel() for g in grids], axis=1)
        else:
            rest = np.zeros((1, 0))
        transverse = np.sum(np.sin(rest / 2) ** 2, axis=1)
        target = lam - transverse
        complement = (1 - lam) + transverse
        ok = (target >= 0) & (complement >= 0)
        rest, target, complement = rest[ok], target[ok], complement[ok]
        root = _bisect_half_period(target, complement)
        for s in (1.0, -1.0):
            pts = np.insert(rest, j, s * root, axis=1)
            if s < 0:
                # x_j = 0 and x_j = pi are their own reflections
                keep = (root > 0) & (root < np.pi)
                pts = pts[keep]
            chunks.append(pts)
    pts = reduce_angle(np.vstack(chunks)) if chunks else np.zeros((0, d))
    return FermiSample(float(lam), d, pts, tuple(singular_points(lam, d)) if float(lam).is_integer() else ())


@dataclass(frozen=True)
class Polynomial:
    """Dense coefficient map from exponent multi-index to coefficient."""

    dimension: int
    coefficients: Mapping[tuple[int, ...], complex]

    def __call__(self, w) -> np.ndarray:
        w = np.asarray(w, dtype=complex)
        total = np.zeros(w.shape[:-1], dtype=complex)
        for expo, c in self.coefficients.items():
            total = total + c * np.prod(w ** np.array(expo), axis=-1)
        return total

    def __mul__(self, other: "Polynomial") -> "Polynomial":
        out: dict[tuple[int, ...], complex] = {}
        for e1, c1 in self.coefficients.items():
            for e2, c2 in other.coefficients.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                out[e] = out.get(e, 0) + c1 * c2
        return Polynomial(self.dimension, {e: c for e, c in out.items() if c != 0})

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        out = dict(self.coefficients)
        for e, c in other.coefficients.items():
            out[e] = out.get(e, 0) - c
        return Polynomial(self.dimension, {e: c for e, c in out.items() if c != 0})

    def max_coefficient(self) -> float:
        return max((abs(c) for c in self.coefficients.values()), default=0.0)


def H_lambda(d: int, lam: float) -> Polynomial:
    """Polynomial H with h(z) - lam = H(e^{iz}) * prod_j e^{-i z_j}.

    H(w) = (d/2 - lam) prod w - 1/4 (sum w) prod w - 1/4 sum_j prod_{i != j} w_i.
    """
    if not 1 <= d <= MAX_SYMBOLIC_DIMENSION:
        raise ValueError(f"symbolic operations support 1 <= d <= {MAX_SYMBOLIC_DIMENSION}")
    coeffs: dict[tuple[int, ...], complex] = {}
    ones = (1,) * d

    def add(e, c):
        coeffs[e] = coeffs.get(e, 0) + c

    add(ones, d / 2 - lam)
    for j in range(d):
        add(ones[:j] + (2,) + ones[j + 1:], -0.25)
        add(ones[:j] + (0,) + ones[j + 1:], -0.25)
    return Polynomial(d, {e: c for e, c in coeffs.items() if c != 0})


def H_identity_residual(z, lam: float) -> np.ndarray:
    """|(h(z) - lam) - H_lam(e^{iz}) prod e^{-i z_j}| for complex z of shape (..., d)."""
    z = np.asarray(z, dtype=complex)
    d = z.shape[-1]
    w = np.exp(1j * z)
    lhs = h_eval(z) - lam
    rhs = H_lambda(d, lam)(w) * np.prod(np.exp(-1j * z), axis=-1)
    return np.abs(lhs - rhs)
