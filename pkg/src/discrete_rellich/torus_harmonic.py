"""Fourier bridge between l2(Z^d) and L2(T^d), Besov-type norms, and
limiting-absorption solves.

The transform is (U f)(x) = (2 pi)^{-d/2} sum_n f(n) e^{-i n.x}, sampled
on the grid x_k = -pi + 2 pi (k + s) / N. The optional offset ``s`` (a
Bloch shift per axis) moves the nodes off the Fermi surface and turns the
grid solve into the resolvent of a twisted periodic lattice.
"""

from __future__ import annotations

import functools
import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .fermi_surface import FermiSample
from .lattice_operators import LatticeField

__all__ = [
    "AliasingRisk",
    "TorusGrid",
    "synthesize",
    "coefficient_array",
    "coefficients",
    "evaluate",
    "RadialSequence",
    "power_law",
    "shell_sums",
    "NormReport",
    "norms",
    "decay_curve",
    "DecayVerdict",
    "decay_condition_verdict",
    "geometric_schedule",
    "vanish_on_fermi",
    "AbsorptionResult",
    "limiting_absorption_solve",
    "richardson_weights",
    "decay_exponent",
]


class AliasingRisk(UserWarning):
    """A coefficient index does not fit in the fundamental grid cell."""


def _check_N(N: int) -> int:
    N = int(N)
    if N < 2 or N & (N - 1):
        raise ValueError("grid resolution N must be a power of two")
    return N


@dataclass(frozen=True)
class TorusGrid:
    """Uniform samples of a function on [-pi, pi]^d."""

    dimension: int
    N: int
    values: np.ndarray = field(repr=False)
    shift: tuple[float, ...] | None = None

    def __post_init__(self):
        _check_N(self.N)
        if self.values.shape != (self.N,) * self.dimension:
            raise ValueError("values do not match the grid shape")
        if self.shift is None:
            object.__setattr__(self, "shift", (0.0,) * self.dimension)

    def nodes(self, axis: int = 0) -> np.ndarray:
        return -np.pi + 2 * np.pi * (np.arange(self.N) + self.shift[axis]) / self.N

    def mesh(self) -> list[np.ndarray]:
        return np.meshgrid(*(self.nodes(j) for j in range(self.dimension)), indexing="ij")

    def l2_norm(self) -> float:
        """Trapezoidal L2(T^d) norm, exact for band-limited functions."""
        cell = (2 * np.pi / self.N) ** self.dimension
        return float(np.sqrt(cell * np.sum(np.abs(self.values) ** 2)))


def _shift_tuple(shift, d) -> np.ndarray:
    if shift is None:
        return np.zeros(d)
    s = np.asarray(shift, dtype=float).reshape(-1)
    if s.size == 1:
        s = np.full(d, float(s[0]))
    if s.size != d:
        raise ValueError("shift must have one entry per axis")
    return s


def _phase(coords: np.ndarray, shift: np.ndarray, N: int) -> np.ndarray:
    # e^{-i n.x_0} factor for x_k = -pi + 2 pi (k + s)/N
    parity = np.where(coords.sum(axis=1) % 2 == 0, 1.0, -1.0)
    if not np.any(shift):
        return parity.astype(complex)
    return parity * np.exp(-2j * np.pi * (coords @ shift) / N)


def synthesize(u_hat: LatticeField, N: int, shift=None) -> TorusGrid:
    """Sample U u_hat on the N-grid."""
    N = _check_N(N)
    d = u_hat.dimension
    s = _shift_tuple(shift, d)
    items = [(n, v) for n, v in u_hat.entries.items() if v != 0]
    A = np.zeros((N,) * d, dtype=complex)
    if items:
        coords = np.array([n for n, _ in items], dtype=np.int64)
        vals = np.array([complex(v) for _, v in items])
        if np.any(coords >= N // 2) or np.any(coords < -(N // 2)):
            warnings.warn(f"coefficients beyond |n_j| < N/2 = {N // 2} alias on this grid", AliasingRisk, stacklevel=2)
        idx = tuple((coords % N).T)
        np.add.at(A, idx, vals * _phase(coords, s, N))
    values = np.fft.fftn(A) * (2 * np.pi) ** (-d / 2)
    return TorusGrid(d, N, values, tuple(s))


def coefficient_array(grid: TorusGrid) -> np.ndarray:
    """Centered coefficient array: entry ``[n + N/2]`` holds u_hat(n), n in [-N/2, N/2)^d."""
    N, d = grid.N, grid.dimension
    A = np.fft.ifftn(grid.values) * (2 * np.pi) ** (d / 2)
    A = np.fft.fftshift(A)
    n = np.arange(N) - N // 2
    s = np.asarray(grid.shift)
    for j in range(d):
        factor = np.where(n % 2 == 0, 1.0, -1.0).astype(complex)
        if s[j]:
            factor = factor * np.exp(2j * np.pi * n * s[j] / N)
        shape = [1] * d
        shape[j] = N
        A = A * factor.reshape(shape)
    return A


def coefficients(grid: TorusGrid, window: float | None = None, tol: float = 0.0, norm: str = "max") -> LatticeField:
    """Fourier coefficients as a field.

    ``window`` bounds the kept indices, in the sup norm (``norm="max"``)
    or the Euclidean norm (``norm="l2"``); entries with modulus at most
    ``tol`` are dropped.
    """
    N, d = grid.N, grid.dimension
    A = coefficient_array(grid)
    n = np.arange(N) - N // 2
    mesh = np.meshgrid(*([n] * d), indexing="ij")
    coords = np.stack([m.ravel() for m in mesh], axis=1)
    vals = A.ravel()
    keep = np.abs(vals) > tol
    if window is not None:
        size = np.abs(coords).max(axis=1) if norm == "max" else np.sqrt((coords.astype(float) ** 2).sum(axis=1))
        keep &= size <= window
    return LatticeField(d, {tuple(int(c) for c in coords[k]): complex(vals[k]) for k in np.flatnonzero(keep)})


def evaluate(f_hat: LatticeField, x: np.ndarray, chunk: int = 4096) -> np.ndarray:
    """Direct evaluation of (U f_hat)(x) at points of shape (k, d)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    d = f_hat.dimension
    items = [(n, v) for n, v in f_hat.entries.items() if v != 0]
    out = np.zeros(len(x), dtype=complex)
    if not items:
        return out
    coords = np.array([n for n, _ in items], dtype=float)
    vals = np.array([complex(v) for _, v in items])
    for a in range(0, len(x), chunk):
        out[a:a + chunk] = np.exp(-1j * (x[a:a + chunk] @ coords.T)) @ vals
    return out * (2 * np.pi) ** (-d / 2)


def vanish_on_fermi(f_hat: LatticeField, lam: float, samples: FermiSample) -> float:
    """Max |f(x)| over the sampled Fermi surface (singular corners included)."""
    if samples.lam != lam:
        raise ValueError("samples belong to a different lambda")
    pts = samples.all_points()
    if len(pts) == 0:
        return 0.0
    return float(np.max(np.abs(evaluate(f_hat, pts))))


# ----------------------------------------------------------------------
# norms


@dataclass(frozen=True)
class RadialSequence:
    """Lazily defined sequence u_hat(n) = amplitude(|n|^2) on Z^d."""

    dimension: int
    amplitude: Callable[[np.ndarray], np.ndarray]
    label: str = "radial"


def power_law(exponent: float, dimension: int = 2) -> RadialSequence:
    """u_hat(n) = <n>^exponent with <n> = (1 + |n|^2)^{1/2}."""
    return RadialSequence(dimension, lambda m: (1.0 + m) ** (exponent / 2), f"power{exponent:+g}")


@functools.lru_cache(maxsize=8)
def _shell_counts(dimension: int, M: int) -> np.ndarray:
    """Number of lattice points with |n|^2 = m, for m = 0..M."""
    R = math.isqrt(M)
    n = np.arange(-R, R + 1, dtype=np.int64)
    sq = n * n
    counts = np.zeros(M + 1, dtype=np.int64)
    if dimension == 1:
        np.add.at(counts, sq, 1)
        return counts
    # fold the leading d-1 coordinates into a histogram, then add the last
    partial = np.zeros(M + 1, dtype=np.int64)
    np.add.at(partial, sq, 1)
    for _ in range(dimension - 1):
        new = np.zeros(M + 1, dtype=np.int64)
        nz = np.flatnonzero(partial)
        for start in range(0, len(nz), 256):
            base = nz[start:start + 256]
            m = base[:, None] + sq[None, :]
            w = np.broadcast_to(partial[base][:, None], m.shape)
            ok = m <= M
            new += np.bincount(m[ok], weights=w[ok], minlength=M + 1).astype(np.int64)
        partial = new
    return partial


def shell_sums(u_hat, R_max: float) -> np.ndarray:
    """Array ``s[m] = sum_{|n|^2 = m} |u_hat(n)|^2`` for m up to R_max^2."""
    M = int(math.floor(R_max * R_max))
    if isinstance(u_hat, LatticeField):
        out = np.zeros(M + 1)
        for n, v in u_hat.entries.items():
            m = sum(c * c for c in n)
            if m <= M:
                out[m] += abs(v) ** 2
        return out
    if isinstance(u_hat, RadialSequence):
        counts = _shell_counts(u_hat.dimension, M)
        m = np.arange(M + 1, dtype=float)
        return counts * np.abs(u_hat.amplitude(m)) ** 2
    raise TypeError("expected a LatticeField or RadialSequence")


def _curve_from_shells(s: np.ndarray, radii: np.ndarray) -> np.ndarray:
    C = np.cumsum(s)
    idx = np.ceil(np.asarray(radii, dtype=float) ** 2).astype(np.int64) - 1
    idx = np.clip(idx, -1, len(s) - 1)
    total = np.where(idx >= 0, C[np.maximum(idx, 0)], 0.0)
    return total / np.asarray(radii, dtype=float)


def geometric_schedule(r_min: float, r_max: float, per_octave: int = 4) -> np.ndarray:
    k = np.arange(0, round(per_octave * math.log2(r_max / r_min)) + 1)
    return r_min * 2.0 ** (k / per_octave)


def decay_curve(u_hat, radii: Sequence[float]) -> np.ndarray:
    """(1/R) sum_{|n| < R} |u_hat(n)|^2 at each R."""
    radii = np.asarray(radii, dtype=float)
    s = shell_sums(u_hat, float(radii.max()))
    return _curve_from_shells(s, radii)


@dataclass(frozen=True)
class NormReport:
    hs_norms: Mapping[float, float]
    bstar_sup: float
    bstar_dyadic: float
    b_sum: float
    decay_curve: tuple[tuple[float, float], ...]
    R_max: float

    @property
    def ratio(self) -> float:
        return self.bstar_sup / self.bstar_dyadic if self.bstar_dyadic else float("nan")


def _default_R_max(u_hat) -> float:
    if isinstance(u_hat, LatticeField):
        return max(2.0, math.ceil(u_hat.support_radius) + 1.0)
    return 4096.0


def norms(u_hat, s_list: Iterable[float] = (-0.5, 0.0, 0.5), R_max: float | None = None, per_octave: int = 4) -> NormReport:
    """Sobolev and B*-type norms from shell sums up to ``R_max``.

    The sup form takes sup over R in [1, R_max] of (1/R) sum_{|n|<R}; the
    partial sums only jump at R^2 = m, so the sup is among R = 1 and the
    right limits R -> sqrt(m)+. The dyadic form takes
    sup_j 2^{-j/2} ||chi_j u||, with chi_0 the origin and chi_j the shell
    2^{j-1} <= |n| < 2^j, over shells fully inside R_max.
    """
    R_max = float(_default_R_max(u_hat) if R_max is None else R_max)
    if R_max < 1:
        raise ValueError("R_max must be at least 1")
    s = shell_sums(u_hat, R_max)
    M = len(s) - 1
    m = np.arange(M + 1, dtype=float)
    hs = {float(sv): float(np.sqrt(np.sum((1.0 + m) ** sv * s))) for sv in s_list}

    C = np.cumsum(s)
    cand = [s[0]]
    mm = np.arange(1, M + 1)
    inside = np.sqrt(mm) < R_max
    if np.any(inside):
        cand.append(np.max(C[mm[inside]] / np.sqrt(mm[inside])))
    cand.append(C[min(M, math.ceil(R_max * R_max) - 1)] / R_max)
    sup = float(max(cand))

    shells = [float(s[0])]
    j = 1
    while 2 ** j <= R_max:
        lo, hi = 4 ** (j - 1), min(4 ** j, M + 1)
        shells.append(float(s[lo:hi].sum()))
        j += 1
    dyadic = max(sh / 2 ** k for k, sh in enumerate(shells))
    b_sum = sum(2 ** (k / 2) * math.sqrt(sh) for k, sh in enumerate(shells))

    radii = geometric_schedule(1.0, R_max, per_octave)
    curve = _curve_from_shells(s, radii)
    return NormReport(hs, math.sqrt(sup), math.sqrt(dyadic), b_sum, tuple((float(r), float(c)) for r, c in zip(radii, curve)), R_max)


@dataclass(frozen=True)
class DecayVerdict:
    verdict: str
    slope: float
    drop: float
    variation: float
    radii: tuple[float, ...]
    curve: tuple[float, ...]


def decay_condition_verdict(
    u_hat,
    R_schedule: Sequence[float] | None = None,
    *,
    drop_factor: float = 2.0,
    slope_threshold: float = -0.5,
    slope_tolerance: float = 0.05,
    flat_tolerance: float = 0.1,
) -> DecayVerdict:
    """Classify the decay functional (1/R) sum_{|n|<R} |u_hat|^2 along a geometric schedule.

    ``satisfied`` needs a drop by ``drop_factor`` across the schedule and
    a fitted log-log slope at most ``slope_threshold + slope_tolerance``;
    ``violated`` means the curve stays within ``flat_tolerance`` (relative
    to its maximum); anything else is ``inconclusive``.
    """
    radii = geometric_schedule(2.0 ** 6, 2.0 ** 12) if R_schedule is None else np.asarray(R_schedule, dtype=float)
    if len(radii) < 2:
        raise ValueError("schedule needs at least two radii")
    ratios = radii[1:] / radii[:-1]
    if np.any(ratios <= 1) or not np.allclose(ratios, ratios[0], rtol=1e-9):
        raise ValueError("R_schedule must be increasing and geometric")
    curve = decay_curve(u_hat, radii)
    positive = curve > 0
    if positive.sum() >= 2:
        slope = float(np.polyfit(np.log(radii[positive]), np.log(curve[positive]), 1)[0])
    else:
        slope = float("-inf") if not positive.any() else float("nan")
    drop = float(curve[0] / curve[-1]) if curve[-1] > 0 else float("inf")
    top = float(curve.max())
    variation = float((top - curve.min()) / top) if top > 0 else 0.0
    if top == 0:
        verdict = "satisfied"
    elif drop >= drop_factor and slope <= slope_threshold + slope_tolerance:
        verdict = "satisfied"
    elif variation <= flat_tolerance:
        verdict = "violated"
    else:
        verdict = "inconclusive"
    return DecayVerdict(verdict, slope, drop, variation, tuple(map(float, radii)), tuple(map(float, curve)))


# ----------------------------------------------------------------------
# limiting absorption


def richardson_weights(eps: Sequence[float]) -> np.ndarray:
    """Lagrange weights evaluating at 0 the interpolant through (eps_j, y_j)."""
    eps = np.asarray(eps, dtype=float)
    w = np.ones(len(eps))
    for j in range(len(eps)):
        for k in range(len(eps)):
            if k != j:
                w[j] *= eps[k] / (eps[k] - eps[j])
    return w


def _symbol_grid(N: int, d: int, shift: np.ndarray) -> np.ndarray:
    h = np.zeros((N,) * d)
    for j in range(d):
        x = -np.pi + 2 * np.pi * (np.arange(N) + shift[j]) / N
        shape = [1] * d
        shape[j] = N
        h = h + (np.sin(x / 2) ** 2).reshape(shape)
    return h


SHIFT_CANDIDATES = (0.0, 0.25, 0.5, 0.75)


def _auto_shift(N: int, d: int, lam: float) -> tuple[np.ndarray, float]:
    best = None
    for cand in itertools.product(SHIFT_CANDIDATES, repeat=d):
        s = np.array(cand)
        gap = float(np.min(np.abs(_symbol_grid(N, d, s) - lam)))
        if best is None or gap > best[1] * (1 + 1e-12):
            best = (s, gap)
    return best


@dataclass(frozen=True)
class AbsorptionResult:
    grid: TorusGrid = field(repr=False)
    coefficients: LatticeField = field(repr=False)
    epsilons: tuple[float, ...]
    weights: tuple[float, ...]
    shift: tuple[float, ...]
    delta_min: float
    window: float

    def coefficient_array(self) -> np.ndarray:
        return coefficient_array(self.grid)


def limiting_absorption_solve(
    f_hat: LatticeField,
    lam: float,
    N: int,
    epsilon: float | Sequence[float] | None = None,
    *,
    shift="auto",
    window: float | None = None,
) -> AbsorptionResult:
    """Solve (h - lam - i eps) u = f on the torus grid and return coefficients.

    Parameters
    ----------
    epsilon : float, sequence or None
        A single value gives the damped solve u_eps. A sequence is
        Richardson-extrapolated to eps = 0. ``None`` uses the schedule
        ``delta_min * (1e-2, 1e-3, 1e-4)`` where ``delta_min`` is the
        distance of the grid symbol from ``lam``.
    shift : "auto", None or per-axis offsets
        Grid offset. ``"auto"`` picks, among quarter offsets, the one that
        keeps the nodes farthest from the Fermi surface.
    window : float, optional
        Euclidean radius of the returned coefficient window, default N/4.
    """
    N = _check_N(N)
    d = f_hat.dimension
    if not 0 < lam < d:
        raise ValueError(f"lambda must lie in (0, {d})")
    if isinstance(shift, str):
        if shift != "auto":
            raise ValueError("shift must be 'auto', None or offsets")
        s, gap = _auto_shift(N, d, lam)
    else:
        s = _shift_tuple(shift, d)
        gap = float(np.min(np.abs(_symbol_grid(N, d, s) - lam)))
    if epsilon is None:
        if gap == 0:
            raise ValueError("grid nodes lie on the Fermi surface; pass epsilon or a shift")
        eps = tuple(float(gap * r) for r in (1e-2, 1e-3, 1e-4))
    else:
        eps = tuple(float(e) for e in np.atleast_1d(epsilon))
    if any(e <= 0 for e in eps):
        raise ValueError("epsilon must be positive")
    weights = richardson_weights(eps) if len(eps) > 1 else np.ones(1)

    fgrid = synthesize(f_hat, N, s)
    h = _symbol_grid(N, d, s)
    u = np.zeros_like(fgrid.values)
    for w, e in zip(weights, eps):
        u = u + w * (fgrid.values / (h - lam - 1j * e))
    grid = TorusGrid(d, N, u, tuple(s))
    win = N / 4 if window is None else float(window)
    return AbsorptionResult(grid, coefficients(grid, win, norm="l2"), eps, tuple(map(float, weights)), tuple(map(float, s)), gap, win)


def decay_exponent(
    u_hat,
    direction: Sequence[int],
    n_min: int,
    n_max: int,
    blocks: int = 16,
) -> float:
    """Log-log slope of the block-RMS of |u_hat(t * direction)| for t in [n_min, n_max].

    ``u_hat`` is a LatticeField or a centered coefficient array.
    """
    direction = np.asarray(direction, dtype=np.int64)
    t = np.arange(int(n_min), int(n_max) + 1)
    if isinstance(u_hat, LatticeField):
        vals = np.array([abs(u_hat[tuple(int(c) for c in k * direction)]) for k in t])
    else:
        arr = np.asarray(u_hat)
        N = arr.shape[0]
        idx = (t[:, None] * direction[None, :]) + N // 2
        vals = np.abs(arr[tuple(idx.T)])
    parts = np.array_split(np.arange(len(t)), blocks)
    centers = np.array([t[p].mean() for p in parts])
    rms = np.array([np.sqrt(np.mean(vals[p] ** 2)) for p in parts])
    return float(np.polyfit(np.log(centers), np.log(rms), 1)[0])
