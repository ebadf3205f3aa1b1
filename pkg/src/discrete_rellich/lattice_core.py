"""Lattice geometry on Z^d.

Sites are plain tuples of ints. Exterior domains are described by a finite
obstacle together with a cubic computation window; every statement about
the infinite domain is decided exactly inside that window because the
obstacle is finite.
"""

from __future__ import annotations

import itertools
import json
import math
from collections import deque
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np

Site = tuple[int, ...]

__all__ = [
    "Site",
    "as_site",
    "site_norm",
    "neighbors",
    "Box",
    "Cone",
    "BoundedDomain",
    "ExteriorDomain",
    "ConeVerdict",
    "DisconnectedDomain",
    "WindowTooSmall",
    "classify_domain",
    "bounded_domain",
    "lattice_interior",
    "cone_contained",
    "satisfies_cone_condition",
    "rectangle_obstacle",
    "rhombus_obstacle",
    "zigzag_obstacle",
    "staircase_obstacle",
    "preset_domain",
    "PRESETS",
    "domain_to_json",
    "domain_from_json",
]


class DisconnectedDomain(ValueError):
    """The exterior domain splits into more than one component."""


class WindowTooSmall(ValueError):
    """The computation window does not clear the obstacle by two sites."""


def as_site(coords: Iterable[int]) -> Site:
    """Coerce an iterable of integers to a site tuple."""
    out = []
    for c in coords:
        ic = int(c)
        if ic != c:
            raise ValueError(f"site coordinate {c!r} is not an integer")
        out.append(ic)
    return tuple(out)


def site_norm(n: Sequence[int]) -> float:
    """Euclidean norm |n|."""
    return math.sqrt(sum(c * c for c in n))


def neighbors(n: Sequence[int]) -> list[Site]:
    """The 2d nearest neighbours of ``n``.

    Ordered by axis, and within an axis ``n - e_j`` before ``n + e_j``.
    """
    n = tuple(n)
    out = []
    for j in range(len(n)):
        for step in (-1, 1):
            m = list(n)
            m[j] += step
            out.append(tuple(m))
    return out


@dataclass(frozen=True)
class Box:
    """Closed integer box ``lower <= n <= upper`` (componentwise)."""

    lower: Site
    upper: Site

    def __post_init__(self):
        if len(self.lower) != len(self.upper):
            raise ValueError("box corners have different dimensions")
        if any(a > b for a, b in zip(self.lower, self.upper)):
            raise ValueError("empty box")

    @classmethod
    def centered(cls, size: int, dimension: int) -> "Box":
        """Box with ``size`` sites per axis, starting at ``-(size // 2)``."""
        if size < 1:
            raise ValueError("box size must be positive")
        lo = -(size // 2)
        return cls((lo,) * dimension, (lo + size - 1,) * dimension)

    @classmethod
    def cube(cls, radius: int, dimension: int) -> "Box":
        """The box ``[-radius, radius]^d``."""
        return cls((-radius,) * dimension, (radius,) * dimension)

    @property
    def dimension(self) -> int:
        return len(self.lower)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(b - a + 1 for a, b in zip(self.lower, self.upper))

    def __len__(self) -> int:
        return math.prod(self.shape)

    def __contains__(self, n) -> bool:
        return all(a <= c <= b for a, c, b in zip(self.lower, n, self.upper))

    def sites(self) -> list[Site]:
        """All sites in lexicographic order."""
        ranges = [range(a, b + 1) for a, b in zip(self.lower, self.upper)]
        return list(itertools.product(*ranges))

    def grown(self, k: int = 1) -> "Box":
        return Box(tuple(a - k for a in self.lower), tuple(b + k for b in self.upper))

    def coordinates(self) -> np.ndarray:
        """Integer array of shape (len, d) in lexicographic order."""
        axes = [np.arange(a, b + 1) for a, b in zip(self.lower, self.upper)]
        grid = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in grid], axis=1)


@dataclass(frozen=True)
class Cone:
    """Lattice cone C_{i,s}(apex) with 1-based ``axis`` and ``sign`` in {+1, -1}."""

    axis: int
    sign: int
    apex: Site

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise ValueError("cone sign must be +1 or -1")
        if not 1 <= self.axis <= len(self.apex):
            raise ValueError("cone axis out of range")

    def __contains__(self, m) -> bool:
        i = self.axis - 1
        lateral = sum(abs(mk - nk) for k, (mk, nk) in enumerate(zip(m, self.apex)) if k != i)
        return lateral <= self.sign * (m[i] - self.apex[i])

    def mask(self, points: np.ndarray) -> np.ndarray:
        """Vectorised membership for an (k, d) integer array."""
        diff = np.asarray(points) - np.asarray(self.apex)
        i = self.axis - 1
        lateral = np.abs(diff).sum(axis=1) - np.abs(diff[:, i])
        return lateral <= self.sign * diff[:, i]


def lattice_interior(sites: Iterable[Site]) -> frozenset[Site]:
    """Sites of a finite set all of whose 2d neighbours lie in the set."""
    s = set(sites)
    return frozenset(n for n in s if all(m in s for m in neighbors(n)))


@dataclass(frozen=True)
class BoundedDomain:
    """A finite set of sites with its degree map and interior/boundary split.

    The degree of a site counts its nearest neighbours inside the set.
    """

    dimension: int
    sites: tuple[Site, ...]
    degree: Mapping[Site, int] = field(repr=False)
    interior: frozenset[Site] = field(repr=False)
    boundary: frozenset[Site] = field(repr=False)

    def __contains__(self, n) -> bool:
        return n in self.degree

    def is_interior(self, n) -> bool:
        return n in self.interior

    def in_window(self, n) -> bool:
        return n in self.degree


def bounded_domain(sites: Iterable[Sequence[int]], *, check_connected: bool = True) -> BoundedDomain:
    """Classify a finite site set into interior and boundary."""
    s = sorted({as_site(n) for n in sites})
    if not s:
        raise ValueError("empty domain")
    d = len(s[0])
    if any(len(n) != d for n in s):
        raise ValueError("mixed dimensions")
    members = set(s)
    degree = {n: sum(m in members for m in neighbors(n)) for n in s}
    interior = frozenset(n for n, k in degree.items() if k == 2 * d)
    boundary = frozenset(n for n, k in degree.items() if k < 2 * d)
    if check_connected:
        seen = {s[0]}
        queue = deque([s[0]])
        while queue:
            n = queue.popleft()
            for m in neighbors(n):
                if m in members and m not in seen:
                    seen.add(m)
                    queue.append(m)
        if len(seen) != len(s):
            raise DisconnectedDomain(f"domain has {len(s) - len(seen)} sites unreachable from {s[0]}")
    return BoundedDomain(d, tuple(s), MappingProxyType(degree), interior, boundary)


@dataclass(frozen=True)
class ExteriorDomain:
    """Omega_ext = Z^d minus the interior of a finite obstacle, seen through a window.

    The window is the cube ``max_j |n_j| <= bounding_radius``. Degrees are
    computed in Z^d, so sites just outside the window count as present.
    """

    dimension: int
    obstacle: frozenset[Site]
    bounding_radius: int
    removed: frozenset[Site] = field(repr=False)
    degree: Mapping[Site, int] = field(repr=False)
    interior: frozenset[Site] = field(repr=False)
    boundary: frozenset[Site] = field(repr=False)

    def __contains__(self, n) -> bool:
        """Membership in the full (unwindowed) exterior domain."""
        return tuple(n) not in self.removed

    def in_window(self, n) -> bool:
        return all(abs(c) <= self.bounding_radius for c in n)

    def is_interior(self, n) -> bool:
        """Interior test that is also valid for sites beyond the window."""
        n = tuple(n)
        if n in self.degree:
            return n in self.interior
        return n not in self.removed and not any(m in self.removed for m in neighbors(n))

    @property
    def sites(self) -> tuple[Site, ...]:
        """Domain sites inside the window, lexicographic."""
        return tuple(sorted(self.degree))

    @property
    def window(self) -> Box:
        return Box.cube(self.bounding_radius, self.dimension)

    def truncated(self) -> BoundedDomain:
        """The bounded domain Omega_ext intersected with the window."""
        return bounded_domain(self.degree.keys(), check_connected=False)

    def with_radius(self, bounding_radius: int) -> "ExteriorDomain":
        return classify_domain(self.obstacle, bounding_radius, dimension=self.dimension)


def classify_domain(
    obstacle: Iterable[Sequence[int]],
    bounding_radius: int,
    *,
    dimension: int | None = None,
) -> ExteriorDomain:
    """Build the exterior domain of a finite obstacle.

    Parameters
    ----------
    obstacle : iterable of sites
        The bounded set Omega_int. May be empty, in which case ``dimension``
        is required and the result is the whole lattice.
    bounding_radius : int
        Half-width of the cubic window. Must exceed the obstacle extent by
        more than two.
    dimension : int, optional
        Lattice dimension; inferred from the obstacle when omitted.

    Raises
    ------
    WindowTooSmall
        If the window does not clear the obstacle.
    DisconnectedDomain
        If Omega_ext has a bounded component.
    """
    obs = frozenset(as_site(n) for n in obstacle)
    if obs:
        dims = {len(n) for n in obs}
        if len(dims) != 1:
            raise ValueError("obstacle sites have mixed dimensions")
        d = dims.pop()
        if dimension is not None and dimension != d:
            raise ValueError("dimension does not match obstacle")
    elif dimension is None:
        raise ValueError("dimension is required for an empty obstacle")
    else:
        d = dimension
    if d < 2:
        raise ValueError("exterior domains need d >= 2")
    R = int(bounding_radius)
    extent = max((abs(c) for n in obs for c in n), default=0)
    if obs and R <= extent + 2:
        raise WindowTooSmall(f"bounding_radius {R} must exceed obstacle extent {extent} + 2")
    if R < 1:
        raise WindowTooSmall("bounding_radius must be positive")

    removed = lattice_interior(obs)
    window = Box.cube(R, d)
    members = [n for n in window.sites() if n not in removed]
    degree = {n: sum(m not in removed for m in neighbors(n)) for n in members}
    interior = frozenset(n for n, k in degree.items() if k == 2 * d)
    boundary = frozenset(n for n, k in degree.items() if k < 2 * d)

    # window-edge sites all reach infinity
    seen = {n for n in members if any(abs(c) == R for c in n)}
    queue = deque(seen)
    while queue:
        n = queue.popleft()
        for m in neighbors(n):
            if m in degree and m not in seen:
                seen.add(m)
                queue.append(m)
    if len(seen) != len(members):
        lost = sorted(set(members) - seen)
        raise DisconnectedDomain(f"{len(lost)} exterior sites are cut off from infinity, e.g. {lost[0]}")

    return ExteriorDomain(d, obs, R, removed, MappingProxyType(degree), interior, boundary)


def _removed_array(domain) -> np.ndarray:
    if isinstance(domain, ExteriorDomain):
        pts = sorted(domain.removed)
    else:
        raise TypeError("cone tests need an ExteriorDomain")
    return np.array(pts, dtype=np.int64).reshape(len(pts), domain.dimension)


def _witness_table(removed: np.ndarray, points: np.ndarray, d: int) -> np.ndarray:
    """Boolean (k, d, 2) table: cone (axis, [+, -]) at each point avoids ``removed``."""
    k = len(points)
    out = np.ones((k, d, 2), dtype=bool)
    if len(removed) == 0:
        return out
    for start in range(0, k, 256):
        p = points[start:start + 256]
        diff = removed[None, :, :] - p[:, None, :]
        absd = np.abs(diff)
        total = absd.sum(axis=2)
        for i in range(d):
            lateral = total - absd[:, :, i]
            out[start:start + 256, i, 0] = ~np.any(lateral <= diff[:, :, i], axis=1)
            out[start:start + 256, i, 1] = ~np.any(lateral <= -diff[:, :, i], axis=1)
    return out


def cone_contained(domain: ExteriorDomain, n: Sequence[int]) -> tuple[int, int] | None:
    """First cone (axis, sign) with apex ``n`` lying entirely in Omega_ext.

    Since every removed site lies inside the window, the cone is contained
    in the domain exactly when it avoids the removed set. Candidates are
    tried axis by axis, ``+`` before ``-``.
    """
    n = as_site(n)
    if n not in domain:
        raise ValueError(f"{n} is not a site of the domain")
    table = _witness_table(_removed_array(domain), np.array([n]), domain.dimension)[0]
    for i in range(domain.dimension):
        for col, sign in ((0, 1), (1, -1)):
            if table[i, col]:
                return (i + 1, sign)
    return None


@dataclass(frozen=True)
class ConeVerdict:
    holds: bool
    violations: tuple[Site, ...]

    def __bool__(self) -> bool:
        return self.holds


def satisfies_cone_condition(domain: ExteriorDomain) -> ConeVerdict:
    """Check that every windowed site of the domain hosts a contained cone."""
    sites = domain.sites
    pts = np.array(sites, dtype=np.int64)
    table = _witness_table(_removed_array(domain), pts, domain.dimension)
    ok = table.reshape(len(sites), -1).any(axis=1)
    bad = tuple(sites[k] for k in np.flatnonzero(~ok))
    return ConeVerdict(not bad, bad)


# ----------------------------------------------------------------------
# presets


def rectangle_obstacle(half_widths: Sequence[int] = (3, 2)) -> frozenset[Site]:
    """Solid box ``|n_i| <= a_i``."""
    ranges = [range(-a, a + 1) for a in half_widths]
    return frozenset(itertools.product(*ranges))


def rhombus_obstacle(radius: int = 3, dimension: int = 2) -> frozenset[Site]:
    """The l1 ball ``sum |n_i| <= radius``."""
    box = Box.cube(radius, dimension)
    return frozenset(n for n in box.sites() if sum(map(abs, n)) <= radius)


def zigzag_obstacle(amplitude: int = 3, teeth: int = 2, base: int = 4, left: int = -6) -> frozenset[Site]:
    """Planar obstacle whose right edge is a triangle wave of slope one.

    Rows run over ``|y| <= amplitude * teeth``; row ``y`` spans
    ``left <= x <= base + tri(y)`` where ``tri`` oscillates between 0 and
    ``amplitude`` with period ``2 * amplitude``.
    """
    if amplitude < 1 or teeth < 1:
        raise ValueError("amplitude and teeth must be positive")
    height = amplitude * teeth
    out = set()
    for y in range(-height, height + 1):
        phase = (y + height) % (2 * amplitude)
        tri = phase if phase <= amplitude else 2 * amplitude - phase
        for x in range(left, base + tri + 1):
            out.add((x, y))
    return frozenset(out)


def staircase_obstacle(tread: int = 3, column: int = 4, half: int = 8, step_row: int = -4) -> frozenset[Site]:
    """Square obstacle with a notched staircase cut into its fourth quadrant.

    The right edge sits at ``x = half`` above ``step_row``, at
    ``x = column + tread`` on ``step_row`` and at ``x = column`` below it.
    The defaults reproduce the drawn counterexample geometry.
    """
    if not (0 < column and tread >= 1 and column + tread < half and -half < step_row < 0):
        raise ValueError("staircase parameters do not fit in the square")
    out = set()
    for y in range(-half, half + 1):
        if y > step_row:
            right = half
        elif y == step_row:
            right = column + tread
        else:
            right = column
        for x in range(-half, right + 1):
            out.add((x, y))
    return frozenset(out)


def _extent(obs) -> int:
    return max((abs(c) for n in obs for c in n), default=0)


def _rectangle(half_widths=(3, 2), margin=4):
    obs = rectangle_obstacle(half_widths)
    return obs, _extent(obs) + margin


def _rhombus(radius=3, dimension=2, margin=4):
    obs = rhombus_obstacle(radius, dimension)
    return obs, _extent(obs) + margin


def _zigzag(amplitude=3, teeth=2, base=4, left=-6, margin=4):
    obs = zigzag_obstacle(amplitude, teeth, base, left)
    return obs, _extent(obs) + margin


def _staircase(tread=3, column=4, half=8, step_row=-4, margin=4):
    obs = staircase_obstacle(tread, column, half, step_row)
    return obs, _extent(obs) + margin


PRESETS = {
    "rectangle": _rectangle,
    "rhombus": _rhombus,
    "zigzag": _zigzag,
    "staircase": _staircase,
}


def preset_domain(name: str, **params) -> ExteriorDomain:
    """Classified exterior domain for a named preset.

    ``bounding_radius`` may be passed to override the default window.
    """
    try:
        factory = PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    radius = params.pop("bounding_radius", None)
    obs, default_radius = factory(**params)
    return classify_domain(obs, default_radius if radius is None else radius)


def domain_to_json(domain: ExteriorDomain) -> dict:
    return {
        "dimension": domain.dimension,
        "obstacle": [list(n) for n in sorted(domain.obstacle)],
        "bounding_radius": domain.bounding_radius,
    }


def domain_from_json(spec: Mapping | str) -> ExteriorDomain:
    """Read ``{dimension, obstacle, bounding_radius}`` or ``{preset, params}``."""
    if isinstance(spec, str):
        spec = json.loads(spec)
    spec = dict(spec)
    if "preset" in spec:
        extra = set(spec) - {"preset", "params", "bounding_radius"}
        if extra:
            raise ValueError(f"unknown domain fields {sorted(extra)}")
        params = dict(spec.get("params", {}))
        if "bounding_radius" in spec:
            params["bounding_radius"] = spec["bounding_radius"]
        return preset_domain(spec["preset"], **params)
    extra = set(spec) - {"dimension", "obstacle", "bounding_radius"}
    if extra:
        raise ValueError(f"unknown domain fields {sorted(extra)}")
    return classify_domain(
        [as_site(n) for n in spec["obstacle"]],
        int(spec["bounding_radius"]),
        dimension=int(spec["dimension"]),
    )
