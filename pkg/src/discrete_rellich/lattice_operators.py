"""Stencils and sparse assembly for the lattice Schroedinger operator.

The discrete Laplacian is

    (Lap u)(n) = 1/4 * sum_j (u(n + e_j) + u(n - e_j)) - (d/2) u(n),

so that -Lap has symbol h(x) = sum_j sin^2(x_j / 2) with range [0, d].
Fields holding ints or Fractions are processed in exact rational
arithmetic; anything else falls back to complex floating point.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Number
from types import MappingProxyType
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
import scipy.io
import scipy.sparse as sp

from .lattice_core import (
    BoundedDomain,
    Box,
    ExteriorDomain,
    Site,
    as_site,
    neighbors,
    site_norm,
)

__all__ = [
    "LatticeField",
    "AssembledOperator",
    "NonRealPotential",
    "NotBoundarySite",
    "MissingRobinCoefficient",
    "apply_laplacian",
    "apply_schrodinger",
    "apply_graph_laplacian",
    "normal_derivative",
    "green_residual",
    "assemble",
    "field_to_json",
    "field_from_json",
]

BC_KINDS = ("whole_space_box", "dirichlet", "robin")


class NonRealPotential(ValueError):
    """A potential or Robin coefficient has a nonzero imaginary part."""


class NotBoundarySite(ValueError):
    """The site is not on the boundary of the domain."""


class MissingRobinCoefficient(ValueError):
    """Robin assembly was requested without c(n) on every boundary site."""


def _is_exact(v) -> bool:
    return isinstance(v, (int, Fraction)) and not isinstance(v, bool)


@dataclass(frozen=True)
class LatticeField:
    """Finitely supported map from sites to scalars; absent sites read as 0."""

    dimension: int
    entries: Mapping[Site, Number] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for n, v in dict(self.entries).items():
            n = as_site(n)
            if len(n) != self.dimension:
                raise ValueError(f"site {n} does not have dimension {self.dimension}")
            clean[n] = v
        object.__setattr__(self, "entries", MappingProxyType(clean))

    @classmethod
    def zero(cls, dimension: int) -> "LatticeField":
        return cls(dimension, {})

    @classmethod
    def delta(cls, site: Sequence[int], value: Number = 1) -> "LatticeField":
        site = as_site(site)
        return cls(len(site), {site: value})

    @classmethod
    def from_function(cls, sites: Iterable[Site], func: Callable[[Site], Number]) -> "LatticeField":
        sites = [as_site(n) for n in sites]
        if not sites:
            raise ValueError("no sites given")
        return cls(len(sites[0]), {n: func(n) for n in sites})

    @classmethod
    def from_array(cls, box: Box, values: np.ndarray) -> "LatticeField":
        """Field on ``box`` from an array shaped like ``box.shape`` (zeros dropped)."""
        values = np.asarray(values).reshape(box.shape)
        idx = np.argwhere(values != 0)
        lo = np.array(box.lower)
        return cls(box.dimension, {tuple(int(c) for c in i + lo): values[tuple(i)].item() for i in idx})

    def __getitem__(self, n) -> Number:
        return self.entries.get(tuple(n), 0)

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def support(self) -> frozenset[Site]:
        return frozenset(n for n, v in self.entries.items() if v != 0)

    @property
    def support_radius(self) -> float:
        return max((site_norm(n) for n in self.support), default=0.0)

    @property
    def is_exact(self) -> bool:
        return all(_is_exact(v) for v in self.entries.values())

    @property
    def is_real(self) -> bool:
        return all(np.imag(v) == 0 for v in self.entries.values())

    def norm(self) -> float:
        """l2 norm."""
        return math.sqrt(sum(abs(v) ** 2 for v in self.entries.values()))

    def max_abs(self) -> float:
        return max((abs(v) for v in self.entries.values()), default=0.0)

    def pruned(self, tol: float = 0.0) -> "LatticeField":
        """Drop entries with modulus at most ``tol``."""
        return LatticeField(self.dimension, {n: v for n, v in self.entries.items() if abs(v) > tol or (tol == 0 and v != 0)})

    def restricted(self, sites) -> "LatticeField":
        keep = set(sites)
        return LatticeField(self.dimension, {n: v for n, v in self.entries.items() if n in keep})

    def scaled(self, c: Number) -> "LatticeField":
        return LatticeField(self.dimension, {n: c * v for n, v in self.entries.items()})

    def __add__(self, other: "LatticeField") -> "LatticeField":
        if self.dimension != other.dimension:
            raise ValueError("dimension mismatch")
        out = dict(self.entries)
        for n, v in other.entries.items():
            out[n] = out.get(n, 0) + v
        return LatticeField(self.dimension, out)

    def __sub__(self, other: "LatticeField") -> "LatticeField":
        return self + other.scaled(-1)

    def to_array(self, box: Box, dtype=complex) -> np.ndarray:
        """Dense values on ``box`` (entries outside the box are ignored)."""
        arr = np.zeros(box.shape, dtype=dtype)
        lo = box.lower
        for n, v in self.entries.items():
            if n in box:
                arr[tuple(c - a for c, a in zip(n, lo))] = v
        return arr


def _quarter(*fields: LatticeField):
    """Stencil weight 1/4, exact when every input is exact."""
    if all(f.is_exact for f in fields):
        return Fraction(1, 4), Fraction(1, 2)
    return 0.25, 0.5


def apply_laplacian(u: LatticeField) -> LatticeField:
    """Apply the whole-lattice discrete Laplacian."""
    q, _ = _quarter(u)
    d = u.dimension
    center = -q * 2 * d
    out: dict[Site, Number] = {}
    for n, v in u.entries.items():
        if v == 0:
            continue
        out[n] = out.get(n, 0) + center * v
        for m in neighbors(n):
            out[m] = out.get(m, 0) + q * v
    return LatticeField(d, out)


def _check_real(values, what="potential"):
    for v in values:
        if np.imag(v) != 0:
            raise NonRealPotential(f"{what} value {v!r} is not real")


def apply_schrodinger(V: LatticeField, lam, u: LatticeField) -> LatticeField:
    """Return ``(-Lap + V - lam) u``."""
    _check_real(V.entries.values())
    _check_real([lam], "spectral parameter")
    out = dict(apply_laplacian(u).scaled(-1).entries)
    for n, v in u.entries.items():
        out[n] = out.get(n, 0) + (V[n] - lam) * v
    return LatticeField(u.dimension, out)


def _domain_parts(domain):
    if isinstance(domain, (BoundedDomain, ExteriorDomain)):
        return domain
    raise TypeError("expected a BoundedDomain or ExteriorDomain")


def normal_derivative(domain, u: LatticeField, n: Sequence[int]):
    """Outward normal derivative ``1/4 * sum (u(n) - u(m))`` over interior neighbours m."""
    domain = _domain_parts(domain)
    n = as_site(n)
    if n not in domain.boundary:
        raise NotBoundarySite(f"{n} is not a boundary site")
    q, _ = _quarter(u)
    un = u[n]
    total = 0
    for m in neighbors(n):
        if domain.is_interior(m):
            total += un - u[m]
    return q * total


def apply_graph_laplacian(domain, u: LatticeField) -> LatticeField:
    """Graph Laplacian on a domain: Lap on interior sites, minus the normal derivative on the boundary."""
    domain = _domain_parts(domain)
    q, _ = _quarter(u)
    d = domain.dimension
    out = {}
    for n in domain.sites:
        if n in domain.interior:
            acc = -q * 2 * d * u[n]
            for m in neighbors(n):
                acc += q * u[m]
            out[n] = acc
        else:
            out[n] = -normal_derivative(domain, u, n)
    return LatticeField(d, out)


def green_residual(domain, u: LatticeField, v: LatticeField):
    """|LHS - RHS| of the bilinear Green formula on a bounded domain.

    LHS sums ``Lap u * v - u * Lap v`` over interior sites, RHS sums
    ``d_nu u * v - u * d_nu v`` over boundary sites. Exact inputs give an
    exact result; otherwise the sums are compensated in float.
    """
    if isinstance(domain, ExteriorDomain):
        domain = domain.truncated()
    domain = _domain_parts(domain)
    exact = u.is_exact and v.is_exact
    q, _ = _quarter(u, v)
    d = domain.dimension

    def lap(w, n):
        acc = -q * 2 * d * w[n]
        for m in neighbors(n):
            acc += q * w[m]
        return acc

    terms = []
    for n in sorted(domain.interior):
        terms.append(lap(u, n) * v[n] - u[n] * lap(v, n))
    for n in sorted(domain.boundary):
        terms.append(-(normal_derivative(domain, u, n) * v[n] - u[n] * normal_derivative(domain, v, n)))
    if exact:
        return abs(sum(terms, Fraction(0)))
    arr = np.asarray(terms, dtype=complex)
    return abs(complex(math.fsum(arr.real), math.fsum(arr.imag)))


@dataclass(frozen=True)
class AssembledOperator:
    """Symmetric sparse matrix over an enumerated site list."""

    site_index: tuple[Site, ...]
    matrix: sp.csr_matrix = field(repr=False)
    bc_kind: str
    dimension: int
    robin_coefficients: Mapping[Site, float] | None = field(default=None, repr=False)

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    def index_map(self) -> dict[Site, int]:
        return {n: k for k, n in enumerate(self.site_index)}

    def symmetry_residual(self) -> float:
        diff = self.matrix - self.matrix.T
        return float(abs(diff).max()) if diff.nnz else 0.0

    def field_to_vector(self, u: LatticeField) -> np.ndarray:
        return np.array([u[n] for n in self.site_index], dtype=complex)

    def vector_to_field(self, vec: np.ndarray, tol: float = 0.0) -> LatticeField:
        vals = {n: complex(x) if np.iscomplexobj(vec) else float(x) for n, x in zip(self.site_index, vec) if abs(x) > tol}
        return LatticeField(self.dimension, vals)

    def write_matrix_market(self, path) -> None:
        scipy.io.mmwrite(str(path), self.matrix, comment=f"bc_kind={self.bc_kind} sites={len(self.site_index)}", symmetry="symmetric")


def _potential_lookup(V: LatticeField | None, d: int):
    if V is None:
        return {}
    if V.dimension != d:
        raise ValueError("potential dimension mismatch")
    _check_real(V.entries.values())
    return {n: float(np.real(v)) for n, v in V.entries.items() if v != 0}


def _robin_lookup(robin_c, boundary) -> dict[Site, float]:
    if robin_c is None:
        raise MissingRobinCoefficient("robin assembly needs robin_c")
    if isinstance(robin_c, Number):
        _check_real([robin_c], "Robin coefficient")
        return {n: float(np.real(robin_c)) for n in boundary}
    if callable(robin_c):
        vals = {n: robin_c(n) for n in boundary}
    else:
        vals = {as_site(n): c for n, c in dict(robin_c).items()}
    missing = [n for n in boundary if n not in vals]
    if missing:
        raise MissingRobinCoefficient(f"no Robin coefficient at boundary site {sorted(missing)[0]}")
    _check_real(vals.values(), "Robin coefficient")
    return {n: float(np.real(vals[n])) for n in boundary}


def _build(sites, rows_for, d, bc_kind, robin=None) -> AssembledOperator:
    index = {n: k for k, n in enumerate(sites)}
    I, J, X = [], [], []
    for k, n in enumerate(sites):
        for m, val in rows_for(n):
            j = index.get(m)
            if j is not None:
                I.append(k)
                J.append(j)
                X.append(val)
    mat = sp.csr_matrix((np.array(X, dtype=float), (np.array(I, dtype=np.int64), np.array(J, dtype=np.int64))), shape=(len(sites), len(sites)))
    mat.sum_duplicates()
    mat.sort_indices()
    return AssembledOperator(tuple(sites), mat, bc_kind, d, None if robin is None else MappingProxyType(robin))


def assemble(domain, V: LatticeField | None = None, bc_kind: str = "dirichlet", robin_c=None) -> AssembledOperator:
    """Assemble ``-Lap + V`` as a symmetric sparse matrix.

    Parameters
    ----------
    domain : ExteriorDomain, BoundedDomain or Box
        For ``whole_space_box`` a :class:`Box` (or an int box size, taken
        as a centered box in ``V``'s dimension); otherwise a classified
        domain whose windowed sites are enumerated lexicographically.
    V : LatticeField, optional
        Real potential supported in the enumerated site set.
    bc_kind : {"whole_space_box", "dirichlet", "robin"}
        ``dirichlet`` keeps interior rows and columns only. ``robin`` keeps
        every site; boundary rows are the normal-derivative rows with
        ``c(n) + V(n)`` added on the diagonal.
    robin_c : float, mapping or callable
        Robin coefficient on the boundary, required for ``robin``.

    Notes
    -----
    Neighbours beyond an exterior window are dropped, which is a Dirichlet
    truncation at the window edge.
    """
    if bc_kind not in BC_KINDS:
        raise ValueError(f"bc_kind must be one of {BC_KINDS}")
    if bc_kind == "whole_space_box":
        if isinstance(domain, int):
            if V is None:
                raise ValueError("an int box size needs V to fix the dimension")
            domain = Box.centered(domain, V.dimension)
        if not isinstance(domain, Box):
            raise TypeError("whole_space_box needs a Box")
        d = domain.dimension
        pot = _potential_lookup(V, d)
        if any(n not in domain for n in pot):
            raise ValueError("potential is not supported inside the box")
        half = d / 2

        def rows(n):
            yield n, half + pot.get(n, 0.0)
            for m in neighbors(n):
                yield m, -0.25

        return _build(domain.sites(), rows, d, bc_kind)

    domain = _domain_parts(domain)
    d = domain.dimension
    pot = _potential_lookup(V, d)
    if any(n not in domain.degree for n in pot):
        raise ValueError("potential is not supported on the windowed domain")
    half = d / 2

    if bc_kind == "dirichlet":
        sites = sorted(domain.interior)

        def rows(n):
            yield n, half + pot.get(n, 0.0)
            for m in neighbors(n):
                yield m, -0.25

        return _build(sites, rows, d, bc_kind)

    robin = _robin_lookup(robin_c, sorted(domain.boundary))
    sites = list(domain.sites)

    def rows(n):
        if n in domain.interior:
            yield n, half + pot.get(n, 0.0)
            for m in neighbors(n):
                yield m, -0.25
        else:
            inner = [m for m in neighbors(n) if domain.is_interior(m)]
            yield n, 0.25 * len(inner) + robin[n] + pot.get(n, 0.0)
            for m in inner:
                yield m, -0.25

    return _build(sites, rows, d, bc_kind, robin)


def _json_number(v):
    c = complex(v)
    return [c.real, c.imag]


def field_to_json(u: LatticeField) -> dict:
    """``{dimension, entries: [[coords], re, im], ...}`` with sorted sites."""
    return {
        "dimension": u.dimension,
        "entries": [[list(n), *_json_number(v)] for n, v in sorted(u.entries.items())],
    }


def field_from_json(spec: Mapping | str) -> LatticeField:
    if isinstance(spec, str):
        spec = json.loads(spec)
    d = int(spec["dimension"])
    out = {}
    for coords, re, im in spec["entries"]:
        out[as_site(coords)] = float(re) if im == 0 else complex(re, im)
    return LatticeField(d, out)
