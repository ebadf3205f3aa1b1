"""Zero propagation for the lattice Helmholtz equation.

The equation ``(-Lap + V - lam) u = 0`` at a site ``m`` can be solved for
any single stencil value, since every neighbour enters with weight -1/4.
Along an axis this gives the slab recursion

    1/4 u(m1 - 1, .) = (-Lap' + V(m1, .) - lam) u(m1, .) + 1/2 u(m1, .) - 1/4 u(m1 + 1, .)

with ``Lap'`` the (d-1)-dimensional Laplacian on the transverse slab.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .lattice_core import (
    Box,
    ExteriorDomain,
    Site,
    as_site,
    classify_domain,
    neighbors,
    satisfies_cone_condition,
    site_norm,
    staircase_obstacle,
)
from .lattice_operators import LatticeField, apply_schrodinger

__all__ = [
    "SweepState",
    "sweep_step",
    "advance",
    "slab_of",
    "Certificate",
    "nullspace_certificate",
    "sweep_trace",
    "ConeConditionViolated",
    "forced_zero_sites",
    "propagate_zeros",
    "Counterexample",
    "build_counterexample",
    "exact_nullspace",
]


class ConeConditionViolated(RuntimeError):
    """Zero propagation was requested on a domain without the cone condition."""


def _drop(n: Site, axis: int) -> Site:
    return n[:axis] + n[axis + 1:]


def _insert(n: Site, axis: int, value: int) -> Site:
    return n[:axis] + (value,) + n[axis:]


def slab_of(u: LatticeField, axis: int, coordinate: int) -> LatticeField:
    """Transverse slice ``{n : n_axis = coordinate}`` of ``u``; ``axis`` is 1-based."""
    a = axis - 1
    return LatticeField(u.dimension - 1, {_drop(n, a): v for n, v in u.entries.items() if n[a] == coordinate})


@dataclass(frozen=True)
class SweepState:
    """Two adjacent slabs driving the recursion toward decreasing ``sign * n_axis``.

    ``near`` sits at ``n_axis = m1`` and ``far`` at ``m1 + sign``; a step
    produces the slab at ``m1 - sign``.
    """

    axis: int
    sign: int
    m1: int
    near: LatticeField
    far: LatticeField
    lam: float
    potential: LatticeField

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        d = self.potential.dimension
        if not 1 <= self.axis <= d:
            raise ValueError("axis out of range")
        if self.near.dimension != d - 1 or self.far.dimension != d - 1:
            raise ValueError("slabs must have dimension d - 1")


def sweep_step(state: SweepState) -> LatticeField:
    """New slab at ``m1 - sign`` from the slab recursion."""
    d = state.potential.dimension
    near, far = state.near, state.far
    vslab = slab_of(state.potential, state.axis, state.m1)
    exact = near.is_exact and far.is_exact and vslab.is_exact and isinstance(state.lam, (int, Fraction))
    half = Fraction(1, 2) if exact else 0.5
    quarter = Fraction(1, 4) if exact else 0.25
    # 4 * ((-Lap' + V - lam + 1/2) near - 1/4 far)
    out = dict(apply_schrodinger(vslab, state.lam, near).entries)
    for n, v in near.entries.items():
        out[n] = out.get(n, 0) + half * v
    for n, v in far.entries.items():
        out[n] = out.get(n, 0) - quarter * v
    return LatticeField(d - 1, {n: 4 * v for n, v in out.items() if v != 0})


def advance(state: SweepState) -> SweepState:
    """Shift the frontier by one slab."""
    new = sweep_step(state)
    return SweepState(state.axis, state.sign, state.m1 - state.sign, new, state.near, state.lam, state.potential)


@dataclass(frozen=True)
class Certificate:
    """Outcome of the finitely-supported-solution test on a box."""

    trivial: bool
    min_singular_value: float
    scale: float
    threshold: float
    witness: LatticeField | None = field(default=None, repr=False)
    shape: tuple[int, int] = (0, 0)


def _constraint_matrix(V: LatticeField, lam: float, box: Box) -> np.ndarray:
    """Rows: (H - lam) e_n evaluated on the box grown by one."""
    cols = box.sites()
    rows = box.grown(1)
    row_index = {n: k for k, n in enumerate(rows.sites())}
    d = box.dimension
    A = np.zeros((len(row_index), len(cols)))
    for j, n in enumerate(cols):
        A[row_index[n], j] = d / 2 + float(np.real(V[n])) - lam
        for m in neighbors(n):
            A[row_index[m], j] = -0.25
    return A


def nullspace_certificate(V: LatticeField, lam: float, support_box: Box, rtol: float = 1e-8) -> Certificate:
    """Decide whether ``(-Lap + V - lam) u = 0`` has a nonzero solution supported in ``support_box``.

    Every site where ``(H - lam) u`` can be nonzero lies in the box grown
    by one, so the solution set is the nullspace of that rectangular
    system. It is declared trivial when the smallest singular value
    exceeds ``rtol`` times the largest.
    """
    if not V.is_real:
        raise ValueError("potential must be real")
    if any(n not in support_box for n in V.support):
        raise ValueError("potential must be supported inside support_box")
    A = _constraint_matrix(V, float(lam), support_box)
    _, s, vh = np.linalg.svd(A, full_matrices=False)
    smin, smax = float(s[-1]), float(s[0])
    trivial = smin > rtol * smax
    witness = None
    if not trivial:
        witness = LatticeField(support_box.dimension, dict(zip(support_box.sites(), vh[-1])))
    return Certificate(trivial, smin, smax, rtol * smax, witness, A.shape)


def sweep_trace(V: LatticeField, lam, support_box: Box, axis: int = 1) -> list[tuple[int, int]]:
    """Run the slab recursion across ``support_box`` from the two zero slabs above it.

    Returns ``(coordinate, nnz)`` for each computed slab. For a solution
    supported in the box the incoming slabs vanish, so every computed slab
    is forced to zero; the trace records that.
    """
    d = support_box.dimension
    a = axis - 1
    hi, lo = support_box.upper[a], support_box.lower[a]
    zero = LatticeField(d - 1, {})
    state = SweepState(axis, 1, hi + 1, zero, zero, lam, V)
    out = []
    for _ in range(hi - lo + 1):
        state = advance(state)
        out.append((state.m1, len(state.near.pruned().entries)))
    return out


def _zero_region(known_zero, domain: ExteriorDomain) -> set[Site]:
    sites = domain.sites
    if known_zero is None:
        return set()
    if isinstance(known_zero, (int, float)):
        r = float(known_zero)
        return {n for n in sites if site_norm(n) > r}
    if callable(known_zero):
        return {n for n in sites if known_zero(n)}
    return {as_site(n) for n in known_zero} & set(sites)


def forced_zero_sites(domain: ExteriorDomain, V: LatticeField, lam, known_zero) -> frozenset[Site]:
    """Closure of the known zero set under single-unknown stencil forcing.

    ``known_zero`` is a radius (sites with ``|n|`` above it), a predicate
    or a site collection. Sites beyond the window are taken as zero. At an
    interior site ``m`` whose stencil has exactly one unknown value the
    equation forces that value to vanish, unless the unknown is ``m``
    itself and its coefficient ``d/2 + V(m) - lam`` happens to be zero.
    """
    d = domain.dimension
    R = domain.bounding_radius
    zero = _zero_region(known_zero, domain)

    def is_zero(n):
        return n in zero or any(abs(c) > R for c in n)

    def unknowns(m):
        return [k for k in [m, *neighbors(m)] if not is_zero(k)]

    centers = [m for m in domain.sites if m in domain.interior]
    queue = deque(centers)
    queued = set(centers)
    while queue:
        m = queue.popleft()
        queued.discard(m)
        free = unknowns(m)
        if len(free) != 1:
            continue
        k = free[0]
        if k == m and d / 2 + float(np.real(V[m])) - float(lam) == 0:
            continue
        zero.add(k)
        for c in [k, *neighbors(k)]:
            if c in domain.interior and c not in queued and domain.in_window(c):
                queue.append(c)
                queued.add(c)
    return frozenset(zero)


def propagate_zeros(
    domain: ExteriorDomain,
    V: LatticeField,
    lam,
    u: LatticeField,
    known_zero,
    *,
    require_cone_condition: bool = True,
) -> LatticeField:
    """Replace by zero every value of ``u`` that the equation forces to vanish.

    Raises
    ------
    ConeConditionViolated
        If the domain fails the cone condition and ``require_cone_condition``
        is left on.
    """
    if require_cone_condition:
        verdict = satisfies_cone_condition(domain)
        if not verdict.holds:
            raise ConeConditionViolated(f"cone condition fails at {len(verdict.violations)} sites, e.g. {verdict.violations[0]}")
    zero = forced_zero_sites(domain, V, lam, known_zero)
    return LatticeField(u.dimension, {n: (0 if n in zero else v) for n, v in u.entries.items() if domain.in_window(n) or n in zero})


# ----------------------------------------------------------------------
# counterexample


def exact_nullspace(rows: Sequence[Sequence[Fraction]], ncols: int) -> list[list[Fraction]]:
    """Basis of the rational nullspace by reduced row echelon form."""
    M = [list(map(Fraction, r)) for r in rows]
    pivots = []
    r = 0
    for c in range(ncols):
        p = next((i for i in range(r, len(M)) if M[i][c] != 0), None)
        if p is None:
            continue
        M[r], M[p] = M[p], M[r]
        piv = M[r][c]
        M[r] = [x / piv for x in M[r]]
        for i in range(len(M)):
            if i != r and M[i][c] != 0:
                f = M[i][c]
                M[i] = [a - f * b for a, b in zip(M[i], M[r])]
        pivots.append(c)
        r += 1
        if r == len(M):
            break
    free = [c for c in range(ncols) if c not in pivots]
    basis = []
    for fcol in free:
        vec = [Fraction(0)] * ncols
        vec[fcol] = Fraction(1)
        for i, pc in enumerate(pivots):
            vec[pc] = -M[i][fcol]
        basis.append(vec)
    return basis


@dataclass(frozen=True)
class Counterexample:
    domain: ExteriorDomain
    field: LatticeField
    lam: Fraction
    nullity: int


def build_counterexample(tread: int = 3, column: int = 4, half: int = 8, step_row: int = -4, margin: int = 4) -> Counterexample:
    """Staircase domain with a nonzero solution vanishing on the whole interior.

    With ``u = 0`` on interior sites the equation at an interior site ``n``
    reduces to the sum of ``u`` over boundary neighbours of ``n``. A
    rational nullspace vector of that boundary system, scaled so its
    largest entry is 1, gives the field.
    """
    obs = staircase_obstacle(tread, column, half, step_row)
    domain = classify_domain(obs, half + margin)
    bdry = sorted(domain.boundary)
    col = {n: k for k, n in enumerate(bdry)}
    rows = []
    for n in sorted(domain.interior):
        touched = [col[m] for m in neighbors(n) if m in col]
        if touched:
            row = [Fraction(0)] * len(bdry)
            for k in touched:
                row[k] += 1
            rows.append(row)
    basis = exact_nullspace(rows, len(bdry))
    if not basis:
        raise RuntimeError("boundary system has trivial nullspace for these parameters")
    vec = basis[0]
    # first nonzero entry positive, largest modulus 1
    lead = next(x for x in vec if x != 0)
    vec = [x / lead for x in vec]
    top = max(abs(x) for x in vec)
    vec = [x / top for x in vec]
    if max(vec) != 1:
        vec = [-x for x in vec]
    field_ = LatticeField(2, {n: x for n, x in zip(bdry, vec) if x != 0})
    return Counterexample(domain, field_, Fraction(1, 2), len(basis))
