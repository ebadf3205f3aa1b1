"""Eigensolvers, essential-spectrum probes and embedded-eigenvalue scans.

An l2 eigenfunction of the infinite-lattice operator would keep a fixed
fraction of its mass near the potential as the truncation box grows,
while scattering states spread out. The scans below track that
fraction for eigenvalues inside a window of the band [0, d].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.integrate
import scipy.linalg
import scipy.sparse.linalg as spla

from .lattice_core import Box, ExteriorDomain, Site, site_norm
from .lattice_operators import AssembledOperator, LatticeField, assemble

__all__ = [
    "ConvergenceFailure",
    "EigenReport",
    "eigensolve",
    "operator_eigenvalues",
    "dirichlet_chain_eigenvalues",
    "integrated_density_of_states",
    "ProbeRow",
    "essential_spectrum_probe",
    "cluster_localization",
    "ScanRow",
    "EmbeddedScan",
    "embedded_scan",
]

N_BINS = 64


class ConvergenceFailure(RuntimeError):
    """An eigensolver did not reach the residual target."""

    def __init__(self, message: str, *, iterations: int | None = None, converged: int | None = None, residual: float | None = None):
        super().__init__(message)
        self.iterations = iterations
        self.converged = converged
        self.residual = residual


@dataclass(frozen=True)
class EigenReport:
    box_size: int | None
    bc_kind: str
    eigenvalues: np.ndarray = field(repr=False)
    eigenvectors: np.ndarray = field(repr=False)
    max_residual: float = 0.0
    localization: np.ndarray | None = field(default=None, repr=False)
    probe_radius: float | None = None


def _box_size(op: AssembledOperator) -> int | None:
    if op.bc_kind != "whole_space_box":
        return None
    return round(len(op.site_index) ** (1 / op.dimension))


def _mass_fraction(op: AssembledOperator, vectors: np.ndarray, radius: float, center=None) -> np.ndarray:
    center = (0,) * op.dimension if center is None else center
    mask = np.array([site_norm([a - c for a, c in zip(n, center)]) <= radius for n in op.site_index])
    return np.clip(np.sum(np.abs(vectors[mask]) ** 2, axis=0), 0.0, 1.0)


def eigensolve(
    op: AssembledOperator,
    count: int | str = "all",
    *,
    probe_radius: float | None = None,
    probe_center: Sequence[int] | None = None,
    dense_limit: int = 20000,
    tol: float = 1e-8,
    maxiter: int | None = None,
) -> EigenReport:
    """Lowest ``count`` eigenpairs (or all) of an assembled operator.

    Dense LAPACK is used up to ``dense_limit`` rows; beyond that an
    implicitly restarted Lanczos iteration (ARPACK) computes the lowest
    ``count`` pairs. Every returned pair satisfies ``|Hv - lam v| <= tol``.
    """
    A = op.matrix
    n = A.shape[0]
    if count == "all":
        k = n
    else:
        k = int(count)
        if not 1 <= k <= n:
            raise ValueError(f"count must lie in [1, {n}]")
    if n <= dense_limit:
        dense = A.toarray()
        if k == n:
            w, vecs = scipy.linalg.eigh(dense, driver="evd")
        else:
            w, vecs = scipy.linalg.eigh(dense, subset_by_index=[0, k - 1])
    else:
        if count == "all" or k >= n - 1:
            raise ValueError(f"all eigenpairs of a {n}-site operator exceed the dense limit")
        try:
            w, vecs = spla.eigsh(A, k=k, which="SA", tol=tol * 1e-2, maxiter=maxiter)
        except spla.ArpackNoConvergence as exc:
            raise ConvergenceFailure(
                f"Lanczos converged {len(exc.eigenvalues)} of {k} pairs",
                iterations=maxiter,
                converged=len(exc.eigenvalues),
            ) from exc
        order = np.argsort(w)
        w, vecs = w[order], vecs[:, order]
    res = np.linalg.norm(A @ vecs - vecs * w, axis=0)
    worst = float(res.max()) if res.size else 0.0
    if worst > tol:
        raise ConvergenceFailure(f"eigen-residual {worst:.3e} exceeds {tol:.1e}", residual=worst)
    loc = None if probe_radius is None else _mass_fraction(op, vecs, probe_radius, probe_center)
    return EigenReport(_box_size(op), op.bc_kind, w, vecs, worst, loc, probe_radius)


def operator_eigenvalues(op: AssembledOperator, select_range: tuple[float, float] | None = None) -> np.ndarray:
    """All eigenvalues, using the banded solver when the bandwidth is small."""
    A = op.matrix.tocoo()
    n = A.shape[0]
    bw = int(np.max(np.abs(A.row - A.col))) if A.nnz else 0
    if n > 1500 and bw < n // 8:
        ab = np.zeros((bw + 1, n))
        csr = op.matrix
        for k in range(bw + 1):
            ab[bw - k, k:] = csr.diagonal(k)
        w = scipy.linalg.eig_banded(ab, lower=False, eigvals_only=True)
    else:
        w = scipy.linalg.eigvalsh(op.matrix.toarray())
    w = np.sort(w)
    if select_range is not None:
        lo, hi = select_range
        w = w[(w > lo) & (w < hi)]
    return w


def dirichlet_chain_eigenvalues(L: int) -> np.ndarray:
    """1 - cos(k pi / (L+1)), halved: the spectrum of -Lap on a chain of L sites."""
    k = np.arange(1, L + 1)
    return 0.5 * (1 - np.cos(k * np.pi / (L + 1)))


def _ids_1d(E):
    return (2 / np.pi) * np.arcsin(np.sqrt(np.clip(E, 0.0, 1.0)))


def integrated_density_of_states(E: float, d: int) -> float:
    """Fraction of the torus where h <= E (infinite-lattice IDS)."""
    if d == 1:
        return float(_ids_1d(E))
    if E <= 0:
        return 0.0
    if E >= d:
        return 1.0
    # h = sin^2(theta/2) + rest, theta uniform on [0, pi]
    kinks = []
    for k in range(d):
        t = E - k
        if 0 < t < 1:
            kinks.append(2 * math.asin(math.sqrt(t)))
    val, _ = scipy.integrate.quad(
        lambda th: integrated_density_of_states(E - math.sin(th / 2) ** 2, d - 1),
        0.0,
        math.pi,
        points=sorted(kinks) or None,
        limit=200,
        epsabs=1e-11,
    )
    return val / math.pi


@dataclass(frozen=True)
class ProbeRow:
    box_size: int
    sites: int
    counts: tuple[int, ...]
    discrepancy: float
    outliers: int


def _probe_operator(domain, V, bc_kind, size, robin_c):
    d = V.dimension if V is not None else domain.dimension
    if domain is None:
        return assemble(Box.centered(size, d), V, "whole_space_box")
    if isinstance(domain, ExteriorDomain):
        return assemble(domain.with_radius(size), V, bc_kind, robin_c)
    raise TypeError("domain must be None or an ExteriorDomain")


def essential_spectrum_probe(
    domain: ExteriorDomain | None,
    V: LatticeField,
    bc_kind: str = "whole_space_box",
    box_sizes: Sequence[int] = (10, 20, 40),
    *,
    robin_c=None,
    bins: int = N_BINS,
    outlier_tol: float = 1e-9,
) -> list[ProbeRow]:
    """Eigenvalue histograms over [0, d] against the lattice density of states.

    ``domain=None`` probes Dirichlet truncations of Z^d with ``size`` sites
    per axis; otherwise each size is used as the window radius of the
    exterior domain. The discrepancy is the sup over bin edges of the
    normalized counting function minus the IDS.
    """
    d = V.dimension
    edges = np.linspace(0.0, d, bins + 1)
    ids = np.array([integrated_density_of_states(E, d) for E in edges])
    rows = []
    for size in box_sizes:
        op = _probe_operator(domain, V, bc_kind, size, robin_c)
        w = operator_eigenvalues(op)
        n = len(w)
        counts, _ = np.histogram(np.clip(w, 0, d), bins=edges)
        counting = np.searchsorted(w, edges, side="right") / n
        disc = float(np.max(np.abs(counting - ids)))
        outl = int(np.sum((w < -outlier_tol) | (w > d + outlier_tol)))
        rows.append(ProbeRow(int(size), n, tuple(int(c) for c in counts), disc, outl))
    return rows


# ----------------------------------------------------------------------
# embedded-eigenvalue scan


def cluster_localization(
    eigenvalues: np.ndarray,
    vectors: np.ndarray,
    probe_rows: np.ndarray,
    tol: float = 1e-9,
) -> list[tuple[float, float, int]]:
    """Probe mass per eigenvalue cluster.

    Eigenvalues closer than ``tol`` are grouped. For a group with
    orthonormal eigenvectors Q the reported value is the largest
    eigenvalue of ``Q^T P Q``, the best probe mass over the eigenspace,
    which does not depend on the basis returned by the solver.
    ``probe_rows`` is a boolean row mask or an index array for P.
    Returns ``(mean eigenvalue, localization, multiplicity)`` triples.
    """
    if len(eigenvalues) == 0:
        return []
    order = np.argsort(eigenvalues)
    w = np.asarray(eigenvalues)[order]
    Q = vectors[:, order]
    out = []
    start = 0
    for k in range(1, len(w) + 1):
        if k == len(w) or w[k] - w[k - 1] > tol:
            B = Q[probe_rows, start:k]
            loc = float(np.linalg.eigvalsh(B.conj().T @ B)[-1])
            out.append((float(w[start:k].mean()), min(max(loc, 0.0), 1.0), k - start))
            start = k
    return out


def _chain_modes(L: int) -> tuple[np.ndarray, np.ndarray]:
    k = np.arange(1, L + 1)
    theta = k * np.pi / (L + 1)
    S = math.sqrt(2 / (L + 1)) * np.sin(np.outer(np.arange(1, L + 1), theta))
    return 0.5 * (1 - np.cos(theta)), S


def _mode_rows(S1: np.ndarray, box: Box, sites: Sequence[Site]) -> np.ndarray:
    """Rows of the product sine basis at the given sites."""
    d = box.dimension
    out = np.empty((len(sites), S1.shape[1] ** d))
    for r, n in enumerate(sites):
        row = S1[n[0] - box.lower[0]]
        for j in range(1, d):
            row = np.multiply.outer(row, S1[n[j] - box.lower[j]]).ravel()
        out[r] = row
    return out


def _group(values: np.ndarray, tol: float) -> list[tuple[int, int]]:
    spans = []
    start = 0
    for k in range(1, len(values) + 1):
        if k == len(values) or values[k] - values[k - 1] > tol:
            spans.append((start, k))
            start = k
    return spans


def _secular_clusters(box: Box, V: LatticeField, window, probe_sites, tol: float):
    """Probe mass of box eigenclusters via the sine basis of the free box.

    In the eigenbasis of the free Dirichlet box, H = D + U^T diag(v) U with
    U the basis rows at the q potential sites. Free eigenvectors that
    vanish on the potential support stay eigenvectors (deflation). Every
    other eigenvector has the form y = -(D - E)^{-1} U^T c with c in the
    kernel of I + diag(v) U (D - E)^{-1} U^T, a q x q problem; E comes from
    a banded eigensolve of the full operator.
    """
    L = box.shape[0]
    d = box.dimension
    lam1, S1 = _chain_modes(L)
    D = lam1
    for _ in range(1, d):
        D = np.add.outer(D, lam1).ravel()
    pot = [(n, float(np.real(v))) for n, v in sorted(V.entries.items()) if v != 0]
    psites = list(probe_sites)
    PS = _mode_rows(S1, box, psites)
    lo, hi = window
    blocks = []  # (eigenvalue, vectors in the sine basis)

    order = np.argsort(D, kind="stable")
    Ds = D[order]
    U = _mode_rows(S1, box, [n for n, _ in pot]) if pot else np.zeros((0, len(D)))
    vals = np.array([v for _, v in pot])
    deflated = []
    for a, b in _group(Ds, 1e-10):
        pole = float(Ds[a:b].mean())
        if not lo - 1e-8 < pole < hi + 1e-8:
            continue
        cols = order[a:b]
        Uj = U[:, cols]
        if Uj.shape[0]:
            _, s, vh = np.linalg.svd(Uj, full_matrices=True)
            rank = int(np.sum(s > 1e-9 * max(1.0, float(s[0]) if s.size else 1.0)))
            null = vh[rank:].T
        else:
            null = np.eye(len(cols))
        if null.shape[1]:
            Y = np.zeros((len(D), null.shape[1]))
            Y[cols] = null
            deflated.append((pole, null.shape[1]))
            if lo < pole < hi:
                blocks.append((pole, Y))

    if pot:
        op = assemble(box, V, "whole_space_box")
        E = list(operator_eigenvalues(op, (lo - 1e-8, hi + 1e-8)))
        for pole, mult in deflated:
            for _ in range(mult):
                j = int(np.argmin(np.abs(np.asarray(E) - pole)))
                if abs(E[j] - pole) > 1e-8:
                    raise RuntimeError("deflated eigenvalue not found in the spectrum")
                E.pop(j)
        E = np.sort(np.asarray(E))
        E = E[(E > lo) & (E < hi)]
        q = len(vals)
        for a, b in _group(E, tol):
            e = float(E[a:b].mean())
            G = (U / (D - e)) @ U.T
            M = np.eye(q) + vals[:, None] * G
            _, _, vh = np.linalg.svd(M)
            C = vh[-(b - a):].T
            Y = -(U.T @ C) / (D - e)[:, None]
            blocks.append((e, Y))

    blocks.sort(key=lambda t: t[0])
    out = []
    k = 0
    while k < len(blocks):
        j = k + 1
        while j < len(blocks) and blocks[j][0] - blocks[j - 1][0] <= tol:
            j += 1
        Y = np.hstack([blk[1] for blk in blocks[k:j]])
        Q, _ = np.linalg.qr(Y)
        B = PS @ Q
        loc = float(np.linalg.eigvalsh(B.T @ B)[-1])
        out.append((float(np.mean([blk[0] for blk in blocks[k:j]])), min(max(loc, 0.0), 1.0), Q.shape[1]))
        k = j
    return out


@dataclass(frozen=True)
class ScanRow:
    box_size: int
    in_window: int
    clusters: int
    max_localization: float
    argmax_energy: float


@dataclass(frozen=True)
class EmbeddedScan:
    rows: tuple[ScanRow, ...]
    window: tuple[float, float]
    probe_radius: float
    tolerance: float
    final_threshold: float

    @property
    def localizations(self) -> list[float]:
        return [r.max_localization for r in self.rows]

    @property
    def non_increasing(self) -> bool:
        loc = self.localizations
        return all(b <= a + self.tolerance for a, b in zip(loc, loc[1:]))

    @property
    def final_below(self) -> bool:
        return bool(self.rows) and self.rows[-1].max_localization < self.final_threshold

    @property
    def decaying(self) -> bool:
        return self.non_increasing and self.final_below


def embedded_scan(
    V: LatticeField,
    lambda_window: tuple[float, float] = (0.5, 1.5),
    probe_radius: float | None = None,
    box_sizes: Sequence[int] = (20, 40, 80),
    *,
    domain: ExteriorDomain | None = None,
    bc_kind: str = "whole_space_box",
    robin_c=None,
    method: str = "auto",
    cluster_tol: float = 1e-9,
    tolerance: float = 0.05,
    final_threshold: float = 0.5,
) -> EmbeddedScan:
    """Largest probe mass among eigenclusters with eigenvalue in the window.

    Parameters
    ----------
    V : LatticeField
        Real potential supported inside the probe ball.
    lambda_window : (float, float)
        Open energy window inside (0, d).
    probe_radius : float, optional
        Defaults to the potential support radius plus 4.
    box_sizes : sequence of int
        Sites per axis of the Dirichlet truncation, or window radii when an
        exterior ``domain`` is given.
    method : {"auto", "dense", "secular"}
        ``secular`` (whole-space boxes only) works in the sine basis of the
        free box and needs only eigenvalues of the full operator; ``auto``
        picks it for boxes above 1500 sites.
    """
    d = V.dimension
    lo, hi = lambda_window
    if not 0 < lo < hi < d:
        raise ValueError(f"window must lie inside (0, {d})")
    if not V.is_real:
        raise ValueError("potential must be real")
    r = V.support_radius + 4 if probe_radius is None else float(probe_radius)
    if V.support_radius > r:
        raise ValueError("potential must be supported inside the probe radius")
    if method not in ("auto", "dense", "secular"):
        raise ValueError("method must be auto, dense or secular")
    rows = []
    for size in box_sizes:
        if domain is None:
            box = Box.centered(size, d)
            if any(n not in box for n in V.support):
                raise ValueError(f"potential does not fit in box {size}")
            use_secular = method == "secular" or (method == "auto" and len(box) > 1500)
            if use_secular:
                probe = [n for n in box.sites() if site_norm(n) <= r]
                clusters = _secular_clusters(box, V, (lo, hi), probe, cluster_tol)
                rows.append(_scan_row(size, clusters))
                continue
            op = assemble(box, V, "whole_space_box")
        else:
            if method == "secular":
                raise ValueError("the secular method needs a whole-space box")
            op = assemble(domain.with_radius(size), V, bc_kind, robin_c)
        w, vecs = scipy.linalg.eigh(op.matrix.toarray(), driver="evd")
        sel = (w > lo) & (w < hi)
        mask = np.array([site_norm(n) <= r for n in op.site_index])
        clusters = cluster_localization(w[sel], vecs[:, sel], mask, cluster_tol)
        rows.append(_scan_row(size, clusters))
    return EmbeddedScan(tuple(rows), (float(lo), float(hi)), r, tolerance, final_threshold)


def _scan_row(size, clusters) -> ScanRow:
    if not clusters:
        return ScanRow(int(size), 0, 0, 0.0, float("nan"))
    best = max(clusters, key=lambda c: c[1])
    return ScanRow(int(size), int(sum(c[2] for c in clusters)), len(clusters), best[1], best[0])
