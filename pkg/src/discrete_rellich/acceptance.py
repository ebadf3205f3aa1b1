"""Acceptance checks, one function per criterion.

Each ``criterion_<k>`` draws its instances from a named random stream,
runs the check and returns a :class:`CriterionResult` that records the
measured quantities next to the pinned tolerances and the time budget.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb
from typing import Callable, Mapping

import numpy as np

from ._random import stream
from .fermi_surface import H_identity_residual, sample_fermi, singular_points
from .lattice_core import (
    Box,
    DisconnectedDomain,
    bounded_domain,
    classify_domain,
    neighbors,
    preset_domain,
    satisfies_cone_condition,
)
from .lattice_operators import LatticeField, apply_schrodinger, assemble, green_residual
from .spectral_lab import embedded_scan
from .torus_harmonic import (
    coefficients,
    decay_condition_verdict,
    geometric_schedule,
    limiting_absorption_solve,
    norms,
    power_law,
    synthesize,
    vanish_on_fermi,
)
from .unique_continuation import build_counterexample, nullspace_certificate

__all__ = ["CriterionResult", "CRITERIA", "run_criterion", "random_animal", "random_potential"]


@dataclass(frozen=True)
class CriterionResult:
    number: int
    title: str
    checks: Mapping[str, bool]
    metrics: Mapping[str, object] = field(default_factory=dict)
    runtime: float = 0.0
    limit: float = math.inf

    @property
    def within_budget(self) -> bool:
        return self.runtime < self.limit

    @property
    def passed(self) -> bool:
        return all(self.checks.values()) and self.within_budget

    def summary(self) -> str:
        state = "PASS" if self.passed else "FAIL"
        failed = [k for k, ok in self.checks.items() if not ok]
        if not self.within_budget:
            failed.append("runtime")
        tail = f" (failed: {', '.join(failed)})" if failed else ""
        return f"[{state}] criterion {self.number}: {self.title} in {self.runtime:.2f}s / {self.limit:g}s{tail}"

    def to_json(self) -> dict:
        return {
            "number": self.number,
            "title": self.title,
            "passed": self.passed,
            "checks": dict(self.checks),
            "metrics": dict(self.metrics),
            "runtime_s": round(self.runtime, 3),
            "limit_s": self.limit,
        }


# ----------------------------------------------------------------------
# instance generators


def random_animal(rng: np.random.Generator, size: int, dimension: int = 2) -> list[tuple[int, ...]]:
    """Connected site set grown by attaching uniformly chosen frontier sites."""
    origin = (0,) * dimension
    sites = [origin]
    seen = {origin}
    frontier = list(neighbors(origin))
    while len(sites) < size:
        k = int(rng.integers(len(frontier)))
        frontier[k], frontier[-1] = frontier[-1], frontier[k]
        nb = frontier.pop()
        if nb in seen:
            continue
        seen.add(nb)
        sites.append(nb)
        frontier.extend(m for m in neighbors(nb) if m not in seen)
    return sites


def random_potential(rng: np.random.Generator, radius: int = 2, dimension: int = 2, scale: float = 1.0) -> LatticeField:
    box = Box.cube(radius, dimension)
    return LatticeField(dimension, {n: float(scale * rng.uniform(-1, 1)) for n in box.sites()})


def _complex_field(rng, sites) -> LatticeField:
    sites = list(sites)
    vals = rng.normal(size=len(sites)) + 1j * rng.normal(size=len(sites))
    return LatticeField(len(sites[0]), dict(zip(sites, vals)))


def _random_obstacle(rng, dimension: int = 2):
    while True:
        blob = random_animal(rng, int(rng.integers(1, 30)), dimension)
        extent = max(abs(c) for n in blob for c in n)
        try:
            return classify_domain(blob, extent + 4, dimension=dimension)
        except DisconnectedDomain:
            continue


def _timed(number: int, title: str, limit: float, body: Callable[[], tuple[dict, dict]]) -> CriterionResult:
    t0 = time.perf_counter()
    checks, metrics = body()
    return CriterionResult(number, title, checks, metrics, time.perf_counter() - t0, limit)


# ----------------------------------------------------------------------
# criteria


def criterion_1(seed: int = 0) -> CriterionResult:
    def body():
        rng = stream(seed, "criterion-1")
        worst = 0.0
        sizes = []
        for _ in range(100):
            d = int(rng.integers(1, 4))
            size = int(rng.integers(1, 401))
            dom = bounded_domain(random_animal(rng, size, d))
            u = _complex_field(rng, dom.sites)
            v = _complex_field(rng, dom.sites)
            worst = max(worst, green_residual(dom, u, v))
            sizes.append(len(dom.sites))
        return {"residual<=1e-12": worst <= 1e-12}, {"max_residual": worst, "max_sites": max(sizes)}

    return _timed(1, "Green identity on random bounded domains", 10.0, body)


def criterion_2(seed: int = 0) -> CriterionResult:
    def body():
        rng = stream(seed, "criterion-2")
        ok = True
        sizes = []
        for _ in range(50):
            dom = _random_obstacle(rng)
            sites = dom.sites
            V = LatticeField(2, {n: float(rng.normal()) for n in sites if rng.random() < 0.1})
            c = {n: float(rng.uniform(0, 2)) for n in dom.boundary}
            for kind in ("dirichlet", "robin"):
                op = assemble(dom, V, kind, c if kind == "robin" else None)
                diff = op.matrix - op.matrix.T
                ok &= diff.count_nonzero() == 0
                sizes.append(op.shape[0])
        return {"exact_symmetry": bool(ok)}, {"instances": 50, "max_rows": max(sizes)}

    return _timed(2, "Dirichlet and Robin matrices are symmetric", 5.0, body)


def criterion_3(seed: int = 0) -> CriterionResult:
    def body():
        rng = stream(seed, "criterion-3")
        box = Box.cube(4, 2)
        ratios = []
        trivial = True
        for _ in range(50):
            V = random_potential(rng, 2, 2, 2.0)
            lam = float(rng.uniform(0.1, 1.9))
            cert = nullspace_certificate(V, lam, box)
            trivial &= cert.trivial
            ratios.append(cert.min_singular_value / cert.scale)
        return {"all_trivial": bool(trivial)}, {"min_sigma_ratio": float(min(ratios)), "threshold": 1e-8}

    return _timed(3, "no finitely supported solutions on [-4,4]^2", 60.0, body)


def criterion_4(seed: int = 0) -> CriterionResult:
    def body():
        ce = build_counterexample()
        dom, u = ce.domain, ce.field
        exact = all(isinstance(v, (int, Fraction)) for v in u.entries.values())
        res = apply_schrodinger(LatticeField(2, {}), ce.lam, u)
        interior_res = max((abs(res[n]) for n in dom.interior), default=Fraction(0))
        boundary_max = max(abs(u[n]) for n in dom.boundary)
        cone = satisfies_cone_condition(dom)
        checks = {
            "rational": exact,
            "interior_residual==0": interior_res == 0,
            "boundary_max==1": boundary_max == 1,
            "nonzero": len(u.support) > 0,
            "cone_fails": not cone.holds,
        }
        return checks, {
            "interior_residual": str(interior_res),
            "boundary_max": str(boundary_max),
            "support": len(u.support),
            "nullity": ce.nullity,
            "cone_violations": len(cone.violations),
        }

    return _timed(4, "staircase counterexample is exact", 1.0, body)


EXPECTED_CONE = {"rectangle": True, "rhombus": True, "zigzag": True, "staircase": False}


def criterion_5(seed: int = 0) -> CriterionResult:
    def body():
        got = {name: satisfies_cone_condition(preset_domain(name)).holds for name in EXPECTED_CONE}
        return {name: got[name] == want for name, want in EXPECTED_CONE.items()}, {"verdicts": got}

    return _timed(5, "cone-condition verdicts on presets", 1.0, body)


def criterion_6(seed: int = 0, N: int = 64) -> CriterionResult:
    def body():
        rng = stream(seed, "criterion-6")
        zero = LatticeField(2, {})
        vanish = 0.0
        recover = 0.0
        points = {}
        for lam in (0.7, 1.0, 1.3):
            sample = sample_fermi(lam, 2, min_points=10_000)
            points[lam] = len(sample.all_points())
            for _ in range(20):
                r = int(rng.integers(1, 5))
                g = _complex_field(rng, Box.cube(r, 2).sites())
                f = apply_schrodinger(zero, lam, g)
                vanish = max(vanish, vanish_on_fermi(f, lam, sample))
                sol = limiting_absorption_solve(f, lam, N)
                sites = set(sol.coefficients.support) | set(g.support)
                recover = max(recover, max(abs(sol.coefficients[n] - g[n]) for n in sites))
        checks = {"fermi_vanish<=1e-10": vanish <= 1e-10, "recovery<=1e-6": recover <= 1e-6}
        return checks, {"max_fermi_value": vanish, "max_recovery_error": recover, "fermi_points": {str(k): v for k, v in points.items()}, "N": N}

    return _timed(6, "Rellich forward test and limiting-absorption recovery", 120.0, body)


def criterion_7(seed: int = 0) -> CriterionResult:
    def body():
        fast = decay_condition_verdict(power_law(-1.5, 2))
        slow = decay_condition_verdict(power_law(-0.5, 2), geometric_schedule(2.0 ** 8, 2.0 ** 12))
        checks = {
            "decaying_satisfied": fast.verdict == "satisfied",
            "slope=-1+-0.15": abs(fast.slope + 1) <= 0.15,
            "flat_violated": slow.verdict == "violated",
            "flat_within_10%": slow.variation <= 0.1,
        }
        return checks, {"slope": fast.slope, "drop": fast.drop, "flat_variation": slow.variation, "flat_verdict": slow.verdict}

    return _timed(7, "decay functional separates power laws", 30.0, body)


def _corner_scan(lam: int, d: int) -> set:
    out = set()
    for k in range(2 ** d):
        corner = tuple(math.pi * ((k >> (d - 1 - j)) & 1) for j in range(d))
        if sum(math.sin(c / 2) ** 2 for c in corner) == lam:
            out.add(corner)
    return out


def criterion_8(seed: int = 0) -> CriterionResult:
    def body():
        checks = {}
        got2 = {p.coords for p in singular_points(1, 2)}
        checks["d2_lam1"] = got2 == {(0.0, math.pi), (math.pi, 0.0)}
        for lam in (1, 2):
            checks[f"d3_lam{lam}_three"] = len(singular_points(lam, 3)) == 3
        checks["non_integer_empty"] = all(not singular_points(lam, d) for d in (2, 3, 4) for lam in (0.5, 1.3, d - 0.25))
        card = True
        for d in range(1, 5):
            for k in range(1, d):
                pts = {p.coords for p in singular_points(k, d)}
                card &= len(pts) == comb(d, k) and pts == _corner_scan(k, d)
        checks["binomial_cardinality"] = card
        return checks, {"d2_lam1": sorted(got2)}

    return _timed(8, "singular sets of the Fermi surface", 1.0, body)


def criterion_9(seed: int = 0) -> CriterionResult:
    def body():
        rng = stream(seed, "criterion-9")
        worst = 0.0
        for d in (2, 3):
            for lam in (0.5, 1.0, 1.5):
                z = rng.uniform(-np.pi, np.pi, (1000, d)) + 1j * rng.uniform(-1, 1, (1000, d))
                worst = max(worst, float(H_identity_residual(z, lam).max()))
        return {"residual<=1e-12": worst <= 1e-12}, {"max_residual": worst}

    return _timed(9, "Laurent polynomial identity for h - lambda", 5.0, body)


def criterion_10(seed: int = 0, box_sizes=(20, 40, 80), trials: int = 10) -> CriterionResult:
    def body():
        rng = stream(seed, "criterion-10")
        rows = []
        ok_mono = ok_final = True
        for _ in range(trials):
            V = random_potential(rng, 2, 2, 1.0)
            scan = embedded_scan(V, (0.5, 1.5), 6.0, box_sizes)
            ok_mono &= scan.non_increasing
            ok_final &= scan.final_below
            rows.append([round(x, 6) for x in scan.localizations])
        return {"non_increasing(tol 0.05)": bool(ok_mono), "final<0.5": bool(ok_final)}, {"localization": rows, "box_sizes": list(box_sizes)}

    return _timed(10, "embedded-eigenvalue localization scan", 300.0, body)


def criterion_11(seed: int = 0, N: int = 32) -> CriterionResult:
    def body():
        rng = stream(seed, "criterion-11")
        parseval = 0.0
        ratios = []
        for _ in range(200):
            r = int(rng.integers(1, 8))
            u = _complex_field(rng, Box.cube(r, 2).sites())
            grid = synthesize(u, N)
            back = coefficients(grid)
            err = max(abs(back[n] - u[n]) for n in set(back.support) | set(u.support))
            err = max(err, abs(grid.l2_norm() - u.norm()) / u.norm())
            parseval = max(parseval, err)
            ratios.append(norms(u).ratio)
        checks = {"parseval<=1e-12": parseval <= 1e-12, "ratio_in_[0.1,10]": 0.1 <= min(ratios) and max(ratios) <= 10}
        return checks, {"max_roundtrip_error": float(parseval), "ratio_min": min(ratios), "ratio_max": max(ratios)}

    return _timed(11, "Parseval and Besov norm equivalence", 30.0, body)


CRITERIA: dict[int, Callable[..., CriterionResult]] = {
    k: globals()[f"criterion_{k}"] for k in range(1, 12)
}


def run_criterion(number: int, seed: int = 0) -> CriterionResult:
    if number not in CRITERIA:
        raise KeyError(f"no criterion {number}; choose 1..{len(CRITERIA)}")
    return CRITERIA[number](seed)
