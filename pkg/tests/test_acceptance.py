"""Acceptance gate: one test per criterion, tolerances and time budgets pinned."""

from __future__ import annotations


from discrete_rellich.acceptance import run_criterion


def _check(number):
    result = run_criterion(number, seed=0)
    print(result.summary())
    assert all(result.checks.values()), result.metrics
    assert result.runtime < result.limit, f"runtime {result.runtime:.1f}s over {result.limit}s"
    return result


def test_criterion_01_green_identity():
    r = _check(1)
    assert r.metrics["max_residual"] <= 1e-12 and r.limit == 10


def test_criterion_02_matrix_symmetry():
    assert _check(2).limit == 5


def test_criterion_03_no_compact_solutions():
    r = _check(3)
    assert r.metrics["min_sigma_ratio"] > 1e-8 and r.limit == 60


def test_criterion_04_counterexample_exact():
    r = _check(4)
    assert r.metrics["interior_residual"] == "0" and r.metrics["boundary_max"] == "1" and r.limit == 1


def test_criterion_05_cone_verdicts():
    r = _check(5)
    assert r.metrics["verdicts"] == {"rectangle": True, "rhombus": True, "zigzag": True, "staircase": False}


def test_criterion_06_rellich_forward_and_recovery():
    r = _check(6)
    assert r.metrics["max_fermi_value"] <= 1e-10 and r.metrics["max_recovery_error"] <= 1e-6
    assert all(n >= 10_000 for n in r.metrics["fermi_points"].values()) and r.limit == 120


def test_criterion_07_decay_discrimination():
    r = _check(7)
    assert abs(r.metrics["slope"] + 1) <= 0.15 and r.metrics["flat_variation"] <= 0.1 and r.limit == 30


def test_criterion_08_singular_sets():
    assert _check(8).limit == 1


def test_criterion_09_H_identity():
    r = _check(9)
    assert r.metrics["max_residual"] <= 1e-12 and r.limit == 5


def test_criterion_10_embedded_scan():
    r = _check(10)
    rows = r.metrics["localization"]
    assert len(rows) == 10 and r.metrics["box_sizes"] == [20, 40, 80]
    assert all(b <= a + 0.05 for row in rows for a, b in zip(row, row[1:]))
    assert all(row[-1] < 0.5 for row in rows) and r.limit == 300


def test_criterion_11_besov_machinery():
    r = _check(11)
    assert r.metrics["max_roundtrip_error"] <= 1e-12
    assert 0.1 <= r.metrics["ratio_min"] and r.metrics["ratio_max"] <= 10 and r.limit == 30
