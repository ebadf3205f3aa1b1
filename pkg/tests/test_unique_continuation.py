from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from discrete_rellich.lattice_core import Box, preset_domain, satisfies_cone_condition
from discrete_rellich.lattice_operators import LatticeField, apply_schrodinger
from discrete_rellich.unique_continuation import (
    ConeConditionViolated,
    SweepState,
    advance,
    build_counterexample,
    exact_nullspace,
    nullspace_certificate,
    propagate_zeros,
    slab_of,
    sweep_step,
    sweep_trace,
)

ZERO2 = LatticeField(2, {})


def test_zero_slabs_give_zero():
    z = LatticeField(1, {})
    assert sweep_step(SweepState(1, 1, 0, z, z, 0.7, ZERO2)).entries == {}


def test_sweep_example_and_stencil_residual():
    lam = Fraction(1, 2)
    near = LatticeField(1, {(0,): Fraction(1)})
    far = LatticeField(1, {})
    new = sweep_step(SweepState(1, 1, 1, near, far, lam, ZERO2))
    assert new.entries == {(0,): 2, (-1,): -1, (1,): -1}
    field = LatticeField(2, {**{(0,) + n: v for n, v in new.entries.items()}, (1, 0): Fraction(1)})
    assert apply_schrodinger(ZERO2, lam, field)[(1, 0)] == 0


slab_vals = st.lists(st.fractions(min_value=-3, max_value=3, max_denominator=5), min_size=9, max_size=9)


@given(slab_vals, slab_vals, st.fractions(min_value=Fraction(1, 10), max_value=Fraction(29, 10), max_denominator=10))
def test_reverse_sweep_is_an_involution_d3(a, b, lam):
    sites = Box.cube(1, 2).sites()
    near = LatticeField(2, dict(zip(sites, a)))
    far = LatticeField(2, dict(zip(sites, b)))
    V = LatticeField(3, {(0, 0, 0): Fraction(1, 3), (0, 1, 0): Fraction(-1, 2)})
    new = sweep_step(SweepState(1, 1, 0, near, far, lam, V))
    back = sweep_step(SweepState(1, -1, 0, near, new, lam, V))
    assert back.pruned().entries == far.pruned().entries


@given(st.integers(0, 10_000))
def test_sweep_reproduces_solution_slabs(seed):
    # any field u solves (H - lam) u = f with f its own residual; where f
    # vanishes on the middle slab the sweep must reproduce the next slab
    rng = np.random.default_rng(seed)
    lam = Fraction(int(rng.integers(1, 19)), 10)
    V = LatticeField(2, {(0, k): Fraction(int(rng.integers(-4, 5)), 4) for k in range(-2, 3)})
    near = LatticeField(1, {(k,): Fraction(int(rng.integers(-5, 6))) for k in range(-3, 4)})
    far = LatticeField(1, {(k,): Fraction(int(rng.integers(-5, 6))) for k in range(-3, 4)})
    new = sweep_step(SweepState(1, 1, 0, near, far, lam, V))
    u = LatticeField(2, {**{(1,) + n: v for n, v in far.entries.items()}, **{(0,) + n: v for n, v in near.entries.items()}, **{(-1,) + n: v for n, v in new.entries.items()}})
    res = apply_schrodinger(V, lam, u)
    assert all(res[(0, k)] == 0 for k in range(-8, 9))


def test_certificate_free_case():
    cert = nullspace_certificate(ZERO2, 0.7, Box.cube(3, 2))
    assert cert.trivial and cert.min_singular_value > cert.threshold
    dense = np.linalg.svd(_dense_constraint(ZERO2, 0.7, Box.cube(3, 2)), compute_uv=False)
    assert cert.min_singular_value == pytest.approx(dense[-1], rel=1e-10)


def _dense_constraint(V, lam, box):
    # independent oracle: apply the operator to each basis delta
    rows = box.grown(1).sites()
    cols = box.sites()
    A = np.zeros((len(rows), len(cols)))
    for j, n in enumerate(cols):
        col = apply_schrodinger(V, lam, LatticeField.delta(n, 1.0))
        A[:, j] = [col[m] for m in rows]
    return A


@given(st.integers(0, 10_000))
def test_certificate_trivial_random(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(2, 4))
    r = 1 if d == 3 else 2
    V = LatticeField(d, {n: float(rng.uniform(-2, 2)) for n in Box.cube(1, d).sites()})
    lam = float(rng.uniform(0.1, d - 0.1))
    cert = nullspace_certificate(V, lam, Box.cube(r, d))
    assert cert.trivial


def test_certificate_endpoint_runs():
    cert = nullspace_certificate(ZERO2, 0.0, Box.cube(2, 2))
    assert cert.min_singular_value >= 0


def test_sweep_trace_is_zero():
    V = LatticeField(2, {(0, 0): 1.0})
    trace = sweep_trace(V, 0.9, Box.cube(3, 2))
    assert [c for c, _ in trace] == list(range(3, -4, -1))
    assert all(n == 0 for _, n in trace)


def test_propagate_rectangle_to_zero(rng):
    dom = preset_domain("rectangle", bounding_radius=12)
    u = LatticeField(2, {n: float(rng.normal()) for n in dom.sites})
    out = propagate_zeros(dom, ZERO2, 1.3, u, 10)
    assert all(v == 0 for v in out.entries.values())
    assert set(out.entries) == set(dom.sites)


def test_propagate_whole_window_is_identity():
    dom = preset_domain("rhombus")
    u = LatticeField(2, {n: 0.0 for n in dom.sites})
    assert propagate_zeros(dom, ZERO2, 0.8, u, lambda n: True).entries == u.entries


def test_propagate_refuses_staircase():
    ce = build_counterexample()
    with pytest.raises(ConeConditionViolated):
        propagate_zeros(ce.domain, ZERO2, Fraction(1, 2), ce.field, 10)


def test_propagation_on_staircase_leaves_counterexample():
    ce = build_counterexample()
    out = propagate_zeros(ce.domain, ZERO2, Fraction(1, 2), ce.field, 10, require_cone_condition=False)
    assert out[(4, -5)] == 1 and out[(5, -4)] == -1


def test_counterexample_properties():
    ce = build_counterexample()
    assert ce.lam == Fraction(1, 2)
    assert not satisfies_cone_condition(ce.domain)
    assert all(ce.field[n] == 0 for n in ce.domain.interior)
    assert max(abs(v) for v in ce.field.entries.values()) == 1
    assert ce.field[(4, -5)] == 1 and ce.field[(5, -4)] == -1
    for lam in (Fraction(1, 10), Fraction(1, 2), Fraction(19, 10)):
        res = apply_schrodinger(ZERO2, lam, ce.field)
        assert all(res[n] == 0 for n in ce.domain.interior)


def test_exact_nullspace():
    rows = [[1, 1, 0], [0, 1, 1]]
    basis = exact_nullspace(rows, 3)
    assert basis == [[1, -1, 1]]
    assert exact_nullspace([[1, 0], [0, 1]], 2) == []


def test_slab_and_advance():
    u = LatticeField(2, {(1, 0): 1, (1, 2): 3, (0, 0): 5})
    assert slab_of(u, 1, 1).entries == {(0,): 1, (2,): 3}
    st0 = SweepState(1, 1, 1, slab_of(u, 1, 1), slab_of(u, 1, 2), 0.5, ZERO2)
    assert advance(st0).m1 == 0
