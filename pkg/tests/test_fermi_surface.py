from __future__ import annotations

import itertools
import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, strategies as st

from discrete_rellich.fermi_surface import (
    H_identity_residual,
    H_lambda,
    TorusPoint,
    grad_h,
    h_cos_form,
    h_eval,
    reduce_angle,
    sample_fermi,
    singular_points,
)

angles = st.floats(-10, 10, allow_nan=False)


def test_h_examples():
    assert h_eval([0.0, 0.0]) == 0
    assert h_eval([math.pi] * 3) == pytest.approx(3, abs=1e-15)
    assert h_eval([math.pi / 2, math.pi / 2]) == pytest.approx(1, abs=1e-15)


@given(st.lists(angles, min_size=1, max_size=4))
def test_h_forms_agree_and_band(x):
    assert abs(h_eval(x) - h_cos_form(x)) <= 1e-14 * max(1, len(x))
    assert 0 <= h_eval(x) <= len(x)


@given(st.lists(angles, min_size=2, max_size=4), st.randoms())
def test_h_symmetries(x, r):
    y = list(x)
    r.shuffle(y)
    y[0] = -y[0]
    assert h_eval(x) == pytest.approx(h_eval(y), abs=1e-14)


def test_grad_central_difference(rng):
    step = 1e-6
    for _ in range(100):
        x = rng.uniform(-np.pi, np.pi, 3)
        fd = np.array([(h_eval(x + step * e) - h_eval(x - step * e)) / (2 * step) for e in np.eye(3)])
        assert np.max(np.abs(fd - grad_h(x))) <= 1e-8
    assert np.allclose(grad_h([math.pi / 2, 0]), [0.5, 0])
    for c in itertools.product((0, math.pi), repeat=3):
        assert np.allclose(grad_h(c), 0, atol=1e-15)


def test_reduce_angle_keeps_pi():
    assert reduce_angle(math.pi) == math.pi
    assert reduce_angle(-math.pi) == math.pi
    assert reduce_angle(3 * math.pi / 2) == pytest.approx(-math.pi / 2)
    assert TorusPoint((7.0, -math.pi)).coords[1] == math.pi


def _corner_oracle(lam, d):
    out = []
    for c in itertools.product((0.0, math.pi), repeat=d):
        if round(sum(math.sin(t / 2) ** 2 for t in c), 12) == lam:
            out.append(c)
    return out


@pytest.mark.parametrize("d", [1, 2, 3, 4])
def test_singular_points_match_corner_scan(d):
    for k in range(1, d):
        got = [p.coords for p in singular_points(k, d)]
        assert got == _corner_oracle(k, d)
        assert len(got) == math.comb(d, k)
    assert singular_points(0.7, max(d, 2)) == []


def test_singular_point_examples():
    assert [p.coords for p in singular_points(1, 2)] == [(0.0, math.pi), (math.pi, 0.0)]
    pts = {p.coords for p in singular_points(2, 3)}
    assert pts == {(0.0, math.pi, math.pi), (math.pi, 0.0, math.pi), (math.pi, math.pi, 0.0)}
    with pytest.raises(ValueError):
        singular_points(2, 2)


@pytest.mark.parametrize("lam,d", [(0.3, 2), (1.0, 2), (1.7, 2), (1.0, 3), (2.2, 3), (1.5, 4)])
def test_sample_residuals(lam, d):
    s = sample_fermi(lam, d, 16 if d == 4 else 32)
    assert len(s) > 0 and s.residuals().max() <= 1e-10
    g = np.linalg.norm(grad_h(s.points), axis=1)
    assert g.min() > 0


def test_lambda_one_lines():
    s = sample_fermi(1.0, 2, 64)
    x1, x2 = s.points[:, 0], s.points[:, 1]
    # distance to z_2 = +-z_1 + pi modulo 2 pi
    def dist(a):
        return np.abs(reduce_angle(a))
    d = np.minimum(dist(x2 - x1 - math.pi), dist(x2 + x1 - math.pi))
    assert d.max() <= 1e-9
    assert [tuple(p) for p in s.all_points()[-2:]] == [(0.0, math.pi), (math.pi, 0.0)]


def test_small_lambda_circle():
    lam = 0.01
    s = sample_fermi(lam, 2, 64)
    r = np.linalg.norm(s.points, axis=1)
    assert np.allclose(r, 2 * math.sqrt(lam), rtol=0.01)


def test_sample_symmetry():
    s = sample_fermi(0.8, 2, 32)
    pts = {tuple(np.round(p, 9)) for p in s.points}
    for p in list(pts)[:50]:
        assert (round(-p[0], 9), p[1]) in pts or abs(p[0]) == pytest.approx(math.pi)


def test_min_points_and_csv():
    s = sample_fermi(1.3, 2, min_points=1000)
    assert len(s) == 1000
    rows = s.csv_rows()
    assert rows[0] == ["x_1", "x_2", "h_residual", "is_singular"] and len(rows) == 1001


def test_H1_factorization():
    w1, w2 = sp.symbols("w1 w2")
    poly = H_lambda(2, 1.0)
    expr = sum(c * w1 ** e[0] * w2 ** e[1] for e, c in poly.coefficients.items())
    assert sp.simplify(sp.nsimplify(expr) + sp.Rational(1, 4) * (w1 + w2) * (w1 * w2 + 1)) == 0
    rng = np.random.default_rng(1)
    w = rng.normal(size=(100, 2)) + 1j * rng.normal(size=(100, 2))
    assert np.allclose(poly(w), -0.25 * (w[:, 0] + w[:, 1]) * (w[:, 0] * w[:, 1] + 1))


def test_H_identity_complex(rng):
    for d in (1, 2, 3, 4):
        for lam in (0.5, 1.0, d - 0.5):
            z = rng.uniform(-np.pi, np.pi, (200, d)) + 1j * rng.uniform(-1, 1, (200, d))
            assert H_identity_residual(z, lam).max() <= 1e-12


def test_H1_zeros_lie_on_lines(rng):
    # zeros with w1 = -w2 or w1 w2 = -1
    for _ in range(50):
        z1 = complex(rng.uniform(-np.pi, np.pi), rng.uniform(-1, 1))
        for z2 in (z1 + math.pi, -z1 + math.pi):
            w = np.exp(1j * np.array([z1, z2]))
            assert abs(H_lambda(2, 1.0)(w)) <= 1e-12
            assert abs(h_eval(np.array([z1, z2])) - 1) <= 1e-12


def test_symbolic_dimension_limit():
    with pytest.raises(ValueError):
        H_lambda(5, 1.0)
