from __future__ import annotations

import math

import numpy as np
import pytest
import scipy.integrate
from hypothesis import given, strategies as st

from discrete_rellich.fermi_surface import sample_fermi
from discrete_rellich.lattice_core import Box
from discrete_rellich.lattice_operators import LatticeField, apply_schrodinger
from discrete_rellich.torus_harmonic import (
    AliasingRisk,
    coefficients,
    decay_condition_verdict,
    decay_curve,
    decay_exponent,
    evaluate,
    geometric_schedule,
    limiting_absorption_solve,
    norms,
    power_law,
    richardson_weights,
    shell_sums,
    synthesize,
    vanish_on_fermi,
)

ZERO2 = LatticeField(2, {})


def test_delta_is_constant():
    g = synthesize(LatticeField.delta((0, 0)), 16)
    assert np.allclose(g.values, 1 / (2 * math.pi), atol=1e-15)


def test_single_mode():
    u = LatticeField.delta((1, 0))
    g = synthesize(u, 16)
    X1, _ = g.mesh()
    assert np.allclose(g.values, np.exp(-1j * X1) / (2 * math.pi), atol=1e-14)
    back = coefficients(g, tol=1e-13)
    assert back.support == {(1, 0)} and abs(back[(1, 0)] - 1) <= 1e-13


def test_roundtrip_and_parseval(rng):
    sites = Box.cube(7, 2).sites()
    u = LatticeField(2, dict(zip(sites, rng.normal(size=len(sites)) + 1j * rng.normal(size=len(sites)))))
    for shift in (None, (0.25, 0.5)):
        g = synthesize(u, 64, shift)
        back = coefficients(g)
        assert max(abs(back[n] - u[n]) for n in set(back.support) | set(u.support)) <= 1e-12
        assert abs(g.l2_norm() - u.norm()) <= 1e-12 * u.norm()


def test_evaluate_matches_grid(rng):
    u = LatticeField(2, {(1, -2): 0.5, (0, 3): 1j})
    g = synthesize(u, 16)
    X1, X2 = g.mesh()
    pts = np.stack([X1.ravel(), X2.ravel()], axis=1)
    assert np.allclose(evaluate(u, pts), g.values.ravel(), atol=1e-14)


def test_aliasing_warning():
    with pytest.warns(AliasingRisk):
        synthesize(LatticeField.delta((9, 0)), 16)


def test_vanish_on_fermi(rng):
    s = sample_fermi(1.0, 2, 64)
    g = LatticeField(2, {n: complex(rng.normal(), rng.normal()) for n in Box.cube(2, 2).sites()})
    assert vanish_on_fermi(apply_schrodinger(ZERO2, 1.0, g), 1.0, s) <= 1e-10
    assert vanish_on_fermi(LatticeField.delta((0, 0)), 1.0, s) == pytest.approx(1 / (2 * math.pi))
    assert vanish_on_fermi(ZERO2, 1.0, s) == 0


def _brute_shells(exponent, R):
    n = np.arange(-R, R + 1)
    m = (n[:, None] ** 2 + n[None, :] ** 2).ravel()
    out = np.zeros(R * R + 1)
    keep = m <= R * R
    np.add.at(out, m[keep], (1.0 + m[keep]) ** exponent)
    return out


def test_shell_sums_match_brute_force():
    assert np.allclose(shell_sums(power_law(-1.5), 40), _brute_shells(-1.5, 40), rtol=1e-13)
    u = LatticeField(2, {(0, 0): 2.0, (3, 4): 1.0, (5, 0): 1j})
    s = shell_sums(u, 6)
    assert s[0] == 4 and s[25] == 2 and s.sum() == 6


def test_delta_norms():
    rep = norms(LatticeField.delta((0, 0)))
    assert all(v == pytest.approx(1) for v in rep.hs_norms.values())
    assert rep.bstar_sup == pytest.approx(1)
    assert all(c >= 0 for _, c in rep.decay_curve)


def _sup_oracle(u, R_max):
    # sup over a dense R grid of (1/R) sum_{|n| < R}, plus right limits at shells
    sites = [n for n in u.support]
    r = np.array([math.hypot(*n) for n in sites])
    w = np.array([abs(u[n]) ** 2 for n in sites])
    grid = np.concatenate([[1.0], np.linspace(1, R_max, 20001), r[(r >= 1) & (r < R_max)] * (1 + 1e-12)])
    return math.sqrt(max(w[r < R].sum() / R for R in grid))


@given(st.integers(0, 10_000))
def test_bstar_sup_matches_dense_scan(seed):
    rng = np.random.default_rng(seed)
    sites = Box.cube(int(rng.integers(1, 6)), 2).sites()
    u = LatticeField(2, dict(zip(sites, rng.normal(size=len(sites)))))
    rep = norms(u, R_max=8)
    assert rep.bstar_sup == pytest.approx(_sup_oracle(u, 8), rel=1e-6)
    assert 0.1 <= rep.ratio <= 10


def test_power_law_norm_ratio_and_inclusion():
    hs = []
    for R_max in (256, 1024, 4096):
        rep = norms(power_law(-2.5), s_list=(1.0,), R_max=R_max)
        assert 0.1 <= rep.ratio <= 10
        hs.append((rep.b_sum, rep.hs_norms[1.0]))
    # B-sum bounded by a fixed multiple of the H^1 norm as the cutoff grows
    ratios = [b / h for b, h in hs]
    assert max(ratios) / min(ratios) < 1.05


def test_decay_verdicts():
    fast = decay_condition_verdict(power_law(-1.5))
    assert fast.verdict == "satisfied" and abs(fast.slope + 1) <= 0.15
    slow = decay_condition_verdict(power_law(-0.5), geometric_schedule(256, 4096))
    assert slow.verdict == "violated" and slow.variation <= 0.1
    mid = decay_condition_verdict(power_law(-0.75))
    assert mid.verdict == "satisfied" and abs(mid.slope + 0.5) <= 0.05
    comp = decay_condition_verdict(LatticeField.delta((1, 1)))
    assert comp.verdict == "satisfied" and comp.slope == pytest.approx(-1)


def test_flat_curve_oracle():
    # sum_{|n|<R} <n>^{-1} ~ 2 pi R
    R = np.array([2.0 ** 10, 2.0 ** 12])
    assert np.allclose(decay_curve(power_law(-0.5), R), 2 * math.pi, rtol=0.02)


def test_schedule_must_be_geometric():
    with pytest.raises(ValueError):
        decay_condition_verdict(power_law(-1.5), [1, 2, 5])


def test_richardson_weights():
    w = richardson_weights([1.0, 0.5, 0.25])
    eps = np.array([1.0, 0.5, 0.25])
    for k in range(3):
        assert np.dot(w, eps ** k) == pytest.approx(1.0 if k == 0 else 0.0, abs=1e-12)


def test_recovery_of_compact_g(rng):
    for lam in (0.7, 1.0, 1.3):
        g = LatticeField(2, {n: complex(rng.normal(), rng.normal()) for n in Box.cube(3, 2).sites()})
        sol = limiting_absorption_solve(apply_schrodinger(ZERO2, lam, g), lam, 64)
        err = max(abs(sol.coefficients[n] - g[n]) for n in set(sol.coefficients.support) | set(g.support))
        assert err <= 1e-6
        assert sol.delta_min > 0


def test_zero_source():
    sol = limiting_absorption_solve(ZERO2, 1.0, 32, 1e-3)
    assert np.all(sol.grid.values == 0)


def _resolvent_oracle(n1, lam, eps):
    """(2 pi)^{-2} int e^{i n1 x1} / (h - lam - i eps) dx, x2 integrated in closed form."""
    def inner(x1):
        A = 1 - lam - 1j * eps - 0.5 * math.cos(x1)
        return 2 * math.pi / (np.sqrt(A - 0.5) * np.sqrt(A + 0.5))

    kink = math.acos(min(1.0, max(-1.0, 2 * (1 - lam) - 1))) if abs(1 - lam) < 1 else None
    pts = None if kink is None else [kink]
    re = scipy.integrate.quad(lambda x: (np.exp(1j * n1 * x) * inner(x)).real, 0, math.pi, points=pts, limit=400, epsabs=1e-12)[0]
    im = scipy.integrate.quad(lambda x: (np.exp(1j * n1 * x) * inner(x)).imag, 0, math.pi, points=pts, limit=400, epsabs=1e-12)[0]
    # integrand is even in x1 up to the phase, so fold [-pi, 0] onto [0, pi]
    re2 = scipy.integrate.quad(lambda x: (np.exp(-1j * n1 * x) * inner(x)).real, 0, math.pi, points=pts, limit=400, epsabs=1e-12)[0]
    im2 = scipy.integrate.quad(lambda x: (np.exp(-1j * n1 * x) * inner(x)).imag, 0, math.pi, points=pts, limit=400, epsabs=1e-12)[0]
    return complex(re + re2, im + im2) / (2 * math.pi) ** 2


def test_resolvent_matches_quadrature_oracle():
    lam, eps = 1.3, 0.05
    sol = limiting_absorption_solve(LatticeField.delta((0, 0)), lam, 256, eps, window=40)
    for n1 in (0, 4, 8, 16):
        assert abs(sol.coefficients[(n1, 0)] - _resolvent_oracle(n1, lam, eps)) <= 1e-8


def test_decay_exponent_of_outgoing_resolvent():
    N = 1024
    sol = limiting_absorption_solve(LatticeField.delta((0, 0)), 1.3, N, 0.5 / N)
    slope = decay_exponent(sol.coefficient_array(), (1, 0), 32, N // 4)
    assert -0.9 <= slope <= -0.2


def test_non_divisible_source_is_not_compact():
    sol = limiting_absorption_solve(LatticeField.delta((0, 0)), 1.3, 256, 0.5 / 256)
    v = decay_condition_verdict(sol.coefficients, geometric_schedule(8, 64))
    assert v.verdict in ("violated", "inconclusive")
