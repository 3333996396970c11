"""Discrete norm estimators vs brute-force oracles."""

import numpy as np
import pytest

from nltransport.errors import DomainError, UnsupportedStructureError
from nltransport.fields import (
    compute_norm_report,
    holder_seminorm,
    lattice_field,
    scattered_field,
    sup_norm,
    vanishing_modulus,
    zygmund_seminorm,
)


def brute_holder(points, values, gamma):
    best = 0.0
    for a in range(len(values)):
        for b in range(a + 1, len(values)):
            d = np.linalg.norm(points[a] - points[b])
            best = max(best, abs(values[a] - values[b]) / d**gamma)
    return best


def brute_zygmund_1d(xs, values, spacing):
    best = 0.0
    npts = len(xs)
    for c in range(npts):
        for m in range(1, npts):
            if c - m < 0 or c + m >= npts:
                continue
            num = abs(values[c + m] - 2.0 * values[c] + values[c - m])
            best = max(best, num / (m * spacing))
    return best


def test_identity_on_dyadic_lattice_gamma_half():
    xs = np.array([0.0, 0.25, 0.5, 0.75, 1.0])
    f = lattice_field(0.0, 0.25, xs.copy())
    got = holder_seminorm(f, 0.5)
    assert got == brute_holder(f.points, f.values, 0.5)
    assert got == 1.0  # attained at |x - y| = 1


def test_constant_field_zero():
    f = lattice_field(0.0, 0.25, np.full(9, 3.7))
    assert holder_seminorm(f, 0.5) == 0.0


def test_sqrt_profile_seminorm_near_one():
    xs = np.linspace(-1.0, 1.0, 101)
    f = scattered_field(xs, np.sqrt(np.abs(xs)))
    got = holder_seminorm(f, 0.5)
    assert got == pytest.approx(brute_holder(f.points, f.values, 0.5), abs=0.0)
    assert got == pytest.approx(1.0, abs=1e-9)  # attained against y = 0


def test_allpairs_matches_bruteforce_on_random_scattered():
    rng = np.random.default_rng(12)
    pts = rng.uniform(-1, 1, size=(60, 2))
    vals = np.sin(3 * pts[:, 0]) * np.cos(2 * pts[:, 1])
    f = scattered_field(pts, vals)
    assert holder_seminorm(f, 0.37) == brute_holder(pts, vals, 0.37)


def test_homogeneous_scaling_power_of_two_exact():
    rng = np.random.default_rng(5)
    pts = rng.uniform(-1, 1, size=(40, 2))
    vals = rng.normal(size=40)
    f = scattered_field(pts, vals)
    g = scattered_field(pts, 4.0 * vals)
    assert holder_seminorm(g, 0.5) == 4.0 * holder_seminorm(f, 0.5)


def test_subsampled_lower_bounds_exact_and_keeps_near_pairs():
    xs = np.linspace(-1.0, 1.0, 4001)
    vals = np.sqrt(np.abs(xs))
    f = lattice_field(-1.0, xs[1] - xs[0], vals)
    exact = holder_seminorm(f, 0.5, pair_budget=None)
    sub = holder_seminorm(f, 0.5, pair_budget=500)
    assert sub <= exact + 1e-15
    # the sup is driven by the near pairs against 0, which are never dropped
    assert sub >= 0.95 * exact


def test_holder_preconditions():
    f = lattice_field(0.0, 0.5, np.array([1.0, 2.0, 3.0]))
    with pytest.raises(DomainError):
        holder_seminorm(f, 1.0)
    with pytest.raises(DomainError):
        holder_seminorm(f, 0.0)
    single = scattered_field(np.array([[0.0]]), np.array([1.0]))
    with pytest.raises(DomainError):
        holder_seminorm(single, 0.5)
    with pytest.raises(DomainError):
        scattered_field(np.array([[0.0], [0.0]]), np.array([1.0, 1.0]))


def test_zygmund_affine_exactly_zero():
    xs = np.arange(9) * 0.25 - 1.0
    f = lattice_field(-1.0, 0.25, 1.5 * xs + 0.5)
    assert zygmund_seminorm(f) == 0.0


def test_zygmund_abs_profile_exactly_two():
    xs = np.arange(-10, 11) * 0.1
    f = lattice_field(xs[0], 0.1, np.abs(xs))
    got = zygmund_seminorm(f)
    assert got == brute_zygmund_1d(xs, np.abs(xs), 0.1)
    assert got == 2.0  # stencil centered at 0


def test_zygmund_square_profile():
    # second difference of x^2 is exactly 2 h^2; the widest admissible
    # stencil on [-1, 1] has half-width 1, so the sup ratio is 2
    xs = np.arange(-8, 9) * 0.125
    f = lattice_field(xs[0], 0.125, xs**2)
    got = zygmund_seminorm(f)
    assert got == brute_zygmund_1d(xs, xs**2, 0.125)
    assert got == pytest.approx(2.0, rel=1e-12)


def test_zygmund_2d_diagonal_stencils_against_bruteforce():
    rng = np.random.default_rng(3)
    vals = rng.normal(size=(7, 7))
    f = lattice_field([0.0, 0.0], 0.5, vals)
    # brute force over multiples of the axis and diagonal directions (the
    # stencil family the estimator is contracted to search)
    best = 0.0
    for dx, dy in ((1, 0), (0, 1), (1, 1), (1, -1)):
        for mult in range(1, 7):
            ox, oy = mult * dx, mult * dy
            for cx in range(7):
                for cy in range(7):
                    px, py = cx + ox, cy + oy
                    mx, my = cx - ox, cy - oy
                    if not (0 <= px < 7 and 0 <= py < 7 and 0 <= mx < 7 and 0 <= my < 7):
                        continue
                    num = abs(vals[px, py] - 2 * vals[cx, cy] + vals[mx, my])
                    best = max(best, num / (0.5 * np.hypot(ox, oy)))
    assert zygmund_seminorm(f) == pytest.approx(best, rel=1e-13)


def test_zygmund_3d_against_bruteforce():
    from itertools import product as iproduct

    rng = np.random.default_rng(9)
    vals = rng.normal(size=(5, 5, 5))
    f = lattice_field([0.0, 0.0, 0.0], 0.25, vals)
    dirs = [d for d in iproduct((-1, 0, 1), repeat=3) if any(d)]
    best = 0.0
    for d in dirs:
        for mult in range(1, 5):
            off = tuple(mult * o for o in d)
            for c in iproduct(range(5), repeat=3):
                p = tuple(c[a] + off[a] for a in range(3))
                m = tuple(c[a] - off[a] for a in range(3))
                if not all(0 <= v < 5 for v in p + m):
                    continue
                num = abs(vals[p] - 2 * vals[c] + vals[m])
                best = max(best, num / (0.25 * np.sqrt(sum(o * o for o in off))))
    assert zygmund_seminorm(f) == pytest.approx(best, rel=1e-13)


def test_zygmund_requires_lattice():
    f = scattered_field(np.array([[0.0], [0.3], [1.0]]), np.zeros(3))
    with pytest.raises(UnsupportedStructureError):
        zygmund_seminorm(f)


def test_zygmund_bounded_by_twice_lipschitz():
    # |f(x+h) - 2 f(x) + f(x-h)| <= 2 Lip(f) |h|; sin has Lip = 1
    xs = np.linspace(-2.0, 2.0, 81)
    f = lattice_field(xs[0], xs[1] - xs[0], np.sin(xs))
    assert zygmund_seminorm(f) <= 2.0 + 1e-9


def test_vanishing_modulus_gaussian_decays():
    xs = np.linspace(-3.0, 3.0, 301)
    f = lattice_field(xs[0], xs[1] - xs[0], np.exp(-(xs**2)))
    levels = [2.0**-k for k in range(7)]
    rep = vanishing_modulus(f, 0.5, levels)
    hs = [h for h, _ in rep.holder]
    ws = [w for _, w in rep.holder]
    assert hs == sorted(hs)
    assert all(ws[i] <= ws[i + 1] + 1e-15 for i in range(len(ws) - 1))
    # Gaussian is Lipschitz with constant sqrt(2/e): omega(h) <= Lip * h^{1/2}
    lip = np.sqrt(2.0 / np.e)
    for h, w in rep.holder:
        assert w <= lip * h**0.5 * (1 + 1e-9)
    assert ws[0] <= 0.5 * ws[-1]  # decay toward 0


def test_vanishing_modulus_sqrt_no_decay():
    xs = np.linspace(-1.0, 1.0, 401)
    f = lattice_field(xs[0], xs[1] - xs[0], np.sqrt(np.abs(xs)))
    rep = vanishing_modulus(f, 0.5, [2.0**-k for k in range(7)])
    assert all(w >= 0.9 for _, w in rep.holder)  # not in the little space


def test_vanishing_modulus_constant_zero():
    xs = np.linspace(0.0, 1.0, 33)
    f = lattice_field(0.0, xs[1] - xs[0], np.ones_like(xs))
    rep = vanishing_modulus(f, 0.5, [0.25, 0.5, 1.0])
    assert all(w == 0.0 for _, w in rep.holder)


def test_zygmund_modulus_separates_little_class():
    # smooth field: second-difference modulus vanishes with the scale;
    # the |x| kink keeps it pinned at 2 at every scale
    levels = [2.0**-k for k in range(5)]
    xs = np.arange(-40, 41) * 0.025
    smooth = lattice_field(xs[0], 0.025, np.cos(3 * xs))
    rep_s = vanishing_modulus(smooth, 0.5, levels)
    zw = [w for _, w in rep_s.zygmund]
    assert zw[0] <= 0.2 * zw[-1]  # decays toward 0: little-Zygmund behavior
    kink = lattice_field(xs[0], 0.025, np.abs(xs))
    rep_k = vanishing_modulus(kink, 0.5, levels)
    assert all(w == 2.0 for _, w in rep_k.zygmund)  # no decay at the kink


def test_modulus_at_diameter_equals_seminorm():
    rng = np.random.default_rng(8)
    pts = rng.uniform(0, 1, size=(50, 2))
    vals = rng.normal(size=50)
    f = scattered_field(pts, vals)
    rep = vanishing_modulus(f, 0.4, [2.0])  # level beyond the diameter
    assert rep.holder[0][1] == holder_seminorm(f, 0.4)


def test_norm_report_fields():
    xs = np.linspace(-1.0, 1.0, 41)
    f = lattice_field(xs[0], xs[1] - xs[0], np.cos(xs))
    rep = compute_norm_report(f, 0.5)
    assert rep.sup_norm == sup_norm(f) == pytest.approx(1.0, abs=1e-12)
    assert rep.zygmund_seminorm is not None
    assert rep.gamma == 0.5
    assert len(rep.vanishing_modulus) == 7


def test_support_radius_lattice():
    vals = np.zeros((11, 11))
    vals[3:8, 3:8] = 1.0
    f = lattice_field([-0.5, -0.5], 0.1, vals)
    assert f.support_radius == pytest.approx(np.sqrt(25 * 0.01))
