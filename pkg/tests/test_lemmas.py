"""Inequality lemma verifiers: trivial identities plus random trials."""

import numpy as np

from nltransport.fields import (
    holder_seminorm,
    lattice_field,
    scattered_field,
    sup_norm,
    zygmund_seminorm,
)
from nltransport.lemmas import (
    HARNESS_RATIO_BOUND,
    VIOLATION_TOL,
    verify_holder_inequalities,
    verify_zygmund_inequalities,
)
from nltransport.synth import SineDiffeo


def test_constant_fields_give_equality_in_algebra():
    xs = np.linspace(-1, 1, 21)[:, None]
    one = scattered_field(xs, np.ones(21))
    lhs = sup_norm(one) + holder_seminorm(one, 0.5)
    assert lhs == 1.0  # equality 1 <= 1 in the algebra inequality


def test_product_inequality_sin_cos_brute_force():
    xs = np.linspace(-np.pi, np.pi, 101)
    f, g = np.sin(xs), np.cos(xs)
    pts = xs[:, None]
    semi = lambda v: holder_seminorm(scattered_field(pts, v), 0.5, pair_budget=None)
    lhs = semi(f * g)
    rhs = np.max(np.abs(f)) * semi(g) + semi(f) * np.max(np.abs(g))
    assert lhs <= rhs + 1e-12


def test_identity_composition_is_equality():
    xs = np.linspace(-2, 2, 51)
    ident = SineDiffeo(amp=0.0, freq=1.0, phase=0.0)
    vals = np.tanh(xs)
    semi_comp = holder_seminorm(scattered_field(xs[:, None], vals), 0.5)
    semi_f = holder_seminorm(scattered_field(ident(xs)[:, None], vals), 0.5)
    assert semi_comp == semi_f * ident.sup_deriv**0.5


def test_holder_report_200_trials_all_pass():
    rep = verify_holder_inequalities(200, gamma=0.5, seed=0)
    assert rep.passed, rep.failures
    for name, viol in rep.max_violation.items():
        assert viol <= VIOLATION_TOL, (name, viol)
    assert len(rep.ratios["NaComp"]) == 200
    assert max(rep.ratios["NaComp"]) <= HARNESS_RATIO_BOUND
    assert max(rep.ratios["NaCompInversa"]) <= HARNESS_RATIO_BOUND


def test_holder_report_deterministic():
    a = verify_holder_inequalities(10, gamma=0.5, seed=42)
    b = verify_holder_inequalities(10, gamma=0.5, seed=42)
    assert a.max_violation == b.max_violation
    assert a.ratios == b.ratios


def test_holder_zero_trials_pass():
    rep = verify_holder_inequalities(0, gamma=0.5, seed=0)
    assert rep.passed


def test_affine_factor_leaves_zygmund_to_other_factor():
    # f affine on a dyadic lattice has exactly zero second differences, so
    # the product's stencils are driven by g alone and the ratio is finite
    xs = np.arange(-8, 9) * 0.25
    f = 0.5 * xs + 0.25
    g = np.exp(-(xs**2))
    ff = lattice_field(xs[0], 0.25, f)
    assert zygmund_seminorm(ff) == 0.0
    fg = lattice_field(xs[0], 0.25, f * g)
    assert np.isfinite(zygmund_seminorm(fg))


def test_abs_profile_zygmund_algebra_ratio_bounded():
    xs = np.arange(-40, 41) * 0.05
    f = np.abs(xs)
    g = np.exp(-(xs**2))
    nz = lambda v: sup_norm(lattice_field(xs[0], 0.05, v)) + zygmund_seminorm(
        lattice_field(xs[0], 0.05, v)
    )
    ratio = nz(f * g) / (nz(f) * nz(g))
    assert ratio <= HARNESS_RATIO_BOUND


def test_zygmund_identity_composition_ratio_below_one():
    xs = np.arange(-16, 17) * 0.125
    vals = np.cos(xs)
    semi = zygmund_seminorm(lattice_field(xs[0], 0.125, vals))
    ident_nua = float(np.max(np.abs(xs))) + 1.0  # sup|e| + sup|De|, |De|_g = 0
    ratio = semi / (semi * (1.0 + ident_nua))
    assert ratio <= 1.0


def test_zygmund_report_trials_pass_and_stable():
    rep = verify_zygmund_inequalities(40, seed=0)
    assert rep.passed, rep.failures[:5]
    for name in ("Zalgebra", "comp"):
        for h, vals in rep.ratios[name].items():
            assert len(vals) == 40
            assert max(vals) <= HARNESS_RATIO_BOUND


def test_zygmund_report_deterministic():
    a = verify_zygmund_inequalities(5, seed=9)
    b = verify_zygmund_inequalities(5, seed=9)
    assert a.ratios == b.ratios
