"""Empirical verification of the Holder and Zygmund inequality lemmas.

Constant-free inequalities (products, algebra norm, composition with the
analytic sup of the deformation derivative) are asserted exactly on the
discrete samples, up to floating-point tolerance: each discrete quotient
obeys the same algebraic identities as the continuum one, so a genuine
violation indicates a bug, not discretization error. Constant-bearing
inequalities only have their empirical ratios recorded and checked
against a fixed harness bound.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .fields import (
    holder_seminorm,
    lattice_field,
    scattered_field,
    sup_norm,
    zygmund_seminorm,
)
from .synth import random_diffeo, random_smooth_field

__all__ = [
    "HolderLemmaReport",
    "ZygmundLemmaReport",
    "verify_holder_inequalities",
    "verify_zygmund_inequalities",
    "HARNESS_RATIO_BOUND",
    "VIOLATION_TOL",
]

HARNESS_RATIO_BOUND = 10.0  # cap for constant-bearing inequality ratios
VIOLATION_TOL = 1e-9  # discretization tolerance for constant-free inequalities

_LATTICE_POINTS = 161
_HALF_WIDTH = float(np.pi)


@dataclass
class HolderLemmaReport:
    trials: int
    gamma: float
    seed: int
    max_violation: dict = field(default_factory=dict)  # inequality -> worst LHS - RHS (normalized)
    ratios: dict = field(default_factory=dict)  # inequality -> list of recorded ratios
    failures: list = field(default_factory=list)  # (trial, inequality, violation)

    @property
    def passed(self) -> bool:
        return not self.failures


@dataclass
class ZygmundLemmaReport:
    trials: int
    seed: int
    spacings: tuple[float, float]
    ratios: dict = field(default_factory=dict)  # inequality -> {spacing: list of ratios}
    failures: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures


def _norm_gamma(points, values, gamma):
    f = scattered_field(points, values)
    return sup_norm(f), holder_seminorm(f, gamma, pair_budget=None)


def verify_holder_inequalities(trials: int, gamma: float, seed: int = 0) -> HolderLemmaReport:
    """Random-field check of the product / algebra / composition inequalities.

    Asserted (constant-free): |fg|_g <= sup f |g|_g + |f|_g sup g;
    ||fg||_g <= ||f||_g ||g||_g; |f o X|_g <= |f|_g sup|DX|^g where f's
    seminorm is taken over the mapped sample points. Recorded only:
    composition and inverse-composition norm ratios (unspecified constants).
    """
    if trials < 0:
        raise DomainError("trials must be >= 0")
    if not (0.0 < gamma < 1.0):
        raise DomainError(f"gamma must lie in (0, 1), got {gamma}")
    rng = np.random.default_rng(seed)
    alphas = np.linspace(-_HALF_WIDTH, _HALF_WIDTH, _LATTICE_POINTS)
    rep = HolderLemmaReport(trials=trials, gamma=gamma, seed=seed)
    names = ["SNprod", "SNaAlgebra", "SNaComp"]
    rep.max_violation = {k: -np.inf for k in names}
    rep.ratios = {"NaComp": [], "NaCompInversa": []}

    def record(trial, name, lhs, rhs):
        viol = (lhs - rhs) / max(1.0, abs(rhs))
        rep.max_violation[name] = max(rep.max_violation[name], viol)
        if viol > VIOLATION_TOL:
            rep.failures.append((trial, name, float(viol)))

    for trial in range(trials):
        f = random_smooth_field(rng)
        g = random_smooth_field(rng)
        X = random_diffeo(rng)

        fv, gv = f(alphas), g(alphas)
        pts = alphas[:, None]
        sup_f, semi_f = _norm_gamma(pts, fv, gamma)
        sup_g, semi_g = _norm_gamma(pts, gv, gamma)
        sup_fg, semi_fg = _norm_gamma(pts, fv * gv, gamma)

        record(trial, "SNprod", semi_fg, sup_f * semi_g + semi_f * sup_g)
        record(trial, "SNaAlgebra", sup_fg + semi_fg, (sup_f + semi_f) * (sup_g + semi_g))

        mapped = X(alphas)
        comp_vals = f(mapped)
        sup_fm, semi_fm = _norm_gamma(mapped[:, None], comp_vals, gamma)
        _, semi_comp = _norm_gamma(pts, comp_vals, gamma)
        record(trial, "SNaComp", semi_comp, semi_fm * X.sup_deriv**gamma)

        # ||X||_{1,gamma}: discrete sup|X| + analytic sup|DX| + discrete |DX|_gamma
        dx = X.deriv(alphas)
        _, semi_dx = _norm_gamma(pts, dx, gamma)
        nua_x = float(np.max(np.abs(mapped))) + X.sup_deriv + semi_dx
        na_comp = sup_fm + semi_comp
        na_f_mapped = sup_fm + semi_fm
        rep.ratios["NaComp"].append(na_comp / (na_f_mapped * (1.0 + nua_x**gamma) + 1e-300))

        # f o X^{-1} sampled at the mapped points carries the values f(alpha)
        sup_inv, semi_inv = _norm_gamma(mapped[:, None], fv, gamma)
        na_f = sup_f + semi_f
        rep.ratios["NaCompInversa"].append(
            (sup_inv + semi_inv) / (na_f * (1.0 + nua_x ** (gamma * 1.0)) + 1e-300)
        )

    for name, vals in rep.ratios.items():
        if any(not np.isfinite(v) or v > HARNESS_RATIO_BOUND for v in vals):
            rep.failures.append((-1, name, float(np.max(vals))))
    return rep


def _zygmund_ratios_at(spacing: float, f, g, X, gamma: float = 0.5):
    npts = int(round(2 * _HALF_WIDTH / spacing)) + 1
    alphas = np.linspace(-_HALF_WIDTH, _HALF_WIDTH, npts)
    h = alphas[1] - alphas[0]
    ff = lattice_field(alphas[0], h, f(alphas))
    gf = lattice_field(alphas[0], h, g(alphas))
    fgf = lattice_field(alphas[0], h, f(alphas) * g(alphas))
    nz_f = sup_norm(ff) + zygmund_seminorm(ff)
    nz_g = sup_norm(gf) + zygmund_seminorm(gf)
    nz_fg = sup_norm(fgf) + zygmund_seminorm(fgf)
    algebra = nz_fg / (nz_f * nz_g + 1e-300)

    mapped = X(alphas)
    comp = lattice_field(alphas[0], h, f(mapped))
    semi_comp = zygmund_seminorm(comp)
    # f's own seminorm on a lattice covering the range of X, same spacing
    lo, hi = float(np.min(mapped)), float(np.max(mapped))
    m = int(np.ceil((hi - lo) / h)) + 1
    xs = lo + h * np.arange(m)
    semi_f = zygmund_seminorm(lattice_field(lo, h, f(xs)))
    dx = X.deriv(alphas)
    semi_dx = holder_seminorm(scattered_field(alphas[:, None], dx), gamma, pair_budget=None)
    nua_x = float(np.max(np.abs(mapped))) + X.sup_deriv + semi_dx
    compo = semi_comp / (semi_f * (1.0 + nua_x) + 1e-300)
    return algebra, compo


def verify_zygmund_inequalities(trials: int, seed: int = 0) -> ZygmundLemmaReport:
    """Record Zygmund algebra / composition ratios at two lattice levels.

    Both inequalities carry unspecified constants, so the check is that
    every ratio stays below the harness bound and is stable (within a
    factor 2) under halving the lattice spacing.
    """
    if trials < 0:
        raise DomainError("trials must be >= 0")
    rng = np.random.default_rng(seed)
    h_coarse = 2 * _HALF_WIDTH / (_LATTICE_POINTS - 1)
    h_fine = h_coarse / 2.0
    rep = ZygmundLemmaReport(trials=trials, seed=seed, spacings=(h_coarse, h_fine))
    rep.ratios = {
        "Zalgebra": {h_coarse: [], h_fine: []},
        "comp": {h_coarse: [], h_fine: []},
    }
    for trial in range(trials):
        f = random_smooth_field(rng)
        g = random_smooth_field(rng)
        X = random_diffeo(rng)
        for h in (h_coarse, h_fine):
            alg, comp = _zygmund_ratios_at(h, f, g, X)
            rep.ratios["Zalgebra"][h].append(alg)
            rep.ratios["comp"][h].append(comp)
        for name in ("Zalgebra", "comp"):
            a = rep.ratios[name][h_coarse][-1]
            b = rep.ratios[name][h_fine][-1]
            if not (np.isfinite(a) and np.isfinite(b)):
                rep.failures.append((trial, name, float("nan")))
                continue
            if a > HARNESS_RATIO_BOUND or b > HARNESS_RATIO_BOUND:
                rep.failures.append((trial, name, float(max(a, b))))
            elif max(a, b) > 1e-12 and not (0.5 <= (a + 1e-300) / (b + 1e-300) <= 2.0):
                rep.failures.append((trial, name + ":refinement", float(a / b)))
    return rep
