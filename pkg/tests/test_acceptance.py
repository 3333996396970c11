"""Acceptance suite: one test per criterion, each printing a PASS line.

Reference resolutions: 2D runs use h = 1/64, dt = 1e-3, T = 1 with about
13k markers. The 3D reference keeps the marker budget (~16k => 25^3
lattice, h = 1/15) and dt = 5e-3; the temporal error is orders of
magnitude below the spatial one there. Heavy runs are shared between
criteria through module-scoped fixtures.
"""

import numpy as np
import pytest

from nltransport.cli import main
from nltransport.experiments import ContinuitySweepConfig, continuity_sweep, zygmund_sweep
from nltransport.fields import holder_seminorm, lattice_field, scattered_field, zygmund_seminorm
from nltransport.flow import build_marker_lattice, initial_state, invert_flow_check, simulate, step_picard, step_rk4
from nltransport.kernels import (
    builtin_kernel_names,
    check_spherical_mean_zero,
    dirac_correction,
    eval_grad_pv,
    eval_kernel,
    get_kernel,
    homogeneity_residual,
)
from nltransport.lemmas import VIOLATION_TOL, verify_holder_inequalities, verify_zygmund_inequalities
from nltransport.presets import make_profile
from nltransport.singular import PVConfig, convolve_S_pv, convolve_T
from nltransport.summation import set_worker_count

REF_H = 1.0 / 64.0
REF_DT = 1e-3
REF_T = 1.0


def ok(name: str, detail: str):
    print(f"\nACCEPTANCE {name}: PASS ({detail})")


# -- shared reference runs -----------------------------------------------------

@pytest.fixture(scope="module")
def bs_reference():
    prof = make_profile("gaussian", 2, sigma=0.3, cutoff=0.8)
    lat = build_marker_lattice(prof, 0.875, REF_H, 0.5)
    rec = simulate(lat, get_kernel("biot-savart-2d"), dt=REF_DT, T=REF_T, delta=20.0)
    assert rec.halt_reason == "completed"
    return prof, lat, rec


@pytest.fixture(scope="module")
def gradn_reference():
    prof = make_profile("mollified-disk", 2, radius=0.4, width=0.08)
    lat = build_marker_lattice(prof, 0.875, REF_H, 0.5)
    rec = simulate(
        lat, get_kernel("grad-newtonian-2d"), dt=REF_DT, T=REF_T, delta=20.0,
        checkpoint_times=(0.2, 0.4, 0.6, 0.8, 1.0),
    )
    assert rec.halt_reason == "completed"
    return prof, lat, rec


@pytest.fixture(scope="module")
def qg_reference():
    prof = make_profile("gaussian", 3, sigma=0.28, cutoff=0.62)
    lat = build_marker_lattice(prof, 0.8, 0.8 / 12.0, 0.5, n=3)
    rec = simulate(lat, get_kernel("qg-3d"), dt=5e-3, T=REF_T, delta=20.0)
    assert rec.halt_reason == "completed"
    return prof, lat, rec


def gaussian_field_2d(h, box=1.5, sigma=0.4):
    k = int(round(box / h))
    xs = h * np.arange(-k, k + 1)
    gx, gy = np.meshgrid(xs, xs, indexing="ij")
    r2 = gx**2 + gy**2
    vals = np.exp(-r2 / sigma**2)
    vals[r2 > (3.2 * sigma) ** 2] = 0.0
    return lattice_field([xs[0], xs[0]], h, vals)


# -- criteria -------------------------------------------------------------------

def test_criterion_kernel_validity():
    worst_h, worst_fd, worst_mean = 0.0, 0.0, 0.0
    rng = np.random.default_rng(17)
    for name in builtin_kernel_names():
        k = get_kernel(name)
        worst_h = max(worst_h, homogeneity_residual(k, samples=100, seed=3))
        pts = rng.uniform(-2.0, 2.0, size=(60, k.n))
        r = np.linalg.norm(pts, axis=1)
        pts = pts[(r >= 0.5) & (r <= 2.0)]
        step = 1e-5
        for i in range(1, k.n + 1):
            for j in range(1, k.n + 1):
                e = np.zeros(k.n)
                e[i - 1] = step
                fd = (eval_kernel(k, pts + e)[:, j - 1] - eval_kernel(k, pts - e)[:, j - 1]) / (2 * step)
                got = eval_grad_pv(k, i, j, pts)
                rel = np.max(np.abs(got - fd) / np.maximum(np.abs(fd), 1e-8))
                worst_fd = max(worst_fd, float(rel))
                worst_mean = max(worst_mean, abs(check_spherical_mean_zero(k, i, j, 256).mean))
    assert worst_h <= 1e-12
    assert worst_fd <= 1e-6
    assert worst_mean <= 1e-8
    ok("kernel-validity",
       f"homogeneity {worst_h:.2e}, grad-vs-fd {worst_fd:.2e}, spherical mean {worst_mean:.2e}")


def circle_quadrature_oracle(kernel, order=8192):
    theta = 2.0 * np.pi * np.arange(order) / order
    pts = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    kv = kernel.eval(pts)
    w = 2.0 * np.pi / order
    return w * np.einsum("mi,mj->ij", pts, kv)


def test_criterion_dirac_correction():
    bs = get_kernel("biot-savart-2d")
    gn = get_kernel("grad-newtonian-2d")
    c_bs = dirac_correction(bs, 256)
    c_gn = dirac_correction(gn, 256)
    assert np.max(np.abs(c_bs.c - circle_quadrature_oracle(bs))) <= 1e-8
    assert np.max(np.abs(c_gn.c - circle_quadrature_oracle(gn))) <= 1e-8
    assert np.max(np.abs(c_bs.c - np.array([[0.0, 0.5], [-0.5, 0.0]]))) <= 1e-8
    assert np.max(np.abs(c_gn.c - 0.5 * np.eye(2))) <= 1e-8
    tr_bs = abs(np.trace(c_bs.c))
    tr_gn = abs(np.trace(c_gn.c) - 1.0)
    tr_qg = abs(np.trace(dirac_correction(get_kernel("qg-3d"), 256).c))
    tr_gn3 = abs(np.trace(dirac_correction(get_kernel("grad-newtonian-3d"), 256).c) - 1.0)
    assert max(tr_bs, tr_qg) <= 1e-8
    assert max(tr_gn, tr_gn3) <= 1e-8
    ok("dirac-correction",
       f"biot-savart and grad-newtonian matrices within 1e-8; traces {tr_bs:.1e}/{tr_gn:.1e}/{tr_qg:.1e}")


def test_criterion_discrete_dirac_identity():
    # d_i(T_j f) = c_ij f + S_ij f on smooth bumps. Targets are matched
    # lattice nodes and the FD step is 2h; the measured error must drop to
    # at most 1.3 * (previous / 2) when h and eps halve (it quarters: the
    # node-symmetric quadrature beats the O(h + eps) model).
    k = get_kernel("biot-savart-2d")
    c = dirac_correction(k, 128).c
    targets = np.array([[0.125, 0.0625], [-0.1875, 0.25], [0.3125, -0.125], [0.0625, -0.3125]])
    fv = np.exp(-np.sum(targets**2, axis=1) / 0.4**2)
    errs = {}
    for h in (1 / 32, 1 / 64):
        f = gaussian_field_2d(h)
        cfg = PVConfig(epsilon=2 * h, h=h)
        level = 0.0
        for (i, j) in ((1, 2), (2, 1), (1, 1)):
            step = 2 * h
            e = np.zeros(2)
            e[i - 1] = step
            fd = (convolve_T(k, f, targets + e)[:, j - 1] - convolve_T(k, f, targets - e)[:, j - 1]) / (2 * step)
            s = convolve_S_pv(k, i, j, f, targets, cfg).values
            level = max(level, float(np.max(np.abs(fd - (c[i - 1, j - 1] * fv + s)))))
        errs[h] = level
    assert errs[1 / 64] <= 1.3 * (errs[1 / 32] / 2.0)
    assert errs[1 / 64] <= 0.05  # O(h + eps) magnitude at the reference h
    ok("discrete-dirac-identity",
       f"errors {errs[1/32]:.2e} -> {errs[1/64]:.2e} (reduction x{errs[1/32]/errs[1/64]:.1f})")


def test_criterion_potential_theory_oracle():
    k = get_kernel("grad-newtonian-2d")
    tgs = np.array([[0.5, 0.0], [0.3, 0.2], [-0.25, -0.35]])
    expected = tgs / 2.0
    worst = {}
    for h in (1 / 16, 1 / 32, 1 / 64):
        kk = int(round(1.5 / h))
        xs = h * np.arange(-kk, kk + 1)
        gx, gy = np.meshgrid(xs, xs, indexing="ij")
        f = lattice_field([xs[0], xs[0]], h, (gx**2 + gy**2 <= 1.0).astype(float))
        got = convolve_T(k, f, tgs)
        rel = np.linalg.norm(got - expected, axis=1) / np.linalg.norm(expected, axis=1)
        worst[h] = float(np.max(rel))
    assert worst[1 / 64] <= 0.02
    assert worst[1 / 16] > worst[1 / 32] > worst[1 / 64]
    ok("potential-theory-oracle",
       f"disk potential rel errors {worst[1/16]:.3f} > {worst[1/32]:.3f} > {worst[1/64]:.4f} <= 2%")


def test_criterion_stationary_biot_savart(bs_reference):
    prof, lat, rec = bs_reference
    drift = np.max(np.abs(prof(rec.final_state.X) - lat.rho0))
    rel = drift / np.max(np.abs(lat.rho0))
    assert rel <= 0.02
    ok("stationary-biot-savart", f"density drift {rel:.4%} <= 2% at h=1/64, dt=1e-3, T=1")


def test_criterion_stationary_qg(qg_reference):
    prof, lat, rec = qg_reference
    drift = np.max(np.abs(prof(rec.final_state.X) - lat.rho0))
    rel = drift / np.max(np.abs(lat.rho0))
    assert rel <= 0.02
    ok("stationary-qg", f"density drift {rel:.4%} <= 2% at 25^3 markers, T=1")


def test_criterion_liouville_divergence_free(bs_reference, qg_reference):
    _, _, rec2d = bs_reference
    _, _, rec3d = qg_reference
    dev2 = float(np.max(np.abs(rec2d.final_state.detDX - 1.0)))
    dev3 = float(np.max(np.abs(rec3d.final_state.detDX - 1.0)))
    assert dev2 <= 0.02
    assert dev3 <= 0.02
    ok("liouville-divergence-free", f"|det-1| biot-savart {dev2:.4f}, qg {dev3:.4f} <= 0.02")


def test_criterion_liouville_newtonian(gradn_reference):
    prof, lat, rec = gradn_reference
    interior = np.linalg.norm(lat.labels, axis=1) < 0.25  # rho0 = 1 well inside
    got = rec.final_state.detDX[interior]
    expected = np.exp(lat.rho0[interior] * rec.final_state.t)
    rel = float(np.max(np.abs(got - expected) / expected))
    assert rel <= 0.02
    core = lat.rho0 >= 0.999
    ts = [s.time for s in rec.snapshots]
    radii = [float(np.mean(np.linalg.norm(s.X[core], axis=1))) for s in rec.snapshots]
    rate = float(np.polyfit(ts, np.log(radii), 1)[0])
    rate_err = abs(rate * lat.n - 1.0)
    assert rate_err <= 0.01
    ok("liouville-newtonian",
       f"det vs exp(rho0 t) rel {rel:.4f} <= 2%; patch rate n*{rate:.5f} within {rate_err:.3%}")


def test_criterion_integrator_orders():
    prof = make_profile("gaussian", 2, sigma=0.2, cutoff=0.55)
    lat = build_marker_lattice(prof, 0.75, 1 / 16, 0.5)
    k = get_kernel("biot-savart-2d")
    finals = {}
    for dt in (0.2, 0.1, 0.05):
        st = initial_state(lat)
        for _ in range(int(round(1.0 / dt))):
            st, _ = step_rk4(st, lat, k, dt)
        finals[dt] = st.X
    e1 = np.max(np.abs(finals[0.2] - finals[0.1]))
    e2 = np.max(np.abs(finals[0.1] - finals[0.05]))
    rk4_order = float(np.log2(e1 / e2))
    assert rk4_order >= 3.5

    st0 = initial_state(lat)
    gaps = []
    for dt in (0.1, 0.05):
        a, _ = step_rk4(st0, lat, k, dt)
        b, _, _ = step_picard(st0, lat, k, dt, tol=1e-13)
        gaps.append(float(np.max(np.abs(a.X - b.X))))
    picard_ratio = gaps[0] / gaps[1]
    assert 4.0 <= picard_ratio <= 16.0  # O(dt^3) single-step gap

    errs = []
    for dt in (0.05, 0.025):
        rec = simulate(lat, k, dt=dt, T=0.5, delta=10.0, store_velocities=True)
        errs.append(invert_flow_check(rec).roundtrip_error)
    assert errs[1] <= errs[0] / 8.0
    ok("integrator-orders",
       f"rk4 order {rk4_order:.2f} >= 3.5; picard/rk4 gap ratio {picard_ratio:.1f} ~ dt^3; "
       f"round trip drops x{errs[0]/errs[1]:.1f} >= 8")


def test_criterion_norm_estimators():
    rng = np.random.default_rng(4)
    pts = rng.uniform(-1, 1, size=(400, 2))
    vals = np.sin(3 * pts[:, 0]) + 0.5 * np.cos(2 * pts[:, 1])
    f = scattered_field(pts, vals)
    brute = 0.0
    for a in range(399):
        d = np.linalg.norm(pts[a + 1 :] - pts[a], axis=1)
        brute = max(brute, float(np.max(np.abs(vals[a + 1 :] - vals[a]) / d**0.45)))
    assert holder_seminorm(f, 0.45) == brute

    big = rng.uniform(-1, 1, size=(2000, 2))
    bvals = np.tanh(big[:, 0] * big[:, 1])
    g = scattered_field(big, bvals)
    assert holder_seminorm(g, 0.5, pair_budget=2000) == holder_seminorm(g, 0.5, pair_budget=None)

    xs = np.arange(-10, 11) * 0.1
    habs = lattice_field(xs[0], 0.1, np.abs(xs))
    assert zygmund_seminorm(habs) == 2.0
    dyadic = np.arange(-8, 9) * 0.25
    affine = lattice_field(dyadic[0], 0.25, 1.5 * dyadic + 0.5)
    assert zygmund_seminorm(affine) == 0.0
    ok("norm-estimators", "all-pairs == brute force; zygmund(|x|) == 2; zygmund(affine) == 0")


def test_criterion_lemma_suites():
    hol = verify_holder_inequalities(200, gamma=0.5, seed=0)
    assert hol.passed, hol.failures[:3]
    worst = max(hol.max_violation.values())
    assert worst <= VIOLATION_TOL

    zyg = verify_zygmund_inequalities(40, seed=0)
    assert zyg.passed, zyg.failures[:3]
    ratio_max = 0.0
    for name in ("Zalgebra", "comp"):
        levels = sorted(zyg.ratios[name])
        a = np.array(zyg.ratios[name][levels[0]])
        b = np.array(zyg.ratios[name][levels[1]])
        ratio_max = max(ratio_max, float(np.max(a)), float(np.max(b)))
        stability = np.max(np.maximum(a, b) / np.minimum(a, b))
        assert stability <= 2.0
    assert ratio_max <= 10.0

    from nltransport.experiments import lemma_suite

    suite = lemma_suite(seed=0, trials=200)
    assert suite["passed"]
    sio_vals = [max(r["c_eps"], r["c_sna"]) for r in suite["sio"]["rows"]]
    assert max(sio_vals) <= 10.0
    ok("lemma-suites",
       f"200 holder trials pass (worst violation {worst:.1e} <= 1e-9); "
       f"constant ratios <= {max(ratio_max, max(sio_vals)):.2f} <= 10, stable under refinement")


def _check_sweep(res):
    outs = [r.output_distance for r in res.rows]
    assert all(r.admissible_to_T for r in res.rows)
    assert all(outs[m] > outs[m + 1] for m in range(len(outs) - 1))
    assert res.beta > 0
    assert res.r_squared >= 0.9
    assert res.spearman >= 0.9
    return outs


def test_criterion_continuity_holder():
    res = continuity_sweep(ContinuitySweepConfig())
    outs = _check_sweep(res)
    ok("continuity-holder",
       f"outputs strictly decreasing ({outs[0]:.3g} .. {outs[-1]:.3g}), "
       f"beta={res.beta:.3f} > 0, r2={res.r_squared:.3f} >= 0.9, spearman={res.spearman:.2f}")


def test_criterion_continuity_zygmund():
    cfg = ContinuitySweepConfig(
        rho0_name="cusp", rho0_params={"extent": 0.5, "width": 0.05}
    )
    res = zygmund_sweep(cfg)
    outs = _check_sweep(res)
    ok("continuity-zygmund",
       f"outputs strictly decreasing ({outs[0]:.3g} .. {outs[-1]:.3g}), "
       f"beta={res.beta:.3f} > 0, r2={res.r_squared:.3f} >= 0.9, spearman={res.spearman:.2f}")


def test_criterion_determinism(tmp_path):
    argv = [
        "simulate", "--set", "lattice.h=0.0625", "--set", "lattice.half_width=0.75",
        "--set", "rho0.sigma=0.2", "--set", "rho0.cutoff=0.55",
        "--set", "time.dt=0.05", "--set", "time.T=0.25", "--set", "flow.delta=5",
    ]
    outs = []
    for tag, workers in (("a", "1"), ("b", "2"), ("c", "2")):
        import os

        os.environ["NLT_WORKERS"] = workers
        d = tmp_path / tag
        assert main(argv + ["--output-dir", str(d)]) == 0
        outs.append((d / "markers.csv").read_bytes() + (d / "monitors.csv").read_bytes())
    os.environ.pop("NLT_WORKERS", None)
    set_worker_count(2)
    assert outs[0] == outs[1] == outs[2]
    ok("determinism", "identical CSV bytes across reruns and worker counts 1 vs 2")
