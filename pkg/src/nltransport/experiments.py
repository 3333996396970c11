"""Well-posedness harness: perturbation sweeps and convergence studies.

The continuity sweep quantifies the data-to-solution map empirically:
run the solver on rho0 and on rho0 + eps * phi with identical
discretization, measure input and output distances in the chosen norm,
and fit the decay exponent. Both reconstructed densities are
interpolated onto one shared lattice before differencing so the
gamma-quotients compare like with like.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field, replace

import numpy as np
from scipy.stats import spearmanr

from .errors import DomainError, NumericalError
from .fields import (
    SampledField,
    holder_seminorm,
    lattice_points,
    sup_norm,
    zygmund_seminorm,
)
from .flow import MarkerLattice, build_marker_lattice, reconstruct_density, simulate
from .kernels import builtin_kernel_names, dirac_correction, get_kernel
from .lemmas import (
    HARNESS_RATIO_BOUND,
    verify_holder_inequalities,
    verify_zygmund_inequalities,
)
from .presets import make_perturbation, make_profile
from .singular import PVConfig, estimate_sio_constants

__all__ = [
    "ContinuitySweepConfig",
    "SweepRow",
    "SweepResult",
    "ConvergenceReport",
    "continuity_sweep",
    "zygmund_sweep",
    "convergence_study",
    "lemma_suite",
    "CONVERGENCE_CASES",
]

CONVERGENCE_CASES = ("radial-euler-stationary", "gradn-patch-exponential", "qg-radial-stationary")


@dataclass(frozen=True)
class ContinuitySweepConfig:
    kernel_name: str = "biot-savart-2d"
    kernel_sign: float = 1.0
    n: int = 2
    gamma: float = 0.5
    spacing: float = 1.0 / 32.0
    half_width: float = 0.875
    rho0_name: str = "gaussian"
    rho0_params: dict = dc_field(default_factory=lambda: {"sigma": 0.25, "cutoff": 0.65})
    perturbation_center: tuple = (0.2, 0.1)
    perturbation_width: float = 0.15
    perturbation_amplitude: float = 1.0
    epsilons: tuple = (0.25, 0.125, 0.0625, 0.03125, 0.015625)
    norm_kind: str = "holder"  # {"holder", "zygmund"}
    dt: float = 0.005
    T: float = 0.5
    integrator: str = "rk4"
    delta: float = 10.0
    rule: str = "exclude"
    checkpoint_times: tuple = (0.25, 0.5)
    eval_half_width: float = 0.7
    eval_points_per_axis: int = 43
    seed: int = 0

    def __post_init__(self):
        eps = tuple(self.epsilons)
        if not eps or any(e <= 0 for e in eps) or any(
            eps[m] <= eps[m + 1] for m in range(len(eps) - 1)
        ):
            raise DomainError("epsilons must be positive and strictly decreasing")
        if self.norm_kind not in ("holder", "zygmund"):
            raise DomainError(f"unknown norm_kind {self.norm_kind!r}")


@dataclass(frozen=True)
class SweepRow:
    epsilon: float
    input_distance: float
    output_distance: float
    flow_distance: float
    admissible_to_T: bool


@dataclass(frozen=True)
class SweepResult:
    rows: list[SweepRow]
    beta: float
    r_squared: float
    spearman: float
    norm_kind: str
    config: ContinuitySweepConfig


@dataclass
class ConvergenceReport:
    case: str
    rows: list[dict]
    spatial_order: float | None = None
    temporal_order: float | None = None
    rate_error: float | None = None  # patch case: |n * fitted rate - 1|
    monotone: bool = True

    @property
    def passed(self) -> bool:
        return self.monotone


def _field_norm(field: SampledField, kind: str, gamma: float) -> float:
    if kind == "holder":
        return sup_norm(field) + holder_seminorm(field, gamma)
    return sup_norm(field) + zygmund_seminorm(field)


def _eval_grid(cfg: ContinuitySweepConfig):
    m = cfg.eval_points_per_axis
    spacing = 2.0 * cfg.eval_half_width / (m - 1)
    origin = np.full(cfg.n, -cfg.eval_half_width)
    shape = (m,) * cfg.n
    return lattice_points(origin, spacing, shape), (origin, spacing, shape)


def _c1gamma_distance(Xa, Xb, lattice: MarkerLattice, gamma: float) -> float:
    """Discrete ||Xa - Xb||_{1,gamma} over the marker labels."""
    from .flow import deformation_gradient

    diff = Xa - Xb
    ddiff = deformation_gradient(Xa, lattice)[0] - deformation_gradient(Xb, lattice)[0]
    sup_d = float(np.max(np.abs(diff), initial=0.0))
    sup_dd = float(np.max(np.abs(ddiff), initial=0.0))
    flat = ddiff.reshape(lattice.count, lattice.n * lattice.n)
    semi = holder_seminorm(lattice.label_field(), gamma, pair_budget=1200, _values=flat)
    return sup_d + sup_dd + semi


def _perturbed_lattice(base: MarkerLattice, pert_values: np.ndarray) -> MarkerLattice:
    return MarkerLattice(
        n=base.n,
        spacing=base.spacing,
        shape=base.shape,
        origin=base.origin,
        labels=base.labels,
        rho0=base.rho0 + pert_values,
        gamma=base.gamma,
    )


def _run(cfg: ContinuitySweepConfig, lattice: MarkerLattice):
    kernel = get_kernel(cfg.kernel_name, cfg.kernel_sign)
    return simulate(
        lattice,
        kernel,
        dt=cfg.dt,
        T=cfg.T,
        integrator=cfg.integrator,
        checkpoint_times=tuple(cfg.checkpoint_times),
        delta=cfg.delta,
        rule=cfg.rule,
    )


def continuity_sweep(cfg: ContinuitySweepConfig) -> SweepResult:
    """Perturbation sweep; rows sorted by epsilon descending.

    Rows from runs that lose admissibility before T are flagged and
    excluded from the log-log fit of output vs input distance.
    """
    profile = make_profile(cfg.rho0_name, cfg.n, **dict(cfg.rho0_params))
    base = build_marker_lattice(profile, cfg.half_width, cfg.spacing, cfg.gamma, n=cfg.n)
    pert = make_perturbation(
        cfg.n,
        center=np.asarray(cfg.perturbation_center, dtype=float),
        width=cfg.perturbation_width,
        amplitude=cfg.perturbation_amplitude,
    )
    phi = pert(base.labels)
    if np.any(phi.reshape(base.shape)[tuple(slice(0, 2) for _ in range(cfg.n))] != 0.0):
        raise DomainError("perturbation support leaks outside the lattice interior")

    eval_pts, eval_spec = _eval_grid(cfg)
    base_rec = _run(cfg, base)
    if base_rec.halt_reason != "completed":
        raise NumericalError(f"base run not admissible up to T ({base_rec.halt_reason})")
    base_dens = {
        s.step: reconstruct_density(_snap_state(s), base, eval_pts, eval_spec)
        for s in base_rec.snapshots
    }

    rows = []
    for eps in cfg.epsilons:
        lat_eps = _perturbed_lattice(base, eps * phi)
        in_field = SampledField(
            points=base.labels,
            values=eps * phi,
            lattice_shape=base.shape,
            lattice_spacing=base.spacing,
            lattice_origin=base.origin,
        )
        input_d = _field_norm(in_field, cfg.norm_kind, cfg.gamma)
        rec = _run(cfg, lat_eps)
        ok = rec.halt_reason == "completed"
        out_d = 0.0
        flow_d = 0.0
        base_by_step = {s.step: s for s in base_rec.snapshots}
        for snap in rec.snapshots:
            if snap.step not in base_by_step:
                continue
            dens = reconstruct_density(_snap_state(snap), lat_eps, eval_pts, eval_spec)
            diff = SampledField(
                points=eval_pts,
                values=dens.values - base_dens[snap.step].values,
                lattice_shape=dens.lattice_shape,
                lattice_spacing=dens.lattice_spacing,
                lattice_origin=dens.lattice_origin,
            )
            out_d = max(out_d, _field_norm(diff, cfg.norm_kind, cfg.gamma))
            flow_d = max(flow_d, _c1gamma_distance(snap.X, base_by_step[snap.step].X, base, cfg.gamma))
        rows.append(
            SweepRow(
                epsilon=eps,
                input_distance=input_d,
                output_distance=out_d,
                flow_distance=flow_d,
                admissible_to_T=ok,
            )
        )

    fit_rows = [r for r in rows if r.admissible_to_T and r.input_distance > 0 and r.output_distance > 0]
    beta, r2 = _loglog_fit(
        [r.input_distance for r in fit_rows], [r.output_distance for r in fit_rows]
    )
    if len(fit_rows) >= 3:
        rho = float(
            spearmanr([r.flow_distance for r in fit_rows], [r.output_distance for r in fit_rows])[0]
        )
    else:
        rho = float("nan")
    return SweepResult(rows=rows, beta=beta, r_squared=r2, spearman=rho, norm_kind=cfg.norm_kind, config=cfg)


def zygmund_sweep(cfg: ContinuitySweepConfig) -> SweepResult:
    """Continuity sweep with Zygmund-norm distances."""
    return continuity_sweep(replace(cfg, norm_kind="zygmund"))


def _snap_state(snap):
    from .flow import FlowState

    return FlowState(t=snap.time, X=snap.X, DX=None, detDX=snap.detDX)


def _loglog_fit(xs, ys):
    if len(xs) < 2:
        return float("nan"), float("nan")
    lx, ly = np.log(np.asarray(xs)), np.log(np.asarray(ys))
    slope, intercept = np.polyfit(lx, ly, 1)
    pred = slope * lx + intercept
    ss_res = float(np.sum((ly - pred) ** 2))
    ss_tot = float(np.sum((ly - np.mean(ly)) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(slope), r2


# -- convergence studies -------------------------------------------------------


def _stationary_drift(kernel_name, profile_name, profile_params, n, half, h, dt, T, delta=10.0):
    profile = make_profile(profile_name, n, **profile_params)
    lat = build_marker_lattice(profile, half, h, 0.5, n=n)
    rec = simulate(lat, get_kernel(kernel_name), dt=dt, T=T, delta=delta)
    if rec.halt_reason != "completed":
        return float("nan")
    drift = np.max(np.abs(profile(rec.final_state.X) - lat.rho0))
    return float(drift / np.max(np.abs(lat.rho0)))


def convergence_study(
    case: str,
    h_list: tuple[float, ...] = (),
    dt_list: tuple[float, ...] = (),
    T: float = 0.5,
    dt: float = 0.005,
) -> ConvergenceReport:
    """Observed orders against analytic references from the case registry."""
    if case not in CONVERGENCE_CASES:
        raise DomainError(f"unknown convergence case {case!r} (choose from {CONVERGENCE_CASES})")
    rep = ConvergenceReport(case=case, rows=[])

    if case == "radial-euler-stationary":
        if h_list:
            errs = []
            for h in h_list:
                e = _stationary_drift(
                    "biot-savart-2d", "gaussian", {"sigma": 0.2, "cutoff": 0.55}, 2, 0.75, h, dt, T
                )
                errs.append(e)
                rep.rows.append({"case": case, "h": h, "dt": dt, "error": e})
            rep.monotone = all(errs[m] > errs[m + 1] for m in range(len(errs) - 1))
            rep.spatial_order, _ = _loglog_fit(list(h_list), errs)
        if dt_list:
            rep.temporal_order = _temporal_self_order("biot-savart-2d", dt_list, T, rep)
    elif case == "gradn-patch-exponential":
        hs = h_list or (1.0 / 16.0,)
        for h in hs:
            rate, err = _patch_rate(h, dt, T)
            rep.rate_error = err  # finest level kept last
            rep.rows.append({"case": case, "h": h, "dt": dt, "error": err, "rate": rate})
        errs = [r["error"] for r in rep.rows]
        rep.monotone = all(errs[m] >= errs[m + 1] for m in range(len(errs) - 1)) if len(errs) > 1 else True
    else:  # qg-radial-stationary
        if h_list:
            errs = []
            for h in h_list:
                e = _stationary_drift(
                    "qg-3d", "gaussian", {"sigma": 0.28, "cutoff": 0.62}, 3, 0.8, h, dt, T
                )
                errs.append(e)
                rep.rows.append({"case": case, "h": h, "dt": dt, "error": e})
            rep.monotone = all(errs[m] > errs[m + 1] for m in range(len(errs) - 1))
            rep.spatial_order, _ = _loglog_fit(list(h_list), errs)
        if dt_list:
            rep.temporal_order = _temporal_self_order("qg-3d", dt_list, T, rep)
    return rep


def _temporal_self_order(kernel_name, dt_list, T, rep):
    for dtv in dt_list:
        if abs(T / dtv - round(T / dtv)) > 1e-9:
            raise DomainError(
                f"dt {dtv} does not divide T = {T}: self-convergence states would "
                "be compared at different times"
            )
    n = get_kernel(kernel_name).n
    if n == 2:
        profile = make_profile("gaussian", 2, sigma=0.2, cutoff=0.55)
        lat = build_marker_lattice(profile, 0.75, 1.0 / 16.0, 0.5)
    else:
        profile = make_profile("gaussian", 3, sigma=0.28, cutoff=0.62)
        lat = build_marker_lattice(profile, 0.8, 0.1, 0.5, n=3)
    kernel = get_kernel(kernel_name)
    finals = []
    for dtv in dt_list:
        rec = simulate(lat, kernel, dt=dtv, T=T, delta=10.0)
        finals.append(rec.final_state.X)
    gaps = [float(np.max(np.abs(finals[m] - finals[m + 1]))) for m in range(len(finals) - 1)]
    for m, g in enumerate(gaps):
        rep.rows.append({"case": rep.case, "h": lat.spacing, "dt": dt_list[m], "error": g})
    if len(gaps) >= 2:
        orders = [np.log(gaps[m] / gaps[m + 1]) / np.log(dt_list[m] / dt_list[m + 1])
                  for m in range(len(gaps) - 1)]
        return float(np.min(orders))
    return None


def _patch_rate(h, dt, T):
    profile = make_profile("mollified-disk", 2, radius=0.35, width=0.1)
    lat = build_marker_lattice(profile, 0.75, h, 0.5)
    times = tuple(np.linspace(0.0, T, 6)[1:])
    rec = simulate(lat, get_kernel("grad-newtonian-2d"), dt=dt, T=T, delta=10.0,
                   checkpoint_times=(0.0,) + times)
    core = lat.rho0 >= 0.999 * np.max(lat.rho0)
    ts, radii = [], []
    for snap in rec.snapshots:
        ts.append(snap.time)
        radii.append(float(np.mean(np.linalg.norm(snap.X[core], axis=1))))
    rate = float(np.polyfit(ts, np.log(radii), 1)[0])
    return rate, abs(rate * lat.n - 1.0)


# -- consolidated lemma suite ---------------------------------------------------


def lemma_suite(seed: int = 0, trials: int = 200) -> dict:
    """One machine-readable report over the inequality lemmas, the
    singular-integral constants, and the delta-mass matrices."""
    if trials < 0:
        raise DomainError("trials must be >= 0")
    report: dict = {"seed": seed, "trials": trials}
    if trials == 0:
        report.update({"passed": True, "holder": None, "zygmund": None, "sio": None, "dirac": None})
        return report

    hol = verify_holder_inequalities(trials, gamma=0.5, seed=seed)
    zyg = verify_zygmund_inequalities(max(trials // 5, 1), seed=seed)
    report["holder"] = {
        "max_violation": {k: float(v) for k, v in hol.max_violation.items()},
        "ratio_max": {k: float(np.max(v)) for k, v in hol.ratios.items()},
        "passed": hol.passed,
    }
    report["zygmund"] = {
        "ratio_max": {
            k: {f"{h:.6g}": float(np.max(v)) for h, v in d.items()} for k, d in zyg.ratios.items()
        },
        "passed": zyg.passed,
    }

    sio: dict = {"rows": [], "passed": True}
    from .fields import lattice_field

    for h in (1.0 / 16.0, 1.0 / 32.0):
        k = int(round(1.0 / h))
        xs = h * np.arange(-k, k + 1)
        mesh = np.meshgrid(xs, xs, indexing="ij")
        r2 = mesh[0] ** 2 + mesh[1] ** 2
        fields = []
        for idx, sig in enumerate((0.4, 0.2)):
            vals = np.exp(-r2 / sig**2)
            vals[r2 > (3.0 * sig) ** 2] = 0.0
            fields.append((f"bump-{idx}", lattice_field([xs[0], xs[0]], h, vals)))
        rows = estimate_sio_constants(
            get_kernel("biot-savart-2d"), 1, 2, fields, 0.5, PVConfig(epsilon=2 * h, h=h),
            max_targets=900,
        )
        for r in rows:
            sio["rows"].append(
                {"field": r.field_id, "h": r.h, "c_eps": r.implied_c_eps, "c_sna": r.implied_c_sna}
            )
            if r.implied_c_eps > HARNESS_RATIO_BOUND or r.implied_c_sna > HARNESS_RATIO_BOUND:
                sio["passed"] = False
    by_field: dict = {}
    for row in sio["rows"]:
        by_field.setdefault(row["field"], []).append(row)
    for rows_f in by_field.values():
        for key in ("c_eps", "c_sna"):
            vals = [r[key] for r in rows_f]
            if max(vals) > 2.0 * min(vals) + 1e-12:
                sio["passed"] = False
    report["sio"] = sio

    dirac: dict = {"kernels": {}, "passed": True}
    for name in builtin_kernel_names():
        mat = dirac_correction(get_kernel(name), 256)
        tr = float(np.trace(mat.c))
        expected_tr = 1.0 if name.startswith("grad-newtonian") else 0.0
        ok = abs(tr - expected_tr) <= 1e-8 and mat.estimated_error <= 1e-8
        dirac["kernels"][name] = {"trace": tr, "error": mat.estimated_error, "passed": ok}
        dirac["passed"] = dirac["passed"] and ok
    report["dirac"] = dirac

    report["passed"] = bool(
        report["holder"]["passed"] and report["zygmund"]["passed"] and sio["passed"] and dirac["passed"]
    )
    return report
