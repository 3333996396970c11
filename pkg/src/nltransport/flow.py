"""Marker-lattice flow under dX/dt = F(X), with

F_j(X)(a) = sum_{a'} k_j(X(a) - X(a')) rho0(a') det DX(a') h^n .

The deformation gradient is recomputed from the stage positions inside
every evaluation of F, so the quadrature weights always follow the
current change of variables. Admissibility (min det DX > 1/2 and a small
discrete C^{1,gamma} perturbation norm) is monitored every step; the
simulation halts, never silently continuing, when the state leaves the
admissible set.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import (
    DomainError,
    InadmissibleStateError,
    PoisonedStateError,
    StepRejectedError,
)
from .fields import SampledField, holder_seminorm, lattice_points
from .kernels import KernelSpec
from .presets import DensityProfile
from .singular import _equal_measure_radius, _surface_mean_cached
from .summation import kernel_convolution

__all__ = [
    "MarkerLattice",
    "FlowState",
    "Snapshot",
    "TrajectoryRecord",
    "build_marker_lattice",
    "deformation_gradient",
    "velocity_from_state",
    "step_rk4",
    "step_picard",
    "simulate",
    "reconstruct_density",
    "invert_flow_check",
    "InvertReport",
]

MIN_DET = 0.5  # the open-set condition det DX > 1/2
_MONITOR_PAIR_BUDGET = 400  # subsample size for the per-step seminorm monitor


@dataclass(frozen=True)
class MarkerLattice:
    """Labeled particle lattice carrying the initial density."""

    n: int
    spacing: float
    shape: tuple[int, ...]
    origin: np.ndarray
    labels: np.ndarray  # (N, n), C order
    rho0: np.ndarray  # (N,)
    gamma: float

    @property
    def count(self) -> int:
        return self.labels.shape[0]

    @property
    def source_indices(self) -> np.ndarray:
        return np.flatnonzero(self.rho0 != 0.0)

    def label_field(self) -> SampledField:
        return SampledField(
            points=self.labels,
            values=self.rho0,
            lattice_shape=self.shape,
            lattice_spacing=self.spacing,
            lattice_origin=self.origin,
        )


@dataclass(frozen=True)
class FlowState:
    t: float
    X: np.ndarray  # (N, n)
    DX: np.ndarray  # (N, n, n)
    detDX: np.ndarray  # (N,)
    phi_norm: float = np.nan  # discrete ||X - e||_{1,gamma}; filled by simulate

    @property
    def min_det(self) -> float:
        return float(np.min(self.detDX))

    def admissible(self, delta: float) -> bool:
        ok_det = self.min_det > MIN_DET
        ok_phi = np.isnan(self.phi_norm) or self.phi_norm < delta  # unmonitored passes
        return bool(ok_det and ok_phi)


@dataclass(frozen=True)
class Snapshot:
    step: int
    time: float
    requested_time: float
    X: np.ndarray
    detDX: np.ndarray


@dataclass
class TrajectoryRecord:
    lattice: MarkerLattice
    kernel_name: str
    kernel_sign: float
    integrator: str
    dt: float
    n_steps: int
    delta: float
    times: np.ndarray = dc_field(default_factory=lambda: np.zeros(0))
    min_det: np.ndarray = dc_field(default_factory=lambda: np.zeros(0))
    phi_norm: np.ndarray = dc_field(default_factory=lambda: np.zeros(0))
    max_speed: np.ndarray = dc_field(default_factory=lambda: np.zeros(0))
    snapshots: list[Snapshot] = dc_field(default_factory=list)
    final_state: FlowState | None = None
    velocities: np.ndarray | None = None  # (steps+1, N, n) when stored
    halt_reason: str = "completed"
    picard_iterations: list[int] = dc_field(default_factory=list)


@dataclass(frozen=True)
class InvertReport:
    roundtrip_error: float  # sup-norm of X_back(0) - labels
    per_marker: np.ndarray


def build_marker_lattice(
    profile: DensityProfile,
    half_width: float,
    spacing: float,
    gamma: float,
    n: int | None = None,
) -> MarkerLattice:
    """Node-centered lattice over [-half_width, half_width]^n with >= 2
    cells of zero margin around the support of rho0."""
    n = profile.n if n is None else n
    if n not in (2, 3):
        raise DomainError(f"dimension must be 2 or 3, got {n}")
    if spacing <= 0 or half_width <= 0:
        raise DomainError("spacing and half_width must be positive")
    if not (0.0 < gamma < 1.0):
        raise DomainError(f"gamma must lie in (0, 1), got {gamma}")
    k = int(round(half_width / spacing))
    if k < 3:
        raise DomainError("lattice too coarse: fewer than 7 nodes per axis")
    origin = np.full(n, -k * spacing)
    shape = (2 * k + 1,) * n
    labels = lattice_points(origin, spacing, shape)
    rho0 = profile(labels)
    if not np.all(np.isfinite(rho0)):
        raise DomainError("rho0 values must be finite")
    grid = rho0.reshape(shape)
    margin = tuple(slice(2, s - 2) for s in shape)
    interior = np.zeros(shape, dtype=bool)
    interior[margin] = True
    if np.any(grid[~interior] != 0.0):
        raise DomainError(
            "rho0 must vanish on a margin of >= 2 lattice cells; enlarge the box"
        )
    return MarkerLattice(
        n=n, spacing=float(spacing), shape=shape, origin=origin,
        labels=labels, rho0=rho0, gamma=float(gamma),
    )


def deformation_gradient(X: np.ndarray, lattice: MarkerLattice) -> tuple[np.ndarray, np.ndarray]:
    """Centered label-space differences (one-sided at the margin).

    Exact for affine maps; returns (DX, det DX) per marker.
    """
    npts, n = X.shape
    DX = np.empty((npts, n, n))
    for i in range(n):
        grid = X[:, i].reshape(lattice.shape)
        grads = np.gradient(grid, lattice.spacing, edge_order=1)
        if n == 1:
            grads = [grads]
        for j in range(n):
            DX[:, i, j] = grads[j].ravel()
    if n == 2:
        det = DX[:, 0, 0] * DX[:, 1, 1] - DX[:, 0, 1] * DX[:, 1, 0]
    else:
        det = (
            DX[:, 0, 0] * (DX[:, 1, 1] * DX[:, 2, 2] - DX[:, 1, 2] * DX[:, 2, 1])
            - DX[:, 0, 1] * (DX[:, 1, 0] * DX[:, 2, 2] - DX[:, 1, 2] * DX[:, 2, 0])
            + DX[:, 0, 2] * (DX[:, 1, 0] * DX[:, 2, 1] - DX[:, 1, 1] * DX[:, 2, 0])
        )
    return DX, det


def _functional(
    X: np.ndarray,
    lattice: MarkerLattice,
    kernel: KernelSpec,
    rule: str,
    targets: np.ndarray | None = None,
    self_map: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """F(X) at the targets (defaults: all markers); returns (velocity, detDX)."""
    if not np.all(np.isfinite(X)):
        raise PoisonedStateError("flow state contains non-finite positions")
    DX, det = deformation_gradient(X, lattice)
    src = lattice.source_indices
    weights = lattice.rho0[src] * det[src] * lattice.spacing**lattice.n
    if targets is None:
        targets = X
        if self_map is None:
            self_map = _self_map(lattice)
    vel = kernel_convolution(kernel, targets, X[src], weights, self_indices=self_map)
    if rule == "polar-correct":
        mean_vec = np.asarray(_surface_mean_cached(kernel))
        if np.any(mean_vec != 0.0) and targets is X:
            dens = lattice.rho0 * det
            vel = vel + dens[:, None] * _equal_measure_radius(lattice.spacing, lattice.n) * mean_vec
    return vel, det


_SELF_MAP_CACHE: dict = {}


def _self_map(lattice: MarkerLattice) -> np.ndarray:
    """For each marker, its index within the source subset, or -1."""
    key = id(lattice)
    hit = _SELF_MAP_CACHE.get(key)
    if hit is None or hit[0] is not lattice:
        src = lattice.source_indices
        m = np.full(lattice.count, -1, dtype=np.int64)
        m[src] = np.arange(src.shape[0], dtype=np.int64)
        hit = (lattice, m)
        _SELF_MAP_CACHE[key] = hit
    return hit[1]


def initial_state(lattice: MarkerLattice) -> FlowState:
    npts = lattice.count
    return FlowState(
        t=0.0,
        X=lattice.labels.copy(),
        DX=np.broadcast_to(np.eye(lattice.n), (npts, lattice.n, lattice.n)).copy(),
        detDX=np.ones(npts),
        phi_norm=0.0,
    )


def velocity_from_state(
    state: FlowState,
    lattice: MarkerLattice,
    kernel: KernelSpec,
    targets: np.ndarray | None = None,
    rule: str = "exclude",
) -> np.ndarray:
    """Velocity at the markers (self-cell excluded) or at arbitrary points."""
    if kernel.n != lattice.n:
        raise DomainError(f"kernel dimension {kernel.n} != lattice dimension {lattice.n}")
    if rule not in ("exclude", "polar-correct"):
        raise DomainError(f"unknown singular_cell_rule {rule!r}")
    if state.min_det <= MIN_DET:
        raise InadmissibleStateError(
            f"state at t={state.t} has min det DX = {state.min_det:.4f} <= {MIN_DET}"
        )
    vel, _ = _functional(state.X, lattice, kernel, rule, targets=targets)
    return vel


def step_rk4(
    state: FlowState, lattice: MarkerLattice, kernel: KernelSpec, dt: float, rule: str = "exclude"
) -> tuple[FlowState, np.ndarray]:
    """Classical 4-stage step; returns (new state, stage-1 velocity)."""
    if dt <= 0:
        raise DomainError("dt must be positive")
    sm = _self_map(lattice)
    X = state.X
    k1, _ = _functional(X, lattice, kernel, rule, self_map=sm)
    k2, _ = _functional(X + 0.5 * dt * k1, lattice, kernel, rule, self_map=sm)
    k3, _ = _functional(X + 0.5 * dt * k2, lattice, kernel, rule, self_map=sm)
    k4, _ = _functional(X + dt * k3, lattice, kernel, rule, self_map=sm)
    Xn = X + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    DX, det = deformation_gradient(Xn, lattice)
    return FlowState(t=state.t + dt, X=Xn, DX=DX, detDX=det), k1


def step_picard(
    state: FlowState,
    lattice: MarkerLattice,
    kernel: KernelSpec,
    dt: float,
    tol: float = 1e-12,
    max_iter: int = 50,
    damping: float = 1.0,
    rule: str = "exclude",
) -> tuple[FlowState, np.ndarray, int]:
    """Damped fixed-point iteration on the trapezoidal step
    X+ = X + (dt/2) (F(X) + F(X+)); the discrete mirror of the
    contraction-mapping construction of the flow.

    Returns (new state, start velocity, iteration count); raises
    StepRejectedError with the residual history when the iteration does
    not contract (the discrete analogue of exceeding the local existence
    time for this dt).
    """
    if dt <= 0:
        raise DomainError("dt must be positive")
    if not (0.0 < damping <= 1.0):
        raise DomainError("damping must lie in (0, 1]")
    sm = _self_map(lattice)
    X = state.X
    f0, _ = _functional(X, lattice, kernel, rule, self_map=sm)
    Y = X + dt * f0  # Euler predictor
    residuals: list[float] = []
    for it in range(1, max_iter + 1):
        fY, _ = _functional(Y, lattice, kernel, rule, self_map=sm)
        Ynew = X + 0.5 * dt * (f0 + fY)
        if damping != 1.0:
            Ynew = (1.0 - damping) * Y + damping * Ynew
        res = float(np.max(np.abs(Ynew - Y)))
        residuals.append(res)
        Y = Ynew
        if res <= tol:
            DX, det = deformation_gradient(Y, lattice)
            return FlowState(t=state.t + dt, X=Y, DX=DX, detDX=det), f0, it
        if not np.isfinite(res) or (it >= 3 and res > residuals[0] and res > residuals[it - 2]):
            break
    raise StepRejectedError(
        f"fixed-point step did not contract within {len(residuals)} iterations "
        f"(dt={dt} too large); final residual {residuals[-1]:.3e}",
        residuals,
    )


def _phi_norm(state: FlowState, lattice: MarkerLattice, pair_budget: int) -> float:
    """Discrete ||X - e||_{1,gamma}: sup|phi| + sup|D phi| + |D phi|_gamma,
    componentwise maxima, seminorm over a budgeted subsample."""
    phi = state.X - lattice.labels
    dphi = state.DX - np.eye(lattice.n)[None, :, :]
    sup_phi = float(np.max(np.abs(phi), initial=0.0))
    sup_dphi = float(np.max(np.abs(dphi), initial=0.0))
    flat = dphi.reshape(lattice.count, lattice.n * lattice.n)
    semi = holder_seminorm(
        lattice.label_field(), lattice.gamma, pair_budget=pair_budget, _values=flat
    )
    return sup_phi + sup_dphi + semi


def simulate(
    lattice: MarkerLattice,
    kernel: KernelSpec,
    dt: float,
    T: float,
    integrator: str = "rk4",
    checkpoint_times: tuple[float, ...] = (),
    delta: float = 0.45,
    rule: str = "exclude",
    store_velocities: bool = False,
    picard_tol: float = 1e-12,
    picard_max_iter: int = 50,
    monitor_pair_budget: int = _MONITOR_PAIR_BUDGET,
) -> TrajectoryRecord:
    """Advance to time T or to the first admissibility loss.

    Checkpoints not hitting the dt grid exactly are taken at the nearest
    step; the actual time is recorded alongside the requested one.
    """
    if kernel.n != lattice.n:
        raise DomainError(f"kernel dimension {kernel.n} != lattice dimension {lattice.n}")
    if integrator not in ("rk4", "picard"):
        raise DomainError(f"unknown integrator {integrator!r}")
    if dt <= 0 or T <= 0:
        raise DomainError("dt and T must be positive")
    n_steps = max(int(round(T / dt)), 1)
    rec = TrajectoryRecord(
        lattice=lattice,
        kernel_name=kernel.name,
        kernel_sign=kernel.sign,
        integrator=integrator,
        dt=dt,
        n_steps=n_steps,
        delta=delta,
    )
    by_step: dict[int, float] = {}
    for tc in checkpoint_times:
        k = min(max(int(round(tc / dt)), 0), n_steps)
        by_step.setdefault(k, tc)

    state = initial_state(lattice)
    times, mins, phis, speeds = [], [], [], []
    vels = [] if store_velocities else None

    def checkpoint(step: int, st: FlowState):
        if step in by_step:
            rec.snapshots.append(
                Snapshot(step=step, time=st.t, requested_time=by_step[step],
                         X=st.X.copy(), detDX=st.detDX.copy())
            )

    checkpoint(0, state)
    halted = False
    for step in range(1, n_steps + 1):
        try:
            if integrator == "rk4":
                new_state, v_start = step_rk4(state, lattice, kernel, dt, rule)
            else:
                new_state, v_start, iters = step_picard(
                    state, lattice, kernel, dt, picard_tol, picard_max_iter, rule=rule
                )
                rec.picard_iterations.append(iters)
        except StepRejectedError:
            rec.halt_reason = "step rejected"
            halted = True
            break
        # monitor row for the step start (velocity evaluated there)
        times.append(state.t)
        mins.append(state.min_det)
        phis.append(state.phi_norm)
        speeds.append(float(np.max(np.abs(v_start), initial=0.0)))
        if vels is not None:
            vels.append(v_start)
        pn = _phi_norm(new_state, lattice, monitor_pair_budget)
        state = FlowState(
            t=step * dt, X=new_state.X, DX=new_state.DX, detDX=new_state.detDX, phi_norm=pn
        )
        checkpoint(step, state)
        if not state.admissible(delta):
            rec.halt_reason = "left U_delta"
            halted = True
            break
    # final monitor row (one extra velocity evaluation)
    try:
        v_final, _ = _functional(state.X, lattice, kernel, rule)
    except PoisonedStateError:
        v_final = np.full_like(state.X, np.nan)
    times.append(state.t)
    mins.append(state.min_det)
    phis.append(state.phi_norm)
    speeds.append(float(np.max(np.abs(v_final), initial=0.0)))
    if vels is not None:
        vels.append(v_final)
        rec.velocities = np.stack(vels, axis=0)
    rec.times = np.array(times)
    rec.min_det = np.array(mins)
    rec.phi_norm = np.array(phis)
    rec.max_speed = np.array(speeds)
    rec.final_state = state
    if not halted:
        rec.halt_reason = "completed"
    return rec


def reconstruct_density(
    state: FlowState,
    lattice: MarkerLattice,
    eval_points: np.ndarray,
    lattice_spec: tuple | None = None,
) -> SampledField:
    """Density at the eval points from the transport identity
    rho(X(a, t), t) = rho0(a).

    Exact (no interpolation) when the eval points are the marker
    positions; otherwise inverse-distance weighting over the 2^n nearest
    markers. Points farther than 2 spacings from every marker get the
    compact-support value 0. ``lattice_spec = (origin, spacing, shape)``
    tags the output with lattice structure.
    """
    if state.min_det <= MIN_DET:
        raise InadmissibleStateError(
            f"state at t={state.t} has min det DX = {state.min_det:.4f} <= {MIN_DET}"
        )
    eval_points = np.atleast_2d(np.asarray(eval_points, dtype=float))
    if eval_points is state.X or (
        eval_points.shape == state.X.shape and np.array_equal(eval_points, state.X)
    ):
        values = lattice.rho0.copy()
    else:
        from scipy.spatial import cKDTree

        k = 2**lattice.n
        tree = cKDTree(state.X)
        # query one extra neighbor: weights taper to zero at its radius, so
        # the interpolant stays continuous when the k-nearest set changes
        dist, idx = tree.query(eval_points, k=k + 1)
        dist = np.atleast_2d(dist)
        idx = np.atleast_2d(idx)
        exact = dist[:, 0] <= 1e-13 * max(1.0, float(np.max(np.abs(state.X))))
        outside = dist[:, 0] > 2.0 * lattice.spacing
        ring = dist[:, -1:]
        with np.errstate(divide="ignore", invalid="ignore"):
            w = (1.0 / dist[:, :k]) * np.maximum(1.0 - dist[:, :k] / ring, 0.0) ** 2
        w[~np.isfinite(w)] = 0.0
        wsum = np.sum(w, axis=1)
        wsum[wsum == 0.0] = 1.0
        values = np.sum(w * lattice.rho0[idx[:, :k]], axis=1) / wsum
        values[exact] = lattice.rho0[idx[exact, 0]]
        values[outside] = 0.0
    if lattice_spec is not None:
        origin, spacing, shape = lattice_spec
        return SampledField(
            points=eval_points,
            values=values,
            lattice_shape=tuple(shape),
            lattice_spacing=float(spacing),
            lattice_origin=np.asarray(origin, dtype=float),
        )
    return SampledField(points=eval_points, values=values)


def _lagrange_weights(s: float) -> np.ndarray:
    # cubic Lagrange weights on nodes {0, 1, 2, 3} at abscissa s
    nodes = (0.0, 1.0, 2.0, 3.0)
    w = np.empty(4)
    for j in range(4):
        prod = 1.0
        for m in range(4):
            if m != j:
                prod *= (s - nodes[m]) / (nodes[j] - nodes[m])
        w[j] = prod
    return w


def invert_flow_check(record: TrajectoryRecord) -> InvertReport:
    """Forward/backward round trip: re-integrate from the final state with
    time-reversed RK4 on the stored per-marker velocity history
    (piecewise-cubic in time), and report sup |X_back(0) - labels|.

    Replaying stored velocities isolates time-integration error from
    quadrature error; with cubic interpolation the replay preserves the
    integrator's own O(dt^4) accuracy.
    """
    if record.velocities is None:
        raise DomainError("record has no stored velocities; rerun with store_velocities=True")
    if record.final_state is None:
        raise DomainError("record has no final state")
    V = record.velocities  # (steps+1, N, n)
    n_samples = V.shape[0]
    if n_samples < 4:
        raise DomainError("round-trip check needs at least 4 stored steps")
    dt = record.dt
    steps = n_samples - 1

    def v_at(t: float) -> np.ndarray:
        s = t / dt
        i0 = int(np.floor(s)) - 1
        i0 = min(max(i0, 0), steps - 3)
        return np.tensordot(_lagrange_weights(s - i0), V[i0 : i0 + 4], axes=(0, 0))

    Y = record.final_state.X.copy()
    for k in range(steps, 0, -1):
        t1 = k * dt
        t0 = t1 - dt
        k1 = v_at(t1)
        k2 = v_at(t1 - 0.5 * dt)
        k3 = k2
        k4 = v_at(t0)
        # RK4 with velocity a function of time only
        Y = Y - (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    err = np.max(np.abs(Y - record.lattice.labels), axis=1)
    return InvertReport(roundtrip_error=float(np.max(err)), per_marker=err)
