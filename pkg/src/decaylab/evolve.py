"""Initial data, explicit/IMEX time steppers and the adaptive simulation loop.

The explicit stepper uses a diffusive CFL bound with the regularized face
diffusivity plus a source cap keeping each source increment below a tenth of
the current sup norm.  The IMEX stepper treats diffusion implicitly (lagged
diffusivity fixed point, sparse direct solves) and the gradient source
explicitly.  Runs record norms at geometrically spaced sample times and stop
on overflow (sup norm past 1e12) or on an optional extinction floor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve

from .field import (
    CoefficientField,
    Grid,
    ScalarField,
    _divergence_from,
    _face_components,
    _diffusivity,
    _nodal_magnitude_from,
    read_field_csv,
)
from .metrics import NormSeries, lr_norm, truncate_excess
from .regime import ProblemParams, Regime, classify

DEFAULT_EPS_DEGENERATE = 1e-8  # p >= 2
DEFAULT_EPS_SINGULAR = 1e-4  # p < 2
OVERFLOW_SENTINEL = 1e12
CFL_SAFETY = 0.4
SOURCE_CAP_FRACTION = 0.1
U_FLOOR = 1e-12
IMEX_MAX_ITER = 200
IMEX_MAX_HALVINGS = 20
IMEX_RTOL = 1e-10


class OverflowDetected(RuntimeError):
    """Sup norm crossed the blow-up sentinel (or stopped being finite)."""

    def __init__(self, time: float, sup: float):
        super().__init__(f"overflow at t={time}: sup={sup}")
        self.time = time
        self.sup = sup


class NonConvergenceError(RuntimeError):
    """Implicit diffusion solve failed to converge."""


INITIAL_KINDS = ("zero", "eigenfunction", "bump", "power_spike", "random_positive", "file")


@dataclass(frozen=True)
class InitialSpec:
    """Declarative initial datum.

    kind "zero": identically zero.
    kind "eigenfunction": amplitude * prod sin(pi x / L) (first Dirichlet mode).
    kind "bump": smooth compactly supported bump, normalized so the sampled
        max equals amplitude; center/radius default to the domain middle.
    kind "power_spike": amplitude * min(cap, |x - center|^(-decay_exponent)),
        with decay_exponent required to lie in (dim/nu_prime, dim/nu) so the
        datum is summable to order nu but not nu_prime (nu_prime > nu).
    kind "random_positive": iid uniform(0, amplitude), seeded.
    kind "file": snapshot CSV from path.
    """

    kind: str
    amplitude: float = 1.0
    center: Optional[tuple] = None
    decay_exponent: Optional[float] = None
    cap: float = 1e6
    nu: Optional[float] = None
    nu_prime: Optional[float] = None
    radius: Optional[float] = None
    path: Optional[str] = None

    def __post_init__(self):
        if self.kind not in INITIAL_KINDS:
            raise ValueError(f"unknown initial kind {self.kind!r}; have {INITIAL_KINDS}")
        if self.amplitude < 0.0:
            raise ValueError("amplitude must be >= 0")


def make_initial(
    spec: InitialSpec, grid: Grid, params: Optional[ProblemParams] = None, seed: int = 0
) -> ScalarField:
    """Realize an InitialSpec on a grid (deterministic given the seed)."""
    mesh = grid.node_mesh()
    center = spec.center
    if center is None:
        center = tuple(l / 2.0 for l in grid.lengths)
    if len(center) != grid.dim:
        raise ValueError(f"center {center} does not match grid dim {grid.dim}")

    if spec.kind == "zero":
        values = np.zeros(grid.shape)
    elif spec.kind == "eigenfunction":
        values = spec.amplitude * np.ones(grid.shape)
        for axis in range(grid.dim):
            values = values * np.sin(math.pi * mesh[axis] / grid.lengths[axis])
    elif spec.kind == "bump":
        radius = spec.radius if spec.radius is not None else 0.45 * min(grid.lengths)
        if radius <= 0.0:
            raise ValueError("bump radius must be > 0")
        rho2 = np.zeros(grid.shape)
        for axis in range(grid.dim):
            rho2 += ((mesh[axis] - center[axis]) / radius) ** 2
        with np.errstate(divide="ignore", over="ignore"):
            values = np.where(rho2 < 1.0, np.exp(1.0 - 1.0 / np.maximum(1.0 - rho2, 1e-300)), 0.0)
        top = float(values.max())
        if top > 0.0:
            values *= spec.amplitude / top
    elif spec.kind == "power_spike":
        a = spec.decay_exponent
        if a is None or spec.nu is None or spec.nu_prime is None:
            raise ValueError("power_spike needs decay_exponent, nu and nu_prime")
        if not spec.nu_prime > spec.nu > 0.0:
            raise ValueError("power_spike needs nu_prime > nu > 0")
        lo, hi = grid.dim / spec.nu_prime, grid.dim / spec.nu
        if not lo < a < hi:
            raise ValueError(
                f"decay_exponent {a} outside the integrability window ({lo}, {hi}) "
                f"for nu={spec.nu}, nu_prime={spec.nu_prime} in dim {grid.dim}"
            )
        if spec.cap <= 0.0:
            raise ValueError("power_spike cap must be > 0")
        r2 = np.zeros(grid.shape)
        for axis in range(grid.dim):
            r2 += (mesh[axis] - center[axis]) ** 2
        with np.errstate(divide="ignore"):
            values = spec.amplitude * np.minimum(spec.cap, r2 ** (-a / 2.0))
    elif spec.kind == "random_positive":
        rng = np.random.default_rng(seed)
        values = rng.uniform(0.0, spec.amplitude, size=grid.shape)
    else:  # file
        if spec.path is None:
            raise ValueError("file initial needs a path")
        return read_field_csv(spec.path, grid)
    return ScalarField(grid, values)


@dataclass
class Scenario:
    """Everything a run needs; serializes to a flat record."""

    params: ProblemParams
    grid: Grid
    initial: InitialSpec
    t_end: float
    dt_init: float = 1e-4
    stepper: str = "explicit"
    coefficient: CoefficientField = dc_field(default_factory=CoefficientField)
    eps_reg: Optional[float] = None
    snapshot_times: tuple = ()
    k_levels: tuple = ()
    r_list: tuple = ()
    sigma: Optional[float] = None
    seed: int = 0
    sample_start: Optional[float] = None
    sample_ratio: float = 1.05
    stop_linf_atol: float = 0.0

    def __post_init__(self):
        if not (self.t_end >= 0.0 and math.isfinite(self.t_end)):
            raise ValueError(f"t_end must be finite and >= 0, got {self.t_end}")
        if self.dt_init <= 0.0:
            raise ValueError("dt_init must be > 0")
        if self.stepper not in ("explicit", "imex"):
            raise ValueError(f"unknown stepper {self.stepper!r}")
        if self.sample_ratio <= 1.0:
            raise ValueError("sample_ratio must be > 1")
        self.snapshot_times = tuple(sorted(set(float(s) for s in self.snapshot_times)))
        if any(s < 0.0 or s > self.t_end for s in self.snapshot_times):
            raise ValueError("snapshot times must lie in [0, t_end]")
        self.k_levels = tuple(sorted(set(float(k) for k in self.k_levels)))
        if any(k < 0.0 for k in self.k_levels):
            raise ValueError("truncation levels must be >= 0")
        self.r_list = tuple(sorted(set(float(r) for r in self.r_list)))
        if any(r < 1.0 for r in self.r_list):
            raise ValueError("norm orders must be >= 1")
        if self.stop_linf_atol < 0.0:
            raise ValueError("stop_linf_atol must be >= 0")

    @property
    def eps_resolved(self) -> float:
        if self.eps_reg is not None:
            return float(self.eps_reg)
        return DEFAULT_EPS_DEGENERATE if self.params.p >= 2.0 else DEFAULT_EPS_SINGULAR

    @property
    def sigma_resolved(self) -> float:
        """Summability exponent used for truncation-norm columns."""
        if self.sigma is not None:
            if self.sigma < 1.0:
                raise ValueError("sigma must be >= 1")
            return float(self.sigma)
        report = classify(self.params)
        if report.regime in (
            Regime.SUPERLINEAR_SIGMA,
            Regime.SUPERLINEAR_L1,
            Regime.CRITICAL_L1,
            Regime.NONEXISTENCE_RISK,
        ):
            return float(report.sigma)
        return 2.0

    @property
    def dim_mismatch(self) -> bool:
        return self.grid.dim != self.params.dim_n


@dataclass
class RunResult:
    scenario: Scenario
    series: NormSeries
    snapshots: list
    extinction_time: Optional[float]
    blow_up_time: Optional[float]
    steps_accepted: int
    steps_rejected: int
    metadata: dict


def stable_dt(
    fld: ScalarField,
    params: ProblemParams,
    coeff: Optional[CoefficientField] = None,
    eps_reg: float = 0.0,
    t: float = 0.0,
) -> float:
    """Explicit step bound: diffusive CFL with safety 0.4 plus a source cap."""
    comps = _face_components(fld.values, fld.grid.spacing)
    return _stable_dt_from(comps, fld.values, fld.grid, params, eps_reg)


def _stable_dt_from(comps, values, grid, params, eps_reg) -> float:
    p = params.p
    max_d = 0.0
    for _, mag2 in comps:
        d = _diffusivity(mag2, p, eps_reg)
        max_d = max(max_d, float(np.max(d, initial=0.0)))
    if max_d > 0.0:
        h_min = min(grid.spacing)
        dt = CFL_SAFETY * h_min * h_min / (2.0 * grid.dim * params.lambda_upper * max_d)
    else:
        dt = float("inf")
    if params.gamma > 0.0:
        top_mag = float(np.max(_nodal_magnitude_from(comps), initial=0.0))
        source_max = params.gamma * top_mag**params.q
        if source_max > 0.0:
            sup = float(np.max(np.abs(values), initial=0.0))
            dt = min(dt, SOURCE_CAP_FRACTION * max(sup, U_FLOOR) / source_max)
    return dt


def _explicit_rhs(comps, values, grid, params, coeff, eps_reg, t):
    rhs = _divergence_from(comps, grid, coeff, params.p, eps_reg, t)
    if params.gamma > 0.0:
        rhs = rhs + params.gamma * _nodal_magnitude_from(comps) ** params.q
    return rhs


def _check_overflow(values: np.ndarray, t: float) -> None:
    sup = float(np.max(np.abs(values), initial=0.0))
    if not np.isfinite(sup) or sup > OVERFLOW_SENTINEL or not np.all(np.isfinite(values)):
        raise OverflowDetected(t, sup)


def step_explicit(
    fld: ScalarField,
    dt: float,
    params: ProblemParams,
    coeff: Optional[CoefficientField] = None,
    eps_reg: float = 0.0,
    t: float = 0.0,
) -> ScalarField:
    """Forward Euler step; raises OverflowDetected past the blow-up sentinel."""
    if dt <= 0.0:
        raise ValueError("dt must be > 0")
    coeff = coeff if coeff is not None else CoefficientField.identity()
    comps = _face_components(fld.values, fld.grid.spacing)
    new = fld.values + dt * _explicit_rhs(comps, fld.values, fld.grid, params, coeff, eps_reg, t)
    _check_overflow(new, t + dt)
    return ScalarField(fld.grid, new)


def _assemble_implicit(grid: Grid, dfaces: list, dt: float):
    """Sparse matrix of v -> v - dt * div(D grad v) with Dirichlet zeros."""
    if grid.dim == 1:
        (h,) = grid.spacing
        d = dfaces[0] * (dt / (h * h))
        main = 1.0 + d[:-1] + d[1:]
        off = -d[1:-1]
        return sparse.diags([off, main, off], [-1, 0, 1], format="csc")
    hx, hy = grid.spacing
    nx, ny = grid.shape
    dx = dfaces[0] * (dt / (hx * hx))
    dy = dfaces[1] * (dt / (hy * hy))
    main = 1.0 + dx[:-1, :] + dx[1:, :] + dy[:, :-1] + dy[:, 1:]
    xc = -dx[1:-1, :].ravel()
    zlow = np.zeros((nx, ny))
    zlow[:, 1:] = -dy[:, 1:-1]
    zup = np.zeros((nx, ny))
    zup[:, :-1] = -dy[:, 1:-1]
    return sparse.diags(
        [xc, zlow.ravel()[1:], main.ravel(), zup.ravel()[:-1], xc],
        [-ny, -1, 0, 1, ny],
        format="csc",
    )


def step_imex(
    fld: ScalarField,
    dt: float,
    params: ProblemParams,
    coeff: Optional[CoefficientField] = None,
    eps_reg: float = 0.0,
    t: float = 0.0,
) -> ScalarField:
    """Backward Euler diffusion via damped lagged-diffusivity iteration.

    The gradient source is explicit (frozen at time t).  Raises
    NonConvergenceError after IMEX_MAX_ITER sweeps.
    """
    if dt <= 0.0:
        raise ValueError("dt must be > 0")
    coeff = coeff if coeff is not None else CoefficientField.identity()
    grid = fld.grid
    p = params.p
    t_new = t + dt
    comps0 = _face_components(fld.values, grid.spacing)
    b = fld.values.copy()
    if params.gamma > 0.0:
        b = b + dt * params.gamma * _nodal_magnitude_from(comps0) ** params.q
    tol = IMEX_RTOL * (1.0 + lr_norm(fld.values, 2.0, grid.quad_weight))

    cur = fld.values
    prev_res = float("inf")
    for _ in range(IMEX_MAX_ITER):
        comps = _face_components(cur, grid.spacing)
        dfaces = []
        for axis, (_, mag2) in enumerate(comps):
            a = coeff.face_values(grid, axis, t_new)
            dfaces.append(a * _diffusivity(mag2, p, eps_reg))
        mat = _assemble_implicit(grid, dfaces, dt)
        x = spsolve(mat, b.ravel()).reshape(grid.shape)
        if not np.all(np.isfinite(x)):
            raise NonConvergenceError("implicit solve produced non-finite values")
        comps_x = _face_components(x, grid.spacing)
        residual = x - dt * _divergence_from(comps_x, grid, coeff, p, eps_reg, t_new) - b
        res = lr_norm(residual, 2.0, grid.quad_weight)
        if res < tol:
            _check_overflow(x, t_new)
            return ScalarField(grid, x)
        if res >= prev_res:
            x = 0.5 * (x + cur)  # damp when the fixed point overshoots
        cur = x
        prev_res = res
    raise NonConvergenceError(
        f"lagged-diffusivity iteration did not reach {tol} in {IMEX_MAX_ITER} sweeps"
    )


def _sample_times(scenario: Scenario) -> list:
    t_end = scenario.t_end
    if t_end <= 0.0:
        return []
    start = scenario.sample_start if scenario.sample_start is not None else t_end * 1e-4
    if start <= 0.0:
        raise ValueError("sample_start must be > 0")
    targets = set()
    x = start
    while x < t_end * (1.0 - 1e-12) and len(targets) < 200000:
        targets.add(x)
        x *= scenario.sample_ratio
    targets.update(s for s in scenario.snapshot_times if s > 0.0)
    targets.add(t_end)
    return sorted(targets)


def _norm_labels(scenario: Scenario) -> list:
    labels = ["linf", "l1"]
    labels += [f"l{r:g}" for r in scenario.r_list if r != 1.0 and math.isfinite(r)]
    for k in scenario.k_levels:
        labels += [f"gk{k:g}_lsigma", f"gk{k:g}_l1"]
    return labels


def run(scenario: Scenario) -> RunResult:
    """Advance the scenario to t_end, recording norms at the sample schedule."""
    params = scenario.params
    grid = scenario.grid
    coeff = scenario.coefficient
    eps = scenario.eps_resolved
    sigma_eff = scenario.sigma_resolved
    weight = grid.quad_weight
    u0 = make_initial(scenario.initial, grid, params, scenario.seed)

    r_cols = [r for r in scenario.r_list if r != 1.0 and math.isfinite(r)]
    rows = []

    def record(ts, values):
        named = {
            "linf": float(np.max(np.abs(values), initial=0.0)),
            "l1": float(np.sum(np.abs(values)) * weight),
        }
        for r in r_cols:
            named[f"l{r:g}"] = lr_norm(values, r, weight)
        for k in scenario.k_levels:
            ex = np.abs(truncate_excess(values, k))
            named[f"gk{k:g}_lsigma"] = float(np.sum(ex**sigma_eff) * weight) ** (1.0 / sigma_eff)
            named[f"gk{k:g}_l1"] = float(np.sum(ex) * weight)
        rows.append((ts, named))

    u = u0.values.copy()
    t = 0.0
    record(0.0, u)
    snapshots = []
    snap_set = set(scenario.snapshot_times)
    if 0.0 in snap_set:
        snapshots.append((0.0, ScalarField(grid, u.copy())))

    accepted = 0
    rejected = 0
    blow_time = None
    stopped_early = False
    explicit = scenario.stepper == "explicit"

    try:
        for target in _sample_times(scenario):
            while t < target:
                comps = _face_components(u, grid.spacing)
                if explicit:
                    dt = _stable_dt_from(comps, u, grid, params, eps)
                else:
                    dt = scenario.dt_init
                landing = dt >= target - t
                dt = min(dt, target - t)
                if not dt > 0.0:
                    raise RuntimeError(f"step size collapsed at t={t}")
                if explicit:
                    new = u + dt * _explicit_rhs(comps, u, grid, params, coeff, eps, t)
                    _check_overflow(new, t + dt)
                else:
                    halvings = 0
                    while True:
                        try:
                            new = step_imex(
                                ScalarField(grid, u), dt, params, coeff, eps, t
                            ).values
                            break
                        except NonConvergenceError:
                            halvings += 1
                            rejected += 1
                            if halvings > IMEX_MAX_HALVINGS:
                                raise
                            dt *= 0.5
                            landing = False
                accepted += 1
                t = target if landing else t + dt
                u = new
                if scenario.stop_linf_atol > 0.0:
                    if float(np.max(np.abs(u), initial=0.0)) <= scenario.stop_linf_atol:
                        stopped_early = True
                        break
            if stopped_early:
                if t > rows[-1][0]:
                    record(t, u)
                break
            record(target, u)
            if target in snap_set:
                snapshots.append((target, ScalarField(grid, u.copy())))
    except OverflowDetected as exc:
        blow_time = exc.time

    series = NormSeries.from_rows(rows)
    extinction = detect_extinction(series) if blow_time is None else None
    metadata = {
        "sigma_eff": sigma_eff,
        "eps_reg": eps,
        "dim_mismatch": scenario.dim_mismatch,
        "stopped_early": stopped_early,
        "final_time": float(series.times[-1]),
        "initial_linf": float(series.column("linf")[0]),
    }
    return RunResult(
        scenario=scenario,
        series=series,
        snapshots=snapshots,
        extinction_time=extinction,
        blow_up_time=blow_time,
        steps_accepted=accepted,
        steps_rejected=rejected,
        metadata=metadata,
    )


def detect_extinction(series: NormSeries, tol: Optional[float] = None) -> Optional[float]:
    """Earliest sample time from which the sup norm stays at or below tol.

    tol defaults to 1e-9 times the initial sup norm.  None when the series
    never settles below tol (including at its final sample).
    """
    linf = series.column("linf")
    if tol is None:
        tol = 1e-9 * float(linf[0])
    if linf[-1] > tol:
        return None
    above = np.where(linf > tol)[0]
    j = int(above[-1]) + 1 if above.size else 0
    return float(series.times[j])
