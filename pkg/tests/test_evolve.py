import math

import numpy as np
import pytest

from decaylab.evolve import (
    InitialSpec,
    NonConvergenceError,
    OverflowDetected,
    Scenario,
    detect_extinction,
    make_initial,
    run,
    stable_dt,
    step_explicit,
    step_imex,
)
from decaylab.field import CoefficientField, Grid, ScalarField, write_field_csv
from decaylab.metrics import NormSeries
from decaylab.regime import ProblemParams

P_HEAT = ProblemParams(p=2.0, q=1.0, dim_n=3, gamma=0.0)


def _scenario(**kw):
    base = dict(
        params=P_HEAT,
        grid=Grid((16,), (1.0,)),
        initial=InitialSpec(kind="eigenfunction"),
        t_end=0.01,
    )
    base.update(kw)
    return Scenario(**base)


# ---------------------------------------------------------------------------
# initial data


def test_make_initial_kinds():
    g = Grid((32, 32), (1.0, 1.0))
    zero = make_initial(InitialSpec(kind="zero"), g)
    assert np.all(zero.values == 0.0)

    eig = make_initial(InitialSpec(kind="eigenfunction", amplitude=2.0), g)
    mx, my = g.node_mesh()
    assert np.allclose(eig.values, 2.0 * np.sin(math.pi * mx) * np.sin(math.pi * my))

    bump = make_initial(InitialSpec(kind="bump", amplitude=3.0), g)
    assert float(bump.values.max()) == pytest.approx(3.0, rel=1e-14)
    assert np.all(bump.values >= 0.0)
    # compact support: zero near the corners
    assert bump.values[0, 0] == 0.0

    rnd1 = make_initial(InitialSpec(kind="random_positive", amplitude=0.5), g, seed=4)
    rnd2 = make_initial(InitialSpec(kind="random_positive", amplitude=0.5), g, seed=4)
    rnd3 = make_initial(InitialSpec(kind="random_positive", amplitude=0.5), g, seed=5)
    assert np.array_equal(rnd1.values, rnd2.values)
    assert not np.array_equal(rnd1.values, rnd3.values)
    assert np.all((rnd1.values >= 0.0) & (rnd1.values <= 0.5))


def test_make_initial_power_spike_window():
    g = Grid((64, 64), (1.0, 1.0))
    # summable to order nu = 3 but not nu' = 4 needs a in (dim/nu', dim/nu) = (0.5, 2/3)
    spec = InitialSpec(kind="power_spike", decay_exponent=0.6, nu=3.0, nu_prime=4.0)
    fld = make_initial(spec, g)
    assert np.all(np.isfinite(fld.values)) and np.all(fld.values > 0.0)
    with pytest.raises(ValueError, match="window"):
        make_initial(
            InitialSpec(kind="power_spike", decay_exponent=0.4, nu=3.0, nu_prime=4.0), g
        )
    with pytest.raises(ValueError, match="window"):
        make_initial(
            InitialSpec(kind="power_spike", decay_exponent=0.7, nu=3.0, nu_prime=4.0), g
        )
    with pytest.raises(ValueError):
        InitialSpec(kind="mystery")


def test_make_initial_from_file(tmp_path):
    g = Grid((5,), (1.0,))
    rng = np.random.default_rng(2)
    fld = ScalarField(g, rng.uniform(size=5))
    path = tmp_path / "init.csv"
    write_field_csv(fld, path)
    back = make_initial(InitialSpec(kind="file", path=str(path)), g)
    assert np.array_equal(back.values, fld.values)


# ---------------------------------------------------------------------------
# step size and explicit stepping


def test_stable_dt_frozen_heat():
    # p = 2 has unit diffusivity: dt = 0.4 h^2 / (2 * dim), h = 0.1
    g = Grid((9,), (1.0,))
    fld = ScalarField(g, np.sin(math.pi * g.axis_nodes(0)))
    assert stable_dt(fld, P_HEAT) == pytest.approx(0.002, rel=1e-12)


def test_stable_dt_zero_field_and_source_cap():
    g = Grid((9,), (1.0,))
    zero = ScalarField(g, np.zeros(9))
    assert math.isinf(stable_dt(zero, ProblemParams(p=3.0, q=2.0, dim_n=3)))

    params = ProblemParams(p=2.0, q=1.0, dim_n=3, gamma=100.0)
    fld = ScalarField(g, np.sin(math.pi * g.axis_nodes(0)))
    dt = stable_dt(fld, params)
    from decaylab.field import gradient_magnitude

    top = float(gradient_magnitude(fld).values.max())
    cap = 0.1 * float(np.abs(fld.values).max()) / (100.0 * top)
    assert dt == pytest.approx(min(0.002, cap), rel=1e-12)
    assert dt < 0.002  # the source cap binds here


def test_step_explicit_single_node_frozen():
    # one interior node, h = 1/2: div = -8 u, so one step gives u (1 - 8 dt)
    g = Grid((1,), (1.0,))
    fld = ScalarField(g, [1.0])
    out = step_explicit(fld, 0.01, P_HEAT)
    assert out.values[0] == pytest.approx(1.0 - 0.08, rel=1e-14)
    with pytest.raises(ValueError):
        step_explicit(fld, 0.0, P_HEAT)


def test_step_explicit_positivity_and_sup_contraction():
    rng = np.random.default_rng(14)
    cases = [
        (ProblemParams(p=1.6, q=1.0, dim_n=3), 1e-4),
        (P_HEAT, 0.0),
        (ProblemParams(p=3.0, q=2.0, dim_n=3), 0.0),
        (ProblemParams(p=3.4, q=2.0, dim_n=3), 0.0),
    ]
    for params, eps in cases:
        for grid in (Grid((12,), (1.0,)), Grid((7, 9), (1.0, 1.3))):
            u = ScalarField(grid, rng.uniform(0.0, 2.0, size=grid.shape))
            sup0 = float(np.abs(u.values).max())
            for _ in range(5):
                dt = min(stable_dt(u, params, eps_reg=eps), 1.0)
                u = step_explicit(u, dt, params, eps_reg=eps)
                assert np.all(u.values >= 0.0), (params.p, grid.shape)
                sup = float(np.abs(u.values).max())
                assert sup <= sup0 * (1.0 + 1e-13)
                sup0 = sup


def test_step_explicit_against_imex_order():
    # both steppers agree to O(dt^2) on one step
    g = Grid((15,), (1.0,))
    u0 = ScalarField(g, np.sin(math.pi * g.axis_nodes(0)))
    params = ProblemParams(p=2.6, q=1.5, dim_n=3, gamma=0.5)
    errs = []
    for dt in (4e-4, 2e-4):
        a = step_explicit(u0, dt, params)
        b = step_imex(u0, dt, params)
        errs.append(float(np.abs(a.values - b.values).max()))
    assert errs[1] / errs[0] < 0.6
    assert errs[0] < 5e-3


def test_step_imex_single_node_frozen():
    # backward Euler on one node: u1 = u0 / (1 + 8 dt) = 1/3 at dt = 1/4
    g = Grid((1,), (1.0,))
    fld = ScalarField(g, [1.0])
    out = step_imex(fld, 0.25, P_HEAT)
    assert out.values[0] == pytest.approx(1.0 / 3.0, rel=1e-10)


def test_step_imex_matches_heat_reference():
    # p = 2 makes the implicit problem linear; compare against a dense solve
    g = Grid((10,), (1.0,))
    h = g.spacing[0]
    rng = np.random.default_rng(15)
    u0 = rng.uniform(0.5, 1.0, size=10)
    dt = 0.05
    lap = np.zeros((10, 10))
    for i in range(10):
        lap[i, i] = -2.0
        if i > 0:
            lap[i, i - 1] = 1.0
        if i < 9:
            lap[i, i + 1] = 1.0
    mat = np.eye(10) - dt / (h * h) * lap
    want = np.linalg.solve(mat, u0)
    got = step_imex(ScalarField(g, u0), dt, P_HEAT)
    assert np.allclose(got.values, want, rtol=1e-12, atol=1e-13)


def test_step_imex_2d_matches_dense_reference():
    g = Grid((4, 5), (1.0, 1.2))
    hx, hy = g.spacing
    rng = np.random.default_rng(16)
    u0 = rng.uniform(0.5, 1.0, size=(4, 5))
    dt = 0.03
    n = 20
    mat = np.eye(n)
    for i in range(4):
        for j in range(5):
            row = i * 5 + j
            mat[row, row] += 2.0 * dt / (hx * hx) + 2.0 * dt / (hy * hy)
            if i > 0:
                mat[row, row - 5] -= dt / (hx * hx)
            if i < 3:
                mat[row, row + 5] -= dt / (hx * hx)
            if j > 0:
                mat[row, row - 1] -= dt / (hy * hy)
            if j < 4:
                mat[row, row + 1] -= dt / (hy * hy)
    want = np.linalg.solve(mat, u0.ravel()).reshape(4, 5)
    got = step_imex(ScalarField(g, u0), dt, P_HEAT)
    assert np.allclose(got.values, want, rtol=1e-12, atol=1e-13)


def test_imex_nonlinear_consistency():
    # p != 2: halving dt must shrink the defect against a resolved reference
    g = Grid((12,), (1.0,))
    u0 = ScalarField(g, np.sin(math.pi * g.axis_nodes(0)))
    params = ProblemParams(p=2.8, q=1.0, dim_n=3)
    t_end = 2e-3
    ref = u0
    n_ref = 256
    for _ in range(n_ref):
        ref = step_explicit(ref, t_end / n_ref, params)
    errs = []
    for n in (4, 8):
        u = u0
        for _ in range(n):
            u = step_imex(u, t_end / n, params)
        errs.append(float(np.abs(u.values - ref.values).max()))
    assert errs[1] / errs[0] < 0.6


# ---------------------------------------------------------------------------
# the scenario runner


def test_scenario_validation():
    with pytest.raises(ValueError):
        _scenario(stepper="magic")
    with pytest.raises(ValueError):
        _scenario(snapshot_times=(0.5,))  # beyond t_end
    with pytest.raises(ValueError):
        _scenario(k_levels=(-1.0,))
    with pytest.raises(ValueError):
        _scenario(r_list=(0.5,))
    with pytest.raises(ValueError):
        _scenario(sample_ratio=1.0)


def test_scenario_resolved_properties():
    s = _scenario(params=ProblemParams(p=2.0, q=1.5, dim_n=3, gamma=1.0))
    assert s.sigma_resolved == pytest.approx(3.0)
    s = _scenario(params=ProblemParams(p=2.0, q=0.8, dim_n=3, gamma=1.0))
    assert s.sigma_resolved == 2.0  # sublinear default
    s = _scenario(sigma=4.5)
    assert s.sigma_resolved == 4.5
    assert _scenario().eps_resolved == 1e-8
    assert _scenario(params=ProblemParams(p=1.8, q=1.0, dim_n=3)).eps_resolved == 1e-4
    assert _scenario(eps_reg=1e-6).eps_resolved == 1e-6
    assert _scenario(grid=Grid((8, 8), (1.0, 1.0))).dim_mismatch  # dim_n = 3, 2d grid
    matched = _scenario(
        params=ProblemParams(p=2.0, q=1.0, dim_n=2), grid=Grid((8, 8), (1.0, 1.0))
    )
    assert not matched.dim_mismatch


def test_run_zero_horizon_single_row():
    res = run(_scenario(t_end=0.0))
    assert res.series.n == 1
    assert res.series.times[0] == 0.0
    assert res.extinction_time is None  # eigenfunction datum is not extinct


def test_run_zero_datum_extinct_at_origin():
    res = run(_scenario(initial=InitialSpec(kind="zero")))
    assert res.extinction_time == 0.0
    assert float(res.series.column("linf").max()) == 0.0


def test_run_records_requested_columns_and_snapshots():
    s = _scenario(
        t_end=0.004,
        r_list=(2.0, 4.0),
        k_levels=(0.0, 0.25),
        snapshot_times=(0.0, 0.002, 0.004),
        sample_start=1e-5,
    )
    res = run(s)
    assert res.series.labels == [
        "linf",
        "l1",
        "l2",
        "l4",
        "gk0_lsigma",
        "gk0_l1",
        "gk0.25_lsigma",
        "gk0.25_l1",
    ]
    assert [t for t, _ in res.snapshots] == [0.0, 0.002, 0.004]
    # sample times include the exact snapshot times and the horizon
    for want in (0.002, 0.004):
        assert np.any(np.isclose(res.series.times, want, rtol=0, atol=0))
    assert res.series.times[0] == 0.0 and res.series.times[-1] == 0.004
    # k = 0 sigma column matches the plain norm of order sigma (here 2.0)
    assert np.allclose(res.series.column("gk0_lsigma"), res.series.column("l2"), rtol=1e-12)


def test_run_explicit_matches_manual_stepping():
    # the fused loop must reproduce the public stepper composition bitwise
    s = _scenario(
        params=ProblemParams(p=2.4, q=1.6, dim_n=3, gamma=0.3),
        grid=Grid((11,), (1.0,)),
        t_end=0.003,
    )
    res = run(s)

    from decaylab.evolve import _sample_times

    u = make_initial(s.initial, s.grid, s.params, s.seed)
    t = 0.0
    for target in _sample_times(s):
        while t < target:
            dt = stable_dt(u, s.params, s.coefficient, s.eps_resolved, t)
            landing = dt >= target - t
            dt = min(dt, target - t)
            u = step_explicit(u, dt, s.params, s.coefficient, s.eps_resolved, t)
            t = target if landing else t + dt
    # identical float path: exact equality, not approximate
    final_linf = float(np.abs(u.values).max())
    assert final_linf == res.series.column("linf")[-1]


def test_run_is_deterministic():
    s1 = _scenario(initial=InitialSpec(kind="random_positive"), seed=42, t_end=0.002)
    s2 = _scenario(initial=InitialSpec(kind="random_positive"), seed=42, t_end=0.002)
    a = run(s1).series.to_csv_text()
    b = run(s2).series.to_csv_text()
    assert a == b


def test_run_source_amplifies_pointwise():
    # identical fixed-dt trajectories: adding the source can only increase u
    g = Grid((13,), (1.0,))
    u_plain = make_initial(InitialSpec(kind="eigenfunction"), g)
    u_source = u_plain.copy()
    plain = ProblemParams(p=2.0, q=1.5, dim_n=3, gamma=0.0)
    source = ProblemParams(p=2.0, q=1.5, dim_n=3, gamma=0.5)
    dt = 1e-4
    for _ in range(30):
        u_plain = step_explicit(u_plain, dt, plain)
        u_source = step_explicit(u_source, dt, source)
    assert np.all(u_source.values >= u_plain.values)
    assert float(u_source.values.max()) > float(u_plain.values.max())


def test_run_blow_up_detection():
    params = ProblemParams(p=2.0, q=1.9, dim_n=3, gamma=1e7)
    s = _scenario(params=params, grid=Grid((8,), (1.0,)), t_end=5.0, stop_linf_atol=0.0)
    res = run(s)
    assert res.blow_up_time is not None
    assert res.extinction_time is None
    assert float(res.series.column("linf")[-1]) < math.inf


def test_overflow_exception_payload():
    g = Grid((1,), (1.0,))
    params = ProblemParams(p=2.0, q=1.0, dim_n=3, gamma=1e9)
    with pytest.raises(OverflowDetected) as exc_info:
        fld = ScalarField(g, [1e11])
        step_explicit(fld, 10.0, params)
    assert exc_info.value.sup > 1e12
    assert exc_info.value.time == 10.0


def test_run_early_stop_on_small_sup():
    s = _scenario(
        params=ProblemParams(p=1.5, q=1.0, dim_n=3),
        grid=Grid((24,), (1.0,)),
        initial=InitialSpec(kind="bump", amplitude=0.05),
        t_end=4.0,
        stop_linf_atol=1e-12,
    )
    res = run(s)
    assert res.metadata["stopped_early"]
    assert res.series.times[-1] < 4.0
    assert res.extinction_time is not None


def test_detect_extinction_semantics():
    times = np.array([0.0, 1.0, 2.0, 3.0])
    s = NormSeries(times, {"linf": np.array([1.0, 0.5, 1e-12, 1e-13])})
    assert detect_extinction(s) == 2.0
    s = NormSeries(times, {"linf": np.array([1.0, 0.5, 0.2, 0.1])})
    assert detect_extinction(s) is None
    assert detect_extinction(s, tol=0.5) == 1.0
    s = NormSeries(times, {"linf": np.zeros(4)})
    assert detect_extinction(s) == 0.0


def test_run_heat_l1_and_sup_monotone():
    res = run(_scenario(t_end=0.02, grid=Grid((32,), (1.0,))))
    linf = res.series.column("linf")
    l1 = res.series.column("l1")
    assert np.all(np.diff(linf) <= 1e-13)
    assert np.all(np.diff(l1) <= 1e-13)
