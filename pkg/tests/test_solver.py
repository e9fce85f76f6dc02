import math

import numpy as np
import pytest

from bifluid.closure import ExponentPair
from bifluid.config import ProfileSpec, SimConfig
from bifluid.fields import NOSLIP, FieldState, Grid1D, derive, total_mass
from bifluid.solver import (
    PositivityLossError,
    SchemeConfig,
    ZeroDtError,
    alpha_diagnostic_step,
    compute_dt,
    divergence,
    run,
    step,
)

EXPS = ExponentPair(3.0, 1.5)


def scheme(**kw):
    base = dict(mu=0.1, lam=0.0, cfl=0.9)
    base.update(kw)
    return SchemeConfig(**base)


def make_state(n, R, Q, u, t=0.0):
    R = np.asarray(R, float) * np.ones(n)
    Q = np.asarray(Q, float) * np.ones(n)
    u = np.asarray(u, float) * np.ones(n)
    return FieldState(t=t, R=R, Q=Q, m=(R + Q) * u)


def sine_state(grid, base=1.5, amp=0.3, uamp=0.2):
    x = grid.x
    R = base + amp * np.sin(2 * np.pi * x / grid.length)
    Q = base - amp * np.cos(2 * np.pi * x / grid.length)
    u = uamp * np.sin(2 * np.pi * x / grid.length)
    return FieldState(t=0.0, R=R, Q=Q, m=(R + Q) * u)


# scheme config ------------------------------------------------------------


def test_scheme_validation():
    with pytest.raises(ValueError):
        scheme(cfl=0.0)
    with pytest.raises(ValueError):
        scheme(cfl=1.5)
    with pytest.raises(ValueError):
        scheme(mu=-0.1)
    with pytest.raises(ValueError):
        scheme(mu=1.0, lam=-1.0)  # 2mu + 3lam < 0
    with pytest.raises(ValueError):
        scheme(mu=0.0)  # inviscid needs the flag
    scheme(mu=0.0, allow_inviscid=True)
    with pytest.raises(ValueError):
        scheme(time_integrator="rk4")
    with pytest.raises(ValueError):
        scheme(flux="godunov")
    with pytest.raises(ValueError):
        scheme(flux_sign=0.5)
    assert scheme(mu=0.2, lam=0.1).nu_eff == pytest.approx(0.5)


# compute_dt ----------------------------------------------------------------


def test_compute_dt_advective_example():
    # uniform Z = 2, u = 1, gamma+ = 3, dx = 0.01, inviscid, cfl = 0.5
    grid = Grid1D(100, 1.0)
    st = make_state(100, 1.0, 2.0, 1.0)
    d = derive(st, EXPS)
    sch = scheme(mu=0.0, allow_inviscid=True, cfl=0.5)
    want = 0.5 * 0.01 / (1.0 + math.sqrt(12.0))
    assert compute_dt(d, grid, sch, EXPS) == pytest.approx(want, rel=1e-12)


def test_compute_dt_cfl_linearity():
    grid = Grid1D(64, 1.0)
    d = derive(make_state(64, 1.0, 2.0, 0.5), EXPS)
    dt1 = compute_dt(d, grid, scheme(cfl=0.4), EXPS)
    dt2 = compute_dt(d, grid, scheme(cfl=0.8), EXPS)
    assert dt2 == pytest.approx(2.0 * dt1, rel=1e-14)


def test_compute_dt_viscous_scaling():
    # viscous-dominated bound scales like dx^2
    sch = scheme(mu=5.0)
    d1 = derive(make_state(64, 1.0, 2.0, 0.0), EXPS)
    d2 = derive(make_state(128, 1.0, 2.0, 0.0), EXPS)
    dt1 = compute_dt(d1, Grid1D(64, 1.0), sch, EXPS)
    dt2 = compute_dt(d2, Grid1D(128, 1.0), sch, EXPS)
    assert dt1 == pytest.approx(4.0 * dt2, rel=1e-12)


def test_compute_dt_vacuum():
    d = derive(make_state(16, 0.0, 0.0, 0.0), EXPS)
    with pytest.raises(ZeroDtError):
        compute_dt(d, Grid1D(16, 1.0), scheme(), EXPS)


# step ------------------------------------------------------------------------


def test_constant_state_is_exact_fixed_point_periodic():
    grid = Grid1D(32, 1.0)
    st = make_state(32, 1.0, 2.0, 0.7)
    for integ in ("forward_euler", "ssprk2"):
        new, rep = step(st, grid, scheme(time_integrator=integ), EXPS, dt=1e-3)
        assert np.array_equal(new.R, st.R)
        assert np.array_equal(new.Q, st.Q)
        assert np.array_equal(new.m, st.m)
        assert rep.positivity_clips == 0


def test_zero_velocity_masses_frozen_momentum_gets_pressure_push():
    grid = Grid1D(32, 1.0)
    x = grid.x
    R = 1.0 + 0.3 * np.sin(2 * np.pi * x)
    Q = 1.2 + 0.2 * np.cos(2 * np.pi * x)
    st = FieldState(0.0, R, Q, np.zeros(32))
    sch = scheme(time_integrator="forward_euler")
    dt = 1e-4
    new, _ = step(st, grid, sch, EXPS, dt)
    assert np.array_equal(new.R, st.R)
    assert np.array_equal(new.Q, st.Q)
    d = derive(st, EXPS)
    grad_p = (np.roll(d.p, -1) - np.roll(d.p, 1)) / (2 * grid.dx)
    assert np.allclose(new.m, -dt * grad_p, rtol=0, atol=1e-18)


def test_step_report_fields():
    grid = Grid1D(32, 1.0)
    st = sine_state(grid)
    d = derive(st, EXPS)
    sch = scheme()
    dt = compute_dt(d, grid, sch, EXPS)
    new, rep = step(st, grid, sch, EXPS, dt, derived=d)
    assert rep.dt == dt
    assert rep.max_wave_speed == pytest.approx(float(np.max(np.abs(d.u) + np.sqrt(3.0 * d.Z**2))), rel=1e-12)
    assert rep.dissipation >= 0.0
    assert new.t == pytest.approx(st.t + dt)


def test_positivity_strict_raises_exploratory_clips():
    grid = Grid1D(8, 1.0)
    R = np.ones(8)
    Q = np.ones(8)
    u = np.zeros(8)
    u[2], u[4] = -2.0, 2.0  # both faces of cell 3 drain it
    st = FieldState(0.0, R, Q, (R + Q) * u)
    # dt far beyond the advective limit empties the cell past zero
    with pytest.raises(PositivityLossError) as exc:
        step(st, grid, scheme(time_integrator="forward_euler"), EXPS, dt=0.5)
    assert "cells [3]" in str(exc.value)  # the failure record names the cell
    assert "t=0.5" in str(exc.value)
    sch = scheme(time_integrator="forward_euler", strict_positivity=False)
    new, rep = step(st, grid, sch, EXPS, dt=0.5)
    assert rep.positivity_clips > 0
    assert (new.R >= 0.0).all()


def test_conservation_short_run_periodic():
    grid = Grid1D(64, 1.0)
    st = sine_state(grid)
    sch = scheme()
    masses0 = total_mass(st, grid)
    for _ in range(50):
        d = derive(st, EXPS)
        dt = compute_dt(d, grid, sch, EXPS)
        st, _ = step(st, grid, sch, EXPS, dt, derived=d)
    mr, mq = total_mass(st, grid)
    assert mr == pytest.approx(masses0[0], rel=1e-13)
    assert mq == pytest.approx(masses0[1], rel=1e-13)


def test_conservation_noslip_zero_flux_walls():
    grid = Grid1D(64, 1.0, bc=NOSLIP)
    st = sine_state(grid)
    sch = scheme()
    masses0 = total_mass(st, grid)
    for _ in range(50):
        d = derive(st, EXPS)
        dt = compute_dt(d, grid, sch, EXPS)
        st, _ = step(st, grid, sch, EXPS, dt, derived=d)
    mr, mq = total_mass(st, grid)
    assert mr == pytest.approx(masses0[0], rel=1e-13)
    assert mq == pytest.approx(masses0[1], rel=1e-13)


def test_translation_equivariance_bitexact():
    grid = Grid1D(64, 1.0)
    st = sine_state(grid)
    sch = scheme()
    k = 17

    def advance(state, nsteps):
        for _ in range(nsteps):
            d = derive(state, EXPS)
            dt = compute_dt(d, grid, sch, EXPS)
            state, _ = step(state, grid, sch, EXPS, dt, derived=d)
        return state

    shifted = FieldState(0.0, np.roll(st.R, k), np.roll(st.Q, k), np.roll(st.m, k))
    a = advance(shifted, 20)
    b = advance(st, 20)
    assert np.array_equal(a.R, np.roll(b.R, k))
    assert np.array_equal(a.Q, np.roll(b.Q, k))
    assert np.array_equal(a.m, np.roll(b.m, k))


# alpha diagnostic -------------------------------------------------------------


def test_alpha_diagnostic_fixed_points():
    grid = Grid1D(32, 1.0)
    u = np.sin(2 * np.pi * grid.x)
    div_u = divergence(u, grid)
    for a0 in (0.0, 1.0):
        a = np.full(32, a0)
        new, clamps = alpha_diagnostic_step(a, u, div_u, 2.0, 1e-3, grid)
        assert np.array_equal(new, a)
        assert clamps == 0


def test_alpha_diagnostic_divergence_free_uniform():
    grid = Grid1D(32, 1.0)
    a = np.full(32, 0.37)
    u = np.full(32, 0.9)  # constant velocity: div u = 0
    new, clamps = alpha_diagnostic_step(a, u, divergence(u, grid), 2.0, 1e-3, grid)
    assert np.allclose(new, a, atol=1e-16)
    assert clamps == 0


def test_alpha_diagnostic_clamps_counted():
    grid = Grid1D(32, 1.0)
    a = np.full(32, 0.6)  # near the maximum of the compression coefficient
    u = np.zeros(32)
    div_u = np.full(32, -50.0)  # strong compression pushes alpha above 1
    new, clamps = alpha_diagnostic_step(a, u, div_u, 2.0, 0.1, grid)
    assert clamps > 0
    assert np.all(new <= 1.0)


# run ---------------------------------------------------------------------------


def base_cfg(**kw):
    d = dict(
        n=64,
        gamma_plus=3.0,
        gamma_minus=1.5,
        mu=0.1,
        t_end=0.02,
        n_snapshots=3,
        r_init=ProfileSpec(preset="sine", base=1.5, amplitude=0.3),
        q_init=ProfileSpec(preset="sine", base=1.5, amplitude=-0.2, waves=2.0),
        u_init=ProfileSpec(preset="sine", base=0.0, amplitude=0.2),
    )
    d.update(kw)
    return SimConfig(**d)


def test_run_zero_t_end_single_snapshot():
    traj = run(base_cfg(t_end=0.0))
    assert traj.times == [0.0]
    assert len(traj.states) == 1
    assert traj.n_steps == 0


def test_run_snapshot_times_exact():
    traj = run(base_cfg())
    want = [0.02 * i / 2 for i in range(3)]
    assert traj.times == want
    assert [s.t for s in traj.states] == want


def test_run_deterministic_repeat():
    t1 = run(base_cfg())
    t2 = run(base_cfg())
    for s1, s2 in zip(t1.states, t2.states):
        assert np.array_equal(s1.R, s2.R)
        assert np.array_equal(s1.Q, s2.Q)
        assert np.array_equal(s1.m, s2.m)
    assert np.array_equal(t1.dt_history, t2.dt_history)


def test_run_mass_conservation_gaussian_bump():
    cfg = base_cfg(
        t_end=0.05,
        r_init=ProfileSpec(preset="gaussian_bump", base=1.0, amplitude=0.5, center=0.5, width=0.1),
        q_init=ProfileSpec(preset="gaussian_bump", base=1.0, amplitude=0.3, center=0.4, width=0.12),
        u_init=ProfileSpec(preset="uniform", value=0.0),
    )
    traj = run(cfg)
    m0 = total_mass(traj.states[0], traj.grid)
    for s in traj.states[1:]:
        m = total_mass(s, traj.grid)
        assert m[0] == pytest.approx(m0[0], rel=1e-13)
        assert m[1] == pytest.approx(m0[1], rel=1e-13)


def test_run_all_vacuum_raises_zero_dt():
    cfg = base_cfg(
        r_init=ProfileSpec(preset="uniform", value=0.0),
        q_init=ProfileSpec(preset="uniform", value=0.0),
        u_init=ProfileSpec(preset="uniform", value=0.0),
    )
    with pytest.raises(ZeroDtError):
        run(cfg)


def test_run_tracks_alpha_diagnostic():
    traj = run(base_cfg(track_alpha=True))
    assert traj.alpha_diag is not None
    assert len(traj.alpha_diag) == len(traj.states)
    a0 = traj.derived(0).alpha
    assert np.array_equal(traj.alpha_diag[0], a0)


def test_run_noslip_end_to_end():
    cfg = base_cfg(
        bc=NOSLIP,
        u_init=ProfileSpec(preset="uniform", value=0.0),
        r_init=ProfileSpec(preset="gaussian_bump", base=1.0, amplitude=0.4, center=0.5, width=0.1),
        q_init=ProfileSpec(preset="uniform", value=1.0),
    )
    traj = run(cfg)
    m0 = total_mass(traj.states[0], traj.grid)
    mE = total_mass(traj.states[-1], traj.grid)
    assert mE[0] == pytest.approx(m0[0], rel=1e-13)
    assert mE[1] == pytest.approx(m0[1], rel=1e-13)
    assert traj.positivity_clips == 0
