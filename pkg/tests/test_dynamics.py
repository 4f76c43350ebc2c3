import numpy as np
import pytest

from ldplab.dynamics import (CHUNK, Control, SchemeOptions, TimeGrid, brownian_increments,
                             energy_identity_residual, galerkin_convergence, moment_scan,
                             simulate_batch, simulate_controlled_spde, solve_galerkin_level,
                             solve_skeleton)
from ldplab.errors import (ConfigurationError, DimensionError, DomainError, GuardError, LevelError,
                           StepFailureError)
from ldplab.models import builtin_model, builtin_models

from conftest import smooth_state
from oracles import HEAT_DECAY


@pytest.fixture(scope="module")
def heat64():
    return builtin_model("heat", 64)


def test_time_grid_and_control_validation():
    g = TimeGrid(0.5, 10)
    assert g.step == 0.05 and g.times[-1] == 0.5 and g.times.size == 11
    for bad in [(0.0, 10), (1.0, 0), (1.0, 2.5), (-1.0, 3)]:
        with pytest.raises(ConfigurationError):
            TimeGrid(*bad)
    with pytest.raises(DimensionError):
        Control(g, np.zeros(9))
    with pytest.raises(ConfigurationError):
        Control(g, np.full(10, np.inf))
    c = Control.constant(g, [3.0, 4.0])
    assert c.num_modes == 2
    assert c.energy == pytest.approx(0.5 * 0.5 * 25.0)
    fine = c.refine(4)
    assert fine.grid.num_steps == 40 and fine.energy == pytest.approx(c.energy)
    assert Control.from_function(g, lambda t: [t]).values[0, 0] == pytest.approx(0.025)


def test_heat_mode_decays_like_the_scalar_ode(heat64):
    sp = heat64.space
    e1 = sp.basis_vector(1)
    grid = TimeGrid(0.1, 1000)
    traj = solve_skeleton(heat64, e1, Control.zero(grid), grid)
    assert sp.h_norm(traj.final - np.exp(-HEAT_DECAY * 0.1) * e1) < 5e-3
    np.testing.assert_array_equal(traj.states[0], e1)
    assert all(len(v) == grid.num_steps for v in traj.diagnostics.values())


@pytest.mark.parametrize("model", builtin_models(16), ids=lambda m: m.name)
def test_zero_is_a_fixed_point(model):
    grid = TimeGrid(0.1, 20)
    traj = solve_skeleton(model, np.zeros(16), Control.zero(grid, model.noise_modes), grid)
    assert np.all(traj.states == 0.0)


def test_p_laplace_energy_decays():
    model = builtin_model("p_laplace", 32, p=3.0)
    grid = TimeGrid(0.1, 200)
    x0 = 3.0 * smooth_state(model.space) + np.sin(5 * np.pi * model.space.nodes)
    traj = solve_skeleton(model, x0, Control.zero(grid), grid)
    energy = model.space.h_norm(traj.states) ** 2
    assert np.all(np.diff(energy) <= 0)


@pytest.mark.parametrize("name,params", [("burgers", {}), ("quasilinear", {}),
                                         ("p_laplace", {"p": 4.0})])
def test_each_step_solves_the_implicit_equation(name, params):
    model = builtin_model(name, 32, **params)
    sp = model.space
    grid = TimeGrid(0.1, 50)
    h = Control.constant(grid, [2.0])
    traj = solve_skeleton(model, 2 * smooth_state(sp), h, grid)
    y, t, dt = traj.states, grid.times, grid.step
    for k in range(grid.num_steps):
        rhs = y[k] + dt * model.control_term(t[k], y[k], h.values[k])
        res = y[k + 1] - dt * model.drift(t[k + 1], y[k + 1]) - rhs
        assert sp.h_norm(res) <= 1e-10 * max(1.0, sp.h_norm(rhs))


def test_newton_failure_reports_the_step():
    model = builtin_model("p_laplace", 16, p=4.0)
    grid = TimeGrid(0.1, 10)
    opts = SchemeOptions(max_iterations=1, newton_tol=1e-14)
    with pytest.raises(StepFailureError) as info:
        solve_skeleton(model, 5 * smooth_state(model.space), Control.zero(grid), grid, opts)
    assert info.value.step == 0


def test_semi_implicit_scheme_is_close_to_implicit():
    model = builtin_model("burgers", 32)
    grid = TimeGrid(0.1, 400)
    h = Control.constant(grid, [1.0])
    x0 = smooth_state(model.space)
    a = solve_skeleton(model, x0, h, grid).final
    b = solve_skeleton(model, x0, h, grid, SchemeOptions(method="semi-implicit")).final
    assert model.space.h_norm(a - b) < 1e-3
    with pytest.raises(ConfigurationError):
        SchemeOptions(method="explicit")


def test_control_mode_count_must_match(heat64):
    grid = TimeGrid(0.1, 10)
    with pytest.raises(DimensionError):
        solve_skeleton(heat64, np.zeros(64), Control.zero(grid, 2), grid)
    with pytest.raises(DimensionError):
        solve_skeleton(heat64, np.zeros(32), Control.zero(grid), grid)


# -- Galerkin levels ------------------------------------------------------------------

def test_full_level_is_bit_identical():
    model = builtin_model("burgers", 32)
    grid = TimeGrid(0.05, 50)
    h = Control.constant(grid, [1.0])
    x0 = smooth_state(model.space)
    full = solve_skeleton(model, x0, h, grid).states
    assert np.array_equal(solve_galerkin_level(model, x0, h, grid, 32).states, full)


def test_heat_basis_mode_is_invariant(heat64):
    grid = TimeGrid(0.1, 100)
    e1 = heat64.space.basis_vector(1)
    full = solve_skeleton(heat64, e1, Control.zero(grid), grid).states
    for n in (1, 2, 5, 64):
        level = solve_galerkin_level(heat64, e1, Control.zero(grid), grid, n).states
        assert np.max(np.abs(level - full)) < 1e-12


@pytest.mark.parametrize("name,params", [("burgers", {}), ("p_laplace", {"p": 3.0})])
def test_galerkin_states_stay_in_the_subspace(name, params):
    model = builtin_model(name, 32, **params)
    grid = TimeGrid(0.05, 50)
    traj = solve_galerkin_level(model, 2 * smooth_state(model.space),
                                Control.constant(grid, [1.0]), grid, 6)
    resid = traj.states - model.space.project_galerkin(traj.states, 6)
    assert np.max(model.space.h_norm(resid)) < 1e-10
    with pytest.raises(LevelError):
        solve_galerkin_level(model, np.zeros(32), Control.zero(grid), grid, 33)


def test_burgers_levels_approach_the_reference():
    model = builtin_model("burgers", 64)
    sp = model.space
    grid = TimeGrid(0.05, 500)
    h = Control.constant(grid, [1.0])
    x0 = np.sin(2 * np.pi * sp.nodes) + 0.5 * np.cos(4 * np.pi * sp.nodes)
    ref = solve_skeleton(model, x0, h, grid).states
    dist = [np.max(sp.dual_norm(solve_galerkin_level(model, x0, h, grid, n).states - ref))
            for n in (8, 16, 32)]
    assert dist[0] > dist[1] > dist[2]


def test_galerkin_convergence_rows():
    model = builtin_model("heat", 16)
    grid = TimeGrid(0.05, 20)
    rows = galerkin_convergence(model, smooth_state(model.space), Control.zero(grid), grid,
                                [4, 8, 16])
    assert [(r["level"], r["next_level"]) for r in rows] == [(4, 8), (8, 16)]
    with pytest.raises(ConfigurationError):
        galerkin_convergence(model, np.zeros(16), Control.zero(grid), grid, [8, 4])


# -- energy identity -------------------------------------------------------------------

def test_energy_residual_of_zero_path(heat64):
    grid = TimeGrid(0.1, 10)
    traj = solve_skeleton(heat64, np.zeros(64), Control.zero(grid), grid)
    assert energy_identity_residual(traj, heat64, Control.zero(grid)) == 0.0


def test_energy_residual_is_first_order(heat64):
    x0 = smooth_state(heat64.space)
    res = []
    for steps in (100, 200):
        grid = TimeGrid(0.1, steps)
        traj = solve_skeleton(heat64, x0, Control.zero(grid), grid)
        res.append(energy_identity_residual(traj, heat64, Control.zero(grid)))
    assert 0.3 <= res[1] / res[0] <= 0.7


@pytest.mark.parametrize("model", builtin_models(64), ids=lambda m: m.name)
def test_energy_residual_is_small_at_fine_steps(model):
    grid = TimeGrid(0.1, 1000)
    h = Control.constant(grid, [1.0] * model.noise_modes)
    x0 = smooth_state(model.space)
    traj = solve_skeleton(model, x0, h, grid)
    bound = 0.05 * (1 + model.space.h_norm(x0) ** 2)
    assert energy_identity_residual(traj, model, h) < bound


# -- stochastic paths ------------------------------------------------------------------

def test_zero_noise_matches_the_skeleton():
    model = builtin_model("quasilinear", 32)
    grid = TimeGrid(0.1, 50)
    h = Control.constant(grid, [1.0])
    x0 = smooth_state(model.space)
    traj, stop = simulate_controlled_spde(model, x0, h, 0.0, grid, seed=9)
    assert np.array_equal(traj.states, solve_skeleton(model, x0, h, grid).states)
    assert stop.hit_time is None and stop.reason == "none"


def test_stopping_records(heat64):
    grid = TimeGrid(0.1, 50)
    e1 = heat64.space.basis_vector(1)
    _, stop = simulate_controlled_spde(heat64, e1, Control.zero(grid), 0.5, grid, 3, M_stop=1e-6)
    assert stop.hit_time == 0.0 and stop.reason == "h-norm"
    # A constant push holds the state near 0.5 e_1: the H-norm stays below 2 while
    # the V-integral grows by about 10 per unit time.
    long = TimeGrid(1.0, 100)
    push = Control.constant(long, [0.5 * HEAT_DECAY])
    _, stop = simulate_controlled_spde(heat64, np.zeros(64), push, 0.1, long, 3, M_stop=2.0)
    assert stop.reason == "v-integral" and 0.1 < stop.hit_time <= 1.0
    with pytest.raises(DomainError):
        simulate_controlled_spde(heat64, e1, Control.zero(grid), -0.1, grid)


def test_noise_guard_for_gradient_noise():
    model = builtin_model("p_laplace_gradient", 16, p=3.0)
    grid = TimeGrid(0.01, 10)
    x0 = smooth_state(model.space)
    guard = model.profile.eps0_guard
    simulate_controlled_spde(model, x0, Control.zero(grid), guard, grid)
    with pytest.raises(GuardError):
        simulate_controlled_spde(model, x0, Control.zero(grid), guard * 1.01, grid)
    simulate_controlled_spde(model, x0, Control.zero(grid), guard * 1.01, grid, force=True)


def test_paths_are_determined_by_the_seed(heat64):
    grid = TimeGrid(0.1, 30)
    x0 = smooth_state(heat64.space)
    a, _ = simulate_controlled_spde(heat64, x0, Control.zero(grid), 0.3, grid, seed=4)
    b, _ = simulate_controlled_spde(heat64, x0, Control.zero(grid), 0.3, grid, seed=4)
    c, _ = simulate_controlled_spde(heat64, x0, Control.zero(grid), 0.3, grid, seed=5)
    assert a.states.tobytes() == b.states.tobytes()
    assert not np.array_equal(a.states, c.states)


def test_increments_have_the_step_variance():
    grid = TimeGrid(1.0, 50)
    inc = brownian_increments(0, range(400), grid, 2)
    assert inc.shape == (400, 50, 2)
    assert np.var(inc) == pytest.approx(grid.step, rel=0.05)
    np.testing.assert_array_equal(brownian_increments(0, [7], grid, 2)[0], inc[7])


def test_batch_results_ignore_chunking_and_workers():
    model = builtin_model("burgers", 16)
    grid = TimeGrid(0.05, 20)
    h = Control.constant(grid, [1.0])
    x0 = smooth_state(model.space)
    n = CHUNK + 40
    one = simulate_batch(model, x0, h, 0.2, grid, 11, n, workers=1)
    three = simulate_batch(model, x0, h, 0.2, grid, 11, n, workers=3)
    assert one.final.tobytes() == three.final.tobytes()
    assert one.v_integral.tobytes() == three.v_integral.tobytes()
    traj, _ = simulate_controlled_spde(model, x0, h, 0.2, grid, 11, sample=CHUNK + 5)
    np.testing.assert_allclose(traj.final, one.final[CHUNK + 5], rtol=0, atol=1e-9)
    tail = simulate_batch(model, x0, h, 0.2, grid, 11, 10, first_sample=CHUNK)
    np.testing.assert_allclose(tail.final, one.final[CHUNK:CHUNK + 10], rtol=0, atol=1e-9)


def test_ou_statistics_match_the_discrete_recursion():
    # Implicit Euler on the e_1 mode is z_{k+1} = (z_k + eps dW_k) / (1 + lam dt), with
    # lam the discrete Laplacian eigenvalue 4 sin^2(pi h) / h^2.
    n, steps, horizon, eps, samples = 16, 100, 0.1, 0.5, 4000
    model = builtin_model("heat", n)
    sp = model.space
    grid = TimeGrid(horizon, steps)
    lam = 4 * np.sin(np.pi / n) ** 2 * n ** 2
    r = 1.0 / (1.0 + lam * grid.step)
    mean = r ** steps
    var = eps ** 2 * grid.step * sum(r ** (2 * k) for k in range(1, steps + 1))
    res = simulate_batch(model, sp.basis_vector(1), Control.zero(grid), eps, grid, 2, samples)
    z = sp.coefficients(res.final, 1)[:, 0]
    assert abs(z.mean() - mean) < 3 * np.sqrt(var / samples)
    assert z.var(ddof=1) == pytest.approx(var, rel=0.1)


def test_moment_scan(heat64):
    grid = TimeGrid(0.05, 20)
    x0 = smooth_state(heat64.space)
    rows = moment_scan(heat64, x0, Control.zero(grid), [0.5, 0.2, 0.0], [2.0, 4.0], 200, grid, 1)
    assert len(rows) == 6
    det = solve_skeleton(heat64, x0, Control.zero(grid), grid)
    sup = np.max(heat64.space.h_norm(det.states))
    vint = grid.step * np.sum(heat64.space.v_norm_pow(det.states[1:]))
    zero = [r for r in rows if r["epsilon"] == 0.0 and r["q"] == 2.0][0]
    assert zero["moment"] == pytest.approx(sup ** 2 + vint, rel=1e-12)
    q2 = [r["moment"] for r in rows if r["q"] == 2.0]
    assert q2[0] > q2[1] > q2[2]
    assert not any(r["blowup"] for r in rows)
    with pytest.raises(ConfigurationError):
        moment_scan(heat64, x0, Control.zero(grid), [0.1, 0.2], [2.0], 10, grid)
    with pytest.raises(ConfigurationError):
        moment_scan(heat64, x0, Control.zero(grid), [0.2], [1.0], 10, grid)
