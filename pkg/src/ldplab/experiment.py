"""Run one configured experiment and persist its outputs under a manifest."""
from __future__ import annotations

import numpy as np

from . import __version__
from .config import load_state_file
from .dynamics import (Control, SchemeOptions, energy_identity_residual, galerkin_convergence,
                       simulate_batch, simulate_controlled_spde, solve_skeleton)
from .errors import InsufficientDataError, LdpLabError, SolverError
from .hypotheses import run_full_audit
from .montecarlo import estimate_exceedance, fit_ldp_slope
from .rate import RateProblem, rate_endpoint
from .storage import RunWriter, csv_text, json_text, trajectory_text

EXIT_OK = 0
EXIT_AUDIT_FAILED = 2
EXIT_SOLVER_FAILURE = 3
EXIT_CONFIG_ERROR = 4

STEP_COLUMNS = ["step", "t", "h_norm2", "v_norm_alpha", "drift_pairing", "noise_norm"]


class Outcome:
    def __init__(self, status="ok", exit_code=EXIT_OK):
        self.status = status
        self.exit_code = exit_code


def initial_state(config, model):
    p = config.params
    sp = model.space
    if p.get("x0_file"):
        return load_state_file(p["x0_file"], sp.num_points)[0]
    amp = p["x0_amplitude"]
    if p["x0"] == "zero":
        return np.zeros(sp.num_points)
    if p["x0"] == "mode":
        return amp * sp.basis_vector(p["x0_mode"])
    freq = 2 * np.pi if sp.periodic else np.pi
    return amp * np.sin(freq * sp.nodes)


def constant_control(config, model, grid):
    values = np.asarray(config.params.get("control", (0.0,)), dtype=float)
    if values.size == 1:
        values = np.full(model.noise_modes, values[0])
    return Control.constant(grid, values)


def scheme_options(config):
    p = config.params
    return SchemeOptions(method=p.get("method", "implicit"), newton_tol=p.get("newton_tol", 1e-10))


def _step_rows(traj):
    d = traj.diagnostics
    return [{"step": k + 1, "t": traj.grid.times[k + 1], **{c: d[c][k] for c in STEP_COLUMNS[2:]}}
            for k in range(traj.grid.num_steps)]


def _check_hypotheses(config, model, writer):
    p = config.params
    reports = run_full_audit(model, p["samples"], seed=config.seed, regime=p["regime"],
                             radius=p["radius"])
    rows = [{"id": r.hypothesis_id, "samples": r.samples, "worst_residual": r.worst_residual,
             "verdict": r.verdict} for r in reports]
    writer.write_text("audit.csv", csv_text(rows, ["id", "samples", "worst_residual", "verdict"]))
    if all(r.passed for r in reports):
        return Outcome()
    return Outcome("audit-failed", EXIT_AUDIT_FAILED)


def _solve_skeleton(config, model, writer):
    grid = config.grid()
    h = constant_control(config, model, grid)
    traj = solve_skeleton(model, initial_state(config, model), h, grid, scheme_options(config))
    writer.write_text("trajectory.jsonl", trajectory_text(traj))
    writer.write_text("summary.csv", csv_text(_step_rows(traj), STEP_COLUMNS))
    writer.write_text("result.json", json_text({
        "energy_identity_residual": energy_identity_residual(traj, model, h),
        "final_h_norm": float(model.space.h_norm(traj.final))}))
    return Outcome()


def _simulate(config, model, writer):
    p = config.params
    grid = config.grid()
    h = constant_control(config, model, grid)
    x0 = initial_state(config, model)
    opts = scheme_options(config)
    traj, stop = simulate_controlled_spde(model, x0, h, p["epsilon"], grid, config.seed,
                                          p["stop_M"], opts, force=p["force"])
    writer.write_text("trajectory.jsonl", trajectory_text(traj))
    writer.write_text("summary.csv", csv_text(_step_rows(traj), STEP_COLUMNS))
    writer.write_text("stop.json", json_text({"M": stop.M, "hit_time": stop.hit_time,
                                              "reason": stop.reason}))
    if p["samples"] == 1:
        return Outcome()
    ref = solve_skeleton(model, x0, h, grid, opts).states
    res = simulate_batch(model, x0, h, p["epsilon"], grid, config.seed, p["samples"],
                         reference=ref, scheme_opts=opts, workers=config.workers,
                         force=p["force"])
    rows = [{"sample": int(i), "sup_h_norm": a, "v_integral": b, "sup_distance": c,
             "final_h_norm2": float(model.space.h_norm(f) ** 2)}
            for i, a, b, c, f in zip(res.sample_ids, res.sup_h_norm, res.v_integral,
                                     res.sup_distance, res.final)]
    writer.write_text("samples.csv", csv_text(
        rows, ["sample", "sup_h_norm", "v_integral", "sup_distance", "final_h_norm2"]))
    if res.failures:
        return Outcome("solver-failure", EXIT_SOLVER_FAILURE)
    return Outcome()


def _galerkin(config, model, writer):
    grid = config.grid()
    rows = galerkin_convergence(model, initial_state(config, model),
                                constant_control(config, model, grid), grid,
                                config.params["levels"], scheme_options(config))
    writer.write_text("galerkin.csv", csv_text(
        rows, ["level", "next_level", "sup_dual_distance", "l2_h_distance"]))
    return Outcome()


def _rate(config, model, writer):
    p = config.params
    grid = config.grid()
    target = load_state_file(p["target_file"], model.space.num_points)
    if target.shape[0] == 1:
        kind, target = "endpoint", target[0]
    else:
        kind = "path"
    problem = RateProblem(model, initial_state(config, model), target, grid, p["K"],
                          target_kind=kind, tolerance=p["tol"], pins=p["pins"],
                          initial_penalty=p["initial_penalty"], max_rounds=p["max_rounds"],
                          max_iterations=p["max_iterations"])
    result = rate_endpoint(problem)
    writer.write_text("rate.json", json_text(result.to_dict()))
    columns = ["round", "penalty", "iteration", "objective", "energy", "residual",
               "gradient_norm"]
    writer.write_text("trace.csv", csv_text(result.trace, columns))
    return Outcome()


def _mc_ldp(config, model, writer):
    p = config.params
    grid = config.grid()
    h = constant_control(config, model, grid)
    x0 = initial_state(config, model)
    estimates = [estimate_exceedance(model, x0, h, e, p["delta"], p["samples"], grid, config.seed,
                                     event=p["event"], workers=config.workers,
                                     scheme_opts=scheme_options(config), force=p["force"])
                 for e in p["epsilons"]]
    columns = ["epsilon", "samples", "hits", "p_hat", "ci_low", "ci_high", "eps2_log_p",
               "failures"]
    writer.write_text("mc_ldp.csv", csv_text([e.row() for e in estimates], columns))
    try:
        fit = fit_ldp_slope(estimates)
        summary = {"fitted_slope": fit.fitted_slope, "r_squared": fit.r_squared,
                   "epsilons": fit.epsilons, "log_p": fit.log_p}
    except InsufficientDataError as exc:
        summary = {"fitted_slope": None, "r_squared": None, "error": str(exc)}
    writer.write_text("slope.json", json_text(summary))
    if any(e.failures for e in estimates):
        return Outcome("solver-failure", EXIT_SOLVER_FAILURE)
    return Outcome()


RUNNERS = {
    "check-hypotheses": _check_hypotheses,
    "solve-skeleton": _solve_skeleton,
    "simulate": _simulate,
    "galerkin-convergence": _galerkin,
    "rate": _rate,
    "mc-ldp": _mc_ldp,
}


def run_experiment(config, output=None):
    """Run ``config`` and return its manifest (a dict carrying ``exit_code``).

    Data files land in ``output`` (default ``config.output``).  On a solver
    failure or an invalid combination detected during the run, the manifest
    is left with ``complete = false``; unexpected errors propagate after the
    manifest has been marked incomplete.
    """
    directory = output or config.output
    writer = RunWriter(directory, config.to_dict(), __version__)
    try:
        model = config.build_model()
    except LdpLabError as exc:
        return _unwritten(config, f"{type(exc).__name__}: {exc}")
    writer.begin()
    try:
        outcome = RUNNERS[config.kind](config, model, writer)
    except SolverError as exc:
        return writer.abort("solver-failure", EXIT_SOLVER_FAILURE, f"{type(exc).__name__}: {exc}")
    except LdpLabError as exc:
        return writer.abort("config-error", EXIT_CONFIG_ERROR, f"{type(exc).__name__}: {exc}")
    except BaseException as exc:
        writer.abort("error", None, f"{type(exc).__name__}: {exc}")
        raise
    return writer.finish(outcome.status, outcome.exit_code)


def _unwritten(config, error):
    return {"artifact": "ldplab", "version": __version__, "config": config.to_dict(),
            "complete": False, "status": "config-error", "exit_code": EXIT_CONFIG_ERROR,
            "files": [], "error": error}
