"""Rate function by penalized optimal control with discrete adjoint gradients.

The cost of a piecewise-constant control ``h`` with ``K`` pieces is::

    J(h) = 1/2 sum_k (T/K) |h_k|^2 + P sum_j ||Y^h(t_j) - f_j||_H^2

where the pins ``(t_j, f_j)`` always include the terminal time.  ``P`` doubles
between rounds until every pin is matched to the requested tolerance.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import Control, SchemeOptions, TimeGrid, _integrate, solve_skeleton
from .errors import ConfigurationError, ResolutionError

ARMIJO_C = 1e-4


@dataclass(frozen=True, eq=False)
class RateProblem:
    """Rate-function problem for an endpoint or a pinned path target.

    ``target`` is the terminal state (``target_kind="endpoint"``) or an array of
    ``K + 1`` states on the control grid (``"path"``), of which ``pins``
    equally spaced intermediate states plus the terminal one are enforced.
    """

    model: object
    x0: np.ndarray
    target: np.ndarray
    grid: TimeGrid
    control_steps: int
    target_kind: str = "endpoint"
    tolerance: float = 1e-3
    pins: int = 4
    initial_penalty: float = 10.0
    max_rounds: int = 40
    max_iterations: int = 500
    gradient_tol: float = 1e-8
    newton_tol: float = 1e-12
    warm_start: Control | None = None

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ConfigurationError("tolerance must be positive")
        if self.control_steps <= 0 or self.grid.num_steps % self.control_steps:
            raise ConfigurationError(
                f"control resolution {self.control_steps} must divide {self.grid.num_steps} steps")
        if self.target_kind not in ("endpoint", "path"):
            raise ConfigurationError(f"unknown target kind {self.target_kind!r}")
        sp = self.model.space
        object.__setattr__(self, "x0", sp.check(self.x0, "x0"))
        target = np.asarray(self.target, dtype=float)
        if self.target_kind == "endpoint":
            target = sp.check(target, "target")
        elif target.shape != (self.control_steps + 1, sp.num_points):
            raise ConfigurationError(
                f"path target needs shape ({self.control_steps + 1}, {sp.num_points})")
        object.__setattr__(self, "target", target)

    @property
    def control_grid(self):
        return TimeGrid(self.grid.horizon, self.control_steps)

    @property
    def refinement(self):
        return self.grid.num_steps // self.control_steps

    @property
    def num_modes(self):
        return self.model.noise_modes

    def pin_schedule(self):
        """``[(solver step index, state)]`` of enforced constraints."""
        r = self.refinement
        if self.target_kind == "endpoint":
            return [(self.grid.num_steps, self.target)]
        k = self.control_steps
        idx = sorted({int(round(j * k / (self.pins + 1))) for j in range(1, self.pins + 1)} - {0, k})
        return [(i * r, self.target[i]) for i in idx] + [(self.grid.num_steps, self.target[k])]

    def solver_control(self, values):
        return Control(self.grid, np.repeat(np.asarray(values, float).reshape(self.control_steps, -1),
                                            self.refinement, axis=0))


@dataclass
class RateResult:
    value: float
    control: Control
    constraint_residual: float
    iterations: int
    gradient_norm_final: float
    status: str
    penalty: float = float("nan")
    trace: list = field(default_factory=list)

    def to_dict(self):
        return {"value": self.value, "constraint_residual": self.constraint_residual,
                "iterations": self.iterations, "gradient_norm_final": self.gradient_norm_final,
                "status": self.status, "penalty": self.penalty,
                "control": self.control.values.tolist()}


def forward_map(model, x0, h, grid, scheme_opts=None):
    """Skeleton path driven by ``h``; the rate function is defined through this map."""
    return solve_skeleton(model, x0, h, grid, scheme_opts)


def _forward_path(problem, values):
    opts = SchemeOptions(newton_tol=problem.newton_tol)
    ctl = problem.solver_control(values)
    res = _integrate(problem.model, problem.x0[None, :], ctl, problem.grid, opts)
    return res["path"][0], ctl


def _residual(problem, path):
    sp = problem.model.space
    return max(float(sp.h_norm(path[i] - f)) for i, f in problem.pin_schedule())


def _objective(problem, values, path, penalty):
    sp = problem.model.space
    energy = 0.5 * problem.control_grid.step * float(np.sum(values ** 2))
    miss = sum(float(sp.h_norm(path[i] - f) ** 2) for i, f in problem.pin_schedule())
    return energy + penalty * miss


def _adjoint(problem, values, path, penalty):
    """Gradient of the penalized cost for the exact implicit-Euler map."""
    model = problem.model
    sp = model.space
    grid = problem.grid
    dt = grid.step
    times = grid.times
    n = sp.num_points
    m = problem.num_modes
    g = np.repeat(values.reshape(problem.control_steps, m), problem.refinement, axis=0)
    sources = {}
    for i, f in problem.pin_schedule():
        sources[i] = sources.get(i, 0.0) + 2 * penalty * sp.mesh_width * (path[i] - f)
    linear = model.linear_operator
    if linear is not None:
        step_inv_t = np.linalg.inv(np.eye(n) - dt * linear)
    mu = np.array(sources.get(grid.num_steps, np.zeros(n)), dtype=float)
    grad_g = np.zeros_like(g)
    for s in range(grid.num_steps - 1, -1, -1):
        if linear is not None:
            nu = step_inv_t.T @ mu
        else:
            jac = model.drift_jacobian(times[s + 1], path[s + 1])
            nu = np.linalg.solve((np.eye(n) - dt * jac).T, mu)
        ys = path[s]
        grad_g[s] = dt * model.diffusion(times[s], ys).T @ nu
        mu = nu
        if not model.additive_noise:
            mu = mu + dt * model.control_jacobian(times[s], ys, g[s]).T @ nu
        if s in sources:
            mu = mu + sources[s]
    summed = grad_g.reshape(problem.control_steps, problem.refinement, m).sum(axis=1)
    return problem.control_grid.step * values.reshape(problem.control_steps, m) + summed


def adjoint_gradient(problem, h, penalty=None):
    """Gradient of the penalized cost at control ``h`` (on the control grid)."""
    penalty = problem.initial_penalty if penalty is None else penalty
    values = np.asarray(h.values, dtype=float)
    path, _ = _forward_path(problem, values)
    return _adjoint(problem, values, path, penalty)


def _descend(problem, values, penalty, trace, round_index, step=None, memory=10):
    """Gradient descent with Barzilai-Borwein trial steps and Armijo backtracking.

    The Armijo reference is the largest of the last ``memory`` objective values,
    which lets the Barzilai-Borwein steps through narrow valleys.
    """
    path, _ = _forward_path(problem, values)
    fval = _objective(problem, values, path, penalty)
    grad = _adjoint(problem, values, path, penalty)
    gnorm0 = float(np.linalg.norm(grad))
    step = 1.0 / problem.control_grid.step if step is None else step
    recent = [fval]
    best = (fval, values, path, grad)
    it = 0
    for it in range(1, problem.max_iterations + 1):
        gg = float(np.sum(grad * grad))
        if np.sqrt(gg) <= problem.gradient_tol * (1.0 + gnorm0):
            break
        ref = max(recent)
        trial = step
        for _ in range(60):
            cand = values - trial * grad
            cpath, _ = _forward_path(problem, cand)
            cval = _objective(problem, cand, cpath, penalty)
            if cval <= ref - ARMIJO_C * trial * gg:
                break
            trial *= 0.5
        else:
            break
        cgrad = _adjoint(problem, cand, cpath, penalty)
        s, y = cand - values, cgrad - grad
        sy = float(np.sum(s * y))
        step = float(np.sum(s * s)) / sy if sy > 0 else 2 * trial
        values, path, fval, grad = cand, cpath, cval, cgrad
        recent = (recent + [fval])[-memory:]
        if fval <= best[0]:
            best = (fval, values, path, grad)
        trace.append({"round": round_index, "penalty": penalty, "iteration": it, "objective": fval,
                      "energy": 0.5 * problem.control_grid.step * float(np.sum(values ** 2)),
                      "residual": _residual(problem, path),
                      "gradient_norm": float(np.linalg.norm(grad))})
    _, values, path, grad = best
    return values, path, float(np.linalg.norm(grad)), it, step


def rate_endpoint(problem):
    """Approximate the rate of the problem's target by penalty continuation.

    Returns ``status="infeasible-budget"`` with ``value=inf`` when no round
    meets the tolerance.
    """
    k, m = problem.control_steps, problem.num_modes
    if problem.warm_start is not None:
        values = np.asarray(problem.warm_start.values, float).reshape(k, m).copy()
    else:
        values = np.zeros((k, m))
    trace = []
    total = 0
    penalty = problem.initial_penalty
    path, _ = _forward_path(problem, values)
    gnorm = float("nan")
    step = None
    for rnd in range(problem.max_rounds):
        if rnd > 0 or not _residual(problem, path) <= problem.tolerance:
            values, path, gnorm, its, step = _descend(problem, values, penalty, trace, rnd, step)
            total += its
        else:
            gnorm = float(np.linalg.norm(_adjoint(problem, values, path, penalty)))
        res = _residual(problem, path)
        if res <= problem.tolerance:
            ctl = Control(problem.control_grid, values)
            return RateResult(ctl.energy, ctl, res, total, gnorm, "converged", penalty, trace)
        penalty *= 2.0
    ctl = Control(problem.control_grid, values)
    return RateResult(float("inf"), ctl, _residual(problem, path), total, gnorm,
                      "infeasible-budget", penalty / 2.0, trace)


def lq_rate(decay, amplitude, horizon):
    """Minimal ``1/2 int h^2`` steering ``y' = -decay y + h`` from 0 to ``amplitude``."""
    lam, a, t = float(decay), float(amplitude), float(horizon)
    if lam == 0.0:
        return a * a / (2.0 * t)
    return a * a * lam / (-np.expm1(-2.0 * lam * t))


def lq_optimal_control(decay, amplitude, horizon, times):
    lam, a, t = float(decay), float(amplitude), float(horizon)
    times = np.asarray(times, dtype=float)
    if lam == 0.0:
        return np.full_like(times, a / t)
    return 2.0 * lam * a * np.exp(-lam * (t - times)) / (-np.expm1(-2.0 * lam * t))


def oscillating_control(grid, base_h, direction, frequency):
    """``base_h + sin(2 pi n t) v`` with exact cell averages of the sine."""
    t = grid.times
    n = float(frequency)
    avg = (np.cos(2 * np.pi * n * t[:-1]) - np.cos(2 * np.pi * n * t[1:])) / (2 * np.pi * n * grid.step)
    return Control(grid, base_h.values + avg[:, None] * np.asarray(direction, float)[None, :])


def weak_convergence_probe(model, x0, base_h, direction, frequencies, grid=None, scheme_opts=None):
    """``sup_t ||Y^{h_n} - Y^{h}||_H`` for weakly null perturbations ``sin(2 pi n t) v``."""
    grid = base_h.grid if grid is None else grid
    freqs = [int(n) for n in frequencies]
    if any(b <= a for a, b in zip(freqs, freqs[1:])):
        raise ConfigurationError("frequencies must be increasing")
    direction = np.atleast_1d(np.asarray(direction, dtype=float))
    if direction.shape != (model.noise_modes,):
        raise ConfigurationError(f"direction must have {model.noise_modes} entries")
    for n in freqs:
        if 1.0 / (n * grid.step) < 8:
            raise ResolutionError(f"{grid.num_steps} steps resolve sin(2 pi {n} t) with fewer "
                                  "than 8 points per period")
    sp = model.space
    base = solve_skeleton(model, x0, base_h, grid, scheme_opts).states
    rows = []
    for n in freqs:
        if not np.any(direction):
            rows.append({"frequency": n, "distance": 0.0})
            continue
        path = solve_skeleton(model, x0, oscillating_control(grid, base_h, direction, n), grid,
                              scheme_opts).states
        rows.append({"frequency": n, "distance": float(np.max(sp.h_norm(path - base)))})
    return rows
