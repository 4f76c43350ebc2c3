"""Drift-implicit Euler integration of skeleton, Galerkin and controlled SPDE paths.

One step solves::

    Y_{k+1} - dt A(t_{k+1}, Y_{k+1}) = Y_k + dt B(t_k, Y_k) h_k + eps B(t_k, Y_k) dW_k

by damped Newton iteration.  Noise and control use the left endpoint.  All
solvers work on a batch of states at once; a single path is a batch of one.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import (ConfigurationError, DimensionError, DivergenceError, DomainError,
                     GuardError, SolverError, StepFailureError)
from .rng import stream

CHUNK = 256


@dataclass(frozen=True)
class TimeGrid:
    horizon: float
    num_steps: int

    def __post_init__(self):
        if not self.horizon > 0:
            raise ConfigurationError("time horizon must be positive")
        if int(self.num_steps) != self.num_steps or self.num_steps <= 0:
            raise ConfigurationError("num_steps must be a positive integer")

    @property
    def step(self):
        return self.horizon / self.num_steps

    @property
    def times(self):
        return np.linspace(0.0, self.horizon, self.num_steps + 1)


@dataclass(frozen=True, eq=False)
class Control:
    """Piecewise-constant control: ``values[k]`` acts on ``[t_k, t_{k+1})``."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim == 1:
            vals = vals[:, None]
        if vals.ndim != 2 or vals.shape[0] != self.grid.num_steps:
            raise DimensionError(
                f"control needs shape ({self.grid.num_steps}, m), got {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ConfigurationError("control values must be finite")
        object.__setattr__(self, "values", vals)

    @classmethod
    def zero(cls, grid, m=1):
        return cls(grid, np.zeros((grid.num_steps, m)))

    @classmethod
    def constant(cls, grid, vector):
        vec = np.atleast_1d(np.asarray(vector, dtype=float))
        return cls(grid, np.tile(vec, (grid.num_steps, 1)))

    @classmethod
    def from_function(cls, grid, fn):
        """Sample ``fn(t)`` at cell midpoints."""
        mids = grid.times[:-1] + 0.5 * grid.step
        return cls(grid, np.array([np.atleast_1d(fn(t)) for t in mids], dtype=float))

    @property
    def num_modes(self):
        return self.values.shape[1]

    @property
    def l2_norm2(self):
        return float(self.grid.step * np.sum(self.values ** 2))

    @property
    def energy(self):
        return 0.5 * self.l2_norm2

    def refine(self, factor):
        """Same control on a grid with ``factor`` times as many steps."""
        grid = TimeGrid(self.grid.horizon, self.grid.num_steps * factor)
        return Control(grid, np.repeat(self.values, factor, axis=0))


@dataclass(frozen=True)
class SchemeOptions:
    method: str = "implicit"
    newton_tol: float = 1e-10
    max_iterations: int = 50
    max_halvings: int = 30

    def __post_init__(self):
        if self.method not in ("implicit", "semi-implicit"):
            raise ConfigurationError(f"unknown scheme {self.method!r}")


@dataclass
class Trajectory:
    grid: TimeGrid
    states: np.ndarray
    diagnostics: dict = field(default_factory=dict)
    level: int | None = None
    space: object = field(default=None, repr=False)

    @property
    def times(self):
        return self.grid.times

    @property
    def final(self):
        return self.states[-1]


@dataclass(frozen=True)
class StopRecord:
    M: float | None
    hit_time: float | None
    reason: str


# -- Newton core -----------------------------------------------------------------------

class _Stepper:
    """Solves ``Y - dt P A(t, Y) = rhs`` for a batch, optionally on a Galerkin level."""

    def __init__(self, model, dt, opts, level=None):
        self.model = model
        self.space = model.space
        self.dt = dt
        self.opts = opts
        n = self.space.num_points
        self.level = None if level is None or level == n else self.space._level(level)
        if self.level is not None:
            self.basis = self.space.basis[:, : self.level]
        self._inv = None
        self._stale = None

    def to_coords(self, y):
        if self.level is None:
            return y
        return self.space.mesh_width * y @ self.basis

    def to_state(self, c):
        if self.level is None:
            return c
        return c @ self.basis.T

    def project(self, g):
        return g if self.level is None else self.to_state(self.to_coords(g))

    @cached_property
    def _linear_solver(self):
        mat = self.model.linear_operator
        if self.level is not None:
            mat = self.space.mesh_width * self.basis.T @ mat @ self.basis
        return np.linalg.inv(np.eye(mat.shape[0]) - self.dt * mat).T

    def _field(self, t, c):
        return self.to_coords(self.model.drift(t, self.to_state(c)))

    def _jacobian(self, t, c):
        jac = self.model.drift_jacobian(t, self.to_state(c))
        if self.level is not None:
            jac = self.space.mesh_width * self.basis.T @ jac @ self.basis
        return np.eye(c.shape[-1]) - self.dt * jac

    def solve(self, t, rhs, guess, step, previous=None):
        """Return the coordinates solving the implicit step (rhs in coordinates).

        ``guess`` is the current state; Newton starts from its linear
        extrapolation through ``previous`` when that is available.
        """
        if self.model.linear_operator is not None:
            return rhs @ self._linear_solver
        if self.opts.method == "semi-implicit":
            r = guess - self.dt * self._field(t, guess) - rhs
            return guess + np.linalg.solve(self._jacobian(t, guess), -r[..., None])[..., 0]
        start = guess if previous is None else 2.0 * guess - previous
        return self._newton(t, rhs, start, step)

    def _newton(self, t, rhs, guess, step):
        """Damped Newton; a sample keeps its inverted Jacobian, across steps too,
        while the residual still drops tenfold per iteration."""
        h = 1.0 if self.level is not None else self.space.mesh_width
        norm = lambda r: np.sqrt(h * np.sum(r * r, axis=-1))
        tol = self.opts.newton_tol * np.maximum(1.0, norm(rhs))
        x = guess.copy()
        res = x - self.dt * self._field(t, x) - rhs
        rn = norm(res)
        if self._inv is None or self._inv.shape != x.shape + (x.shape[-1],):
            self._inv = np.empty(x.shape + (x.shape[-1],))
            self._stale = np.ones(x.shape[0], dtype=bool)
        inv, stale = self._inv, self._stale
        for _ in range(self.opts.max_iterations):
            active = np.nonzero(~(rn <= tol))[0]
            if active.size == 0:
                return x
            fresh = active[stale[active]]
            if fresh.size:
                inv[fresh] = np.linalg.inv(self._jacobian(t, x[fresh]))
                stale[fresh] = False
            xa, ra, na = x[active], res[active], rn[active]
            dx = -(inv[active] @ ra[..., None])[..., 0]
            lam = np.ones(active.size)
            for _ in range(self.opts.max_halvings + 1):
                xn = xa + lam[:, None] * dx
                rnew = xn - self.dt * self._field(t, xn) - rhs[active]
                nnew = norm(rnew)
                worse = ~(nnew <= na)
                if not worse.any():
                    break
                lam = np.where(worse, 0.5 * lam, lam)
            stale[active] = ~(nnew <= 0.1 * na)
            x[active], res[active], rn[active] = xn, rnew, nnew
            if not np.all(np.isfinite(rn)):
                raise DivergenceError(step)
        if np.all(rn <= tol):
            return x
        raise StepFailureError(step)


def _check_inputs(model, x0, control):
    x0 = model.space.check(x0, "x0")
    if control.num_modes != model.noise_modes:
        raise DimensionError(
            f"control has {control.num_modes} modes, model {model.name!r} has {model.noise_modes}")
    return x0


def _integrate(model, x0, control, grid, opts, *, level=None, epsilon=0.0, increments=None,
               keep_path=True, reference=None, stop_M=None, diagnostics=False):
    """Batched drift-implicit Euler.

    ``x0`` has shape ``(B, N)``; ``increments`` (if any) has shape ``(B, K, m)``.
    Returns a dict with the path (or final state) and running functionals.
    """
    if control.grid != grid:
        raise ConfigurationError("control and integration grids differ")
    sp = model.space
    dt = grid.step
    stepper = _Stepper(model, dt, opts, level)
    y = stepper.project(x0)
    c = stepper.to_coords(y)
    c_prev = None
    batch = y.shape[0]
    path = [y] if keep_path else None
    out = {"sup_h_norm": sp.h_norm(y), "v_integral": np.zeros(batch)}
    if reference is not None:
        out["sup_distance"] = sp.h_norm(y - reference[0])
    hit = np.full(batch, np.nan)
    reason = np.full(batch, "none", dtype=object)
    if stop_M is not None:
        first = out["sup_h_norm"] >= stop_M
        hit[first] = 0.0
        reason[first] = "h-norm"
    diag = {k: np.zeros((grid.num_steps, batch)) for k in
            ("h_norm2", "v_norm_alpha", "drift_pairing", "noise_norm")} if diagnostics else None
    times = grid.times
    for k in range(grid.num_steps):
        t0, t1 = times[k], times[k + 1]
        force = model.control_term(t0, y, np.broadcast_to(control.values[k], (batch, control.num_modes)))
        rhs = y + dt * force
        noise = None
        if epsilon != 0.0 and increments is not None:
            noise = epsilon * np.einsum("bnm,bm->bn", model.diffusion(t0, y), increments[:, k])
            rhs = rhs + noise
        rhs_c = stepper.to_coords(rhs)
        c, c_prev = stepper.solve(t1, rhs_c, c, k, c_prev), c
        if not np.all(np.isfinite(c)):
            raise DivergenceError(k)
        y = stepper.to_state(c)
        hn = sp.h_norm(y)
        vpow = sp.v_norm_pow(y)
        out["v_integral"] = out["v_integral"] + dt * vpow
        out["sup_h_norm"] = np.maximum(out["sup_h_norm"], hn)
        if reference is not None:
            out["sup_distance"] = np.maximum(out["sup_distance"], sp.h_norm(y - reference[k + 1]))
        if stop_M is not None:
            fresh = np.isnan(hit) & ((hn >= stop_M) | (out["v_integral"] >= stop_M))
            hit[fresh] = t1
            reason[fresh] = np.where(hn[fresh] >= stop_M, "h-norm", "v-integral")
        if diag is not None:
            diag["h_norm2"][k] = hn ** 2
            diag["v_norm_alpha"][k] = vpow
            diag["drift_pairing"][k] = sp.dual_pair(model.drift(t1, y), y)
            diag["noise_norm"][k] = 0.0 if noise is None else sp.h_norm(noise)
        if keep_path:
            path.append(y)
    out["final"] = y
    if keep_path:
        out["path"] = np.stack(path, axis=1)
    out["hit_time"] = hit
    out["reason"] = reason
    out["diagnostics"] = diag
    return out


def _single(model, x0, control, grid, opts, **kw):
    res = _integrate(model, x0[None, :], control, grid, opts, diagnostics=True, **kw)
    diag = {k: v[:, 0] for k, v in res["diagnostics"].items()}
    return res, Trajectory(grid, res["path"][0], diag, kw.get("level"), model.space)


def solve_skeleton(model, x0, h, grid, scheme_opts=None):
    """Controlled skeleton path ``dY = A(t, Y) dt + B(t, Y) h dt``."""
    opts = scheme_opts or SchemeOptions()
    x0 = _check_inputs(model, x0, h)
    return _single(model, x0, h, grid, opts)[1]


def solve_galerkin_level(model, x0, h, grid, level_n, scheme_opts=None):
    """Skeleton path of the equation projected onto the first ``level_n`` basis vectors."""
    opts = scheme_opts or SchemeOptions()
    x0 = _check_inputs(model, x0, h)
    model.space._level(level_n)
    return _single(model, x0, h, grid, opts, level=level_n)[1]


def galerkin_convergence(model, x0, h, grid, levels, scheme_opts=None):
    """Distances between solutions on consecutive Galerkin levels.

    Returns one row per pair ``(levels[i], levels[i+1])`` with the sup-in-time
    V*-distance and the discrete L^2-in-time H-distance.
    """
    levels = [int(n) for n in levels]
    if len(levels) < 2 or any(b <= a for a, b in zip(levels, levels[1:])):
        raise ConfigurationError("levels must be an increasing list of at least two entries")
    sp = model.space
    paths = {n: solve_galerkin_level(model, x0, h, grid, n, scheme_opts).states for n in levels}
    rows = []
    for a, b in zip(levels, levels[1:]):
        diff = paths[a] - paths[b]
        rows.append({"level": a, "next_level": b,
                     "sup_dual_distance": float(np.max(sp.dual_norm(diff))),
                     "l2_h_distance": float(np.sqrt(grid.step * np.sum(sp.h_norm(diff[1:]) ** 2)))})
    return rows


def energy_identity_residual(traj, model, h):
    """Worst defect of the discrete chain rule along a trajectory.

    Pairings use the right endpoint of each step; for implicit Euler the defect
    after k steps is ``sum_j ||Y_{j+1} - Y_j||_H^2``, which is O(dt).
    """
    sp = model.space
    ys = traj.states
    dt = traj.grid.step
    times = traj.grid.times
    x0 = ys[0]
    total = 0.0
    worst = 0.0
    for k in range(traj.grid.num_steps):
        y0, y1 = ys[k], ys[k + 1]
        force = model.control_term(times[k], y0, h.values[k])
        total += 2 * dt * (sp.dual_pair(model.drift(times[k + 1], y1), y1) + sp.h_inner(force, y1))
        worst = max(worst, abs(float(sp.h_norm(y1) ** 2 - sp.h_norm(x0) ** 2 - total)))
    return worst


def _guard(model, epsilon, force):
    if epsilon < 0:
        raise DomainError(f"epsilon must be nonnegative, got {epsilon}")
    prof = model.profile
    if prof.regime == "B" and epsilon > prof.eps0_guard and not force:
        raise GuardError(
            f"epsilon={epsilon} exceeds the admissible noise level {prof.eps0_guard:.6g} "
            f"for {model.name!r}; pass force to override")


def brownian_increments(seed, sample_ids, grid, m):
    """Increments ``dW`` of shape ``(len(sample_ids), K, m)``; one stream per sample."""
    scale = np.sqrt(grid.step)
    return np.stack([stream(seed, (int(s),)).standard_normal((grid.num_steps, m)) * scale
                     for s in sample_ids])


def simulate_controlled_spde(model, x0, h, epsilon, grid, seed=0, M_stop=None, scheme_opts=None,
                             *, force=False, sample=0):
    """One path of ``dX = A dt + B h dt + eps B dW`` with stopping diagnostics."""
    opts = scheme_opts or SchemeOptions()
    x0 = _check_inputs(model, x0, h)
    _guard(model, float(epsilon), force)
    inc = brownian_increments(seed, [sample], grid, model.noise_modes) if epsilon else None
    res, traj = _single(model, x0, h, grid, opts, epsilon=float(epsilon), increments=inc,
                        stop_M=M_stop)
    hit = res["hit_time"][0]
    record = StopRecord(M_stop, None if np.isnan(hit) else float(hit), str(res["reason"][0]))
    return traj, record


@dataclass
class BatchResult:
    sample_ids: np.ndarray
    final: np.ndarray
    sup_h_norm: np.ndarray
    v_integral: np.ndarray
    sup_distance: np.ndarray | None
    failures: int = 0


def simulate_batch(model, x0, h, epsilon, grid, seed, num_samples, *, reference=None,
                   scheme_opts=None, workers=1, force=False, first_sample=0):
    """Many independent paths; sample ``i`` always uses stream ``(seed, i)``.

    Samples are processed in fixed chunks, so results do not depend on
    ``workers``.  ``reference`` is an optional path ``(K+1, N)`` whose sup-norm
    distance to each sample is recorded.  A chunk whose solve fails is rerun
    sample by sample; samples that still fail get NaN entries and are counted
    in ``failures``.
    """
    opts = scheme_opts or SchemeOptions()
    x0 = _check_inputs(model, x0, h)
    _guard(model, float(epsilon), force)
    ids = np.arange(first_sample, first_sample + num_samples)
    chunks = [ids[i:i + CHUNK] for i in range(0, ids.size, CHUNK)]
    keys = ["final", "sup_h_norm", "v_integral"] + (["sup_distance"] if reference is not None else [])

    def solve(chunk):
        inc = brownian_increments(seed, chunk, grid, model.noise_modes) if epsilon else None
        x = np.broadcast_to(x0, (chunk.size, x0.size)).copy()
        res = _integrate(model, x, h, grid, opts, epsilon=float(epsilon), increments=inc,
                         keep_path=False, reference=reference)
        return {k: res[k] for k in keys}

    def run(chunk):
        try:
            return solve(chunk), 0
        except SolverError:
            rows, failed = [], 0
            for i in chunk:
                try:
                    rows.append(solve(np.array([i])))
                except SolverError:
                    failed += 1
                    rows.append({"final": np.full((1, x0.size), np.nan),
                                 **{k: np.full(1, np.nan) for k in keys if k != "final"}})
            return {k: np.concatenate([r[k] for r in rows]) for k in keys}, failed

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, chunks))
    else:
        parts = [run(c) for c in chunks]
    cat = lambda key: np.concatenate([p[0][key] for p in parts])
    return BatchResult(ids, cat("final"), cat("sup_h_norm"), cat("v_integral"),
                       cat("sup_distance") if reference is not None else None,
                       sum(p[1] for p in parts))


def moment_scan(model, x0, h_family, epsilons, q_list, num_samples, grid, seed=0, *,
                scheme_opts=None, workers=1, force=False):
    """Empirical ``E[sup_t ||X||_H^q + (int ||X||_V^alpha dt)^{q/2}]`` per (control, eps, q).

    Rows carry a ``blowup`` flag when a moment exceeds twice the value at the
    largest epsilon for the same control and q.
    """
    eps = [float(e) for e in epsilons]
    if any(a < b for a, b in zip(eps, eps[1:])):
        raise ConfigurationError("epsilons must be listed in decreasing order")
    qs = [float(q) for q in q_list]
    if any(not 2 <= q <= 8 for q in qs):
        raise ConfigurationError("moment orders must lie in [2, 8]")
    controls = h_family if isinstance(h_family, (list, tuple)) else [h_family]
    rows = []
    for ci, h in enumerate(controls):
        top = {}
        for e in eps:
            try:
                res = simulate_batch(model, x0, h, e, grid, seed, 1 if e == 0 else num_samples,
                                     scheme_opts=scheme_opts, workers=workers, force=force)
                error = None
            except Exception as exc:  # reported per cell
                res, error = None, f"{type(exc).__name__}: {exc}"
            for q in qs:
                row = {"control": ci, "epsilon": e, "q": q}
                if res is None:
                    row.update(moment=float("nan"), stderr=float("nan"), error=error, blowup=False)
                else:
                    vals = res.sup_h_norm ** q + res.v_integral ** (q / 2)
                    se = float(np.std(vals, ddof=1) / np.sqrt(vals.size)) if vals.size > 1 else 0.0
                    row.update(moment=float(np.mean(vals)), stderr=se, error=None)
                    top.setdefault(q, row["moment"])
                    row["blowup"] = bool(row["moment"] > 2 * top[q])
                rows.append(row)
    return rows
