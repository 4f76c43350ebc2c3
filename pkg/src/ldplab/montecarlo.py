"""Monte Carlo exceedance probabilities and small-noise exponent fits."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .dynamics import Control, simulate_batch, solve_skeleton
from .errors import BudgetError, ConfigurationError, InsufficientDataError
from .rng import stream

Z95 = 1.959963984540054


def wilson_interval(hits, n, z=Z95):
    """Wilson score interval for a binomial proportion."""
    if n <= 0:
        return 0.0, 1.0
    p = hits / n
    denom = 1.0 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * np.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    lo = 0.0 if hits == 0 else max(0.0, float(centre - half))
    hi = 1.0 if hits == n else min(1.0, float(centre + half))
    return lo, hi


@dataclass
class ExceedanceEstimate:
    epsilon: float
    delta_threshold: float
    num_samples: int
    hits: int
    p_hat: float
    ci_low: float
    ci_high: float
    seed: int
    failures: int = 0
    event: str = "sup"
    distances: np.ndarray | None = field(default=None, repr=False)

    @property
    def eps2_log_p(self):
        if self.p_hat <= 0:
            return float("-inf")
        return self.epsilon ** 2 * float(np.log(self.p_hat))

    def row(self):
        return {"epsilon": self.epsilon, "samples": self.num_samples, "hits": self.hits,
                "p_hat": self.p_hat, "ci_low": self.ci_low, "ci_high": self.ci_high,
                "eps2_log_p": self.eps2_log_p, "failures": self.failures}


@dataclass
class SlopeFit:
    epsilons: list
    log_p: list
    fitted_slope: float
    r_squared: float


def _estimate(epsilon, delta, dist, seed, failures, event):
    ok = np.isfinite(dist)
    n = int(ok.sum())
    hits = int(np.sum(dist[ok] > delta))
    p_hat = hits / n if n else 0.0
    lo, hi = wilson_interval(hits, n)
    return ExceedanceEstimate(float(epsilon), float(delta), n, hits, p_hat, lo, hi, int(seed),
                              failures, event, dist)


def estimate_exceedance(model, x0, h, epsilon, delta, num_samples, grid, seed=0, *,
                        event="sup", workers=1, scheme_opts=None, force=False):
    """Fraction of paths leaving the ``delta``-tube around the skeleton path.

    ``event="sup"`` uses the sup-in-time H distance, ``"endpoint"`` the
    distance at the final time.  Failed samples are excluded from ``p_hat``
    and reported in ``failures``.
    """
    if num_samples < 1:
        raise ConfigurationError("num_samples must be at least 1")
    if event not in ("sup", "endpoint"):
        raise ConfigurationError(f"unknown event {event!r}")
    ref = solve_skeleton(model, x0, h, grid, scheme_opts).states
    res = simulate_batch(model, x0, h, epsilon, grid, seed, num_samples, reference=ref,
                         scheme_opts=scheme_opts, workers=workers, force=force)
    if event == "sup":
        dist = res.sup_distance
    else:
        dist = model.space.h_norm(res.final - ref[-1])
    return _estimate(epsilon, delta, dist, seed, res.failures, event)


def condition_a_scan(model, x0, h_family, epsilons, delta, num_samples, grid, seed=0, *,
                     budget=1.0, event="sup", workers=1, scheme_opts=None, force=False):
    """Exceedance of the controlled SPDE from its skeleton along an epsilon grid.

    ``h_family`` is one control, a list aligned with ``epsilons`` or a callable
    ``epsilon -> Control``.  Every control must satisfy ``energy <= budget``.
    """
    eps = [float(e) for e in epsilons]
    if callable(h_family):
        controls = [h_family(e) for e in eps]
    elif isinstance(h_family, Control):
        controls = [h_family] * len(eps)
    else:
        controls = list(h_family)
        if len(controls) != len(eps):
            raise ConfigurationError("one control per epsilon is required")
    for e, c in zip(eps, controls):
        if c.energy > budget * (1 + 1e-12):
            raise BudgetError(f"control for epsilon={e} has energy {c.energy:.6g} > budget {budget}")
    return [estimate_exceedance(model, x0, c, e, delta, num_samples, grid, seed, event=event,
                                workers=workers, scheme_opts=scheme_opts, force=force)
            for e, c in zip(eps, controls)]


def fit_ldp_slope(estimates, min_hits=5):
    """Plateau of ``eps^2 log p_hat`` over cells with at least ``min_hits`` hits.

    ``r_squared`` is the uncentred fraction of ``sum y^2`` explained by the
    constant, so an exact plateau gives 1.
    """
    cells = sorted((e for e in estimates if e.hits >= min_hits and e.p_hat > 0),
                   key=lambda e: -e.epsilon)
    if len(cells) < 3:
        raise InsufficientDataError(
            f"need at least 3 cells with >= {min_hits} hits, got {len(cells)}")
    eps = [c.epsilon for c in cells]
    if any(a <= b for a, b in zip(eps, eps[1:])):
        raise ConfigurationError("epsilons must be distinct")
    log_p = [float(np.log(c.p_hat)) for c in cells]
    y = np.array([e * e * lp for e, lp in zip(eps, log_p)])
    slope = float(np.mean(y))
    total = float(np.sum(y * y))
    r2 = 1.0 - float(np.sum((y - slope) ** 2)) / total if total > 0 else 1.0
    return SlopeFit(eps, log_p, slope, r2)


# -- oracles for the linear reference model ----------------------------------------

def ou_std(lambda_decay, epsilon, T):
    lam = float(lambda_decay)
    return float(epsilon) * np.sqrt(-np.expm1(-2 * lam * T) / (2 * lam))


def gaussian_oracle_linear(lambda_decay, epsilon, delta, T):
    """``P(|X_T| > delta)`` for ``dX = -lambda X dt + epsilon dW``, ``X_0 = 0``."""
    if not lambda_decay > 0:
        raise ConfigurationError("lambda_decay must be positive")
    if delta <= 0:
        return 1.0
    if epsilon == 0:
        return 0.0
    return float(2.0 * special.ndtr(-delta / ou_std(lambda_decay, epsilon, T)))


def log_gaussian_oracle_linear(lambda_decay, epsilon, delta, T):
    """Natural log of :func:`gaussian_oracle_linear`, finite far into the tail."""
    if delta <= 0:
        return 0.0
    if epsilon == 0:
        return float("-inf")
    return float(np.log(2.0) + special.log_ndtr(-delta / ou_std(lambda_decay, epsilon, T)))


def ou_exceedance_oracle(lambda_decay, epsilon, delta, grid, num_samples, seed=0, *,
                         event="sup", batch=20000):
    """Brute-force ``P(sup_k |Z_{t_k}| > delta)`` with exact OU transitions on ``grid``.

    Returns ``(p, stderr)``.
    """
    lam = float(lambda_decay)
    a = np.exp(-lam * grid.step)
    s = float(epsilon) * np.sqrt(-np.expm1(-2 * lam * grid.step) / (2 * lam))
    hits = 0
    done = 0
    for b in range(-(-num_samples // batch)):
        n = min(batch, num_samples - done)
        rng = stream(seed, (b,))
        z = np.zeros(n)
        peak = np.zeros(n)
        for _ in range(grid.num_steps):
            z = a * z + s * rng.standard_normal(n)
            peak = np.maximum(peak, np.abs(z))
        hits += int(np.sum((peak if event == "sup" else np.abs(z)) > delta))
        done += n
    p = hits / num_samples
    return p, float(np.sqrt(p * (1 - p) / num_samples))


def distance_ratio_check(scan, ratio=0.75):
    """Per-sample test ``d(eps_{k+1}) <= ratio * d(eps_k)`` along a halving epsilon scan."""
    worst = 0.0
    for a, b in zip(scan, scan[1:]):
        ok = np.isfinite(a.distances) & np.isfinite(b.distances) & (a.distances > 0)
        worst = max(worst, float(np.max(b.distances[ok] / a.distances[ok])))
    return worst <= ratio, worst
