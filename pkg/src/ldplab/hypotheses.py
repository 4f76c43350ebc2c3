"""Randomized audits of a model's declared hypothesis constants.

Each audit samples times and states, evaluates an inequality residual
(right-hand side minus left-hand side) and keeps the worst one.  Inequality
residuals are reported relative to ``1 + |LHS| + |RHS|`` and pass when they are
at least ``-1e-9``.  Sampling is block-wise from counter-based streams, so the
first K samples of a 2K-sample audit are exactly the K-sample audit.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .rng import stream

TOLERANCE = 1e-9
BLOCK = 256
TIME_GRID = 16

PART_A_IDS = ("H1", "H2", "H2prime", "H3", "H4", "H5")
PART_B_IDS = ("H1s", "H2s", "H3s", "H4s", "H5s")

# Stream tags keep the audits' random draws independent of each other.
_TAGS = {"H1": 1, "H2": 2, "H3": 3, "H4": 4, "H5": 5}


@dataclass
class AuditReport:
    hypothesis_id: str
    samples: int
    worst_residual: float
    worst_witness: dict
    verdict: str
    details: dict = field(default_factory=dict)

    @property
    def passed(self):
        return self.verdict == "pass"

    def csv_row(self):
        return [self.hypothesis_id, self.samples, repr(float(self.worst_residual)), self.verdict]

    def to_dict(self):
        return {"hypothesis_id": self.hypothesis_id, "samples": self.samples,
                "worst_residual": float(self.worst_residual), "verdict": self.verdict,
                "worst_witness": self.worst_witness, "details": self.details}


# -- sampling ---------------------------------------------------------------------

class _Sampler:
    """Deterministic block sampler of times and random states."""

    def __init__(self, model, seed, tag, horizon=1.0):
        self.model = model
        self.space = model.space
        self.seed = seed
        self.tag = tag
        self.horizon = horizon
        lam = np.clip(self.space.eigenvalues, 0.0, None)
        self.decay = (1.0 + np.sqrt(lam) / np.pi) ** -1.5

    def _block(self, b):
        rng = stream(self.seed, (self.tag, b))
        n = self.space.num_points
        return {
            "t": rng.uniform(0.0, self.horizon, BLOCK),
            "coef": rng.standard_normal((3, BLOCK, n)),
            "amp": 10.0 ** rng.uniform(-2.0, 2.0, (3, BLOCK)),
            "mix": rng.uniform(0.0, 1.0, BLOCK),
            "gap": 10.0 ** rng.uniform(-3.0, 0.0, BLOCK),
        }

    def draw(self, samples):
        blocks = [self._block(b) for b in range(-(-samples // BLOCK))]
        out = {k: np.concatenate([blk[k] for blk in blocks], axis=-1)[..., :samples]
               for k in ("t", "mix", "gap", "amp")}
        coef = np.concatenate([blk["coef"] for blk in blocks], axis=1)[:, :samples]
        # The first samples sit on a fixed time grid.
        grid = np.linspace(0.0, self.horizon, TIME_GRID)
        k = min(samples, TIME_GRID)
        out["t"][:k] = grid[:k]
        states = []
        for j in range(3):
            s = self.space.synthesize(coef[j] * self.decay)
            s = s / self.space.h_norm(s)[:, None]
            states.append(s * out["amp"][j][:, None])
        out["states"] = states
        return out


def _witness(t, *vectors):
    names = ("u", "v", "x")
    wit = {"t": float(t)}
    for name, vec in zip(names, vectors):
        wit[name] = [float(x) for x in vec]
    return wit


def _inequality_report(hid, samples, lhs, rhs, t, u, v=None, details=None):
    rel = (rhs - lhs) / (1.0 + np.abs(lhs) + np.abs(rhs))
    i = int(np.argmin(rel))
    worst = float(rel[i])
    vecs = (u[i],) if v is None else (u[i], v[i])
    return AuditReport(hid, samples, worst, _witness(t[i], *vecs),
                       "pass" if worst >= -TOLERANCE else "fail", details or {})


def _noise_norm2(space, b):
    return space.mesh_width * np.sum(b * b, axis=(-2, -1))


def _eval_drift(model, t, u):
    # Models are time-homogeneous or accept a time per sample via broadcasting.
    return _per_time(model.drift, t, u)


def _eval_diffusion(model, t, u):
    return _per_time(model.diffusion, t, u)


def _per_time(fn, t, u):
    try:
        return fn(t[:, None] if np.ndim(t) else t, u)
    except (ValueError, IndexError):
        return np.stack([fn(float(ti), ui) for ti, ui in zip(t, u)])


def _regime(model, regime):
    regime = model.profile.regime if regime is None else regime
    if regime not in ("A", "B"):
        raise ConfigurationError(f"regime must be 'A' or 'B', got {regime!r}")
    return regime


# -- audits ---------------------------------------------------------------------------

def audit_hemicontinuity(model, samples=1000, lambda_grid=None, *, seed=0, modulus=1.0,
                         refinements=40, regime=None):
    """Largest jump of ``lambda -> <A(u + lambda v), x>`` per square-root step.

    The largest adjacent jump on ``lambda_grid`` is followed through
    ``refinements`` bisections; a continuous map then shows a jump that is
    negligible against ``sqrt(width)``, a discontinuous one keeps an O(1) jump.
    """
    regime = _regime(model, regime)
    hid = "H1" if regime == "A" else "H1s"
    grid = np.linspace(-1.0, 1.0, 65) if lambda_grid is None else np.sort(np.asarray(lambda_grid, float))
    if grid.size < 64 or grid[0] > -1.0 or grid[-1] < 1.0:
        raise ConfigurationError("lambda_grid must span [-1, 1] with at least 64 points")
    space = model.space
    draw = _Sampler(model, seed, _TAGS["H1"]).draw(samples)
    t = draw["t"]
    u, v, x = draw["states"]
    worst = np.zeros(samples)

    def phi(lam):
        arg = u + lam[..., None] * v
        return space.dual_pair(_eval_drift(model, t, arg), x)

    vals = np.stack([phi(np.full(samples, g)) for g in grid], axis=-1)
    scale = 1.0 + np.max(np.abs(vals), axis=-1)
    jumps = np.abs(np.diff(vals, axis=-1))
    k = np.argmax(jumps, axis=-1)
    rows = np.arange(samples)
    lo, hi = grid[k], grid[k + 1]
    flo, fhi = vals[rows, k], vals[rows, k + 1]
    for _ in range(refinements):
        mid = 0.5 * (lo + hi)
        fmid = phi(mid)
        left = np.abs(fmid - flo) >= np.abs(fhi - fmid)
        hi = np.where(left, mid, hi)
        fhi = np.where(left, fmid, fhi)
        lo = np.where(left, lo, mid)
        flo = np.where(left, flo, fmid)
    width = hi - lo
    worst = np.abs(fhi - flo) / (scale * np.sqrt(width))
    i = int(np.argmax(worst))
    value = float(worst[i])
    return AuditReport(hid, samples, value, _witness(t[i], u[i], v[i], x[i]),
                       "pass" if value <= modulus else "fail",
                       {"modulus": modulus, "grid_points": int(grid.size)})


def _monotone_pairs(model, samples, seed):
    draw = _Sampler(model, seed, _TAGS["H2"]).draw(samples)
    u, v, w = draw["states"]
    # Half the pairs are independent, half are close to each other.
    near = draw["mix"] < 0.5
    step = w / model.space.h_norm(w)[:, None] * (draw["gap"] * model.space.h_norm(u))[:, None]
    v = np.where(near[:, None], u + step, v)
    return draw["t"], u, v


def _envelope(model, regime, u, v):
    prof = model.profile
    sp = model.space
    c = prof.envelope_C
    hu, hv = sp.h_norm(u), sp.h_norm(v)
    vu, vv = sp.v_norm(u), sp.v_norm(v)
    a = prof.alpha
    if regime == "A":
        return c * ((1 + vu ** a) * (1 + hu ** prof.gamma) + (1 + vv ** a) * (1 + hv ** prof.gamma))
    rho = c * (1 + hu ** prof.kappa_value) + c * vu ** prof.theta * (1 + hu ** prof.gamma)
    eta = c * (1 + hv ** (2 + prof.beta)) + c * vv ** a * (1 + hv ** prof.beta)
    return rho + eta


def audit_local_monotonicity(model, samples=1000, *, seed=0, regime=None):
    """Local monotonicity with the summed envelope ``rho(u) + eta(v)``."""
    regime = _regime(model, regime)
    prof = model.profile
    if prof.envelope_C is None:
        raise ConfigurationError(f"model {model.name!r} declares no monotonicity envelope")
    sp = model.space
    t, u, v = _monotone_pairs(model, samples, seed)
    w = u - v
    weight = 1.0 if regime == "A" else prof.delta_noise ** 2
    db = _eval_diffusion(model, t, u) - _eval_diffusion(model, t, v)
    lhs = (2 * sp.dual_pair(_eval_drift(model, t, u) - _eval_drift(model, t, v), w)
           + weight * _noise_norm2(sp, db))
    rhs = (prof.f_at(t) + _envelope(model, regime, u, v)) * sp.h_norm(w) ** 2
    return _inequality_report("H2" if regime == "A" else "H2s", samples, lhs, rhs, t, u, v)


def local_bound_constant(model, radius, t=0.0, regime=None):
    """Constant K_R implied by the declared envelope on the V-ball of radius R.

    Uses ``||u||_H <= ||u||_V``, which holds for every supported norm.
    """
    regime = _regime(model, regime)
    prof = model.profile
    c = prof.envelope_C or 0.0
    r = float(radius)
    a = prof.alpha
    if regime == "A":
        env = 2 * c * (1 + r ** a) * (1 + r ** prof.gamma)
    else:
        env = c * ((1 + r ** prof.kappa_value) + r ** prof.theta * (1 + r ** prof.gamma)
                   + (1 + r ** (2 + prof.beta)) + r ** a * (1 + r ** prof.beta))
    return 0.5 * (float(prof.f_at(t)) + env)


def audit_generalized_monotonicity(model, samples=1000, radius=1.0, *, seed=0):
    """``<A(u)-A(v), u-v> <= K_R ||u-v||_H^2`` on pairs rescaled into the V-ball."""
    sp = model.space
    t, u, v = _monotone_pairs(model, samples, seed)
    u = u * np.minimum(1.0, radius / np.maximum(sp.v_norm(u), 1e-300))[:, None]
    v = v * np.minimum(1.0, radius / np.maximum(sp.v_norm(v), 1e-300))[:, None]
    w = u - v
    lhs = sp.dual_pair(_eval_drift(model, t, u) - _eval_drift(model, t, v), w)
    k_r = np.array([local_bound_constant(model, radius, ti, "A") for ti in t])
    rhs = k_r * sp.h_norm(w) ** 2
    return _inequality_report("H2prime", samples, lhs, rhs, t, u, v, {"radius": radius})


def _coercivity_parts(model, samples, seed):
    """Per-sample ``2<A(u),u>``, ``||B(u)||^2`` and the declared right-hand side."""
    sp = model.space
    prof = model.profile
    draw = _Sampler(model, seed, _TAGS["H3"]).draw(samples)
    t, u = draw["t"], draw["states"][0]
    pair = 2 * sp.dual_pair(_eval_drift(model, t, u), u)
    noise = _noise_norm2(sp, _eval_diffusion(model, t, u))
    rhs = prof.f_at(t) * (1 + sp.h_norm(u) ** 2) - prof.coercivity_c * sp.v_norm_pow(u, prof.alpha)
    return t, u, pair, noise, rhs


def audit_coercivity(model, samples=1000, *, seed=0, regime=None):
    """Coercivity residual; the noise weight is 1 (regime A) or ``p - 1`` (regime B)."""
    regime = _regime(model, regime)
    t, u, pair, noise, rhs = _coercivity_parts(model, samples, seed)
    weight = 1.0 if regime == "A" else model.profile.coercivity_p - 1.0
    report = _inequality_report("H3" if regime == "A" else "H3s", samples,
                                pair + weight * noise, rhs, t, u)
    if regime == "B":
        report.details["max_coercivity_p"] = max_coercivity_exponent(model, samples, seed=seed)
    return report


def max_coercivity_exponent(model, samples=1000, *, seed=0, upper=64.0, iters=60):
    """Largest exponent p for which the regime-B coercivity audit passes (bisection)."""
    t, u, pair, noise, rhs = _coercivity_parts(model, samples, seed)

    def ok(p):
        lhs = pair + (p - 1.0) * noise
        rel = (rhs - lhs) / (1.0 + np.abs(lhs) + np.abs(rhs))
        return bool(np.all(rel >= -TOLERANCE))

    lo, hi = 1.0, float(upper)
    if not ok(lo):
        return float("nan")
    if ok(hi):
        return float("inf")
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if ok(mid) else (lo, mid)
    return lo


def _growth_parts(model, samples, seed, tag_offset=0):
    sp = model.space
    draw = _Sampler(model, seed, _TAGS["H4"] + 100 * tag_offset).draw(samples)
    t, u = draw["t"], draw["states"][0]
    a = model.profile.alpha
    lhs = sp.dual_norm(_eval_drift(model, t, u)) ** (a / (a - 1.0))
    return t, u, lhs


def _growth_rhs(model, regime, t, u, constant):
    sp = model.space
    prof = model.profile
    hu = sp.h_norm(u)
    vpow = sp.v_norm_pow(u, prof.alpha)
    f = prof.f_at(t)
    if regime == "A":
        return (f + constant * vpow) * (1 + hu ** prof.beta)
    return f * (1 + hu ** (2 + prof.beta)) + constant * vpow * (1 + hu ** prof.beta)


def audit_growth(model, samples=1000, *, seed=0, regime=None, constant=None):
    """Growth bound on ``||A(t,u)||_{V*}^{alpha/(alpha-1)}``."""
    regime = _regime(model, regime)
    constant = model.profile.growth_C if constant is None else constant
    if constant is None:
        raise ConfigurationError(f"model {model.name!r} declares no growth constant")
    t, u, lhs = _growth_parts(model, samples, seed)
    rhs = _growth_rhs(model, regime, t, u, constant)
    return _inequality_report("H4" if regime == "A" else "H4s", samples, lhs, rhs, t, u,
                              details={"constant": constant})


def calibrate_growth_constant(model, samples=1000, *, seed=0, regime=None):
    """Smallest growth constant consistent with a calibration sample.

    Draws from a stream disjoint from :func:`audit_growth`, so a fresh audit
    checks the calibrated value on unseen states.
    """
    regime = _regime(model, regime)
    t, u, lhs = _growth_parts(model, samples, seed, tag_offset=1)
    base = _growth_rhs(model, regime, t, u, 0.0)
    slope = _growth_rhs(model, regime, t, u, 1.0) - base
    ratio = np.where(slope > 0, (lhs - base) / np.where(slope > 0, slope, 1.0), 0.0)
    return float(max(0.0, np.max(ratio)))


def audit_b_continuity(model, samples=1000, *, seed=0, regime=None, probes=64, levels=20):
    """Growth of ``||B(t,u)||_{L2}^2`` and, in regime A, H-continuity along ``u + 2^-k w``."""
    regime = _regime(model, regime)
    sp = model.space
    prof = model.profile
    draw = _Sampler(model, seed, _TAGS["H5"]).draw(samples)
    t, u, w = draw["t"], draw["states"][0], draw["states"][1]
    rhs = prof.g_at(t) * (1 + sp.h_norm(u) ** 2)
    if regime == "B":
        rhs = rhs + prof.L_B * (1 + sp.v_norm_pow(u, prof.alpha))
    lhs = _noise_norm2(sp, _eval_diffusion(model, t, u))
    report = _inequality_report("H5" if regime == "A" else "H5s", samples, lhs, rhs, t, u)
    if regime == "A":
        n = min(probes, samples)
        tt, uu = t[:n], u[:n]
        ww = w[:n] / sp.h_norm(w[:n])[:, None]
        b0 = _eval_diffusion(model, tt, uu)
        dist = np.stack([np.sqrt(_noise_norm2(sp, _eval_diffusion(model, tt, uu + 2.0 ** -k * ww) - b0))
                         for k in range(levels + 1)], axis=-1)
        last, mid = dist[:, levels], dist[:, levels // 2]
        ok = bool(np.all(last < 1e-6) and np.all(last <= mid + 1e-15))
        report.details["continuity_max"] = float(np.max(last))
        report.details["continuity_decay"] = [float(x) for x in np.max(dist, axis=0)]
        if not ok:
            report.verdict = "fail"
    return report


def run_full_audit(model, samples=1000, *, seed=0, regime=None, radius=1.0):
    """All audits of the requested regime, in report order."""
    regime = _regime(model, regime)
    reports = [audit_hemicontinuity(model, samples, seed=seed, regime=regime),
               audit_local_monotonicity(model, samples, seed=seed, regime=regime)]
    if regime == "A":
        reports.append(audit_generalized_monotonicity(model, samples, radius, seed=seed))
    reports += [audit_coercivity(model, samples, seed=seed, regime=regime),
                audit_growth(model, samples, seed=seed, regime=regime),
                audit_b_continuity(model, samples, seed=seed, regime=regime)]
    return reports
