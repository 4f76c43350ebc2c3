"""Acceptance suite: one check per criterion, each printing a PASS/FAIL line.

Run ``pytest tests/test_acceptance.py -v`` (the lines are printed even with
output capture on) or ``python3 tests/test_acceptance.py`` for the lines alone.
A criterion passes only if its check holds and it finishes within its budget.
"""
import contextlib
import io
import math
import os
import sys
import tempfile
import time

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from ldplab.cli import main as cli_main  # noqa: E402
from ldplab.dynamics import (Control, TimeGrid, energy_identity_residual,  # noqa: E402
                             galerkin_convergence, simulate_batch, solve_skeleton)
from ldplab.hypotheses import run_full_audit  # noqa: E402
from ldplab.models import builtin_model, builtin_models  # noqa: E402
from ldplab.montecarlo import (condition_a_scan, distance_ratio_check,  # noqa: E402
                               estimate_exceedance, fit_ldp_slope)
from ldplab.rate import (RateProblem, _forward_path, _objective, adjoint_gradient,  # noqa: E402
                         forward_map, rate_endpoint, weak_convergence_probe)
from ldplab.spaces import SpaceDiscretization  # noqa: E402
from ldplab.storage import MANIFEST_NAME, verify_manifest  # noqa: E402

from conftest import smooth_state  # noqa: E402
from oracles import linear_response  # noqa: E402

# Frozen from oracles.ou_endpoint_exceedance((2 pi)^2, eps, 0.02, 0.1) for eps = 0.2, 0.1.
ENDPOINT_ORACLE = {0.2: 0.3741417192482766, 0.1: 0.07548862018909654}
# Frozen from oracles.lq_energy((2 pi)^2, amplitude, 0.1) for amplitude 1 and 0.1.
LQ_UNIT = 39.49312276222481
LQ_BALL = 0.39493122762224814

CRITERIA = []


def criterion(number, title, budget):
    def register(fn):
        CRITERIA.append((number, title, budget, fn))
        return fn
    return register


def run_criterion(number):
    _, title, budget, fn = next(c for c in CRITERIA if c[0] == number)
    start = time.perf_counter()
    ok, detail = fn()
    elapsed = time.perf_counter() - start
    within = budget is None or elapsed <= budget
    limit = "no limit" if budget is None else f"limit {budget:.0f}s"
    verdict = "PASS" if ok and within else "FAIL"
    line = f"[{verdict}] criterion {number:2d} {title}: {detail} ({elapsed:.1f}s, {limit})"
    return ok and within, line


# -- 1 ------------------------------------------------------------------------------

@criterion(1, "hypothesis audits", 120)
def audits():
    bad = []
    for model in builtin_models(64):
        reports = run_full_audit(model, 10_000, seed=7)
        bad += [f"{model.name}:{r.hypothesis_id}" for r in reports if not r.passed]
    failed = {}
    for name in ("adversarial_discontinuous", "adversarial_zero"):
        reports = run_full_audit(builtin_model(name, 64), 10_000, seed=7)
        failed[name] = {r.hypothesis_id for r in reports if not r.passed}
    intended = "H1" in failed["adversarial_discontinuous"] and "H3" in failed["adversarial_zero"]
    detail = (f"8 built-in models, failing audits: {bad or 'none'}; counterexamples fail "
              f"{sorted(failed['adversarial_discontinuous'])} and {sorted(failed['adversarial_zero'])}")
    return not bad and intended, detail


# -- 2 ------------------------------------------------------------------------------

@criterion(2, "p-Laplace monotonicity constant", 10)
def monotonicity():
    from ldplab.models import make_p_laplace
    space = SpaceDiscretization("dirichlet", 64)
    rng = np.random.default_rng(2)
    worst = {}
    for p in (2.0, 3.0, 4.0):
        model = make_p_laplace(p, space)
        scale = rng.lognormal(sigma=1.5, size=(2, 1000, 1))
        u, v = rng.standard_normal((2, 1000, 64)) * scale
        pairing = -space.dual_pair(model.drift(0.0, u) - model.drift(0.0, v), u - v)
        bound = 2.0 ** (2 - p) * space.v_norm_pow(u - v, p)
        worst[p] = float(np.min((pairing - bound) / (np.abs(pairing) + np.abs(bound))))
    ok = all(w >= -1e-9 for w in worst.values())
    return ok, "min relative slack " + ", ".join(f"p={p:g}: {w:.3g}" for p, w in worst.items())


# -- 3 ------------------------------------------------------------------------------

@criterion(3, "energy identity first order", 60)
def energy_identity():
    horizon = 0.1
    coarse = TimeGrid(horizon, 10)
    ratios = []
    for model in builtin_models(64):
        x0 = smooth_state(model.space)
        rng = np.random.default_rng(5)
        controls = [Control.zero(coarse, model.noise_modes),
                    Control(coarse, rng.standard_normal((10, model.noise_modes)))]
        for base in controls:
            res = []
            for steps in (100, 200):
                h = base.refine(steps // 10)
                res.append(energy_identity_residual(solve_skeleton(model, x0, h, h.grid), model, h))
            ratios.append((model.name, res[1] / res[0]))
    bad = [(n, round(r, 3)) for n, r in ratios if not 0.3 <= r <= 0.7]
    lo = min(r for _, r in ratios)
    hi = max(r for _, r in ratios)
    return not bad, f"{len(ratios)} runs, ratio range [{lo:.3f}, {hi:.3f}], outside: {bad or 'none'}"


# -- 4 ------------------------------------------------------------------------------

@criterion(4, "Galerkin levels converge", 120)
def galerkin():
    model = builtin_model("burgers", 64)
    x = model.space.nodes
    x0 = np.sin(2 * np.pi * x) + 0.5 * np.cos(4 * np.pi * x)
    grid = TimeGrid(0.1, 1000)
    rows = galerkin_convergence(model, x0, Control.constant(grid, [1.0]), grid, [8, 16, 32, 64])
    gains = []
    for key in ("sup_dual_distance", "l2_h_distance"):
        d = [r[key] for r in rows]
        gains += [d[i] / d[i + 1] for i in range(2)]
    return min(gains) >= 1.5, "reduction per doubling " + ", ".join(f"{g:.2f}" for g in gains)


# -- 5 ------------------------------------------------------------------------------

@criterion(5, "linear model statistics", 180)
def linear_statistics():
    n, steps, horizon, eps, samples = 32, 1000, 0.1, 0.5, 10_000
    model = builtin_model("heat", n)
    sp = model.space
    grid = TimeGrid(horizon, steps)
    # Implicit Euler on e_1: z_{k+1} = (z_k + eps dW_k) / (1 + lam dt).
    lam = 4 * n * n * math.sin(math.pi / n) ** 2
    r = 1.0 / (1.0 + lam * grid.step)
    mean = r ** steps
    var = eps ** 2 * grid.step * r * r * (1 - r ** (2 * steps)) / (1 - r * r)
    res = simulate_batch(model, sp.basis_vector(1), Control.zero(grid), eps, grid, 1, samples)
    z = sp.coefficients(res.final, 1)[:, 0]
    mean_ok = abs(z.mean() - mean) < 3 * math.sqrt(var / samples)
    var_ok = abs(z.var(ddof=1) / var - 1) < 0.1
    parts = [f"mean {z.mean():.4g} vs {mean:.4g}, variance ratio {z.var(ddof=1) / var:.3f}"]
    ci_ok = True
    for e, oracle in ENDPOINT_ORACLE.items():
        est = estimate_exceedance(model, sp.zeros(), Control.zero(grid), e, 0.02, samples, grid,
                                  seed=5, event="endpoint")
        inside = est.ci_low <= oracle <= est.ci_high
        ci_ok &= inside
        parts.append(f"eps={e}: oracle {oracle:.4f} in [{est.ci_low:.4f}, {est.ci_high:.4f}]"
                     f" {'yes' if inside else 'no'}")
    return mean_ok and var_ok and ci_ok, "; ".join(parts)


# -- 6 ------------------------------------------------------------------------------

@criterion(6, "small-noise exceedance and path distance", 300)
def condition_a():
    # delta = 0.05: a wider tube leaves no hits at all at 2000 samples, so the
    # monotonicity check would be vacuous.
    horizon = 0.1
    grid = TimeGrid(horizon, 100)
    epsilons = [0.2, 0.1, 0.05, 0.025]
    bad, worst = [], 0.0
    for model in builtin_models(32):
        m = model.noise_modes
        h = Control.constant(grid, [math.sqrt(2 / horizon / m)] * m)
        scan = condition_a_scan(model, smooth_state(model.space), h, epsilons, 0.05, 2000, grid,
                                seed=3)
        monotone = all(b.ci_low <= a.ci_high for a, b in zip(scan, scan[1:]))
        halving, ratio = distance_ratio_check(scan)
        worst = max(worst, ratio)
        if not (monotone and halving):
            bad.append(model.name)
    return not bad, f"8 models, worst distance ratio {worst:.3f} (<= 0.75), failing: {bad or 'none'}"


# -- 7 ------------------------------------------------------------------------------

@criterion(7, "weakly null controls", 60)
def condition_b():
    freqs = [1, 2, 4, 8, 16]
    grid = TimeGrid(1.0, 512)
    # Noise on the constant mode: the scalar response is int_0^t sin(2 pi n s) ds.
    heat = builtin_model("heat", 16, modes=(3,))
    rows = weak_convergence_probe(heat, np.zeros(16), Control.zero(grid), [1.0], freqs)
    heat_d = [r["distance"] for r in rows]
    times = np.linspace(0, 1, 20001)
    oracle = [float(np.max(np.abs(linear_response(0.0, n, times)))) for n in freqs]
    law = max(abs(d / o - 1) for d, o in zip(heat_d, oracle))
    burgers = builtin_model("burgers", 32)
    rows = weak_convergence_probe(burgers, smooth_state(burgers.space), Control.zero(grid), [1.0],
                                  freqs)
    burg_d = [r["distance"] for r in rows]
    ok = law <= 0.2
    for d in (heat_d, burg_d):
        ok &= all(b < a for a, b in zip(d, d[1:])) and d[-1] / d[0] < 0.25
    return ok, (f"final/first heat {heat_d[-1] / heat_d[0]:.3f}, burgers "
                f"{burg_d[-1] / burg_d[0]:.3f}; worst deviation from oracle {law:.2g}")


# -- 8 ------------------------------------------------------------------------------

@criterion(8, "rate function", 300)
def rate_function():
    parts, ok = [], True
    grid = TimeGrid(0.1, 64)
    # (i) the uncontrolled endpoint
    zero_ok = True
    for model in builtin_models(32):
        x0 = smooth_state(model.space)
        free = solve_skeleton(model, x0, Control.zero(grid, model.noise_modes), grid).final
        res = rate_endpoint(RateProblem(model, x0, free, grid, 16))
        zero_ok &= res.value == 0.0 and not np.any(res.control.values)
    parts.append(f"(i) zero cost {'exact' if zero_ok else 'not exact'}")
    ok &= zero_ok
    # (ii) planted controls
    rng = np.random.default_rng(1)
    worst_gap, worst_res = -np.inf, 0.0
    for model in builtin_models(32):
        x0 = smooth_state(model.space)
        base = RateProblem(model, x0, x0, grid, 16)
        planted = Control(base.control_grid, 6.0 * rng.standard_normal((16, model.noise_modes)))
        target = forward_map(model, x0, base.solver_control(planted.values), grid).final
        res = rate_endpoint(RateProblem(model, x0, target, grid, 16))
        worst_gap = max(worst_gap, res.value - planted.energy)
        worst_res = max(worst_res, res.constraint_residual)
    planted_ok = worst_gap <= 1e-3 and worst_res <= 1e-3
    parts.append(f"(ii) max value - planted {worst_gap:.3g}, max residual {worst_res:.2g}")
    ok &= planted_ok
    # (iii) linear-quadratic value
    heat = builtin_model("heat", 64)
    res = rate_endpoint(RateProblem(heat, heat.space.zeros(), heat.space.basis_vector(1),
                                    TimeGrid(0.1, 1024), 64))
    lq_err = abs(res.value / LQ_UNIT - 1)
    parts.append(f"(iii) LQ {res.value:.4f} vs {LQ_UNIT:.4f}")
    ok &= lq_err <= 0.02
    # (iv) adjoint gradient against central differences
    worst_fd = 0.0
    for model in builtin_models(32):
        x0 = smooth_state(model.space)
        problem = RateProblem(model, x0, 0.5 * x0, grid, 16, newton_tol=1e-13)
        h = Control(problem.control_grid, rng.standard_normal((16, model.noise_modes)))
        grad = adjoint_gradient(problem, h, penalty=10.0)
        for _ in range(5):
            d = rng.standard_normal(h.values.shape)
            f = [_objective(problem, v, _forward_path(problem, v)[0], 10.0)
                 for v in (h.values + 1e-6 * d, h.values - 1e-6 * d)]
            fd = (f[0] - f[1]) / 2e-6
            worst_fd = max(worst_fd, abs(fd - np.sum(grad * d)) / abs(fd))
    parts.append(f"(iv) worst gradient error {worst_fd:.2g}")
    ok &= worst_fd <= 1e-4
    return ok, "; ".join(parts)


# -- 9 ------------------------------------------------------------------------------

@criterion(9, "small-noise slope", 600)
def ldp_slope():
    # Two decaying noise modes make the endpoint deviation isotropic, so
    # eps^2 log P equals minus the rate with no prefactor.
    model = builtin_model("heat", 16, modes=(1, 2))
    grid = TimeGrid(0.1, 100)
    cells = [estimate_exceedance(model, model.space.zeros(), Control.zero(grid, 2), e, 0.1,
                                 100_000, grid, seed=9, event="endpoint")
             for e in (0.5, 0.4, 0.3, 0.25)]
    fit = fit_ldp_slope(cells)
    err = abs(fit.fitted_slope / -LQ_BALL - 1)
    hits = [c.hits for c in cells]
    return err <= 0.15, (f"plateau {fit.fitted_slope:.4f} vs {-LQ_BALL:.4f} "
                         f"({100 * err:.1f}% off), hits {hits}")


# -- 10 -----------------------------------------------------------------------------

REPRO_RUNS = [
    ["check-hypotheses", "--model", "burgers", "--grid-n", "16", "--samples", "300"],
    ["solve-skeleton", "--model", "p_laplace", "--param", "p=3", "--grid-n", "16", "--steps", "50"],
    ["simulate", "--model", "quasilinear", "--grid-n", "16", "--steps", "50", "--epsilon", "0.2",
     "--samples", "300"],
    ["galerkin-convergence", "--model", "burgers", "--grid-n", "32", "--steps", "50",
     "--levels", "4,8,16"],
    ["rate", "--model", "heat", "--grid-n", "16", "--steps", "32", "--x0", "zero", "--K", "8"],
    ["mc-ldp", "--model", "p_laplace_gradient", "--param", "p=3", "--grid-n", "16", "--steps",
     "50", "--x0", "zero", "--epsilons", "0.3,0.2,0.1", "--delta", "0.01", "--samples", "600"],
]


@criterion(10, "reproducible across worker counts", None)
def reproducibility():
    mismatched = []
    with tempfile.TemporaryDirectory() as root:
        target = os.path.join(root, "target.txt")
        x = np.arange(16) / 16
        with open(target, "w", encoding="utf-8") as fh:
            fh.write(",".join(repr(float(v)) for v in 0.3 * np.sin(2 * np.pi * x)) + "\n")
        for argv in REPRO_RUNS:
            extra = ["--target-file", target] if argv[0] == "rate" else []
            seen = []
            for tag, workers in (("a", "1"), ("b", "1"), ("c", "8")):
                out = os.path.join(root, f"{argv[0]}-{tag}")
                with contextlib.redirect_stdout(io.StringIO()):
                    code = cli_main(argv + extra + ["--seed", "17", "--workers", workers,
                                                    "--output", out])
                if code != 0 or not verify_manifest(out):
                    mismatched.append(f"{argv[0]} exit {code}")
                files = {}
                for name in sorted(os.listdir(out)):
                    if name != MANIFEST_NAME:
                        with open(os.path.join(out, name), "rb") as fh:
                            files[name] = fh.read()
                seen.append(files)
            if not (seen[0] and seen[0] == seen[1] == seen[2]):
                mismatched.append(argv[0])
    return not mismatched, (f"{len(REPRO_RUNS)} experiment kinds x 3 runs, "
                            f"differing: {mismatched or 'none'}")


# -- pytest entry -------------------------------------------------------------------

@pytest.mark.parametrize("number", [c[0] for c in CRITERIA], ids=lambda n: f"criterion_{n}")
def test_criterion(number, capsys):
    ok, line = run_criterion(number)
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


if __name__ == "__main__":
    results = [run_criterion(c[0]) for c in CRITERIA]
    for _, line in results:
        print(line, flush=True)
    sys.exit(0 if all(ok for ok, _ in results) else 1)
