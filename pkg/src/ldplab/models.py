"""Coefficient pairs (A, B) and their declared hypothesis constants.

A :class:`Model` bundles a drift ``A(t, u)`` (a dual vector), a diffusion
``B(t, u)`` (an ``N x m`` matrix whose columns are the images of the first m
directions of U) and a :class:`HypothesisProfile` holding the constants the
model claims to satisfy.  Every callable broadcasts over leading batch axes of
``u``.

Drifts are written in divergence form on the grid::

    A(u) = D*( a1(x_c, avg(u), Du) ) - a0(x_i, u, Du_node)

with ``D*`` the adjoint of the forward difference so that
``<A(u), v> = -h sum_c a1 (Dv)_c - h sum_i a0 v_i`` holds exactly.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import ConfigurationError, EllipticityError, UnsupportedExponentError
from .spaces import SpaceDiscretization


def as_weight(spec):
    """Normalize a time weight (constant, ``(times, values)`` table or callable)."""
    if callable(spec):
        return spec
    if isinstance(spec, (tuple, list)) and len(spec) == 2:
        times = np.asarray(spec[0], dtype=float)
        values = np.asarray(spec[1], dtype=float)
        return lambda t: np.interp(t, times, values)
    value = float(spec)
    return lambda t: value + 0.0 * np.asarray(t, dtype=float)


@dataclass(frozen=True)
class HypothesisProfile:
    """Constants declared for (H1)-(H5) (``regime="A"``) or (H1*)-(H5*) (``"B"``).

    ``envelope_C`` scales the summed monotonicity envelope rho(u) + eta(v);
    ``None`` means the model declares no envelope.  ``growth_C`` is the
    constant of the growth bound on ``||A(u)||_{V*}``.
    """

    regime: str
    alpha: float
    beta: float = 0.0
    gamma: float = 0.0
    theta: float = 0.0
    kappa: Optional[float] = None
    coercivity_c: float = 1.0
    coercivity_p: float = 2.0
    delta_noise: float = 1.0
    L_B: float = 0.0
    f: object = 0.0
    g: object = 0.0
    growth_C: Optional[float] = None
    envelope_C: Optional[float] = 0.0
    eps0: Optional[float] = None

    def __post_init__(self):
        if self.regime not in ("A", "B"):
            raise ConfigurationError(f"regime must be 'A' or 'B', got {self.regime!r}")
        if not self.alpha > 1:
            raise ConfigurationError("alpha_exponent must exceed 1")
        if not self.coercivity_c > 0:
            raise ConfigurationError("coercivity constant c must be positive")
        if self.beta < 0 or self.gamma < 0:
            raise ConfigurationError("beta and gamma must be nonnegative")
        if self.regime == "B":
            if not 0 <= self.theta < self.alpha:
                raise ConfigurationError("theta must lie in [0, alpha) for regime B")
            if not self.delta_noise > 0:
                raise ConfigurationError("delta_noise must be positive for regime B")
            if not self.coercivity_p > 1:
                raise ConfigurationError("coercivity exponent p must exceed 1")
            if self.L_B < 0:
                raise ConfigurationError("L_B must be nonnegative")

    @property
    def kappa_value(self):
        return 2.0 + self.beta if self.kappa is None else self.kappa

    @property
    def eps0_guard(self):
        return self.delta_noise if self.eps0 is None else self.eps0

    def f_at(self, t):
        return as_weight(self.f)(t)

    def g_at(self, t):
        return as_weight(self.g)(t)


@dataclass(frozen=True)
class NoiseSpec:
    """Diffusion coefficient with H-continuity metadata.

    ``lipschitz`` bounds ``||B(u) - B(v)||_{L2} <= L ||u - v||_H`` and
    ``growth`` bounds ``||B(u)||_{L2}^2 <= growth (1 + ||u||_H^2)``.
    """

    kind: str
    num_modes: int
    diffusion: Callable
    jacobian: Optional[Callable]
    lipschitz: float
    growth: float
    additive: bool = False


@dataclass(frozen=True, eq=False)
class Model:
    name: str
    space: SpaceDiscretization
    profile: HypothesisProfile
    noise_modes: int
    drift_fn: Callable
    diffusion_fn: Callable
    drift_jac_fn: Optional[Callable] = None
    diffusion_jac_fn: Optional[Callable] = None
    linear_operator: Optional[np.ndarray] = None
    additive_noise: bool = False
    divergence_form: bool = False
    params: dict = field(default_factory=dict)

    def drift(self, t, u):
        return self.drift_fn(t, self.space.check(u))

    def diffusion(self, t, u):
        return self.diffusion_fn(t, self.space.check(u))

    def drift_jacobian(self, t, u):
        u = self.space.check(u)
        if self.linear_operator is not None:
            return np.broadcast_to(self.linear_operator, u.shape + (u.shape[-1],))
        if self.drift_jac_fn is not None:
            return self.drift_jac_fn(t, u)
        return _fd_jacobian(lambda v: self.drift_fn(t, v), u)

    def control_term(self, t, u, h):
        """``B(t, u) h`` for ``h`` of shape ``(..., m)``."""
        return np.einsum("...nm,...m->...n", self.diffusion(t, u), h)

    def control_jacobian(self, t, u, h):
        """Derivative of ``u -> B(t, u) h``."""
        u = self.space.check(u)
        if self.additive_noise:
            return np.zeros(u.shape + (u.shape[-1],))
        if self.diffusion_jac_fn is not None:
            jac = self.diffusion_jac_fn(t, u)  # (..., m, N, N)
            return np.einsum("...mij,...m->...ij", jac, h)
        return _fd_jacobian(lambda v: self.control_term(t, v, h), u)

    def with_profile(self, **changes):
        return replace(self, profile=replace(self.profile, **changes))


def _fd_jacobian(fn, u, rel=1e-7):
    u = np.asarray(u, dtype=float)
    n = u.shape[-1]
    cols = []
    for j in range(n):
        step = rel * (1.0 + np.abs(u[..., j]))
        e = np.zeros(n)
        e[j] = 1.0
        up = u + step[..., None] * e
        um = u - step[..., None] * e
        cols.append((fn(up) - fn(um)) / (2 * step[..., None]))
    return np.stack(cols, axis=-1)


def _pointwise_derivative(fn, argnum, rel=1e-6):
    """Central-difference partial derivative of an elementwise function."""

    def deriv(*args):
        args = [np.asarray(a, dtype=float) for a in args]
        step = rel * (1.0 + np.abs(args[argnum]))
        up = list(args)
        um = list(args)
        up[argnum] = args[argnum] + step
        um[argnum] = args[argnum] - step
        return (fn(*up) - fn(*um)) / (2 * step)

    return deriv


def _flux_drift(space, a1, a1_u, a1_z, a0=None, a0_u=None, a0_z=None):
    """Drift and analytic Jacobian for ``D*(a1(x_c, avg u, Du)) - a0(x, u, Du_node)``."""
    xc = space.cell_midpoints
    xn = space.nodes
    dm = space.grad_matrix
    am = space.average_matrix
    gm = space.node_gradient_matrix

    def drift(t, u):
        out = space.divergence(a1(xc, space.cell_average(u), space.grad(u)))
        if a0 is not None:
            out = out - a0(xn, u, space.node_gradient(u))
        return out

    def jacobian(t, u):
        ub = space.cell_average(u)
        du = space.grad(u)
        # d flux / d u : (..., cells, N)
        dflux = a1_u(xc, ub, du)[..., :, None] * am + a1_z(xc, ub, du)[..., :, None] * dm
        # D^T applied along the cell axis; cheaper than a dense product
        jac = -space.grad_adjoint(np.swapaxes(dflux, -1, -2)).swapaxes(-1, -2)
        if a0 is not None:
            zn = space.node_gradient(u)
            jac = jac - a0_z(xn, u, zn)[..., :, None] * gm
            idx = np.arange(space.num_points)
            jac[..., idx, idx] -= a0_u(xn, u, zn)
        return jac

    return drift, jacobian


# -- noise -------------------------------------------------------------------

SIGMA_REGISTRY = {}


def register_sigma(name, fn, dfn, lipschitz, growth):
    """Register a scalar sigma_k for Nemytskii noise.

    ``growth`` is C in ``sigma(y)^2 <= C (1 + y^2)``.
    """
    SIGMA_REGISTRY[name] = (fn, dfn, float(lipschitz), float(growth))


register_sigma("identity", lambda y: y, lambda y: np.ones_like(y), 1.0, 1.0)
register_sigma("sine", np.sin, np.cos, 1.0, 1.0)
register_sigma("affine_sine", lambda y: 0.5 + 0.25 * np.sin(y), lambda y: 0.25 * np.cos(y),
               0.25, 0.5625)
register_sigma("bounded_tanh", lambda y: 0.5 * np.tanh(y), lambda y: 0.5 / np.cosh(y) ** 2,
               0.5, 0.25)


def make_h_continuous_noise(kind, space, m=1, *, columns=None, amplitude=1.0, sigmas=None):
    """Build an H-continuous diffusion.

    ``kind="additive"``: columns are fixed vectors (default e_1..e_m, or the
    1-based basis indices given in ``columns``), scaled by ``amplitude``.
    ``kind="nemytskii"``: column k has nodal values ``sigma_k(u)``; ``sigmas``
    is a list of registry names or ``(fn, dfn, lipschitz, growth)`` tuples.
    """
    m = int(m)
    if m <= 0:
        raise ConfigurationError("noise mode count m must be positive")
    if kind == "additive":
        if columns is None:
            columns = list(range(1, m + 1))
        mat = []
        for c in columns:
            if np.ndim(c) == 0:
                mat.append(space.basis_vector(int(c)))
            else:
                mat.append(space.check(c))
        if len(mat) != m:
            raise ConfigurationError(f"expected {m} additive columns, got {len(mat)}")
        cols = amplitude * np.column_stack(mat)
        norm2 = float(np.sum(space.mesh_width * cols ** 2))

        def diffusion(t, u):
            return np.broadcast_to(cols, u.shape + (m,))

        return NoiseSpec("additive", m, diffusion, None, 0.0, norm2, additive=True)
    if kind == "nemytskii":
        if sigmas is None:
            sigmas = ["identity"] * m
        unknown = [s for s in sigmas if isinstance(s, str) and s not in SIGMA_REGISTRY]
        if unknown:
            raise ConfigurationError(f"unknown sigma {unknown[0]!r}; registered: "
                                     f"{', '.join(sorted(SIGMA_REGISTRY))}")
        entries = [SIGMA_REGISTRY[s] if isinstance(s, str) else tuple(s) for s in sigmas]
        if len(entries) != m:
            raise ConfigurationError(f"expected {m} sigma functions, got {len(entries)}")
        lip = float(np.sqrt(sum(e[2] ** 2 for e in entries)))
        growth = float(sum(e[3] for e in entries))
        fns = [e[0] for e in entries]
        dfns = [e[1] for e in entries]

        def diffusion(t, u):
            return np.stack([fn(u) for fn in fns], axis=-1)

        def jacobian(t, u):
            n = u.shape[-1]
            eye = np.eye(n)
            return np.stack([dfn(u)[..., :, None] * eye for dfn in dfns], axis=-3)

        return NoiseSpec("nemytskii", m, diffusion, jacobian, lip, growth)
    raise ConfigurationError(f"unknown noise kind {kind!r}")


def _gradient_noise(space, p):
    """Single column ``|Du|^{p/2}`` redistributed from cells to nodes.

    Each cell's ``|Du|^p`` is split between its two end nodes (boundary cells
    give everything to their single interior node), so ``||B(u)||_{L2}^2``
    equals ``h sum_c |Du_c|^p`` exactly.
    """
    n = space.num_points
    w = np.zeros((n, space.num_cells))
    if space.periodic:
        for i in range(n):
            w[i, i] += 0.5
            w[i, (i - 1) % n] += 0.5
    else:
        for i in range(n):
            w[i, i] += 0.5
            w[i, i + 1] += 0.5
        w[0, 0] = 1.0
        w[n - 1, n] = 1.0
    dm = space.grad_matrix

    def diffusion(t, u):
        col = np.sqrt(np.abs(space.grad(u)) ** p @ w.T)
        return col[..., None]

    def jacobian(t, u):
        du = space.grad(u)
        col = np.sqrt(np.abs(du) ** p @ w.T)
        dpow = p * np.abs(du) ** (p - 2) * du if p != 2 else 2 * du
        inner = (w * dpow[..., None, :]) @ dm
        scale = np.divide(0.5, col, out=np.zeros_like(col), where=col > 0)
        return (scale[..., :, None] * inner)[..., None, :, :]

    return diffusion, jacobian


# -- model factories ---------------------------------------------------------------

def _require(space, kind, what):
    if space.domain_kind != kind:
        raise ConfigurationError(f"{what} requires a {kind} space, got {space.domain_kind}")


def make_p_laplace(p, space, noise=None):
    """``div(|Du|^{p-2} Du)`` on a Dirichlet space with H-continuous noise (regime A)."""
    p = float(p)
    if p < 2:
        raise UnsupportedExponentError(f"p-Laplace requires p >= 2, got {p}")
    _require(space, "dirichlet", "make_p_laplace")
    space = space.with_alpha(p)
    if noise is None:
        noise = make_h_continuous_noise("additive", space, 1)
    a1, a1_u, a1_z = _p_flux(p)
    drift, jac = _flux_drift(space, a1, a1_u, a1_z)
    profile = HypothesisProfile(
        regime="A", alpha=p, coercivity_c=2.0,
        f=max(noise.growth, noise.lipschitz ** 2), g=noise.growth,
        growth_C=1.0, envelope_C=0.0)
    linear = space.laplacian(np.eye(space.num_points)).T.copy() if p == 2 else None
    return Model(f"p_laplace_{p:g}", space, profile, noise.num_modes, drift, noise.diffusion,
                 drift_jac_fn=jac, diffusion_jac_fn=noise.jacobian, linear_operator=linear,
                 additive_noise=noise.additive, divergence_form=True, params={"p": p})


def _p_flux(p):
    def a1(x, u, z):
        return np.abs(z) ** (p - 2) * z

    def a1_u(x, u, z):
        return np.zeros_like(z)

    def a1_z(x, u, z):
        return (p - 1) * np.abs(z) ** (p - 2)

    return a1, a1_u, a1_z


def make_p_laplace_gradient_noise(p, space):
    """p-Laplace drift with the transport-type noise ``|Du|^{p/2}`` (regime B)."""
    p = float(p)
    if p < 2:
        raise UnsupportedExponentError(f"p-Laplace requires p >= 2, got {p}")
    _require(space, "dirichlet", "make_p_laplace_gradient_noise")
    space = space.with_alpha(p)
    a1, a1_u, a1_z = _p_flux(p)
    drift, jac = _flux_drift(space, a1, a1_u, a1_z)
    diffusion, djac = _gradient_noise(space, p)
    # 2<A(u)-A(v),w> <= -2^{3-p}||w||_V^p and ||B(u)-B(v)||^2 <= ||w||_V^p give delta^2 = 2^{3-p}.
    delta = 2.0 ** ((3.0 - p) / 2.0)
    profile = HypothesisProfile(
        regime="B", alpha=p, coercivity_c=1.0, coercivity_p=1.5, delta_noise=delta,
        L_B=1.0, f=0.0, g=0.0, growth_C=1.0, envelope_C=0.0)
    linear = space.laplacian(np.eye(space.num_points)).T.copy() if p == 2 else None
    return Model(f"p_laplace_gradient_{p:g}", space, profile, 1, drift, diffusion,
                 drift_jac_fn=jac, diffusion_jac_fn=djac, linear_operator=linear,
                 divergence_form=True, params={"p": p})


def make_convection_diffusion(a_fn, b_fn, sigma_spec, space, *, ellipticity, a_lipschitz,
                              b_lipschitz, a_prime=None, b_prime=None, name="convection_diffusion"):
    """``div(a(u) Du + b(u))`` on the torus.

    ``ellipticity=(delta, M)`` bounds ``a``; ``a_lipschitz``/``b_lipschitz`` are
    the declared Lipschitz constants.  The hypothesis constants are derived from
    these declarations and the mesh width.
    """
    _require(space, "periodic", "make_convection_diffusion")
    delta, big_m = (float(v) for v in ellipticity)
    if delta <= 0:
        raise EllipticityError("ellipticity lower bound must be positive")
    if big_m < delta:
        raise EllipticityError("ellipticity upper bound must be at least the lower bound")
    space = space.with_alpha(2.0)
    a_prime = a_prime or _pointwise_derivative(lambda u: a_fn(u), 0)
    b_prime = b_prime or _pointwise_derivative(lambda u: b_fn(u), 0)

    def a1(x, u, z):
        return a_fn(u) * z + b_fn(u)

    def a1_u(x, u, z):
        return a_prime(u) * z + b_prime(u)

    def a1_z(x, u, z):
        return a_fn(u) + 0.0 * z

    drift, jac = _flux_drift(space, a1, a1_u, a1_z)
    la, lb, ls, g = a_lipschitz, b_lipschitz, sigma_spec.lipschitz, sigma_spec.growth
    b0 = float(abs(b_fn(np.zeros(1))[0]))
    h = space.mesh_width
    f = max(2 * lb ** 2 / delta + ls ** 2,
            2 * b0 ** 2 / delta + g,
            delta + 2 * lb ** 2 / delta + g,
            2 * b0 ** 2)
    profile = HypothesisProfile(
        regime="A", alpha=2.0, coercivity_c=delta, f=f, g=g,
        growth_C=2 * (big_m + lb) ** 2, envelope_C=2 * la ** 2 / (delta * h))
    return Model(name, space, profile, sigma_spec.num_modes, drift, sigma_spec.diffusion,
                 drift_jac_fn=jac, diffusion_jac_fn=sigma_spec.jacobian,
                 additive_noise=sigma_spec.additive, divergence_form=True,
                 params={"ellipticity": (delta, big_m)})


def make_quasilinear_1d(a1_fn, a0_fn, sigma_spec, space, *, declaration, a1_derivs=None,
                        a0_derivs=None, name="quasilinear"):
    """``D*(a1(x, u, Du)) - a0(x, u, Du)`` on a Dirichlet space.

    ``declaration`` must provide the growth data: ``alpha``, ``growth_C`` and
    optionally ``beta``, ``coercivity_c``, ``f``, ``envelope_C``, ``gamma``.
    """
    _require(space, "dirichlet", "make_quasilinear_1d")
    if not declaration or "alpha" not in declaration or "growth_C" not in declaration:
        raise ConfigurationError("quasilinear model requires a growth declaration (alpha, growth_C)")
    decl = dict(declaration)
    space = space.with_alpha(decl["alpha"])
    if a1_derivs is None:
        a1_derivs = (_pointwise_derivative(a1_fn, 1), _pointwise_derivative(a1_fn, 2))
    if a0_fn is not None and a0_derivs is None:
        a0_derivs = (_pointwise_derivative(a0_fn, 1), _pointwise_derivative(a0_fn, 2))
    a0_u, a0_z = a0_derivs if a0_fn is not None else (None, None)
    drift, jac = _flux_drift(space, a1_fn, a1_derivs[0], a1_derivs[1], a0_fn, a0_u, a0_z)
    profile = HypothesisProfile(
        regime="A", alpha=float(decl["alpha"]), beta=float(decl.get("beta", 0.0)),
        gamma=float(decl.get("gamma", 0.0)), coercivity_c=float(decl.get("coercivity_c", 1.0)),
        f=decl.get("f", max(sigma_spec.growth, sigma_spec.lipschitz ** 2)), g=sigma_spec.growth,
        growth_C=float(decl["growth_C"]), envelope_C=decl.get("envelope_C", 0.0))
    return Model(name, space, profile, sigma_spec.num_modes, drift, sigma_spec.diffusion,
                 drift_jac_fn=jac, diffusion_jac_fn=sigma_spec.jacobian,
                 additive_noise=sigma_spec.additive, divergence_form=a0_fn is None)


def make_heat(space, noise=None):
    """``u_t = u_xx`` on the torus with additive noise (default column e_1)."""
    _require(space, "periodic", "make_heat")
    space = space.with_alpha(2.0)
    if noise is None:
        noise = make_h_continuous_noise("additive", space, 1)
    lap = space.laplacian(np.eye(space.num_points)).T.copy()

    def drift(t, u):
        return space.laplacian(u)

    # 2<Lap u, u> = -2||u||_V^2 + 2||u||_H^2 on the torus.
    profile = HypothesisProfile(
        regime="A", alpha=2.0, coercivity_c=2.0,
        f=max(noise.growth + 1.0, noise.lipschitz ** 2), g=noise.growth,
        growth_C=1.0, envelope_C=0.0)
    return Model("heat", space, profile, noise.num_modes, drift, noise.diffusion,
                 drift_jac_fn=lambda t, u: np.broadcast_to(lap, u.shape + (u.shape[-1],)),
                 diffusion_jac_fn=noise.jacobian, linear_operator=lap,
                 additive_noise=noise.additive, divergence_form=True)


# -- built-in catalogue ------------------------------------------------------------

def _burgers(num_points=64, viscosity=0.05, sigma="affine_sine"):
    space = SpaceDiscretization("periodic", num_points, 2.0)
    nu = float(viscosity)
    noise = make_h_continuous_noise("nemytskii", space, 1, sigmas=[sigma])
    return make_convection_diffusion(
        a_fn=lambda u: nu * (1.5 + 0.5 * np.tanh(u)),
        b_fn=lambda u: 1.0 - np.sqrt(1.0 + u * u),
        sigma_spec=noise, space=space, ellipticity=(nu, 2 * nu),
        a_lipschitz=0.5 * nu, b_lipschitz=1.0,
        a_prime=lambda u: 0.5 * nu / np.cosh(u) ** 2,
        b_prime=lambda u: -u / np.sqrt(1.0 + u * u),
        name="burgers")


def _quasilinear(num_points=64, sigma="sine"):
    space = SpaceDiscretization("dirichlet", num_points, 2.0)
    noise = make_h_continuous_noise("nemytskii", space, 1, sigmas=[sigma])

    def a1(x, u, z):
        return z + 0.25 * z / (1.0 + z * z)

    def a1_z(x, u, z):
        return 1.0 + 0.25 * (1.0 - z * z) / (1.0 + z * z) ** 2

    def a0(x, u, z):
        return u ** 3

    return make_quasilinear_1d(
        a1, a0, noise, space,
        declaration={"alpha": 2.0, "growth_C": 3.125, "beta": 4.0, "coercivity_c": 2.0,
                     "f": max(noise.growth, noise.lipschitz ** 2), "envelope_C": 0.0},
        a1_derivs=(lambda x, u, z: np.zeros_like(z + u), a1_z),
        a0_derivs=(lambda x, u, z: 3 * u ** 2, lambda x, u, z: np.zeros_like(z + u)))


def _heat(num_points=64, modes=(1,), amplitude=1.0):
    space = SpaceDiscretization("periodic", num_points, 2.0)
    noise = make_h_continuous_noise("additive", space, len(modes), columns=list(modes),
                                    amplitude=amplitude)
    return make_heat(space, noise)


def _p_laplace(num_points=64, p=3.0):
    space = SpaceDiscretization("dirichlet", num_points, p)
    return make_p_laplace(p, space, make_h_continuous_noise("additive", space, 1))


def _p_laplace_gradient(num_points=64, p=2.0):
    return make_p_laplace_gradient_noise(p, SpaceDiscretization("dirichlet", num_points, p))


def _discontinuous(num_points=64):
    """Heat drift plus ``sign(u_0)``: violates hemicontinuity."""
    base = _heat(num_points)
    space = base.space
    ones = np.ones(space.num_points)

    def drift(t, u):
        return space.laplacian(u) + np.sign(u[..., :1]) * ones

    return replace(base, name="adversarial_discontinuous", drift_fn=drift, drift_jac_fn=None,
                   linear_operator=None, divergence_form=False)


def _zero(num_points=64):
    """A = 0, B = 0 declared coercive with c = 1: violates coercivity."""
    space = SpaceDiscretization("periodic", num_points, 2.0)
    profile = HypothesisProfile(regime="A", alpha=2.0, coercivity_c=1.0, f=1.0, g=0.0,
                                growth_C=1.0, envelope_C=0.0)
    zero_op = np.zeros((space.num_points, space.num_points))
    return Model("adversarial_zero", space, profile, 1,
                 lambda t, u: np.zeros_like(u),
                 lambda t, u: np.zeros(u.shape + (1,)),
                 linear_operator=zero_op, additive_noise=True, divergence_form=True)


BUILTIN_FACTORIES = {
    "heat": _heat,
    "burgers": _burgers,
    "quasilinear": _quasilinear,
    "p_laplace": _p_laplace,
    "p_laplace_gradient": _p_laplace_gradient,
    "adversarial_discontinuous": _discontinuous,
    "adversarial_zero": _zero,
}

# (name, parameters) of every well-posed built-in model.
BUILTIN_MODELS = (
    ("heat", {}),
    ("burgers", {}),
    ("quasilinear", {}),
    ("p_laplace", {"p": 2.0}),
    ("p_laplace", {"p": 3.0}),
    ("p_laplace", {"p": 4.0}),
    ("p_laplace_gradient", {"p": 2.0}),
    ("p_laplace_gradient", {"p": 3.0}),
)


def builtin_model(name, num_points=64, **params):
    try:
        factory = BUILTIN_FACTORIES[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown model {name!r}; choose from {sorted(BUILTIN_FACTORIES)}") from None
    return factory(num_points=num_points, **params)


def builtin_models(num_points=64):
    return [builtin_model(name, num_points, **params) for name, params in BUILTIN_MODELS]
