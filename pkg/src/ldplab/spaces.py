"""Finite-dimensional Gelfand triple V ⊆ H ⊆ V* on a uniform 1D grid.

States are plain float64 arrays whose last axis holds the N nodal values, so
every operation here broadcasts over leading batch axes.  Dual vectors use the
same layout: the pairing of ``f`` with ``v`` is ``h * sum(f * v)``, which makes
the embedding H ⊆ V* the identity on arrays.

Two geometries on the unit interval are supported:

``periodic``
    nodes ``x_i = i h`` for ``i = 0..N-1``, ``h = 1/N``.  The V-norm is the
    full W^{1,alpha} norm.
``dirichlet``
    interior nodes ``x_i = i h`` for ``i = 1..N``, ``h = 1/(N+1)``; boundary
    values are zero and not stored.  The V-norm is the W_0^{1,alpha} norm
    ``||Du||_{L^alpha}``.
"""
from __future__ import annotations

from functools import cached_property

import numpy as np
from scipy import optimize

from .errors import DimensionError, LevelError

DOMAIN_KINDS = ("periodic", "dirichlet")


class SpaceDiscretization:
    """Uniform grid discretization of the triple with an H-orthonormal basis.

    Parameters
    ----------
    domain_kind : {"periodic", "dirichlet"}
    num_points : int
        Number of stored nodal values N.
    alpha : float
        Integrability exponent of V = W^{1,alpha}; must exceed 1.
    basis_size : int, optional
        Default Galerkin level n (defaults to N).
    """

    def __init__(self, domain_kind="periodic", num_points=64, alpha=2.0, basis_size=None):
        if domain_kind not in DOMAIN_KINDS:
            raise ValueError(f"domain_kind must be one of {DOMAIN_KINDS}, got {domain_kind!r}")
        num_points = int(num_points)
        if num_points < 2:
            raise ValueError("num_points must be at least 2")
        alpha = float(alpha)
        if not alpha > 1.0:
            raise ValueError("alpha_exponent must exceed 1")
        if basis_size is None:
            basis_size = num_points
        basis_size = int(basis_size)
        if not 1 <= basis_size <= num_points:
            raise LevelError(f"basis_size must lie in [1, {num_points}], got {basis_size}")
        self.domain_kind = domain_kind
        self.num_points = num_points
        self.alpha = alpha
        self.basis_size = basis_size

    def __repr__(self):
        return (f"SpaceDiscretization({self.domain_kind!r}, num_points={self.num_points}, "
                f"alpha={self.alpha}, basis_size={self.basis_size})")

    def __eq__(self, other):
        if not isinstance(other, SpaceDiscretization):
            return NotImplemented
        return self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def key(self):
        return (self.domain_kind, self.num_points, self.alpha, self.basis_size)

    def with_alpha(self, alpha):
        return SpaceDiscretization(self.domain_kind, self.num_points, alpha, self.basis_size)

    # -- geometry -----------------------------------------------------------

    @property
    def periodic(self):
        return self.domain_kind == "periodic"

    @property
    def num_cells(self):
        return self.num_points if self.periodic else self.num_points + 1

    @cached_property
    def mesh_width(self):
        return 1.0 / self.num_cells

    @property
    def length(self):
        return 1.0

    @cached_property
    def nodes(self):
        h = self.mesh_width
        if self.periodic:
            return np.arange(self.num_points) * h
        return np.arange(1, self.num_points + 1) * h

    @cached_property
    def cell_midpoints(self):
        return (np.arange(self.num_cells) + 0.5) * self.mesh_width

    def check(self, u, name="u"):
        u = np.asarray(u, dtype=float)
        if u.shape[-1:] != (self.num_points,):
            raise DimensionError(
                f"{name} has trailing dimension {u.shape[-1:] or '()'}; expected {self.num_points}")
        return u

    def zeros(self):
        return np.zeros(self.num_points)

    def ones(self):
        return np.ones(self.num_points)

    def sample(self, fn):
        """Nodal values of a callable on the grid."""
        return np.asarray(fn(self.nodes), dtype=float) * np.ones(self.num_points)

    # -- difference operators ------------------------------------------------

    def _padded(self, u):
        out = np.zeros(u.shape[:-1] + (u.shape[-1] + 2,))
        out[..., 1:-1] = u
        return out

    def grad(self, u):
        """Forward difference ``(u_{i+1} - u_i)/h`` on cells (N or N+1 of them)."""
        u = self.check(u)
        h = self.mesh_width
        if self.periodic:
            return (np.roll(u, -1, axis=-1) - u) / h
        up = self._padded(u)
        return (up[..., 1:] - up[..., :-1]) / h

    def grad_adjoint(self, flux):
        """Transpose of :meth:`grad`: ``sum_i (D^T F)_i v_i = sum_c F_c (Dv)_c``."""
        flux = np.asarray(flux, dtype=float)
        if flux.shape[-1] != self.num_cells:
            raise DimensionError(f"flux must have {self.num_cells} cell values")
        h = self.mesh_width
        if self.periodic:
            return (np.roll(flux, 1, axis=-1) - flux) / h
        return (flux[..., :-1] - flux[..., 1:]) / h

    def divergence(self, flux):
        """Discrete ``d/dx`` of a cell flux as a dual vector (``-D^T F``)."""
        return -self.grad_adjoint(flux)

    def laplacian(self, u):
        return self.divergence(self.grad(u))

    def cell_average(self, u):
        """Mean of the two nodal values bounding each cell (boundary values zero)."""
        u = self.check(u)
        if self.periodic:
            return 0.5 * (u + np.roll(u, -1, axis=-1))
        up = self._padded(u)
        return 0.5 * (up[..., 1:] + up[..., :-1])

    def node_gradient(self, u):
        """Central gradient at nodes: mean of the adjacent cell gradients."""
        du = self.grad(u)
        if self.periodic:
            return 0.5 * (np.roll(du, 1, axis=-1) + du)
        return 0.5 * (du[..., :-1] + du[..., 1:])

    @cached_property
    def grad_matrix(self):
        return self.grad(np.eye(self.num_points)).T.copy()

    @cached_property
    def average_matrix(self):
        return self.cell_average(np.eye(self.num_points)).T.copy()

    @cached_property
    def node_gradient_matrix(self):
        return self.node_gradient(np.eye(self.num_points)).T.copy()

    # -- inner products and norms ---------------------------------------------

    def h_inner(self, u, v):
        u = self.check(u, "u")
        v = self.check(v, "v")
        return self.mesh_width * np.sum(u * v, axis=-1)

    def dual_pair(self, f, v):
        f = self.check(f, "f")
        v = self.check(v, "v")
        return self.mesh_width * np.sum(f * v, axis=-1)

    def h_norm(self, u):
        return np.sqrt(self.h_inner(u, u))

    def lp_norm_pow(self, values, p):
        """``h * sum |values|^p`` (values on nodes or cells)."""
        return self.mesh_width * np.sum(np.abs(values) ** p, axis=-1)

    def v_norm_pow(self, u, alpha=None):
        """``||u||_V^alpha``, cheaper and more accurate than powering :meth:`v_norm`."""
        a = self.alpha if alpha is None else alpha
        out = self.lp_norm_pow(self.grad(u), a)
        if self.periodic:
            out = out + self.lp_norm_pow(u, a)
        return out

    def v_norm(self, u, alpha=None):
        a = self.alpha if alpha is None else alpha
        return self.v_norm_pow(u, a) ** (1.0 / a)

    def dual_norm(self, g):
        """Exact discrete V*-norm ``sup_v <g, v> / ||v||_V``."""
        g = self.check(g, "g")
        if self.periodic:
            if self.alpha == 2.0:
                w = np.linalg.solve(self._riesz_matrix, np.moveaxis(g, -1, 0))
                return np.sqrt(self.mesh_width * np.sum(np.moveaxis(w, 0, -1) * g, axis=-1))
            flat = g.reshape(-1, self.num_points)
            out = np.array([self._periodic_dual_norm(row) for row in flat])
            return out.reshape(g.shape[:-1])
        # Dirichlet: g = D^T F has a unique flux up to constants; the dual norm is the
        # L^{q} distance of that flux to the constants.
        flux = -self.mesh_width * np.cumsum(g, axis=-1)
        flux = np.concatenate([np.zeros(g.shape[:-1] + (1,)), flux], axis=-1)
        q = self.alpha / (self.alpha - 1.0)
        shift = _lq_center(flux, q)
        return self.lp_norm_pow(flux + shift[..., None], q) ** (1.0 / q)

    @cached_property
    def _riesz_matrix(self):
        dm = self.grad_matrix
        return np.eye(self.num_points) + dm.T @ dm

    def _periodic_dual_norm(self, g):
        q = self.alpha / (self.alpha - 1.0)
        h = self.mesh_width
        dm = self.grad_matrix

        def objective(flux):
            rest = g - dm.T @ flux
            val = h * (np.sum(np.abs(flux) ** q) + np.sum(np.abs(rest) ** q))
            grad = h * q * (np.sign(flux) * np.abs(flux) ** (q - 1)
                            - dm @ (np.sign(rest) * np.abs(rest) ** (q - 1)))
            return val, grad

        res = optimize.minimize(objective, np.zeros(self.num_cells), jac=True, method="L-BFGS-B",
                                options={"gtol": 1e-14, "ftol": 1e-15, "maxiter": 5000})
        return float(res.fun) ** (1.0 / q)

    # -- basis and Galerkin projection -----------------------------------------

    @cached_property
    def basis(self):
        """Columns e_1..e_N, orthonormal in the discrete H inner product.

        Periodic: the first sine/cosine pair, the constant, the remaining pairs by
        frequency and the Nyquist mode (even N) last, so every level n >= 3 holds
        the mean.  Dirichlet: sine modes ``sqrt(2) sin(k pi x)``.
        """
        n = self.num_points
        x = self.nodes
        cols = []
        if self.periodic:
            for k in range(1, (n - 1) // 2 + 1):
                cols.append(np.sqrt(2.0) * np.sin(2 * np.pi * k * x))
                cols.append(np.sqrt(2.0) * np.cos(2 * np.pi * k * x))
            cols.insert(min(2, len(cols)), np.ones(n))
            if n % 2 == 0:
                cols.append(np.where(np.arange(n) % 2 == 0, 1.0, -1.0))
        else:
            for k in range(1, n + 1):
                cols.append(np.sqrt(2.0) * np.sin(np.pi * k * x))
        return np.column_stack(cols)

    @cached_property
    def eigenvalues(self):
        """Eigenvalues of ``-laplacian`` on each basis vector."""
        e = self.basis
        return -self.h_inner(self.laplacian(e.T), e.T)

    def basis_vector(self, i):
        """The 1-based basis vector e_i."""
        if not 1 <= i <= self.num_points:
            raise LevelError(f"basis index {i} outside [1, {self.num_points}]")
        return self.basis[:, i - 1].copy()

    def coefficients(self, g, level=None):
        """``<g, e_i>`` for ``i <= level``."""
        g = self.check(g, "g")
        level = self._level(level)
        return self.mesh_width * (g @ self.basis[:, :level])

    def synthesize(self, coeffs):
        coeffs = np.asarray(coeffs, dtype=float)
        return coeffs @ self.basis[:, :coeffs.shape[-1]].T

    def project_galerkin(self, g, level=None):
        """Orthogonal projection P_n onto span{e_1..e_n}; level N is the identity."""
        g = self.check(g, "g")
        level = self._level(level)
        if level == self.num_points:
            return g.copy()
        return self.synthesize(self.coefficients(g, level))

    def projection_matrix(self, level=None):
        level = self._level(level)
        if level == self.num_points:
            return np.eye(self.num_points)
        e = self.basis[:, :level]
        return self.mesh_width * e @ e.T

    def _level(self, level):
        if level is None:
            level = self.basis_size
        level = int(level)
        if not 1 <= level <= self.num_points:
            raise LevelError(f"Galerkin level {level} outside [1, {self.num_points}]")
        return level


def _lq_center(values, q, iters=200):
    """Shift ``s`` minimizing ``sum |values + s|^q`` along the last axis."""
    if q == 2.0:
        return -np.mean(values, axis=-1)
    lo = -np.max(values, axis=-1)
    hi = -np.min(values, axis=-1)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        z = values + mid[..., None]
        slope = np.sum(np.sign(z) * np.abs(z) ** (q - 1), axis=-1)
        up = slope > 0
        hi = np.where(up, mid, hi)
        lo = np.where(up, lo, mid)
        if np.all(hi - lo <= 1e-15 * (1 + np.abs(mid))):
            break
    return 0.5 * (lo + hi)
