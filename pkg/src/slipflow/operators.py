"""Galerkin operators: viscous stiffness, convection, nonlinear damping.

Everything acts on coefficient vectors of an orthonormal BasisSet.  Convection
has two independent routes (a collocation transform on the basis grid and a
precomputed dense tensor assembled on its own dealiased grid) so one can audit
the other; they are never merged.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .basis import BasisSet, mode_gradients, mode_values
from .domain import Slab, Torus, slab_grid, torus_grid

MAX_TENSOR_MODES = 512


@dataclass(frozen=True)
class PhysicsParams:
    """Coefficients of the momentum balance.

    ``viscosity`` scales both the Laplacian and the wall friction term;
    ``damping_coefficient`` and ``damping_exponent`` define the zeroth-order
    absorption theta |u|^(p-1) u with exponent p >= 1.
    """

    viscosity: float
    damping_coefficient: float = 0.0
    damping_exponent: float = 1.0

    def __post_init__(self):
        if not self.viscosity > 0:
            raise ValueError(f"viscosity must be positive, got {self.viscosity}")
        if self.damping_coefficient < 0:
            raise ValueError(
                f"damping_coefficient must be nonnegative, got {self.damping_coefficient}")
        if self.damping_exponent < 1:
            raise ValueError(
                f"damping_exponent must be >= 1, got {self.damping_exponent}")


def assemble_stiffness(basis: BasisSet, friction: float | None = None) -> np.ndarray:
    """Bilinear form of the viscous block: 2 (grad u, grad v) + alpha wall term.

    The caller multiplies by the viscosity.  ``friction`` overrides the
    domain's slip coefficient, reusing the cached friction-free wall gram.
    """
    alpha = basis.friction if friction is None else friction
    return 2.0 * basis.h1_gram + alpha * basis.boundary_gram_unit


def damping_field(values: np.ndarray, exponent: float) -> np.ndarray:
    """Pointwise |u|^(p-1) u for grid samples of shape (3, n)."""
    if exponent == 1.0:
        return values.copy()
    magsq = values[0] ** 2 + values[1] ** 2 + values[2] ** 2
    power = 0.5 * (exponent - 1.0)
    if power == 1.0:
        scale = magsq
    else:
        scale = magsq ** power
    return values * scale


def convection_field(values: np.ndarray, gradients: np.ndarray) -> np.ndarray:
    """Pointwise (u . grad) v from samples u (3, n) and grad v (3, 3, n)."""
    return np.einsum("dx,cdx->cx", values, gradients)


def trilinear_form(basis: BasisSet, a: np.ndarray, b: np.ndarray,
                   c: np.ndarray) -> float:
    """The convection form integral of ((u_a . grad) u_b) . u_c."""
    ua = basis.evaluate(a)
    gb = basis.evaluate_gradient(b)
    uc = basis.evaluate(c)
    conv = convection_field(ua, gb)
    return float(np.sum(conv * uc * basis.grid.weights))


def convection_rhs(basis: BasisSet, coeffs: np.ndarray) -> np.ndarray:
    """Galerkin projection of (u . grad) u via the collocation transform."""
    u = basis.evaluate(coeffs)
    g = basis.evaluate_gradient(coeffs)
    return basis.project(convection_field(u, g))


def damping_rhs(basis: BasisSet, coeffs: np.ndarray, exponent: float) -> np.ndarray:
    """Galerkin projection of |u|^(p-1) u."""
    u = basis.evaluate(coeffs)
    return basis.project(damping_field(u, exponent))


def damping_energy(basis: BasisSet, coeffs: np.ndarray, exponent: float) -> float:
    """Quadrature value of the absorbed power density integral |u|^(p+1)."""
    u = basis.evaluate(coeffs)
    magsq = u[0] ** 2 + u[1] ** 2 + u[2] ** 2
    power = 0.5 * (exponent + 1.0)
    if power == 1.0:
        dens = magsq
    elif power == 2.0:
        dens = magsq * magsq
    else:
        dens = magsq ** power
    return float(dens @ basis.grid.weights)


def _dealiased_nodes(basis: BasisSet):
    """Fresh grid fine enough for exact triple products of basis modes."""
    domain = basis.domain
    K = basis.max_wave_index
    if isinstance(domain, Torus):
        counts = tuple(3 * k + 1 for k in K)
        grid = torus_grid(domain, counts, 1.0)
    else:
        deg = basis.profile_ncoef - 1
        n3 = (3 * deg) // 2 + 1  # Gauss: exact to degree 2 n3 - 1 >= 3 deg
        counts = (3 * K[0] + 1, 3 * K[1] + 1, n3)
        grid = slab_grid(domain, counts, 1.0)
    return grid


def convection_tensor(basis: BasisSet) -> np.ndarray:
    """Dense tensor T[i, l, j] of the form integral ((w_i . grad) w_l) . w_j.

    Assembled on its own dealiasing grid, independent of the basis cache, so
    it stays exact even when the run grid is deliberately coarse.
    """
    m = basis.num_modes
    if m > MAX_TENSOR_MODES:
        raise ValueError(
            f"dense convection tensor limited to {MAX_TENSOR_MODES} modes, got {m}")
    grid = _dealiased_nodes(basis)
    nn = grid.num_nodes
    W = np.empty((m, 3, nn))
    G = np.empty((m, 3, 3, nn))
    for i, mode in enumerate(basis.modes):
        W[i] = mode_values(mode, basis.domain, grid.nodes)
        G[i] = mode_gradients(mode, basis.domain, grid.nodes)
    Wt = W.reshape(m, -1)
    w3 = np.tile(grid.weights, 3)
    T = np.empty((m, m, m))
    for i in range(m):
        conv = np.einsum("dx,lcdx->lcx", W[i], G)
        T[i] = (conv.reshape(m, -1) * w3) @ Wt.T
    return T


def convection_tensor_apply(tensor: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    """Contract the dense tensor with g twice: N_j = g_i g_l T[i, l, j]."""
    return coeffs @ np.einsum("l,ilj->ij", coeffs, tensor)


def cross_check_convection(basis: BasisSet, tensor: np.ndarray,
                           coeffs: np.ndarray) -> float:
    """Max abs gap between the transform and tensor convection routes."""
    a = convection_rhs(basis, coeffs)
    b = convection_tensor_apply(tensor, coeffs)
    return float(np.abs(a - b).max())


@dataclass
class OperatorSet:
    """Assembled operators for one basis and parameter set."""

    basis: BasisSet
    params: PhysicsParams
    stiffness: np.ndarray
    tensor: np.ndarray | None = field(default=None, repr=False)

    def convection(self, coeffs: np.ndarray) -> np.ndarray:
        if self.tensor is not None:
            return convection_tensor_apply(self.tensor, coeffs)
        return convection_rhs(self.basis, coeffs)

    def damping(self, coeffs: np.ndarray) -> np.ndarray:
        return damping_rhs(self.basis, coeffs, self.params.damping_exponent)

    def nonlinear(self, coeffs: np.ndarray) -> np.ndarray:
        """Convection plus scaled damping, the explicitly treated terms."""
        out = self.convection(coeffs)
        theta = self.params.damping_coefficient
        if theta != 0.0:
            out = out + theta * self.damping(coeffs)
        return out


def build_operators(basis: BasisSet, params: PhysicsParams, *,
                    friction: float | None = None,
                    use_tensor: bool = False) -> OperatorSet:
    """Assemble the operator set; warns when the grid can alias convection."""
    if not basis.cubic_exact and not use_tensor:
        warnings.warn(
            "grid too coarse for exact convection products; transform route "
            "will alias (build with a finer grid or use the tensor route)",
            RuntimeWarning, stacklevel=2)
    tensor = convection_tensor(basis) if use_tensor else None
    return OperatorSet(basis=basis, params=params,
                       stiffness=assemble_stiffness(basis, friction),
                       tensor=tensor)
