"""Domain geometry and quadrature grids.

Two geometries are supported: a fully periodic box (``Torus``) and a slab that
is periodic in x, y and wall-bounded in z (``Slab``).  Quadrature is a tensor
product of uniform trapezoid rules in the periodic directions and a
Gauss-Legendre rule across the slab gap, so triple products of basis fields are
integrated exactly under the default 2x oversampling.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import GridResolutionError

DEFAULT_OVERSAMPLE = 2.0


@dataclass(frozen=True)
class Torus:
    """Periodic box [0,L1) x [0,L2) x [0,L3)."""

    lengths: tuple[float, float, float] = (2.0 * np.pi,) * 3

    def __post_init__(self):
        if len(self.lengths) != 3 or any(L <= 0 for L in self.lengths):
            raise ValueError("torus lengths must be three positive numbers")
        object.__setattr__(self, "lengths", tuple(float(L) for L in self.lengths))

    @property
    def volume(self) -> float:
        L1, L2, L3 = self.lengths
        return L1 * L2 * L3

    @property
    def has_boundary(self) -> bool:
        return False


@dataclass(frozen=True)
class Slab:
    """Horizontally periodic layer [0,L1) x [0,L2) x [-h, h].

    ``friction`` is the Navier slip coefficient (units 1/length), one constant
    applied on both walls; friction = 0 is free slip.
    """

    lengths: tuple[float, float] = (2.0 * np.pi, 2.0 * np.pi)
    half_height: float = 1.0
    friction: float = 0.0

    def __post_init__(self):
        if len(self.lengths) != 2 or any(L <= 0 for L in self.lengths):
            raise ValueError("slab lengths must be two positive numbers")
        if self.half_height <= 0:
            raise ValueError("half_height must be positive")
        if self.friction < 0:
            raise ValueError("friction must be nonnegative")
        object.__setattr__(self, "lengths", tuple(float(L) for L in self.lengths))

    @property
    def volume(self) -> float:
        L1, L2 = self.lengths
        return L1 * L2 * 2.0 * self.half_height

    @property
    def has_boundary(self) -> bool:
        return True


DomainSpec = Torus | Slab


def _uniform_axis(length: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    x = np.arange(n) * (length / n)
    w = np.full(n, length / n)
    return x, w


@dataclass(frozen=True)
class QuadratureGrid:
    """Tensor-product quadrature nodes and weights.

    ``nodes`` has shape (3, n) with C-order flattening of the (i1, i2, i3)
    index mesh; ``weights`` sums to the domain volume.  For the slab the two
    walls are sampled on the horizontal mesh (``boundary_nodes``,
    ``boundary_weights``) with the outward normal z-sign in
    ``boundary_normal_sign``.
    """

    counts: tuple[int, int, int]
    axes: tuple[np.ndarray, np.ndarray, np.ndarray]
    axis_weights: tuple[np.ndarray, np.ndarray, np.ndarray]
    nodes: np.ndarray
    weights: np.ndarray
    oversample: float
    boundary_nodes: np.ndarray | None = None
    boundary_weights: np.ndarray | None = None
    boundary_normal_sign: np.ndarray | None = None
    _volume: float = field(default=0.0, repr=False)

    @property
    def num_nodes(self) -> int:
        return self.weights.size

    def check_volume(self, volume: float, rtol: float = 1e-12) -> None:
        total = float(self.weights.sum())
        if abs(total - volume) > rtol * volume:
            raise GridResolutionError(
                f"quadrature weights sum to {total!r}, expected volume {volume!r}"
            )


def _mesh_nodes(axes) -> np.ndarray:
    X = np.meshgrid(*axes, indexing="ij")
    return np.stack([a.ravel(order="C") for a in X])


def _mesh_weights(axis_weights) -> np.ndarray:
    W = np.meshgrid(*axis_weights, indexing="ij")
    return W[0].ravel() * W[1].ravel() * W[2].ravel()


def torus_grid(domain: Torus, counts: tuple[int, int, int],
               oversample: float = DEFAULT_OVERSAMPLE) -> QuadratureGrid:
    """Uniform periodic grid with the given per-direction node counts."""
    if any(n < 1 for n in counts):
        raise GridResolutionError(f"node counts must be positive, got {counts}")
    axes, axw = zip(*(_uniform_axis(L, n) for L, n in zip(domain.lengths, counts)))
    grid = QuadratureGrid(
        counts=tuple(counts), axes=axes, axis_weights=axw,
        nodes=_mesh_nodes(axes), weights=_mesh_weights(axw),
        oversample=oversample, _volume=domain.volume,
    )
    grid.check_volume(domain.volume)
    return grid


def slab_grid(domain: Slab, counts: tuple[int, int, int],
              oversample: float = DEFAULT_OVERSAMPLE) -> QuadratureGrid:
    """Uniform horizontal mesh times a Gauss-Legendre rule across the gap."""
    if any(n < 1 for n in counts):
        raise GridResolutionError(f"node counts must be positive, got {counts}")
    n1, n2, n3 = counts
    x1, w1 = _uniform_axis(domain.lengths[0], n1)
    x2, w2 = _uniform_axis(domain.lengths[1], n2)
    zeta, wz = leggauss(n3)
    z = domain.half_height * zeta
    w3 = domain.half_height * wz

    axes = (x1, x2, z)
    axw = (w1, w2, w3)

    # Wall sampling: horizontal mesh repeated at z = -h (normal -1) and z = +h.
    XY = np.meshgrid(x1, x2, indexing="ij")
    nb = n1 * n2
    bnodes = np.empty((3, 2 * nb))
    bnodes[0] = np.tile(XY[0].ravel(), 2)
    bnodes[1] = np.tile(XY[1].ravel(), 2)
    bnodes[2, :nb] = -domain.half_height
    bnodes[2, nb:] = domain.half_height
    WB = np.meshgrid(w1, w2, indexing="ij")
    bweights = np.tile(WB[0].ravel() * WB[1].ravel(), 2)
    bsign = np.concatenate([np.full(nb, -1.0), np.full(nb, 1.0)])

    grid = QuadratureGrid(
        counts=tuple(counts), axes=axes, axis_weights=axw,
        nodes=_mesh_nodes(axes), weights=_mesh_weights(axw),
        oversample=oversample,
        boundary_nodes=bnodes, boundary_weights=bweights,
        boundary_normal_sign=bsign, _volume=domain.volume,
    )
    grid.check_volume(domain.volume)
    return grid
