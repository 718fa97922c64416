"""Legendre modal helpers for the slab's vertical direction.

Profiles across the gap are stored as Legendre coefficient vectors in the
scaled coordinate zeta = z/h.  Mass and stiffness forms of the vertical
eigenproblems are assembled exactly from the diagonal Legendre mass matrix and
the coefficient-space derivative operator, so no quadrature error enters the
eigensolves.
"""
from __future__ import annotations

import numpy as np
from numpy.polynomial.legendre import legder, legval


def mass_diagonal(ncoef: int) -> np.ndarray:
    """Diagonal of the Legendre mass matrix on (-1, 1): 2/(2n+1)."""
    return 2.0 / (2.0 * np.arange(ncoef) + 1.0)


def derivative_matrix(ncoef: int) -> np.ndarray:
    """Matrix D with (D @ c) the coefficients of d/dzeta of series c."""
    D = np.zeros((ncoef, ncoef))
    for j in range(ncoef):
        col = np.zeros(ncoef)
        col[j] = 1.0
        d = legder(col)
        D[: d.size, j] = d
    return D


def endpoint_values(ncoef: int) -> tuple[np.ndarray, np.ndarray]:
    """Vectors of P_n(-1) = (-1)^n and P_n(+1) = 1."""
    n = np.arange(ncoef)
    return (-1.0) ** n, np.ones(ncoef)


def eval_series(coeffs: np.ndarray, z: np.ndarray, half_height: float,
                deriv: int = 0) -> np.ndarray:
    """Evaluate a z-profile (or its z-derivative) from zeta-coefficients.

    ``coeffs`` may have leading batch dimensions; the last axis is the
    Legendre degree.  Derivatives pick up 1/h per order from zeta = z/h.
    """
    c = np.asarray(coeffs, dtype=float)
    for _ in range(deriv):
        c = np.apply_along_axis(lambda a: np.pad(legder(a), (0, 1)), -1, c)
    zeta = np.asarray(z, dtype=float) / half_height
    # legval wants the degree on the first axis.
    vals = legval(zeta, np.moveaxis(c, -1, 0), tensor=True)
    return vals / half_height**deriv


def interior_basis(ncoef: int) -> np.ndarray:
    """Columns span polynomials vanishing at both endpoints: P_n - P_{n+2}."""
    if ncoef < 3:
        raise ValueError("need at least 3 coefficients for interior basis")
    B = np.zeros((ncoef, ncoef - 2))
    for j in range(ncoef - 2):
        B[j, j] = 1.0
        B[j + 2, j] = -1.0
    return B
