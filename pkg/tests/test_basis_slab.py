"""Slab vertical eigenstructure against independent oracles.

The tangential and mean profiles solve -b'' = lambda b with the slip
condition as a Robin boundary condition, so their eigenvalues are roots of
scalar characteristic equations solvable by bracketed bisection; those roots
are the oracle.  The vertical-velocity profiles have no closed form, so they
are checked against the strong form of their fourth-order equation instead.
"""
import numpy as np
import pytest
from scipy.optimize import brentq

from slipflow import modal
from slipflow.basis import build_basis, mode_gradients, mode_values, verify_basis
from slipflow.domain import Slab, slab_grid
from slipflow.errors import GridResolutionError

TWO_PI = 2.0 * np.pi

# Frozen oracle values: roots of eta tan(eta) = 1 (even profiles) and
# eta cos(eta) + sin(eta) = 0 (odd profiles) for unit friction on (-1, 1),
# computed by brentq to machine precision.
ROBIN_LAMBDAS_ALPHA1 = (0.7401738843949672, 4.115858365694522,
                        11.73486182994197, 24.139342030445558)
# Friction-free profiles are cos(n pi (z + h) / (2 h)): lambdas (n pi / 2)^2.
FREESLIP_LAMBDAS = (2.4674011002723395, 9.869604401089358, 22.206609902451056)


def robin_lambda_oracle(alpha: float, h: float, count: int):
    """Characteristic-equation roots, ascending, via bracketed search."""

    def even(eta):
        return eta * np.tan(eta * h) - alpha

    def odd(eta):
        return eta * np.cos(eta * h) + alpha * np.sin(eta * h)

    roots = []
    for j in range(count):
        lo = j * np.pi / (2 * h) + 1e-9
        hi = (j + 1) * np.pi / (2 * h) - 1e-9
        fn = even if j % 2 == 0 else odd
        roots.append(brentq(fn, lo, hi, xtol=1e-14, rtol=8.9e-16) ** 2)
    return roots


def test_oracle_matches_frozen_values():
    got = robin_lambda_oracle(1.0, 1.0, 4)
    np.testing.assert_allclose(got, ROBIN_LAMBDAS_ALPHA1, rtol=1e-12)


def test_mean_mode_eigenvalues_alpha1(slab_basis12):
    lams = sorted({m.vertical_eigenvalue for m in slab_basis12.modes
                   if m.family.startswith("mean")})
    assert lams[0] == pytest.approx(ROBIN_LAMBDAS_ALPHA1[0], rel=1e-11)


def test_toroidal_eigenvalues_alpha1(slab_basis12):
    lams = sorted({m.vertical_eigenvalue for m in slab_basis12.modes
                   if m.family == "toroidal"})
    for got, want in zip(lams, ROBIN_LAMBDAS_ALPHA1):
        assert got == pytest.approx(want, rel=1e-11)


def test_freeslip_profiles_are_cosines(slab_free16):
    # alpha = 0 drops the constant; the first mean profile is the half cosine
    mean = [m for m in slab_free16.modes if m.family.startswith("mean")]
    assert mean, "free-slip basis should retain mean shear modes"
    assert mean[0].vertical_eigenvalue == pytest.approx(FREESLIP_LAMBDAS[0],
                                                        rel=1e-12)
    comp = 0 if mean[0].family == "mean-x" else 1
    z = np.linspace(-1, 1, 33)
    prof = modal.eval_series(mean[0].cos_prof[comp], z, 1.0)
    area = TWO_PI ** 2
    expect = np.cos(np.pi * (z + 1) / 2) / np.sqrt(area)  # unit 3D L2 norm
    scale = np.sign(prof[np.argmax(np.abs(prof))] *
                    expect[np.argmax(np.abs(prof))])
    np.testing.assert_allclose(prof, scale * expect, atol=1e-12)


def test_no_zero_energy_modes(slab_free16):
    for m in slab_free16.modes:
        assert m.h1_energy > 1e-8


def test_poloidal_strong_form():
    """The vertical-velocity profile satisfies its fourth-order equation.

    Residual of w'''' - 2 k^2 w'' + k^4 w = lambda (-w'' + k^2 w) at interior
    points, plus the natural condition w'' + alpha w' = 0 at the top wall and
    the essential condition w = 0 at both walls.
    """
    basis = build_basis(Slab(friction=1.0), 40)
    polo = [m for m in basis.modes if m.family == "poloidal"]
    assert polo, "expected poloidal modes within 40"
    z = np.linspace(-0.95, 0.95, 41)
    for m in polo[:4]:
        w = m.cos_prof[2] if m.phase == "cos" else m.sin_prof[2]
        k2 = float(m.kxy @ m.kxy)
        lam = m.vertical_eigenvalue
        w0 = modal.eval_series(w, z, 1.0)
        w2 = modal.eval_series(w, z, 1.0, deriv=2)
        w4 = modal.eval_series(w, z, 1.0, deriv=4)
        lhs = w4 - 2.0 * k2 * w2 + k2 ** 2 * w0
        rhs = lam * k2 * (-w2 / k2 + w0)
        scale = np.abs(lhs).max()
        np.testing.assert_allclose(lhs, rhs, atol=1e-7 * max(scale, 1.0))
        # walls
        ends = np.array([-1.0, 1.0])
        np.testing.assert_allclose(modal.eval_series(w, ends, 1.0), 0.0,
                                   atol=1e-12)
        w1_top = modal.eval_series(w, np.array([1.0]), 1.0, deriv=1)[0]
        w2_top = modal.eval_series(w, np.array([1.0]), 1.0, deriv=2)[0]
        assert abs(w2_top + 1.0 * w1_top) < 1e-7 * max(abs(w2_top), 1.0)


def test_orthonormality_on_refined_grid(slab_basis12):
    dom = slab_basis12.domain
    c = slab_basis12.grid.counts
    grid = slab_grid(dom, (2 * c[0], 2 * c[1], 2 * c[2]))
    V = np.stack([mode_values(md, dom, grid.nodes).ravel()
                  for md in slab_basis12.modes])
    gram = (V * np.tile(grid.weights, 3)) @ V.T
    np.testing.assert_allclose(gram, np.eye(slab_basis12.num_modes),
                               atol=1e-12)


def test_divergence_and_walls(slab_basis12):
    rng = np.random.default_rng(8)
    pts = np.vstack([rng.uniform(0, TWO_PI, size=(2, 60)),
                     rng.uniform(-1, 1, size=(1, 60))])
    for md in slab_basis12.modes:
        g = mode_gradients(md, slab_basis12.domain, pts)
        assert np.abs(g[0, 0] + g[1, 1] + g[2, 2]).max() < 1e-11

    walls = np.vstack([rng.uniform(0, TWO_PI, size=(2, 40)),
                       np.concatenate([np.full(20, -1.0), np.full(20, 1.0)])])
    sign = np.concatenate([np.full(20, -1.0), np.full(20, 1.0)])
    for md in slab_basis12.modes:
        v = mode_values(md, slab_basis12.domain, walls)
        g = mode_gradients(md, slab_basis12.domain, walls)
        assert np.abs(v[2]).max() < 1e-12, "wall penetration"
        for tau in range(2):
            res = sign * (g[tau, 2] + g[2, tau]) + 1.0 * v[tau]
            assert np.abs(res).max() < 1e-9, "slip condition"


def test_energy_metadata_matches_grams(slab_basis12):
    np.testing.assert_allclose(np.diag(slab_basis12.h1_gram),
                               [m.h1_energy for m in slab_basis12.modes],
                               rtol=1e-10)
    np.testing.assert_allclose(
        1.0 * np.diag(slab_basis12.boundary_gram_unit),
        [m.boundary_energy for m in slab_basis12.modes], rtol=1e-10,
        atol=1e-13)


def test_nesting_slab():
    small = build_basis(Slab(friction=1.0), 6)
    big = build_basis(Slab(friction=1.0), 24)
    for a, b in zip(small.modes, big.modes):
        assert (a.wavevector, a.family, a.phase, a.vertical_index) == \
               (b.wavevector, b.family, b.phase, b.vertical_index)


def test_vertical_pool_guard():
    with pytest.raises(GridResolutionError):
        build_basis(Slab(friction=1.0), 40, vertical_modes=2)


def test_verify_slab(slab_basis12):
    rep = verify_basis(slab_basis12)
    assert rep.passed
    assert rep.max_slip < 1e-9
    assert rep.max_normal_trace < 1e-12
