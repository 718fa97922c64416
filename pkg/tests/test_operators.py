"""Operator assembly: damping closed forms, convection routes, stiffness.

The cubic absorption of a single torus mode has a closed form: with the unit
normalization sqrt(2/V) cos(k.x), the projection of |u|^2 u back onto the
mode is (3 / (2 V)) c^3.  That constant, 0.006047162706224905 for the default
box, anchors the damping evaluator to arithmetic done by hand.
"""
import warnings

import numpy as np
import pytest

from slipflow import operators as ops
from slipflow.basis import build_basis, mode_gradients, mode_values
from slipflow.domain import Slab, Torus, torus_grid

CUBIC_SINGLE_MODE = 0.006047162706224905  # 3 / (2 (2 pi)^3)


def test_physics_params_validation():
    with pytest.raises(ValueError):
        ops.PhysicsParams(viscosity=0.0)
    with pytest.raises(ValueError):
        ops.PhysicsParams(viscosity=1.0, damping_coefficient=-1.0)
    with pytest.raises(ValueError):
        ops.PhysicsParams(viscosity=1.0, damping_exponent=0.5)


def test_linear_damping_is_identity(torus_basis16):
    rng = np.random.default_rng(0)
    g = rng.standard_normal(16)
    np.testing.assert_allclose(ops.damping_rhs(torus_basis16, g, 1.0), g,
                               atol=1e-13)


def test_cubic_damping_single_mode():
    basis = build_basis(Torus(), 4)
    c = 0.7
    g = np.zeros(4)
    g[0] = c
    out = ops.damping_rhs(basis, g, 3.0)
    assert out[0] == pytest.approx(CUBIC_SINGLE_MODE * c ** 3, rel=1e-12)
    # the cos^3 overtone lies outside the single-shell basis
    np.testing.assert_allclose(out[1:], 0.0, atol=1e-15)


def test_damping_energy_beta1_equals_kinetic(torus_basis16):
    rng = np.random.default_rng(1)
    g = rng.standard_normal(16)
    assert ops.damping_energy(torus_basis16, g, 1.0) == \
        pytest.approx(float(g @ g), rel=1e-12)


def test_trilinear_against_independent_quadrature(torus_basis8):
    # oracle: evaluate the integrand analytically on a finer, shifted-size grid
    rng = np.random.default_rng(2)
    m = torus_basis8.num_modes
    a, b, c = (rng.standard_normal(m) for _ in range(3))
    got = ops.trilinear_form(torus_basis8, a, b, c)

    dom = torus_basis8.domain
    K = torus_basis8.max_wave_index
    grid = torus_grid(dom, tuple(5 * (2 * k + 1) for k in K))
    ua = np.zeros((3, grid.num_nodes))
    gb = np.zeros((3, 3, grid.num_nodes))
    uc = np.zeros((3, grid.num_nodes))
    for ci, md in zip(a, torus_basis8.modes):
        ua += ci * mode_values(md, dom, grid.nodes)
    for ci, md in zip(b, torus_basis8.modes):
        gb += ci * mode_gradients(md, dom, grid.nodes)
    for ci, md in zip(c, torus_basis8.modes):
        uc += ci * mode_values(md, dom, grid.nodes)
    conv = np.einsum("dx,cdx->cx", ua, gb)
    want = float(np.sum(conv * uc * grid.weights))
    assert got == pytest.approx(want, abs=1e-12)


def test_skew_symmetry_identity(torus_basis8, slab_basis12):
    rng = np.random.default_rng(3)
    for basis, tol in ((torus_basis8, 1e-12), (slab_basis12, 1e-12)):
        m = basis.num_modes
        u, v, w = (rng.standard_normal(m) for _ in range(3))
        lhs = ops.trilinear_form(basis, u, v, w)
        rhs = -ops.trilinear_form(basis, u, w, v)
        assert lhs == pytest.approx(rhs, abs=tol)


def test_stiffness_definition(slab_basis12):
    A = ops.assemble_stiffness(slab_basis12)
    np.testing.assert_allclose(
        A, 2.0 * slab_basis12.h1_gram + 1.0 * slab_basis12.boundary_gram_unit)
    # positive definite
    lam = np.linalg.eigvalsh(A)
    assert lam[0] > 0


def test_friction_override_is_linear(slab_basis12):
    A0 = ops.assemble_stiffness(slab_basis12, friction=0.0)
    A2 = ops.assemble_stiffness(slab_basis12, friction=2.0)
    np.testing.assert_allclose(A2 - A0,
                               2.0 * slab_basis12.boundary_gram_unit,
                               atol=1e-14)
    # the wall gram is positive semdefinite
    lam = np.linalg.eigvalsh(slab_basis12.boundary_gram_unit)
    assert lam[0] > -1e-13


def test_torus_has_no_wall_term(torus_basis8):
    np.testing.assert_array_equal(torus_basis8.boundary_gram_unit,
                                  np.zeros((8, 8)))


def test_tensor_matches_transform(torus_basis16, slab_basis12):
    rng = np.random.default_rng(5)
    for basis in (torus_basis16, slab_basis12):
        T = ops.convection_tensor(basis)
        g = rng.standard_normal(basis.num_modes)
        assert ops.cross_check_convection(basis, T, g) < 1e-12


def test_tensor_mode_limit(monkeypatch, torus_basis8):
    monkeypatch.setattr(ops, "MAX_TENSOR_MODES", 4)
    with pytest.raises(ValueError):
        ops.convection_tensor(torus_basis8)


def test_aliasing_warning():
    # minimal legal counts resolve quadratic but not cubic products
    basis = build_basis(Torus(), 8, counts=(3, 3, 3))
    assert not basis.cubic_exact
    params = ops.PhysicsParams(viscosity=0.1)
    with pytest.warns(RuntimeWarning):
        ops.build_operators(basis, params)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        ops.build_operators(basis, params, use_tensor=True)


def test_aliased_transform_differs_from_tensor():
    """The coarse-grid transform really does alias; the tensor route does not.

    Twenty modes include second-shell wavevectors, whose triple products
    reach harmonic three per axis and fold onto the three-point grid.  The
    tensor is assembled on its own dealiased grid, so it still agrees with a
    tensor from a clean build while the coarse transform visibly drifts.
    """
    basis = build_basis(Torus(), 20, counts=(3, 3, 3))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        T = ops.convection_tensor(basis)
    fine = build_basis(Torus(), 20)
    Tf = ops.convection_tensor(fine)
    np.testing.assert_allclose(T, Tf, atol=1e-13)

    rng = np.random.default_rng(12)
    g = rng.standard_normal(20)
    assert ops.cross_check_convection(basis, T, g) > 1e-3
    assert ops.cross_check_convection(fine, Tf, g) < 1e-12


def test_nonlinear_combines_channels(torus_basis16):
    rng = np.random.default_rng(6)
    g = rng.standard_normal(16)
    params = ops.PhysicsParams(viscosity=0.1, damping_coefficient=0.5,
                               damping_exponent=3.0)
    opset = ops.build_operators(torus_basis16, params)
    want = ops.convection_rhs(torus_basis16, g) + \
        0.5 * ops.damping_rhs(torus_basis16, g, 3.0)
    np.testing.assert_allclose(opset.nonlinear(g), want, atol=1e-14)
