"""Diagnostics tests.

Synthetic ledgers with hand-picked numbers pin down the inequality and
residual arithmetic independently of any solver run; quadratic-in-time state
paths give closed forms for the finite-difference derivative bounds because
second-order stencils differentiate quadratics exactly.
"""
import types

import numpy as np
import pytest
from scipy.integrate import cumulative_trapezoid

from slipflow.diagnostics import (DerivativeBounds, EnergyLedger,
                                  check_energy_inequality,
                                  check_skew_symmetry, damping_monotonicity,
                                  derivative_bounds, energy_residuals,
                                  poincare_constant, stability_gap)
from slipflow.operators import PhysicsParams, build_operators
from slipflow.timestepper import SolverConfig, Trajectory, solve


def make_ledger(times, e_l2, **kw):
    t = np.asarray(times, dtype=float)
    fields = dict(e_h1=None, e_damp=None, e_bdry=None, i_h1=None,
                  i_damp=None, i_f=None, f_dot_u=None)
    for name in fields:
        arr = kw.get(name)
        fields[name] = np.zeros_like(t) if arr is None else np.asarray(arr, float)
    return EnergyLedger(times=t, e_l2=np.asarray(e_l2, float),
                        max_l2_quadrature_gap=kw.get("gap", 0.0), **fields)


def default_ops(basis, viscosity=0.1, damping=1.0, exponent=3.0):
    params = PhysicsParams(viscosity=viscosity, damping_coefficient=damping,
                           damping_exponent=exponent)
    return build_operators(basis, params)


# ---------------------------------------------------------------------------
# inequality arithmetic on synthetic ledgers


def test_inequality_unforced_hand_numbers(torus_basis8):
    ops = default_ops(torus_basis8, viscosity=0.1, damping=1.0)
    ledger = make_ledger([0.0, 1.0], [1.0, 0.5],
                         i_h1=[0.0, 0.1], i_damp=[0.0, 0.05])
    report = check_energy_inequality(ops, ledger)
    # combined = [1.0, 0.5 + 2*0.1*0.1 + 2*1*0.05] = [1.0, 0.62]
    assert report.lhs == 1.0
    assert report.rhs == 1.0
    assert report.margin == 0.0
    assert report.poincare == pytest.approx(1.0, abs=1e-12)
    assert not report.forced
    assert report.passed
    assert report.to_dict()["pass"] is True


def test_inequality_forced_hand_numbers(torus_basis8):
    ops = default_ops(torus_basis8, viscosity=0.1, damping=1.0)
    ledger = make_ledger([0.0, 1.0], [1.0, 1.5], i_f=[0.0, 0.3])
    report = check_energy_inequality(ops, ledger)
    assert report.forced
    # rhs = 1.0 + (2 / 0.1) * 1^2 * 0.3 = 7.0, lhs = 1.5
    assert report.rhs == pytest.approx(7.0, rel=1e-12)
    assert report.margin == pytest.approx(5.5, rel=1e-12)
    # growth is tolerated when forcing is on
    assert report.passed


def test_inequality_detects_violation(torus_basis8):
    ops = default_ops(torus_basis8)
    ledger = make_ledger([0.0, 1.0], [1.0, 2.0])
    report = check_energy_inequality(ops, ledger)
    assert report.margin < 0
    assert not report.passed


def test_inequality_unforced_growth_fails(torus_basis8):
    ops = default_ops(torus_basis8)
    # margin is fine (energies shrink) but a spurious bump must still fail
    ledger = make_ledger([0.0, 0.5, 1.0], [1.0, 0.4, 0.41])
    report = check_energy_inequality(ops, ledger)
    assert report.margin == 0.0
    assert report.max_energy_increase == pytest.approx(0.01 / 0.4, rel=1e-12)
    assert not report.passed


def test_max_energy_increase_zero_when_decreasing():
    ledger = make_ledger([0.0, 0.5, 1.0], [1.0, 0.6, 0.35])
    assert ledger.max_energy_increase() == 0.0


def test_poincare_constant_default_torus(torus_basis8):
    assert poincare_constant(torus_basis8) == pytest.approx(1.0, abs=1e-12)


def test_poincare_constant_rejects_singular_gram():
    fake = types.SimpleNamespace(h1_gram=np.zeros((2, 2)))
    with pytest.raises(ValueError, match="positive definite"):
        poincare_constant(fake)


# ---------------------------------------------------------------------------
# ledger assembly from trajectories


def test_ledger_single_mode_decay(torus_basis8):
    mu = 0.4
    ops = default_ops(torus_basis8, viscosity=mu, damping=0.0)
    g0 = np.zeros(8)
    g0[0] = 1.0
    traj = solve(ops, g0, SolverConfig(dt=1e-3, t_final=0.25,
                                       picard_tol=1e-14))
    ledger = EnergyLedger.from_trajectory(ops, traj)
    # E(t) = e^{-4 mu t}; mode 0 has unit gradient energy so e_h1 = e_l2
    np.testing.assert_allclose(ledger.e_h1, ledger.e_l2, rtol=1e-12)
    exact_int = (1.0 - np.exp(-4 * mu * 0.25)) / (4 * mu)
    assert ledger.i_h1[-1] == pytest.approx(exact_int, rel=1e-5)
    assert ledger.max_l2_quadrature_gap <= 1e-13
    assert np.all(ledger.f_dot_u == 0.0)
    assert np.all(ledger.i_f == 0.0)
    assert np.all(ledger.e_bdry == 0.0)


def test_ledger_forced_columns(torus_basis8):
    ops = default_ops(torus_basis8, viscosity=0.2, damping=0.0)
    F = np.zeros(8)
    F[0] = 0.3
    forcing = lambda t: F
    g0 = 0.1 * np.ones(8)
    traj = solve(ops, g0, SolverConfig(dt=1e-2, t_final=0.1), forcing=forcing)
    ledger = EnergyLedger.from_trajectory(ops, traj, forcing=forcing)
    np.testing.assert_allclose(ledger.f_dot_u, traj.states @ F, rtol=1e-14)
    # constant integrand, trapezoid is exact: int ||f||^2 = 0.09 t
    assert ledger.i_f[-1] == pytest.approx(0.09 * 0.1, rel=1e-12)


def test_ledger_csv_roundtrip(tmp_path, torus_basis8):
    ops = default_ops(torus_basis8)
    rng = np.random.default_rng(3)
    traj = solve(ops, 0.3 * rng.standard_normal(8),
                 SolverConfig(dt=1e-2, t_final=0.05))
    ledger = EnergyLedger.from_trajectory(ops, traj)
    path = tmp_path / "energy.csv"
    ledger.write_csv(path)
    header = path.read_text().splitlines()[0]
    assert header == ",".join(EnergyLedger.COLUMNS)
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    assert data.shape == (traj.num_records, 9)
    np.testing.assert_array_equal(data[:, 1], ledger.e_l2)
    np.testing.assert_array_equal(data[:, 5], ledger.i_h1)


# ---------------------------------------------------------------------------
# structural checks


def test_skew_symmetry_torus(torus_basis8):
    report = check_skew_symmetry(torus_basis8, num_pairs=10, seed=0)
    assert report.passed
    assert report.max_residual <= 1e-12


def test_skew_symmetry_slab(slab_basis12):
    report = check_skew_symmetry(slab_basis12, num_pairs=10, seed=1,
                                 tolerance=1e-8)
    assert report.passed
    assert report.max_residual <= 1e-10


@pytest.mark.parametrize("exponent", [1.0, 2.0, 3.0, 3.5, 5.0])
def test_damping_monotone(torus_basis8, exponent):
    report = damping_monotonicity(torus_basis8, exponent, num_pairs=10, seed=0)
    assert report.passed
    assert report.min_normalized_gap >= -1e-12
    assert report.to_dict()["pass"] is True


# ---------------------------------------------------------------------------
# derivative bounds and stability gap


def test_derivative_bounds_quadratic_path(torus_basis8):
    """Second-order stencils are exact on quadratics, so closed forms hold."""
    rng = np.random.default_rng(2)
    a, b, c = rng.standard_normal((3, 8))
    t = np.linspace(0.0, 1.0, 11)
    G = a[None, :] + np.outer(t, b) + np.outer(t ** 2, c)
    traj = Trajectory(times=t, states=G, scheme="rk4", dt=t[1] - t[0])
    out = derivative_bounds(torus_basis8, traj)

    dG = b[None, :] + 2.0 * np.outer(t, c)
    sup = np.sqrt(np.max(np.einsum("ki,ki->k", dG, dG)))
    h1 = np.einsum("ki,ij,kj->k", dG, torus_basis8.h1_gram, dG)
    integral = cumulative_trapezoid(h1, t, initial=0.0)[-1]
    assert out.sup_l2 == pytest.approx(sup, rel=1e-10)
    assert out.integral_h1 == pytest.approx(integral, rel=1e-10)
    assert out.to_dict() == {"sup_l2": out.sup_l2,
                             "integral_h1": out.integral_h1}


def test_derivative_bounds_needs_three_records(torus_basis8):
    traj = Trajectory(times=np.array([0.0, 0.1]), states=np.zeros((2, 8)),
                      scheme="rk4", dt=0.1)
    with pytest.raises(ValueError, match="three records"):
        derivative_bounds(torus_basis8, traj)


def test_stability_gap_values():
    t = np.array([0.0, 0.1, 0.2])
    A = Trajectory(times=t, states=np.array([[1.0, 0.0], [0.5, 0.5], [0.0, 1.0]]),
                   scheme="rk4", dt=0.1)
    B = Trajectory(times=t, states=np.array([[1.0, 0.0], [0.5, 0.0], [0.0, 0.0]]),
                   scheme="rk4", dt=0.1)
    gap = stability_gap(A, B)
    np.testing.assert_allclose(gap.gap_sq, [0.0, 0.25, 1.0], atol=1e-15)
    assert gap.sup_gap_sq == 1.0


def test_stability_gap_requires_matching_times():
    A = Trajectory(times=np.array([0.0, 0.1]), states=np.zeros((2, 2)),
                   scheme="rk4", dt=0.1)
    B = Trajectory(times=np.array([0.0, 0.2]), states=np.zeros((2, 2)),
                   scheme="rk4", dt=0.2)
    with pytest.raises(ValueError, match="record times"):
        stability_gap(A, B)


# ---------------------------------------------------------------------------
# energy identity residuals


def test_residual_zero_on_consistent_series(torus_basis8):
    """Ledger built to satisfy the trapezoid balance exactly gives residual 0.

    The forcing-work column is constructed recursively so every step's
    average matches the dissipation terms plus the energy difference.
    """
    ops = default_ops(torus_basis8, viscosity=0.3, damping=0.7)
    mu, theta = 0.3, 0.7
    rng = np.random.default_rng(4)
    n = 12
    t = np.linspace(0.0, 1.1, n)
    dt = t[1] - t[0]
    e_l2 = np.abs(rng.standard_normal(n)) + 0.5
    e_h1 = np.abs(rng.standard_normal(n))
    e_bdry = np.abs(rng.standard_normal(n))
    e_damp = np.abs(rng.standard_normal(n))

    def avg(x):
        return 0.5 * (x[1:] + x[:-1])

    need = (2 * mu * avg(e_h1) + mu * avg(e_bdry) + theta * avg(e_damp)
            + 0.5 * np.diff(e_l2) / dt)
    f = np.zeros(n)
    for k in range(n - 1):
        f[k + 1] = 2.0 * need[k] - f[k]

    ledger = make_ledger(t, e_l2, e_h1=e_h1, e_bdry=e_bdry, e_damp=e_damp,
                         f_dot_u=f)
    res = energy_residuals(ops, ledger)
    assert res.shape == (n - 1,)
    assert np.abs(res).max() <= 1e-14


def test_residual_scales_like_dt_cubed(torus_basis16):
    ops = default_ops(torus_basis16, viscosity=0.1, damping=1.0)
    rng = np.random.default_rng(3)
    g0 = 0.5 * rng.standard_normal(16)
    consts = []
    for dt in (2e-3, 1e-3):
        traj = solve(ops, g0, SolverConfig(dt=dt, t_final=0.05,
                                           picard_tol=1e-12))
        ledger = EnergyLedger.from_trajectory(ops, traj)
        res = np.abs(energy_residuals(ops, ledger)).max()
        assert res > 0.0
        consts.append(res / dt ** 3)
    ratio = consts[0] / consts[1]
    assert 0.5 <= ratio <= 2.0
