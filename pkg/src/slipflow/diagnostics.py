"""Energy accounting and structural checks for Galerkin trajectories.

The ledger tracks kinetic energy alongside the dissipation channels (gradient,
wall friction, nonlinear absorption) and their running time integrals; the
checks below turn the a priori estimates of the continuous problem into
falsifiable numerical statements with explicit tolerances.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.integrate import cumulative_trapezoid

from .basis import BasisSet
from .operators import (OperatorSet, damping_energy, damping_rhs,
                        trilinear_form)
from .timestepper import Trajectory


# ---------------------------------------------------------------------------
# energy ledger


@dataclass
class EnergyLedger:
    """Per-record energies and running dissipation integrals.

    Columns: kinetic energy (coefficient norm), gradient energy, absorbed
    power density integral |u|^(p+1), wall friction energy, the cumulative
    trapezoid integrals of the latter three, the forcing work rate (f, u) and
    the cumulative integral of the forcing norm squared.
    """

    times: np.ndarray
    e_l2: np.ndarray
    e_h1: np.ndarray
    e_damp: np.ndarray
    e_bdry: np.ndarray
    i_h1: np.ndarray
    i_damp: np.ndarray
    i_f: np.ndarray
    f_dot_u: np.ndarray
    max_l2_quadrature_gap: float

    COLUMNS = ("t", "e_l2", "e_h1", "e_damp", "e_bdry",
               "i_h1", "i_damp", "i_f", "f_dot_u")

    @classmethod
    def from_trajectory(cls, ops: OperatorSet, traj: Trajectory,
                        forcing=None) -> "EnergyLedger":
        basis = ops.basis
        exponent = ops.params.damping_exponent
        alpha = basis.friction
        t = traj.times
        G = traj.states
        k = t.size

        e_l2 = np.einsum("ki,ki->k", G, G)
        e_h1 = np.einsum("ki,ij,kj->k", G, basis.h1_gram, G)
        e_bdry = alpha * np.einsum("ki,ij,kj->k", G, basis.boundary_gram_unit, G)
        e_damp = np.empty(k)
        gap = 0.0
        w = basis.grid.weights
        for j in range(k):
            u = basis.evaluate(G[j])
            magsq = u[0] ** 2 + u[1] ** 2 + u[2] ** 2
            quad = float(magsq @ w)
            gap = max(gap, abs(quad - e_l2[j]) / max(1.0, e_l2[j]))
            e_damp[j] = damping_energy(basis, G[j], exponent)

        fdot = np.zeros(k)
        fsq = np.zeros(k)
        if forcing is not None:
            for j in range(k):
                F = np.asarray(forcing(t[j]), dtype=float)
                fdot[j] = F @ G[j]
                fsq[j] = F @ F

        i_h1 = cumulative_trapezoid(e_h1, t, initial=0.0)
        i_damp = cumulative_trapezoid(e_damp, t, initial=0.0)
        i_f = cumulative_trapezoid(fsq, t, initial=0.0)
        return cls(times=t, e_l2=e_l2, e_h1=e_h1, e_damp=e_damp, e_bdry=e_bdry,
                   i_h1=i_h1, i_damp=i_damp, i_f=i_f, f_dot_u=fdot,
                   max_l2_quadrature_gap=gap)

    def write_csv(self, path) -> None:
        data = np.column_stack([self.times, self.e_l2, self.e_h1, self.e_damp,
                                self.e_bdry, self.i_h1, self.i_damp, self.i_f,
                                self.f_dot_u])
        np.savetxt(path, data, delimiter=",", header=",".join(self.COLUMNS),
                   comments="", fmt="%.17g")

    def max_energy_increase(self) -> float:
        """Largest relative step-to-step growth of kinetic energy."""
        e = self.e_l2
        prev = np.maximum(e[:-1], 1e-300)
        return float(np.max((e[1:] - e[:-1]) / prev, initial=0.0))


def poincare_constant(basis: BasisSet) -> float:
    """Constant C with ||u|| <= C ||grad u|| on the basis span."""
    lam = scipy.linalg.eigvalsh(basis.h1_gram)
    lam_min = float(lam[0])
    if lam_min <= 0:
        raise ValueError(
            f"gradient gram is not positive definite (min eigenvalue {lam_min:.3e})")
    return 1.0 / np.sqrt(lam_min)


# ---------------------------------------------------------------------------
# a priori energy inequality


@dataclass(frozen=True)
class EnergyInequalityReport:
    """Certified form of the kinetic energy bound.

    ``lhs`` is the supremum over records of
    E(t) + 2 mu int ||grad u||^2 + 2 theta int |u|^(p+1); ``rhs`` is
    E(0) + (2 / mu) C^2 int ||f||^2 with C the span's Poincare constant.
    """

    lhs: float
    rhs: float
    margin: float
    poincare: float
    max_energy_increase: float
    tolerance: float
    monotone_tolerance: float
    forced: bool
    passed: bool

    def to_dict(self) -> dict:
        return {"lhs": self.lhs, "rhs": self.rhs, "margin": self.margin,
                "poincare_constant": self.poincare,
                "max_energy_increase": self.max_energy_increase,
                "tolerance": self.tolerance,
                "monotone_tolerance": self.monotone_tolerance,
                "forced": self.forced, "pass": self.passed}


def check_energy_inequality(ops: OperatorSet, ledger: EnergyLedger, *,
                            forced: bool | None = None,
                            tolerance: float = 1e-8,
                            monotone_tolerance: float = 1e-12) -> EnergyInequalityReport:
    """Evaluate the a priori bound along a recorded trajectory.

    For unforced runs the kinetic energy must also be nonincreasing up to
    ``monotone_tolerance`` in relative terms.
    """
    mu = ops.params.viscosity
    theta = ops.params.damping_coefficient
    combined = ledger.e_l2 + 2.0 * mu * ledger.i_h1 + 2.0 * theta * ledger.i_damp
    lhs = float(np.max(combined))
    C = poincare_constant(ops.basis)
    rhs = float(ledger.e_l2[0] + (2.0 / mu) * C ** 2 * ledger.i_f[-1])
    margin = rhs - lhs
    if forced is None:
        forced = bool(np.any(ledger.i_f > 0.0))
    inc = ledger.max_energy_increase()
    ok = margin >= -tolerance * (1.0 + abs(rhs))
    if not forced:
        ok = ok and inc <= monotone_tolerance
    return EnergyInequalityReport(
        lhs=lhs, rhs=rhs, margin=margin, poincare=C, max_energy_increase=inc,
        tolerance=tolerance, monotone_tolerance=monotone_tolerance,
        forced=forced, passed=ok)


# ---------------------------------------------------------------------------
# structural checks


@dataclass(frozen=True)
class SkewSymmetryReport:
    max_residual: float
    tolerance: float
    num_pairs: int
    seed: int
    passed: bool

    def to_dict(self) -> dict:
        return {"max_residual": self.max_residual, "tolerance": self.tolerance,
                "num_pairs": self.num_pairs, "seed": self.seed,
                "pass": self.passed}


def check_skew_symmetry(basis: BasisSet, *, num_pairs: int = 100, seed: int = 0,
                        tolerance: float = 1e-10) -> SkewSymmetryReport:
    """Probe the convection form's cancellation b(u, v, v) = 0.

    Pairs of unit-norm random coefficient vectors are drawn from a seeded
    generator; the residual should vanish because the advecting field is
    divergence free with no wall penetration.
    """
    rng = np.random.default_rng(seed)
    m = basis.num_modes
    worst = 0.0
    for _ in range(num_pairs):
        u = rng.standard_normal(m)
        v = rng.standard_normal(m)
        u /= np.linalg.norm(u)
        v /= np.linalg.norm(v)
        worst = max(worst, abs(trilinear_form(basis, u, v, v)))
    return SkewSymmetryReport(max_residual=worst, tolerance=tolerance,
                              num_pairs=num_pairs, seed=seed,
                              passed=worst <= tolerance)


@dataclass(frozen=True)
class MonotonicityReport:
    min_normalized_gap: float
    tolerance: float
    exponent: float
    num_pairs: int
    seed: int
    passed: bool

    def to_dict(self) -> dict:
        return {"min_normalized_gap": self.min_normalized_gap,
                "tolerance": self.tolerance, "exponent": self.exponent,
                "num_pairs": self.num_pairs, "seed": self.seed,
                "pass": self.passed}


def damping_monotonicity(basis: BasisSet, exponent: float, *,
                         num_pairs: int = 100, seed: int = 0,
                         tolerance: float = 1e-12) -> MonotonicityReport:
    """Check the projected absorption operator is monotone.

    For each random pair the pairing (D(u) - D(v), u - v) must be nonnegative;
    it is normalized by (||u||^p + ||v||^p)(||u|| + ||v||) to make the
    tolerance scale free.
    """
    rng = np.random.default_rng(seed)
    m = basis.num_modes
    worst = np.inf
    for _ in range(num_pairs):
        u = rng.standard_normal(m)
        v = rng.standard_normal(m)
        du = damping_rhs(basis, u, exponent)
        dv = damping_rhs(basis, v, exponent)
        gap = float((du - dv) @ (u - v))
        nu, nv = np.linalg.norm(u), np.linalg.norm(v)
        scale = float((nu ** exponent + nv ** exponent) * (nu + nv))
        worst = min(worst, gap / scale)
    return MonotonicityReport(min_normalized_gap=worst, tolerance=tolerance,
                              exponent=exponent, num_pairs=num_pairs, seed=seed,
                              passed=bool(worst >= -tolerance))


# ---------------------------------------------------------------------------
# time-derivative bounds and stability gap


@dataclass(frozen=True)
class DerivativeBounds:
    """Discrete norms of the state's time derivative.

    ``sup_l2`` approximates sup_t ||u'(t)|| and ``integral_h1`` the integral
    of ||grad u'||^2, both from second-order finite differences of the
    recorded states.
    """

    sup_l2: float
    integral_h1: float

    def to_dict(self) -> dict:
        return {"sup_l2": self.sup_l2, "integral_h1": self.integral_h1}


def derivative_bounds(basis: BasisSet, traj: Trajectory) -> DerivativeBounds:
    t, G = traj.times, traj.states
    if t.size < 3:
        raise ValueError("need at least three records for derivative bounds")
    dt = t[1] - t[0]
    dG = np.empty_like(G)
    dG[1:-1] = (G[2:] - G[:-2]) / (2.0 * dt)
    dG[0] = (-3.0 * G[0] + 4.0 * G[1] - G[2]) / (2.0 * dt)
    dG[-1] = (3.0 * G[-1] - 4.0 * G[-2] + G[-3]) / (2.0 * dt)
    sup_l2 = float(np.sqrt(np.max(np.einsum("ki,ki->k", dG, dG))))
    h1 = np.einsum("ki,ij,kj->k", dG, basis.h1_gram, dG)
    integral_h1 = float(cumulative_trapezoid(h1, t, initial=0.0)[-1])
    return DerivativeBounds(sup_l2=sup_l2, integral_h1=integral_h1)


@dataclass(frozen=True)
class GapSeries:
    """Squared coefficient-space distance between two trajectories."""

    times: np.ndarray
    gap_sq: np.ndarray

    @property
    def sup_gap_sq(self) -> float:
        return float(np.max(self.gap_sq))


def stability_gap(traj_a: Trajectory, traj_b: Trajectory) -> GapSeries:
    if traj_a.times.shape != traj_b.times.shape or not np.allclose(
            traj_a.times, traj_b.times, rtol=0.0, atol=1e-12):
        raise ValueError("trajectories must share record times")
    diff = traj_a.states - traj_b.states
    return GapSeries(times=traj_a.times.copy(),
                     gap_sq=np.einsum("ki,ki->k", diff, diff))


# ---------------------------------------------------------------------------
# per-step energy identity residual


def energy_residuals(ops: OperatorSet, ledger: EnergyLedger) -> np.ndarray:
    """Trapezoid residual of the discrete energy balance, one value per step.

    The exact balance is dE/dt = -4 mu E_h1 - 2 mu E_bdry - 2 theta E_damp
    + 2 (f, u); for midpoint stepping with node-trapezoid averaging each
    step's residual shrinks like dt cubed.
    """
    mu = ops.params.viscosity
    theta = ops.params.damping_coefficient
    t = ledger.times
    dt = np.diff(t)

    def avg(x):
        return 0.5 * (x[1:] + x[:-1])

    de = 0.5 * np.diff(ledger.e_l2)
    rate = (2.0 * mu * avg(ledger.e_h1) + mu * avg(ledger.e_bdry)
            + theta * avg(ledger.e_damp) - avg(ledger.f_dot_u))
    return de + dt * rate
