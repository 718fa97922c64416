"""Time integration of the Galerkin coefficient system.

The semi-discrete system for coefficients g(t) of an orthonormal basis reads

    g' = -mu A g - N(g) + F(t)

with A the viscous-plus-friction stiffness and N the projected convection and
damping.  Two integrators are provided: an implicit-midpoint scheme with the
stiff linear part solved by a cached Cholesky factor and the nonlinearity
handled by Picard iteration (energy-dissipative for F = 0), and classical RK4
for convergence studies.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .basis import BasisSet
from .errors import NonFiniteState, PicardNotConverged
from .operators import OperatorSet

SCHEMES = ("imex-cn", "rk4")


@dataclass(frozen=True)
class SolverConfig:
    """Numerical parameters of one run."""

    dt: float
    t_final: float
    scheme: str = "imex-cn"
    picard_tol: float = 1e-10
    picard_max_iter: int = 60
    record_every: int = 1
    blowup_factor: float = 1e6

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not self.t_final > 0:
            raise ValueError(f"t_final must be positive, got {self.t_final}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}, pick from {SCHEMES}")
        if self.record_every < 1:
            raise ValueError("record_every must be at least 1")
        if self.picard_max_iter < 1:
            raise ValueError("picard_max_iter must be at least 1")
        n = self.t_final / self.dt
        if abs(n - round(n)) > 1e-8 * max(1.0, n):
            raise ValueError(
                f"dt={self.dt} does not divide t_final={self.t_final} evenly")

    @property
    def num_steps(self) -> int:
        return int(round(self.t_final / self.dt))


@dataclass
class Trajectory:
    """Recorded states of one run.

    ``states[k]`` holds the coefficients at ``times[k]``; with record_every=1
    these are all integrator nodes, otherwise a thinned subset that always
    includes the final state.
    """

    times: np.ndarray
    states: np.ndarray
    scheme: str
    dt: float
    picard_iterations: int = 0

    @property
    def num_records(self) -> int:
        return self.times.size

    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def write_states_csv(self, path) -> None:
        m = self.states.shape[1]
        header = "t," + ",".join(f"g{i}" for i in range(m))
        data = np.column_stack([self.times, self.states])
        np.savetxt(path, data, delimiter=",", header=header, comments="",
                   fmt="%.17g")


def initial_projection(basis: BasisSet, velocity_fn) -> np.ndarray:
    """Project a velocity callable nodes -> (3, n) onto the basis."""
    vals = np.asarray(velocity_fn(basis.grid.nodes), dtype=float)
    if vals.shape != (3, basis.grid.num_nodes):
        raise ValueError(
            f"initial velocity returned shape {vals.shape}, expected "
            f"(3, {basis.grid.num_nodes})")
    return basis.project(vals)


class _ImexStepper:
    """Implicit midpoint with Picard iteration on the nonlinear part."""

    def __init__(self, ops: OperatorSet, dt: float, tol: float, max_iter: int):
        self.ops = ops
        self.dt = dt
        self.tol = tol
        self.max_iter = max_iter
        mu = ops.params.viscosity
        m = ops.stiffness.shape[0]
        half = 0.5 * dt * mu * ops.stiffness
        self.explicit = np.eye(m) - half
        self.factor = scipy.linalg.cho_factor(np.eye(m) + half)

    def step(self, g: np.ndarray, t: float, forcing) -> tuple[np.ndarray, int]:
        dt = self.dt
        base = self.explicit @ g
        if forcing is not None:
            base = base + dt * np.asarray(forcing(t + 0.5 * dt), dtype=float)
        scale = max(1.0, float(np.linalg.norm(g)))
        gn = g
        for it in range(1, self.max_iter + 1):
            mid = 0.5 * (g + gn)
            rhs = base - dt * self.ops.nonlinear(mid)
            gnew = scipy.linalg.cho_solve(self.factor, rhs)
            delta = float(np.linalg.norm(gnew - gn))
            gn = gnew
            if delta <= self.tol * scale:
                return gn, it
        raise PicardNotConverged(t, self.max_iter, delta)


class _Rk4Stepper:
    """Classical fourth-order Runge-Kutta on the full right-hand side."""

    def __init__(self, ops: OperatorSet, dt: float):
        self.ops = ops
        self.dt = dt
        self.mu_stiff = ops.params.viscosity * ops.stiffness

    def _rhs(self, g: np.ndarray, t: float, forcing) -> np.ndarray:
        out = -(self.mu_stiff @ g) - self.ops.nonlinear(g)
        if forcing is not None:
            out = out + np.asarray(forcing(t), dtype=float)
        return out

    def step(self, g: np.ndarray, t: float, forcing) -> tuple[np.ndarray, int]:
        dt = self.dt
        k1 = self._rhs(g, t, forcing)
        k2 = self._rhs(g + 0.5 * dt * k1, t + 0.5 * dt, forcing)
        k3 = self._rhs(g + 0.5 * dt * k2, t + 0.5 * dt, forcing)
        k4 = self._rhs(g + dt * k3, t + dt, forcing)
        return g + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4), 0


def solve(ops: OperatorSet, g0: np.ndarray, config: SolverConfig,
          forcing=None) -> Trajectory:
    """Integrate from g0 to t_final.

    ``forcing`` is a callable t -> coefficient vector, or None.  Raises
    NonFiniteState if the state leaves the finite range or grows past
    blowup_factor times its initial magnitude.
    """
    g = np.array(g0, dtype=float)
    m = ops.stiffness.shape[0]
    if g.shape != (m,):
        raise ValueError(f"initial coefficients have shape {g.shape}, expected ({m},)")

    if config.scheme == "imex-cn":
        stepper = _ImexStepper(ops, config.dt, config.picard_tol,
                               config.picard_max_iter)
    else:
        stepper = _Rk4Stepper(ops, config.dt)

    nsteps = config.num_steps
    limit = config.blowup_factor * max(1.0, float(np.linalg.norm(g)))
    rec_idx = list(range(0, nsteps + 1, config.record_every))
    if rec_idx[-1] != nsteps:
        rec_idx.append(nsteps)
    times = np.empty(len(rec_idx))
    states = np.empty((len(rec_idx), m))
    times[0], states[0] = 0.0, g
    pos = 1
    picard_total = 0

    for n in range(nsteps):
        t = n * config.dt
        g, iters = stepper.step(g, t, forcing)
        picard_total += iters
        if not np.all(np.isfinite(g)):
            raise NonFiniteState(t + config.dt, "non-finite coefficient")
        nrm = float(np.linalg.norm(g))
        if nrm > limit:
            raise NonFiniteState(
                t + config.dt, f"state norm {nrm:.3e} exceeded blow-up threshold")
        if pos < len(rec_idx) and n + 1 == rec_idx[pos]:
            times[pos] = (n + 1) * config.dt
            states[pos] = g
            pos += 1

    return Trajectory(times=times, states=states, scheme=config.scheme,
                      dt=config.dt, picard_iterations=picard_total)
