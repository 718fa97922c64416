"""Divergence-free velocity bases on the torus and the slab.

Torus modes are real trigonometric polarization pairs orthogonal to each
wavevector.  Slab modes are assembled per horizontal wavevector from 1D
vertical eigenproblems: tangential (toroidal) and mean-flow profiles solve a
scalar Robin problem, vertical-velocity (poloidal) profiles solve a
fourth-order problem with clamped values, and in both cases the slip condition
2 D(w) nu . tau + alpha w . tau = 0 is the natural boundary condition of the
assembled weak form, so certified modes fall out of a dense symmetric
generalized eigensolve without imposing boundary rows.

All modes are L2-orthonormal; ordering is by nondecreasing H1 energy with a
deterministic lexicographic tie-break, so a basis of size m is a prefix of any
larger basis on the same domain.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg

from . import modal
from .domain import (DEFAULT_OVERSAMPLE, DomainSpec, QuadratureGrid, Slab,
                     Torus, slab_grid, torus_grid)
from .errors import EigensolverError, GridResolutionError

TWO_PI = 2.0 * np.pi


# ---------------------------------------------------------------------------
# modes


@dataclass(frozen=True)
class BasisMode:
    """One velocity mode with its metadata and evaluation payload.

    Torus payload: wavevector ``kappa`` with cos/sin amplitude vectors.
    Slab payload: horizontal wavevector ``kxy`` plus per-component Legendre
    profiles multiplying cos(k.x) and sin(k.x).
    """

    index: int
    geometry: str
    wavevector: tuple[int, ...]
    family: str
    phase: str
    vertical_index: int | None
    h1_energy: float
    boundary_energy: float
    vertical_eigenvalue: float | None = None
    kappa: np.ndarray | None = None
    amp_cos: np.ndarray | None = None
    amp_sin: np.ndarray | None = None
    kxy: np.ndarray | None = None
    cos_prof: np.ndarray | None = None
    sin_prof: np.ndarray | None = None


def mode_values(mode: BasisMode, domain: DomainSpec, nodes: np.ndarray) -> np.ndarray:
    """Evaluate a mode on arbitrary nodes, shape (3, n)."""
    if mode.geometry == "torus":
        theta = mode.kappa @ nodes
        return np.outer(mode.amp_cos, np.cos(theta)) + np.outer(mode.amp_sin, np.sin(theta))
    theta = mode.kxy @ nodes[:2]
    ct, st = np.cos(theta), np.sin(theta)
    h = domain.half_height
    vc = modal.eval_series(mode.cos_prof, nodes[2], h)
    vs = modal.eval_series(mode.sin_prof, nodes[2], h)
    return vc * ct + vs * st


def mode_gradients(mode: BasisMode, domain: DomainSpec, nodes: np.ndarray) -> np.ndarray:
    """Gradient tensor on arbitrary nodes: out[c, d] = d w_c / d x_d, shape (3, 3, n)."""
    n = nodes.shape[1]
    out = np.empty((3, 3, n))
    if mode.geometry == "torus":
        theta = mode.kappa @ nodes
        ct, st = np.cos(theta), np.sin(theta)
        for d in range(3):
            kd = mode.kappa[d]
            out[:, d] = np.outer(mode.amp_cos, -kd * st) + np.outer(mode.amp_sin, kd * ct)
        return out
    theta = mode.kxy @ nodes[:2]
    ct, st = np.cos(theta), np.sin(theta)
    h = domain.half_height
    vc = modal.eval_series(mode.cos_prof, nodes[2], h)
    vs = modal.eval_series(mode.sin_prof, nodes[2], h)
    for d in range(2):
        kd = mode.kxy[d]
        out[:, d] = vc * (-kd * st) + vs * (kd * ct)
    out[:, 2] = (modal.eval_series(mode.cos_prof, nodes[2], h, deriv=1) * ct
                 + modal.eval_series(mode.sin_prof, nodes[2], h, deriv=1) * st)
    return out


# ---------------------------------------------------------------------------
# torus construction


def _polarization_pair(kappa: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic orthonormal pair spanning the plane orthogonal to kappa."""
    helper = np.array([0.0, 0.0, 1.0])
    if kappa[0] == 0.0 and kappa[1] == 0.0:
        helper = np.array([1.0, 0.0, 0.0])
    d1 = np.cross(kappa, helper)
    d1 /= np.linalg.norm(d1)
    d2 = np.cross(kappa, d1)
    d2 /= np.linalg.norm(d2)
    return d1, d2


def _torus_representatives(bound: int):
    """Wavevector representatives with lexicographically positive first entry."""
    reps = []
    rng = range(-bound, bound + 1)
    for n1 in rng:
        for n2 in rng:
            for n3 in rng:
                n = (n1, n2, n3)
                if n == (0, 0, 0):
                    continue
                if n1 > 0 or (n1 == 0 and n2 > 0) or (n1 == 0 and n2 == 0 and n3 > 0):
                    reps.append(n)
    return reps


def _build_torus_modes(domain: Torus, num_modes: int) -> list[BasisMode]:
    inv_l = np.array([TWO_PI / L for L in domain.lengths])
    amp = math.sqrt(2.0 / domain.volume)
    bound = 1
    while True:
        entries = []
        for n in _torus_representatives(bound):
            kappa = np.array(n) * inv_l
            h1 = float(kappa @ kappa)
            nsq = n[0] ** 2 + n[1] ** 2 + n[2] ** 2
            for pp in range(4):
                entries.append((h1, nsq, n[0], n[1], n[2], pp, kappa))
        entries.sort(key=lambda e: e[:6])
        # Any excluded wavevector has some |n_d| > bound, hence H1 energy at
        # least this much; the selection is final once it sits strictly below.
        exterior = (TWO_PI * (bound + 1) / max(domain.lengths)) ** 2
        if len(entries) >= num_modes and entries[num_modes - 1][0] < exterior:
            break
        bound += 1

    modes = []
    for idx, (h1, _nsq, n1, n2, n3, pp, kappa) in enumerate(entries[:num_modes]):
        d1, d2 = _polarization_pair(kappa)
        pol = (d1, d2)[pp % 2]
        phase = "cos" if pp < 2 else "sin"
        ac = pol * amp if phase == "cos" else np.zeros(3)
        asn = pol * amp if phase == "sin" else np.zeros(3)
        modes.append(BasisMode(
            index=idx, geometry="torus", wavevector=(n1, n2, n3),
            family=f"pol{pp % 2}", phase=phase, vertical_index=None,
            h1_energy=h1, boundary_energy=0.0,
            kappa=kappa, amp_cos=ac, amp_sin=asn,
        ))
    return modes


# ---------------------------------------------------------------------------
# slab construction


def _canonical_sign(columns: np.ndarray) -> np.ndarray:
    """Flip eigenvector signs so the largest-magnitude entry is positive."""
    out = columns.copy()
    for j in range(out.shape[1]):
        i = int(np.argmax(np.abs(out[:, j])))
        if out[i, j] < 0:
            out[:, j] = -out[:, j]
    return out


def _mgs(columns: np.ndarray, metric: np.ndarray) -> np.ndarray:
    """Modified Gram-Schmidt in the given metric, with re-orthogonalization."""
    Q = columns.copy()
    for j in range(Q.shape[1]):
        v = Q[:, j]
        for _ in range(2):
            for i in range(j):
                v = v - (Q[:, i] @ (metric @ v)) * Q[:, i]
        nrm = math.sqrt(v @ (metric @ v))
        Q[:, j] = v / nrm
    return Q


class _VerticalSolver:
    """Caches the 1D vertical eigenproblems for one slab domain."""

    def __init__(self, domain: Slab, ncoef: int, keep: int):
        self.domain = domain
        self.ncoef = ncoef
        self.keep = keep
        self.h = domain.half_height
        self.alpha = domain.friction
        self.G = np.diag(modal.mass_diagonal(ncoef))
        self.D = modal.derivative_matrix(ncoef)
        self.pm, self.pp = modal.endpoint_values(ncoef)
        self._robin = None
        self._clamped = {}

    def robin(self):
        """Eigenpairs of -b'' = lambda b with b'.n + alpha b = 0 at both walls.

        Independent of the horizontal wavevector; eigenvalues ascend.  Returns
        (lambdas, coefficient columns) normalized to unit L2(-h,h) mass.
        """
        if self._robin is None:
            h, a = self.h, self.alpha
            DgD = self.D.T @ self.G @ self.D
            S = DgD / h + a * (np.outer(self.pp, self.pp) + np.outer(self.pm, self.pm))
            M = h * self.G
            try:
                lam, vec = scipy.linalg.eigh(S, M)
            except scipy.linalg.LinAlgError as exc:  # pragma: no cover
                raise EigensolverError(f"Robin eigensolve failed (alpha={a})") from exc
            vec = _mgs(_canonical_sign(vec), M)
            self._robin = (lam, vec)
        return self._robin

    def clamped(self, kmag: float):
        """Eigenpairs of the vertical-velocity problem at horizontal |k| = kmag.

        Profiles vanish at the walls; the slip condition on the induced
        horizontal flow (-w'/|k| along k) is the natural boundary condition.
        Mass is the 3D kinetic energy: (w'/|k|)^2 + w^2.
        """
        key = round(kmag, 12)
        if key not in self._clamped:
            h, a, k2 = self.h, self.alpha, kmag ** 2
            B = modal.interior_basis(self.ncoef)
            DB = self.D @ B
            D2B = self.D @ DB
            G = self.G
            M2 = B.T @ G @ B          # integral of w phi (zeta scale)
            M1 = DB.T @ G @ DB        # integral of w' phi'
            M0 = D2B.T @ G @ D2B      # integral of w'' phi''
            rp = self.pp @ DB         # w'(+h) row, up to 1/h
            rm = self.pm @ DB
            S = (M0 / (k2 * h ** 3) + 2.0 * M1 / h + k2 * h * M2
                 + a / (k2 * h ** 2) * (np.outer(rp, rp) + np.outer(rm, rm)))
            M = M1 / (k2 * h) + h * M2
            try:
                lam, vec = scipy.linalg.eigh(S, M)
            except scipy.linalg.LinAlgError as exc:  # pragma: no cover
                raise EigensolverError(f"clamped eigensolve failed (|k|={kmag})") from exc
            vec = _mgs(_canonical_sign(vec), M)
            self._clamped[key] = (lam, B @ vec)
        return self._clamped[key]


def _profile_l2(coeffs: np.ndarray, h: float, G: np.ndarray) -> float:
    return h * float(coeffs @ (G @ coeffs))


def _build_slab_candidates(domain: Slab, solver: _VerticalSolver, reps) -> list[dict]:
    """All candidate modes for the given horizontal representatives.

    Each entry carries exact 1D values of the H1 and boundary energies used
    for ordering; profiles are scaled to unit 3D L2 norm.
    """
    h, a = solver.h, solver.alpha
    G, D = solver.G, solver.D
    area = domain.lengths[0] * domain.lengths[1]
    inv_l = np.array([TWO_PI / L for L in domain.lengths[:2]])
    out = []

    def energy_robin(b):
        db = D @ b
        grad = float(db @ (G @ db)) / h
        bdry = a * (modal.eval_series(b, np.array([h]), h)[0] ** 2
                    + modal.eval_series(b, np.array([-h]), h)[0] ** 2)
        return grad, bdry

    for n1, n2 in reps:
        nsq = n1 * n1 + n2 * n2
        if nsq == 0:
            lam, vec = solver.robin()
            start = 0
            if a == 0.0:
                start = 1  # drop the constant: zero H1 energy breaks positivity
            for j in range(start, start + solver.keep):
                b = vec[:, j] / math.sqrt(area * _profile_l2(vec[:, j], h, G))
                grad, bdry = energy_robin(b)
                h1 = area * grad
                be = area * bdry
                for direction, ph in (("x", 0), ("y", 1)):
                    prof = np.zeros((3, solver.ncoef))
                    prof[ph] = b
                    out.append(dict(
                        key=(h1, nsq, n1, n2, j - start, 2, ph),
                        family=f"mean-{direction}", phase="cos",
                        wavevector=(n1, n2), vertical_index=j - start,
                        h1=h1, bdry=be, lam=lam[j],
                        kxy=np.zeros(2), cos_prof=prof,
                        sin_prof=np.zeros((3, solver.ncoef)),
                    ))
            continue

        kvec = np.array([n1, n2]) * inv_l
        kmag = float(np.linalg.norm(kvec))
        khat = kvec / kmag
        kperp = np.array([-khat[1], khat[0]])

        lam, vec = solver.robin()
        for j in range(solver.keep):
            b = vec[:, j] * math.sqrt(2.0 / area / _profile_l2(vec[:, j], h, G))
            grad, bdry = energy_robin(b)
            h1 = 0.5 * area * (grad + kmag ** 2 * _profile_l2(b, h, G))
            be = 0.5 * area * bdry
            for ph, phase in ((0, "cos"), (1, "sin")):
                cos_prof = np.zeros((3, solver.ncoef))
                sin_prof = np.zeros((3, solver.ncoef))
                target = cos_prof if phase == "cos" else sin_prof
                target[0] = kperp[0] * b
                target[1] = kperp[1] * b
                out.append(dict(
                    key=(h1, nsq, n1, n2, j, 0, ph),
                    family="toroidal", phase=phase,
                    wavevector=(n1, n2), vertical_index=j,
                    h1=h1, bdry=be, lam=lam[j],
                    kxy=kvec, cos_prof=cos_prof, sin_prof=sin_prof,
                ))

        lam_p, vec_p = solver.clamped(kmag)
        for j in range(solver.keep):
            w = vec_p[:, j]
            dw = (D @ w) / h
            l2 = 0.5 * area * (_profile_l2(dw, h, G) / kmag ** 2 + _profile_l2(w, h, G))
            w = w / math.sqrt(l2)
            dw = (D @ w) / h
            d2w = (D @ dw) / h
            h1 = 0.5 * area * (_profile_l2(d2w, h, G) / kmag ** 2
                               + 2.0 * _profile_l2(dw, h, G)
                               + kmag ** 2 * _profile_l2(w, h, G))
            dw_top = modal.eval_series(w, np.array([h]), h, deriv=1)[0]
            dw_bot = modal.eval_series(w, np.array([-h]), h, deriv=1)[0]
            be = 0.5 * area * a * (dw_top ** 2 + dw_bot ** 2) / kmag ** 2
            for ph, phase in ((0, "cos"), (1, "sin")):
                cos_prof = np.zeros((3, solver.ncoef))
                sin_prof = np.zeros((3, solver.ncoef))
                if phase == "cos":
                    cos_prof[2] = w
                    sin_prof[0] = -khat[0] / kmag * dw
                    sin_prof[1] = -khat[1] / kmag * dw
                else:
                    sin_prof[2] = w
                    cos_prof[0] = khat[0] / kmag * dw
                    cos_prof[1] = khat[1] / kmag * dw
                out.append(dict(
                    key=(h1, nsq, n1, n2, j, 1, ph),
                    family="poloidal", phase=phase,
                    wavevector=(n1, n2), vertical_index=j,
                    h1=h1, bdry=be, lam=lam_p[j],
                    kxy=kvec, cos_prof=cos_prof, sin_prof=sin_prof,
                ))
    return out


def _build_slab_modes(domain: Slab, num_modes: int,
                      vertical_modes: int | None) -> tuple[list[BasisMode], int]:
    keep = vertical_modes or max(6, math.ceil(math.sqrt(3.0 * num_modes)))
    degree = max(2 * keep, math.ceil(keep * math.pi / 2.0) + 16)
    solver = _VerticalSolver(domain, degree + 1, keep)

    bound = 1
    while True:
        reps = [(0, 0)]
        rng = range(-bound, bound + 1)
        for n1 in rng:
            for n2 in rng:
                if n1 > 0 or (n1 == 0 and n2 > 0):
                    reps.append((n1, n2))
        cands = _build_slab_candidates(domain, solver, reps)
        cands.sort(key=lambda c: c["key"])
        exterior = (TWO_PI * (bound + 1) / max(domain.lengths[:2])) ** 2
        if len(cands) >= num_modes and cands[num_modes - 1]["h1"] < exterior:
            break
        bound += 1

    selected = cands[:num_modes]
    for c in selected:
        if c["vertical_index"] == keep - 1:
            raise GridResolutionError(
                "vertical candidate pool exhausted for the requested mode count; "
                "pass a larger vertical_modes"
            )
    modes = [BasisMode(
        index=i, geometry="slab", wavevector=c["wavevector"], family=c["family"],
        phase=c["phase"], vertical_index=c["vertical_index"],
        h1_energy=c["h1"], boundary_energy=c["bdry"],
        vertical_eigenvalue=float(c["lam"]),
        kxy=c["kxy"], cos_prof=c["cos_prof"], sin_prof=c["sin_prof"],
    ) for i, c in enumerate(selected)]
    return modes, solver.ncoef


# ---------------------------------------------------------------------------
# basis set


@dataclass
class BasisSet:
    """Orthonormal basis with cached node values and operator grams.

    ``values[i, c, x]`` and ``gradients[i, c, d, x]`` hold mode i evaluated on
    the quadrature grid; ``boundary_gram_unit`` is the friction-free wall form
    integral of (u . tau)(v . tau), to be scaled by the slip coefficient.
    """

    domain: DomainSpec
    grid: QuadratureGrid
    modes: list[BasisMode]
    values: np.ndarray
    gradients: np.ndarray
    l2_gram: np.ndarray
    h1_gram: np.ndarray
    boundary_gram_unit: np.ndarray
    boundary_values: np.ndarray | None = None
    profile_ncoef: int | None = None
    _proj: np.ndarray = field(default=None, repr=False)
    _tensor: np.ndarray | None = field(default=None, repr=False)

    @property
    def num_modes(self) -> int:
        return len(self.modes)

    @property
    def friction(self) -> float:
        return getattr(self.domain, "friction", 0.0)

    @property
    def max_wave_index(self) -> tuple[int, ...]:
        dims = 3 if isinstance(self.domain, Torus) else 2
        return tuple(max(abs(m.wavevector[d]) for m in self.modes) for d in range(dims))

    @property
    def cubic_exact(self) -> bool:
        """True when quadrature integrates triple products of modes exactly."""
        K = self.max_wave_index
        ok = all(self.grid.counts[d] >= 3 * K[d] + 1 for d in range(len(K)))
        if isinstance(self.domain, Slab):
            # Gauss with n3 points is exact to degree 2 n3 - 1.
            deg = self.profile_ncoef - 1
            ok = ok and 2 * self.grid.counts[2] - 1 >= 3 * deg + 1
        return ok

    def evaluate(self, coeffs: np.ndarray) -> np.ndarray:
        c = np.asarray(coeffs, dtype=float)
        if c.shape != (self.num_modes,):
            raise ValueError(f"expected {self.num_modes} coefficients, got shape {c.shape}")
        m = self.num_modes
        return (c @ self.values.reshape(m, -1)).reshape(3, -1)

    def project(self, fieldvals: np.ndarray) -> np.ndarray:
        f = np.asarray(fieldvals, dtype=float)
        if f.shape != (3, self.grid.num_nodes):
            raise ValueError(
                f"field shape {f.shape} does not match grid (3, {self.grid.num_nodes})")
        return self._proj @ f.ravel()

    def evaluate_gradient(self, coeffs: np.ndarray) -> np.ndarray:
        c = np.asarray(coeffs, dtype=float)
        m = self.num_modes
        return (c @ self.gradients.reshape(m, -1)).reshape(3, 3, -1)


def _minimal_counts(domain, modes, ncoef):
    if isinstance(domain, Torus):
        K = [max(abs(m.wavevector[d]) for m in modes) for d in range(3)]
        return tuple(2 * k + 1 for k in K)
    K = [max(abs(m.wavevector[d]) for m in modes) for d in range(2)]
    return (2 * K[0] + 1, 2 * K[1] + 1, ncoef)


def build_basis(domain: DomainSpec, num_modes: int, *,
                oversample: float = DEFAULT_OVERSAMPLE,
                counts: tuple[int, int, int] | None = None,
                vertical_modes: int | None = None) -> BasisSet:
    """Construct the first ``num_modes`` modes and their quadrature cache.

    The grid defaults to ``oversample`` times the minimal per-direction
    resolution of the selected mode set (2x makes cubic and quartic mode
    products exact).  Explicit ``counts`` override the default; counts below
    the minimal resolution raise GridResolutionError.
    """
    if num_modes < 1:
        raise ValueError("num_modes must be at least 1")
    if oversample < 1.0:
        raise ValueError("oversample must be >= 1")

    ncoef = None
    if isinstance(domain, Torus):
        modes = _build_torus_modes(domain, num_modes)
    else:
        modes, ncoef = _build_slab_modes(domain, num_modes, vertical_modes)

    minimal = _minimal_counts(domain, modes, ncoef)
    if counts is None:
        counts = tuple(math.ceil(oversample * n) for n in minimal)
    elif any(c < n for c, n in zip(counts, minimal)):
        raise GridResolutionError(
            f"grid counts {tuple(counts)} too coarse for the requested modes "
            f"(need at least {minimal})")

    if isinstance(domain, Torus):
        grid = torus_grid(domain, counts, oversample)
    else:
        grid = slab_grid(domain, counts, oversample)
    return assemble_cache(domain, grid, modes, profile_ncoef=ncoef)


def assemble_cache(domain: DomainSpec, grid: QuadratureGrid,
                   modes: list[BasisMode], *,
                   profile_ncoef: int | None = None) -> BasisSet:
    """Evaluate modes on the grid and assemble the gram matrices.

    Shared by fresh construction and file loading so both produce the same
    bytes; raises if the mode set fails the orthonormality guard.
    """
    m, nn = len(modes), grid.num_nodes
    values = np.empty((m, 3, nn))
    gradients = np.empty((m, 3, 3, nn))
    for i, mode in enumerate(modes):
        values[i] = mode_values(mode, domain, grid.nodes)
        gradients[i] = mode_gradients(mode, domain, grid.nodes)

    wq = grid.weights
    V = values.reshape(m, -1)
    proj = V * np.tile(wq, 3)
    l2 = proj @ V.T
    Gr = gradients.reshape(m, -1)
    h1 = (Gr * np.tile(wq, 9)) @ Gr.T
    l2 = 0.5 * (l2 + l2.T)
    h1 = 0.5 * (h1 + h1.T)

    bvals = None
    bG = np.zeros((m, m))
    if isinstance(domain, Slab):
        bvals = np.empty((m, 3, grid.boundary_nodes.shape[1]))
        for i, mode in enumerate(modes):
            bvals[i] = mode_values(mode, domain, grid.boundary_nodes)
        tang = bvals[:, :2, :].reshape(m, -1)
        bG = (tang * np.tile(grid.boundary_weights, 2)) @ tang.T
        bG = 0.5 * (bG + bG.T)

    dev = np.abs(l2 - np.eye(m)).max()
    if dev > 1e-10:
        raise EigensolverError(f"orthonormalization failed: gram deviation {dev:.2e}")

    return BasisSet(
        domain=domain, grid=grid, modes=modes,
        values=values, gradients=gradients,
        l2_gram=l2, h1_gram=h1, boundary_gram_unit=bG,
        boundary_values=bvals, profile_ncoef=profile_ncoef, _proj=proj,
    )


# ---------------------------------------------------------------------------
# inner products and field ops


def inner_l2(basis: BasisSet, a: np.ndarray, b: np.ndarray) -> float:
    a, b = (np.asarray(v, dtype=float) for v in (a, b))
    if a.shape != (basis.num_modes,) or b.shape != (basis.num_modes,):
        raise ValueError("coefficient length does not match basis size")
    return float(a @ (basis.l2_gram @ b))


def inner_h1(basis: BasisSet, a: np.ndarray, b: np.ndarray) -> float:
    """Gradient inner product: sum_i (d_i u, d_i v)."""
    a, b = (np.asarray(v, dtype=float) for v in (a, b))
    if a.shape != (basis.num_modes,) or b.shape != (basis.num_modes,):
        raise ValueError("coefficient length does not match basis size")
    return float(a @ (basis.h1_gram @ b))


def inner_boundary(basis: BasisSet, a: np.ndarray, b: np.ndarray,
                   friction: float | None = None) -> float:
    """Wall form integral of alpha (u . tau)(v . tau); zero on the torus."""
    a, b = (np.asarray(v, dtype=float) for v in (a, b))
    if a.shape != (basis.num_modes,) or b.shape != (basis.num_modes,):
        raise ValueError("coefficient length does not match basis size")
    alpha = basis.friction if friction is None else friction
    return alpha * float(a @ (basis.boundary_gram_unit @ b))


def evaluate_field(basis: BasisSet, coeffs: np.ndarray,
                   nodes: np.ndarray | None = None) -> np.ndarray:
    """Reconstruct the velocity field; defaults to the basis grid."""
    if nodes is None:
        return basis.evaluate(coeffs)
    c = np.asarray(coeffs, dtype=float)
    if c.shape != (basis.num_modes,):
        raise ValueError("coefficient length does not match basis size")
    out = np.zeros((3, nodes.shape[1]))
    for ci, mode in zip(c, basis.modes):
        if ci != 0.0:
            out += ci * mode_values(mode, basis.domain, nodes)
    return out


def project_field(basis: BasisSet, fieldvals: np.ndarray) -> np.ndarray:
    """L2 projection of grid samples onto the basis span."""
    return basis.project(fieldvals)


# ---------------------------------------------------------------------------
# certification


@dataclass(frozen=True)
class CertificationReport:
    """Residual maxima from an independently refined quadrature grid."""

    max_divergence: float
    max_normal_trace: float
    max_slip: float
    max_gram_deviation: float
    tolerances: dict
    passed: bool
    worst_modes: dict

    def to_dict(self) -> dict:
        return {
            "max_divergence": self.max_divergence,
            "max_normal_trace": self.max_normal_trace,
            "max_slip": self.max_slip,
            "max_gram_deviation": self.max_gram_deviation,
            "tolerances": dict(self.tolerances),
            "pass": self.passed,
            "worst_modes": dict(self.worst_modes),
        }


def verify_basis(basis: BasisSet, *, tol_divergence: float = 1e-8,
                 tol_normal: float = 1e-8, tol_slip: float = 1e-6,
                 tol_gram: float = 1e-10, refine: int = 2) -> CertificationReport:
    """Certify divergence, wall conditions and orthonormality.

    All residuals are evaluated on a grid ``refine`` times finer than the
    basis grid, so build-time aliasing cannot mask a defect.  The worst
    offending mode index is reported per check.
    """
    domain = basis.domain
    counts = tuple(refine * c for c in basis.grid.counts)
    if isinstance(domain, Torus):
        fine = torus_grid(domain, counts, basis.grid.oversample * refine)
    else:
        fine = slab_grid(domain, counts, basis.grid.oversample * refine)

    m = basis.num_modes
    vals = np.empty((m, 3, fine.num_nodes))
    div_max, div_worst = 0.0, 0
    for i, mode in enumerate(basis.modes):
        vals[i] = mode_values(mode, domain, fine.nodes)
        g = mode_gradients(mode, domain, fine.nodes)
        d = float(np.abs(g[0, 0] + g[1, 1] + g[2, 2]).max())
        if d > div_max:
            div_max, div_worst = d, i

    V = vals.reshape(m, -1)
    gram = (V * np.tile(fine.weights, 3)) @ V.T
    gdev = np.abs(gram - np.eye(m))
    gram_max = float(gdev.max())
    gram_worst = int(np.unravel_index(np.argmax(gdev), gdev.shape)[0])

    normal_max, normal_worst = 0.0, 0
    slip_max, slip_worst = 0.0, 0
    if isinstance(domain, Slab):
        bn = fine.boundary_nodes
        sign = fine.boundary_normal_sign
        alpha = domain.friction
        for i, mode in enumerate(basis.modes):
            bv = mode_values(mode, domain, bn)
            bg = mode_gradients(mode, domain, bn)
            tr = float(np.abs(bv[2]).max())
            if tr > normal_max:
                normal_max, normal_worst = tr, i
            for tau in range(2):
                res = sign * (bg[tau, 2] + bg[2, tau]) + alpha * bv[tau]
                r = float(np.abs(res).max())
                if r > slip_max:
                    slip_max, slip_worst = r, i

    tols = {"divergence": tol_divergence, "normal_trace": tol_normal,
            "slip": tol_slip, "gram": tol_gram}
    ok = (div_max <= tol_divergence and normal_max <= tol_normal
          and slip_max <= tol_slip and gram_max <= tol_gram)
    return CertificationReport(
        max_divergence=div_max, max_normal_trace=normal_max,
        max_slip=slip_max, max_gram_deviation=gram_max,
        tolerances=tols, passed=ok,
        worst_modes={"divergence": div_worst, "normal_trace": normal_worst,
                     "slip": slip_worst, "gram": gram_worst},
    )


def perturbed_copy(basis: BasisSet, mode_index: int, delta: float) -> BasisSet:
    """Return a copy with one mode's payload nudged (for certification tests)."""
    modes = list(basis.modes)
    mode = modes[mode_index]
    if mode.geometry == "torus":
        amp = mode.amp_cos.copy() if mode.phase == "cos" else mode.amp_sin.copy()
        amp[0] += delta
        mode = replace(mode, amp_cos=amp) if mode.phase == "cos" else replace(mode, amp_sin=amp)
    else:
        prof = mode.cos_prof.copy() if mode.phase == "cos" else mode.sin_prof.copy()
        comp = 2 if mode.family == "poloidal" else int(np.argmax(np.abs(prof).sum(axis=1)))
        prof[comp, min(3, prof.shape[1] - 1)] += delta
        mode = replace(mode, cos_prof=prof) if mode.phase == "cos" else replace(mode, sin_prof=prof)
    modes[mode_index] = mode
    out = replace(basis, modes=modes)
    return out
