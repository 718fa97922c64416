"""Spectral Galerkin solver for damped incompressible flow with slip walls.

Heavy imports are deferred so that entry points can pin threading environment
variables before numpy is loaded.
"""

__version__ = "0.1.0"

_EXPORTS = {
    "Torus": "domain",
    "Slab": "domain",
    "QuadratureGrid": "domain",
    "torus_grid": "domain",
    "slab_grid": "domain",
    "BasisMode": "basis",
    "BasisSet": "basis",
    "build_basis": "basis",
    "verify_basis": "basis",
    "evaluate_field": "basis",
    "project_field": "basis",
    "inner_l2": "basis",
    "inner_h1": "basis",
    "inner_boundary": "basis",
    "CertificationReport": "basis",
    "save_basis": "basisio",
    "load_basis": "basisio",
    "basis_hash": "basisio",
    "PhysicsParams": "operators",
    "OperatorSet": "operators",
    "build_operators": "operators",
    "trilinear_form": "operators",
    "convection_rhs": "operators",
    "damping_rhs": "operators",
    "SolverConfig": "timestepper",
    "Trajectory": "timestepper",
    "initial_projection": "timestepper",
    "solve": "timestepper",
    "EnergyLedger": "diagnostics",
    "check_energy_inequality": "diagnostics",
    "check_skew_symmetry": "diagnostics",
    "damping_monotonicity": "diagnostics",
    "derivative_bounds": "diagnostics",
    "stability_gap": "diagnostics",
    "MmsCase": "harness",
    "mms_forcing": "harness",
    "temporal_convergence": "harness",
    "spatial_convergence": "harness",
    "twin_run": "harness",
    "load_config": "config",
    "SlipflowError": "errors",
    "GridResolutionError": "errors",
    "EigensolverError": "errors",
    "BasisFormatError": "errors",
    "PicardNotConverged": "errors",
    "NonFiniteState": "errors",
    "ConfigValidationError": "errors",
}

__all__ = sorted(_EXPORTS) + ["__version__"]


def __getattr__(name):
    if name in _EXPORTS:
        import importlib

        module = importlib.import_module(f".{_EXPORTS[name]}", __name__)
        return getattr(module, name)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


def __dir__():
    return __all__
