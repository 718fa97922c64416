"""Report figures, rendered straight to files.

Uses the Agg backend so report generation works headless; every function
takes an explicit output path and returns it.
"""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def energy_figure(ledger, path):
    """Kinetic energy decay and the dissipation channels over time."""
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    ax1.plot(ledger.times, ledger.e_l2, color="tab:blue")
    ax1.set_xlabel("t")
    ax1.set_ylabel("kinetic energy")
    ax1.set_title("energy decay")
    ax1.grid(True, alpha=0.3)

    ax2.plot(ledger.times, ledger.e_h1, label="gradient", color="tab:orange")
    ax2.plot(ledger.times, ledger.e_damp, label="absorption", color="tab:green")
    if np.any(ledger.e_bdry > 0):
        ax2.plot(ledger.times, ledger.e_bdry, label="wall friction",
                 color="tab:red")
    ax2.set_xlabel("t")
    ax2.set_ylabel("dissipation density")
    ax2.set_title("dissipation channels")
    ax2.legend()
    ax2.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def temporal_figure(study, path):
    """Log-log error versus step size with the fitted slope."""
    dts = np.asarray(study.dts)
    errs = np.asarray(study.errors)
    fig, ax = plt.subplots(figsize=(5.5, 4.2))
    ax.loglog(dts, errs, "o-", color="tab:blue",
              label=f"{study.scheme} (slope {study.fitted_order:.2f})")
    guide = errs[0] * (dts / dts[0]) ** round(study.fitted_order)
    ax.loglog(dts, guide, "k--", alpha=0.5,
              label=f"slope {round(study.fitted_order)}")
    ax.set_xlabel("dt")
    ax.set_ylabel("final-time error")
    ax.set_title(f"temporal convergence: {study.case}")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def spatial_figure(study, path):
    """Error against mode count for the nested-basis study."""
    fig, ax = plt.subplots(figsize=(5.5, 4.2))
    ax.semilogy(study.mode_counts, study.errors, "s-", color="tab:purple")
    ax.set_xlabel("modes")
    ax.set_ylabel("final-time error vs reference")
    ax.set_title(f"spatial convergence (reference m={study.reference_modes})")
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def twin_figure(study, path):
    """Squared separation over time for each perturbation size."""
    fig, ax = plt.subplots(figsize=(5.5, 4.2))
    for eps, series in zip(study.epsilons, study.gap_series):
        ax.semilogy(series.times, np.maximum(series.gap_sq, 1e-300),
                    label=f"eps={eps:g}")
    ax.set_xlabel("t")
    ax.set_ylabel("squared separation")
    ax.set_title("twin-run separation")
    ax.legend()
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
