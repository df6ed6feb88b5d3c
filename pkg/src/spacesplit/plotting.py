"""Matplotlib figures written next to the JSON/CSV outputs."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (6.4, 4.0),
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "font.size": 10,
}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return str(path)


def plot_terms(terms, stderr, path, title="unstable series terms"):
    """log10 |term_k| with 1-sigma bars, plus the noise floor."""
    terms = np.asarray(terms, dtype=float)
    stderr = np.asarray(stderr, dtype=float)
    k = np.arange(len(terms))
    with plt.rc_context(STYLE):
        fig, (ax0, ax1) = plt.subplots(1, 2, figsize=(9, 3.6))
        ax0.errorbar(k, terms, yerr=stderr, fmt="o", ms=3, capsize=2)
        ax0.axhline(0, color="k", lw=0.6)
        ax0.set_xlabel("k")
        ax0.set_ylabel("term")
        mag = np.abs(terms)
        ax1.semilogy(k, np.where(mag > 0, mag, np.nan), "o-", ms=3, label="|term|")
        if np.all(np.isfinite(stderr)):
            ax1.semilogy(k, stderr, "--", color="0.5", label="stderr")
        ax1.set_xlabel("k")
        ax1.legend(frameon=False)
        fig.suptitle(title)
        return _save(fig, path)


def plot_frame(export: dict, path):
    """h, curvature, rho0 and rho along one sample chain."""
    k = export["k"]
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(2, 2, figsize=(9, 5.5), sharex=True)
        axes[0, 0].plot(k, export["h"], lw=0.8)
        axes[0, 0].set_ylabel("h")
        axes[0, 1].plot(k, np.linalg.norm(export["curvature"], axis=-1), lw=0.8)
        axes[0, 1].set_ylabel("|curvature|")
        axes[1, 0].plot(k, export["rho0"], lw=0.8)
        axes[1, 0].set_ylabel("rho0")
        axes[1, 1].plot(k, export["rho"], lw=0.8)
        axes[1, 1].set_ylabel("rho")
        for ax in axes[1]:
            ax.set_xlabel("orbit index")
        return _save(fig, path)


def plot_oracle(result, path):
    est = np.asarray(result.per_seed)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.plot(np.arange(len(est)), est, "o", label="per seed")
        ax.axhline(result.estimate, color="C1", label="mean")
        ax.axhspan(result.estimate - 3 * result.stderr,
                   result.estimate + 3 * result.stderr, color="C1", alpha=0.2)
        ax.set_xlabel("seed index")
        ax.set_ylabel("central difference")
        ax.set_title(f"t = {result.t_step:g}")
        ax.legend(frameon=False)
        return _save(fig, path)


def plot_checks(result, path):
    """Each check's value relative to its threshold (below 1 passes)."""
    names = [c.name for c in result.checks]
    ratio = []
    for c in result.checks:
        r = c.value / c.threshold if c.threshold else (0.0 if c.passed else np.inf)
        ratio.append(r)
    ratio = np.asarray(ratio, dtype=float)
    shown = np.clip(np.where(np.isfinite(ratio), ratio, 1e6), 1e-18, 1e6)
    colors = ["C2" if c.passed else "C3" for c in result.checks]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(7, 0.35 * len(names) + 1.2))
        ax.barh(names, shown, color=colors)
        ax.set_xscale("log")
        ax.axvline(1.0, color="k", lw=0.8)
        ax.set_xlabel("value / threshold")
        return _save(fig, path)


def plot_scaling(Ns, errors, envelope, path, label="|mean|"):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.loglog(Ns, errors, "o-", label=label)
        ax.loglog(Ns, envelope, "--", label="envelope")
        ax.set_xlabel("N")
        ax.legend(frameon=False)
        return _save(fig, path)


def plot_turnover(n_push, errors, model_errors, path):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.semilogy(n_push, np.maximum(errors, 1e-18), "o-", label="error")
        ax.semilogy(n_push, model_errors, "--", label="error model")
        ax.set_xlabel("pushes n")
        ax.legend(frameon=False)
        return _save(fig, path)
