"""Matplotlib figures for experiment reports, written as deterministic SVG."""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 7,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "lines.linewidth": 1.2,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "svg.hashsalt": "difobs",
    "svg.fonttype": "path",
}

METHOD_STYLE = {
    "observer": dict(color="tab:blue", ls="-", marker="o"),
    "diffusion_maps": dict(color="tab:green", ls="-", marker="s"),
    "moving_average_2": dict(color="0.5", ls="--", marker=""),
    "moving_average_3": dict(color="0.5", ls="-.", marker=""),
    "moving_average_5": dict(color="0.5", ls=":", marker=""),
    "observer_extension": dict(color="tab:blue"),
    "nystrom": dict(color="tab:orange"),
}


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    plt.close(fig)


def metric_vs_drift(report, metric, path, coords=("elevation", "azimuth")):
    """One panel per angle: mean metric vs drift rate, one-std error bars."""
    summary = report.summary(metric)
    methods = sorted({k[0] for k in summary}, key=lambda m: (m not in METHOD_STYLE, m))
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, len(coords), figsize=(7.0, 2.8), sharey=True)
        for ax, coord in zip(np.atleast_1d(axes), coords):
            for method in methods:
                pts = sorted((k[2], v) for k, v in summary.items() if k[0] == method and k[1] == coord)
                if not pts:
                    continue
                c = [p[0] for p in pts]
                mean = [p[1][0] for p in pts]
                std = [p[1][1] for p in pts]
                ax.errorbar(c, mean, yerr=std, capsize=2, label=method.replace("_", " "),
                            **METHOD_STYLE.get(method, {}))
            ax.set_title(coord)
            ax.set_xlabel("drift rate c")
        np.atleast_1d(axes)[0].set_ylabel("nRMSE [dB]" if metric == "nrmse_db" else metric)
        np.atleast_1d(axes)[-1].legend(frameon=False)
        fig.tight_layout()
        _save(fig, path)


def rate_estimates(report, path, n_rates=4):
    """Estimated ``-lambda_l`` (mean +- std) against the Hermite truth ``-l``."""
    ell = np.arange(1, n_rates + 1)
    vals = [report.values("diffusion_maps", f"lambda_{k}", "rate") for k in ell]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(3.6, 2.8))
        ax.plot(ell, -ell, "s", color="tab:green", label="ground truth")
        ax.errorbar(ell, [-np.mean(v) for v in vals], yerr=[np.std(v, ddof=1) if len(v) > 1 else 0 for v in vals],
                    fmt="o", color="tab:blue", ecolor="k", capsize=3, label="estimate")
        ax.set_xticks(ell)
        ax.set_xlabel("mode l")
        ax.set_ylabel("-lambda_l")
        ax.legend(frameon=False)
        fig.tight_layout()
        _save(fig, path)


def extension_comparison(report, path, coords=("elevation", "azimuth")):
    summary = report.summary("correlation")
    methods = ("observer_extension", "nystrom")
    x = np.arange(len(coords))
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(3.6, 2.8))
        for j, method in enumerate(methods):
            mean = [np.mean([v[0] for k, v in summary.items() if k[0] == method and k[1] == c]) for c in coords]
            ax.bar(x + 0.38 * (j - 0.5), mean, width=0.36, label=method.replace("_", " "),
                   **METHOD_STYLE.get(method, {}))
        ax.set_xticks(x)
        ax.set_xticklabels(coords)
        ax.set_ylabel("correlation")
        ax.legend(frameon=False)
        fig.tight_layout()
        _save(fig, path)
